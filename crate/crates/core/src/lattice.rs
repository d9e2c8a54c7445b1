//! Uniform periodic grids on the circle and the linear operators defined on
//! them: the fourth-order central difference, trigonometric (Fourier-shift)
//! translation, and the periodic Poisson solve for the squared stencil.
//!
//! Grid functions with several components per site (connections and gauge
//! algebra elements) are stored site-major: `values[3 * j + c]`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{EpError, Result};

/// N-point uniform grid on [0, 2π).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(EpError::InvalidParameter(format!(
                "grid size must be even and at least 8, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.point(j))
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.points().map(f).collect()
    }

    /// Samples a vector-valued function into site-major storage.
    pub fn sample3(&self, f: impl Fn(f64) -> [f64; 3]) -> Vec<f64> {
        self.points().flat_map(f).collect()
    }

    /// Discrete L² pairing Σ f_j g_j Δx over all stored components.
    pub fn pair(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * self.spacing()
    }

    /// Fourier symbol of [`diff`]: D e^{ikx} = i·symbol(k)·e^{ikx}.
    pub fn stencil_symbol(&self, k: i64) -> f64 {
        let kh = k as f64 * self.spacing();
        (8.0 * kh.sin() - (2.0 * kh).sin()) / (6.0 * self.spacing())
    }
}

/// Fourth-order central difference (−f_{j+2} + 8f_{j+1} − 8f_{j−1} + f_{j−2}) / (12Δx),
/// applied componentwise to site-major data with `stride` components per site.
pub fn diff_strided(f: &[f64], stride: usize, dx: f64) -> Vec<f64> {
    let len = f.len();
    let n = len / stride;
    let inv = 1.0 / (12.0 * dx);
    let mut out = vec![0.0; len];
    for j in 0..n {
        let jp1 = (j + 1) % n;
        let jp2 = (j + 2) % n;
        let jm1 = (j + n - 1) % n;
        let jm2 = (j + n - 2) % n;
        for c in 0..stride {
            let at = |s: usize| f[s * stride + c];
            out[j * stride + c] = (-at(jp2) + 8.0 * at(jp1) - 8.0 * at(jm1) + at(jm2)) * inv;
        }
    }
    out
}

pub fn diff(f: &[f64], dx: f64) -> Vec<f64> {
    diff_strided(f, 1, dx)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Signed wavenumber of FFT bin `k` on an n-point grid; the Nyquist bin maps to n/2.
fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Applies a real-symmetric Fourier multiplier to each component of site-major data.
/// `multiplier(k)` gets the signed wavenumber; the Nyquist bin receives only the
/// real part so that real data stays real.
fn apply_multiplier(
    f: &[f64],
    stride: usize,
    multiplier: impl Fn(i64) -> Complex<f64>,
) -> Vec<f64> {
    let n = f.len() / stride;
    let (fwd, inv) = plans(n);
    let mut out = vec![0.0; f.len()];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for c in 0..stride {
        for j in 0..n {
            buf[j] = Complex::new(f[j * stride + c], 0.0);
        }
        fwd.process(&mut buf);
        for (k, z) in buf.iter_mut().enumerate() {
            let m = multiplier(wavenumber(k, n));
            *z *= if 2 * k == n { Complex::new(m.re, 0.0) } else { m };
        }
        inv.process(&mut buf);
        let scale = 1.0 / n as f64;
        for j in 0..n {
            out[j * stride + c] = buf[j].re * scale;
        }
    }
    out
}

/// Translation by `theta`: returns samples of x ↦ f(x − θ). Grid-multiple angles are
/// exact circular shifts; other angles use trigonometric interpolation.
pub fn shift_strided(f: &[f64], stride: usize, theta: f64) -> Vec<f64> {
    let n = f.len() / stride;
    let dx = 2.0 * PI / n as f64;
    let steps = theta / dx;
    let nearest = steps.round();
    if (steps - nearest).abs() <= 1e-12 * nearest.abs().max(1.0) {
        let s = (nearest as i64).rem_euclid(n as i64) as usize;
        let mut out = vec![0.0; f.len()];
        for j in 0..n {
            let src = (j + n - s) % n;
            out[j * stride..(j + 1) * stride].copy_from_slice(&f[src * stride..(src + 1) * stride]);
        }
        return out;
    }
    apply_multiplier(f, stride, |k| Complex::from_polar(1.0, -(k as f64) * theta))
}

pub fn shift(f: &[f64], theta: f64) -> Vec<f64> {
    shift_strided(f, 1, theta)
}

/// Exact circular shift; fails unless θ is a multiple of the grid spacing.
pub fn shift_exact(f: &[f64], stride: usize, theta: f64) -> Result<Vec<f64>> {
    let n = f.len() / stride;
    let dx = 2.0 * PI / n as f64;
    let steps = theta / dx;
    if (steps - steps.round()).abs() > 1e-12 * steps.round().abs().max(1.0) {
        return Err(EpError::OffGrid { angle: theta, spacing: dx });
    }
    Ok(shift_strided(f, stride, steps.round() * dx))
}

/// Spectral derivative, used only where the exact derivative of a trigonometric
/// interpolant is needed (never inside the equations themselves).
pub fn spectral_diff(f: &[f64], stride: usize) -> Vec<f64> {
    apply_multiplier(f, stride, |k| Complex::new(0.0, k as f64))
}

/// Solves scale·(−D²)u = μ componentwise on the complement of ker D, i.e. with the
/// constant and the odd-even (Nyquist) components of the result set to zero.
/// Components of μ along ker D are discarded; callers check them beforehand.
pub fn solve_neg_d2(mu: &[f64], stride: usize, grid: &Grid, scale: f64) -> Vec<f64> {
    let n = grid.n();
    apply_multiplier(mu, stride, |k| {
        if k == 0 || k.unsigned_abs() as usize == n / 2 {
            Complex::new(0.0, 0.0)
        } else {
            let s = grid.stencil_symbol(k);
            Complex::new(1.0 / (scale * s * s), 0.0)
        }
    })
}

/// Per-component mean Σ f_j / N.
pub fn component_means(f: &[f64], stride: usize) -> Vec<f64> {
    let n = f.len() / stride;
    (0..stride)
        .map(|c| (0..n).map(|j| f[j * stride + c]).sum::<f64>() / n as f64)
        .collect()
}

/// Per-component odd-even amplitude Σ (−1)^j f_j / N.
pub fn component_odd_even(f: &[f64], stride: usize) -> Vec<f64> {
    let n = f.len() / stride;
    (0..stride)
        .map(|c| {
            (0..n)
                .map(|j| if j % 2 == 0 { f[j * stride + c] } else { -f[j * stride + c] })
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Removes the constant and odd-even components of every channel.
pub fn project_off_stencil_kernel(f: &[f64], stride: usize) -> Vec<f64> {
    let means = component_means(f, stride);
    let alts = component_odd_even(f, stride);
    f.iter()
        .enumerate()
        .map(|(i, v)| {
            let j = i / stride;
            let c = i % stride;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            v - means[c] - sign * alts[c]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn rejects_small_or_odd_grids() {
        assert!(Grid::new(6).is_err());
        assert!(Grid::new(9).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn stencil_is_fourth_order_on_sine() {
        let errs: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| {
                let g = Grid::new(n).unwrap();
                let d = diff(&g.sample(f64::sin), g.spacing());
                max_abs_diff(&d, &g.sample(f64::cos))
            })
            .collect();
        for w in errs.windows(2) {
            let p = (w[0] / w[1]).log2();
            assert!((p - 4.0).abs() < 0.1, "order {p}");
        }
    }

    #[test]
    fn stencil_kills_constants_and_odd_even_mode() {
        let g = Grid::new(16).unwrap();
        let alt: Vec<f64> = (0..16).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(diff(&alt, g.spacing()).iter().all(|v| v.abs() < 1e-12));
        assert!(diff(&[3.5; 16], g.spacing()).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn grid_shift_matches_roll() {
        let g = Grid::new(16).unwrap();
        let f: Vec<f64> = (0..16).map(|j| j as f64).collect();
        let s = shift(&f, 3.0 * g.spacing());
        assert_eq!(s[3], 0.0);
        assert_eq!(s[0], 13.0);
        assert!(shift_exact(&f, 1, 0.5 * g.spacing()).is_err());
    }

    #[test]
    fn off_grid_shift_is_exact_on_trig_polynomials() {
        let g = Grid::new(32).unwrap();
        let f = g.sample(|x| (2.0 * x).sin() + 0.3 * (5.0 * x).cos());
        let theta = 0.4321;
        let expect = g.sample(|x| (2.0 * (x - theta)).sin() + 0.3 * (5.0 * (x - theta)).cos());
        assert!(max_abs_diff(&shift(&f, theta), &expect) < 1e-13);
    }

    #[test]
    fn poisson_solve_inverts_squared_stencil() {
        let g = Grid::new(64).unwrap();
        let u = g.sample(|x| x.sin() + 0.2 * (3.0 * x).cos());
        let d = g.spacing();
        let mu: Vec<f64> = diff(&diff(&u, d), d).iter().map(|v| -2.0 * v).collect();
        let back = solve_neg_d2(&mu, 1, &g, 2.0);
        assert!(max_abs_diff(&back, &u) < 1e-12);
    }
}
