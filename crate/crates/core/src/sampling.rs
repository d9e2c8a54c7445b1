//! Random inputs for property checks: rotations, smooth lattice fields and smooth
//! gauge maps. Fields are low-degree trigonometric polynomials so that products
//! of a few of them stay resolved on the grid.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::algebra::{rodrigues, GroupElem};
use crate::lattice::Grid;

pub fn random_vector<R: Rng>(rng: &mut R, scale: f64) -> Vector3<f64> {
    Vector3::new(
        rng.gen_range(-scale..=scale),
        rng.gen_range(-scale..=scale),
        rng.gen_range(-scale..=scale),
    )
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = random_vector(rng, 1.0);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotation exp(x̂) with a uniformly random axis and angle in [0, π].
pub fn random_rotation<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    let axis = random_unit(rng);
    rodrigues(&(axis * rng.gen_range(0.0..=std::f64::consts::PI)))
}

/// Mean-free trigonometric polynomial of degree `max_mode` in each of `stride`
/// components, site-major. Mode-k coefficients are drawn from [−A/k², A/k²].
pub fn random_smooth_field<R: Rng>(
    rng: &mut R,
    grid: Grid,
    stride: usize,
    max_mode: usize,
    amplitude: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; grid.n() * stride];
    for c in 0..stride {
        for k in 1..=max_mode {
            let bound = amplitude / (k * k) as f64;
            let a = rng.gen_range(-bound..=bound);
            let b = rng.gen_range(-bound..=bound);
            for (j, x) in grid.points().enumerate() {
                let kx = k as f64 * x;
                out[j * stride + c] += a * kx.cos() + b * kx.sin();
            }
        }
    }
    out
}

/// Smooth gauge map x ↦ R₀ exp(ω(x)) with R₀ uniform and ω a first-degree
/// trigonometric field whose coefficients are bounded by `amplitude`.
pub fn random_gauge_map<R: Rng>(rng: &mut R, grid: Grid, amplitude: f64) -> GroupElem {
    let r0 = random_rotation(rng);
    let omega = random_smooth_field(rng, grid, 3, 1, amplitude);
    let sites = omega
        .chunks_exact(3)
        .map(|w| r0 * rodrigues(&Vector3::new(w[0], w[1], w[2])))
        .collect();
    GroupElem::Gauge { grid, sites }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_rotations_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..16 {
            assert!(GroupElem::so3(random_rotation(&mut rng)).is_ok());
        }
    }

    #[test]
    fn smooth_fields_are_mean_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Grid::new(32).unwrap();
        let f = random_smooth_field(&mut rng, g, 3, 3, 1.0);
        for m in crate::lattice::component_means(&f, 3) {
            assert!(m.abs() < 1e-14);
        }
    }
}
