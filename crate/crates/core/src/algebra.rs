//! Coordinate realizations of the Lie algebras and groups used by every system:
//! 𝔰𝔬(3) ≅ ℝ³, vector fields on the circle sampled on a periodic grid, the gauge
//! algebra C∞(S¹, 𝔰𝔬(3)) on the same grid, and finite products of these.
//!
//! All formulas use the right-invariant convention ξ = ġg⁻¹. On 𝔰𝔬(3) the bracket
//! is the cross product and Ad*_R = Rᵀ. On the circle the bracket is
//! ad_u v = u′v − uv′ and the coadjoint operator is its exact discrete adjoint
//! under the pairing Σ μ_j x_j Δx.

use std::ops::Range;

use nalgebra::{Matrix3, Vector3};

use crate::error::{ensure_finite, EpError, Result};
use crate::lattice::{self, Grid};

#[derive(Clone, Debug, PartialEq)]
pub enum Algebra {
    So3,
    VectS1(Grid),
    GaugeSo3(Grid),
    Product(Vec<Algebra>),
}

impl Algebra {
    pub fn dim(&self) -> usize {
        match self {
            Algebra::So3 => 3,
            Algebra::VectS1(g) => g.n(),
            Algebra::GaugeSo3(g) => 3 * g.n(),
            Algebra::Product(fs) => fs.iter().map(Algebra::dim).sum(),
        }
    }

    pub fn grid(&self) -> Option<Grid> {
        match self {
            Algebra::VectS1(g) | Algebra::GaugeSo3(g) => Some(*g),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Algebra::So3 => "so3".into(),
            Algebra::VectS1(g) => format!("vect_s1[{}]", g.n()),
            Algebra::GaugeSo3(g) => format!("gauge_so3[{}]", g.n()),
            Algebra::Product(fs) => {
                let names: Vec<String> = fs.iter().map(Algebra::name).collect();
                format!("product({})", names.join(", "))
            }
        }
    }

    fn blocks(factors: &[Algebra]) -> Vec<Range<usize>> {
        let mut start = 0;
        factors
            .iter()
            .map(|f| {
                let r = start..start + f.dim();
                start = r.end;
                r
            })
            .collect()
    }
}

fn mismatch(what: &str, a: &Algebra, b: &Algebra) -> EpError {
    EpError::Shape(format!("{what}: {} vs {}", a.name(), b.name()))
}

macro_rules! coord_vector {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            algebra: Algebra,
            coords: Vec<f64>,
        }

        impl $name {
            pub fn new(algebra: Algebra, coords: Vec<f64>) -> Result<Self> {
                if coords.len() != algebra.dim() {
                    return Err(EpError::Shape(format!(
                        "{} expects {} coordinates, got {}",
                        algebra.name(),
                        algebra.dim(),
                        coords.len()
                    )));
                }
                ensure_finite(stringify!($name), &coords)?;
                Ok(Self { algebra, coords })
            }

            pub(crate) fn new_unchecked(algebra: Algebra, coords: Vec<f64>) -> Self {
                debug_assert_eq!(coords.len(), algebra.dim());
                Self { algebra, coords }
            }

            pub fn zeros(algebra: Algebra) -> Self {
                let n = algebra.dim();
                Self { algebra, coords: vec![0.0; n] }
            }

            pub fn algebra(&self) -> &Algebra {
                &self.algebra
            }

            pub fn coords(&self) -> &[f64] {
                &self.coords
            }

            pub fn into_coords(self) -> Vec<f64> {
                self.coords
            }

            pub fn sup_norm(&self) -> f64 {
                self.coords.iter().fold(0.0, |m, v| m.max(v.abs()))
            }

            pub fn scaled(&self, s: f64) -> Self {
                Self::new_unchecked(self.algebra.clone(), self.coords.iter().map(|v| v * s).collect())
            }

            /// self + s·other
            pub fn axpy(&self, s: f64, other: &Self) -> Self {
                assert_eq!(self.algebra, other.algebra, "axpy across algebras");
                Self::new_unchecked(
                    self.algebra.clone(),
                    self.coords.iter().zip(&other.coords).map(|(a, b)| a + s * b).collect(),
                )
            }

            pub fn sub(&self, other: &Self) -> Self {
                self.axpy(-1.0, other)
            }

            pub fn add(&self, other: &Self) -> Self {
                self.axpy(1.0, other)
            }

            pub fn vec3(&self) -> Vector3<f64> {
                Vector3::new(self.coords[0], self.coords[1], self.coords[2])
            }
        }
    };
}

coord_vector!(AlgElem);
coord_vector!(DualElem);

impl AlgElem {
    pub fn so3(v: Vector3<f64>) -> Self {
        Self::new_unchecked(Algebra::So3, vec![v.x, v.y, v.z])
    }

    pub fn as_dual(&self) -> DualElem {
        DualElem::new_unchecked(self.algebra.clone(), self.coords.clone())
    }
}

impl DualElem {
    pub fn so3(v: Vector3<f64>) -> Self {
        Self::new_unchecked(Algebra::So3, vec![v.x, v.y, v.z])
    }
}

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Axial vector of the skew-symmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues formula, with Taylor series for the coefficients below ‖x‖ = 1e-4.
pub fn rodrigues(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < 1e-4 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(w);
    Matrix3::identity() + k * a + k * k * b
}

fn rotation_defect(r: &Matrix3<f64>) -> (f64, f64) {
    let defect = (r.transpose() * r - Matrix3::identity()).abs().max();
    (defect, r.determinant())
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupElem {
    So3(Matrix3<f64>),
    /// One rotation per lattice site.
    Gauge { grid: Grid, sites: Vec<Matrix3<f64>> },
    /// Rigid rotation of the circle by `angle`.
    Rotation { grid: Grid, angle: f64 },
    Product(Vec<GroupElem>),
}

const ORTHO_TOL: f64 = 1e-12;

impl GroupElem {
    pub fn so3(r: Matrix3<f64>) -> Result<Self> {
        let (defect, det) = rotation_defect(&r);
        if defect > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
            return Err(EpError::NotOrthogonal { defect, det });
        }
        Ok(GroupElem::So3(r))
    }

    pub fn gauge(grid: Grid, sites: Vec<Matrix3<f64>>) -> Result<Self> {
        if sites.len() != grid.n() {
            return Err(EpError::Shape(format!(
                "gauge map needs {} sites, got {}",
                grid.n(),
                sites.len()
            )));
        }
        for r in &sites {
            let (defect, det) = rotation_defect(r);
            if defect > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
                return Err(EpError::NotOrthogonal { defect, det });
            }
        }
        Ok(GroupElem::Gauge { grid, sites })
    }

    /// Site-wise exponential of a gauge algebra element.
    pub fn gauge_exp(x: &AlgElem) -> Result<Self> {
        let Algebra::GaugeSo3(grid) = x.algebra() else {
            return Err(EpError::Incompatible(format!("gauge_exp on {}", x.algebra().name())));
        };
        let sites = x
            .coords()
            .chunks_exact(3)
            .map(|c| rodrigues(&Vector3::new(c[0], c[1], c[2])))
            .collect();
        Ok(GroupElem::Gauge { grid: *grid, sites })
    }

    /// The same rotation at every site.
    pub fn gauge_constant(grid: Grid, r: Matrix3<f64>) -> Self {
        GroupElem::Gauge { grid, sites: vec![r; grid.n()] }
    }

    pub fn rotation(grid: Grid, angle: f64) -> Self {
        GroupElem::Rotation { grid, angle }
    }

    pub fn identity(algebra: &Algebra) -> Self {
        match algebra {
            Algebra::So3 => GroupElem::So3(Matrix3::identity()),
            Algebra::VectS1(g) => GroupElem::Rotation { grid: *g, angle: 0.0 },
            Algebra::GaugeSo3(g) => GroupElem::gauge_constant(*g, Matrix3::identity()),
            Algebra::Product(fs) => GroupElem::Product(fs.iter().map(GroupElem::identity).collect()),
        }
    }

    pub fn compose(&self, other: &GroupElem) -> Result<GroupElem> {
        match (self, other) {
            (GroupElem::So3(a), GroupElem::So3(b)) => Ok(GroupElem::So3(a * b)),
            (GroupElem::Gauge { grid, sites: a }, GroupElem::Gauge { grid: g2, sites: b }) if grid == g2 => {
                Ok(GroupElem::Gauge { grid: *grid, sites: a.iter().zip(b).map(|(x, y)| x * y).collect() })
            }
            (GroupElem::Rotation { grid, angle: a }, GroupElem::Rotation { grid: g2, angle: b }) if grid == g2 => {
                Ok(GroupElem::Rotation { grid: *grid, angle: a + b })
            }
            (GroupElem::Product(a), GroupElem::Product(b)) if a.len() == b.len() => Ok(GroupElem::Product(
                a.iter().zip(b).map(|(x, y)| x.compose(y)).collect::<Result<_>>()?,
            )),
            _ => Err(EpError::Shape("composing group elements of different groups".into())),
        }
    }

    pub fn inverse(&self) -> GroupElem {
        match self {
            GroupElem::So3(r) => GroupElem::So3(r.transpose()),
            GroupElem::Gauge { grid, sites } => {
                GroupElem::Gauge { grid: *grid, sites: sites.iter().map(|r| r.transpose()).collect() }
            }
            GroupElem::Rotation { grid, angle } => GroupElem::Rotation { grid: *grid, angle: -angle },
            GroupElem::Product(fs) => GroupElem::Product(fs.iter().map(GroupElem::inverse).collect()),
        }
    }

    fn check_acts_on(&self, algebra: &Algebra) -> Result<()> {
        let ok = match (self, algebra) {
            (GroupElem::So3(_), Algebra::So3) => true,
            (GroupElem::Gauge { grid, .. }, Algebra::GaugeSo3(g)) => grid == g,
            (GroupElem::Rotation { grid, .. }, Algebra::VectS1(g)) => grid == g,
            (GroupElem::Product(gs), Algebra::Product(fs)) => {
                gs.len() == fs.len() && gs.iter().zip(fs).all(|(g, f)| g.check_acts_on(f).is_ok())
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(EpError::Incompatible(format!("group element does not act on {}", algebra.name())))
        }
    }
}

pub fn exp_so3(x: &AlgElem) -> Result<GroupElem> {
    if *x.algebra() != Algebra::So3 {
        return Err(EpError::Incompatible(format!("exp_so3 on {}", x.algebra().name())));
    }
    Ok(GroupElem::So3(rodrigues(&x.vec3())))
}

fn cross_sites(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.chunks_exact(3)
        .zip(b.chunks_exact(3))
        .flat_map(|(p, q)| {
            [p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2], p[0] * q[1] - p[1] * q[0]]
        })
        .collect()
}

fn rotate_sites(sites: &[Matrix3<f64>], v: &[f64], transpose: bool) -> Vec<f64> {
    sites
        .iter()
        .zip(v.chunks_exact(3))
        .flat_map(|(r, c)| {
            let w = Vector3::new(c[0], c[1], c[2]);
            let out = if transpose { r.transpose() * w } else { r * w };
            [out.x, out.y, out.z]
        })
        .collect()
}

/// ad_x y.
pub fn bracket(x: &AlgElem, y: &AlgElem) -> Result<AlgElem> {
    if x.algebra() != y.algebra() {
        return Err(mismatch("bracket", x.algebra(), y.algebra()));
    }
    let coords = bracket_coords(x.algebra(), x.coords(), y.coords());
    Ok(AlgElem::new_unchecked(x.algebra().clone(), coords))
}

fn bracket_coords(alg: &Algebra, x: &[f64], y: &[f64]) -> Vec<f64> {
    match alg {
        Algebra::So3 | Algebra::GaugeSo3(_) => cross_sites(x, y),
        Algebra::VectS1(g) => {
            let dx = lattice::diff(x, g.spacing());
            let dy = lattice::diff(y, g.spacing());
            (0..x.len()).map(|j| dx[j] * y[j] - x[j] * dy[j]).collect()
        }
        Algebra::Product(fs) => {
            let mut out = Vec::with_capacity(x.len());
            for (f, r) in fs.iter().zip(Algebra::blocks(fs)) {
                out.extend(bracket_coords(f, &x[r.clone()], &y[r]));
            }
            out
        }
    }
}

/// ad*_x μ, defined by ⟨ad*_x μ, y⟩ = ⟨μ, ad_x y⟩.
pub fn ad_star(x: &AlgElem, mu: &DualElem) -> Result<DualElem> {
    if x.algebra() != mu.algebra() {
        return Err(mismatch("ad_star", x.algebra(), mu.algebra()));
    }
    let coords = ad_star_coords(x.algebra(), x.coords(), mu.coords());
    Ok(DualElem::new_unchecked(x.algebra().clone(), coords))
}

fn ad_star_coords(alg: &Algebra, x: &[f64], mu: &[f64]) -> Vec<f64> {
    match alg {
        Algebra::So3 | Algebra::GaugeSo3(_) => cross_sites(mu, x),
        Algebra::VectS1(g) => {
            // Summation by parts on Σ μ (u′v − u v′) gives μ u′ + (μ u)′; this is the
            // continuum u μ′ + 2u′μ written so that the discrete pairing identity is exact.
            let h = g.spacing();
            let du = lattice::diff(x, h);
            let mu_u: Vec<f64> = mu.iter().zip(x).map(|(m, u)| m * u).collect();
            let d_mu_u = lattice::diff(&mu_u, h);
            (0..x.len()).map(|j| mu[j] * du[j] + d_mu_u[j]).collect()
        }
        Algebra::Product(fs) => {
            let mut out = Vec::with_capacity(x.len());
            for (f, r) in fs.iter().zip(Algebra::blocks(fs)) {
                out.extend(ad_star_coords(f, &x[r.clone()], &mu[r]));
            }
            out
        }
    }
}

pub fn pair(mu: &DualElem, x: &AlgElem) -> Result<f64> {
    if x.algebra() != mu.algebra() {
        return Err(mismatch("pair", mu.algebra(), x.algebra()));
    }
    Ok(pair_coords(x.algebra(), mu.coords(), x.coords()))
}

pub(crate) fn pair_coords(alg: &Algebra, mu: &[f64], x: &[f64]) -> f64 {
    match alg {
        Algebra::So3 => mu.iter().zip(x).map(|(a, b)| a * b).sum(),
        Algebra::VectS1(g) | Algebra::GaugeSo3(g) => g.pair(mu, x),
        Algebra::Product(fs) => fs
            .iter()
            .zip(Algebra::blocks(fs))
            .map(|(f, r)| pair_coords(f, &mu[r.clone()], &x[r]))
            .sum(),
    }
}

/// Ad_g x.
pub fn group_ad(g: &GroupElem, x: &AlgElem) -> Result<AlgElem> {
    g.check_acts_on(x.algebra())?;
    Ok(AlgElem::new_unchecked(x.algebra().clone(), adjoint_coords(g, x.coords(), false)))
}

/// Ad*_g μ, defined by ⟨Ad*_g μ, ξ⟩ = ⟨μ, Ad_g ξ⟩.
pub fn group_ad_star(g: &GroupElem, mu: &DualElem) -> Result<DualElem> {
    g.check_acts_on(mu.algebra())?;
    Ok(DualElem::new_unchecked(mu.algebra().clone(), adjoint_coords(g, mu.coords(), true)))
}

fn adjoint_coords(g: &GroupElem, v: &[f64], dual: bool) -> Vec<f64> {
    match g {
        GroupElem::So3(r) => rotate_sites(std::slice::from_ref(r), v, dual),
        GroupElem::Gauge { sites, .. } => rotate_sites(sites, v, dual),
        GroupElem::Rotation { angle, .. } => lattice::shift(v, if dual { -angle } else { *angle }),
        GroupElem::Product(gs) => {
            let mut out = Vec::with_capacity(v.len());
            let mut start = 0;
            for h in gs {
                let len = group_dim(h);
                out.extend(adjoint_coords(h, &v[start..start + len], dual));
                start += len;
            }
            out
        }
    }
}

fn group_dim(g: &GroupElem) -> usize {
    match g {
        GroupElem::So3(_) => 3,
        GroupElem::Gauge { grid, .. } => 3 * grid.n(),
        GroupElem::Rotation { grid, .. } => grid.n(),
        GroupElem::Product(gs) => gs.iter().map(group_dim).sum(),
    }
}

/// Fourth-order central difference in time,
/// (−f(t+2h) + 8f(t+h) − 8f(t−h) + f(t−2h)) / (12h).
pub fn time_derivative<F>(curve: F, t: f64, h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(EpError::InvalidParameter(format!("time step must be positive, got {h}")));
    }
    let fp2 = curve(t + 2.0 * h)?;
    let fp1 = curve(t + h)?;
    let fm1 = curve(t - h)?;
    let fm2 = curve(t - 2.0 * h)?;
    for s in [&fp2, &fp1, &fm1, &fm2] {
        ensure_finite("time_derivative sample", s)?;
    }
    let inv = 1.0 / (12.0 * h);
    Ok((0..fp1.len())
        .map(|i| (-fp2[i] + 8.0 * fp1[i] - 8.0 * fm1[i] + fm2[i]) * inv)
        .collect())
}
