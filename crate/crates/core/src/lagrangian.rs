//! Reduced Lagrangians ℓ(ξ, a): evaluation, analytic functional derivatives,
//! finite-difference oracles for them, and the inertia solve μ ↦ ξ.
//!
//! Degenerate inertia operators are inverted on the complement of their kernel;
//! the preimage returned always has zero kernel component.

use std::fmt::Debug;
use std::sync::Mutex;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Vector3};
use serde::{Deserialize, Serialize};

use crate::actions::{ActionKind, AdvectedState};
use crate::algebra::{AlgElem, Algebra, DualElem};
use crate::error::{EpError, Result};
use crate::lattice::{self, Grid};

/// Default bound on the kernel component of μ accepted by an inertia solve.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    Trivial,
    /// Constant fields in each of `stride` components.
    Constants { stride: usize },
    /// Multiples of a unit vector in ℝ³.
    Axis(Vector3<f64>),
}

impl Kernel {
    /// Largest kernel component of a dual element (means for lattices, ⟨μ,k⟩ for an axis).
    pub fn component(&self, mu: &[f64]) -> f64 {
        match self {
            Kernel::Trivial => 0.0,
            Kernel::Constants { stride } => {
                lattice::component_means(mu, *stride).into_iter().fold(0.0, |m, v| m.max(v.abs()))
            }
            Kernel::Axis(k) => (mu[0] * k.x + mu[1] * k.y + mu[2] * k.z).abs(),
        }
    }

    /// Removes the kernel component of an algebra element.
    pub fn project_out(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Kernel::Trivial => x.to_vec(),
            Kernel::Constants { stride } => {
                let means = lattice::component_means(x, *stride);
                x.iter().enumerate().map(|(i, v)| v - means[i % stride]).collect()
            }
            Kernel::Axis(k) => {
                let d = x[0] * k.x + x[1] * k.y + x[2] * k.z;
                vec![x[0] - d * k.x, x[1] - d * k.y, x[2] - d * k.z]
            }
        }
    }
}

pub trait ReducedLagrangian: Debug + Send + Sync {
    fn name(&self) -> &str;
    fn algebra(&self) -> &Algebra;
    fn parameter_kind(&self) -> ActionKind;
    fn eval(&self, xi: &AlgElem, a: &AdvectedState) -> Result<f64>;
    fn d_xi(&self, xi: &AlgElem, a: &AdvectedState) -> Result<DualElem>;
    fn d_a(&self, xi: &AlgElem, a: &AdvectedState) -> Result<Vec<f64>>;
    fn kernel(&self) -> Kernel;

    fn integrable(&self) -> bool {
        true
    }

    /// Inverts ξ ↦ δℓ/δξ, rejecting μ whose kernel component exceeds `tolerance`.
    fn inertia_solve_with_tolerance(&self, mu: &DualElem, a: &AdvectedState, tolerance: f64) -> Result<AlgElem>;

    fn inertia_solve(&self, mu: &DualElem, a: &AdvectedState) -> Result<AlgElem> {
        self.inertia_solve_with_tolerance(mu, a, COMPATIBILITY_TOL)
    }

    /// Shape checks shared by every method.
    fn check(&self, xi: &AlgElem, a: &AdvectedState) -> Result<()> {
        if xi.algebra() != self.algebra() {
            return Err(EpError::Shape(format!("{} takes {}, got {}", self.name(), self.algebra().name(), xi.algebra().name())));
        }
        if a.desc().kind() != self.parameter_kind() {
            return Err(EpError::Incompatible(format!(
                "{} takes {:?} parameters, got {:?}",
                self.name(),
                self.parameter_kind(),
                a.desc().kind()
            )));
        }
        Ok(())
    }
}

fn fd_step(xi: &AlgElem) -> f64 {
    1e-6 * xi.sup_norm().max(1.0)
}

/// Central difference of ε ↦ ℓ(ξ + εη, a) at 0.
pub fn fd_d_xi(l: &dyn ReducedLagrangian, xi: &AlgElem, a: &AdvectedState, eta: &AlgElem) -> Result<f64> {
    let h = fd_step(xi);
    let plus = l.eval(&xi.axpy(h, eta), a)?;
    let minus = l.eval(&xi.axpy(-h, eta), a)?;
    let d = (plus - minus) / (2.0 * h);
    if !d.is_finite() {
        return Err(EpError::NonFinite("fd_d_xi".into()));
    }
    Ok(d)
}

/// Central difference of ε ↦ ℓ(ξ, a + εv, a). Sphere points are perturbed in the
/// ambient space; pass tangential directions to compare with the intrinsic gradient.
pub fn fd_d_a(l: &dyn ReducedLagrangian, xi: &AlgElem, a: &AdvectedState, v: &[f64]) -> Result<f64> {
    let h = fd_step(xi);
    let shifted = |s: f64| a.with_value(a.value().iter().zip(v).map(|(x, d)| x + s * d).collect());
    let d = (l.eval(xi, &shifted(h))? - l.eval(xi, &shifted(-h))?) / (2.0 * h);
    if !d.is_finite() {
        return Err(EpError::NonFinite("fd_d_a".into()));
    }
    Ok(d)
}

fn check_kernel(kernel: &Kernel, mu: &DualElem, tolerance: f64) -> Result<()> {
    let component = kernel.component(mu.coords());
    if component > tolerance {
        return Err(EpError::Compatibility { component, tolerance });
    }
    Ok(())
}

fn v3(s: &[f64]) -> Vector3<f64> {
    Vector3::new(s[0], s[1], s[2])
}

/// ℓ(Ω, Γ) = ½ IΩ·Ω − Γ·λ.
#[derive(Clone, Debug)]
pub struct HeavyTop {
    pub inertia: Vector3<f64>,
    pub lambda: Vector3<f64>,
}

impl ReducedLagrangian for HeavyTop {
    fn name(&self) -> &str {
        "heavy_top"
    }
    fn algebra(&self) -> &Algebra {
        &Algebra::So3
    }
    fn parameter_kind(&self) -> ActionKind {
        ActionKind::LinearR3
    }
    fn eval(&self, xi: &AlgElem, a: &AdvectedState) -> Result<f64> {
        self.check(xi, a)?;
        let w = v3(xi.coords());
        Ok(0.5 * w.dot(&self.inertia.component_mul(&w)) - v3(a.value()).dot(&self.lambda))
    }
    fn d_xi(&self, xi: &AlgElem, a: &AdvectedState) -> Result<DualElem> {
        self.check(xi, a)?;
        Ok(DualElem::so3(self.inertia.component_mul(&v3(xi.coords()))))
    }
    fn d_a(&self, xi: &AlgElem, a: &AdvectedState) -> Result<Vec<f64>> {
        self.check(xi, a)?;
        Ok((-self.lambda).as_slice().to_vec())
    }
    fn kernel(&self) -> Kernel {
        Kernel::Trivial
    }
    fn inertia_solve_with_tolerance(&self, mu: &DualElem, _a: &AdvectedState, _tol: f64) -> Result<AlgElem> {
        Ok(AlgElem::so3(v3(mu.coords()).component_div(&self.inertia)))
    }
}

/// ℓ(ξ, m) = ½ j |P ξ|² − (λ/2)⟨m, k⟩², with P the identity or, when `projected`,
/// the orthogonal projection onto k⊥.
#[derive(Clone, Debug)]
pub struct Nematic {
    pub j: f64,
    pub lambda: f64,
    pub k: Vector3<f64>,
    pub projected: bool,
}

impl Nematic {
    fn project(&self, w: Vector3<f64>) -> Vector3<f64> {
        if self.projected {
            w - self.k * w.dot(&self.k)
        } else {
            w
        }
    }
}

impl ReducedLagrangian for Nematic {
    fn name(&self) -> &str {
        if self.projected {
            "nematic_projected"
        } else {
            "nematic"
        }
    }
    fn algebra(&self) -> &Algebra {
        &Algebra::So3
    }
    fn parameter_kind(&self) -> ActionKind {
        ActionKind::SphereSo3
    }
    fn eval(&self, xi: &AlgElem, a: &AdvectedState) -> Result<f64> {
        self.check(xi, a)?;
        let p = self.project(v3(xi.coords()));
        let mk = v3(a.value()).dot(&self.k);
        Ok(0.5 * self.j * p.norm_squared() - 0.5 * self.lambda * mk * mk)
    }
    fn d_xi(&self, xi: &AlgElem, a: &AdvectedState) -> Result<DualElem> {
        self.check(xi, a)?;
        Ok(DualElem::so3(self.project(v3(xi.coords())) * self.j))
    }
    fn d_a(&self, xi: &AlgElem, a: &AdvectedState) -> Result<Vec<f64>> {
        self.check(xi, a)?;
        let mk = v3(a.value()).dot(&self.k);
        Ok((self.k * (-self.lambda * mk)).as_slice().to_vec())
    }
    fn kernel(&self) -> Kernel {
        if self.projected {
            Kernel::Axis(self.k)
        } else {
            Kernel::Trivial
        }
    }
    fn inertia_solve_with_tolerance(&self, mu: &DualElem, _a: &AdvectedState, tol: f64) -> Result<AlgElem> {
        check_kernel(&self.kernel(), mu, tol)?;
        Ok(AlgElem::so3(self.project(v3(mu.coords())) / self.j))
    }
}

/// ℓ(u) = ½ Σ (Du)² Δx on the circle.
#[derive(Clone, Debug)]
pub struct HunterSaxton {
    algebra: Algebra,
    grid: Grid,
}

impl HunterSaxton {
    pub fn new(grid: Grid) -> Self {
        Self { algebra: Algebra::VectS1(grid), grid }
    }
}

impl ReducedLagrangian for HunterSaxton {
    fn name(&self) -> &str {
        "hs1d"
    }
    fn algebra(&self) -> &Algebra {
        &self.algebra
    }
    fn parameter_kind(&self) -> ActionKind {
        ActionKind::Trivial
    }
    fn eval(&self, xi: &AlgElem, a: &AdvectedState) -> Result<f64> {
        self.check(xi, a)?;
        let du = lattice::diff(xi.coords(), self.grid.spacing());
        Ok(0.5 * self.grid.pair(&du, &du))
    }
    fn d_xi(&self, xi: &AlgElem, a: &AdvectedState) -> Result<DualElem> {
        self.check(xi, a)?;
        let h = self.grid.spacing();
        let d2 = lattice::diff(&lattice::diff(xi.coords(), h), h);
        Ok(DualElem::new_unchecked(self.algebra.clone(), d2.into_iter().map(|v| -v).collect()))
    }
    fn d_a(&self, xi: &AlgElem, a: &AdvectedState) -> Result<Vec<f64>> {
        self.check(xi, a)?;
        Ok(Vec::new())
    }
    fn kernel(&self) -> Kernel {
        Kernel::Constants { stride: 1 }
    }
    fn inertia_solve_with_tolerance(&self, mu: &DualElem, _a: &AdvectedState, tol: f64) -> Result<AlgElem> {
        check_kernel(&self.kernel(), mu, tol)?;
        Ok(AlgElem::new_unchecked(self.algebra.clone(), lattice::solve_neg_d2(mu.coords(), 1, &self.grid, 1.0)))
    }
}

type DenseCholesky = Cholesky<f64, Dyn>;

/// ℓ(u, ρ) = ½ Σ ρ (Du)² Δx.
#[derive(Debug)]
pub struct DensityHunterSaxton {
    algebra: Algebra,
    grid: Grid,
    factor: Mutex<Option<(Vec<f64>, DenseCholesky)>>,
}

impl DensityHunterSaxton {
    pub fn new(grid: Grid) -> Self {
        Self { algebra: Algebra::VectS1(grid), grid, factor: Mutex::new(None) }
    }

    /// Matrix of u ↦ −D(ρDu) plus the projector onto the stencil kernel span{1, (−1)^j}.
    fn regularized_operator(&self, rho: &[f64]) -> DMatrix<f64> {
        let n = self.grid.n();
        let h = self.grid.spacing();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let de = lattice::diff(&e, h);
            let flux: Vec<f64> = de.iter().zip(rho).map(|(d, r)| d * r).collect();
            for (i, v) in lattice::diff(&flux, h).into_iter().enumerate() {
                m[(i, j)] = -v;
            }
            e[j] = 0.0;
        }
        let inv_n = 1.0 / n as f64;
        for i in 0..n {
            for j in 0..n {
                let alt = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                m[(i, j)] += inv_n * (1.0 + alt);
            }
        }
        m
    }

    fn solve(&self, rho: &[f64], rhs: Vec<f64>) -> Result<Vec<f64>> {
        let mut cache = self.factor.lock().unwrap_or_else(|e| e.into_inner());
        let stale = match cache.as_ref() {
            Some((cached, _)) => cached.iter().zip(rho).any(|(c, r)| (c - r).abs() > 1e-12),
            None => true,
        };
        if stale {
            let chol = Cholesky::new(self.regularized_operator(rho))
                .ok_or_else(|| EpError::InvalidParameter("density operator is not positive definite".into()))?;
            *cache = Some((rho.to_vec(), chol));
        }
        let (_, chol) = cache.as_ref().unwrap();
        Ok(chol.solve(&DVector::from_vec(rhs)).data.into())
    }
}

impl ReducedLagrangian for DensityHunterSaxton {
    fn name(&self) -> &str {
        "density_hs1d"
    }
    fn algebra(&self) -> &Algebra {
        &self.algebra
    }
    fn parameter_kind(&self) -> ActionKind {
        ActionKind::DensityS1
    }
    fn eval(&self, xi: &AlgElem, a: &AdvectedState) -> Result<f64> {
        self.check(xi, a)?;
        let du = lattice::diff(xi.coords(), self.grid.spacing());
        let weighted: Vec<f64> = du.iter().zip(a.value()).map(|(d, r)| r * d).collect();
        Ok(0.5 * self.grid.pair(&weighted, &du))
    }
    fn d_xi(&self, xi: &AlgElem, a: &AdvectedState) -> Result<DualElem> {
        self.check(xi, a)?;
        let h = self.grid.spacing();
        let flux: Vec<f64> = lattice::diff(xi.coords(), h).iter().zip(a.value()).map(|(d, r)| r * d).collect();
        Ok(DualElem::new_unchecked(self.algebra.clone(), lattice::diff(&flux, h).into_iter().map(|v| -v).collect()))
    }
    fn d_a(&self, xi: &AlgElem, a: &AdvectedState) -> Result<Vec<f64>> {
        self.check(xi, a)?;
        Ok(lattice::diff(xi.coords(), self.grid.spacing()).into_iter().map(|d| 0.5 * d * d).collect())
    }
    fn kernel(&self) -> Kernel {
        Kernel::Constants { stride: 1 }
    }
    fn inertia_solve_with_tolerance(&self, mu: &DualElem, a: &AdvectedState, tol: f64) -> Result<AlgElem> {
        self.check(&AlgElem::zeros(self.algebra.clone()), a)?;
        check_kernel(&self.kernel(), mu, tol)?;
        let rhs = lattice::project_off_stencil_kernel(mu.coords(), 1);
        let u = self.solve(a.value(), rhs)?;
        Ok(AlgElem::new_unchecked(self.algebra.clone(), u))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinLagrangian {
    /// ½ Σ |Dξ × γ|² Δx
    L1,
    /// ½ Σ (Dξ · γ)² Δx
    L2,
    /// Σ (|Dξ|² − |γ|²) Δx
    L3,
}

/// Lagrangians of lattice spin systems on the gauge algebra.
#[derive(Clone, Debug)]
pub struct Spin {
    algebra: Algebra,
    grid: Grid,
    kind: SpinLagrangian,
}

impl Spin {
    pub fn new(grid: Grid, kind: SpinLagrangian) -> Self {
        Self { algebra: Algebra::GaugeSo3(grid), grid, kind }
    }

    pub fn kind(&self) -> SpinLagrangian {
        self.kind
    }

    fn dxi(&self, xi: &AlgElem) -> Vec<f64> {
        lattice::diff_strided(xi.coords(), 3, self.grid.spacing())
    }

    fn dual(&self, coords: Vec<f64>) -> DualElem {
        DualElem::new_unchecked(self.algebra.clone(), coords)
    }
}

fn per_site(a: &[f64], b: &[f64], f: impl Fn(Vector3<f64>, Vector3<f64>) -> Vector3<f64>) -> Vec<f64> {
    a.chunks_exact(3)
        .zip(b.chunks_exact(3))
        .flat_map(|(p, q)| {
            let w = f(v3(p), v3(q));
            [w.x, w.y, w.z]
        })
        .collect()
}

impl ReducedLagrangian for Spin {
    fn name(&self) -> &str {
        match self.kind {
            SpinLagrangian::L1 => "spin_l1",
            SpinLagrangian::L2 => "spin_l2",
            SpinLagrangian::L3 => "spin_l3",
        }
    }
    fn algebra(&self) -> &Algebra {
        &self.algebra
    }
    fn parameter_kind(&self) -> ActionKind {
        ActionKind::ConnectionGauge
    }
    fn integrable(&self) -> bool {
        self.kind == SpinLagrangian::L3
    }
    fn eval(&self, xi: &AlgElem, a: &AdvectedState) -> Result<f64> {
        self.check(xi, a)?;
        let d = self.dxi(xi);
        let g = a.value();
        let density: f64 = d
            .chunks_exact(3)
            .zip(g.chunks_exact(3))
            .map(|(p, q)| {
                let (p, q) = (v3(p), v3(q));
                match self.kind {
                    SpinLagrangian::L1 => 0.5 * p.cross(&q).norm_squared(),
                    SpinLagrangian::L2 => 0.5 * p.dot(&q).powi(2),
                    SpinLagrangian::L3 => p.norm_squared() - q.norm_squared(),
                }
            })
            .sum();
        Ok(density * self.grid.spacing())
    }
    fn d_xi(&self, xi: &AlgElem, a: &AdvectedState) -> Result<DualElem> {
        self.check(xi, a)?;
        let h = self.grid.spacing();
        let d = self.dxi(xi);
        // δℓ/δξ = −D(∂ℓ/∂(Dξ)) since D is antisymmetric.
        let flux = match self.kind {
            SpinLagrangian::L1 => per_site(&d, a.value(), |p, q| q.cross(&p.cross(&q))),
            SpinLagrangian::L2 => per_site(&d, a.value(), |p, q| q * p.dot(&q)),
            SpinLagrangian::L3 => d.iter().map(|v| 2.0 * v).collect(),
        };
        Ok(self.dual(lattice::diff_strided(&flux, 3, h).into_iter().map(|v| -v).collect()))
    }
    fn d_a(&self, xi: &AlgElem, a: &AdvectedState) -> Result<Vec<f64>> {
        self.check(xi, a)?;
        let d = self.dxi(xi);
        Ok(match self.kind {
            SpinLagrangian::L1 => per_site(&d, a.value(), |p, q| p.cross(&q).cross(&p)),
            SpinLagrangian::L2 => per_site(&d, a.value(), |p, q| p * p.dot(&q)),
            SpinLagrangian::L3 => a.value().iter().map(|v| -2.0 * v).collect(),
        })
    }
    fn kernel(&self) -> Kernel {
        Kernel::Constants { stride: 3 }
    }
    fn inertia_solve_with_tolerance(&self, mu: &DualElem, _a: &AdvectedState, tol: f64) -> Result<AlgElem> {
        if self.kind != SpinLagrangian::L3 {
            return Err(EpError::NotIntegrable(self.name().into()));
        }
        check_kernel(&self.kernel(), mu, tol)?;
        Ok(AlgElem::new_unchecked(self.algebra.clone(), lattice::solve_neg_d2(mu.coords(), 3, &self.grid, 2.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::ActionDescriptor;
    use crate::sampling::{random_smooth_field, random_unit, random_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn heavy_top() -> HeavyTop {
        HeavyTop { inertia: Vector3::new(1.0, 2.0, 3.0), lambda: Vector3::z() }
    }

    fn gamma(v: Vector3<f64>) -> AdvectedState {
        AdvectedState::new(ActionDescriptor::linear_r3(), v.as_slice().to_vec()).unwrap()
    }

    #[derive(Debug)]
    struct HalfNormSquared;

    impl ReducedLagrangian for HalfNormSquared {
        fn name(&self) -> &str {
            "half_norm_squared"
        }
        fn algebra(&self) -> &Algebra {
            &Algebra::So3
        }
        fn parameter_kind(&self) -> ActionKind {
            ActionKind::Trivial
        }
        fn eval(&self, xi: &AlgElem, _a: &AdvectedState) -> Result<f64> {
            Ok(0.5 * v3(xi.coords()).norm_squared())
        }
        fn d_xi(&self, xi: &AlgElem, _a: &AdvectedState) -> Result<DualElem> {
            Ok(xi.as_dual())
        }
        fn d_a(&self, _xi: &AlgElem, _a: &AdvectedState) -> Result<Vec<f64>> {
            Ok(Vec::new())
        }
        fn kernel(&self) -> Kernel {
            Kernel::Trivial
        }
        fn inertia_solve_with_tolerance(&self, mu: &DualElem, _a: &AdvectedState, _t: f64) -> Result<AlgElem> {
            Ok(AlgElem::so3(v3(mu.coords())))
        }
    }

    #[test]
    fn fd_is_exact_on_quadratics() {
        let xi = AlgElem::so3(Vector3::new(0.5, -2.0, 1.5));
        let eta = AlgElem::so3(Vector3::new(1.0, 3.0, -0.25));
        let got = fd_d_xi(&HalfNormSquared, &xi, &AdvectedState::empty(Algebra::So3), &eta).unwrap();
        assert!((got - (0.5 - 6.0 - 0.375)).abs() < 1e-9);
    }

    #[test]
    fn heavy_top_values_and_derivatives() {
        let l = heavy_top();
        let a = gamma(Vector3::z());
        assert_eq!(l.eval(&AlgElem::so3(Vector3::x()), &a).unwrap(), -0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xi = AlgElem::so3(random_vector(&mut rng, 1.0));
        let eta = AlgElem::so3(random_vector(&mut rng, 1.0));
        let analytic = crate::algebra::pair(&l.d_xi(&xi, &a).unwrap(), &eta).unwrap();
        assert!((fd_d_xi(&l, &xi, &a, &eta).unwrap() - analytic).abs() < 1e-8);
        let omega = l.inertia_solve(&DualElem::so3(Vector3::new(1.0, 2.0, 3.0)), &a).unwrap();
        assert_eq!(omega.coords(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn nematic_values_and_tangential_derivative() {
        let l = Nematic { j: 1.0, lambda: 1.0, k: Vector3::z(), projected: false };
        let m = AdvectedState::new(ActionDescriptor::sphere(), vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(l.eval(&AlgElem::zeros(Algebra::So3), &m).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mv = random_unit(&mut rng);
        let m = AdvectedState::new(ActionDescriptor::sphere(), mv.as_slice().to_vec()).unwrap();
        let raw = random_vector(&mut rng, 1.0);
        let eta = raw - mv * raw.dot(&mv);
        let xi = AlgElem::so3(random_vector(&mut rng, 1.0));
        let fd = fd_d_a(&l, &xi, &m, eta.as_slice()).unwrap();
        let expect = -l.lambda * mv.dot(&l.k) * l.k.dot(&eta);
        assert!((fd - expect).abs() < 1e-7);
    }

    #[test]
    fn projected_nematic_rejects_axial_momentum() {
        let l = Nematic { j: 2.0, lambda: 1.0, k: Vector3::z(), projected: true };
        let m = AdvectedState::new(ActionDescriptor::sphere(), vec![1.0, 0.0, 0.0]).unwrap();
        let err = l.inertia_solve(&DualElem::so3(Vector3::new(1.0, 0.0, 1e-3)), &m).unwrap_err();
        assert!(matches!(err, EpError::Compatibility { .. }));
        let xi = l.inertia_solve(&DualElem::so3(Vector3::new(2.0, 4.0, 0.0)), &m).unwrap();
        assert_eq!(xi.coords(), &[1.0, 2.0, 0.0]);
    }

    #[test]
    fn hunter_saxton_value_and_inertia() {
        let g = Grid::new(128).unwrap();
        let l = HunterSaxton::new(g);
        let none = AdvectedState::empty(Algebra::VectS1(g));
        let u = AlgElem::new(Algebra::VectS1(g), g.sample(f64::sin)).unwrap();
        // ½Σ(D sin)²Δx = (π/2)·s² with s the stencil symbol at k = 1.
        let s = g.stencil_symbol(1);
        assert!((l.eval(&u, &none).unwrap() - 0.5 * PI * s * s).abs() < 1e-12);
        assert!((l.eval(&u, &none).unwrap() - 0.5 * PI).abs() < 1e-6);
        let mu = DualElem::new(Algebra::VectS1(g), g.sample(f64::sin)).unwrap();
        let xi = l.inertia_solve(&mu, &none).unwrap();
        assert!(max_diff(xi.coords(), &g.sample(|x| x.sin() / (s * s))) < 1e-12);
        assert!(max_diff(xi.coords(), u.coords()) < 1e-6);
        let shifted = DualElem::new(Algebra::VectS1(g), g.sample(|x| x.sin() + 1e-3)).unwrap();
        assert!(matches!(l.inertia_solve(&shifted, &none), Err(EpError::Compatibility { .. })));
        let zero = l.inertia_solve(&DualElem::zeros(Algebra::VectS1(g)), &none).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
    }

    #[test]
    fn density_inertia_inverts_the_derivative() {
        let g = Grid::new(64).unwrap();
        let l = DensityHunterSaxton::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho: Vec<f64> = random_smooth_field(&mut rng, g, 1, 3, 0.3).into_iter().map(|v| 1.0 + v).collect();
        let a = AdvectedState::new(ActionDescriptor::density(g), rho).unwrap();
        let mut u = random_smooth_field(&mut rng, g, 1, 4, 1.0);
        u.iter_mut().for_each(|v| *v += 0.7);
        let xi = AlgElem::new(Algebra::VectS1(g), u).unwrap();
        let back = l.inertia_solve(&l.d_xi(&xi, &a).unwrap(), &a).unwrap();
        let expect = l.kernel().project_out(xi.coords());
        assert!(max_diff(back.coords(), &expect) < 1e-9);
    }

    #[test]
    fn spin_l3_inertia_and_non_integrable_variants() {
        let g = Grid::new(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gamma = AdvectedState::new(ActionDescriptor::connection(g), random_smooth_field(&mut rng, g, 3, 2, 1.0))
            .unwrap();
        let xi = AlgElem::new(Algebra::GaugeSo3(g), random_smooth_field(&mut rng, g, 3, 3, 1.0)).unwrap();
        let l3 = Spin::new(g, SpinLagrangian::L3);
        let back = l3.inertia_solve(&l3.d_xi(&xi, &gamma).unwrap(), &gamma).unwrap();
        assert!(max_diff(back.coords(), xi.coords()) < 1e-10);
        let l1 = Spin::new(g, SpinLagrangian::L1);
        assert!(!l1.integrable());
        assert!(matches!(l1.inertia_solve(&DualElem::zeros(Algebra::GaugeSo3(g)), &gamma), Err(EpError::NotIntegrable(_))));
    }
}
