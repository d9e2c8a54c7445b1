//! Wired example systems: the heavy top, nematic particles (plain and projected),
//! the Hunter–Saxton equation, its density-weighted variant, and lattice spin
//! systems. Each bundle carries its H-path catalog, conserved quantities and,
//! where an explicit equation is known, an independently coded right-hand side.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{ActionDescriptor, AdvectedState};
use crate::algebra::{rodrigues, AlgElem, Algebra, GroupElem};
use crate::dynamics::EquationFamily;
use crate::error::{EpError, Result};
use crate::invariance::{CurvePair, HPath, Schedule};
use crate::lagrangian::{DensityHunterSaxton, HeavyTop, HunterSaxton, Nematic, ReducedLagrangian, Spin, SpinLagrangian};
use crate::lattice::{self, Grid};
use crate::sampling::{random_gauge_map, random_smooth_field, random_unit, random_vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    HeavyTop,
    Nematic,
    NematicProjected,
    Hs1d,
    DensityHs1d,
    SpinLattice,
}

impl SystemName {
    pub const ALL: [SystemName; 6] = [
        SystemName::HeavyTop,
        SystemName::Nematic,
        SystemName::NematicProjected,
        SystemName::Hs1d,
        SystemName::DensityHs1d,
        SystemName::SpinLattice,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SystemName::HeavyTop => "heavy_top",
            SystemName::Nematic => "nematic",
            SystemName::NematicProjected => "nematic_projected",
            SystemName::Hs1d => "hs1d",
            SystemName::DensityHs1d => "density_hs1d",
            SystemName::SpinLattice => "spin_lattice",
        }
    }
}

impl fmt::Display for SystemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemName {
    type Err = EpError;
    fn from_str(s: &str) -> Result<Self> {
        SystemName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| EpError::InvalidParameter(format!("unknown system `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Conserved {
    Energy,
    GammaNormSquared,
    MomentumDotGamma,
    SphereNorm,
    MeanMomentum,
    Mass,
    SpinCompatibility,
}

impl Conserved {
    pub fn as_str(&self) -> &'static str {
        match self {
            Conserved::Energy => "energy",
            Conserved::GammaNormSquared => "gamma_norm_squared",
            Conserved::MomentumDotGamma => "mu_dot_gamma",
            Conserved::SphereNorm => "sphere_norm",
            Conserved::MeanMomentum => "mean_mu",
            Conserved::Mass => "mass",
            Conserved::SpinCompatibility => "spin_compatibility",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    /// Principal moments of inertia (heavy top).
    pub inertia: [f64; 3],
    /// Gravity-weighted center of mass direction (heavy top).
    pub lambda: [f64; 3],
    pub j: f64,
    /// Potential strength (nematic).
    pub nematic_lambda: f64,
    pub k: [f64; 3],
    pub n: usize,
    pub rho_min: f64,
    pub spin: SpinLagrangian,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            inertia: [1.0, 2.0, 3.0],
            lambda: [0.0, 0.0, 1.0],
            j: 1.0,
            nematic_lambda: 1.0,
            k: [0.0, 0.0, 1.0],
            n: 128,
            rho_min: 1e-6,
            spin: SpinLagrangian::L3,
        }
    }
}

/// A deliberately broken configuration whose check must fail.
#[derive(Clone, Debug)]
pub enum NegativeControl {
    /// Lagrangian invariance under a path that is not in the isotropy group.
    LagrangianInvariance(HPath),
    /// Residual equivariance with a corrupted path action.
    ResidualEquivariance(HPath),
}

#[derive(Clone, Debug)]
pub struct SystemBundle {
    pub name: SystemName,
    pub params: SystemParams,
    pub algebra: Algebra,
    pub action: ActionDescriptor,
    pub family: EquationFamily,
    pub lagrangian: Arc<dyn ReducedLagrangian>,
    pub h_paths: Vec<HPath>,
    pub conserved: Vec<Conserved>,
    pub has_reference: bool,
    pub positive_density: bool,
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn unit_param(name: &str, a: [f64; 3]) -> Result<Vector3<f64>> {
    let v = vec3(a);
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(EpError::InvalidParameter(format!("{name} must be a unit vector, has norm {}", v.norm())));
    }
    Ok(v)
}

fn finite_params(p: &SystemParams) -> Result<()> {
    let all = p.inertia.iter().chain(&p.lambda).chain(&p.k).chain([&p.j, &p.nematic_lambda, &p.rho_min]);
    if all.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EpError::InvalidParameter("parameters must be finite".into()))
    }
}

/// Schedules shared by every time-dependent catalog.
fn schedules() -> [Schedule; 3] {
    [
        Schedule::Constant { theta: 0.7 },
        Schedule::Linear { theta0: 0.2, omega: 0.3 },
        Schedule::Sinusoidal { eps: 0.3, freq: 1.0 },
    ]
}

const STATIC_ANGLES: [f64; 3] = [0.7, -1.9, PI];

fn commutes_with_inertia(r: &nalgebra::Matrix3<f64>, inertia: &Vector3<f64>) -> bool {
    let i = nalgebra::Matrix3::from_diagonal(inertia);
    (r.transpose() * i * r - i).abs().max() < 1e-12
}

/// Axis of the heavy-top isotropy rotations: λ/‖λ‖, or e₃ when λ = 0.
fn heavy_top_axis(p: &SystemParams) -> Vector3<f64> {
    let l = vec3(p.lambda);
    if l.norm() > 0.0 {
        l / l.norm()
    } else {
        Vector3::z()
    }
}

pub fn build_system(name: SystemName, params: &SystemParams) -> Result<SystemBundle> {
    finite_params(params)?;
    let p = params.clone();
    let bundle = match name {
        SystemName::HeavyTop => {
            let inertia = vec3(p.inertia);
            if inertia.iter().any(|v| *v <= 0.0) {
                return Err(EpError::InvalidParameter("moments of inertia must be positive".into()));
            }
            let axis = heavy_top_axis(&p);
            let h_paths = STATIC_ANGLES
                .iter()
                .map(|t| rodrigues(&(axis * *t)))
                .filter(|r| commutes_with_inertia(r, &inertia) && (r * vec3(p.lambda) - vec3(p.lambda)).norm() < 1e-12)
                .map(|r| HPath::fixed(GroupElem::So3(r)))
                .collect();
            SystemBundle {
                name,
                algebra: Algebra::So3,
                action: ActionDescriptor::linear_r3(),
                family: EquationFamily::Advected,
                lagrangian: Arc::new(HeavyTop { inertia, lambda: vec3(p.lambda) }),
                h_paths,
                conserved: vec![Conserved::Energy, Conserved::GammaNormSquared, Conserved::MomentumDotGamma],
                has_reference: false,
                positive_density: false,
                params: p,
            }
        }
        SystemName::Nematic | SystemName::NematicProjected => {
            if !(p.j > 0.0) {
                return Err(EpError::InvalidParameter("j must be positive".into()));
            }
            let k = unit_param("k", p.k)?;
            let projected = name == SystemName::NematicProjected;
            let h_paths = if projected {
                schedules().into_iter().map(|s| HPath::so3_path(k, s)).collect()
            } else {
                STATIC_ANGLES.iter().map(|t| HPath::fixed(GroupElem::So3(rodrigues(&(k * *t))))).collect()
            };
            SystemBundle {
                name,
                algebra: Algebra::So3,
                action: ActionDescriptor::sphere(),
                family: EquationFamily::Breaking,
                lagrangian: Arc::new(Nematic { j: p.j, lambda: p.nematic_lambda, k, projected }),
                h_paths,
                conserved: vec![Conserved::Energy, Conserved::SphereNorm],
                has_reference: false,
                positive_density: false,
                params: p,
            }
        }
        SystemName::Hs1d => {
            let grid = Grid::new(p.n)?;
            SystemBundle {
                name,
                algebra: Algebra::VectS1(grid),
                action: ActionDescriptor::trivial(Algebra::VectS1(grid)),
                family: EquationFamily::Plain,
                lagrangian: Arc::new(HunterSaxton::new(grid)),
                h_paths: schedules().into_iter().map(|s| HPath::rotation_s1(grid, s)).collect(),
                conserved: vec![Conserved::Energy, Conserved::MeanMomentum],
                has_reference: true,
                positive_density: false,
                params: p,
            }
        }
        SystemName::DensityHs1d => {
            let grid = Grid::new(p.n)?;
            if !(p.rho_min > 0.0) {
                return Err(EpError::InvalidParameter("rho_min must be positive".into()));
            }
            SystemBundle {
                name,
                algebra: Algebra::VectS1(grid),
                action: ActionDescriptor::density(grid),
                family: EquationFamily::Advected,
                lagrangian: Arc::new(DensityHunterSaxton::new(grid)),
                h_paths: schedules().into_iter().map(|s| HPath::rotation_s1(grid, s)).collect(),
                conserved: vec![Conserved::Energy, Conserved::Mass],
                has_reference: true,
                positive_density: true,
                params: p,
            }
        }
        SystemName::SpinLattice => {
            let grid = Grid::new(p.n)?;
            let axis = Vector3::new(1.0, 2.0, 2.0) / 3.0;
            let integrable = p.spin == SpinLagrangian::L3;
            SystemBundle {
                name,
                algebra: Algebra::GaugeSo3(grid),
                action: ActionDescriptor::connection(grid),
                family: EquationFamily::Affine,
                lagrangian: Arc::new(Spin::new(grid, p.spin)),
                h_paths: schedules().into_iter().map(|s| HPath::const_gauge(grid, axis, s)).collect(),
                conserved: if integrable {
                    vec![Conserved::Energy, Conserved::SpinCompatibility]
                } else {
                    Vec::new()
                },
                has_reference: integrable,
                positive_density: false,
                params: p,
            }
        }
    };
    Ok(bundle)
}

/// Smooth trigonometric state used as a curve ingredient.
struct StateDraw {
    xi: Vec<f64>,
    a: Vec<f64>,
}

impl SystemBundle {
    pub fn grid(&self) -> Option<Grid> {
        self.algebra.grid()
    }

    /// Positivity of advected densities.
    pub fn check_parameter(&self, a: &AdvectedState) -> Result<()> {
        if self.positive_density {
            let min = a.value().iter().copied().fold(f64::INFINITY, f64::min);
            if min < self.params.rho_min {
                return Err(EpError::InvalidParameter(format!(
                    "density minimum {min:.3e} below rho_min {:.1e}",
                    self.params.rho_min
                )));
            }
        }
        Ok(())
    }

    pub fn xi(&self, coords: Vec<f64>) -> Result<AlgElem> {
        AlgElem::new(self.algebra.clone(), coords)
    }

    pub fn parameter(&self, value: Vec<f64>) -> Result<AdvectedState> {
        AdvectedState::new(self.action.clone(), value)
    }

    pub fn default_init(&self) -> (AlgElem, AdvectedState) {
        let (xi, a) = match self.name {
            SystemName::HeavyTop => (vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]),
            SystemName::Nematic | SystemName::NematicProjected => {
                let s = 0.5f64.sqrt();
                (vec![0.3, -0.5, 0.8], vec![s, 0.0, s])
            }
            SystemName::Hs1d => {
                let g = self.grid().unwrap();
                (g.sample(|x| 0.2 * x.sin()), Vec::new())
            }
            SystemName::DensityHs1d => {
                let g = self.grid().unwrap();
                (g.sample(|x| 0.2 * x.sin()), g.sample(|x| 1.0 + 0.3 * x.cos()))
            }
            SystemName::SpinLattice => {
                let g = self.grid().unwrap();
                (
                    g.sample3(|x| [0.5 * x.sin(), 0.3 * x.cos(), 0.2 * (2.0 * x).sin()]),
                    g.sample3(|x| [0.2 * x.cos(), 0.4 * x.sin(), 0.1]),
                )
            }
        };
        (AlgElem::new_unchecked(self.algebra.clone(), xi), AdvectedState::new_unchecked(self.action.clone(), a))
    }

    /// ξ = 0 with the default parameter.
    pub fn zero_init(&self) -> (AlgElem, AdvectedState) {
        let (_, a) = self.default_init();
        (AlgElem::zeros(self.algebra.clone()), a)
    }

    fn draw<R: Rng>(&self, rng: &mut R, scale: f64) -> StateDraw {
        match self.name {
            SystemName::HeavyTop | SystemName::Nematic | SystemName::NematicProjected => StateDraw {
                xi: random_vector(rng, scale).as_slice().to_vec(),
                a: random_vector(rng, scale).as_slice().to_vec(),
            },
            SystemName::Hs1d | SystemName::DensityHs1d => {
                let g = self.grid().unwrap();
                let c = rng.gen_range(-scale..=scale);
                StateDraw {
                    xi: random_smooth_field(rng, g, 1, 2, scale).into_iter().map(|v| v + c).collect(),
                    a: random_smooth_field(rng, g, 1, 2, 0.3 * scale),
                }
            }
            SystemName::SpinLattice => {
                let g = self.grid().unwrap();
                let c = random_vector(rng, scale);
                let d = random_vector(rng, scale);
                let shift = |f: Vec<f64>, v: Vector3<f64>| -> Vec<f64> {
                    f.into_iter().enumerate().map(|(i, x)| x + v[i % 3]).collect()
                };
                StateDraw {
                    xi: shift(random_smooth_field(rng, g, 3, 2, scale), c),
                    a: shift(random_smooth_field(rng, g, 3, 2, scale), d),
                }
            }
        }
    }

    fn parameter_from_draw(&self, a: Vec<f64>) -> Vec<f64> {
        match self.name {
            SystemName::Nematic | SystemName::NematicProjected => {
                let v = Vector3::new(a[0], a[1], a[2]);
                (v / v.norm()).as_slice().to_vec()
            }
            SystemName::DensityHs1d => a.into_iter().map(|v| 1.0 + v).collect(),
            SystemName::Hs1d => Vec::new(),
            _ => a,
        }
    }

    /// Random smooth state (ξ, a) satisfying the parameter invariants.
    pub fn random_state<R: Rng>(&self, rng: &mut R) -> (AlgElem, AdvectedState) {
        let mut d = self.draw(rng, 1.0);
        if matches!(self.name, SystemName::Nematic | SystemName::NematicProjected) {
            d.a = random_unit(rng).as_slice().to_vec();
        }
        let a = self.parameter_from_draw(d.a);
        (AlgElem::new_unchecked(self.algebra.clone(), d.xi), AdvectedState::new_unchecked(self.action.clone(), a))
    }

    /// Random analytic curve t ↦ (A + cos(ωt)B + sin(ωt)C), mapped into the
    /// parameter space (normalized on the sphere, shifted to positive densities).
    /// These curves are generally not solutions.
    pub fn random_curve<R: Rng>(&self, rng: &mut R) -> CurvePair {
        let base = self.draw(rng, 1.0);
        let cos_part = self.draw(rng, 0.5);
        let sin_part = self.draw(rng, 0.5);
        let omega = rng.gen_range(0.5..1.5);
        let this = self.clone();
        CurvePair::new(move |t| {
            let (c, s) = ((omega * t).cos(), (omega * t).sin());
            let mix = |a: &[f64], b: &[f64], d: &[f64]| -> Vec<f64> {
                a.iter().zip(b).zip(d).map(|((x, y), z)| x + c * y + s * z).collect()
            };
            let xi = mix(&base.xi, &cos_part.xi, &sin_part.xi);
            let mut a = mix(&base.a, &cos_part.a, &sin_part.a);
            if matches!(this.name, SystemName::Nematic | SystemName::NematicProjected) {
                // Keep the base direction dominant so the normalization stays smooth.
                let b = Vector3::new(base.a[0], base.a[1], base.a[2]);
                let unit = b / b.norm();
                for (i, v) in a.iter_mut().enumerate() {
                    *v = unit[i] + 0.3 * (*v - base.a[i]);
                }
            }
            Ok((this.xi(xi)?, this.parameter(this.parameter_from_draw(a))?))
        })
    }

    /// Independently coded right-hand side (μ̇, ȧ) of the explicit system equation.
    pub fn reference_rhs(&self, mu: &crate::algebra::DualElem, a: &AdvectedState) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.has_reference {
            return Err(EpError::NoReference(self.name.to_string()));
        }
        let xi = self.lagrangian.inertia_solve_with_tolerance(mu, a, crate::dynamics::INTEGRATION_COMPATIBILITY_TOL)?;
        let g = self.grid().unwrap();
        Ok(reference_equations(self.name, g, mu.coords(), xi.coords(), a.value()))
    }

    /// The designed broken configuration for this system, if any.
    pub fn negative_control(&self) -> Option<NegativeControl> {
        match self.name {
            SystemName::Nematic => {
                let k = vec3(self.params.k);
                // Any axis not parallel to k breaks the symmetry; use the first
                // coordinate axis that is far from k.
                let axis = if k.x.abs() < 0.5 { Vector3::x() } else { Vector3::y() };
                Some(NegativeControl::LagrangianInvariance(HPath::so3_path(axis, Schedule::Constant { theta: 0.7 })))
            }
            SystemName::Hs1d => {
                let g = self.grid().unwrap();
                Some(NegativeControl::ResidualEquivariance(
                    HPath::rotation_s1(g, Schedule::Sinusoidal { eps: 0.3, freq: 1.0 }).with_flipped_log_derivative(),
                ))
            }
            SystemName::SpinLattice => {
                let g = self.grid().unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(11);
                Some(NegativeControl::LagrangianInvariance(HPath::fixed(random_gauge_map(&mut rng, g, 0.5))))
            }
            _ => None,
        }
    }
}

fn neg(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| -x).collect()
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn cross3(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    for (p, q) in a.chunks_exact(3).zip(b.chunks_exact(3)) {
        out.push(p[1] * q[2] - p[2] * q[1]);
        out.push(p[2] * q[0] - p[0] * q[2]);
        out.push(p[0] * q[1] - p[1] * q[0]);
    }
    out
}

/// The explicit equations, written directly in terms of the stencil D.
///
/// Hunter–Saxton: ∂_t(D²u) = −D(u·D²u) − Du·D²u, with μ = −D²u.
/// Density:       ∂_t w = −D(u·w) − [Du·w + ρ·D(½(Du)²)],  w = D(ρDu) = −μ,  ρ̇ = −D(ρu).
/// Spin:          μ̇ = −μ×ξ + div^γ α with α = δℓ/δγ = −2γ and div^γ α = Dα + γ×α,
///                γ̇ = −(Dξ + γ×ξ).
fn reference_equations(name: SystemName, g: Grid, mu: &[f64], u: &[f64], a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h = g.spacing();
    let d = |f: &[f64]| lattice::diff(f, h);
    match name {
        SystemName::Hs1d => {
            let du = d(u);
            let uxx = d(&du);
            let transport = d(&mul(u, &uxx));
            (add(&transport, &mul(&du, &uxx)), Vec::new())
        }
        SystemName::DensityHs1d => {
            let du = d(u);
            let w = d(&mul(a, &du));
            let half_sq: Vec<f64> = du.iter().map(|v| 0.5 * v * v).collect();
            let pressure = add(&mul(&du, &w), &mul(a, &d(&half_sq)));
            let dw = neg(add(&d(&mul(u, &w)), &pressure));
            (neg(dw), neg(d(&mul(a, u))))
        }
        SystemName::SpinLattice => {
            let d3 = |f: &[f64]| lattice::diff_strided(f, 3, h);
            let alpha: Vec<f64> = a.iter().map(|v| -2.0 * v).collect();
            let div_gamma = add(&d3(&alpha), &cross3(a, &alpha));
            let dmu = add(&neg(cross3(mu, u)), &div_gamma);
            let dgamma = neg(add(&d3(u), &cross3(a, u)));
            (dmu, dgamma)
        }
        _ => unreachable!("only lattice systems carry explicit equations"),
    }
}

/// Density equation with the pressure term in conservative form D(ρ(Du)²); differs
/// from [`reference_equations`] only by the stencil's product-rule error.
pub fn density_reference_conservative(g: Grid, u: &[f64], rho: &[f64]) -> Vec<f64> {
    let h = g.spacing();
    let d = |f: &[f64]| lattice::diff(f, h);
    let du = d(u);
    let w = d(&mul(rho, &du));
    let sq: Vec<f64> = du.iter().map(|v| v * v).collect();
    add(&d(&mul(u, &w)), &d(&mul(rho, &sq)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::vector_field;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn parameter_validation() {
        let bad_k = SystemParams { k: [0.0, 0.0, 2.0], ..Default::default() };
        assert!(build_system(SystemName::Nematic, &bad_k).is_err());
        let bad_i = SystemParams { inertia: [1.0, 0.0, 3.0], ..Default::default() };
        assert!(build_system(SystemName::HeavyTop, &bad_i).is_err());
        let bad_n = SystemParams { n: 7, ..Default::default() };
        assert!(build_system(SystemName::Hs1d, &bad_n).is_err());
        assert_eq!("density_hs1d".parse::<SystemName>().unwrap(), SystemName::DensityHs1d);
        assert!("fluid".parse::<SystemName>().is_err());
    }

    #[test]
    fn heavy_top_catalog_respects_inertia() {
        let asym = build_system(SystemName::HeavyTop, &SystemParams::default()).unwrap();
        assert_eq!(asym.h_paths.len(), 1);
        let sym = build_system(SystemName::HeavyTop, &SystemParams { inertia: [1.0, 1.0, 2.0], ..Default::default() })
            .unwrap();
        assert_eq!(sym.h_paths.len(), 3);
    }

    #[test]
    fn hs1d_kernel_is_constants() {
        let sys = build_system(SystemName::Hs1d, &SystemParams::default()).unwrap();
        assert_eq!(sys.lagrangian.kernel(), crate::lagrangian::Kernel::Constants { stride: 1 });
    }

    #[test]
    fn nematic_energy_is_legendre_transform() {
        let sys = build_system(SystemName::Nematic, &SystemParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (xi, a) = sys.random_state(&mut rng);
        let mu = sys.lagrangian.d_xi(&xi, &a).unwrap();
        let e = crate::dynamics::energy(sys.lagrangian.as_ref(), &mu, &xi, &a).unwrap();
        let w = Vector3::new(xi.coords()[0], xi.coords()[1], xi.coords()[2]);
        let mk = a.value()[2];
        assert!((e - (0.5 * w.norm_squared() + 0.5 * mk * mk)).abs() < 1e-14);
    }

    #[test]
    fn hs1d_reference_on_sine() {
        let sys = build_system(SystemName::Hs1d, &SystemParams::default()).unwrap();
        let g = sys.grid().unwrap();
        let u = sys.xi(g.sample(f64::sin)).unwrap();
        let none = AdvectedState::empty(sys.algebra.clone());
        let mu = sys.lagrangian.d_xi(&u, &none).unwrap();
        let (dmu, _) = sys.reference_rhs(&mu, &none).unwrap();
        // ∂_t u_xx = 3 sin x cos x, so μ̇ = −3 sin x cos x.
        assert!(max_diff(&dmu, &g.sample(|x| -3.0 * x.sin() * x.cos())) < 1e-5);
        let (generic, _, _) = vector_field(&sys, &mu, &none, 1e-8).unwrap();
        assert!(max_diff(&dmu, generic.coords()) < 1e-9);
    }

    #[test]
    fn density_with_uniform_rho_differs_from_hs_by_the_diamond_term() {
        let params = SystemParams::default();
        let hs = build_system(SystemName::Hs1d, &params).unwrap();
        let dens = build_system(SystemName::DensityHs1d, &params).unwrap();
        let g = hs.grid().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u = hs.xi(random_smooth_field(&mut rng, g, 1, 3, 1.0)).unwrap();
        let none = AdvectedState::empty(hs.algebra.clone());
        let rho = dens.parameter(vec![1.0; g.n()]).unwrap();
        let (hs_dmu, _) = hs.reference_rhs(&hs.lagrangian.d_xi(&u, &none).unwrap(), &none).unwrap();
        let (d_dmu, d_rho) = dens.reference_rhs(&dens.lagrangian.d_xi(&u, &rho).unwrap(), &rho).unwrap();
        let du = lattice::diff(u.coords(), g.spacing());
        let half_sq: Vec<f64> = du.iter().map(|v| 0.5 * v * v).collect();
        let diamond = lattice::diff(&half_sq, g.spacing());
        let diff: Vec<f64> = d_dmu.iter().zip(&hs_dmu).map(|(a, b)| a - b).collect();
        assert!(max_diff(&diff, &diamond) < 1e-10);
        assert!(max_diff(&d_rho, &neg(du)) < 1e-12);
    }

    #[test]
    fn conservative_density_form_converges_at_fourth_order() {
        let errs: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let g = Grid::new(n).unwrap();
                let u = g.sample(|x| 0.5 * x.sin() + 0.2 * (2.0 * x).cos());
                let rho = g.sample(|x| 1.0 + 0.3 * x.cos());
                let split = reference_equations(SystemName::DensityHs1d, g, &[], &u, &rho).0;
                // reference_equations returns μ̇ = −ẇ; the conservative form returns −ẇ too.
                max_diff(&split, &density_reference_conservative(g, &u, &rho))
            })
            .collect();
        for w in errs.windows(2) {
            let p = (w[0] / w[1]).log2();
            assert!((p - 4.0).abs() < 0.3, "order {p}");
        }
    }

    #[test]
    fn spin_reference_example() {
        let sys = build_system(SystemName::SpinLattice, &SystemParams::default()).unwrap();
        let g = sys.grid().unwrap();
        let xi = sys.xi(g.sample3(|x| [x.sin(), 0.0, 0.0])).unwrap();
        let gamma = sys.parameter(vec![0.0; 3 * g.n()]).unwrap();
        let mu = sys.lagrangian.d_xi(&xi, &gamma).unwrap();
        let (dmu, dgamma) = sys.reference_rhs(&mu, &gamma).unwrap();
        assert!(dmu.iter().all(|v| v.abs() < 1e-12));
        let s = g.stencil_symbol(1);
        assert!(max_diff(&dgamma, &g.sample3(|x| [-s * x.cos(), 0.0, 0.0])) < 1e-9);
        assert!(max_diff(&dgamma, &g.sample3(|x| [-x.cos(), 0.0, 0.0])) < 2e-7);
    }

    #[test]
    fn systems_without_equations_have_no_reference() {
        let sys = build_system(SystemName::HeavyTop, &SystemParams::default()).unwrap();
        let (xi, a) = sys.default_init();
        let mu = sys.lagrangian.d_xi(&xi, &a).unwrap();
        assert!(matches!(sys.reference_rhs(&mu, &a), Err(EpError::NoReference(_))));
    }
}
