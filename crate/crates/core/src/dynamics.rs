//! Euler–Poincaré residuals for the four equation families, the advection
//! equation, RK4 integration in the momentum variables (μ, a), and monitoring of
//! conserved quantities.

use serde::Serialize;

use crate::actions::{self, ActionKind, AdvectedState, CocycleKind};
use crate::algebra::{self, ad_star, pair, AlgElem, DualElem};
use crate::error::{ensure_finite, EpError, Result};
use crate::lagrangian::ReducedLagrangian;
use crate::lattice;
use crate::systems::{Conserved, SystemBundle};

/// Kernel drift tolerated inside an integration before it aborts.
pub const INTEGRATION_COMPATIBILITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationFamily {
    /// d/dt μ + ad*_ξ μ = 0
    Plain,
    /// d/dt μ + ad*_ξ μ = δℓ/δa ⋄ a, ȧ = ξa
    Advected,
    /// d/dt μ + ad*_ξ μ = J(m, δℓ/δm), ṁ = ξ_M(m)
    Breaking,
    /// d/dt μ + ad*_ξ μ = δℓ/δa ⋄ a + dc⊤(δℓ/δa), ȧ = ξa + dc(ξ)
    Affine,
}

impl EquationFamily {
    pub fn check(&self, a: &AdvectedState) -> Result<()> {
        let kind = a.desc().kind();
        let affine = a.desc().cocycle() == CocycleKind::GaugeLogDerivative;
        let ok = match self {
            EquationFamily::Plain => kind == ActionKind::Trivial,
            EquationFamily::Advected => matches!(kind, ActionKind::LinearR3 | ActionKind::DensityS1) && !affine,
            EquationFamily::Breaking => kind == ActionKind::SphereSo3,
            EquationFamily::Affine => affine,
        };
        if ok {
            Ok(())
        } else {
            Err(EpError::Incompatible(format!("{self:?} equations with {kind:?} parameters")))
        }
    }
}

/// Right-hand side of the momentum equation beyond −ad*_ξ μ.
pub fn forcing(family: EquationFamily, l: &dyn ReducedLagrangian, xi: &AlgElem, a: &AdvectedState) -> Result<DualElem> {
    family.check(a)?;
    match family {
        EquationFamily::Plain => Ok(DualElem::zeros(xi.algebra().clone())),
        EquationFamily::Advected => actions::diamond(&l.d_a(xi, a)?, a),
        EquationFamily::Breaking | EquationFamily::Affine => actions::momentum_map(a, &l.d_a(xi, a)?),
    }
}

/// ȧ: the infinitesimal action, plus dc(ξ) for affine equations.
pub fn advect_rhs(family: EquationFamily, xi: &AlgElem, a: &AdvectedState) -> Result<Vec<f64>> {
    family.check(a)?;
    let mut v = actions::act_infinitesimal(xi, a)?;
    if family == EquationFamily::Affine {
        for (o, d) in v.iter_mut().zip(actions::dc_eval(a.desc(), xi)?) {
            *o += d;
        }
    }
    Ok(v)
}

/// A curve t ↦ (ξ(t), a(t)).
pub type CurveFn<'a> = dyn Fn(f64) -> Result<(AlgElem, AdvectedState)> + Send + Sync + 'a;

/// LHS − RHS of the momentum equation along `curve` at `t`, differentiating in time
/// with step `h`.
pub fn ep_residual(
    family: EquationFamily,
    l: &dyn ReducedLagrangian,
    curve: &CurveFn<'_>,
    t: f64,
    h: f64,
) -> Result<DualElem> {
    let dmu = algebra::time_derivative(
        |s| {
            let (xi, a) = curve(s)?;
            Ok(l.d_xi(&xi, &a)?.into_coords())
        },
        t,
        h,
    )?;
    let (xi, a) = curve(t)?;
    let mu = l.d_xi(&xi, &a)?;
    let rhs = forcing(family, l, &xi, &a)?.sub(&ad_star(&xi, &mu)?);
    let dmu = DualElem::new(xi.algebra().clone(), dmu)?;
    Ok(dmu.sub(&rhs))
}

/// ȧ − advect_rhs along `curve` at `t`.
pub fn advection_residual(family: EquationFamily, curve: &CurveFn<'_>, t: f64, h: f64) -> Result<Vec<f64>> {
    let da = algebra::time_derivative(|s| Ok(curve(s)?.1.value().to_vec()), t, h)?;
    let (xi, a) = curve(t)?;
    let rhs = advect_rhs(family, &xi, &a)?;
    Ok(da.iter().zip(rhs).map(|(d, r)| d - r).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EPState {
    pub t: f64,
    pub mu: DualElem,
    pub a: AdvectedState,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<EPState>,
    pub xi: Vec<AlgElem>,
    /// Largest |‖m‖ − 1| seen before renormalization (sphere parameters only).
    pub max_sphere_defect: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &EPState {
        self.states.last().expect("trajectories hold at least the initial state")
    }
}

/// (μ̇, ȧ, ξ) at the state (μ, a).
pub fn vector_field(system: &SystemBundle, mu: &DualElem, a: &AdvectedState, tol: f64) -> Result<(DualElem, Vec<f64>, AlgElem)> {
    let l = system.lagrangian.as_ref();
    let xi = l.inertia_solve_with_tolerance(mu, a, tol)?;
    let dmu = forcing(system.family, l, &xi, a)?.sub(&ad_star(&xi, mu)?);
    let da = advect_rhs(system.family, &xi, a)?;
    Ok((dmu, da, xi))
}

fn abort(t: f64, e: EpError) -> EpError {
    match e {
        EpError::Integration { .. } => e,
        other => EpError::Integration { t, reason: other.to_string() },
    }
}

/// Classical RK4 on (μ, a) from ξ₀, a₀ over [0, T] with step dt; every step is recorded.
pub fn integrate(system: &SystemBundle, xi0: &AlgElem, a0: &AdvectedState, t_end: f64, dt: f64) -> Result<Trajectory> {
    let l = system.lagrangian.as_ref();
    if !l.integrable() {
        return Err(EpError::NotIntegrable(l.name().into()));
    }
    if !(dt > 0.0) || !(t_end > 0.0) || !dt.is_finite() || !t_end.is_finite() {
        return Err(EpError::InvalidParameter(format!("need 0 < dt and 0 < T, got dt={dt}, T={t_end}")));
    }
    if dt >= t_end {
        return Err(EpError::InvalidParameter(format!("dt={dt} must be smaller than T={t_end}")));
    }
    system.family.check(a0)?;
    system.check_parameter(a0)?;
    let steps = (t_end / dt).round() as usize;
    let mu0 = l.d_xi(xi0, a0)?;
    let nm = mu0.coords().len();
    let alg = mu0.algebra().clone();

    let split = |y: &[f64]| -> (DualElem, AdvectedState) {
        (DualElem::new_unchecked(alg.clone(), y[..nm].to_vec()), a0.with_value(y[nm..].to_vec()))
    };
    let field = |y: &[f64], t: f64| -> Result<Vec<f64>> {
        let (mu, a) = split(y);
        let (dmu, da, _) = vector_field(system, &mu, &a, INTEGRATION_COMPATIBILITY_TOL).map_err(|e| abort(t, e))?;
        let mut out = dmu.into_coords();
        out.extend(da);
        ensure_finite("vector field", &out).map_err(|e| abort(t, e))?;
        Ok(out)
    };

    let mut y: Vec<f64> = mu0.coords().iter().chain(a0.value()).copied().collect();
    let xi_first = l.inertia_solve_with_tolerance(&mu0, a0, INTEGRATION_COMPATIBILITY_TOL).map_err(|e| abort(0.0, e))?;
    let mut traj = Trajectory {
        dt,
        times: vec![0.0],
        states: vec![EPState { t: 0.0, mu: mu0.clone(), a: a0.clone() }],
        xi: vec![xi_first],
        max_sphere_defect: 0.0,
    };
    let axpy = |y: &[f64], s: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for i in 0..steps {
        let t = i as f64 * dt;
        let k1 = field(&y, t)?;
        let k2 = field(&axpy(&y, 0.5 * dt, &k1), t + 0.5 * dt)?;
        let k3 = field(&axpy(&y, 0.5 * dt, &k2), t + 0.5 * dt)?;
        let k4 = field(&axpy(&y, dt, &k3), t + dt)?;
        for j in 0..y.len() {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let t_next = (i + 1) as f64 * dt;
        ensure_finite("state", &y).map_err(|e| abort(t_next, e))?;
        let (mu, mut a) = split(&y);
        if a.desc().kind() == ActionKind::SphereSo3 {
            let norm = a.value().iter().map(|v| v * v).sum::<f64>().sqrt();
            traj.max_sphere_defect = traj.max_sphere_defect.max((norm - 1.0).abs());
            a = a.renormalized();
            y[nm..].copy_from_slice(a.value());
        }
        system.check_parameter(&a).map_err(|e| abort(t_next, e))?;
        let xi = l.inertia_solve_with_tolerance(&mu, &a, INTEGRATION_COMPATIBILITY_TOL).map_err(|e| abort(t_next, e))?;
        traj.times.push(t_next);
        traj.states.push(EPState { t: t_next, mu, a });
        traj.xi.push(xi);
    }
    Ok(traj)
}

/// E = ⟨μ, ξ⟩ − ℓ(ξ, a).
pub fn energy(l: &dyn ReducedLagrangian, mu: &DualElem, xi: &AlgElem, a: &AdvectedState) -> Result<f64> {
    Ok(pair(mu, xi)? - l.eval(xi, a)?)
}

/// Evaluates the system's declared conserved quantities at `state`.
pub fn conserved_quantities(system: &SystemBundle, state: &EPState) -> Result<Vec<(Conserved, f64)>> {
    let l = system.lagrangian.as_ref();
    let xi = l.inertia_solve_with_tolerance(&state.mu, &state.a, INTEGRATION_COMPATIBILITY_TOL)?;
    conserved_with_xi(system, state, &xi)
}

pub(crate) fn conserved_with_xi(system: &SystemBundle, state: &EPState, xi: &AlgElem) -> Result<Vec<(Conserved, f64)>> {
    let l = system.lagrangian.as_ref();
    let mu = state.mu.coords();
    let a = state.a.value();
    system
        .conserved
        .iter()
        .map(|q| {
            let v = match q {
                Conserved::Energy => energy(l, &state.mu, xi, &state.a)?,
                Conserved::GammaNormSquared => a.iter().map(|v| v * v).sum(),
                Conserved::MomentumDotGamma => mu.iter().zip(a).map(|(x, y)| x * y).sum(),
                Conserved::SphereNorm => a.iter().map(|v| v * v).sum::<f64>().sqrt(),
                Conserved::MeanMomentum => lattice::component_means(mu, 1)[0],
                Conserved::Mass => {
                    let g = system.grid().expect("mass needs a lattice");
                    a.iter().sum::<f64>() * g.spacing()
                }
                Conserved::SpinCompatibility => {
                    let g = system.grid().expect("spin compatibility needs a lattice");
                    let mut total = [0.0; 3];
                    for (m, x) in mu.chunks_exact(3).zip(xi.coords().chunks_exact(3)) {
                        total[0] += m[1] * x[2] - m[2] * x[1];
                        total[1] += m[2] * x[0] - m[0] * x[2];
                        total[2] += m[0] * x[1] - m[1] * x[0];
                    }
                    total.iter().map(|v| v * v).sum::<f64>().sqrt() * g.spacing()
                }
            };
            Ok((*q, v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::ActionDescriptor;
    use crate::algebra::Algebra;
    use crate::lattice::Grid;
    use crate::systems::{build_system, SystemName, SystemParams};
    use nalgebra::Vector3;

    #[test]
    fn advect_rhs_examples() {
        let sphere = AdvectedState::new(ActionDescriptor::sphere(), vec![1.0, 0.0, 0.0]).unwrap();
        let v = advect_rhs(EquationFamily::Breaking, &AlgElem::so3(Vector3::z()), &sphere).unwrap();
        assert_eq!(v, vec![0.0, 1.0, 0.0]);
        assert!(advect_rhs(EquationFamily::Breaking, &AlgElem::zeros(Algebra::So3), &sphere)
            .unwrap()
            .iter()
            .all(|x| *x == 0.0));
        let g = Grid::new(16).unwrap();
        let gamma = AdvectedState::new(ActionDescriptor::connection(g), g.sample3(|x| [x.sin(), 0.2, x.cos()])).unwrap();
        let v = advect_rhs(EquationFamily::Affine, &AlgElem::zeros(Algebra::GaugeSo3(g)), &gamma).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
        assert!(advect_rhs(EquationFamily::Plain, &AlgElem::zeros(Algebra::So3), &sphere).is_err());
    }

    #[test]
    fn sleeping_top_is_an_equilibrium() {
        let sys = build_system(SystemName::HeavyTop, &SystemParams::default()).unwrap();
        let xi = AlgElem::so3(Vector3::new(0.0, 0.0, 2.0));
        let a = AdvectedState::new(ActionDescriptor::linear_r3(), vec![0.0, 0.0, 1.0]).unwrap();
        let curve = |_t: f64| Ok((xi.clone(), a.clone()));
        let r = ep_residual(EquationFamily::Advected, sys.lagrangian.as_ref(), &curve, 0.5, 1e-3).unwrap();
        assert!(r.sup_norm() < 1e-12);
    }

    #[test]
    fn constant_kernel_curve_has_zero_residual() {
        let sys = build_system(SystemName::Hs1d, &SystemParams::default()).unwrap();
        let g = sys.grid().unwrap();
        let xi = AlgElem::new(Algebra::VectS1(g), vec![0.7; g.n()]).unwrap();
        let none = AdvectedState::empty(Algebra::VectS1(g));
        let curve = |_t: f64| Ok((xi.clone(), none.clone()));
        let r = ep_residual(EquationFamily::Plain, sys.lagrangian.as_ref(), &curve, 0.0, 1e-3).unwrap();
        assert!(r.sup_norm() < 1e-30);
    }

    #[test]
    fn zero_data_stays_zero() {
        let sys = build_system(SystemName::Hs1d, &SystemParams { n: 32, ..SystemParams::default() }).unwrap();
        let g = sys.grid().unwrap();
        let traj = integrate(
            &sys,
            &AlgElem::zeros(Algebra::VectS1(g)),
            &AdvectedState::empty(Algebra::VectS1(g)),
            0.1,
            1e-2,
        )
        .unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.states.iter().all(|s| s.mu.sup_norm() == 0.0));
    }

    #[test]
    fn zero_state_energy_is_minus_potential() {
        let sys = build_system(SystemName::HeavyTop, &SystemParams::default()).unwrap();
        let a = AdvectedState::new(ActionDescriptor::linear_r3(), vec![0.0, 0.6, 0.8]).unwrap();
        let state = EPState { t: 0.0, mu: DualElem::zeros(Algebra::So3), a: a.clone() };
        let q = conserved_quantities(&sys, &state).unwrap();
        let l0 = sys.lagrangian.eval(&AlgElem::zeros(Algebra::So3), &a).unwrap();
        assert_eq!(q[0], (Conserved::Energy, -l0));
    }

    #[test]
    fn invalid_steps_are_rejected() {
        let sys = build_system(SystemName::HeavyTop, &SystemParams::default()).unwrap();
        let (xi, a) = sys.default_init();
        assert!(integrate(&sys, &xi, &a, 1.0, 0.0).is_err());
        assert!(integrate(&sys, &xi, &a, 1.0, 2.0).is_err());
    }
}
