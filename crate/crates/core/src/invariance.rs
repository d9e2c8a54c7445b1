//! Path-group action on curves (ξ(t), a(t)) and the invariance checks built on it:
//! Lagrangian invariance, equivariance of functional derivatives, equivariance of
//! EP residuals on arbitrary curves, and transport of computed solutions.
//!
//! A path h(t) acts by (ξ, a) ↦ (Ad_h ξ + δʳh, h·a) with δʳh = ḣh⁻¹.

use std::sync::{Arc, OnceLock};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{self, ActionDescriptor, ActionKind, AdvectedState};
use crate::algebra::{group_ad, group_ad_star, rodrigues, AlgElem, Algebra, GroupElem};
use crate::dynamics::{advection_residual, ep_residual, integrate, CurveFn, Trajectory};
use crate::error::{EpError, Result};
use crate::lagrangian::ReducedLagrangian;
use crate::lattice::Grid;
use crate::systems::SystemBundle;

/// Angle schedule θ(t) of a one-parameter path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant { theta: f64 },
    Linear { theta0: f64, omega: f64 },
    Sinusoidal { eps: f64, freq: f64 },
}

impl Schedule {
    pub fn angle(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant { theta } => theta,
            Schedule::Linear { theta0, omega } => theta0 + omega * t,
            Schedule::Sinusoidal { eps, freq } => eps * (freq * t).sin(),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant { .. } => 0.0,
            Schedule::Linear { omega, .. } => omega,
            Schedule::Sinusoidal { eps, freq } => eps * freq * (freq * t).cos(),
        }
    }

    fn label(&self) -> String {
        match *self {
            Schedule::Constant { theta } => format!("constant({theta})"),
            Schedule::Linear { theta0, omega } => format!("linear({theta0}+{omega}t)"),
            Schedule::Sinusoidal { eps, freq } => format!("sinusoidal({eps}sin({freq}t))"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HPathKind {
    /// Rigid rotations of the circle by θ(t).
    RotationS1 { grid: Grid, schedule: Schedule },
    /// exp(θ(t) x̂) about a fixed unit axis.
    So3Path { axis: Vector3<f64>, schedule: Schedule },
    /// Spatially constant gauge transformation exp(θ(t) x̂) at every site.
    ConstGauge { grid: Grid, axis: Vector3<f64>, schedule: Schedule },
    /// Time-independent group element.
    Fixed(GroupElem),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HPath {
    kind: HPathKind,
    flipped: bool,
}

impl HPath {
    pub fn rotation_s1(grid: Grid, schedule: Schedule) -> Self {
        Self { kind: HPathKind::RotationS1 { grid, schedule }, flipped: false }
    }

    pub fn so3_path(axis: Vector3<f64>, schedule: Schedule) -> Self {
        Self { kind: HPathKind::So3Path { axis: axis.normalize(), schedule }, flipped: false }
    }

    pub fn const_gauge(grid: Grid, axis: Vector3<f64>, schedule: Schedule) -> Self {
        Self { kind: HPathKind::ConstGauge { grid, axis: axis.normalize(), schedule }, flipped: false }
    }

    pub fn fixed(g: GroupElem) -> Self {
        Self { kind: HPathKind::Fixed(g), flipped: false }
    }

    pub fn identity(algebra: &Algebra) -> Self {
        Self::fixed(GroupElem::identity(algebra))
    }

    /// The same path with δʳh replaced by −δʳh (a broken action, for controls).
    pub fn with_flipped_log_derivative(mut self) -> Self {
        self.flipped = !self.flipped;
        self
    }

    pub fn kind(&self) -> &HPathKind {
        &self.kind
    }

    pub fn label(&self) -> String {
        let base = match &self.kind {
            HPathKind::RotationS1 { schedule, .. } => format!("rotation_s1:{}", schedule.label()),
            HPathKind::So3Path { axis, schedule } => {
                format!("so3_path[{:.4},{:.4},{:.4}]:{}", axis.x, axis.y, axis.z, schedule.label())
            }
            HPathKind::ConstGauge { axis, schedule, .. } => {
                format!("const_gauge[{:.4},{:.4},{:.4}]:{}", axis.x, axis.y, axis.z, schedule.label())
            }
            HPathKind::Fixed(GroupElem::So3(r)) => {
                let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
                let w = q.scaled_axis();
                format!("fixed_so3[{:.4},{:.4},{:.4}]", w.x, w.y, w.z)
            }
            HPathKind::Fixed(GroupElem::Gauge { .. }) => "fixed_gauge_map".into(),
            HPathKind::Fixed(_) => "fixed".into(),
        };
        if self.flipped {
            format!("{base}:flipped")
        } else {
            base
        }
    }

    pub fn group_at(&self, t: f64) -> GroupElem {
        match &self.kind {
            HPathKind::RotationS1 { grid, schedule } => GroupElem::rotation(*grid, schedule.angle(t)),
            HPathKind::So3Path { axis, schedule } => GroupElem::So3(rodrigues(&(axis * schedule.angle(t)))),
            HPathKind::ConstGauge { grid, axis, schedule } => {
                GroupElem::gauge_constant(*grid, rodrigues(&(axis * schedule.angle(t))))
            }
            HPathKind::Fixed(g) => g.clone(),
        }
    }

    /// Algebra on which the path acts.
    pub fn algebra(&self) -> Algebra {
        match &self.kind {
            HPathKind::RotationS1 { grid, .. } => Algebra::VectS1(*grid),
            HPathKind::So3Path { .. } => Algebra::So3,
            HPathKind::ConstGauge { grid, .. } => Algebra::GaugeSo3(*grid),
            HPathKind::Fixed(GroupElem::So3(_)) => Algebra::So3,
            HPathKind::Fixed(GroupElem::Gauge { grid, .. }) => Algebra::GaugeSo3(*grid),
            HPathKind::Fixed(GroupElem::Rotation { grid, .. }) => Algebra::VectS1(*grid),
            HPathKind::Fixed(GroupElem::Product(_)) => unimplemented!("product paths are not cataloged"),
        }
    }

    /// δʳh(t) = ḣh⁻¹ in closed form.
    pub fn log_derivative(&self, t: f64) -> AlgElem {
        let sign = if self.flipped { -1.0 } else { 1.0 };
        let alg = self.algebra();
        let coords = match &self.kind {
            HPathKind::RotationS1 { grid, schedule } => vec![sign * schedule.rate(t); grid.n()],
            HPathKind::So3Path { axis, schedule } => (axis * (sign * schedule.rate(t))).as_slice().to_vec(),
            HPathKind::ConstGauge { grid, axis, schedule } => {
                let w = axis * (sign * schedule.rate(t));
                (0..grid.n()).flat_map(|_| [w.x, w.y, w.z]).collect()
            }
            HPathKind::Fixed(_) => vec![0.0; alg.dim()],
        };
        AlgElem::new_unchecked(alg, coords)
    }

    /// Random element of the Lie algebra 𝔥 of the path's subgroup.
    pub fn isotropy_sample<R: Rng>(&self, rng: &mut R) -> AlgElem {
        let alg = self.algebra();
        let coords = match &self.kind {
            HPathKind::RotationS1 { grid, .. } => vec![rng.gen_range(-1.0..1.0); grid.n()],
            HPathKind::So3Path { axis, .. } => (axis * rng.gen_range(-1.0..1.0)).as_slice().to_vec(),
            HPathKind::ConstGauge { grid, .. } => {
                let w = crate::sampling::random_vector(rng, 1.0);
                (0..grid.n()).flat_map(|_| [w.x, w.y, w.z]).collect()
            }
            HPathKind::Fixed(_) => vec![0.0; alg.dim()],
        };
        AlgElem::new_unchecked(alg, coords)
    }

    /// (ξ, a) ↦ (Ad_{h(t)} ξ + δʳh(t), h(t)·a).
    pub fn act(&self, t: f64, xi: &AlgElem, a: &AdvectedState) -> Result<(AlgElem, AdvectedState)> {
        let g = self.group_at(t);
        let moved = group_ad(&g, xi)?.add(&self.log_derivative(t));
        Ok((moved, actions::act_group(&g, a)?))
    }
}

/// A curve t ↦ (ξ(t), a(t)).
#[derive(Clone)]
pub struct CurvePair {
    f: Arc<CurveFn<'static>>,
}

impl std::fmt::Debug for CurvePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("CurvePair")
    }
}

impl CurvePair {
    pub fn new(f: impl Fn(f64) -> Result<(AlgElem, AdvectedState)> + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn eval(&self, t: f64) -> Result<(AlgElem, AdvectedState)> {
        (self.f)(t)
    }

    pub fn as_fn(&self) -> &CurveFn<'static> {
        self.f.as_ref()
    }

    pub fn from_trajectory(traj: Arc<Trajectory>) -> Self {
        let spline = TrajectorySpline::new(traj);
        Self::new(move |t| spline.eval(t))
    }
}

pub fn act_on_curve(h: &HPath, c: &CurvePair) -> CurvePair {
    let h = h.clone();
    let c = c.clone();
    CurvePair::new(move |t| {
        let (xi, a) = c.eval(t)?;
        h.act(t, &xi, &a)
    })
}

/// Not-a-knot cubic spline through uniformly spaced samples (one column per coordinate).
#[derive(Clone, Debug)]
pub struct CubicSpline {
    t0: f64,
    h: f64,
    values: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl CubicSpline {
    pub fn new(t0: f64, h: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len();
        if n < 5 {
            return Err(EpError::InvalidParameter(format!("spline needs at least 5 samples, got {n}")));
        }
        let dim = values[0].len();
        let last = n - 1;
        let scale = 6.0 / (h * h);
        let rhs = |i: usize, c: usize| scale * (values[i + 1][c] - 2.0 * values[i][c] + values[i - 1][c]);
        let mut m = vec![vec![0.0; dim]; n];
        // Eliminating the end conditions M₀ − 2M₁ + M₂ = 0 (and its mirror) gives 6M₁ = r₁.
        for c in 0..dim {
            m[1][c] = rhs(1, c) / 6.0;
            m[last - 1][c] = rhs(last - 1, c) / 6.0;
        }
        // Tridiagonal rows M_{i−1} + 4M_i + M_{i+1} = r_i for i = 2..last−2.
        let inner = if last >= 4 { last - 3 } else { 0 };
        if inner > 0 {
            let mut cp = vec![0.0; inner];
            let mut denom = vec![0.0; inner];
            for k in 0..inner {
                denom[k] = 4.0 - if k > 0 { cp[k - 1] } else { 0.0 };
                cp[k] = 1.0 / denom[k];
            }
            let mut d = vec![0.0; inner];
            for c in 0..dim {
                for k in 0..inner {
                    let i = k + 2;
                    let mut r = rhs(i, c);
                    if k == 0 {
                        r -= m[1][c];
                    }
                    if k == inner - 1 {
                        r -= m[last - 1][c];
                    }
                    d[k] = (r - if k > 0 { d[k - 1] } else { 0.0 }) / denom[k];
                }
                for k in (0..inner).rev() {
                    let next = if k + 1 < inner { m[k + 3][c] } else { 0.0 };
                    m[k + 2][c] = d[k] - cp[k] * next;
                }
            }
        }
        for c in 0..dim {
            m[0][c] = 2.0 * m[1][c] - m[2][c];
            m[last][c] = 2.0 * m[last - 1][c] - m[last - 2][c];
        }
        Ok(Self { t0, h, values, second: m })
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let last = self.values.len() - 1;
        let x = (t - self.t0) / self.h;
        if !(x >= -1e-9 && x <= last as f64 + 1e-9) {
            return Err(EpError::InvalidParameter(format!("t = {t} outside the sampled interval")));
        }
        let i = (x.floor().max(0.0) as usize).min(last - 1);
        let s = x - i as f64;
        let r = 1.0 - s;
        let h2 = self.h * self.h / 6.0;
        let (y0, y1, m0, m1) = (&self.values[i], &self.values[i + 1], &self.second[i], &self.second[i + 1]);
        Ok((0..y0.len())
            .map(|c| r * y0[c] + s * y1[c] + h2 * ((r * r * r - r) * m0[c] + (s * s * s - s) * m1[c]))
            .collect())
    }
}

/// Evaluates a trajectory at arbitrary times: stored samples at knots, a lazily
/// built not-a-knot spline elsewhere.
struct TrajectorySpline {
    traj: Arc<Trajectory>,
    spline: OnceLock<Result<CubicSpline>>,
}

impl TrajectorySpline {
    fn new(traj: Arc<Trajectory>) -> Self {
        Self { traj, spline: OnceLock::new() }
    }

    fn eval(&self, t: f64) -> Result<(AlgElem, AdvectedState)> {
        let traj = &self.traj;
        let x = t / traj.dt;
        let k = x.round();
        if (x - k).abs() < 1e-9 && k >= 0.0 && (k as usize) < traj.len() {
            let i = k as usize;
            return Ok((traj.xi[i].clone(), traj.states[i].a.clone()));
        }
        let spline = self
            .spline
            .get_or_init(|| {
                let rows = traj
                    .xi
                    .iter()
                    .zip(&traj.states)
                    .map(|(xi, s)| xi.coords().iter().chain(s.a.value()).copied().collect())
                    .collect();
                CubicSpline::new(0.0, traj.dt, rows)
            })
            .as_ref()
            .map_err(Clone::clone)?;
        let row = spline.eval(t)?;
        let n = traj.xi[0].coords().len();
        let xi = AlgElem::new_unchecked(traj.xi[0].algebra().clone(), row[..n].to_vec());
        Ok((xi, traj.states[0].a.with_value(row[n..].to_vec())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub system: String,
    pub h_path: String,
    pub max_defect: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
    pub worst_sample: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    pub expected_fail: bool,
}

impl CheckReport {
    fn new(name: &str, system: &str, h: &HPath, defects: &[f64], tolerance: f64) -> Self {
        let (worst_sample, max_defect) = defects
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, v)| if v > bv || v.is_nan() { (i, v) } else { (bi, bv) });
        Self {
            name: name.into(),
            system: system.into(),
            h_path: h.label(),
            max_defect,
            tolerance,
            pass: max_defect <= tolerance,
            samples: defects.len(),
            worst_sample,
            baseline: None,
            expected_fail: false,
        }
    }

    pub fn expecting_failure(mut self) -> Self {
        self.expected_fail = true;
        self
    }

    /// A check is satisfied when it passes, or fails while being a designed control.
    pub fn as_expected(&self) -> bool {
        self.pass != self.expected_fail
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn is_lattice(alg: &Algebra) -> bool {
    alg.grid().is_some()
}

/// One sample for the pointwise checks: a state, a time on the path and η ∈ 𝔥.
#[derive(Clone, Debug)]
pub struct InvarianceSample {
    pub xi: AlgElem,
    pub a: AdvectedState,
    pub t: f64,
    pub eta: AlgElem,
}

pub fn draw_samples<R: Rng>(system: &SystemBundle, h: &HPath, rng: &mut R, count: usize) -> Vec<InvarianceSample> {
    (0..count)
        .map(|_| {
            let (xi, a) = system.random_state(rng);
            InvarianceSample { xi, a, t: rng.gen_range(0.0..10.0), eta: h.isotropy_sample(rng) }
        })
        .collect()
}

/// |ℓ(Ad_h ξ + η, h·a) − ℓ(ξ, a)|, with tolerance 1e-9 on 𝔰𝔬(3) and 1e-7 on lattices.
pub fn check_lagrangian_invariance(
    system: &str,
    l: &dyn ReducedLagrangian,
    h: &HPath,
    samples: &[InvarianceSample],
) -> Result<CheckReport> {
    let defects = samples
        .iter()
        .map(|s| {
            let g = h.group_at(s.t);
            let moved = group_ad(&g, &s.xi)?.add(&s.eta);
            let a = actions::act_group(&g, &s.a)?;
            Ok((l.eval(&moved, &a)? - l.eval(&s.xi, &s.a)?).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let tol = if is_lattice(l.algebra()) { 1e-7 } else { 1e-9 };
    Ok(CheckReport::new("lagrangian_invariance", system, h, &defects, tol))
}

/// δℓ/δξ(h·(ξ,a)) = Ad*_{h⁻¹} δℓ/δξ(ξ,a) and δℓ/δa(h·(ξ,a)) = ρ_{h⁻¹} δℓ/δa(ξ,a).
pub fn check_derivative_equivariance(
    system: &str,
    l: &dyn ReducedLagrangian,
    h: &HPath,
    samples: &[InvarianceSample],
) -> Result<CheckReport> {
    let defects = samples
        .iter()
        .map(|s| {
            let g = h.group_at(s.t);
            let inv = g.inverse();
            let (xi2, a2) = h.act(s.t, &s.xi, &s.a)?;
            let mu_moved = l.d_xi(&xi2, &a2)?;
            let mu_expect = group_ad_star(&inv, &l.d_xi(&s.xi, &s.a)?)?;
            let da_moved = l.d_a(&xi2, &a2)?;
            let da_expect = actions::dual_act(&inv, s.a.desc(), &l.d_a(&s.xi, &s.a)?)?;
            Ok(sup_diff(mu_moved.coords(), mu_expect.coords()).max(sup_diff(&da_moved, &da_expect)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CheckReport::new("derivative_equivariance", system, h, &defects, 1e-9))
}

/// Linear part of the parameter action, applied to tangent vectors.
fn tangent_act(g: &GroupElem, desc: &ActionDescriptor, v: &[f64]) -> Result<Vec<f64>> {
    if desc.kind() == ActionKind::Trivial {
        return Ok(Vec::new());
    }
    let linear = ActionDescriptor::new(desc.kind(), desc.algebra().clone(), desc.sigma(), actions::CocycleKind::None)?;
    Ok(actions::act_group(g, &AdvectedState::new_unchecked(linear, v.to_vec()))?.value().to_vec())
}

/// Residuals of the momentum and advection equations at `t`.
fn residuals(system: &SystemBundle, curve: &CurveFn<'_>, t: f64, step: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = ep_residual(system.family, system.lagrangian.as_ref(), curve, t, step)?;
    let adv = advection_residual(system.family, curve, t, step)?;
    Ok((r.into_coords(), adv))
}

/// Compares the residuals of h·c with the transported residuals of c:
/// max_t ‖r(h·c) − Ad*_{h⁻¹} r(c)‖ / (1 + ‖r(c)‖), over both equations.
pub fn check_residual_equivariance(
    system: &SystemBundle,
    h: &HPath,
    c: &CurvePair,
    times: &[f64],
    step: f64,
) -> Result<CheckReport> {
    let moved = act_on_curve(h, c);
    let defects = times
        .iter()
        .map(|&t| {
            let (r, adv) = residuals(system, c.as_fn(), t, step)?;
            let (r2, adv2) = residuals(system, moved.as_fn(), t, step)?;
            let g = h.group_at(t);
            let mu = crate::algebra::DualElem::new_unchecked(system.algebra.clone(), r);
            let expect = group_ad_star(&g.inverse(), &mu)?;
            let adv_expect = tangent_act(&g, &system.action, &adv)?;
            let scale = 1.0 + sup(mu.coords()).max(sup(&adv));
            Ok(sup_diff(&r2, expect.coords()).max(sup_diff(&adv2, &adv_expect)) / scale)
        })
        .collect::<Result<Vec<f64>>>()?;
    let tol = if is_lattice(&system.algebra) { 1e-6 } else { 1e-7 };
    Ok(CheckReport::new("residual_equivariance", system.name.as_str(), h, &defects, tol))
}

/// Knot indices used for trajectory residuals: interior, at most ~`limit` of them.
fn residual_knots(len: usize, limit: usize) -> Vec<usize> {
    if len < 5 {
        return Vec::new();
    }
    let (first, last) = (2, len - 3);
    let stride = ((last - first) / limit.max(1)).max(1);
    let mut idx: Vec<usize> = (first..=last).step_by(stride).collect();
    if *idx.last().unwrap() != last {
        idx.push(last);
    }
    idx
}

/// Largest residual (both equations, sup norm) of a curve at the given times.
pub fn max_residual(system: &SystemBundle, c: &CurvePair, times: &[f64], step: f64) -> Result<f64> {
    times.iter().try_fold(0.0f64, |m, &t| {
        let (r, adv) = residuals(system, c.as_fn(), t, step)?;
        Ok(m.max(sup(&r)).max(sup(&adv)))
    })
}

/// Integrates from (ξ₀, a₀), transforms the trajectory by `h`, and compares the
/// residual of the transformed curve with that of the computed one. Passes when
/// the transformed residual is at most 10× the original plus 1e-6.
pub fn check_solution_transport(
    system: &SystemBundle,
    h: &HPath,
    xi0: &AlgElem,
    a0: &AdvectedState,
    t_end: f64,
    dt: f64,
) -> Result<CheckReport> {
    let traj = Arc::new(integrate(system, xi0, a0, t_end, dt)?);
    transport_report(system, h, traj)
}

pub fn transport_report(system: &SystemBundle, h: &HPath, traj: Arc<Trajectory>) -> Result<CheckReport> {
    let dt = traj.dt;
    let times: Vec<f64> = residual_knots(traj.len(), 500).into_iter().map(|i| traj.times[i]).collect();
    let curve = CurvePair::from_trajectory(traj);
    let base = max_residual(system, &curve, &times, dt)?;
    let moved = act_on_curve(h, &curve);
    let defects = times
        .iter()
        .map(|&t| {
            let (r, adv) = residuals(system, moved.as_fn(), t, dt)?;
            Ok(sup(&r).max(sup(&adv)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut report = CheckReport::new("solution_transport", system.name.as_str(), h, &defects, 10.0 * base + 1e-6);
    report.baseline = Some(base);
    Ok(report)
}

/// Rotation taking the path's algebra sample to a matrix, for tests of δʳh.
pub fn path_matrix(h: &HPath, t: f64) -> Option<Matrix3<f64>> {
    match h.group_at(t) {
        GroupElem::So3(r) => Some(r),
        GroupElem::Gauge { sites, .. } => Some(sites[0]),
        _ => None,
    }
}
