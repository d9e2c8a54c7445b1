//! Verification suites: runs a named check over a system's H-path catalog and
//! collects one report per (check, path). Randomized inputs are drawn from a
//! seeded generator so identical options give identical reports.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actions::AdvectedState;
use crate::algebra::AlgElem;
use crate::dynamics::{conserved_with_xi, integrate, vector_field, Trajectory};
use crate::error::{EpError, Result};
use crate::invariance::{
    check_derivative_equivariance, check_lagrangian_invariance, check_residual_equivariance, draw_samples,
    transport_report, CheckReport, HPath,
};
use crate::systems::{Conserved, NegativeControl, SystemBundle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    LagrangianInvariance,
    DerivativeEquivariance,
    ResidualEquivariance,
    SolutionTransport,
    ReferenceMatch,
    Conservation,
}

impl CheckKind {
    pub const ALL: [CheckKind; 6] = [
        CheckKind::LagrangianInvariance,
        CheckKind::DerivativeEquivariance,
        CheckKind::ResidualEquivariance,
        CheckKind::SolutionTransport,
        CheckKind::ReferenceMatch,
        CheckKind::Conservation,
    ];
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Pointwise samples per path for invariance and equivariance checks.
    pub samples: usize,
    /// Random curves per path for residual equivariance.
    pub curves: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Initial condition for integrating checks; the system default when `None`.
    pub init: Option<(AlgElem, AdvectedState)>,
    /// Replaces the system's catalog when set.
    pub h_paths: Option<Vec<HPath>>,
}

impl VerifyOptions {
    pub fn for_system(system: &SystemBundle) -> Self {
        Self {
            seed: 42,
            samples: 32,
            curves: 16,
            t_end: default_horizon(system),
            dt: 1e-3,
            init: None,
            h_paths: None,
        }
    }
}

/// T = 10 for the rigid-body systems, T = 1 on lattices.
pub fn default_horizon(system: &SystemBundle) -> f64 {
    if system.grid().is_some() {
        1.0
    } else {
        10.0
    }
}

/// Sample times for residual checks on analytic curves.
pub const CURVE_TIMES: [f64; 3] = [0.5, 1.7, 3.2];

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn paths(system: &SystemBundle, opts: &VerifyOptions) -> Vec<HPath> {
    let mut p = opts.h_paths.clone().unwrap_or_else(|| system.h_paths.clone());
    if p.is_empty() {
        p.push(HPath::identity(&system.algebra));
    }
    p
}

fn init(system: &SystemBundle, opts: &VerifyOptions) -> (AlgElem, AdvectedState) {
    opts.init.clone().unwrap_or_else(|| system.default_init())
}

fn trajectory(system: &SystemBundle, opts: &VerifyOptions) -> Result<Arc<Trajectory>> {
    let (xi, a) = init(system, opts);
    Ok(Arc::new(integrate(system, &xi, &a, opts.t_end, opts.dt)?))
}

fn merge(name: &str, system: &SystemBundle, h: &HPath, parts: Vec<CheckReport>) -> CheckReport {
    let mut worst = parts[0].clone();
    let mut offset = 0;
    let mut total = 0;
    for p in &parts {
        if p.max_defect > worst.max_defect {
            worst = p.clone();
            worst.worst_sample = offset + p.worst_sample;
        }
        offset += p.samples;
        total += p.samples;
    }
    worst.samples = total;
    worst.pass = parts.iter().all(|p| p.pass);
    worst.name = name.into();
    worst.system = system.name.to_string();
    worst.h_path = h.label();
    worst
}

pub fn run_check(system: &SystemBundle, kind: CheckKind, opts: &VerifyOptions) -> Result<Vec<CheckReport>> {
    let name = system.name.as_str();
    let l = system.lagrangian.as_ref();
    match kind {
        CheckKind::LagrangianInvariance | CheckKind::DerivativeEquivariance => paths(system, opts)
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let mut rng = rng_for(opts.seed, kind as u64 * 100 + i as u64);
                let samples = draw_samples(system, h, &mut rng, opts.samples);
                if kind == CheckKind::LagrangianInvariance {
                    check_lagrangian_invariance(name, l, h, &samples)
                } else {
                    check_derivative_equivariance(name, l, h, &samples)
                }
            })
            .collect(),
        CheckKind::ResidualEquivariance => paths(system, opts)
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let mut rng = rng_for(opts.seed, 300 + i as u64);
                let parts = (0..opts.curves)
                    .map(|_| {
                        let c = system.random_curve(&mut rng);
                        check_residual_equivariance(system, h, &c, &CURVE_TIMES, 1e-3)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(merge("residual_equivariance", system, h, parts))
            })
            .collect(),
        CheckKind::SolutionTransport => {
            let traj = trajectory(system, opts)?;
            paths(system, opts).par_iter().map(|h| transport_report(system, h, traj.clone())).collect()
        }
        CheckKind::ReferenceMatch => Ok(vec![reference_match(system, opts)?]),
        CheckKind::Conservation => conservation(system, &*trajectory(system, opts)?),
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn plain_report(name: &str, system: &SystemBundle, defects: &[f64], tolerance: f64) -> CheckReport {
    let (worst_sample, max_defect) = defects
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, v)| if v > bv || v.is_nan() { (i, v) } else { (bi, bv) });
    CheckReport {
        name: name.into(),
        system: system.name.to_string(),
        h_path: "none".into(),
        max_defect,
        tolerance,
        pass: max_defect <= tolerance,
        samples: defects.len(),
        worst_sample,
        baseline: None,
        expected_fail: false,
    }
}

/// Generic family right-hand side against the independently coded equations,
/// relative to the size of the reference, on random smooth states.
pub fn reference_match(system: &SystemBundle, opts: &VerifyOptions) -> Result<CheckReport> {
    if !system.has_reference {
        return Err(EpError::NoReference(system.name.to_string()));
    }
    let mut rng = rng_for(opts.seed, 500);
    let l = system.lagrangian.as_ref();
    let defects = (0..opts.samples)
        .map(|_| {
            let (xi, a) = system.random_state(&mut rng);
            let mu = l.d_xi(&xi, &a)?;
            let (dmu, da, _) = vector_field(system, &mu, &a, 1e-8)?;
            let (rmu, ra) = system.reference_rhs(&mu, &a)?;
            let scale = sup(&rmu).max(sup(&ra)).max(f64::MIN_POSITIVE);
            Ok(sup_diff(dmu.coords(), &rmu).max(sup_diff(&da, &ra)) / scale)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(plain_report("reference_match", system, &defects, 1e-8))
}

fn conserved_tolerance(q: Conserved) -> f64 {
    match q {
        Conserved::Energy => 1e-7,
        Conserved::GammaNormSquared | Conserved::MomentumDotGamma => 1e-9,
        Conserved::SphereNorm => 1e-10,
        Conserved::MeanMomentum | Conserved::Mass | Conserved::SpinCompatibility => 1e-12,
    }
}

/// Whether drift is measured relative to the initial value.
fn relative(q: Conserved) -> bool {
    matches!(q, Conserved::Energy | Conserved::GammaNormSquared | Conserved::MomentumDotGamma | Conserved::Mass)
}

/// Drift of every declared quantity along a trajectory. Relative quantities use
/// |q(t) − q(0)| / |q(0)|; the sphere norm is compared with 1 and the spin
/// compatibility functional with 0.
pub fn conservation(system: &SystemBundle, traj: &Trajectory) -> Result<Vec<CheckReport>> {
    let series = traj
        .states
        .iter()
        .zip(&traj.xi)
        .map(|(s, xi)| conserved_with_xi(system, s, xi))
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::new();
    for (qi, q) in system.conserved.iter().enumerate() {
        let q0 = series[0][qi].1;
        let defects: Vec<f64> = series
            .iter()
            .map(|row| {
                let v = row[qi].1;
                match q {
                    Conserved::SphereNorm => (v - 1.0).abs(),
                    Conserved::SpinCompatibility => v.abs(),
                    _ if relative(*q) => (v - q0).abs() / q0.abs().max(f64::MIN_POSITIVE),
                    _ => (v - q0).abs(),
                }
            })
            .collect();
        reports.push(plain_report(&format!("conservation:{}", q.as_str()), system, &defects, conserved_tolerance(*q)));
    }
    if system.conserved.contains(&Conserved::SphereNorm) {
        reports.push(plain_report("conservation:sphere_step_defect", system, &[traj.max_sphere_defect], 1e-12));
    }
    Ok(reports)
}

/// Runs the system's designed broken configuration; the report is marked as an
/// expected failure.
pub fn run_negative_control(system: &SystemBundle, opts: &VerifyOptions) -> Result<Option<CheckReport>> {
    let Some(control) = system.negative_control() else {
        return Ok(None);
    };
    let name = system.name.as_str();
    let mut rng = rng_for(opts.seed, 900);
    let report = match control {
        NegativeControl::LagrangianInvariance(h) => {
            let samples = draw_samples(system, &h, &mut rng, opts.samples);
            check_lagrangian_invariance(name, system.lagrangian.as_ref(), &h, &samples)?
        }
        NegativeControl::ResidualEquivariance(h) => {
            let parts = (0..opts.curves)
                .map(|_| {
                    let c = system.random_curve(&mut rng);
                    check_residual_equivariance(system, &h, &c, &CURVE_TIMES, 1e-3)
                })
                .collect::<Result<Vec<_>>>()?;
            merge("residual_equivariance", system, &h, parts)
        }
    };
    Ok(Some(report.expecting_failure()))
}

/// Whether a check applies to the system (reference equations and integration
/// are not available everywhere).
pub fn applicable(system: &SystemBundle, kind: CheckKind) -> bool {
    match kind {
        CheckKind::ReferenceMatch => system.has_reference,
        CheckKind::SolutionTransport | CheckKind::Conservation => system.lagrangian.integrable(),
        _ => true,
    }
}

/// Identity path on the system's algebra, for reports that need one.
pub fn identity_path(system: &SystemBundle) -> HPath {
    HPath::identity(&system.algebra)
}
