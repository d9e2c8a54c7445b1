//! Acceptance suite. Each criterion prints one PASS/FAIL line; run with
//! `cargo test -p epred-cli --test acceptance -- --nocapture`.

use std::fs;

use epred::actions::{self, act_group, act_infinitesimal, cocycle_eval, dc_eval, dc_transpose, diamond, momentum_map};
use epred::algebra::pair;
use epred::convergence::SweepParam;
use epred::sampling::{random_gauge_map, random_smooth_field, random_unit, random_vector};
use epred::verification::{run_check, run_negative_control, CheckKind, VerifyOptions};
use epred::{
    build_system, ActionDescriptor, AdvectedState, AlgElem, Algebra, CheckReport, GroupElem, Grid, SpinLagrangian,
    SystemBundle, SystemName, SystemParams,
};
use epred_cli::{cmd_sweep, RunConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const PAIRING_TOL: f64 = 1e-10;
const COCYCLE_TOL: f64 = 1e-8;
const COCYCLE_MAPS: usize = 32;
const COCYCLE_AMPLITUDE: f64 = 0.5;
const DERIVATIVE_TOL: f64 = 1e-9;
const RESIDUAL_TOL_LATTICE: f64 = 1e-6;
const RESIDUAL_TOL_SO3: f64 = 1e-7;
const TRANSPORT_TOL_HS: f64 = 1e-5;
const TRANSPORT_TOL_RIGID: f64 = 1e-6;
const REFERENCE_TOL: f64 = 1e-8;
const ENERGY_TOL: f64 = 1e-7;
const CASIMIR_TOL: f64 = 1e-9;
const SPHERE_TOL: f64 = 1e-10;
const SPIN_COMPAT_TOL: f64 = 1e-12;
const TEMPORAL_ORDER: (f64, f64) = (4.0, 0.2);
const SPATIAL_ORDER: (f64, f64) = (4.0, 0.5);
const CONTROL_MIN_DEFECT: f64 = 1e-3;

const ALL_SYSTEMS: [SystemName; 6] = [
    SystemName::HeavyTop,
    SystemName::Nematic,
    SystemName::NematicProjected,
    SystemName::Hs1d,
    SystemName::DensityHs1d,
    SystemName::SpinLattice,
];

fn system(name: SystemName) -> SystemBundle {
    build_system(name, &SystemParams::default()).unwrap()
}

fn report(criterion: u32, what: &str, pass: bool, detail: String) {
    println!("criterion {criterion} {what:<40} {}  {detail}", if pass { "PASS" } else { "FAIL" });
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn basis(alg: &Algebra, k: usize) -> AlgElem {
    let mut e = vec![0.0; alg.dim()];
    e[k] = 1.0;
    AlgElem::new(alg.clone(), e).unwrap()
}

fn random_elem(rng: &mut ChaCha8Rng, alg: &Algebra) -> AlgElem {
    let coords = match alg {
        Algebra::So3 => random_vector(rng, 1.0).as_slice().to_vec(),
        Algebra::VectS1(g) => random_smooth_field(rng, *g, 1, 3, 1.0),
        Algebra::GaugeSo3(g) => random_smooth_field(rng, *g, 3, 3, 1.0),
        Algebra::Product(_) => unreachable!(),
    };
    AlgElem::new(alg.clone(), coords).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, desc: &ActionDescriptor) -> AdvectedState {
    let value = match (desc.kind(), desc.algebra().grid()) {
        (actions::ActionKind::SphereSo3, _) => random_unit(rng).as_slice().to_vec(),
        (actions::ActionKind::DensityS1, Some(g)) => random_smooth_field(rng, g, 1, 3, 0.3).iter().map(|v| v + 1.0).collect(),
        (_, Some(g)) => random_smooth_field(rng, g, 3, 3, 1.0),
        (_, None) => random_vector(rng, 1.0).as_slice().to_vec(),
    };
    AdvectedState::new(desc.clone(), value).unwrap()
}

/// Largest |lhs_k - rhs_k| over the basis, relative to 1 + max |rhs_k|.
fn basis_defect(alg: &Algebra, lhs: impl Fn(&AlgElem) -> f64, rhs: impl Fn(&AlgElem) -> f64) -> f64 {
    let (mut diff, mut scale): (f64, f64) = (0.0, 0.0);
    for k in 0..alg.dim() {
        let e = basis(alg, k);
        let r = rhs(&e);
        diff = diff.max((lhs(&e) - r).abs());
        scale = scale.max(r.abs());
    }
    diff / (1.0 + scale)
}

#[test]
fn criterion_1_defining_pairings() {
    let g = Grid::new(64).unwrap();
    let descs = [
        ActionDescriptor::linear_r3(),
        ActionDescriptor::sphere(),
        ActionDescriptor::density(g),
        ActionDescriptor::connection(g),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut d_diamond, mut d_momentum, mut d_dc, mut d_dct): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..32 {
        for desc in &descs {
            let alg = desc.algebra().clone();
            let a = random_state(&mut rng, desc);
            let v = random_elem(&mut rng, &alg).into_coords();
            // <v ⋄ a, e_k> = <e_k a, v>
            let dia = diamond(&v, &a).unwrap();
            d_diamond = d_diamond.max(basis_defect(
                &alg,
                |e| pair(&dia, e).unwrap(),
                |e| desc.pair(&act_infinitesimal(e, &a).unwrap(), &v),
            ));
            // <J(a, v), e_k> = <e_k · a + dc(e_k), v>
            let j = momentum_map(&a, &v).unwrap();
            d_momentum = d_momentum.max(basis_defect(
                &alg,
                |e| pair(&j, e).unwrap(),
                |e| {
                    let mut moved = act_infinitesimal(e, &a).unwrap();
                    if desc.cocycle() != actions::CocycleKind::None {
                        moved.iter_mut().zip(dc_eval(desc, e).unwrap()).for_each(|(x, d)| *x += d);
                    }
                    desc.pair(&moved, &v)
                },
            ));
        }
        let desc = &descs[3];
        let alg = desc.algebra().clone();
        let xi = random_elem(&mut rng, &alg);
        // dc against the derivative of the group cocycle along exp(εξ)
        let eps = 1e-3;
        let c = |s: f64| cocycle_eval(desc, &GroupElem::gauge_exp(&xi.scaled(s)).unwrap()).unwrap();
        let (p2, p1, m1, m2) = (c(2.0 * eps), c(eps), c(-eps), c(-2.0 * eps));
        let fd: Vec<f64> = (0..p1.len()).map(|k| (-p2[k] + 8.0 * p1[k] - 8.0 * m1[k] + m2[k]) / (12.0 * eps)).collect();
        let dc = dc_eval(desc, &xi).unwrap();
        let err: Vec<f64> = dc.iter().zip(&fd).map(|(a, b)| a - b).collect();
        d_dc = d_dc.max(sup(&err) / (1.0 + sup(&fd)));
        // <dc(e_k), α> = <dc⊤(α), e_k>
        let alpha = random_smooth_field(&mut rng, g, 3, 3, 1.0);
        let dct = dc_transpose(desc, &alpha).unwrap();
        d_dct = d_dct.max(basis_defect(&alg, |e| pair(&dct, e).unwrap(), |e| desc.pair(&dc_eval(desc, e).unwrap(), &alpha)));
        if i == 0 {
            assert!(sup(&fd) > 0.1);
        }
    }
    let worst = d_diamond.max(d_momentum).max(d_dc).max(d_dct);
    let pass = worst <= PAIRING_TOL;
    report(
        1,
        "defining pairings",
        pass,
        format!(
            "diamond {d_diamond:.2e} momentum {d_momentum:.2e} dc {d_dc:.2e} dc_T {d_dct:.2e} (tol {PAIRING_TOL:.0e})"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_cocycle_identity() {
    let g = Grid::new(128).unwrap();
    let desc = ActionDescriptor::connection(g);
    let linear =
        ActionDescriptor::new(actions::ActionKind::ConnectionGauge, Algebra::GaugeSo3(g), 1.0, actions::CocycleKind::None)
            .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..COCYCLE_MAPS {
        let a = random_gauge_map(&mut rng, g, COCYCLE_AMPLITUDE);
        let b = random_gauge_map(&mut rng, g, COCYCLE_AMPLITUDE);
        // c(ab) - c(a) - a·c(b)
        let lhs = cocycle_eval(&desc, &a.compose(&b).unwrap()).unwrap();
        let cb = AdvectedState::new(linear.clone(), cocycle_eval(&desc, &b).unwrap()).unwrap();
        let moved = act_group(&a, &cb).unwrap();
        let ca = cocycle_eval(&desc, &a).unwrap();
        let defect: Vec<f64> = (0..lhs.len()).map(|k| lhs[k] - ca[k] - moved.value()[k]).collect();
        worst = worst.max(sup(&defect));
    }
    let pass = worst <= COCYCLE_TOL;
    report(2, "cocycle identity (N=128)", pass, format!("{worst:.2e} vs {COCYCLE_TOL:.0e}"));
    assert!(pass, "cocycle defect {worst:.3e}");
}

fn worst_of(reports: &[CheckReport]) -> (f64, String) {
    reports
        .iter()
        .map(|r| (r.max_defect, format!("{} {}", r.system, r.h_path)))
        .fold((0.0, String::new()), |best, x| if x.0 > best.0 || x.0.is_nan() { x } else { best })
}

#[test]
fn criterion_3_derivative_equivariance() {
    let mut systems: Vec<SystemBundle> = ALL_SYSTEMS[..5].iter().map(|n| system(*n)).collect();
    for kind in [SpinLagrangian::L1, SpinLagrangian::L2, SpinLagrangian::L3] {
        systems.push(build_system(SystemName::SpinLattice, &SystemParams { spin: kind, ..SystemParams::default() }).unwrap());
    }
    let mut reports = Vec::new();
    for sys in &systems {
        let opts = VerifyOptions::for_system(sys);
        reports.extend(run_check(sys, CheckKind::DerivativeEquivariance, &opts).unwrap());
    }
    let (worst, at) = worst_of(&reports);
    let pass = worst <= DERIVATIVE_TOL;
    report(3, "derivative equivariance (8 Lagrangians)", pass, format!("{worst:.2e} vs {DERIVATIVE_TOL:.0e} at {at}"));
    assert!(pass);
}

#[test]
fn criterion_4_residual_equivariance() {
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for name in ALL_SYSTEMS {
        let sys = system(name);
        let tol = if sys.grid().is_some() { RESIDUAL_TOL_LATTICE } else { RESIDUAL_TOL_SO3 };
        let mut opts = VerifyOptions::for_system(&sys);
        opts.curves = 16;
        let reports = run_check(&sys, CheckKind::ResidualEquivariance, &opts).unwrap();
        let (worst, at) = worst_of(&reports);
        lines.push(format!("{name} {worst:.2e}/{tol:.0e} ({} paths)", reports.len()));
        if !(worst <= tol) {
            failures.push(at);
        }
    }
    let pass = failures.is_empty();
    report(4, "residual equivariance (16 curves/path)", pass, lines.join(", "));
    assert!(pass, "over tolerance: {failures:?}");
}

#[test]
fn criterion_5_solution_transport() {
    let cases = [
        (SystemName::Hs1d, 1.0, TRANSPORT_TOL_HS),
        (SystemName::DensityHs1d, 1.0, TRANSPORT_TOL_HS),
        (SystemName::HeavyTop, 10.0, TRANSPORT_TOL_RIGID),
        (SystemName::NematicProjected, 10.0, TRANSPORT_TOL_RIGID),
        (SystemName::SpinLattice, 10.0, TRANSPORT_TOL_RIGID),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, t_end, tol) in cases {
        let sys = system(name);
        let mut opts = VerifyOptions::for_system(&sys);
        opts.t_end = t_end;
        opts.dt = 1e-3;
        let reports = run_check(&sys, CheckKind::SolutionTransport, &opts).unwrap();
        let (worst, _) = worst_of(&reports);
        pass &= worst <= tol;
        lines.push(format!("{name} {worst:.2e}/{tol:.0e}"));
    }
    report(5, "solution transport", pass, lines.join(", "));
    assert!(pass);
}

#[test]
fn criterion_6_reference_match() {
    let mut pass = true;
    let mut lines = Vec::new();
    for name in [SystemName::Hs1d, SystemName::DensityHs1d, SystemName::SpinLattice] {
        let sys = system(name);
        let mut opts = VerifyOptions::for_system(&sys);
        opts.samples = 32;
        let r = run_check(&sys, CheckKind::ReferenceMatch, &opts).unwrap();
        assert_eq!(r[0].samples, 32);
        let worst = r[0].max_defect;
        pass &= worst <= REFERENCE_TOL;
        lines.push(format!("{name} {worst:.2e}"));
    }
    report(6, "generic vs reference equations", pass, format!("{} (tol {REFERENCE_TOL:.0e})", lines.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_7_conservation() {
    let mut pass = true;
    let mut lines = Vec::new();
    for name in ALL_SYSTEMS {
        let sys = system(name);
        let opts = VerifyOptions::for_system(&sys);
        for r in run_check(&sys, CheckKind::Conservation, &opts).unwrap() {
            let quantity = r.name.trim_start_matches("conservation:");
            let tol = match quantity {
                "energy" => ENERGY_TOL,
                "gamma_norm_squared" | "mu_dot_gamma" => CASIMIR_TOL,
                "sphere_norm" => SPHERE_TOL,
                "spin_compatibility" => SPIN_COMPAT_TOL,
                _ => continue,
            };
            pass &= r.max_defect <= tol;
            lines.push(format!("{name}:{quantity} {:.1e}", r.max_defect));
        }
    }
    report(7, "conservation", pass, lines.join(", "));
    assert!(pass);
}

fn sweep_orders(config: &str, param: SweepParam, values: &[f64]) -> Vec<Option<f64>> {
    let dir = tempfile::TempDir::new().unwrap();
    let text = config.replace("OUT", &dir.path().display().to_string());
    let cfg = RunConfig::from_json(&text).unwrap();
    assert_eq!(cmd_sweep(&cfg, param, values).unwrap(), 0);
    let sweep: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    sweep["rows"].as_array().unwrap().iter().map(|r| r["p"].as_f64()).collect()
}

fn orders_within(orders: &[Option<f64>], (target, band): (f64, f64)) -> bool {
    !orders.is_empty() && orders.iter().all(|p| p.is_some_and(|p| (p - target).abs() <= band))
}

fn fmt_orders(orders: &[Option<f64>]) -> String {
    orders.iter().map(|p| p.map_or("null".into(), |p| format!("{p:.3}"))).collect::<Vec<_>>().join(" ")
}

#[test]
fn criterion_8_convergence_orders() {
    let temporal = sweep_orders(
        r#"{"system": "heavy_top", "time": {"T": 10, "dt": 1e-3}, "output": {"dir": "OUT"}}"#,
        SweepParam::Dt,
        &[4e-3, 2e-3, 1e-3, 5e-4],
    );
    // the finest run is the reference and carries no order
    let temporal = &temporal[1..temporal.len() - 1];
    let spatial = sweep_orders(
        r#"{"system": "hs1d", "time": {"T": 1, "dt": 1e-3}, "output": {"dir": "OUT"}}"#,
        SweepParam::N,
        &[32.0, 64.0, 128.0, 256.0],
    );
    let spatial = &spatial[1..spatial.len() - 1];
    let pass = orders_within(temporal, TEMPORAL_ORDER) && orders_within(spatial, SPATIAL_ORDER);
    report(
        8,
        "convergence orders",
        pass,
        format!(
            "dt: {} (4±{}), N: {} (4±{})",
            fmt_orders(temporal),
            TEMPORAL_ORDER.1,
            fmt_orders(spatial),
            SPATIAL_ORDER.1
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_negative_controls() {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut count = 0;
    for name in ALL_SYSTEMS {
        let sys = system(name);
        let opts = VerifyOptions::for_system(&sys);
        if let Some(r) = run_negative_control(&sys, &opts).unwrap() {
            count += 1;
            pass &= !r.pass && r.max_defect > CONTROL_MIN_DEFECT;
            lines.push(format!("{name} {:.2e}", r.max_defect));
        }
    }
    pass &= count == 3;
    report(9, "negative controls fail", pass, format!("{} (need > {CONTROL_MIN_DEFECT:.0e})", lines.join(", ")));
    assert!(pass);
}
