//! Command implementations behind the `epred` binary: simulation runs,
//! verification suites and convergence sweeps, each driven by a JSON config.

pub mod config;
pub mod output;

use std::fs;
use std::path::Path;
use std::time::Instant;

use epred::convergence::{sweep, SweepParam, SweepRow};
use epred::dynamics::integrate;
use epred::verification::{self, applicable, run_check, run_negative_control, CheckKind, VerifyOptions};
use epred::{CheckReport, EpError};
use serde::Serialize;

pub use config::RunConfig;
use config::{config_err, TrajectoryFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("malformed file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

/// Library failures during a run: bad inputs are config errors, everything
/// raised while stepping is a numerical abort.
fn numerical(e: EpError) -> CliError {
    match e {
        EpError::InvalidParameter(_) | EpError::NotIntegrable(_) | EpError::Shape(_) | EpError::Incompatible(_) => {
            config_err(e)
        }
        other => CliError::Numerical(other.to_string()),
    }
}

/// Rayon pool capped by `EPRED_THREADS`, when set.
fn thread_pool() -> Result<Option<rayon::ThreadPool>, CliError> {
    let Ok(raw) = std::env::var("EPRED_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("EPRED_THREADS must be a positive integer, got `{raw}`")))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Some(pool))
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    Ok(match thread_pool()? {
        Some(pool) => pool.install(f),
        None => f(),
    })
}

fn write_json(dir: &Path, file: &str, value: &impl Serialize) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Parse(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join(file), text)?;
    Ok(())
}

#[derive(Serialize)]
struct ConservedDrift {
    name: String,
    max_drift: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct FinalState<'a> {
    t: f64,
    mu: &'a [f64],
    xi: &'a [f64],
    a: &'a [f64],
}

#[derive(Serialize)]
struct RunSummary<'a> {
    system: String,
    #[serde(rename = "T")]
    t_end: f64,
    dt: f64,
    steps: usize,
    trajectory: String,
    conserved: Vec<ConservedDrift>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_sphere_defect: Option<f64>,
    final_state: FinalState<'a>,
    wall_time_s: f64,
}

/// Integrates the configured system and writes the trajectory and a summary.
pub fn cmd_run(config: &RunConfig) -> Result<i32, CliError> {
    let time = config.time()?;
    let system = config.system()?;
    let (xi, a) = config.init.resolve(&system)?;
    let start = Instant::now();
    let traj = integrate(&system, &xi, &a, time.t_end, time.dt).map_err(numerical)?;
    let conserved = verification::conservation(&system, &traj).map_err(numerical)?;
    let wall = start.elapsed().as_secs_f64();

    let (file, body) = match config.output.trajectory_format {
        TrajectoryFormat::Csv => ("trajectory.csv", output::to_csv(&system, &traj)),
        TrajectoryFormat::Json => ("trajectory.json", output::to_json(&system, &traj)),
    };
    let last = traj.last();
    let summary = RunSummary {
        system: system.name.to_string(),
        t_end: time.t_end,
        dt: time.dt,
        steps: traj.len() - 1,
        trajectory: file.into(),
        conserved: conserved
            .iter()
            .map(|r| ConservedDrift {
                name: r.name.trim_start_matches("conservation:").into(),
                max_drift: r.max_defect,
                tolerance: r.tolerance,
                pass: r.pass,
            })
            .collect(),
        max_sphere_defect: system
            .conserved
            .contains(&epred::Conserved::SphereNorm)
            .then_some(traj.max_sphere_defect),
        final_state: FinalState {
            t: last.t,
            mu: last.mu.coords(),
            xi: traj.xi.last().unwrap().coords(),
            a: last.a.value(),
        },
        wall_time_s: wall,
    };
    fs::create_dir_all(&config.output.dir)?;
    fs::write(config.output.dir.join(file), body)?;
    write_json(&config.output.dir, "summary.json", &summary)?;
    for c in &summary.conserved {
        println!("{:<22} drift {:.3e}", c.name, c.max_drift);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyReport {
    system: String,
    seed: u64,
    samples: usize,
    curves: usize,
    #[serde(rename = "T")]
    t_end: f64,
    dt: f64,
    checks: Vec<CheckReport>,
    all_pass: bool,
}

fn verify_options(config: &RunConfig, system: &epred::SystemBundle) -> Result<VerifyOptions, CliError> {
    let mut opts = VerifyOptions::for_system(system);
    opts.seed = config.seed;
    if let Some(time) = config.time {
        time.validate()?;
        opts.t_end = time.t_end;
        opts.dt = time.dt;
    }
    if !matches!(config.init, config::InitConfig::Preset(config::InitPreset::Default)) {
        opts.init = Some(config.init.resolve(system)?);
    }
    if let Some(v) = &config.verify {
        if let Some(s) = v.samples {
            opts.samples = s.max(1);
        }
        if let Some(c) = v.curves {
            opts.curves = c.max(1);
        }
        if let Some(h) = &v.h_path {
            opts.h_paths = Some(vec![h.build(system)?]);
        }
    }
    Ok(opts)
}

/// Runs the configured checks; exit 0 iff every check behaves as designed.
pub fn cmd_verify(config: &RunConfig) -> Result<i32, CliError> {
    let verify = config.verify.as_ref().ok_or_else(|| CliError::Config("missing `verify` section".into()))?;
    let system = config.system()?;
    let opts = verify_options(config, &system)?;
    let kinds: Vec<CheckKind> = if verify.checks.is_empty() {
        CheckKind::ALL.into_iter().filter(|k| applicable(&system, *k)).collect()
    } else {
        for k in &verify.checks {
            if !applicable(&system, *k) {
                return Err(CliError::Config(format!("check {k:?} does not apply to {}", system.name)));
            }
        }
        verify.checks.clone()
    };
    let mut checks = Vec::new();
    with_pool(|| -> Result<(), CliError> {
        for k in kinds {
            checks.extend(run_check(&system, k, &opts).map_err(numerical)?);
        }
        if verify.negative_control {
            checks.extend(run_negative_control(&system, &opts).map_err(numerical)?);
        }
        Ok(())
    })??;
    let all_pass = checks.iter().all(CheckReport::as_expected);
    for c in &checks {
        let verdict = match (c.pass, c.expected_fail) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        println!("{:<24} {:<48} {:.3e} <= {:.1e}  {verdict}", c.name, c.h_path, c.max_defect, c.tolerance);
    }
    let report = VerifyReport {
        system: system.name.to_string(),
        seed: opts.seed,
        samples: opts.samples,
        curves: opts.curves,
        t_end: opts.t_end,
        dt: opts.dt,
        checks,
        all_pass,
    };
    write_json(&config.output.dir, "report.json", &report)?;
    Ok(if all_pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

#[derive(Serialize)]
struct SweepReport {
    system: String,
    param: SweepParam,
    #[serde(rename = "T")]
    t_end: f64,
    dt: f64,
    rows: Vec<SweepRow>,
}

/// Repeats the run for each value of `param` and reports observed orders.
pub fn cmd_sweep(config: &RunConfig, param: SweepParam, values: &[f64]) -> Result<i32, CliError> {
    let time = config.time()?;
    let system = config.system()?;
    if param == SweepParam::N {
        if system.grid().is_none() {
            return Err(CliError::Config(format!("{} has no grid to refine", system.name)));
        }
        if config.init.is_inline() {
            return Err(CliError::Config("grid sweeps need a named init preset".into()));
        }
    }
    if param == SweepParam::Dt && values.iter().any(|v| *v >= time.t_end) {
        return Err(CliError::Config("every swept dt must be smaller than T".into()));
    }
    config.init.resolve(&system)?;
    let params = config.params.resolve();
    let init = &config.init;
    let rows = with_pool(|| {
        sweep(
            config.system,
            &params,
            |s| init.resolve(s).map_err(|e| EpError::InvalidParameter(e.to_string())),
            time.t_end,
            time.dt,
            param,
            values,
        )
    })?
    .map_err(numerical)?;
    for r in &rows {
        let p = r.p.map_or("null".to_string(), |p| format!("{p:.3}"));
        println!("{:<10} error {:.3e}  p {p}", r.value, r.error);
    }
    let report = SweepReport { system: system.name.to_string(), param, t_end: time.t_end, dt: time.dt, rows };
    write_json(&config.output.dir, "sweep.json", &report)?;
    Ok(EXIT_OK)
}

/// Parses a comma-separated list of sweep values.
pub fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Config(format!("bad sweep value `{s}`: {e}"))))
        .collect()
}

/// Runs a command, reporting errors on stderr and mapping them to exit codes.
pub fn exit_code(result: Result<i32, CliError>) -> i32 {
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("epred: {e}");
            e.exit_code()
        }
    }
}
