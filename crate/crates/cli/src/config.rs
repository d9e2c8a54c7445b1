//! JSON run configuration. Parsing is strict: unknown keys are errors.

use std::path::{Path, PathBuf};

use epred::algebra::{rodrigues, GroupElem};
use epred::verification::CheckKind;
use epred::{AdvectedState, AlgElem, HPath, Schedule, SpinLagrangian, SystemBundle, SystemName, SystemParams};
use nalgebra::Vector3;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemName,
    #[serde(default)]
    pub params: ParamsConfig,
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub init: InitConfig,
    /// Seed for randomized checks.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub verify: Option<VerifyConfig>,
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub inertia: Option<[f64; 3]>,
    pub lambda: Option<[f64; 3]>,
    pub j: Option<f64>,
    pub nematic_lambda: Option<f64>,
    pub k: Option<[f64; 3]>,
    pub n: Option<usize>,
    pub rho_min: Option<f64>,
    pub spin: Option<SpinLagrangian>,
}

impl ParamsConfig {
    pub fn resolve(&self) -> SystemParams {
        let d = SystemParams::default();
        SystemParams {
            inertia: self.inertia.unwrap_or(d.inertia),
            lambda: self.lambda.unwrap_or(d.lambda),
            j: self.j.unwrap_or(d.j),
            nematic_lambda: self.nematic_lambda.unwrap_or(d.nematic_lambda),
            k: self.k.unwrap_or(d.k),
            n: self.n.unwrap_or(d.n),
            rho_min: self.rho_min.unwrap_or(d.rho_min),
            spin: self.spin.unwrap_or(d.spin),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
}

impl TimeConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(CliError::Config(format!("time.T must be positive, got {}", self.t_end)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(CliError::Config(format!("time.dt must be positive, got {}", self.dt)));
        }
        if self.dt >= self.t_end {
            return Err(CliError::Config(format!("time.dt = {} must be smaller than time.T = {}", self.dt, self.t_end)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPreset {
    #[default]
    Default,
    /// ξ = 0 with the default parameter.
    Zero,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineInit {
    pub xi: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum InitConfig {
    Preset(InitPreset),
    Inline(InlineInit),
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig::Preset(InitPreset::Default)
    }
}

impl InitConfig {
    pub fn resolve(&self, system: &SystemBundle) -> Result<(AlgElem, AdvectedState), CliError> {
        let (xi, a) = match self {
            InitConfig::Preset(InitPreset::Default) => system.default_init(),
            InitConfig::Preset(InitPreset::Zero) => system.zero_init(),
            InitConfig::Inline(InlineInit { xi, a }) => {
                (system.xi(xi.clone()).map_err(config_err)?, system.parameter(a.clone()).map_err(config_err)?)
            }
        };
        system.check_parameter(&a).map_err(config_err)?;
        Ok((xi, a))
    }

    pub fn is_inline(&self) -> bool {
        matches!(self, InitConfig::Inline(_))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Checks to run; every applicable check when empty.
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    /// Replaces the system's H-path catalog.
    pub h_path: Option<HPathConfig>,
    /// Also run the system's designed broken configuration.
    #[serde(default)]
    pub negative_control: bool,
    pub samples: Option<usize>,
    pub curves: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum HPathConfig {
    RotationS1 { schedule: Schedule },
    So3Path { axis: [f64; 3], schedule: Schedule },
    ConstGauge { axis: [f64; 3], schedule: Schedule },
    FixedSo3 { axis: [f64; 3], angle: f64 },
}

fn axis(v: [f64; 3]) -> Result<Vector3<f64>, CliError> {
    let a = Vector3::from(v);
    if !(a.norm() > 0.0 && a.iter().all(|x| x.is_finite())) {
        return Err(CliError::Config("h_path axis must be a nonzero finite vector".into()));
    }
    Ok(a)
}

impl HPathConfig {
    pub fn build(&self, system: &SystemBundle) -> Result<HPath, CliError> {
        let needs_grid = || {
            system.grid().ok_or_else(|| CliError::Config(format!("h_path family needs a lattice system, got {}", system.name)))
        };
        let path = match *self {
            HPathConfig::RotationS1 { schedule } => {
                if !matches!(system.name, SystemName::Hs1d | SystemName::DensityHs1d) {
                    return Err(CliError::Config("rotation_s1 paths act on circle vector fields only".into()));
                }
                HPath::rotation_s1(needs_grid()?, schedule)
            }
            HPathConfig::So3Path { axis: v, schedule } => {
                if system.grid().is_some() {
                    return Err(CliError::Config("so3_path acts on rigid-body systems only".into()));
                }
                HPath::so3_path(axis(v)?, schedule)
            }
            HPathConfig::ConstGauge { axis: v, schedule } => {
                if system.name != SystemName::SpinLattice {
                    return Err(CliError::Config("const_gauge paths act on the spin lattice only".into()));
                }
                HPath::const_gauge(needs_grid()?, axis(v)?, schedule)
            }
            HPathConfig::FixedSo3 { axis: v, angle } => {
                if system.grid().is_some() {
                    return Err(CliError::Config("fixed_so3 acts on rigid-body systems only".into()));
                }
                let r = rodrigues(&(axis(v)?.normalize() * angle));
                HPath::fixed(GroupElem::so3(r).map_err(config_err)?)
            }
        };
        Ok(path)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default)]
    pub trajectory_format: TrajectoryFormat,
    #[serde(default)]
    pub report: ReportFormat,
}

pub(crate) fn config_err(e: epred::EpError) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn time(&self) -> Result<TimeConfig, CliError> {
        let time = self.time.ok_or_else(|| CliError::Config("missing `time` section".into()))?;
        time.validate()?;
        Ok(time)
    }

    pub fn system(&self) -> Result<SystemBundle, CliError> {
        epred::build_system(self.system, &self.params.resolve()).map_err(config_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"system": "heavy_top", "time": {"T": 1.0, "dt": 0.01}, "output": {"dir": "out"}}"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.system, SystemName::HeavyTop);
        assert_eq!(c.seed, 42);
        assert!(matches!(c.init, InitConfig::Preset(InitPreset::Default)));
        assert_eq!(c.output.trajectory_format, TrajectoryFormat::Csv);
        assert_eq!(c.params.resolve(), SystemParams::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"seed\"", "\"x\"").replace("{\"system\"", "{\"colour\": 1, \"system\"");
        assert!(RunConfig::from_json(&bad).is_err());
        let bad = MINIMAL.replace("\"dt\": 0.01", "\"dt\": 0.01, \"steps\": 3");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn time_must_have_dt_below_t() {
        let missing = MINIMAL.replace(", \"dt\": 0.01", "");
        assert!(RunConfig::from_json(&missing).is_err());
        let c = RunConfig::from_json(&MINIMAL.replace("0.01", "2.0")).unwrap();
        assert!(c.time().is_err());
    }

    #[test]
    fn inline_init_and_paths_parse() {
        let text = r#"{
            "system": "nematic",
            "params": {"k": [0, 0, 1], "spin": "l3"},
            "init": {"xi": [0.1, 0.2, 0.3], "a": [0, 0, 1]},
            "verify": {"checks": ["lagrangian_invariance"],
                       "h_path": {"family": "so3_path", "axis": [1, 0, 0], "schedule": {"kind": "constant", "theta": 0.7}}},
            "output": {"dir": "out", "trajectory_format": "json"}
        }"#;
        let c = RunConfig::from_json(text).unwrap();
        let sys = c.system().unwrap();
        let (xi, a) = c.init.resolve(&sys).unwrap();
        assert_eq!(xi.coords(), &[0.1, 0.2, 0.3]);
        assert_eq!(a.value(), &[0.0, 0.0, 1.0]);
        let h = c.verify.unwrap().h_path.unwrap().build(&sys).unwrap();
        assert!(h.label().starts_with("so3_path"));
    }

    #[test]
    fn paths_must_match_the_system() {
        let sys = epred::build_system(SystemName::HeavyTop, &SystemParams::default()).unwrap();
        let p = HPathConfig::RotationS1 { schedule: Schedule::Constant { theta: 0.1 } };
        assert!(p.build(&sys).is_err());
    }
}
