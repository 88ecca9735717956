//! Run configuration: TOML in, validated structs out, canonical JSON for hashing.
//!
//! Every section has defaults, so an empty file is a valid configuration.
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use schelling_core::discrete_pde::{IntegratorConfig, Scheme, StepSize};
use schelling_core::dynamics::SchellingParams;
use schelling_core::hydro::{InitialProfile, NeighborhoodSpec, TestFunction};

/// Environment variable that replaces the master seed of the config file.
pub const SEED_ENV: &str = "SCHELLING_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("{field} = {value} violates constraint: {constraint}")]
    Invalid {
        field: String,
        value: String,
        constraint: String,
    },
}

impl ConfigError {
    fn invalid(field: &str, value: impl std::fmt::Display, constraint: &str) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            value: value.to_string(),
            constraint: constraint.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; replica `r` draws from ChaCha8 stream `r`.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub lattice: LatticeConfig,
    pub initial: InitialConfig,
    pub simulate: SimulateConfig,
    pub discrete_pde: DiscretePdeConfig,
    pub limit_pde: LimitPdeConfig,
    pub compare: CompareConfig,
    pub phase: PhaseConfig,
    pub nonuniq: NonuniqConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            output_dir: PathBuf::from("schelling-out"),
            model: ModelConfig::default(),
            lattice: LatticeConfig::default(),
            initial: InitialConfig::default(),
            simulate: SimulateConfig::default(),
            discrete_pde: DiscretePdeConfig::default(),
            limit_pde: LimitPdeConfig::default(),
            compare: CompareConfig::default(),
            phase: PhaseConfig::default(),
            nonuniq: NonuniqConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub threshold: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            threshold: 0.3,
            beta: 0.2,
            alpha: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn params(&self) -> SchellingParams {
        SchellingParams {
            threshold: self.threshold,
            beta: self.beta,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NeighborhoodConfig {
    Box { radius: usize, one_sided: bool },
    Offsets { offsets: Vec<Vec<i64>> },
    GrowingK { c: f64 },
}

impl NeighborhoodConfig {
    pub fn spec(&self) -> NeighborhoodSpec {
        match self {
            NeighborhoodConfig::Box { radius, one_sided } => NeighborhoodSpec::Box {
                radius: *radius,
                one_sided: *one_sided,
            },
            NeighborhoodConfig::Offsets { offsets } => NeighborhoodSpec::Offsets {
                offsets: offsets.clone(),
            },
            NeighborhoodConfig::GrowingK { c } => NeighborhoodSpec::GrowingK { c: *c },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    pub dim: usize,
    pub side: usize,
    pub neighborhood: NeighborhoodConfig,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            side: 64,
            neighborhood: NeighborhoodConfig::Box {
                radius: 1,
                one_sided: false,
            },
        }
    }
}

/// Occupation profile `u0` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Constant {
        value: f64,
    },
    Sine {
        mean: f64,
        amplitude: f64,
        frequency: u32,
    },
    /// Whitespace-separated values in row-major order; `#` starts a comment line.
    Samples {
        path: PathBuf,
    },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Sine {
            mean: 0.5,
            amplitude: 0.2,
            frequency: 1,
        }
    }
}

impl InitialConfig {
    /// The analytic profile, if this is not a sample file.
    pub fn profile(&self) -> Option<InitialProfile> {
        match *self {
            InitialConfig::Constant { value } => Some(InitialProfile::Constant { value }),
            InitialConfig::Sine {
                mean,
                amplitude,
                frequency,
            } => Some(InitialProfile::Sine {
                mean,
                amplitude,
                frequency,
            }),
            InitialConfig::Samples { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub t_end: f64,
    pub obs_times: Vec<f64>,
    pub replicas: usize,
    pub effective_exchanges: bool,
    /// Also write every configuration in the lattice text format.
    pub snapshots: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            t_end: 0.5,
            obs_times: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            replicas: 4,
            effective_exchanges: false,
            snapshots: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFormat {
    #[default]
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretePdeConfig {
    pub scheme: Scheme,
    /// Fixed step; the scheme's automatic step when absent.
    pub dt: Option<f64>,
    pub obs_times: Vec<f64>,
    pub format: FieldFormat,
}

impl Default for DiscretePdeConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::ExponentialImex,
            dt: None,
            obs_times: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            format: FieldFormat::Csv,
        }
    }
}

impl DiscretePdeConfig {
    pub fn integrator(&self, obs_times: Vec<f64>) -> IntegratorConfig {
        IntegratorConfig {
            scheme: self.scheme,
            dt: self.dt.map_or(StepSize::Auto, StepSize::Fixed),
            obs_times,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitPdeConfig {
    /// Grid points per axis.
    pub m: usize,
    pub tau: f64,
    pub steps: usize,
    /// Neighborhood sizes; more than one triggers the Cauchy-in-K study.
    pub ks: Vec<usize>,
    pub tol: f64,
    pub max_iter: usize,
    /// Write every `stride`-th time of the field series.
    pub stride: usize,
}

impl Default for LimitPdeConfig {
    fn default() -> Self {
        Self {
            m: 128,
            tau: 0.5,
            steps: 500,
            ks: vec![100],
            tol: 1e-10,
            max_iter: 50,
            stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub times: Vec<f64>,
    pub test_functions: Vec<TestFunction>,
    pub delta: f64,
    /// Continuum grid; no continuum comparison when zero.
    pub limit_m: usize,
    pub limit_steps: usize,
    pub c0_bound: f64,
    pub diameter_ratio_bound: f64,
    pub enforce_assumptions: bool,
    pub effective_exchanges: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            sizes: vec![64, 128, 256],
            replicas: 20,
            times: vec![0.5],
            test_functions: vec![TestFunction::One, TestFunction::Cos, TestFunction::Sin],
            delta: 0.05,
            limit_m: 0,
            limit_steps: 200,
            c0_bound: 10.0,
            diameter_ratio_bound: 1.0,
            enforce_assumptions: true,
            effective_exchanges: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    /// Betas of the sweep; the model beta when empty.
    pub betas: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    /// Thresholds at which the potential is tabulated.
    pub profile_thresholds: Vec<f64>,
    pub profile_points: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            betas: Vec::new(),
            t_min: 0.0,
            t_max: 0.5,
            t_points: 101,
            profile_thresholds: vec![0.3, 0.4, 0.45],
            profile_points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonuniqConfig {
    pub rho: f64,
    pub tau: f64,
    /// Time steps on `[0, tau]`.
    pub steps: usize,
    pub dim: usize,
    pub m: usize,
}

impl Default for NonuniqConfig {
    fn default() -> Self {
        Self {
            rho: 0.1,
            tau: 1.0,
            steps: 10_000,
            dim: 1,
            m: 8,
        }
    }
}

/// Command-line replacements for single fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub dim: Option<usize>,
    pub side: Option<usize>,
    pub replicas: Option<usize>,
    pub t_end: Option<f64>,
    pub rho: Option<f64>,
    pub tau: Option<f64>,
    pub m: Option<usize>,
    pub ks: Option<Vec<usize>>,
    pub sizes: Option<Vec<usize>>,
    pub snapshots: Option<bool>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    /// Precedence, lowest first: file, `SCHELLING_SEED`, flags.
    pub fn apply(&mut self, env_seed: Option<&str>, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = env_seed {
            self.seed = s.trim().parse().map_err(|_| {
                ConfigError::invalid(SEED_ENV, s, "must be an unsigned 64-bit integer")
            })?;
        }
        macro_rules! set {
            ($src:ident => $($dst:tt)+) => {
                if let Some(v) = &o.$src {
                    self.$($dst)+ = v.clone();
                }
            };
        }
        set!(seed => seed);
        set!(output_dir => output_dir);
        set!(threshold => model.threshold);
        set!(beta => model.beta);
        set!(alpha => model.alpha);
        set!(dim => lattice.dim);
        set!(side => lattice.side);
        set!(replicas => simulate.replicas);
        set!(replicas => compare.replicas);
        set!(t_end => simulate.t_end);
        set!(rho => nonuniq.rho);
        set!(tau => limit_pde.tau);
        set!(m => limit_pde.m);
        set!(ks => limit_pde.ks);
        set!(sizes => compare.sizes);
        set!(snapshots => simulate.snapshots);
        Ok(())
    }

    /// Check every numeric field against the constraints of the module it feeds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        unit("model.threshold", m.threshold)?;
        nonneg("model.beta", m.beta)?;
        nonneg("model.alpha", m.alpha)?;

        let l = &self.lattice;
        if !(1..=2).contains(&l.dim) {
            return Err(ConfigError::invalid("lattice.dim", l.dim, "must be 1 or 2"));
        }
        at_least("lattice.side", l.side, 2)?;
        match &l.neighborhood {
            NeighborhoodConfig::Box { radius, .. } => at_least("lattice.neighborhood.radius", *radius, 1)?,
            NeighborhoodConfig::Offsets { offsets } => {
                if offsets.is_empty() {
                    return Err(ConfigError::invalid(
                        "lattice.neighborhood.offsets",
                        "[]",
                        "must list at least one offset",
                    ));
                }
                if offsets.iter().any(|o| o.len() != l.dim) {
                    return Err(ConfigError::invalid(
                        "lattice.neighborhood.offsets",
                        format!("{offsets:?}"),
                        "every offset needs lattice.dim coordinates",
                    ));
                }
            }
            NeighborhoodConfig::GrowingK { c } => {
                positive("lattice.neighborhood.c", *c)?;
                if l.dim != 1 {
                    return Err(ConfigError::invalid("lattice.dim", l.dim, "growing-K mode needs dim = 1"));
                }
            }
        }

        match &self.initial {
            InitialConfig::Constant { value } => unit("initial.value", *value)?,
            InitialConfig::Sine {
                mean, amplitude, ..
            } => {
                unit("initial.mean", *mean)?;
                nonneg("initial.amplitude", *amplitude)?;
                if mean - amplitude < 0.0 || mean + amplitude > 1.0 {
                    return Err(ConfigError::invalid(
                        "initial.amplitude",
                        amplitude,
                        "mean +- amplitude must stay in [0, 1]",
                    ));
                }
            }
            InitialConfig::Samples { .. } => {}
        }

        let s = &self.simulate;
        nonneg("simulate.t_end", s.t_end)?;
        times("simulate.obs_times", &s.obs_times, Some(s.t_end))?;
        at_least("simulate.replicas", s.replicas, 1)?;

        let d = &self.discrete_pde;
        if let Some(dt) = d.dt {
            positive("discrete_pde.dt", dt)?;
        }
        times("discrete_pde.obs_times", &d.obs_times, None)?;

        let lp = &self.limit_pde;
        at_least("limit_pde.m", lp.m, 2)?;
        positive("limit_pde.tau", lp.tau)?;
        at_least("limit_pde.steps", lp.steps, 1)?;
        if lp.ks.is_empty() || lp.ks.contains(&0) || lp.ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::invalid(
                "limit_pde.ks",
                format!("{:?}", lp.ks),
                "must be a nonempty strictly increasing list of positive sizes",
            ));
        }
        positive("limit_pde.tol", lp.tol)?;
        at_least("limit_pde.max_iter", lp.max_iter, 1)?;
        at_least("limit_pde.stride", lp.stride, 1)?;

        let c = &self.compare;
        if c.sizes.is_empty() || c.sizes.iter().any(|&n| n < 2) {
            return Err(ConfigError::invalid(
                "compare.sizes",
                format!("{:?}", c.sizes),
                "must list at least one side >= 2",
            ));
        }
        at_least("compare.replicas", c.replicas, 1)?;
        times("compare.times", &c.times, None)?;
        if c.test_functions.is_empty() {
            return Err(ConfigError::invalid("compare.test_functions", "[]", "must not be empty"));
        }
        positive("compare.delta", c.delta)?;
        if c.limit_m > 0 {
            if let Some(n) = c.sizes.iter().find(|&&n| !c.limit_m.is_multiple_of(n)) {
                return Err(ConfigError::invalid(
                    "compare.limit_m",
                    c.limit_m,
                    &format!("must be a multiple of every size (fails for {n})"),
                ));
            }
            at_least("compare.limit_steps", c.limit_steps, 1)?;
        }
        positive("compare.c0_bound", c.c0_bound)?;
        positive("compare.diameter_ratio_bound", c.diameter_ratio_bound)?;

        let p = &self.phase;
        for &b in &p.betas {
            positive("phase.betas", b)?;
        }
        if p.betas.is_empty() {
            positive("model.beta", m.beta)?;
        }
        unit("phase.t_min", p.t_min)?;
        unit("phase.t_max", p.t_max)?;
        if p.t_min > p.t_max {
            return Err(ConfigError::invalid("phase.t_max", p.t_max, "must be >= phase.t_min"));
        }
        at_least("phase.t_points", p.t_points, 2)?;
        for &t in &p.profile_thresholds {
            unit("phase.profile_thresholds", t)?;
        }
        at_least("phase.profile_points", p.profile_points, 2)?;

        let n = &self.nonuniq;
        if !(n.rho >= 0.0 && n.rho <= 0.5) {
            return Err(ConfigError::invalid("nonuniq.rho", n.rho, "must lie in [0, 1/2]"));
        }
        positive("nonuniq.tau", n.tau)?;
        at_least("nonuniq.steps", n.steps, 1)?;
        if !(1..=2).contains(&n.dim) {
            return Err(ConfigError::invalid("nonuniq.dim", n.dim, "must be 1 or 2"));
        }
        at_least("nonuniq.m", n.m, 2)?;
        Ok(())
    }

    /// Compact JSON in declaration order, without the output directory.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        serde_json::to_string(&c).expect("config always serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_json`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, v, "must be finite"))
    }
}

fn unit(field: &str, v: f64) -> Result<(), ConfigError> {
    finite(field, v)?;
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, v, "must lie in [0, 1]"))
    }
}

fn nonneg(field: &str, v: f64) -> Result<(), ConfigError> {
    finite(field, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, v, "must be >= 0"))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, v, "must be > 0"))
    }
}

fn at_least(field: &str, v: usize, lo: usize) -> Result<(), ConfigError> {
    if v >= lo {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, v, &format!("must be >= {lo}")))
    }
}

fn times(field: &str, ts: &[f64], end: Option<f64>) -> Result<(), ConfigError> {
    let ok = !ts.is_empty()
        && ts.iter().all(|t| t.is_finite() && *t >= 0.0 && end.is_none_or(|e| *t <= e))
        && ts.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        let constraint = match end {
            Some(e) => format!("must be nonempty, strictly increasing and within [0, {e}]"),
            None => "must be nonempty, strictly increasing and nonnegative".into(),
        };
        Err(ConfigError::invalid(field, format!("{ts:?}"), &constraint))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn threshold_outside_unit_interval_is_named() {
        let c = RunConfig::from_toml("[model]\nthreshold = 1.5\n").unwrap();
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("model.threshold") && err.contains("[0, 1]"), "{err}");
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(RunConfig::from_toml("[model]\ntreshold = 0.3\n").is_err());
        assert!(RunConfig::from_toml("sed = 1\n").is_err());
        assert!(RunConfig::from_toml("[lattice.neighborhood]\nkind = \"box\"\nradius = 1\none_sided = false\nextra = 2\n").is_err());
    }

    #[test]
    fn precedence_file_env_flag() {
        let mut c = RunConfig::default();
        c.apply(Some("7"), &Overrides::default()).unwrap();
        assert_eq!(c.seed, 7);
        c.apply(Some("7"), &Overrides { seed: Some(9), ..Default::default() }).unwrap();
        assert_eq!(c.seed, 9);
        assert!(c.apply(Some("x"), &Overrides::default()).is_err());
    }

    #[test]
    fn hash_ignores_the_output_directory() {
        let a = RunConfig::default();
        let b = RunConfig {
            output_dir: "elsewhere".into(),
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig { seed: 1, ..RunConfig::default() };
        assert_ne!(a.hash(), c.hash());
    }
}
