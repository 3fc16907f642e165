//! Run configuration: one TOML file carries the full parameter set of a run.
//!
//! Unknown keys are rejected at every level, and every number is checked for
//! finiteness before anything is computed.

use std::fmt;
use std::path::{Path, PathBuf};

use nls_core::dynamics::EvolveOptions;
use nls_core::groundstate::SolveOptions;
use nls_core::model::{rational_from_f64, HypothesisConstants, Kernel, ModelSpec, Nonlinearity, Potential};
use nls_core::thresholds::{SearchOptions, ThresholdKind};
use num_rational::Rational64;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Groundstate,
    Threshold,
    Classify,
    Dichotomy,
    Sweep,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Simulate => "simulate",
            Command::Groundstate => "groundstate",
            Command::Threshold => "threshold",
            Command::Classify => "classify",
            Command::Dichotomy => "dichotomy",
            Command::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

/// An exponent written either as a decimal (`2.5`) or as a fraction string (`"5/2"`).
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Exponent {
    Number(f64),
    Text(String),
}

impl Exponent {
    pub fn to_rational(&self) -> Result<Rational64, ConfigError> {
        match self {
            Exponent::Number(x) => rational_from_f64(*x, 1000).or_else(|e| invalid(e.to_string())),
            Exponent::Text(s) => {
                let parsed = match s.split_once('/') {
                    Some((n, d)) => n.trim().parse::<i64>().ok().zip(d.trim().parse::<i64>().ok()),
                    None => s.trim().parse::<i64>().ok().map(|n| (n, 1)),
                };
                match parsed {
                    Some((_, 0)) | None => invalid(format!("exponent {s:?} is not an integer or fraction")),
                    Some((n, d)) => Ok(Rational64::new(n, d)),
                }
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Harmonic { a: f64 },
    Saturating { a: f64 },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    Zero,
    Power { b: f64, p: Exponent },
    TwoPower { mu: f64, p1: Exponent, nu: f64, p2: Exponent },
    LogPower { b: f64, p: Exponent },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Zero,
    InversePower { a: f64, k: Exponent },
    Gaussian { a: f64 },
    Saturating { a: f64 },
    Bridged { a: f64, inner: Exponent, k: Exponent },
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub l: Option<Exponent>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dims: usize,
    #[serde(default = "zero_potential")]
    pub potential: PotentialConfig,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default = "zero_kernel")]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub constants: ConstantsConfig,
}

fn zero_potential() -> PotentialConfig {
    PotentialConfig::Zero
}

fn zero_kernel() -> KernelConfig {
    KernelConfig::Zero
}

impl ModelConfig {
    pub fn to_model(&self) -> Result<ModelSpec, ConfigError> {
        let potential = match self.potential {
            PotentialConfig::Zero => Potential::Zero,
            PotentialConfig::Harmonic { a } => Potential::Harmonic { a },
            PotentialConfig::Saturating { a } => Potential::Saturating { a },
        };
        let local = match &self.nonlinearity {
            NonlinearityConfig::Zero => Nonlinearity::Zero,
            NonlinearityConfig::Power { b, p } => Nonlinearity::Power { b: *b, p: p.to_rational()? },
            NonlinearityConfig::TwoPower { mu, p1, nu, p2 } => {
                Nonlinearity::TwoPower { mu: *mu, p1: p1.to_rational()?, nu: *nu, p2: p2.to_rational()? }
            }
            NonlinearityConfig::LogPower { b, p } => Nonlinearity::LogPower { b: *b, p: p.to_rational()? },
        };
        let kernel = match &self.kernel {
            KernelConfig::Zero => Kernel::Zero,
            KernelConfig::InversePower { a, k } => Kernel::InversePower { a: *a, k: k.to_rational()? },
            KernelConfig::Gaussian { a } => Kernel::Gaussian { a: *a },
            KernelConfig::Saturating { a } => Kernel::Saturating { a: *a },
            KernelConfig::Bridged { a, inner, k } => {
                Kernel::Bridged { a: *a, inner: inner.to_rational()?, k: k.to_rational()? }
            }
        };
        let c = &self.constants;
        let constants = HypothesisConstants {
            l: c.l.as_ref().map(Exponent::to_rational).transpose()?,
            c1: c.c1,
            c2: c.c2,
            c3: c.c3,
            c: c.c,
        };
        ModelSpec::new(self.dims, potential, local, kernel)
            .map(|m| m.with_constants(constants))
            .or_else(|e| invalid(e.to_string()))
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Box side length.
    pub extent: f64,
    /// Points per axis.
    pub points: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `amplitude exp(-|x|^2 / (2 width^2)) exp(-i sigma |x|^2 / 2)`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        sigma: f64,
    },
    /// The computed stationary state at `omega`, scaled and phased.
    GroundState {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        sigma: f64,
    },
    /// A field read from an `.nlsf` snapshot (a saved soliton or an earlier run).
    Snapshot {
        path: PathBuf,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        sigma: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub dt_min: Option<f64>,
    pub record_every: Option<f64>,
    pub adapt: Option<bool>,
    pub tolerance: Option<f64>,
    pub blowup_gradient_factor: Option<f64>,
    pub blowup_sigma_cap: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl EvolveConfig {
    pub fn to_options(&self) -> EvolveOptions {
        let d = EvolveOptions::default();
        EvolveOptions {
            dt_init: self.dt.unwrap_or(d.dt_init),
            dt_min: self.dt_min.unwrap_or(d.dt_min),
            t_final: self.t_final.unwrap_or(d.t_final),
            record_every: self.record_every.unwrap_or(d.record_every),
            blowup_gradient_factor: self.blowup_gradient_factor.unwrap_or(d.blowup_gradient_factor),
            blowup_sigma_cap: self.blowup_sigma_cap.unwrap_or(d.blowup_sigma_cap),
            adapt: self.adapt.unwrap_or(d.adapt),
            adapt_tolerance: self.tolerance.unwrap_or(d.adapt_tolerance),
            snapshot_times: self.snapshot_times.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub widths: Option<Vec<f64>>,
    pub amplitudes: Option<Vec<f64>>,
    pub perturbations: Option<usize>,
    pub refine_steps: Option<usize>,
    pub refine_top: Option<usize>,
    pub use_ground_state: Option<bool>,
    pub enforce_hypotheses: Option<bool>,
    pub solver_tolerance: Option<f64>,
    pub solver_max_iter: Option<usize>,
}

impl SearchConfig {
    pub fn to_options(&self, seed: u64) -> SearchOptions {
        let d = SearchOptions::default();
        let s = SolveOptions::default();
        SearchOptions {
            widths: self.widths.clone().unwrap_or(d.widths),
            amplitudes: self.amplitudes.clone().unwrap_or(d.amplitudes),
            perturbations: self.perturbations.unwrap_or(d.perturbations),
            refine_steps: self.refine_steps.unwrap_or(d.refine_steps),
            refine_top: self.refine_top.unwrap_or(d.refine_top),
            seed,
            use_ground_state: self.use_ground_state.unwrap_or(d.use_ground_state),
            enforce_hypotheses: self.enforce_hypotheses.unwrap_or(d.enforce_hypotheses),
            extra_candidates: Vec::new(),
            solve: SolveOptions {
                tol: self.solver_tolerance.unwrap_or(s.tol),
                max_iter: self.solver_max_iter.unwrap_or(s.max_iter),
                seed,
                ..s
            },
        }
    }

    pub fn solve_options(&self, seed: u64) -> SolveOptions {
        self.to_options(seed).solve
    }
}

/// Threshold levels named in a config.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
pub enum LevelName {
    #[serde(rename = "d_I")]
    DI,
    #[serde(rename = "d_prime_I")]
    DPrimeI,
    #[serde(rename = "d_N")]
    DN,
    #[serde(rename = "d_M")]
    DM,
    #[serde(rename = "d_II")]
    DII,
}

impl LevelName {
    pub fn kind(&self) -> ThresholdKind {
        match self {
            LevelName::DI => ThresholdKind::DI,
            LevelName::DPrimeI => ThresholdKind::DPrimeI,
            LevelName::DN => ThresholdKind::DN,
            LevelName::DM => ThresholdKind::DM,
            LevelName::DII => ThresholdKind::DII,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub levels: Vec<LevelName>,
}

/// Routes a classify run may insist on.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RouteName {
    GlobalExistence,
    VirialBlowup,
    #[serde(rename = "threshold_I")]
    ThresholdI,
    HartreeThreshold,
    #[serde(rename = "threshold_II")]
    ThresholdII,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Refuse (exit 2) unless this route's hypotheses hold.
    pub route: Option<RouteName>,
    /// Known `d_I`; estimated when absent and the route needs it.
    pub d_i: Option<f64>,
    /// Known `d_II`; estimated when absent and the route needs it.
    pub d_ii: Option<f64>,
    /// Also evolve the datum and record the observed outcome.
    #[serde(default)]
    pub evolve: bool,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DichotomyConfig {
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub sigma: f64,
    pub d_ii: Option<f64>,
    /// Search grid for the `d_II` estimate when it differs from the evolution grid.
    pub threshold_grid: Option<GridConfig>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Amplitude of the initial datum.
    Amplitude,
    Omega,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SweepTask {
    Simulate,
    Dichotomy,
    #[serde(rename = "d_N")]
    DN,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub task: SweepTask,
    /// Phase for dichotomy rows.
    #[serde(default)]
    pub sigma: f64,
    pub d_ii: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File-name prefix of every artifact.
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), prefix: default_prefix() }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_prefix() -> String {
    "run".into()
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub search: SearchConfig,
    pub threshold: Option<ThresholdConfig>,
    #[serde(default)]
    pub classify: ClassifyConfig,
    pub dichotomy: Option<DichotomyConfig>,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Ok((Self::parse(&text)?, text))
    }

    fn numbers(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![("omega", self.omega), ("grid.extent", self.grid.extent)];
        match &self.model.potential {
            PotentialConfig::Harmonic { a } | PotentialConfig::Saturating { a } => v.push(("model.potential.a", *a)),
            PotentialConfig::Zero => {}
        }
        match &self.initial {
            Some(InitialConfig::Gaussian { amplitude, width, sigma }) => {
                v.extend([("initial.amplitude", *amplitude), ("initial.width", *width), ("initial.sigma", *sigma)])
            }
            Some(InitialConfig::GroundState { amplitude, sigma })
            | Some(InitialConfig::Snapshot { amplitude, sigma, .. }) => {
                v.extend([("initial.amplitude", *amplitude), ("initial.sigma", *sigma)])
            }
            None => {}
        }
        let e = &self.evolve;
        for (k, x) in [
            ("evolve.t_final", e.t_final),
            ("evolve.dt", e.dt),
            ("evolve.dt_min", e.dt_min),
            ("evolve.record_every", e.record_every),
            ("evolve.tolerance", e.tolerance),
            ("evolve.blowup_gradient_factor", e.blowup_gradient_factor),
            ("evolve.blowup_sigma_cap", e.blowup_sigma_cap),
            ("classify.d_i", self.classify.d_i),
            ("classify.d_ii", self.classify.d_ii),
        ] {
            if let Some(x) = x {
                v.push((k, x));
            }
        }
        v.extend(e.snapshot_times.iter().map(|&t| ("evolve.snapshot_times", t)));
        if let Some(d) = &self.dichotomy {
            v.push(("dichotomy.sigma", d.sigma));
            v.extend(d.amplitudes.iter().map(|&c| ("dichotomy.amplitudes", c)));
            if let Some(x) = d.d_ii {
                v.push(("dichotomy.d_ii", x));
            }
        }
        if let Some(s) = &self.sweep {
            v.push(("sweep.sigma", s.sigma));
            v.extend(s.values.iter().map(|&c| ("sweep.values", c)));
        }
        v
    }

    /// Checks that need more than the schema.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some((k, x)) = self.numbers().into_iter().find(|(_, x)| !x.is_finite()) {
            return invalid(format!("{k} must be finite, got {x}"));
        }
        if !(self.omega > 0.0) {
            return invalid("omega must be positive");
        }
        if !(self.grid.extent > 0.0) || self.grid.points < 4 {
            return invalid("grid needs a positive extent and at least 4 points per axis");
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return invalid("output.prefix must be a plain, non-empty file-name prefix");
        }
        let needs_initial = matches!(self.command, Command::Simulate | Command::Classify);
        if needs_initial && self.initial.is_none() {
            return invalid(format!("command {} needs an [initial] block", self.command));
        }
        match self.command {
            Command::Threshold if self.threshold.is_none() => invalid("command threshold needs a [threshold] block"),
            Command::Dichotomy if self.dichotomy.is_none() => invalid("command dichotomy needs a [dichotomy] block"),
            Command::Sweep => match &self.sweep {
                None => invalid("command sweep needs a [sweep] block"),
                Some(s) if s.values.len() > 10_000 => invalid("sweep grids are limited to 10^4 points"),
                Some(s) if s.task == SweepTask::Simulate && self.initial.is_none() => {
                    invalid("a simulate sweep needs an [initial] block")
                }
                Some(_) => Ok(()),
            },
            _ => Ok(()),
        }?;
        self.model.to_model().map(|_| ())
    }
}
