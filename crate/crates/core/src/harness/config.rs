//! Experiment configuration: a JSON or TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particles::default_step;
use crate::strategies::StrategyRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Survivors,
    StrategySweep,
    HydroCompare,
    StefanSolve,
    IdentityTest,
    AtlasGaps,
    Validate,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Survivors,
        Experiment::StrategySweep,
        Experiment::HydroCompare,
        Experiment::StefanSolve,
        Experiment::IdentityTest,
        Experiment::AtlasGaps,
        Experiment::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Survivors => "survivors",
            Experiment::StrategySweep => "strategy-sweep",
            Experiment::HydroCompare => "hydro-compare",
            Experiment::StefanSolve => "stefan-solve",
            Experiment::IdentityTest => "identity-test",
            Experiment::AtlasGaps => "atlas-gaps",
            Experiment::Validate => "validate",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    fn default_k(self) -> u64 {
        match self {
            Experiment::IdentityTest => 4096,
            Experiment::AtlasGaps | Experiment::Validate => 1024,
            _ => 10_000,
        }
    }

    fn default_replicates(self) -> u32 {
        match self {
            Experiment::Survivors | Experiment::HydroCompare => 16,
            Experiment::StrategySweep => 8,
            Experiment::StefanSolve => 1,
            Experiment::IdentityTest => 32,
            Experiment::AtlasGaps => 200,
            Experiment::Validate => 100,
        }
    }

    fn default_t_end(self) -> f64 {
        match self {
            Experiment::Survivors | Experiment::StrategySweep => 1.5,
            Experiment::HydroCompare => 1.0,
            Experiment::StefanSolve => 2.0,
            Experiment::IdentityTest | Experiment::AtlasGaps | Experiment::Validate => 0.5,
        }
    }
}

/// One `K` or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KList {
    One(u64),
    Many(Vec<u64>),
}

impl KList {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            KList::One(k) => vec![*k],
            KList::Many(v) => v.clone(),
        }
    }
}

/// Step size, either fixed or `"auto"` for `0.1/K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepRepr", into = "StepRepr")]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StepRepr {
    Num(f64),
    Word(String),
}

impl TryFrom<StepRepr> for StepSize {
    type Error = String;

    fn try_from(r: StepRepr) -> std::result::Result<Self, String> {
        match r {
            StepRepr::Num(h) => Ok(StepSize::Fixed(h)),
            StepRepr::Word(w) if w == "auto" => Ok(StepSize::Auto),
            StepRepr::Word(w) => Err(format!("h must be a number or \"auto\", got {w:?}")),
        }
    }
}

impl From<StepSize> for StepRepr {
    fn from(s: StepSize) -> Self {
        match s {
            StepSize::Auto => StepRepr::Word("auto".into()),
            StepSize::Fixed(h) => StepRepr::Num(h),
        }
    }
}

impl StepSize {
    pub fn resolve(self, k: u64) -> f64 {
        match self {
            StepSize::Auto => default_step(k),
            StepSize::Fixed(h) => h,
        }
    }
}

/// Configuration as written by the user. Unset fields take per-experiment
/// defaults in [`RunConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    #[serde(rename = "K")]
    pub k: Option<KList>,
    pub replicates: Option<u32>,
    pub seed_base: Option<u64>,
    pub h: Option<StepSize>,
    pub t_end: Option<f64>,
    pub strategy: Option<String>,
    /// Strategies compared by `strategy-sweep`; all built-ins when unset.
    pub strategies: Option<Vec<String>>,
    pub dt: Option<f64>,
    pub root_tol: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub bridge: Option<bool>,
    /// Time and position at which `identity-test` evaluates the remainder.
    pub probe_t: Option<f64>,
    pub probe_x: Option<f64>,
    /// Cut-off exponent of the Atlas initial profile.
    pub gamma: Option<f64>,
    /// Particle count of the Exp(2)-gap Atlas systems in `atlas-gaps`.
    pub atlas_particles: Option<usize>,
    /// Number of lowest gaps pooled per run in `atlas-gaps`.
    pub lowest_gaps: Option<usize>,
    /// Two-barrier paths for the confinement cross-check in `validate`.
    pub confinement_paths: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML config: {e}")))
    }

    /// Reads a `.toml` file as TOML and anything else as JSON.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text),
        }
    }

    /// Fills defaults for `experiment` and validates every field.
    pub fn resolve(&self, experiment: Experiment) -> Result<ResolvedConfig> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(Error::Config(format!(
                    "config is for {} but the command is {}",
                    e.name(),
                    experiment.name()
                )));
            }
        }
        let bad = |m: String| Err(Error::Config(m));
        let k = self.k.as_ref().map(KList::to_vec).unwrap_or_else(|| vec![experiment.default_k()]);
        if k.is_empty() || k.contains(&0) {
            return bad(format!("K must be a non-empty list of positive integers, got {k:?}"));
        }
        let replicates = self.replicates.unwrap_or_else(|| experiment.default_replicates());
        if replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        let h = self.h.unwrap_or(StepSize::Auto);
        if let StepSize::Fixed(v) = h {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("h must be positive, got {v}"));
            }
        }
        let positive = |name: &str, v: f64| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let t_end = positive("t_end", self.t_end.unwrap_or_else(|| experiment.default_t_end()))?;
        let dt = positive("dt", self.dt.unwrap_or(crate::stefan::DEFAULT_DT))?;
        let root_tol = positive("root_tol", self.root_tol.unwrap_or(crate::stefan::DEFAULT_ROOT_TOL))?;
        let probe_t = positive("probe_t", self.probe_t.unwrap_or(t_end))?;
        if probe_t > t_end {
            return bad(format!("probe_t = {probe_t} lies after t_end = {t_end}"));
        }
        let probe_x = self.probe_x.unwrap_or(0.0);
        if !(probe_x >= 0.0 && probe_x.is_finite()) {
            return bad(format!("probe_x must be non-negative, got {probe_x}"));
        }
        let gamma = self.gamma.unwrap_or(DEFAULT_GAMMA);
        if !(gamma > 0.0 && gamma < 1.0 / 96.0) {
            return bad(format!("gamma must lie in (0, 1/96), got {gamma}"));
        }
        let registry = StrategyRegistry::default();
        let strategy = self.strategy.clone().unwrap_or_else(|| "push-the-laggard".into());
        let strategies = self.strategies.clone().unwrap_or_else(|| registry.names());
        for name in std::iter::once(&strategy).chain(&strategies) {
            registry.get(name)?;
        }
        if strategies.is_empty() {
            return bad("strategies must not be empty".into());
        }
        let atlas_particles = self.atlas_particles.unwrap_or(512);
        let lowest_gaps = self.lowest_gaps.unwrap_or(5);
        if lowest_gaps == 0 || atlas_particles <= lowest_gaps {
            return bad(format!(
                "need atlas_particles > lowest_gaps > 0, got {atlas_particles} and {lowest_gaps}"
            ));
        }
        let confinement_paths = self.confinement_paths.unwrap_or(100_000);
        if confinement_paths == 0 {
            return bad("confinement_paths must be at least 1".into());
        }
        Ok(ResolvedConfig {
            schema_version: crate::SCHEMA_VERSION,
            experiment,
            h_resolved: k.iter().map(|&k| h.resolve(k)).collect(),
            k,
            replicates,
            seed_base: self.seed_base.unwrap_or(0),
            h,
            t_end,
            strategy,
            strategies,
            dt,
            root_tol,
            output_dir: self
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("out").join(experiment.name())),
            bridge: self.bridge.unwrap_or(true),
            probe_t,
            probe_x,
            gamma,
            atlas_particles,
            lowest_gaps,
            confinement_paths,
        })
    }
}

/// Default cut-off exponent of the Atlas initial profile.
pub const DEFAULT_GAMMA: f64 = 0.005;

/// Fully specified configuration; written to `config.json` beside results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    #[serde(rename = "K")]
    pub k: Vec<u64>,
    pub replicates: u32,
    pub seed_base: u64,
    pub h: StepSize,
    /// Step actually used for each entry of `K`.
    pub h_resolved: Vec<f64>,
    pub t_end: f64,
    pub strategy: String,
    pub strategies: Vec<String>,
    pub dt: f64,
    pub root_tol: f64,
    pub output_dir: PathBuf,
    pub bridge: bool,
    pub probe_t: f64,
    pub probe_x: f64,
    pub gamma: f64,
    pub atlas_particles: usize,
    pub lowest_gaps: usize,
    pub confinement_paths: u64,
}

impl ResolvedConfig {
    /// Seed of replicate `r`.
    pub fn seed(&self, r: u32) -> u64 {
        self.seed_base.wrapping_add(r as u64)
    }
}
