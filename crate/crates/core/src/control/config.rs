use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::meta::{HttpSettings, MetaSettings, ModeWeights};
use crate::problem::InstanceFormat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Dyace,
    Static,
    Blind,
    StaticBlind,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Dyace, Variant::Static, Variant::Blind, Variant::StaticBlind];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Dyace => "dyace",
            Variant::Static => "static",
            Variant::Blind => "blind",
            Variant::StaticBlind => "static_blind",
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Variant::Static | Variant::StaticBlind)
    }

    pub fn is_blind(&self) -> bool {
        matches!(self, Variant::Blind | Variant::StaticBlind)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| format!("unknown variant {s:?} (expected dyace, static, blind or static_blind)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub path: PathBuf,
    /// Defaults from the file extension: `.txt` Taillard, `.tsp` TSPLIB, `.vrp` CVRPLIB.
    #[serde(default)]
    pub format: Option<String>,
    pub bks_registry: PathBuf,
}

impl InstanceConfig {
    pub fn resolved_format(&self) -> Result<InstanceFormat, ControlError> {
        let name = match &self.format {
            Some(f) => f.clone(),
            None => match self.path.extension().and_then(|e| e.to_str()) {
                Some("tsp") => "tsplib".into(),
                Some("vrp") => "cvrplib".into(),
                _ => "taillard".into(),
            },
        };
        name.parse().map_err(|e: crate::problem::ProblemError| ControlError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub variant: Variant,
    pub seed: u64,
    pub population_size: usize,
    pub algorithm_population_size: usize,
    pub horizon: usize,
    pub meta_generations: usize,
    pub probe_generations: usize,
    pub probe_rollouts: usize,
    pub budget: u64,
    /// Static variants only: evolve specs offline. When false the seed spec is frozen.
    pub offline_synthesis: bool,
    /// Seed the algorithm population through the back end instead of the catalog.
    pub backend_initialization: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            variant: Variant::Dyace,
            seed: 0,
            population_size: 100,
            algorithm_population_size: 5,
            horizon: 5,
            meta_generations: 30,
            probe_generations: 30,
            probe_rollouts: 3,
            budget: 300,
            offline_synthesis: true,
            backend_initialization: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaSection {
    pub mode_weights: ModeWeights,
    pub retries: usize,
    pub focused_temperature: f64,
    pub explore_temperature: f64,
    pub max_tokens: u32,
}

impl Default for MetaSection {
    fn default() -> Self {
        let d = MetaSettings::default();
        Self {
            mode_weights: d.mode_weights,
            retries: d.retries,
            focused_temperature: d.focused_temperature,
            explore_temperature: d.explore_temperature,
            max_tokens: d.max_tokens,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Http,
    Replay,
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(BackendKind::Scripted),
            "http" => Ok(BackendKind::Http),
            "replay" => Ok(BackendKind::Replay),
            _ => Err(format!("unknown back end {s:?} (expected scripted, http or replay)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Trace whose back-end replies are replayed when `kind = "replay"`.
    pub replay_trace: Option<PathBuf>,
    pub http: HttpSettings,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            kind: BackendKind::Scripted,
            replay_trace: None,
            http: HttpSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsSection {
    /// Wall-clock limit per look-ahead rollout.
    pub probe_rollout_secs: u64,
    /// Wall-clock limit per offline full-horizon rollout.
    pub full_rollout_secs: u64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self {
            probe_rollout_secs: 120,
            full_rollout_secs: 300,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Adds wall-clock offsets to step events. Traces are then no longer byte-reproducible.
    pub timestamps: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instance: InstanceConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub meta: MetaSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ControlError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ControlError::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ControlError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ControlError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// A config with default run settings for the given instance files.
    pub fn for_instance(path: impl Into<PathBuf>, bks_registry: impl Into<PathBuf>) -> Self {
        Self {
            instance: InstanceConfig {
                path: path.into(),
                format: None,
                bks_registry: bks_registry.into(),
            },
            run: RunSection::default(),
            meta: MetaSection::default(),
            backend: BackendSection::default(),
            limits: LimitsSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.instance.path);
        fix(&mut self.instance.bks_registry);
        if let Some(p) = &mut self.backend.replay_trace {
            fix(p);
        }
        if let Some(p) = &mut self.output.dir {
            fix(p);
        }
    }

    /// Checks the numeric invariants.
    pub fn check(&self) -> Result<(), ControlError> {
        let r = &self.run;
        let mut problems = Vec::new();
        if r.population_size < 2 {
            problems.push("population_size must be at least 2");
        }
        if r.algorithm_population_size < 1 {
            problems.push("algorithm_population_size must be at least 1");
        }
        if r.horizon < 1 {
            problems.push("horizon must be at least 1");
        }
        if r.meta_generations < 1 {
            problems.push("meta_generations must be at least 1");
        }
        if r.probe_generations < 2 {
            problems.push("probe_generations must be at least 2");
        }
        if r.probe_rollouts < 1 {
            problems.push("probe_rollouts must be at least 1");
        }
        if r.budget == 0 {
            problems.push("budget must be positive");
        }
        let w = &self.meta.mode_weights;
        if [w.combine, w.mutate, w.explore].iter().any(|x| !x.is_finite() || *x < 0.0) {
            problems.push("mode weights must be finite and non-negative");
        }
        if self.backend.kind == BackendKind::Replay && self.backend.replay_trace.is_none() {
            problems.push("backend.replay_trace is required for the replay back end");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ControlError::Config(problems.join("; ")))
        }
    }

    pub fn total_generations(&self) -> usize {
        self.run.horizon * self.run.meta_generations
    }

    pub fn meta_settings(&self) -> MetaSettings {
        MetaSettings {
            mode_weights: self.meta.mode_weights,
            retries: self.meta.retries,
            focused_temperature: self.meta.focused_temperature,
            explore_temperature: self.meta.explore_temperature,
            max_tokens: self.meta.max_tokens,
            blind: self.run.variant.is_blind(),
            capacity: self.run.algorithm_population_size,
        }
    }
}
