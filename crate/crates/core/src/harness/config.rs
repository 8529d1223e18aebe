use crate::genome::ScenarioLimits;
use crate::oracles::Thresholds;
use crate::simulator::PlannerConfig;
use crate::validity::{ConstraintError, ConstraintTable};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Constraints(#[from] ConstraintError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Operators may change any single gene of an obstacle.
    Full,
    /// Operators move whole obstacles between scenarios.
    Partial,
    /// Every generation is a fresh random batch.
    Random,
}

impl Representation {
    pub const ALL: [Representation; 3] = [Representation::Full, Representation::Partial, Representation::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Full => "full",
            Representation::Partial => "partial",
            Representation::Random => "random",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Representation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Representation::Full),
            "partial" => Ok(Representation::Partial),
            "random" => Ok(Representation::Random),
            other => Err(format!("unknown representation {other:?} (expected full, partial or random)")),
        }
    }
}

/// Which record files a run keeps on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordPolicy {
    /// Records of scenarios holding a unique violation.
    Unique,
    /// Records of every scenario that produced a violation.
    All,
}

/// Search probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub p_crossover: f64,
    /// Chance that an obstacle is mutated in a generation.
    pub p_gene_mutation: f64,
    /// Per-gene resampling chance once an obstacle is picked for mutation.
    pub p_gene_resample: f64,
    pub p_add: f64,
    pub p_remove: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { p_crossover: 0.8, p_gene_mutation: 0.2, p_gene_resample: 0.1, p_add: 0.1, p_remove: 0.1 }
    }
}

/// One run: a representation, a seed and everything they need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub representation: Representation,
    pub map: PathBuf,
    pub seed: u64,
    pub population_size: usize,
    pub min_obstacles: usize,
    pub max_obstacles: usize,
    pub duration: f64,
    /// Generations after the initial population.
    pub generations: usize,
    /// Optional wall-clock cap in minutes, checked between generations.
    pub wall_clock_minutes: Option<f64>,
    pub search: SearchConfig,
    pub thresholds: Thresholds,
    pub planner: PlannerConfig,
    pub constraints: ConstraintTable,
    pub out: PathBuf,
    pub records: RecordPolicy,
}

impl ExperimentConfig {
    pub fn new(representation: Representation, map: impl Into<PathBuf>, seed: u64, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            representation,
            map: map.into(),
            seed,
            population_size: 50,
            min_obstacles: 1,
            max_obstacles: 70,
            duration: 30.0,
            generations: 10,
            wall_clock_minutes: None,
            search: SearchConfig::default(),
            thresholds: Thresholds::default(),
            planner: PlannerConfig::default(),
            constraints: ConstraintTable::default(),
            out: out.into(),
            records: RecordPolicy::Unique,
        }
    }

    pub fn limits(&self) -> ScenarioLimits {
        ScenarioLimits {
            min_obstacles: self.min_obstacles,
            max_obstacles: self.max_obstacles,
            duration: self.duration,
            ego_length: self.planner.ego_length,
            ego_width: self.planner.ego_width,
            ..ScenarioLimits::default()
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let s = &self.search;
        for (name, p) in [
            ("p_crossover", s.p_crossover),
            ("p_gene_mutation", s.p_gene_mutation),
            ("p_gene_resample", s.p_gene_resample),
            ("p_add", s.p_add),
            ("p_remove", s.p_remove),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.population_size == 0 {
            return bad("population_size must be positive".into());
        }
        if self.min_obstacles == 0 || self.min_obstacles > self.max_obstacles {
            return bad(format!(
                "obstacle range must satisfy 1 <= min <= max, got [{}, {}]",
                self.min_obstacles, self.max_obstacles
            ));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration must be positive".into());
        }
        if let Some(m) = self.wall_clock_minutes {
            if !(m.is_finite() && m > 0.0) {
                return bad("wall_clock_minutes must be positive".into());
            }
        }
        self.planner.check().map_err(ConfigError::Invalid)?;
        self.constraints.check()?;
        Ok(())
    }
}

/// The TOML experiment file: shared settings plus the representation and
/// seed lists to expand into individual runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub map: PathBuf,
    pub out: PathBuf,
    #[serde(default = "default_representations")]
    pub representations: Vec<Representation>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_population")]
    pub population_size: usize,
    #[serde(default = "default_min_obstacles")]
    pub min_obstacles: usize,
    #[serde(default = "default_max_obstacles")]
    pub max_obstacles: usize,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default)]
    pub wall_clock_minutes: Option<f64>,
    #[serde(default = "default_records")]
    pub records: RecordPolicy,
    /// Constraint table file; relative paths resolve against the config file.
    #[serde(default)]
    pub constraints_file: Option<PathBuf>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub constraints: Option<ConstraintTable>,
}

fn default_representations() -> Vec<Representation> {
    Representation::ALL.to_vec()
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn default_population() -> usize {
    50
}
fn default_min_obstacles() -> usize {
    1
}
fn default_max_obstacles() -> usize {
    70
}
fn default_duration() -> f64 {
    30.0
}
fn default_generations() -> usize {
    10
}
fn default_records() -> RecordPolicy {
    RecordPolicy::Unique
}

impl ExperimentFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut file = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut file.map);
        resolve(&mut file.out);
        if let Some(c) = file.constraints_file.as_mut() {
            resolve(c);
        }
        Ok(file)
    }

    pub fn constraint_table(&self) -> Result<ConstraintTable, ConfigError> {
        match (&self.constraints_file, &self.constraints) {
            (Some(_), Some(_)) => {
                Err(ConfigError::Invalid("give either constraints_file or [constraints], not both".into()))
            }
            (Some(p), None) => Ok(ConstraintTable::load(p)?),
            (None, Some(t)) => {
                t.check()?;
                Ok(*t)
            }
            (None, None) => Ok(ConstraintTable::default()),
        }
    }

    /// One config per (representation, seed), each writing to
    /// `<out>/<representation>_seed<seed>`.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>, ConfigError> {
        if self.representations.is_empty() || self.seeds.is_empty() {
            return Err(ConfigError::Invalid("need at least one representation and one seed".into()));
        }
        let constraints = self.constraint_table()?;
        let mut out = Vec::new();
        for &rep in &self.representations {
            for &seed in &self.seeds {
                let cfg = ExperimentConfig {
                    representation: rep,
                    map: self.map.clone(),
                    seed,
                    population_size: self.population_size,
                    min_obstacles: self.min_obstacles,
                    max_obstacles: self.max_obstacles,
                    duration: self.duration,
                    generations: self.generations,
                    wall_clock_minutes: self.wall_clock_minutes,
                    search: self.search,
                    thresholds: self.thresholds,
                    planner: self.planner.clone(),
                    constraints,
                    out: self.out.join(run_dir_name(rep, seed)),
                    records: self.records,
                };
                cfg.check()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

pub fn run_dir_name(rep: Representation, seed: u64) -> String {
    format!("{rep}_seed{seed}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_expands_with_defaults() {
        let f = ExperimentFile::from_toml("map = \"m.json\"\nout = \"runs\"\nseeds = [3, 4]\n").unwrap();
        let runs = f.expand().unwrap();
        assert_eq!(runs.len(), 6);
        assert_eq!(runs[0].population_size, 50);
        assert_eq!(runs[0].search, SearchConfig::default());
        assert_eq!(runs[1].out, PathBuf::from("runs/full_seed4"));
        assert_eq!(runs[5].representation, Representation::Random);
    }

    #[test]
    fn bad_probability_is_rejected() {
        let f = ExperimentFile::from_toml("map = \"m\"\nout = \"o\"\n[search]\np_crossover = 1.5\n").unwrap();
        assert!(matches!(f.expand(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentFile::from_toml("map = \"m\"\nout = \"o\"\npopulation = 3\n").is_err());
    }
}
