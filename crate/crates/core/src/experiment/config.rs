use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datalog::{Engine, DEFAULT_MAX_ITERS};
use crate::embed::TrainConfig;
use crate::error::{Error, Result};
use crate::kg::CapitalPolicy;
use crate::rng::RngSeed;
use crate::superposition::SuperTrainConfig;

/// Overrides the default `data/` root.
pub const DATA_DIR_ENV: &str = "TENSOR_LOGIC_DATA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3a,
    Exp3b,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3a => "exp3a",
            ExperimentId::Exp3b => "exp3b",
        })
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(ExperimentId::Exp1),
            "exp2" => Ok(ExperimentId::Exp2),
            "exp3a" => Ok(ExperimentId::Exp3a),
            "exp3b" => Ok(ExperimentId::Exp3b),
            other => Err(Error::Config(format!(
                "unknown experiment `{other}` (expected exp1, exp2, exp3a or exp3b)"
            ))),
        }
    }
}

/// Input files. Unset entries default to the standard layout under the
/// data root (`$TENSOR_LOGIC_DATA`, else `data`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataPaths {
    pub countries: Option<PathBuf>,
    pub persons: Option<PathBuf>,
    pub relationships: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Reuse a saved composition benchmark instead of building one.
    pub bench: Option<PathBuf>,
    pub capital_policy: CapitalPolicy,
}

fn data_root() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("data"), PathBuf::from)
}

impl DataPaths {
    /// Fills every unset path from the data root, except `bench`.
    pub fn resolved(&self) -> DataPaths {
        let root = data_root();
        let or = |p: &Option<PathBuf>, rel: &str| Some(p.clone().unwrap_or_else(|| root.join(rel)));
        DataPaths {
            countries: or(&self.countries, "countries/countries.json"),
            persons: or(&self.persons, "bible-data/BibleData-Person.csv"),
            relationships: or(&self.relationships, "bible-data/BibleData-PersonRelationship.csv"),
            train: or(&self.train, "FB15k-237/train.txt"),
            valid: or(&self.valid, "FB15k-237/valid.txt"),
            test: or(&self.test, "FB15k-237/test.txt"),
            bench: self.bench.clone(),
            capital_policy: self.capital_policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Exp1Config {
    pub engine: Engine,
    pub max_iters: usize,
    pub lineage: Vec<String>,
}

impl Default for Exp1Config {
    fn default() -> Self {
        Exp1Config {
            engine: Engine::Seminaive,
            max_iters: DEFAULT_MAX_ITERS,
            lineage: vec!["Adam".into(), "Abram".into()],
        }
    }
}

/// Composition benchmark sizes (exp3b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub n_valid: usize,
    pub n_test: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_valid: 1000,
            n_test: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default)]
    pub seed: RngSeed,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub data: DataPaths,
    #[serde(default)]
    pub exp1: Exp1Config,
    #[serde(default)]
    pub exp2: TrainConfig,
    #[serde(default)]
    pub exp3: SuperTrainConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId) -> Self {
        ExperimentConfig {
            experiment,
            seed: RngSeed::default(),
            output_dir: default_output_dir(),
            data: DataPaths::default(),
            exp1: Exp1Config::default(),
            exp2: TrainConfig::default(),
            exp3: SuperTrainConfig::default(),
            bench: BenchConfig::default(),
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {}", e.message())))?;
        cfg.propagate_seed();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Copies the top-level seed into the trainer configs.
    pub fn propagate_seed(&mut self) {
        self.exp2.seed = self.seed;
        self.exp3.seed = self.seed;
    }

    /// Range checks, default path resolution, and existence of every input
    /// the selected experiment reads.
    pub fn validate(mut self) -> Result<Self> {
        self.propagate_seed();
        self.data = self.data.resolved();
        let d = &self.data;
        let needed: Vec<(&str, &Option<PathBuf>)> = match self.experiment {
            ExperimentId::Exp1 => {
                if self.exp1.max_iters == 0 {
                    return Err(Error::Config("exp1.max_iters must be at least 1".into()));
                }
                vec![("persons", &d.persons), ("relationships", &d.relationships)]
            }
            ExperimentId::Exp2 => {
                self.exp2.validate()?;
                vec![("countries", &d.countries)]
            }
            ExperimentId::Exp3a | ExperimentId::Exp3b => {
                self.exp3.validate()?;
                let mut v = vec![("train", &d.train), ("valid", &d.valid), ("test", &d.test)];
                if self.experiment == ExperimentId::Exp3b {
                    if self.bench.n_test == 0 {
                        return Err(Error::Config("bench.n_test must be at least 1".into()));
                    }
                    if d.bench.is_some() {
                        v.push(("bench", &d.bench));
                    }
                }
                v
            }
        };
        for (name, p) in needed {
            let p = p.as_ref().expect("resolved");
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "data.{name}: file not found: {} (see data/README.md)",
                    p.display()
                )));
            }
        }
        Ok(self)
    }
}

/// Reads, parses and validates a config file.
pub fn validate_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::parse(&text, &path.display().to_string())?.validate()
}
