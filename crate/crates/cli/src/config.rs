//! Pipeline configuration: a TOML file, overridden by command-line flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crowdprior_core::head::TrainConfig;
use crowdprior_core::metrics::AmbiguityConfig;
use crowdprior_core::sim::SimConfig;
use crowdprior_core::split::DEFAULT_RATIOS;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CROWDPRIOR_OUT";
pub const DEFAULT_OUT_DIR: &str = "crowdprior-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Uniform,
    Model,
}

/// Artifact locations. Unset entries default to fixed names inside the
/// output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tasks: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub responses: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Drives every random stage, overriding the seeds inside `sim` and `train`.
    pub seed: u64,
    /// Prior for `infer`, and whether `repeats` adds the informed variant.
    pub prior: PriorKind,
    /// Response count the head conditions on when predicting.
    pub inference_n: u64,
    pub target_accuracy: f64,
    pub bootstrap: usize,
    pub blend: f64,
    pub permutations: usize,
    /// Cap on replayed responses per task; all responses when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_repeats: Option<usize>,
    pub bins: usize,
    pub split_ratios: [f64; 3],
    pub paths: Paths,
    pub sim: SimConfig,
    pub train: TrainConfig,
    pub ambiguity: AmbiguityConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            prior: PriorKind::Uniform,
            inference_n: 20,
            target_accuracy: crowdprior_core::autothresh::DEFAULT_TARGET_ACCURACY,
            bootstrap: crowdprior_core::autothresh::DEFAULT_BOOTSTRAP,
            blend: crowdprior_core::priors::DEFAULT_BLEND,
            permutations: crowdprior_core::priors::DEFAULT_PERMUTATIONS,
            max_repeats: None,
            bins: 10,
            split_ratios: DEFAULT_RATIOS,
            paths: Paths::default(),
            sim: SimConfig::default(),
            train: TrainConfig::default(),
            ambiguity: AmbiguityConfig::default(),
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Output directory [env: CROWDPRIOR_OUT]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Bootstrap realizations
    #[arg(long, global = true)]
    pub bootstrap: Option<usize>,
    #[arg(long, global = true)]
    pub target_accuracy: Option<f64>,
    /// Chernoff weight of the training objective
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub eta0: Option<f64>,
    #[arg(long, global = true)]
    pub pi0: Option<f64>,
    /// Weight of the model prediction in the informed prior
    #[arg(long, global = true)]
    pub blend: Option<f64>,
    /// Response orderings averaged per task in `repeats`
    #[arg(long, global = true)]
    pub permutations: Option<usize>,
    /// Response count the head conditions on when predicting
    #[arg(long, global = true)]
    pub inference_n: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub prior: Option<PriorKind>,
    #[arg(long, global = true)]
    pub scheme: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tasks: Option<PathBuf>,
    #[arg(long, global = true)]
    pub responses: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true)]
    pub predictions: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start].bytes().filter(|&b| b == b'\n').count() + 1);
            CliError::parse(path, line, e.message())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        fn set_path(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        set(&mut self.seed, &o.seed);
        set(&mut self.bootstrap, &o.bootstrap);
        set(&mut self.target_accuracy, &o.target_accuracy);
        set(&mut self.train.tau, &o.tau);
        set(&mut self.ambiguity.eta0, &o.eta0);
        set(&mut self.ambiguity.pi0, &o.pi0);
        set(&mut self.blend, &o.blend);
        set(&mut self.permutations, &o.permutations);
        set(&mut self.inference_n, &o.inference_n);
        set(&mut self.prior, &o.prior);
        set_path(&mut self.paths.out_dir, &o.out);
        set_path(&mut self.paths.scheme, &o.scheme);
        set_path(&mut self.paths.tasks, &o.tasks);
        set_path(&mut self.paths.responses, &o.responses);
        set_path(&mut self.paths.model, &o.model);
        set_path(&mut self.paths.predictions, &o.predictions);
        self.sim.seed = self.seed;
        self.train.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CliError::Input(format!("invalid config: {msg}")));
        if !(self.target_accuracy > 0.0 && self.target_accuracy <= 1.0) {
            return bad("target_accuracy must lie in (0, 1]");
        }
        if self.bootstrap == 0 {
            return bad("bootstrap must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.blend) {
            return bad("blend must lie in [0, 1]");
        }
        if self.permutations == 0 {
            return bad("permutations must be at least 1");
        }
        if self.bins < 2 {
            return bad("bins must be at least 2");
        }
        AmbiguityConfig::new(self.ambiguity.eta0, self.ambiguity.pi0)?;
        self.train.validate()?;
        self.sim.validate()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths.out_dir = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().fold(String::new(), |mut s, b| {
            write!(s, "{b:02x}").expect("writing to a string");
            s
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT_DIR), PathBuf::from)
        })
    }

    fn path_or(&self, slot: &Option<PathBuf>, name: &str) -> PathBuf {
        slot.clone().unwrap_or_else(|| self.out_dir().join(name))
    }

    pub fn scheme_path(&self) -> PathBuf {
        self.path_or(&self.paths.scheme, "scheme.json")
    }

    pub fn tasks_path(&self) -> PathBuf {
        self.path_or(&self.paths.tasks, "tasks.jsonl")
    }

    pub fn responses_path(&self) -> PathBuf {
        self.path_or(&self.paths.responses, "responses.jsonl")
    }

    pub fn split_path(&self) -> PathBuf {
        self.path_or(&self.paths.split, "split.json")
    }

    pub fn model_path(&self) -> PathBuf {
        self.path_or(&self.paths.model, "model.txt")
    }

    pub fn predictions_path(&self) -> PathBuf {
        self.path_or(&self.paths.predictions, "predictions.jsonl")
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_gives_defaults() {
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn sections_and_flags_merge() {
        let mut cfg = PipelineConfig::from_toml_str(
            "seed = 5\nbootstrap = 64\n[sim]\nnum_tasks = 300\n[train]\nepochs = 7\n[ambiguity]\neta0 = 0.5\n",
        )
        .unwrap();
        assert_eq!((cfg.sim.num_tasks, cfg.train.epochs, cfg.ambiguity.eta0), (300, 7, 0.5));
        assert_eq!(cfg.ambiguity.pi0, 0.8);
        cfg.apply(&Overrides {
            seed: Some(9),
            tau: Some(0.25),
            ..Overrides::default()
        });
        assert_eq!((cfg.seed, cfg.sim.seed, cfg.train.seed), (9, 9, 9));
        assert_eq!((cfg.bootstrap, cfg.train.tau), (64, 0.25));
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml_str("sead = 1\n").is_err());
        assert!(PipelineConfig::from_toml_str("[train]\nlr = 1\n").is_err());
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
        let mut moved = cfg.clone();
        moved.paths.out_dir = Some("elsewhere".into());
        assert_eq!(moved.hash(), cfg.hash());
        let mut reseeded = cfg.clone();
        reseeded.seed = 1;
        assert_ne!(reseeded.hash(), cfg.hash());
    }

    #[test]
    fn invalid_values_fail_validation() {
        for text in ["target_accuracy = 1.5", "bootstrap = 0", "blend = 2.0", "[ambiguity]\neta0 = 1.0", "[sim]\nrepeats = 0"] {
            assert!(PipelineConfig::from_toml_str(text).unwrap().validate().is_err(), "{text}");
        }
    }
}
