use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use eventarg::inference::InferenceConfig;
use eventarg::model::{Architecture, TrainingConfig};
use eventarg::synth::SynthSpec;

use crate::DataError;

/// File locations. Relative paths in a config file are resolved against the
/// file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Output directory of `synth`.
    pub synth_dir: Option<PathBuf>,
    /// Per-step training losses, JSONL.
    pub training_log: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Assignments tagged by `augment`; gold arguments when absent.
    pub assignments: Option<PathBuf>,
    pub augmented: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub consistency: Option<PathBuf>,
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.ontology,
            &mut self.checkpoint,
            &mut self.synth_dir,
            &mut self.training_log,
            &mut self.predictions,
            &mut self.trace,
            &mut self.assignments,
            &mut self.augmented,
            &mut self.report,
            &mut self.consistency,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Everything one run needs; every section is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub synth: SynthSpec,
    pub architecture: Architecture,
    pub training: TrainingConfig,
    pub inference: InferenceConfig,
    /// Majority-share threshold of the consistency report.
    pub consistency_threshold: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| DataError(format!("config {}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            config.paths.rebase(dir);
        }
        Ok(config)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            synth: SynthSpec::default(),
            architecture: Architecture::default(),
            training: TrainingConfig::default(),
            inference: InferenceConfig::default(),
            consistency_threshold: 1.0,
        }
    }
}
