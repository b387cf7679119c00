//! Experiment configuration: TOML file, dotted-key overrides, resolution.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flowfit::data::MotionConfig;
use flowfit::nn::{ContextConfig, RegressorConfig};
use flowfit::train::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Inputs {
    /// Corpus with labels (pretrain, refine) or the corpus to evaluate.
    pub dataset: Option<PathBuf>,
    /// Corpus whose frame pairs feed refinement; defaults to `dataset`.
    pub unlabeled: Option<PathBuf>,
    /// Checkpoint of the supervised baseline.
    pub baseline: Option<PathBuf>,
    /// Checkpoint to evaluate or audit.
    pub checkpoint: Option<PathBuf>,
    /// Held-out corpus scored after training, if given.
    pub eval_dataset: Option<PathBuf>,
    /// Mesh template archive; the built-in humanoid when absent.
    pub template: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub regressor: RegressorConfig,
    pub context: ContextConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowSourceKind {
    /// Exact flow rendered from ground-truth bodies; any frame distance.
    #[default]
    Render,
    /// Flow files stored in the corpus; consecutive frames only.
    Archive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Sequence refined by `optimize-seq`.
    pub sequence: usize,
    /// Frame distances audited by `flow-audit`.
    pub delta_t: Vec<usize>,
    /// Sample flow at ground-truth keypoints instead of predicted joints.
    pub oracle: bool,
    pub flow_source: FlowSourceKind,
    /// Write SVG plots next to the reports.
    pub plots: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            sequence: 0,
            delta_t: vec![1],
            oracle: true,
            flow_source: FlowSourceKind::Render,
            plots: true,
        }
    }
}

/// Everything a command needs. The global seed drives every seeded
/// component except the labeled subset (`train.label_seed`); the
/// per-section seeds are derived from it on resolution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub inputs: Inputs,
    pub data: MotionConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()))
}

/// Applies one `dotted.key=value` override to a TOML table.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .with_context(|| format!("override `{assignment}` is not of the form key=value"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!("override `{assignment}` has an empty key segment");
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = match entry {
            Value::Table(t) => t,
            _ => bail!("override `{assignment}`: `{part}` is not a section"),
        };
    }
    node.insert(path[path.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

/// Builds the configuration from an optional file and overrides; unknown
/// keys anywhere are rejected.
pub fn load(file: Option<&Path>, overrides: &[String], seed: Option<u64>, out: Option<&Path>) -> Result<ExperimentConfig> {
    let mut table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str::<Table>(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let mut config: ExperimentConfig = Value::Table(table)
        .try_into()
        .context("invalid configuration")?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(o) = out {
        config.out = Some(o.to_path_buf());
    }
    config.derive_seeds();
    Ok(config)
}

impl ExperimentConfig {
    fn derive_seeds(&mut self) {
        self.data.seed = self.seed;
        self.train.seed = self.seed;
        self.model.regressor.init_seed = self.seed;
        self.model.context.init_seed = self.seed.wrapping_add(1);
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing configuration")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = load(
            None,
            &["train.lambda_of=0.5".into(), "data.num_sequences=3".into(), "eval.delta_t=[1,3]".into()],
            Some(9),
            None,
        )
        .unwrap();
        assert_eq!(cfg.train.lambda_of, 0.5);
        assert_eq!(cfg.data.num_sequences, 3);
        assert_eq!(cfg.eval.delta_t, vec![1, 3]);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.data.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(load(None, &["train.lamda_of=0.5".into()], None, None).is_err());
        assert!(load(None, &["bogus=1".into()], None, None).is_err());
        assert!(load(None, &["novalue".into()], None, None).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = load(None, &["inputs.dataset=some/dir".into(), "eval.flow_source=archive".into()], Some(3), Some(Path::new("o"))).unwrap();
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.inputs.dataset.as_deref(), Some(Path::new("some/dir")));
        assert_eq!(back.eval.flow_source, FlowSourceKind::Archive);
    }
}
