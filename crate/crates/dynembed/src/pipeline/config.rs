//! Pipeline configuration: one TOML file covering every stage, plus a
//! single global seed from which each stage derives its own stream.

use super::{ErrorCode, PipelineError};
use crate::connectome::WindowSpec;
use crate::encoder::EncoderConfig;
use crate::evalkit::{EvalConfig, Protocol};
use crate::rng::{hash_str, stream_seed};
use crate::tempwalk::{StartTimePolicy, WalkConfig};
use crate::trainer::{MaskPolicy, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub length: usize,
    pub stride: usize,
    pub percentile: f64,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection {
            length: 50,
            stride: 5,
            percentile: 80.0,
        }
    }
}

impl WindowSection {
    pub fn to_spec(&self) -> WindowSpec {
        WindowSpec {
            window_length: self.length,
            stride: self.stride,
            threshold_percentile: self.percentile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSection {
    pub max_length: usize,
    pub walks_per_node: usize,
    pub min_length: usize,
    pub start_time_policy: StartTimePolicy,
}

impl Default for WalkSection {
    fn default() -> Self {
        WalkSection {
            max_length: 20,
            walks_per_node: 30,
            min_length: 2,
            start_time_policy: StartTimePolicy::Earliest,
        }
    }
}

impl WalkSection {
    pub fn to_config(&self, seed: u64) -> WalkConfig {
        WalkConfig {
            l_max: self.max_length,
            walks_per_node: self.walks_per_node,
            min_length: self.min_length,
            start_time_policy: self.start_time_policy,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    /// Feed-forward width; omit for the conventional `4·dim`.
    pub d_ff: Option<usize>,
}

impl Default for EncoderSection {
    fn default() -> Self {
        EncoderSection {
            dim: 252,
            heads: 4,
            layers: 6,
            d_ff: None,
        }
    }
}

impl EncoderSection {
    /// `max_seq` is derived from the walk section (`l_max + 1`), which keeps
    /// the cross-module invariant true by construction.
    pub fn to_config(&self, max_walk_length: usize) -> EncoderConfig {
        EncoderConfig {
            dim: self.dim,
            heads: self.heads,
            layers: self.layers,
            d_ff: self.d_ff.unwrap_or(4 * self.dim),
            max_seq: max_walk_length + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lambda1: f64,
    pub lambda2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub mask_fraction: f64,
    pub dropout: f64,
    pub per_position_td: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            lambda1: d.lambda1,
            lambda2: d.lambda2,
            batch_size: d.batch_size,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            mask_fraction: d.mask_fraction,
            dropout: d.dropout,
            per_position_td: d.per_position_td,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed,
            mask_fraction: self.mask_fraction,
            mask_policy: MaskPolicy::default(),
            dropout: self.dropout,
            per_position_td: self.per_position_td,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub protocol: String,
    pub regularization: f64,
    pub threshold: f64,
    pub normalize: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            protocol: "stratified10".into(),
            regularization: 1.0,
            threshold: 0.5,
            normalize: true,
        }
    }
}

impl EvalSection {
    pub fn to_config(&self, seed: u64) -> Result<EvalConfig, crate::evalkit::EvalError> {
        Ok(EvalConfig {
            protocol: Protocol::parse(&self.protocol)?,
            seed,
            regularization: self.regularization,
            threshold: self.threshold,
            normalize: self.normalize,
        })
    }
}

/// Everything `pipeline` needs. A minimal file only sets `input_dir`; every
/// other field has a default. CLI flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub window: WindowSection,
    pub walk: WalkSection,
    pub encoder: EncoderSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            seed: 0,
            window: WindowSection::default(),
            walk: WalkSection::default(),
            encoder: EncoderSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::new(
                "config",
                ErrorCode::Validation,
                format!("cannot read {}: {e}", path.display()),
            )
        })?;
        let cfg: PipelineConfig = toml::from_str(&text).map_err(|e| {
            PipelineError::new(
                "config",
                ErrorCode::Validation,
                format!("{}: {e}", path.display()),
            )
        })?;
        Ok(cfg)
    }

    /// Per-stage seeds derived from the single global seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        stream_seed(self.seed, &[hash_str(stage)])
    }

    /// Validate all sections and their cross-module consistency before any
    /// stage runs.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let invalid =
            |msg: String| PipelineError::new("config", ErrorCode::Validation, msg);
        self.window
            .to_spec()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.walk
            .to_config(0)
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.encoder
            .to_config(self.walk.max_length)
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.train
            .to_config(0)
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.eval
            .to_config(0)
            .map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }
}
