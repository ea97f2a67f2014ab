//! Run configuration: JSON file values overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use routenav::env::ObservationMode;
use routenav::ppo::TrainerConfig;
use routenav::traversal::{Condition, SynthConfig};

pub const SUPPORTED_DIMS: [usize; 4] = [64, 512, 2048, 4096];

/// Top-level experiment configuration. Every field has a default so a config
/// file may specify only what it overrides; flags take precedence over file
/// values, which take precedence over defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub run_id: Option<String>,
    pub out_dir: Option<PathBuf>,
    /// Visual feature dimensionalities to train/evaluate.
    pub dims: Vec<usize>,
    pub observation_mode: ObservationMode,
    /// Synthetic dataset parameters (used when no manifest is given).
    pub synth: Option<SynthConfig>,
    /// Path to an existing dataset manifest.
    pub manifest: Option<PathBuf>,
    pub trainer: TrainerConfig,
    pub condition: Condition,
    pub curriculum_window: usize,
    pub curriculum_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            run_id: None,
            out_dir: None,
            dims: vec![64],
            observation_mode: ObservationMode::Bimodal,
            synth: None,
            manifest: None,
            trainer: TrainerConfig::default(),
            condition: Condition::Reference,
            curriculum_window: routenav::env::DEFAULT_PROMOTE_WINDOW,
            curriculum_threshold: routenav::env::DEFAULT_PROMOTE_THRESHOLD,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            bail!("config error: dims must be non-empty");
        }
        for d in &self.dims {
            if !SUPPORTED_DIMS.contains(d) {
                bail!(
                    "config error: dim {d} unsupported, expected one of {:?}",
                    SUPPORTED_DIMS
                );
            }
        }
        self.trainer.validate().map_err(|e| anyhow::anyhow!("config error: {e}"))?;
        if let Some(s) = &self.synth {
            s.validate().map_err(|e| anyhow::anyhow!("config error: {e}"))?;
        }
        Ok(())
    }
}

/// Output directory resolution: explicit flag, else config, else
/// `$ROUTENAV_OUT/<run_id>`, else `runs/<run_id>`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig, run_id: &str) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.out_dir {
        return p.clone();
    }
    let root = std::env::var_os("ROUTENAV_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(run_id)
}
