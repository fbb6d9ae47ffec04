//! File-tree stage ledger: `state.json` at the output root records
//! per-asset, per-stage status and output content hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Sample,
    Caption,
    Dialogue,
    EmitSft,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Sample => "sample",
            Stage::Caption => "caption",
            Stage::Dialogue => "dialogue",
            Stage::EmitSft => "emit-sft",
        }
    }

    pub fn upstream(&self) -> Option<Stage> {
        match self {
            Stage::Sample => None,
            Stage::Caption => Some(Stage::Sample),
            Stage::Dialogue => Some(Stage::Caption),
            Stage::EmitSft => Some(Stage::Dialogue),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StageStatus {
    Done { output_hash: String },
    Failed { reason: String },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AssetState {
    #[serde(default)]
    pub stages: BTreeMap<Stage, StageStatus>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineState {
    pub seed: u64,
    #[serde(default)]
    pub assets: BTreeMap<String, AssetState>,
}

/// Sentinel hash for stages whose valid output is "no file".
pub const ABSENT_OUTPUT: &str = "absent";

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("hashing output {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub struct StateStore {
    path: PathBuf,
    pub state: PipelineState,
}

impl StateStore {
    pub fn open(out_root: &Path, seed: u64) -> Result<Self> {
        let path = out_root.join("state.json");
        let state = if path.exists() {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            PipelineState {
                seed,
                ..PipelineState::default()
            }
        };
        Ok(Self { path, state })
    }

    /// A stage is done only if the ledger says so and the output file
    /// still hashes to the recorded value.
    pub fn is_done(&self, asset_id: &str, stage: Stage, output: &Path) -> bool {
        let Some(asset) = self.state.assets.get(asset_id) else {
            return false;
        };
        match asset.stages.get(&stage) {
            Some(StageStatus::Done { output_hash }) if output_hash == ABSENT_OUTPUT => {
                !output.exists()
            }
            Some(StageStatus::Done { output_hash }) => {
                output.exists() && hash_file(output).map(|h| &h == output_hash).unwrap_or(false)
            }
            _ => false,
        }
    }

    /// Record a stage that legitimately produced no output file.
    pub fn mark_done_absent(&mut self, asset_id: &str, stage: Stage) {
        self.state
            .assets
            .entry(asset_id.to_string())
            .or_default()
            .stages
            .insert(
                stage,
                StageStatus::Done {
                    output_hash: ABSENT_OUTPUT.to_string(),
                },
            );
    }

    pub fn mark_done(&mut self, asset_id: &str, stage: Stage, output: &Path) -> Result<()> {
        let output_hash = hash_file(output)?;
        self.state
            .assets
            .entry(asset_id.to_string())
            .or_default()
            .stages
            .insert(stage, StageStatus::Done { output_hash });
        Ok(())
    }

    pub fn mark_failed(&mut self, asset_id: &str, stage: Stage, reason: String) {
        self.state
            .assets
            .entry(asset_id.to_string())
            .or_default()
            .stages
            .insert(stage, StageStatus::Failed { reason });
    }

    pub fn save(&self) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.state)?;
        fs::write(&self.path, json)
            .with_context(|| format!("writing {}", self.path.display()))?;
        Ok(())
    }
}

/// Per-stage run summary.
#[derive(Debug, Default, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub processed: usize,
    pub skipped: usize,
    pub failed: usize,
    pub failures: Vec<(String, String)>,
}

impl std::fmt::Display for StageSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] processed={} skipped={} failed={}",
            self.stage, self.processed, self.skipped, self.failed
        )?;
        for (id, reason) in &self.failures {
            write!(f, "\n  {id}: {reason}")?;
        }
        Ok(())
    }
}
