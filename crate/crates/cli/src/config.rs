//! Pipeline configuration: `pipeline.toml` plus flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use roleframe::profile::Ablation;
use roleframe::sampler::{DiffThreshold, SamplerConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub out_root: PathBuf,
    pub seed: u64,
    pub segment_count: usize,
    pub temperature: f64,
    pub parallelism: usize,
    pub judge_filter: bool,
    pub ablation: Option<Ablation>,
    pub sampler: SamplerToml,
    pub clients: ClientsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.jsonl"),
            out_root: PathBuf::from("out"),
            seed: 0,
            segment_count: 64,
            temperature: 1.0,
            parallelism: 1,
            judge_filter: false,
            ablation: None,
            sampler: SamplerToml::default(),
            clients: ClientsConfig::default(),
        }
    }
}

/// TOML-facing sampler knobs; `t` accepts "auto" or a number.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerToml {
    pub tau: f64,
    pub max_frames: usize,
    pub t: TomlThreshold,
    pub g: Option<usize>,
}

impl Default for SamplerToml {
    fn default() -> Self {
        Self {
            tau: 0.85,
            max_frames: 128,
            t: TomlThreshold::Word("auto".into()),
            g: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TomlThreshold {
    Number(f64),
    Word(String),
}

impl TomlThreshold {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "auto" {
            Ok(TomlThreshold::Word("auto".into()))
        } else {
            let v: f64 = s
                .parse()
                .with_context(|| format!("invalid threshold {s:?}: expected \"auto\" or a number"))?;
            Ok(TomlThreshold::Number(v))
        }
    }

    pub fn to_threshold(&self) -> Result<DiffThreshold> {
        match self {
            TomlThreshold::Number(v) => Ok(DiffThreshold::Fixed(*v)),
            TomlThreshold::Word(w) if w == "auto" => Ok(DiffThreshold::Auto),
            TomlThreshold::Word(w) => bail!("invalid threshold {w:?}: expected \"auto\" or a number"),
        }
    }
}

impl SamplerToml {
    pub fn to_sampler_config(&self) -> Result<SamplerConfig> {
        Ok(SamplerConfig {
            similarity_tau: self.tau,
            max_frames: self.max_frames,
            diff_threshold: self.t.to_threshold()?,
            group_count: self.g,
            ..SamplerConfig::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientMode {
    /// Deterministic built-in mock; no network.
    Mock,
    /// Replay a capture file; unseen requests error.
    Replay,
    /// Record through the mock into a capture file.
    Record,
    /// Real HTTP endpoints from the profiles file.
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientsConfig {
    pub mode: ClientMode,
    pub capture: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    /// Generator profiles round-robined across assets.
    pub generators: Vec<String>,
    pub describe_profile: String,
    pub summary_profile: String,
}

impl Default for ClientsConfig {
    fn default() -> Self {
        Self {
            mode: ClientMode::Mock,
            capture: None,
            profiles: None,
            generators: vec!["generator-a".into(), "generator-b".into()],
            describe_profile: "annotator".into(),
            summary_profile: "summary".into(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segment_count == 0 {
            bail!("segment_count must be >= 1");
        }
        if self.parallelism == 0 {
            bail!("parallelism must be >= 1");
        }
        self.sampler.to_sampler_config()?.validate()?;
        match self.clients.mode {
            ClientMode::Replay | ClientMode::Record => {
                if self.clients.capture.is_none() {
                    bail!("clients.capture is required in replay/record mode");
                }
            }
            ClientMode::Http => {
                if self.clients.profiles.is_none() {
                    bail!("clients.profiles is required in http mode");
                }
            }
            ClientMode::Mock => {}
        }
        Ok(())
    }
}
