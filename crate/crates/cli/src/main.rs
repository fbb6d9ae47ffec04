use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use roleframe_cli::clients::provision;
use roleframe_cli::config::{ClientMode, PipelineConfig, TomlThreshold};
use roleframe_cli::evaluate::{run_evaluate, EvaluateArgs, JudgesConfig};
use roleframe_cli::pipeline::{split_manifest, Pipeline};
use roleframe_cli::state::Stage;

#[derive(Parser)]
#[command(name = "roleframe", version, about = "Video-to-role-playing-agent data pipeline")]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonOverrides {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// mock | replay | record | http
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    capture: Option<PathBuf>,
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Adaptively sample frames for every manifest asset.
    Sample {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        max_frames: Option<usize>,
        /// "auto" or an absolute diff threshold.
        #[arg(long, id = "T")]
        t: Option<String>,
        /// Group count for keyframe refinement.
        #[arg(long, id = "G")]
        g: Option<usize>,
    },
    /// Caption assets: segment descriptions plus CoT summary.
    Caption {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long)]
        segments: Option<usize>,
    },
    /// Generate and filter question-answer pairs from captions.
    Dialogue {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        judge_filter: bool,
    },
    /// Emit SFT-ready JSONL training records.
    EmitSft {
        #[command(flatten)]
        common: CommonOverrides,
        /// text-only | single-frame
        #[arg(long)]
        ablation: Option<String>,
    },
    /// Score response files with LLM judges.
    Evaluate {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        contexts: PathBuf,
        #[arg(long)]
        judges: PathBuf,
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
        #[arg(long)]
        ablation: bool,
        /// JSONL of {sample_id, score} human ratings for correlation.
        #[arg(long)]
        human: Option<PathBuf>,
    },
    /// Seeded shuffle of the manifest into train/test splits.
    Split {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long)]
        train: usize,
        #[arg(long)]
        test: usize,
    },
    /// Run sample, caption, dialogue, and emit-sft in order.
    RunAll {
        #[command(flatten)]
        common: CommonOverrides,
    },
}

fn load_config(path: &Option<PathBuf>, common: &CommonOverrides) -> Result<PipelineConfig> {
    let mut config = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = &common.manifest {
        config.manifest = m.clone();
    }
    if let Some(o) = &common.out {
        config.out_root = o.clone();
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(mode) = &common.mode {
        config.clients.mode = match mode.as_str() {
            "mock" => ClientMode::Mock,
            "replay" => ClientMode::Replay,
            "record" => ClientMode::Record,
            "http" => ClientMode::Http,
            other => anyhow::bail!("unknown client mode {other:?}"),
        };
    }
    if let Some(c) = &common.capture {
        config.clients.capture = Some(c.clone());
    }
    if let Some(p) = &common.profiles {
        config.clients.profiles = Some(p.clone());
    }
    if let Some(p) = common.parallelism {
        config.parallelism = p;
    }
    Ok(config)
}

fn run_stages(config: PipelineConfig, stages: &[Stage]) -> Result<()> {
    let provisioned = provision(&config.clients, &config.out_root)?;
    let pipeline = Pipeline::new(config)?;
    for &stage in stages {
        let summary = pipeline.run_stage(stage, &provisioned.client)?;
        println!("{summary}");
    }
    provisioned.finish()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sample {
            common,
            tau,
            max_frames,
            t,
            g,
        } => {
            let mut config = load_config(&cli.config, &common)?;
            if let Some(tau) = tau {
                config.sampler.tau = tau;
            }
            if let Some(mf) = max_frames {
                config.sampler.max_frames = mf;
            }
            if let Some(t) = t {
                config.sampler.t = TomlThreshold::parse(&t)?;
            }
            if let Some(g) = g {
                config.sampler.g = Some(g);
            }
            run_stages(config, &[Stage::Sample])
        }
        Command::Caption { common, segments } => {
            let mut config = load_config(&cli.config, &common)?;
            if let Some(s) = segments {
                config.segment_count = s;
            }
            run_stages(config, &[Stage::Caption])
        }
        Command::Dialogue {
            common,
            temperature,
            judge_filter,
        } => {
            let mut config = load_config(&cli.config, &common)?;
            if let Some(t) = temperature {
                config.temperature = t;
            }
            config.judge_filter |= judge_filter;
            run_stages(config, &[Stage::Dialogue])
        }
        Command::EmitSft { common, ablation } => {
            let mut config = load_config(&cli.config, &common)?;
            if let Some(a) = ablation {
                config.ablation = Some(match a.as_str() {
                    "text-only" => roleframe::profile::Ablation::TextOnly,
                    "single-frame" => roleframe::profile::Ablation::SingleFrame,
                    other => anyhow::bail!("unknown ablation arm {other:?}"),
                });
            }
            run_stages(config, &[Stage::EmitSft])
        }
        Command::Evaluate {
            common,
            responses,
            contexts,
            judges,
            rounds,
            report,
            ablation,
            human,
        } => {
            let config = load_config(&cli.config, &common)?;
            let mut judges = JudgesConfig::load(&judges)?;
            if let Some(r) = rounds {
                judges.rounds = r;
            }
            let provisioned = provision(&config.clients, &config.out_root)?;
            let result = run_evaluate(
                &EvaluateArgs {
                    responses: &responses,
                    contexts: &contexts,
                    judges,
                    ablation,
                    human_scores: human.as_deref(),
                },
                &provisioned.client,
            )?;
            std::fs::write(&report, serde_json::to_string_pretty(&result)?)
                .with_context(|| format!("writing report {}", report.display()))?;
            println!(
                "wrote {} (avg {:.2} over {} metrics)",
                report.display(),
                result.average,
                result.metrics.len()
            );
            provisioned.finish()
        }
        Command::Split { common, train, test } => {
            let config = load_config(&cli.config, &common)?;
            let (train_n, test_n) = split_manifest(
                &config.manifest,
                train,
                test,
                config.seed,
                &config.out_root,
            )?;
            println!("split: {train_n} train, {test_n} test");
            Ok(())
        }
        Command::RunAll { common } => {
            let config = load_config(&cli.config, &common)?;
            run_stages(
                config,
                &[Stage::Sample, Stage::Caption, Stage::Dialogue, Stage::EmitSft],
            )
        }
    }
}
