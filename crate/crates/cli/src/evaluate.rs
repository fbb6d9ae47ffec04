//! The `evaluate` subcommand: score response files with LLM judges and
//! write an aggregated report.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use roleframe::eval::{
    aggregate, judge_sample, with_correlations, EvaluationReport, JudgeScore, MetricId,
};
use roleframe::llm::ChatClient;

#[derive(Debug, Deserialize)]
pub struct ResponseLine {
    pub sample_id: String,
    pub model_id: String,
    pub response: String,
}

#[derive(Debug, Deserialize)]
pub struct ContextLine {
    pub sample_id: String,
    pub context: String,
}

#[derive(Debug, Deserialize)]
pub struct HumanScoreLine {
    pub sample_id: String,
    pub score: f64,
}

/// `judges.toml`: judge profile names and round count.
#[derive(Debug, Serialize, Deserialize)]
pub struct JudgesConfig {
    pub judges: Vec<String>,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
}

fn default_rounds() -> u32 {
    roleframe::eval::DEFAULT_ROUNDS
}

impl JudgesConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading judges config {}", path.display()))?;
        let config: JudgesConfig = toml::from_str(&text)
            .with_context(|| format!("parsing judges config {}", path.display()))?;
        if config.judges.is_empty() {
            bail!("judges config lists no judges");
        }
        if config.rounds == 0 {
            bail!("rounds must be >= 1");
        }
        Ok(config)
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).with_context(|| format!("parsing line in {}", path.display())))
        .collect()
}

pub struct EvaluateArgs<'a> {
    pub responses: &'a Path,
    pub contexts: &'a Path,
    pub judges: JudgesConfig,
    pub ablation: bool,
    pub human_scores: Option<&'a Path>,
}

pub fn run_evaluate(
    args: &EvaluateArgs<'_>,
    client: &dyn ChatClient,
) -> Result<EvaluationReport> {
    let responses: Vec<ResponseLine> = read_jsonl(args.responses)?;
    let contexts: Vec<ContextLine> = read_jsonl(args.contexts)?;
    let context_of = |sample_id: &str| -> Result<&str> {
        contexts
            .iter()
            .find(|c| c.sample_id == sample_id)
            .map(|c| c.context.as_str())
            .with_context(|| format!("no context for sample {sample_id}"))
    };

    let metrics: Vec<MetricId> = if args.ablation {
        MetricId::ablation().to_vec()
    } else {
        MetricId::core().to_vec()
    };

    let mut scores: Vec<JudgeScore> = Vec::new();
    for response in &responses {
        let context = context_of(&response.sample_id)?;
        for &metric in &metrics {
            for judge_id in &args.judges.judges {
                scores.extend(judge_sample(
                    &response.sample_id,
                    &response.response,
                    context,
                    metric,
                    client,
                    judge_id,
                    args.judges.rounds,
                )?);
            }
        }
    }

    let mut report = aggregate(&scores, &metrics)?;

    if let Some(human_path) = args.human_scores {
        let human_lines: Vec<HumanScoreLine> = read_jsonl(human_path)?;
        // machine vector: per-sample mean over metrics, matched by id
        let mut human = Vec::new();
        let mut machine = Vec::new();
        for line in &human_lines {
            let cells: Vec<f64> = report
                .per_sample
                .iter()
                .filter(|d| d.sample_id == line.sample_id)
                .map(|d| d.score)
                .collect();
            if !cells.is_empty() {
                human.push(line.score);
                machine.push(cells.iter().sum::<f64>() / cells.len() as f64);
            }
        }
        report = with_correlations(report, &human, &machine)?;
    }
    Ok(report)
}
