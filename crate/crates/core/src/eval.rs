//! LLM-judge evaluation: eight metric rubrics, multi-judge multi-round
//! scoring at temperature 0.0, mean-of-means aggregation, report
//! comparison, and human-correlation statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{ChatClient, ChatMessage, ChatRequest, LlmError};
use crate::stats::{correlate, Correlations, StatsError};

pub const JUDGE_PROMPT: &str = include_str!("../prompts/judge.txt");

pub const DEFAULT_ROUNDS: u32 = 3;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("no valid scores for sample {sample_id}, metric {metric:?}")]
    NoValidScores { sample_id: String, metric: MetricId },
    #[error("reports have mismatched sample sets")]
    SampleSetMismatch,
    #[error("reports have mismatched metric sets")]
    MetricSetMismatch,
    #[error("rounds must be >= 1")]
    InvalidRounds,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum MetricId {
    Consistency,
    Hallucination,
    Adherence,
    Fluency,
    HumanLikeness,
    Accuracy,
    Tone,
    /// Ablation-study only; never contributes to the non-ablation
    /// average.
    VideoTextRelevance,
}

impl MetricId {
    /// The seven metrics of the main protocol, in report column order.
    pub fn core() -> [MetricId; 7] {
        [
            MetricId::Consistency,
            MetricId::Hallucination,
            MetricId::Adherence,
            MetricId::Fluency,
            MetricId::HumanLikeness,
            MetricId::Accuracy,
            MetricId::Tone,
        ]
    }

    /// Core metrics plus video-text relevance, for ablation reports.
    pub fn ablation() -> [MetricId; 8] {
        [
            MetricId::Consistency,
            MetricId::Hallucination,
            MetricId::Adherence,
            MetricId::Fluency,
            MetricId::HumanLikeness,
            MetricId::Accuracy,
            MetricId::Tone,
            MetricId::VideoTextRelevance,
        ]
    }

    pub fn rubric(&self) -> &'static str {
        match self {
            MetricId::Consistency => {
                "Does the response stay consistent with the character's persona and the video scene throughout?"
            }
            MetricId::Hallucination => {
                "Does the response avoid inventing facts, events, or details not grounded in the video context? Higher is better (less hallucination)."
            }
            MetricId::Adherence => {
                "Does the response adhere to the role definition and the instructions given?"
            }
            MetricId::Fluency => {
                "Is the response grammatical, natural, and well-formed language?"
            }
            MetricId::HumanLikeness => {
                "Does the response read like something a real person would say, rather than machine-generated text?"
            }
            MetricId::Accuracy => {
                "Are the factual claims in the response accurate with respect to the video context?"
            }
            MetricId::Tone => {
                "Does the response match the tone and emotional register of the character?"
            }
            MetricId::VideoTextRelevance => {
                "Is the response relevant to the visual content of the video rather than only the text context?"
            }
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            MetricId::Consistency => "Cons.",
            MetricId::Hallucination => "Hall.",
            MetricId::Adherence => "Adh.",
            MetricId::Fluency => "Flu.",
            MetricId::HumanLikeness => "Hum.",
            MetricId::Accuracy => "Acc.",
            MetricId::Tone => "Ton.",
            MetricId::VideoTextRelevance => "Rel.",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeScore {
    pub sample_id: String,
    pub metric: MetricId,
    pub judge_id: String,
    pub round: u32,
    /// None when the round produced no parseable in-range score.
    pub score: Option<f64>,
}

/// Last integer token in the judge's output, per the judge prompt
/// contract.
pub fn parse_judge_score(text: &str) -> Option<f64> {
    let mut last: Option<i64> = None;
    let mut current = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_ascii_digit() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                if let Ok(v) = current.parse::<i64>() {
                    last = Some(v);
                }
                current.clear();
            }
        }
    }
    match last {
        Some(v) if (0..=100).contains(&v) => Some(v as f64),
        _ => None,
    }
}

fn render_judge_prompt(metric: MetricId, context: &str, response: &str) -> String {
    JUDGE_PROMPT
        .replace("{metric_name}", &format!("{metric:?}"))
        .replace("{metric_rubric}", metric.rubric())
        .replace("{context}", context)
        .replace("{response}", response)
}

/// Score one (sample, metric) with one judge for `rounds` rounds at
/// temperature 0.0. An unparseable round is retried once, then marked
/// invalid.
pub fn judge_sample(
    sample_id: &str,
    response: &str,
    context: &str,
    metric: MetricId,
    judge: &dyn ChatClient,
    judge_id: &str,
    rounds: u32,
) -> Result<Vec<JudgeScore>, EvalError> {
    if rounds == 0 {
        return Err(EvalError::InvalidRounds);
    }
    let request = ChatRequest {
        messages: vec![ChatMessage::user(render_judge_prompt(
            metric, context, response,
        ))],
        temperature: 0.0,
        max_tokens: 512,
        model_profile: judge_id.to_string(),
    };
    let mut scores = Vec::with_capacity(rounds as usize);
    for round in 1..=rounds {
        let mut score = parse_judge_score(&judge.complete(&request)?.text);
        if score.is_none() {
            // one retry before marking the round invalid
            score = parse_judge_score(&judge.complete(&request)?.text);
        }
        scores.push(JudgeScore {
            sample_id: sample_id.to_string(),
            metric,
            judge_id: judge_id.to_string(),
            round,
            score,
        });
    }
    Ok(scores)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMetricDetail {
    pub sample_id: String,
    pub metric: MetricId,
    /// Mean over rounds, per judge.
    pub per_judge: BTreeMap<String, f64>,
    /// Mean over judges of the per-judge means.
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metrics: Vec<MetricId>,
    /// Per-metric mean over samples.
    pub metric_means: BTreeMap<MetricId, f64>,
    /// Mean of the listed metric columns.
    pub average: f64,
    pub per_sample: Vec<SampleMetricDetail>,
    /// (sample, metric) cells with zero valid scores, excluded from
    /// the means.
    pub excluded: Vec<(String, MetricId)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlations: Option<Correlations>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Aggregate raw judge scores: per sample-metric, mean over rounds then
/// mean over judges; per metric, mean over samples; overall, mean over
/// the metric columns.
pub fn aggregate(scores: &[JudgeScore], metrics: &[MetricId]) -> Result<EvaluationReport, EvalError> {
    let sample_ids: BTreeSet<&String> = scores.iter().map(|s| &s.sample_id).collect();

    let mut per_sample = Vec::new();
    let mut excluded = Vec::new();
    for sample_id in &sample_ids {
        for &metric in metrics {
            let mut by_judge: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for s in scores
                .iter()
                .filter(|s| &&s.sample_id == sample_id && s.metric == metric)
            {
                if let Some(v) = s.score {
                    by_judge.entry(s.judge_id.clone()).or_default().push(v);
                }
            }
            if by_judge.is_empty() {
                excluded.push(((*sample_id).clone(), metric));
                continue;
            }
            let per_judge: BTreeMap<String, f64> = by_judge
                .into_iter()
                .map(|(judge, rounds)| (judge, mean(&rounds)))
                .collect();
            let score = mean(&per_judge.values().cloned().collect::<Vec<_>>());
            per_sample.push(SampleMetricDetail {
                sample_id: (*sample_id).clone(),
                metric,
                per_judge,
                score,
            });
        }
    }

    let mut metric_means = BTreeMap::new();
    for &metric in metrics {
        let column: Vec<f64> = per_sample
            .iter()
            .filter(|d| d.metric == metric)
            .map(|d| d.score)
            .collect();
        if column.is_empty() {
            return Err(EvalError::NoValidScores {
                sample_id: "<all>".into(),
                metric,
            });
        }
        metric_means.insert(metric, mean(&column));
    }
    let average = mean(&metrics.iter().map(|m| metric_means[m]).collect::<Vec<_>>());

    Ok(EvaluationReport {
        metrics: metrics.to_vec(),
        metric_means,
        average,
        per_sample,
        excluded,
        correlations: None,
    })
}

/// Attach human-correlation statistics to a report.
pub fn with_correlations(
    mut report: EvaluationReport,
    human: &[f64],
    machine: &[f64],
) -> Result<EvaluationReport, EvalError> {
    report.correlations = Some(correlate(human, machine)?);
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: MetricId,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDiff {
    pub deltas: Vec<MetricDelta>,
    pub improved: usize,
    pub regressed: usize,
    pub unchanged: usize,
}

/// Per-metric deltas (b - a) between two reports over the same samples
/// and metrics.
pub fn compare_reports(
    a: &EvaluationReport,
    b: &EvaluationReport,
) -> Result<ReportDiff, EvalError> {
    if a.metrics != b.metrics {
        return Err(EvalError::MetricSetMismatch);
    }
    let samples_a: BTreeSet<&String> = a.per_sample.iter().map(|d| &d.sample_id).collect();
    let samples_b: BTreeSet<&String> = b.per_sample.iter().map(|d| &d.sample_id).collect();
    if samples_a != samples_b {
        return Err(EvalError::SampleSetMismatch);
    }
    let mut deltas = Vec::new();
    let (mut improved, mut regressed, mut unchanged) = (0, 0, 0);
    for &metric in &a.metrics {
        let va = a.metric_means[&metric];
        let vb = b.metric_means[&metric];
        let delta = vb - va;
        if delta > 0.0 {
            improved += 1;
        } else if delta < 0.0 {
            regressed += 1;
        } else {
            unchanged += 1;
        }
        deltas.push(MetricDelta {
            metric,
            a: va,
            b: vb,
            delta,
        });
    }
    Ok(ReportDiff {
        deltas,
        improved,
        regressed,
        unchanged,
    })
}
