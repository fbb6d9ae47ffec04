//! Video captioning: uniform segmentation with midpoint representative
//! frames, per-segment descriptions via a chat client, and a
//! chain-of-thought summary agent with chunked fallback for long
//! inputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::llm::{ChatClient, ChatMessage, ChatRequest, FinishReason, LlmError};
use crate::video::{Category, Frame, VideoAsset, VideoError};

pub const SEGMENT_PROMPT: &str = include_str!("../prompts/segment_description.txt");
pub const SUMMARY_PROMPT: &str = include_str!("../prompts/summary_cot.txt");

/// Default segment count for captioning.
pub const DEFAULT_SEGMENT_COUNT: usize = 64;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("empty asset: {0}")]
    EmptyAsset(String),
    #[error("segment count must be >= 1")]
    InvalidSegmentCount,
    #[error("all segment descriptions failed for {0}")]
    AllSegmentsFailed(String),
    #[error("asset {id} failed: only {succeeded}/{total} segments succeeded")]
    TooManyFailures {
        id: String,
        succeeded: usize,
        total: usize,
    },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Video(#[from] VideoError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentDescription {
    pub segment_index: usize,
    pub representative_timestamp_s: f64,
    pub text: String,
    pub model_id: String,
    #[serde(default)]
    pub failed: bool,
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoSummary {
    pub asset_id: String,
    pub segment_descriptions: Vec<SegmentDescription>,
    pub summary_text: String,
    pub prompt_fingerprint: String,
}

pub fn prompt_fingerprint(template: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(template.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Caption max-token tier by category: live 1024, vlog 2048,
/// documentary 4096. Uncategorized assets use the vlog tier.
pub fn max_tokens_for(category: Option<Category>) -> u32 {
    match category {
        Some(Category::Live) => 1024,
        Some(Category::Vlog) | None => 2048,
        Some(Category::Documentary) => 4096,
    }
}

/// A segment with its midpoint representative frame.
#[derive(Debug, Clone)]
pub struct Segment {
    pub index: usize,
    pub span_start_s: f64,
    pub span_end_s: f64,
    pub representative: Frame,
}

/// Split the video into equal time spans and take the midpoint frame of
/// each. Videos with fewer frames than segments get one segment per
/// frame.
pub fn segment_video(
    asset: &VideoAsset,
    segment_count: usize,
) -> Result<Vec<Segment>, AnnotateError> {
    if segment_count == 0 {
        return Err(AnnotateError::InvalidSegmentCount);
    }
    let total = asset.frame_count();
    if total == 0 {
        return Err(AnnotateError::EmptyAsset(asset.id().to_string()));
    }
    if total < segment_count {
        return (0..total)
            .map(|i| {
                let f = asset.frame(i)?;
                let span = asset.duration_s() / total as f64;
                Ok(Segment {
                    index: i,
                    span_start_s: i as f64 * span,
                    span_end_s: (i + 1) as f64 * span,
                    representative: f,
                })
            })
            .collect();
    }
    let span = asset.duration_s() / segment_count as f64;
    (0..segment_count)
        .map(|i| {
            let start = i as f64 * span;
            let mid = start + span / 2.0;
            Ok(Segment {
                index: i,
                span_start_s: start,
                span_end_s: start + span,
                representative: asset.frame_at_time(mid)?,
            })
        })
        .collect()
}

fn render_segment_prompt(segment: &Segment) -> String {
    SEGMENT_PROMPT
        .replace("{segment_index}", &segment.index.to_string())
        .replace(
            "{timestamp}",
            &format!("{:.2}", segment.representative.timestamp_s),
        )
}

/// Describe one segment. Transport failure after the client's retries
/// marks the segment failed rather than aborting the asset; a length
/// finish reason flags truncation.
pub fn describe_segment(
    segment: &Segment,
    client: &dyn ChatClient,
    model_profile: &str,
    max_tokens: u32,
) -> SegmentDescription {
    let request = ChatRequest {
        messages: vec![ChatMessage::user(render_segment_prompt(segment))],
        temperature: 1.0,
        max_tokens,
        model_profile: model_profile.to_string(),
    };
    match client.complete(&request) {
        Ok(resp) if !resp.text.trim().is_empty() => SegmentDescription {
            segment_index: segment.index,
            representative_timestamp_s: segment.representative.timestamp_s,
            text: resp.text,
            model_id: model_profile.to_string(),
            failed: false,
            truncated: resp.finish_reason == FinishReason::Length,
        },
        _ => SegmentDescription {
            segment_index: segment.index,
            representative_timestamp_s: segment.representative.timestamp_s,
            text: String::new(),
            model_id: model_profile.to_string(),
            failed: true,
            truncated: false,
        },
    }
}

#[derive(Debug, Clone)]
pub struct SummarizeConfig {
    pub model_profile: String,
    pub max_tokens: u32,
    /// Character budget for the concatenated descriptions before the
    /// chunked two-level path is taken.
    pub context_char_budget: usize,
    pub chunk_size: usize,
}

impl Default for SummarizeConfig {
    fn default() -> Self {
        Self {
            model_profile: "summary".into(),
            max_tokens: 2048,
            context_char_budget: 48_000,
            chunk_size: 16,
        }
    }
}

fn render_summary_prompt(descriptions: &[&SegmentDescription]) -> String {
    let listed: Vec<String> = descriptions
        .iter()
        .enumerate()
        .map(|(i, d)| format!("[{}] {}", i + 1, d.text))
        .collect();
    SUMMARY_PROMPT.replace("{descriptions}", &listed.join("\n"))
}

fn summarize_once(
    descriptions: &[&SegmentDescription],
    client: &dyn ChatClient,
    config: &SummarizeConfig,
) -> Result<String, AnnotateError> {
    let request = ChatRequest {
        messages: vec![ChatMessage::user(render_summary_prompt(descriptions))],
        temperature: 0.0,
        max_tokens: config.max_tokens,
        model_profile: config.model_profile.clone(),
    };
    Ok(client.complete(&request)?.text)
}

/// Summarize ordered segment descriptions. Inputs over the character
/// budget are summarized in chunks first, then the chunk summaries are
/// summarized.
pub fn summarize(
    asset_id: &str,
    descriptions: &[SegmentDescription],
    client: &dyn ChatClient,
    config: &SummarizeConfig,
) -> Result<VideoSummary, AnnotateError> {
    let ok: Vec<&SegmentDescription> = descriptions.iter().filter(|d| !d.failed).collect();
    if ok.is_empty() {
        return Err(AnnotateError::AllSegmentsFailed(asset_id.to_string()));
    }
    let total_chars: usize = ok.iter().map(|d| d.text.len()).sum();

    let summary_text = if total_chars > config.context_char_budget && ok.len() > config.chunk_size {
        let mut chunk_summaries = Vec::new();
        for chunk in ok.chunks(config.chunk_size) {
            let text = summarize_once(chunk, client, config)?;
            chunk_summaries.push(SegmentDescription {
                segment_index: chunk_summaries.len(),
                representative_timestamp_s: chunk[0].representative_timestamp_s,
                text,
                model_id: config.model_profile.clone(),
                failed: false,
                truncated: false,
            });
        }
        let refs: Vec<&SegmentDescription> = chunk_summaries.iter().collect();
        summarize_once(&refs, client, config)?
    } else {
        summarize_once(&ok, client, config)?
    };

    Ok(VideoSummary {
        asset_id: asset_id.to_string(),
        segment_descriptions: descriptions.to_vec(),
        summary_text,
        prompt_fingerprint: prompt_fingerprint(SUMMARY_PROMPT),
    })
}

/// Full captioning pass for one asset: segment, describe, summarize.
/// The asset fails when fewer than half of its segments produce a
/// description.
pub fn build_summary_context(
    asset: &VideoAsset,
    segment_count: usize,
    client: &dyn ChatClient,
    describe_profile: &str,
    summarize_config: &SummarizeConfig,
) -> Result<VideoSummary, AnnotateError> {
    let segments = segment_video(asset, segment_count)?;
    let max_tokens = max_tokens_for(asset.meta.category);
    let descriptions: Vec<SegmentDescription> = segments
        .iter()
        .map(|s| describe_segment(s, client, describe_profile, max_tokens))
        .collect();

    let succeeded = descriptions.iter().filter(|d| !d.failed).count();
    if succeeded * 2 < descriptions.len() {
        return Err(AnnotateError::TooManyFailures {
            id: asset.id().to_string(),
            succeeded,
            total: descriptions.len(),
        });
    }
    summarize(asset.id(), &descriptions, client, summarize_config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockChatClient;
    use crate::video::{Frame, VideoMeta};

    fn asset(n: usize, fps: f64, duration: f64, category: Option<Category>) -> VideoAsset {
        let frames = (0..n)
            .map(|i| Frame::new(i, i as f64 / fps, 2, 2, 1, vec![0; 4]))
            .collect();
        VideoAsset::from_frames(
            VideoMeta {
                id: "a".into(),
                fps,
                duration_s: duration,
                width: 2,
                height: 2,
                category,
            },
            frames,
        )
    }

    #[test]
    fn midpoint_representatives() {
        let a = asset(64, 1.0, 64.0, None);
        let segs = segment_video(&a, 64).unwrap();
        assert_eq!(segs.len(), 64);
        // spans [i, i+1); midpoint i+0.5 floors to frame i
        for (i, s) in segs.iter().enumerate() {
            assert_eq!(s.representative.index, i);
            assert!(s.representative.timestamp_s >= s.span_start_s);
            assert!(s.representative.timestamp_s < s.span_end_s);
        }
    }

    #[test]
    fn shrink_when_fewer_frames_than_segments() {
        let a = asset(10, 1.0, 10.0, None);
        let segs = segment_video(&a, 64).unwrap();
        assert_eq!(segs.len(), 10);
    }

    #[test]
    fn span_arithmetic_long_video() {
        let a = asset(640, 1.0, 640.0, None);
        let segs = segment_video(&a, 64).unwrap();
        assert_eq!(segs.len(), 64);
        // spans of 10s, midpoints at t=5,15,...
        for (i, s) in segs.iter().enumerate() {
            assert_eq!(s.representative.timestamp_s, (i * 10 + 5) as f64);
        }
        let times: Vec<f64> = segs.iter().map(|s| s.representative.timestamp_s).collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn token_tiers() {
        assert_eq!(max_tokens_for(Some(Category::Live)), 1024);
        assert_eq!(max_tokens_for(Some(Category::Vlog)), 2048);
        assert_eq!(max_tokens_for(Some(Category::Documentary)), 4096);
    }

    #[test]
    fn describe_segment_carries_tier_and_fixture() {
        let a = asset(4, 1.0, 4.0, Some(Category::Live));
        let segs = segment_video(&a, 2).unwrap();
        let mock = MockChatClient::new().with_default_fn(|_| "a frame description".into());
        let d = describe_segment(&segs[0], &mock, "m1", max_tokens_for(a.meta.category));
        assert_eq!(d.text, "a frame description");
        assert!(!d.failed);
        let captured = mock.captured_requests();
        assert_eq!(captured[0].max_tokens, 1024);
    }

    #[test]
    fn empty_response_marks_failed() {
        let a = asset(4, 1.0, 4.0, None);
        let segs = segment_video(&a, 2).unwrap();
        let mock = MockChatClient::new().with_default_fn(|_| "".into());
        let d = describe_segment(&segs[0], &mock, "m1", 2048);
        assert!(d.failed);
    }

    fn desc(i: usize, text: &str) -> SegmentDescription {
        SegmentDescription {
            segment_index: i,
            representative_timestamp_s: i as f64,
            text: text.into(),
            model_id: "m".into(),
            failed: false,
            truncated: false,
        }
    }

    #[test]
    fn summarize_preserves_order() {
        let descriptions = vec![desc(0, "ALPHA"), desc(1, "BETA"), desc(2, "GAMMA")];
        let mock = MockChatClient::new().with_default_fn(|r| r.messages[0].content.clone());
        let s = summarize("a", &descriptions, &mock, &SummarizeConfig::default()).unwrap();
        let pa = s.summary_text.find("ALPHA").unwrap();
        let pb = s.summary_text.find("BETA").unwrap();
        let pg = s.summary_text.find("GAMMA").unwrap();
        assert!(pa < pb && pb < pg);
    }

    #[test]
    fn summarize_all_failed_errors() {
        let mut d = desc(0, "");
        d.failed = true;
        let mock = MockChatClient::new().with_default_fn(|_| "s".into());
        assert!(matches!(
            summarize("a", &[d], &mock, &SummarizeConfig::default()),
            Err(AnnotateError::AllSegmentsFailed(_))
        ));
    }

    #[test]
    fn over_budget_takes_chunked_path() {
        let descriptions: Vec<SegmentDescription> = (0..64)
            .map(|i| desc(i, &"x".repeat(100)))
            .collect();
        let mock = MockChatClient::new().with_default_fn(|_| "chunk summary".into());
        let config = SummarizeConfig {
            context_char_budget: 1000,
            chunk_size: 16,
            ..SummarizeConfig::default()
        };
        summarize("a", &descriptions, &mock, &config).unwrap();
        // 64/16 chunk calls plus the final summary-of-summaries call.
        assert_eq!(mock.captured_requests().len(), 5);
    }

    #[test]
    fn summary_context_deterministic_with_mock() {
        let a = asset(8, 1.0, 8.0, None);
        let mk = || MockChatClient::new().with_default_fn(|r| {
            format!("echo:{}", r.messages[0].content.len())
        });
        let s1 = build_summary_context(&a, 4, &mk(), "m", &SummarizeConfig::default()).unwrap();
        let s2 = build_summary_context(&a, 4, &mk(), "m", &SummarizeConfig::default()).unwrap();
        assert_eq!(s1.summary_text, s2.summary_text);
        assert_eq!(s1.prompt_fingerprint, s2.prompt_fingerprint);
    }
}
