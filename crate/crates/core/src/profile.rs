//! Role profiles and SFT emission: ordered frame-token prefixes
//! (dynamic), summary context (static), and JSONL training records
//! carrying the `<video>` insertion token.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{DialoguePair, PairStatus};
use crate::sampler::SampledFrames;

pub const VIDEO_TOKEN: &str = "<video>";
pub const IMAGE_TOKEN: &str = "<image>";

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("empty frame set")]
    EmptyFrames,
    #[error("frames out of temporal order at position {0}")]
    OutOfOrder(usize),
    #[error("pair not in filtered_ok state: {0:?}")]
    NotFiltered(PairStatus),
    #[error("empty user query")]
    EmptyQuery,
    #[error("summary context required at inference time")]
    MissingSummary,
    #[error("record {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered frame-placeholder tokens standing in for the sampled frames.
#[derive(Debug, Clone)]
pub struct DynamicProfile {
    pub asset_id: String,
    pub frame_timestamps: Vec<f64>,
    pub token_sequence: Vec<String>,
}

pub fn build_dynamic_profile(
    asset_id: &str,
    frames: &SampledFrames,
) -> Result<DynamicProfile, ProfileError> {
    if frames.is_empty() {
        return Err(ProfileError::EmptyFrames);
    }
    let timestamps: Vec<f64> = frames.frames.iter().map(|f| f.frame.timestamp_s).collect();
    for (i, w) in timestamps.windows(2).enumerate() {
        if w[0] >= w[1] {
            return Err(ProfileError::OutOfOrder(i + 1));
        }
    }
    let token_sequence = vec![IMAGE_TOKEN.to_string(); timestamps.len()];
    Ok(DynamicProfile {
        asset_id: asset_id.to_string(),
        frame_timestamps: timestamps,
        token_sequence,
    })
}

/// Text-side role context used at inference.
#[derive(Debug, Clone)]
pub struct StaticContext {
    pub summary_text: String,
    pub role_instruction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftTurn {
    pub from: String,
    pub value: String,
}

/// One serialized fine-tune record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub id: String,
    pub video: String,
    pub conversations: Vec<SftTurn>,
}

/// Ablation arms for record emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Drop the video reference and token entirely.
    TextOnly,
    /// Keep the token but mark the video ref as a single seeded-random
    /// frame.
    SingleFrame,
}

/// Turn filtered, cleaned pairs into single-turn SFT records. The
/// human turn is prefixed with the `<video>` token and a newline.
pub fn emit_sft_records(
    pairs: &[DialoguePair],
    asset_id: &str,
    video_ref: &str,
    ablation: Option<Ablation>,
) -> Result<Vec<SftRecord>, ProfileError> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            if pair.status != PairStatus::FilteredOk {
                return Err(ProfileError::NotFiltered(pair.status.clone()));
            }
            let (video, human_value) = match ablation {
                Some(Ablation::TextOnly) => (String::new(), pair.question.clone()),
                _ => (
                    video_ref.to_string(),
                    format!("{VIDEO_TOKEN}\n{}", pair.question),
                ),
            };
            Ok(SftRecord {
                id: format!("{asset_id}-{i:04}"),
                video,
                conversations: vec![
                    SftTurn {
                        from: "human".into(),
                        value: human_value,
                    },
                    SftTurn {
                        from: "gpt".into(),
                        value: pair.answer.clone(),
                    },
                ],
            })
        })
        .collect()
}

pub fn write_sft_jsonl<W: Write>(records: &[SftRecord], mut out: W) -> Result<(), ProfileError> {
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| ProfileError::MalformedRecord {
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_sft_jsonl<R: BufRead>(input: R) -> Result<Vec<SftRecord>, ProfileError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SftRecord =
            serde_json::from_str(&line).map_err(|e| ProfileError::MalformedRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Recover (question, answer) texts from a record, stripping the video
/// token prefix.
pub fn record_to_pair_text(record: &SftRecord) -> Option<(String, String)> {
    let human = record.conversations.iter().find(|t| t.from == "human")?;
    let assistant = record.conversations.iter().find(|t| t.from == "gpt")?;
    let question = human
        .value
        .strip_prefix(&format!("{VIDEO_TOKEN}\n"))
        .unwrap_or(&human.value)
        .to_string();
    Some((question, assistant.value.clone()))
}

/// Structured inference prompt: role instruction, summary context,
/// visual prefix, user query.
#[derive(Debug, Clone, PartialEq)]
pub struct InferencePrompt {
    pub role_instruction: String,
    pub summary_context: Option<String>,
    pub visual_prefix: Vec<String>,
    pub user_query: String,
}

impl InferencePrompt {
    pub fn render(&self) -> String {
        let mut parts = vec![self.role_instruction.clone()];
        if let Some(ctx) = &self.summary_context {
            parts.push(format!("[Video Summary]\n{ctx}"));
        }
        if !self.visual_prefix.is_empty() {
            parts.push(self.visual_prefix.join(""));
        }
        parts.push(self.user_query.clone());
        parts.join("\n\n")
    }
}

pub fn build_inference_prompt(
    dynamic: &DynamicProfile,
    static_ctx: Option<&StaticContext>,
    user_query: &str,
) -> Result<InferencePrompt, ProfileError> {
    if user_query.trim().is_empty() {
        return Err(ProfileError::EmptyQuery);
    }
    let role_instruction = static_ctx
        .map(|c| c.role_instruction.clone())
        .unwrap_or_default();
    let summary_context = match static_ctx {
        Some(c) => {
            if c.summary_text.trim().is_empty() {
                return Err(ProfileError::MissingSummary);
            }
            Some(c.summary_text.clone())
        }
        None => None, // ablation arm: no summary context
    };
    Ok(InferencePrompt {
        role_instruction,
        summary_context,
        visual_prefix: dynamic.token_sequence.clone(),
        user_query: user_query.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{Provenance, SampledFrame, SampledFrames, Strategy};
    use crate::video::Frame;

    fn sampled(n: usize) -> SampledFrames {
        SampledFrames {
            strategy: Strategy::Dense,
            frames: (0..n)
                .map(|i| SampledFrame {
                    frame: Frame::new(i, i as f64, 2, 2, 1, vec![0; 4]),
                    provenance: Provenance::Candidate,
                })
                .collect(),
        }
    }

    fn ok_pair(q: &str, a: &str) -> DialoguePair {
        DialoguePair {
            question: q.into(),
            answer: a.into(),
            asset_id: "a".into(),
            generator_model: "m".into(),
            status: PairStatus::FilteredOk,
        }
    }

    #[test]
    fn one_token_per_frame() {
        let p = build_dynamic_profile("a", &sampled(3)).unwrap();
        assert_eq!(p.token_sequence.len(), 3);
        assert!(p.token_sequence.iter().all(|t| t == IMAGE_TOKEN));

        let p = build_dynamic_profile("a", &sampled(128)).unwrap();
        assert_eq!(p.token_sequence.len(), 128);
    }

    #[test]
    fn shuffled_frames_rejected() {
        let mut s = sampled(3);
        s.frames.swap(0, 2);
        assert!(matches!(
            build_dynamic_profile("a", &s),
            Err(ProfileError::OutOfOrder(_))
        ));
        let empty = SampledFrames {
            strategy: Strategy::Dense,
            frames: vec![],
        };
        assert!(matches!(
            build_dynamic_profile("a", &empty),
            Err(ProfileError::EmptyFrames)
        ));
    }

    #[test]
    fn sft_record_shape() {
        let records =
            emit_sft_records(&[ok_pair("what?", "this.")], "vid1", "videos/vid1.mp4", None)
                .unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.conversations[0].from, "human");
        assert_eq!(r.conversations[0].value, "<video>\nwhat?");
        assert_eq!(r.conversations[1].from, "gpt");
        assert_eq!(r.conversations[1].value, "this.");
        assert_eq!(r.conversations[0].value.matches(VIDEO_TOKEN).count(), 1);
    }

    #[test]
    fn zero_pairs_zero_records() {
        assert!(emit_sft_records(&[], "v", "p", None).unwrap().is_empty());
    }

    #[test]
    fn unfiltered_pair_rejected() {
        let mut p = ok_pair("q", "a");
        p.status = PairStatus::Raw;
        assert!(matches!(
            emit_sft_records(&[p], "v", "p", None),
            Err(ProfileError::NotFiltered(_))
        ));
    }

    #[test]
    fn jsonl_roundtrip_preserves_text() {
        let pairs = vec![
            ok_pair("how are \"you\"?", "fine,\nthanks."),
            ok_pair("unicode? émojis 🎥", "ünïcode answer"),
        ];
        let records = emit_sft_records(&pairs, "v", "v.mp4", None).unwrap();
        let mut buf = Vec::new();
        write_sft_jsonl(&records, &mut buf).unwrap();
        let parsed = read_sft_jsonl(buf.as_slice()).unwrap();
        assert_eq!(parsed, records);
        for (record, pair) in parsed.iter().zip(&pairs) {
            let (q, a) = record_to_pair_text(record).unwrap();
            assert_eq!(q, pair.question);
            assert_eq!(a, pair.answer);
        }
    }

    #[test]
    fn text_only_ablation_drops_token() {
        let records = emit_sft_records(
            &[ok_pair("q?", "a.")],
            "v",
            "v.mp4",
            Some(Ablation::TextOnly),
        )
        .unwrap();
        assert_eq!(records[0].video, "");
        assert!(!records[0].conversations[0].value.contains(VIDEO_TOKEN));
        assert_eq!(records[0].conversations[0].value, "q?");
    }

    #[test]
    fn inference_prompt_composition() {
        let dynamic = build_dynamic_profile("a", &sampled(2)).unwrap();
        let ctx = StaticContext {
            summary_text: "the summary".into(),
            role_instruction: "be the chef".into(),
        };
        let p = build_inference_prompt(&dynamic, Some(&ctx), "hello?").unwrap();
        let text = p.render();
        let role = text.find("be the chef").unwrap();
        let sum = text.find("the summary").unwrap();
        let tokens = text.find("<image><image>").unwrap();
        let query = text.find("hello?").unwrap();
        assert!(role < sum && sum < tokens && tokens < query);

        assert!(matches!(
            build_inference_prompt(&dynamic, Some(&ctx), "  "),
            Err(ProfileError::EmptyQuery)
        ));
    }

    #[test]
    fn no_summary_ablation_only_drops_summary() {
        let dynamic = build_dynamic_profile("a", &sampled(2)).unwrap();
        let ctx = StaticContext {
            summary_text: "the summary".into(),
            role_instruction: "be the chef".into(),
        };
        let with = build_inference_prompt(&dynamic, Some(&ctx), "hello?").unwrap();
        let without = build_inference_prompt(&dynamic, None, "hello?").unwrap();
        assert!(without.summary_context.is_none());
        assert_eq!(with.visual_prefix, without.visual_prefix);
        assert_eq!(with.user_query, without.user_query);

        let empty_ctx = StaticContext {
            summary_text: " ".into(),
            role_instruction: "r".into(),
        };
        assert!(matches!(
            build_inference_prompt(&dynamic, Some(&empty_ctx), "q"),
            Err(ProfileError::MissingSummary)
        ));
    }
}
