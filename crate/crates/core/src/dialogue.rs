//! Question-answer pair generation from video summaries and the
//! multi-stage filter: None handling, answer-initial bad-prefix
//! discard, regex block extraction, and formatting cleanup.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

use crate::annotate::{prompt_fingerprint, VideoSummary};
use crate::llm::{ChatClient, ChatMessage, ChatRequest, LlmError};

pub const DIALOGUE_PROMPT: &str = include_str!("../prompts/dialogue_generation.txt");

pub const DEFAULT_INSTRUCTION: &str = "Generate diverse question-answer pairs grounded in the \
video description, with answers written strictly in the character's voice.";

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("empty summary for asset {0}")]
    EmptySummary(String),
    #[error("ICL exemplars required")]
    MissingExemplars,
    #[error("pair not in filtered_ok state: {0:?}")]
    NotFiltered(PairStatus),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairStatus {
    Raw,
    Extracted,
    FilteredOk,
    Discarded { reason: DiscardReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    BadPrefix,
    EmptyQuestion,
    EmptyAnswer,
    JudgedIrrelevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialoguePair {
    pub question: String,
    pub answer: String,
    pub asset_id: String,
    pub generator_model: String,
    pub status: PairStatus,
}

/// The four-part generation prompt plus the None escape clause.
#[derive(Debug, Clone)]
pub struct GenerationPrompt {
    pub role_definition: String,
    pub video_description: String,
    pub icl_examples: Vec<(String, String)>,
    pub instruction: String,
}

impl GenerationPrompt {
    pub fn render(&self) -> String {
        let examples: Vec<String> = self
            .icl_examples
            .iter()
            .map(|(q, a)| format!("Q: {q}\nA: {a}"))
            .collect();
        DIALOGUE_PROMPT
            .replace("{role_definition}", &self.role_definition)
            .replace("{video_description}", &self.video_description)
            .replace("{icl_examples}", &examples.join("\n\n"))
            .replace("{instruction}", &self.instruction)
    }

    pub fn fingerprint() -> String {
        prompt_fingerprint(DIALOGUE_PROMPT)
    }
}

pub fn build_generation_prompt(
    summary: &VideoSummary,
    role_definition: &str,
    exemplars: &[(String, String)],
) -> Result<GenerationPrompt, DialogueError> {
    if summary.summary_text.trim().is_empty() {
        return Err(DialogueError::EmptySummary(summary.asset_id.clone()));
    }
    if exemplars.is_empty() {
        return Err(DialogueError::MissingExemplars);
    }
    Ok(GenerationPrompt {
        role_definition: role_definition.to_string(),
        video_description: summary.summary_text.clone(),
        icl_examples: exemplars.to_vec(),
        instruction: DEFAULT_INSTRUCTION.to_string(),
    })
}

/// Outcome of one generation call.
#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    pub pairs: Vec<DialoguePair>,
    /// The model declined with a literal "None" (bad context).
    pub declined: bool,
    /// Output produced no extractable pairs.
    pub malformed: bool,
}

pub fn generate_pairs(
    prompt: &GenerationPrompt,
    client: &dyn ChatClient,
    asset_id: &str,
    model_profile: &str,
    temperature: f64,
    max_tokens: u32,
) -> Result<GenerationOutcome, DialogueError> {
    let request = ChatRequest {
        messages: vec![ChatMessage::user(prompt.render())],
        temperature,
        max_tokens,
        model_profile: model_profile.to_string(),
    };
    let response = client.complete(&request)?;
    let text = response.text.trim();
    if text.eq_ignore_ascii_case("none") || text.eq_ignore_ascii_case("none.") {
        return Ok(GenerationOutcome {
            pairs: Vec::new(),
            declined: true,
            malformed: false,
        });
    }
    let pairs = extract_pairs(&response.text, asset_id, model_profile);
    let malformed = pairs.is_empty();
    Ok(GenerationOutcome {
        pairs,
        declined: false,
        malformed,
    })
}

fn question_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:Q|Question)\s*[:.]\s*(.*)$").unwrap())
}

fn answer_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:A|Answer)\s*[:.]\s*(.*)$").unwrap())
}

/// Pull Q/A blocks out of raw model output. A block is a `Q:` line
/// followed by an `A:` line; the answer runs until the next `Q:` line
/// or end of text. Text outside well-formed blocks is ignored.
pub fn extract_pairs(raw_output: &str, asset_id: &str, model: &str) -> Vec<DialoguePair> {
    let mut pairs = Vec::new();
    let mut question: Option<String> = None;
    let mut answer: Option<Vec<String>> = None;

    let mut flush = |question: &mut Option<String>, answer: &mut Option<Vec<String>>| {
        if let (Some(q), Some(a)) = (question.take(), answer.take()) {
            let a = a.join("\n").trim().to_string();
            if !q.is_empty() && !a.is_empty() {
                pairs.push(DialoguePair {
                    question: q,
                    answer: a,
                    asset_id: asset_id.to_string(),
                    generator_model: model.to_string(),
                    status: PairStatus::Extracted,
                });
            }
        }
        *question = None;
        *answer = None;
    };

    for line in raw_output.lines() {
        if let Some(c) = question_line_regex().captures(line) {
            flush(&mut question, &mut answer);
            question = Some(c[1].trim().to_string());
        } else if let Some(c) = answer_line_regex().captures(line) {
            if question.is_some() && answer.is_none() {
                answer = Some(vec![c[1].trim().to_string()]);
            }
        } else if let Some(a) = answer.as_mut() {
            a.push(line.to_string());
        }
    }
    flush(&mut question, &mut answer);
    pairs
}

/// Answer-initial phrases that void a pair. The first five come from
/// the published filter; the rest close the "other errors" clause.
pub const DEFAULT_BAD_PREFIXES: &[&str] = &[
    "As an AI language model,",
    "does not present",
    "does not show",
    "does not demonstrate",
    "I'm sorry",
    "I cannot",
];

/// Split pairs into kept (filtered_ok) and discarded, with reasons.
/// Prefix matching is case-insensitive and answer-initial after
/// leading whitespace.
pub fn filter_pairs(
    pairs: Vec<DialoguePair>,
    bad_prefixes: &[&str],
) -> (Vec<DialoguePair>, Vec<DialoguePair>) {
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    for mut pair in pairs {
        let answer = pair.answer.trim_start();
        let lower = answer.to_lowercase();
        let reason = if pair.question.trim().is_empty() {
            Some(DiscardReason::EmptyQuestion)
        } else if answer.is_empty() {
            Some(DiscardReason::EmptyAnswer)
        } else if bad_prefixes
            .iter()
            .any(|p| lower.starts_with(&p.to_lowercase()))
        {
            Some(DiscardReason::BadPrefix)
        } else {
            None
        };
        match reason {
            Some(reason) => {
                pair.status = PairStatus::Discarded { reason };
                discarded.push(pair);
            }
            None => {
                pair.status = PairStatus::FilteredOk;
                kept.push(pair);
            }
        }
    }
    (kept, discarded)
}

fn cleanup_text(text: &str) -> String {
    static ENUM_RE: OnceLock<Regex> = OnceLock::new();
    static BOLD_RE: OnceLock<Regex> = OnceLock::new();
    static WS_RE: OnceLock<Regex> = OnceLock::new();
    let enum_re = ENUM_RE.get_or_init(|| Regex::new(r"^\s*(?:\d+\s*[.)]\s*|-\s+)+").unwrap());
    let bold_re = BOLD_RE.get_or_init(|| Regex::new(r"\*\*(.*?)\*\*").unwrap());
    let ws_re = WS_RE.get_or_init(|| Regex::new(r"\s+").unwrap());

    // Bold unwrapping first: it may expose a leading enumeration
    // marker that must still be stripped in the same pass.
    let text = bold_re.replace_all(text, "$1");
    let text = enum_re.replace(&text, "");
    ws_re.replace_all(text.trim(), " ").to_string()
}

/// Strip enumeration markers and bold wrappers, collapse whitespace.
/// Idempotent.
pub fn clean_formatting(pair: DialoguePair) -> DialoguePair {
    DialoguePair {
        question: cleanup_text(&pair.question),
        answer: cleanup_text(&pair.answer),
        ..pair
    }
}

/// Optional LLM-judged relevance pass over kept pairs.
pub fn judge_filter(
    pairs: Vec<DialoguePair>,
    summary_text: &str,
    client: &dyn ChatClient,
    model_profile: &str,
) -> Result<(Vec<DialoguePair>, Vec<DialoguePair>), DialogueError> {
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    for mut pair in pairs {
        let request = ChatRequest {
            messages: vec![ChatMessage::user(format!(
                "Video description:\n{summary_text}\n\nQuestion: {}\nAnswer: {}\n\nIs this \
                 question-answer pair relevant to the video description and suitable for \
                 training a role-playing agent? Reply with exactly YES or NO.",
                pair.question, pair.answer
            ))],
            temperature: 0.0,
            max_tokens: 8,
            model_profile: model_profile.to_string(),
        };
        let verdict = client.complete(&request)?.text;
        if verdict.trim().eq_ignore_ascii_case("yes") {
            kept.push(pair);
        } else {
            pair.status = PairStatus::Discarded {
                reason: DiscardReason::JudgedIrrelevant,
            };
            discarded.push(pair);
        }
    }
    Ok((kept, discarded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockChatClient;

    fn summary(text: &str) -> VideoSummary {
        VideoSummary {
            asset_id: "a".into(),
            segment_descriptions: vec![],
            summary_text: text.into(),
            prompt_fingerprint: "f".into(),
        }
    }

    fn exemplars() -> Vec<(String, String)> {
        vec![("What are you cooking?".into(), "An omelette!".into())]
    }

    fn pair(q: &str, a: &str) -> DialoguePair {
        DialoguePair {
            question: q.into(),
            answer: a.into(),
            asset_id: "a".into(),
            generator_model: "m".into(),
            status: PairStatus::Extracted,
        }
    }

    #[test]
    fn prompt_has_all_sections_in_order() {
        let p = build_generation_prompt(&summary("a cooking video"), "You are the chef", &exemplars())
            .unwrap();
        let text = p.render();
        let role = text.find("You are the chef").unwrap();
        let desc = text.find("a cooking video").unwrap();
        let icl = text.find("What are you cooking?").unwrap();
        let inst = text.find(DEFAULT_INSTRUCTION).unwrap();
        assert!(role < desc && desc < icl && icl < inst);
        assert!(text.contains("return None"));
    }

    #[test]
    fn prompt_preconditions() {
        assert!(matches!(
            build_generation_prompt(&summary("  "), "r", &exemplars()),
            Err(DialogueError::EmptySummary(_))
        ));
        assert!(matches!(
            build_generation_prompt(&summary("ok"), "r", &[]),
            Err(DialogueError::MissingExemplars)
        ));
    }

    #[test]
    fn none_output_declines_without_error() {
        let p = build_generation_prompt(&summary("s"), "r", &exemplars()).unwrap();
        let mock = MockChatClient::new().with_default_fn(|_| "None".into());
        let out = generate_pairs(&p, &mock, "a", "m", 1.0, 4096).unwrap();
        assert!(out.declined);
        assert!(out.pairs.is_empty());
    }

    #[test]
    fn wellformed_blocks_extracted() {
        let p = build_generation_prompt(&summary("s"), "r", &exemplars()).unwrap();
        let mock = MockChatClient::new()
            .with_default_fn(|_| "Q: one?\nA: first.\nQ: two?\nA: second.\nQ: three?\nA: third.".into());
        let out = generate_pairs(&p, &mock, "a", "m", 1.0, 4096).unwrap();
        assert_eq!(out.pairs.len(), 3);
        assert!(!out.malformed);
    }

    #[test]
    fn malformed_output_flags_asset() {
        let p = build_generation_prompt(&summary("s"), "r", &exemplars()).unwrap();
        let mock = MockChatClient::new().with_default_fn(|_| "just rambling text".into());
        let out = generate_pairs(&p, &mock, "a", "m", 1.0, 4096).unwrap();
        assert!(out.malformed);
        assert!(out.pairs.is_empty());
    }

    #[test]
    fn extract_basic_and_noise() {
        let pairs = extract_pairs("Q: hi?\nA: hello.", "a", "m");
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].question, "hi?");
        assert_eq!(pairs[0].answer, "hello.");

        let noisy = "Sure, here you go:\nQ: one?\nA: first.\nSome commentary.\nQuestion: two?\nAnswer: second\nline two.";
        let pairs = extract_pairs(noisy, "a", "m");
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].answer, "second\nline two.");
    }

    #[test]
    fn extract_skips_malformed_blocks() {
        // 10 blocks, 2 malformed (missing answer line / missing colon).
        let mut text = String::new();
        for i in 0..8 {
            text.push_str(&format!("Q: q{i}?\nA: a{i}.\n"));
        }
        text.push_str("Q: orphan question with no answer\n");
        text.push_str("Q broken line\nA also broken\n");
        let pairs = extract_pairs(&text, "a", "m");
        assert_eq!(pairs.len(), 8);
    }

    #[test]
    fn extraction_is_block_local() {
        let left = "Q: one?\nA: first.";
        let right = "Q: two?\nA: second.";
        let combined = format!("{left}\n{right}");
        let mut separate = extract_pairs(left, "a", "m");
        separate.extend(extract_pairs(right, "a", "m"));
        assert_eq!(extract_pairs(&combined, "a", "m"), separate);
    }

    #[test]
    fn bad_prefix_discarded_with_reason() {
        let (kept, discarded) = filter_pairs(
            vec![
                pair("q?", "As an AI language model, I cannot say."),
                pair("q?", "The video does not show the ending."),
                pair("q?", "I run daily."),
            ],
            DEFAULT_BAD_PREFIXES,
        );
        assert_eq!(kept.len(), 2);
        assert_eq!(discarded.len(), 1);
        assert_eq!(
            discarded[0].status,
            PairStatus::Discarded {
                reason: DiscardReason::BadPrefix
            }
        );
        assert!(kept.iter().all(|p| p.status == PairStatus::FilteredOk));
    }

    #[test]
    fn prefix_match_is_initial_and_case_insensitive() {
        let (kept, discarded) = filter_pairs(
            vec![
                pair("q?", "  does NOT show anything."),
                pair("q?", "It does not show anything."),
            ],
            DEFAULT_BAD_PREFIXES,
        );
        assert_eq!(discarded.len(), 1);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].answer, "It does not show anything.");
    }

    #[test]
    fn counts_are_conserved() {
        let input: Vec<DialoguePair> = (0..10)
            .map(|i| pair(&format!("q{i}?"), if i % 3 == 0 { "I cannot." } else { "fine." }))
            .collect();
        let n = input.len();
        let (kept, discarded) = filter_pairs(input, DEFAULT_BAD_PREFIXES);
        assert_eq!(kept.len() + discarded.len(), n);
    }

    #[test]
    fn cleaning_rules() {
        let p = clean_formatting(pair("q?", "**Great question!** I think so."));
        assert_eq!(p.answer, "Great question! I think so.");

        let p = clean_formatting(pair("q?", "1. I run daily."));
        assert_eq!(p.answer, "I run daily.");

        let p = clean_formatting(pair("q?", "2) - nested  markers"));
        assert_eq!(p.answer, "nested markers");

        let plain = pair("plain q?", "plain answer.");
        assert_eq!(clean_formatting(plain.clone()), plain);
    }

    #[test]
    fn cleaning_is_idempotent() {
        let cases = [
            "**bold** start",
            "1. enumerated",
            "   spaced    out   ",
            "mixed **1.** stuff",
        ];
        for c in cases {
            let once = clean_formatting(pair("q", c));
            let twice = clean_formatting(once.clone());
            assert_eq!(once, twice, "not idempotent on {c:?}");
        }
    }

    #[test]
    fn judge_filter_splits_on_verdict() {
        let mock = MockChatClient::new().with_default_fn(|r| {
            if r.messages[0].content.contains("good") {
                "YES".into()
            } else {
                "NO".into()
            }
        });
        let (kept, discarded) = judge_filter(
            vec![pair("good q?", "fine."), pair("weird q?", "fine.")],
            "summary",
            &mock,
            "judge",
        )
        .unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(discarded.len(), 1);
        assert_eq!(
            discarded[0].status,
            PairStatus::Discarded {
                reason: DiscardReason::JudgedIrrelevant
            }
        );
    }
}
