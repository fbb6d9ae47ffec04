//! Stage execution: manifest-driven batch runs with per-asset
//! isolation, resumable via the state ledger.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use roleframe::annotate::{build_summary_context, SummarizeConfig, VideoSummary};
use roleframe::dialogue::{
    build_generation_prompt, clean_formatting, filter_pairs, generate_pairs, judge_filter,
    DialoguePair, DiscardReason, PairStatus, DEFAULT_BAD_PREFIXES,
};
use roleframe::embed::LocalEmbedder;
use roleframe::llm::ChatClient;
use roleframe::profile::{emit_sft_records, write_sft_jsonl, Ablation, SftRecord};
use roleframe::sampler::{sample, Provenance, Strategy};
use roleframe::video::{load_asset, read_manifest, ManifestEntry, VideoAsset};

use crate::config::PipelineConfig;
use crate::state::{Stage, StageSummary, StateStore};

/// `samples/<id>.json` payload.
#[derive(Debug, Serialize, Deserialize)]
pub struct SampleOutput {
    pub id: String,
    pub strategy: Strategy,
    pub frames: Vec<SampleFrameRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleFrameRecord {
    pub index: usize,
    pub timestamp_s: f64,
    pub provenance: Provenance,
    pub image: String,
}

/// `dialogues/<id>.jsonl` line format.
#[derive(Debug, Serialize, Deserialize)]
pub struct DialogueLine {
    pub q: String,
    pub a: String,
    pub status: String,
    pub generator_model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discard_reason: Option<String>,
}

impl DialogueLine {
    fn from_pair(pair: &DialoguePair) -> Self {
        let (status, discard_reason) = match &pair.status {
            PairStatus::Raw => ("raw".to_string(), None),
            PairStatus::Extracted => ("extracted".to_string(), None),
            PairStatus::FilteredOk => ("filtered_ok".to_string(), None),
            PairStatus::Discarded { reason } => {
                let reason = match reason {
                    DiscardReason::BadPrefix => "bad_prefix",
                    DiscardReason::EmptyQuestion => "empty_question",
                    DiscardReason::EmptyAnswer => "empty_answer",
                    DiscardReason::JudgedIrrelevant => "judged_irrelevant",
                };
                ("discarded".to_string(), Some(reason.to_string()))
            }
        };
        Self {
            q: pair.question.clone(),
            a: pair.answer.clone(),
            status,
            generator_model: pair.generator_model.clone(),
            discard_reason,
        }
    }
}

pub const DEFAULT_ROLE_INSTRUCTION: &str = "You are the main character appearing in this video. \
Stay in character and answer as they would, drawing on what the video shows.";

fn default_exemplars() -> Vec<(String, String)> {
    vec![
        (
            "Where was this filmed? The view is amazing!".into(),
            "Thanks! I shot this up on the ridge just after sunrise, totally worth the climb.".into(),
        ),
        (
            "What's the song playing in the background?".into(),
            "Haha everyone asks that! It's just a loop I made myself, glad you like it.".into(),
        ),
    ]
}

pub struct Pipeline {
    pub config: PipelineConfig,
    manifest: Vec<ManifestEntry>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        fs::create_dir_all(&config.out_root).with_context(|| {
            format!("creating output root {}", config.out_root.display())
        })?;
        let manifest = read_manifest(&config.manifest)
            .with_context(|| format!("reading manifest {}", config.manifest.display()))?;
        Ok(Self { config, manifest })
    }

    fn out(&self, sub: &str) -> PathBuf {
        self.config.out_root.join(sub)
    }

    fn stage_output(&self, stage: Stage, id: &str) -> PathBuf {
        match stage {
            Stage::Sample => self.out("samples").join(format!("{id}.json")),
            Stage::Caption => self.out("captions").join(format!("{id}.json")),
            Stage::Dialogue => self.out("dialogues").join(format!("{id}.jsonl")),
            Stage::EmitSft => self.out("sft").join(format!("{id}.jsonl")),
        }
    }

    fn load_assets(&self) -> Vec<(String, Result<VideoAsset>)> {
        self.manifest
            .iter()
            .map(|entry| match load_asset(entry) {
                Ok(asset) => (asset.id().to_string(), Ok(asset)),
                Err(e) => {
                    // fall back to the meta file name for the ledger key
                    let id = entry
                        .meta
                        .parent()
                        .and_then(|p| p.file_name())
                        .map(|n| n.to_string_lossy().to_string())
                        .unwrap_or_else(|| entry.meta.display().to_string());
                    (id, Err(e.into()))
                }
            })
            .collect()
    }

    pub fn run_stage(&self, stage: Stage, client: &dyn ChatClient) -> Result<StageSummary> {
        let mut store = StateStore::open(&self.config.out_root, self.config.seed)?;
        let mut summary = StageSummary {
            stage: stage.name().to_string(),
            ..StageSummary::default()
        };
        fs::create_dir_all(self.stage_output(stage, "x").parent().unwrap())?;

        // Decide per asset what needs doing, then run the pending jobs
        // (in parallel when configured) and fold results back into the
        // ledger under single-writer discipline.
        let mut jobs: Vec<(usize, String, Result<VideoAsset>, PathBuf)> = Vec::new();
        for (asset_index, (id, asset)) in self.load_assets().into_iter().enumerate() {
            let output = self.stage_output(stage, &id);
            if store.is_done(&id, stage, &output) {
                summary.skipped += 1;
                continue;
            }
            if let Some(upstream) = stage.upstream() {
                let upstream_out = self.stage_output(upstream, &id);
                if !store.is_done(&id, upstream, &upstream_out) {
                    let reason = format!("upstream stage {} not done", upstream.name());
                    store.mark_failed(&id, stage, reason.clone());
                    summary.failed += 1;
                    summary.failures.push((id, reason));
                    continue;
                }
            }
            jobs.push((asset_index, id, asset, output));
        }

        let run_one = |asset_index: usize, asset: &Result<VideoAsset>, output: &Path| match (
            asset, stage,
        ) {
            (Err(e), _) => Err(anyhow::anyhow!("{e}")),
            (Ok(asset), Stage::Sample) => self.do_sample(asset, output),
            (Ok(asset), Stage::Caption) => self.do_caption(asset, client, output),
            (Ok(asset), Stage::Dialogue) => self.do_dialogue(asset, asset_index, client, output),
            (Ok(asset), Stage::EmitSft) => self.do_emit_sft(asset, output),
        };

        let results: Vec<(String, PathBuf, Result<()>)> = if self.config.parallelism <= 1 {
            jobs.into_iter()
                .map(|(i, id, asset, output)| {
                    let r = run_one(i, &asset, &output);
                    (id, output, r)
                })
                .collect()
        } else {
            let chunk = jobs.len().div_ceil(self.config.parallelism).max(1);
            std::thread::scope(|scope| {
                let handles: Vec<_> = jobs
                    .chunks(chunk)
                    .map(|batch| {
                        scope.spawn(move || {
                            batch
                                .iter()
                                .map(|(i, id, asset, output)| {
                                    let r = run_one(*i, asset, output);
                                    (id.clone(), output.clone(), r)
                                })
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("worker panicked"))
                    .collect()
            })
        };

        for (id, output, result) in results {
            match result {
                Ok(()) => {
                    if output.exists() {
                        store.mark_done(&id, stage, &output)?;
                    } else {
                        // legitimate empty result (e.g. zero kept pairs)
                        store.mark_done_absent(&id, stage);
                    }
                    summary.processed += 1;
                }
                Err(e) => {
                    store.mark_failed(&id, stage, e.to_string());
                    summary.failed += 1;
                    summary.failures.push((id, e.to_string()));
                }
            }
        }
        store.save()?;
        Ok(summary)
    }

    fn do_sample(&self, asset: &VideoAsset, output: &Path) -> Result<()> {
        let config = self.config.sampler.to_sampler_config()?;
        let sampled = sample(asset, &config, &LocalEmbedder)?;

        let frames_dir = output
            .parent()
            .unwrap()
            .join(format!("{}_frames", asset.id()));
        fs::create_dir_all(&frames_dir)?;
        let mut frames = Vec::with_capacity(sampled.len());
        for sf in &sampled.frames {
            let name = format!("{:06}.png", sf.frame.index);
            let path = frames_dir.join(&name);
            let color = match sf.frame.channels {
                1 => image::ExtendedColorType::L8,
                _ => image::ExtendedColorType::Rgb8,
            };
            image::save_buffer(
                &path,
                &sf.frame.pixels,
                sf.frame.width,
                sf.frame.height,
                color,
            )?;
            frames.push(SampleFrameRecord {
                index: sf.frame.index,
                timestamp_s: sf.frame.timestamp_s,
                provenance: sf.provenance,
                image: format!("{}_frames/{name}", asset.id()),
            });
        }
        let payload = SampleOutput {
            id: asset.id().to_string(),
            strategy: sampled.strategy,
            frames,
        };
        fs::write(output, serde_json::to_string_pretty(&payload)?)?;
        Ok(())
    }

    fn do_caption(
        &self,
        asset: &VideoAsset,
        client: &dyn ChatClient,
        output: &Path,
    ) -> Result<()> {
        let summarize_config = SummarizeConfig {
            model_profile: self.config.clients.summary_profile.clone(),
            ..SummarizeConfig::default()
        };
        let summary = build_summary_context(
            asset,
            self.config.segment_count,
            client,
            &self.config.clients.describe_profile,
            &summarize_config,
        )?;
        fs::write(output, serde_json::to_string_pretty(&summary)?)?;
        Ok(())
    }

    fn do_dialogue(
        &self,
        asset: &VideoAsset,
        asset_index: usize,
        client: &dyn ChatClient,
        output: &Path,
    ) -> Result<()> {
        let caption_path = self.stage_output(Stage::Caption, asset.id());
        let summary: VideoSummary =
            serde_json::from_str(&fs::read_to_string(&caption_path)?)?;

        let prompt =
            build_generation_prompt(&summary, DEFAULT_ROLE_INSTRUCTION, &default_exemplars())?;
        let generators = &self.config.clients.generators;
        let generator = &generators[asset_index % generators.len()];
        let outcome = generate_pairs(
            &prompt,
            client,
            asset.id(),
            generator,
            self.config.temperature,
            4096,
        )?;

        let (kept, mut discarded) = filter_pairs(outcome.pairs, DEFAULT_BAD_PREFIXES);
        let mut kept: Vec<DialoguePair> = kept.into_iter().map(clean_formatting).collect();
        if self.config.judge_filter {
            let (k, d) = judge_filter(kept, &summary.summary_text, client, "judge-filter")?;
            kept = k;
            discarded.extend(d);
        }

        let mut lines = String::new();
        for pair in kept.iter().chain(discarded.iter()) {
            lines.push_str(&serde_json::to_string(&DialogueLine::from_pair(pair))?);
            lines.push('\n');
        }
        fs::write(output, lines)?;
        Ok(())
    }

    fn do_emit_sft(&self, asset: &VideoAsset, output: &Path) -> Result<()> {
        let dialogue_path = self.stage_output(Stage::Dialogue, asset.id());
        let mut pairs = Vec::new();
        for line in fs::read_to_string(&dialogue_path)?.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: DialogueLine = serde_json::from_str(line)?;
            if parsed.status == "filtered_ok" {
                pairs.push(DialoguePair {
                    question: parsed.q,
                    answer: parsed.a,
                    asset_id: asset.id().to_string(),
                    generator_model: parsed.generator_model,
                    status: PairStatus::FilteredOk,
                });
            }
        }
        if pairs.is_empty() {
            return Ok(()); // zero records, no file written
        }

        let video_ref = match self.config.ablation {
            Some(Ablation::SingleFrame) => {
                let sample_path = self.stage_output(Stage::Sample, asset.id());
                let sample: SampleOutput =
                    serde_json::from_str(&fs::read_to_string(&sample_path)?)?;
                // frame choice flows from the run seed
                let mut rng =
                    ChaCha8Rng::seed_from_u64(self.config.seed ^ asset.id().len() as u64);
                let pick = rng.gen_range(0..sample.frames.len());
                format!("samples/{}", sample.frames[pick].image)
            }
            _ => format!("samples/{}_frames", asset.id()),
        };
        let records: Vec<SftRecord> =
            emit_sft_records(&pairs, asset.id(), &video_ref, self.config.ablation)?;
        let mut buf = Vec::new();
        write_sft_jsonl(&records, &mut buf)?;
        fs::write(output, buf)?;
        Ok(())
    }

    /// Stages in dependency order.
    pub fn run_all(&self, client: &dyn ChatClient) -> Result<Vec<StageSummary>> {
        [Stage::Sample, Stage::Caption, Stage::Dialogue, Stage::EmitSft]
            .into_iter()
            .map(|stage| self.run_stage(stage, client))
            .collect()
    }
}

/// Seeded shuffle of the manifest into train/test splits.
pub fn split_manifest(
    manifest: &Path,
    train: usize,
    test: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<(usize, usize)> {
    let mut entries = read_manifest(manifest)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    entries.shuffle(&mut rng);
    let train_n = train.min(entries.len());
    let test_n = test.min(entries.len() - train_n);
    fs::create_dir_all(out_dir)?;
    let write = |name: &str, slice: &[ManifestEntry]| -> Result<()> {
        let mut text = String::new();
        for e in slice {
            text.push_str(&serde_json::to_string(e)?);
            text.push('\n');
        }
        fs::write(out_dir.join(name), text)?;
        Ok(())
    };
    write("train.jsonl", &entries[..train_n])?;
    write("test.jsonl", &entries[train_n..train_n + test_n])?;
    Ok((train_n, test_n))
}
