//! Adaptive temporal sampling: regime selection by duration, dense and
//! sparse paths, and the three-step keyframe pipeline (candidate
//! thresholding, group refinement, similarity merging) under a hard
//! frame cap.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, FrameSimilarity};
use crate::video::{Frame, VideoAsset, VideoError};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("nonpositive duration: {0}")]
    NonpositiveDuration(f64),
    #[error("empty asset: {0}")]
    EmptyAsset(String),
    #[error("group count must be positive, got {0}")]
    InvalidGroupCount(i64),
    #[error("frame dimension mismatch between frames {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("similarity threshold must lie in [0, 1], got {0}")]
    InvalidTau(f64),
    #[error("embedding failed for adjacent pair ({left}, {right}): {source}")]
    Embedding {
        left: usize,
        right: usize,
        source: EmbedError,
    },
    #[error(transparent)]
    Video(#[from] VideoError),
}

/// Difference threshold for candidate collection: a fixed value or
/// mean + 1 stddev of the consecutive-diff sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffThreshold {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Upper duration bound (inclusive) for the dense regime.
    pub dense_max_s: f64,
    /// Upper duration bound (inclusive) for the sparse regime.
    pub sparse_max_s: f64,
    /// Sparse sampling period.
    pub sparse_period_s: f64,
    pub diff_threshold: DiffThreshold,
    /// Group count for candidate refinement; `None` means
    /// `min(64, |C|)`.
    pub group_count: Option<usize>,
    pub similarity_tau: f64,
    pub max_frames: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            dense_max_s: 5.0,
            sparse_max_s: 600.0,
            sparse_period_s: 5.0,
            diff_threshold: DiffThreshold::Auto,
            group_count: None,
            similarity_tau: 0.85,
            max_frames: 128,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.dense_max_s <= 0.0 || self.sparse_max_s <= self.dense_max_s {
            return Err(SamplerError::NonpositiveDuration(self.dense_max_s));
        }
        if !(0.0..=1.0).contains(&self.similarity_tau) {
            return Err(SamplerError::InvalidTau(self.similarity_tau));
        }
        if self.max_frames == 0 {
            return Err(SamplerError::InvalidGroupCount(0));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Dense,
    Sparse,
    Keyframe,
}

/// Which pipeline step selected a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Candidate,
    GroupRepresentative,
    PostMerge,
}

#[derive(Debug, Clone)]
pub struct SampledFrame {
    pub frame: Frame,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct SampledFrames {
    pub strategy: Strategy,
    pub frames: Vec<SampledFrame>,
}

impl SampledFrames {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateStage {
    /// Step 1 output.
    Initial,
    /// Step 2 output (group representatives).
    Refined,
    /// Step 3 output (post-merge keyframes).
    Merged,
}

/// Ordered candidate frames carried between keyframe pipeline steps.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub stage: CandidateStage,
    pub frames: Vec<Frame>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Dense iff duration ≤ dense_max; sparse iff dense_max < duration ≤
/// sparse_max; keyframe otherwise.
pub fn select_strategy(duration_s: f64, config: &SamplerConfig) -> Result<Strategy, SamplerError> {
    if duration_s <= 0.0 {
        return Err(SamplerError::NonpositiveDuration(duration_s));
    }
    Ok(if duration_s <= config.dense_max_s {
        Strategy::Dense
    } else if duration_s <= config.sparse_max_s {
        Strategy::Sparse
    } else {
        Strategy::Keyframe
    })
}

/// Sum over all pixels of absolute grayscale intensity differences.
pub fn frame_difference(a: &Frame, b: &Frame) -> Result<u64, SamplerError> {
    if !a.same_shape(b) {
        return Err(SamplerError::DimensionMismatch(a.index, b.index));
    }
    let mut total: u64 = 0;
    for i in 0..a.pixel_count() {
        total += (a.gray_at(i) as i32 - b.gray_at(i) as i32).unsigned_abs() as u64;
    }
    Ok(total)
}

/// Every source frame, then the cap.
pub fn dense_sample(asset: &VideoAsset, config: &SamplerConfig) -> Result<SampledFrames, SamplerError> {
    if asset.frame_count() == 0 {
        return Err(SamplerError::EmptyAsset(asset.id().to_string()));
    }
    let frames = asset
        .frames()
        .map(|f| {
            Ok(SampledFrame {
                frame: f?,
                provenance: Provenance::Candidate,
            })
        })
        .collect::<Result<Vec<_>, SamplerError>>()?;
    Ok(apply_cap(
        SampledFrames {
            strategy: Strategy::Dense,
            frames,
        },
        config.max_frames,
    ))
}

/// One frame per `period_s` at t = 0, period, 2·period, … ≤ duration.
pub fn sparse_sample(
    asset: &VideoAsset,
    period_s: f64,
    max_frames: usize,
) -> Result<SampledFrames, SamplerError> {
    if period_s <= 0.0 {
        return Err(SamplerError::NonpositiveDuration(period_s));
    }
    if asset.frame_count() == 0 {
        return Err(SamplerError::EmptyAsset(asset.id().to_string()));
    }
    let mut frames = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * period_s;
        if t > asset.duration_s() {
            break;
        }
        frames.push(SampledFrame {
            frame: asset.frame_at_time(t)?,
            provenance: Provenance::Candidate,
        });
        k += 1;
    }
    Ok(apply_cap(
        SampledFrames {
            strategy: Strategy::Sparse,
            frames,
        },
        max_frames,
    ))
}

/// Mean + 1 stddev (population) of the consecutive-diff sequence.
pub fn auto_threshold(diffs: &[u64]) -> f64 {
    if diffs.is_empty() {
        return 0.0;
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().map(|&d| d as f64).sum::<f64>() / n;
    let var = diffs
        .iter()
        .map(|&d| {
            let x = d as f64 - mean;
            x * x
        })
        .sum::<f64>()
        / n;
    mean + var.sqrt()
}

/// Step 1: 1-fps uniform samples; frame i joins the candidate set iff
/// its diff to the previous sample exceeds the threshold. The first
/// sample is always a candidate.
pub fn collect_candidates(
    asset: &VideoAsset,
    config: &SamplerConfig,
) -> Result<CandidateSet, SamplerError> {
    if asset.frame_count() == 0 {
        return Err(SamplerError::EmptyAsset(asset.id().to_string()));
    }
    let mut samples = Vec::new();
    let last_t = asset.duration_s().floor() as usize;
    for t in 0..=last_t {
        let t = t as f64;
        if t > asset.duration_s() {
            break;
        }
        samples.push(asset.frame_at_time(t)?);
    }
    // Drop a duplicated final sample when duration lands exactly on a
    // frame the previous second already covered.
    samples.dedup_by_key(|f| f.index);

    let mut diffs = Vec::with_capacity(samples.len().saturating_sub(1));
    for pair in samples.windows(2) {
        diffs.push(frame_difference(&pair[0], &pair[1])?);
    }
    let threshold = match config.diff_threshold {
        DiffThreshold::Fixed(t) => t,
        DiffThreshold::Auto => auto_threshold(&diffs),
    };

    let mut frames = vec![samples[0].clone()];
    for (i, diff) in diffs.iter().enumerate() {
        if *diff as f64 > threshold {
            frames.push(samples[i + 1].clone());
        }
    }
    Ok(CandidateSet {
        stage: CandidateStage::Initial,
        frames,
    })
}

/// Step 2: partition candidates into `group_count` contiguous groups
/// (remainder to the leading groups) and keep one representative per
/// group: the frame with the maximum summed difference to the rest of
/// its group, earliest timestamp on ties.
pub fn refine_groups(
    candidates: &CandidateSet,
    group_count: usize,
) -> Result<CandidateSet, SamplerError> {
    if group_count == 0 {
        return Err(SamplerError::InvalidGroupCount(0));
    }
    let n = candidates.frames.len();
    let g = group_count.min(n);
    let base = n / g;
    let rem = n % g;

    let mut frames = Vec::with_capacity(g);
    let mut start = 0usize;
    for gi in 0..g {
        let size = base + usize::from(gi < rem);
        let group = &candidates.frames[start..start + size];
        start += size;

        let mut best = 0usize;
        let mut best_score = 0u64;
        for (i, fi) in group.iter().enumerate() {
            let mut score = 0u64;
            for (j, fj) in group.iter().enumerate() {
                if i != j {
                    score += frame_difference(fi, fj)?;
                }
            }
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        frames.push(group[best].clone());
    }
    Ok(CandidateSet {
        stage: CandidateStage::Refined,
        frames,
    })
}

/// Step 3: left-to-right scan over adjacent pairs; when similarity
/// exceeds tau the right frame is merged away and the scan restarts.
/// Terminates when a full pass removes nothing.
pub fn merge_similar(
    candidates: &CandidateSet,
    similarity: &dyn FrameSimilarity,
    tau: f64,
) -> Result<CandidateSet, SamplerError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(SamplerError::InvalidTau(tau));
    }
    let mut frames = candidates.frames.clone();
    'restart: loop {
        for i in 0..frames.len().saturating_sub(1) {
            let s = similarity
                .similarity(&frames[i], &frames[i + 1])
                .map_err(|source| SamplerError::Embedding {
                    left: frames[i].index,
                    right: frames[i + 1].index,
                    source,
                })?;
            if s > tau {
                frames.remove(i + 1);
                continue 'restart;
            }
        }
        break;
    }
    Ok(CandidateSet {
        stage: CandidateStage::Merged,
        frames,
    })
}

/// Uniform index-space subsampling to `max_frames`, keeping the first
/// and last frames.
pub fn apply_cap(sampled: SampledFrames, max_frames: usize) -> SampledFrames {
    let n = sampled.frames.len();
    if n <= max_frames {
        return sampled;
    }
    let mut frames = Vec::with_capacity(max_frames);
    if max_frames == 1 {
        frames.push(sampled.frames[0].clone());
    } else {
        for i in 0..max_frames {
            let src = ((i as f64) * ((n - 1) as f64) / ((max_frames - 1) as f64)).round() as usize;
            frames.push(sampled.frames[src].clone());
        }
    }
    SampledFrames {
        strategy: sampled.strategy,
        frames,
    }
}

/// Dispatch on regime; keyframe path is candidates → groups → merge →
/// cap.
pub fn sample(
    asset: &VideoAsset,
    config: &SamplerConfig,
    similarity: &dyn FrameSimilarity,
) -> Result<SampledFrames, SamplerError> {
    config.validate()?;
    match select_strategy(asset.duration_s(), config)? {
        Strategy::Dense => dense_sample(asset, config),
        Strategy::Sparse => sparse_sample(asset, config.sparse_period_s, config.max_frames),
        Strategy::Keyframe => {
            let candidates = collect_candidates(asset, config)?;
            let g = config.group_count.unwrap_or(64).min(candidates.len()).max(1);
            let refined = refine_groups(&candidates, g)?;
            let merged = merge_similar(&refined, similarity, config.similarity_tau)?;
            let frames = merged
                .frames
                .into_iter()
                .map(|frame| SampledFrame {
                    frame,
                    provenance: Provenance::PostMerge,
                })
                .collect();
            Ok(apply_cap(
                SampledFrames {
                    strategy: Strategy::Keyframe,
                    frames,
                },
                config.max_frames,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbedError;
    use crate::video::{Frame, VideoMeta};
    use std::collections::HashMap;

    fn solid(index: usize, t: f64, value: u8) -> Frame {
        Frame::new(index, t, 4, 4, 1, vec![value; 16])
    }

    fn asset(frames: Vec<Frame>, fps: f64, duration_s: f64) -> VideoAsset {
        VideoAsset::from_frames(
            VideoMeta {
                id: "t".into(),
                fps,
                duration_s,
                width: 4,
                height: 4,
                category: None,
            },
            frames,
        )
    }

    /// Similarity read from an explicit table keyed by frame indices.
    struct TableSimilarity(HashMap<(usize, usize), f64>);

    impl FrameSimilarity for TableSimilarity {
        fn similarity(&self, a: &Frame, b: &Frame) -> Result<f64, EmbedError> {
            let key = (a.index.min(b.index), a.index.max(b.index));
            Ok(*self.0.get(&key).unwrap_or(&0.0))
        }
    }

    struct ConstSimilarity(f64);

    impl FrameSimilarity for ConstSimilarity {
        fn similarity(&self, _: &Frame, _: &Frame) -> Result<f64, EmbedError> {
            Ok(self.0)
        }
    }

    #[test]
    fn strategy_dispatch() {
        let cfg = SamplerConfig::default();
        assert_eq!(select_strategy(3.0, &cfg).unwrap(), Strategy::Dense);
        assert_eq!(select_strategy(120.0, &cfg).unwrap(), Strategy::Sparse);
        assert_eq!(select_strategy(700.0, &cfg).unwrap(), Strategy::Keyframe);
        assert!(select_strategy(0.0, &cfg).is_err());
    }

    #[test]
    fn dense_identity_under_cap() {
        let frames = (0..30).map(|i| solid(i, i as f64 / 10.0, 0)).collect();
        let a = asset(frames, 10.0, 3.0);
        let out = dense_sample(&a, &SamplerConfig::default()).unwrap();
        assert_eq!(out.len(), 30);
    }

    #[test]
    fn dense_caps_at_128() {
        let frames = (0..150).map(|i| solid(i, i as f64 / 30.0, 0)).collect();
        let a = asset(frames, 30.0, 5.0);
        let out = dense_sample(&a, &SamplerConfig::default()).unwrap();
        assert_eq!(out.len(), 128);
    }

    #[test]
    fn sparse_counts() {
        let frames = (0..13).map(|i| solid(i, i as f64, 0)).collect();
        let a = asset(frames, 1.0, 12.0);
        let out = sparse_sample(&a, 5.0, 128).unwrap();
        let times: Vec<f64> = out.frames.iter().map(|f| f.frame.timestamp_s).collect();
        assert_eq!(times, vec![0.0, 5.0, 10.0]);

        let frames = (0..5).map(|i| solid(i, i as f64, 0)).collect();
        let a = asset(frames, 1.0, 4.0);
        assert_eq!(sparse_sample(&a, 5.0, 128).unwrap().len(), 1);
    }

    #[test]
    fn sparse_600s_is_121_frames() {
        let frames = (0..600).map(|i| solid(i, i as f64, 0)).collect();
        let a = asset(frames, 1.0, 600.0);
        assert_eq!(sparse_sample(&a, 5.0, 128).unwrap().len(), 121);
    }

    #[test]
    fn frame_difference_basics() {
        let a = solid(0, 0.0, 7);
        assert_eq!(frame_difference(&a, &a).unwrap(), 0);

        let x = Frame::new(0, 0.0, 2, 2, 1, vec![0, 0, 0, 0]);
        let y = Frame::new(1, 1.0, 2, 2, 1, vec![1, 2, 3, 4]);
        assert_eq!(frame_difference(&x, &y).unwrap(), 10);
        assert_eq!(
            frame_difference(&x, &y).unwrap(),
            frame_difference(&y, &x).unwrap()
        );

        let z = Frame::new(2, 2.0, 3, 3, 1, vec![0; 9]);
        assert!(frame_difference(&x, &z).is_err());
    }

    #[test]
    fn frame_difference_matches_bruteforce() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let pa: Vec<u8> = (0..64).map(|_| rng.gen()).collect();
            let pb: Vec<u8> = (0..64).map(|_| rng.gen()).collect();
            let a = Frame::new(0, 0.0, 8, 8, 1, pa.clone());
            let b = Frame::new(1, 1.0, 8, 8, 1, pb.clone());
            let mut expected = 0u64;
            for row in 0..8 {
                for col in 0..8 {
                    let i = row * 8 + col;
                    expected += (pa[i] as i64 - pb[i] as i64).unsigned_abs();
                }
            }
            assert_eq!(frame_difference(&a, &b).unwrap(), expected);
        }
    }

    fn three_scene_asset() -> VideoAsset {
        // 700 frames at 1 fps, scene changes at t=100 and t=200.
        let frames = (0..700)
            .map(|i| {
                let v = if i < 100 {
                    10
                } else if i < 200 {
                    120
                } else {
                    240
                };
                solid(i, i as f64, v)
            })
            .collect();
        asset(frames, 1.0, 700.0)
    }

    #[test]
    fn candidates_all_identical() {
        let frames = (0..700).map(|i| solid(i, i as f64, 50)).collect();
        let a = asset(frames, 1.0, 700.0);
        let cfg = SamplerConfig {
            diff_threshold: DiffThreshold::Fixed(1.0),
            ..SamplerConfig::default()
        };
        let c = collect_candidates(&a, &cfg).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.frames[0].index, 0);
    }

    #[test]
    fn candidates_three_scenes_fixed_threshold() {
        let a = three_scene_asset();
        let cfg = SamplerConfig {
            diff_threshold: DiffThreshold::Fixed(100.0),
            ..SamplerConfig::default()
        };
        let c = collect_candidates(&a, &cfg).unwrap();
        let idx: Vec<usize> = c.frames.iter().map(|f| f.index).collect();
        assert_eq!(idx, vec![0, 100, 200]);
    }

    #[test]
    fn candidates_auto_threshold() {
        let a = three_scene_asset();
        let cfg = SamplerConfig {
            diff_threshold: DiffThreshold::Auto,
            ..SamplerConfig::default()
        };
        // Oracle: diffs are 0 except two jumps of 16*110 and 16*120.
        // mean+stddev sits far above 0 and below both jumps.
        let diffs: Vec<u64> = {
            let mut d = vec![0u64; 699];
            d[99] = 16 * 110;
            d[199] = 16 * 120;
            d
        };
        let t = auto_threshold(&diffs);
        assert!(t > 0.0 && t < 16.0 * 110.0);
        let c = collect_candidates(&a, &cfg).unwrap();
        let idx: Vec<usize> = c.frames.iter().map(|f| f.index).collect();
        assert_eq!(idx, vec![0, 100, 200]);
    }

    #[test]
    fn refine_degenerate_cases() {
        let frames: Vec<Frame> = (0..4).map(|i| solid(i, i as f64, i as u8 * 10)).collect();
        let c = CandidateSet {
            stage: CandidateStage::Initial,
            frames: frames.clone(),
        };
        // |C| == G
        let r = refine_groups(&c, 4).unwrap();
        assert_eq!(
            r.frames.iter().map(|f| f.index).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
        // |C| = 1, G = 4
        let c1 = CandidateSet {
            stage: CandidateStage::Initial,
            frames: frames[..1].to_vec(),
        };
        assert_eq!(refine_groups(&c1, 4).unwrap().len(), 1);
        assert!(refine_groups(&c, 0).is_err());
    }

    #[test]
    fn refine_matches_bruteforce() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let frames: Vec<Frame> = (0..12)
            .map(|i| {
                let pixels: Vec<u8> = (0..16).map(|_| rng.gen()).collect();
                Frame::new(i, i as f64, 4, 4, 1, pixels)
            })
            .collect();
        let c = CandidateSet {
            stage: CandidateStage::Initial,
            frames: frames.clone(),
        };
        let r = refine_groups(&c, 3).unwrap();
        // Brute-force per contiguous group of 4: representative maximizes
        // summed pairwise difference, earliest on ties.
        let mut expected = Vec::new();
        for g in frames.chunks(4) {
            let mut best = 0;
            let mut best_score = 0u64;
            for i in 0..g.len() {
                let mut s = 0u64;
                for j in 0..g.len() {
                    if i != j {
                        s += frame_difference(&g[i], &g[j]).unwrap();
                    }
                }
                if s > best_score {
                    best_score = s;
                    best = i;
                }
            }
            expected.push(g[best].index);
        }
        assert_eq!(
            r.frames.iter().map(|f| f.index).collect::<Vec<_>>(),
            expected
        );
    }

    #[test]
    fn merge_total_and_none() {
        let frames: Vec<Frame> = (0..5).map(|i| solid(i, i as f64, i as u8)).collect();
        let c = CandidateSet {
            stage: CandidateStage::Refined,
            frames,
        };
        let all = merge_similar(&c, &ConstSimilarity(1.0), 0.5).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all.frames[0].index, 0);

        let none = merge_similar(&c, &ConstSimilarity(0.0), 0.5).unwrap();
        assert_eq!(none.len(), 5);
    }

    #[test]
    fn merge_matches_simulation() {
        // Alternating similar/dissimilar chain. Independent simulation:
        // scan adjacent pairs left to right, remove right frame on
        // similarity > tau, restart.
        let frames: Vec<Frame> = (0..6).map(|i| solid(i, i as f64, i as u8)).collect();
        let mut table = HashMap::new();
        table.insert((0, 1), 0.9);
        table.insert((0, 2), 0.2);
        table.insert((2, 3), 0.95);
        table.insert((2, 4), 0.9);
        table.insert((4, 5), 0.1);
        table.insert((2, 5), 0.3);
        let sim = TableSimilarity(table.clone());

        let c = CandidateSet {
            stage: CandidateStage::Refined,
            frames: frames.clone(),
        };
        let out = merge_similar(&c, &sim, 0.5).unwrap();

        let mut expected: Vec<usize> = (0..6).collect();
        'outer: loop {
            for i in 0..expected.len() - 1 {
                let key = (
                    expected[i].min(expected[i + 1]),
                    expected[i].max(expected[i + 1]),
                );
                if *table.get(&key).unwrap_or(&0.0) > 0.5 {
                    expected.remove(i + 1);
                    continue 'outer;
                }
            }
            break;
        }
        assert_eq!(
            out.frames.iter().map(|f| f.index).collect::<Vec<_>>(),
            expected
        );
    }

    #[test]
    fn cap_behaviour() {
        let mk = |n: usize| SampledFrames {
            strategy: Strategy::Dense,
            frames: (0..n)
                .map(|i| SampledFrame {
                    frame: solid(i, i as f64, 0),
                    provenance: Provenance::Candidate,
                })
                .collect(),
        };
        assert_eq!(apply_cap(mk(128), 128).len(), 128);
        assert_eq!(apply_cap(mk(1), 128).len(), 1);

        let capped = apply_cap(mk(256), 128);
        assert_eq!(capped.len(), 128);
        assert_eq!(capped.frames[0].frame.index, 0);
        assert_eq!(capped.frames[127].frame.index, 255);
        // Uniform index formula round(i*255/127).
        for (i, f) in capped.frames.iter().enumerate() {
            let expected = ((i as f64) * 255.0 / 127.0).round() as usize;
            assert_eq!(f.frame.index, expected);
        }
    }

    #[test]
    fn sample_dispatch_and_pipeline() {
        let cfg = SamplerConfig {
            diff_threshold: DiffThreshold::Fixed(100.0),
            ..SamplerConfig::default()
        };
        let sim = ConstSimilarity(0.0);

        let short = asset((0..3).map(|i| solid(i, i as f64, 0)).collect(), 1.0, 3.0);
        let out = sample(&short, &cfg, &sim).unwrap();
        assert_eq!(out.strategy, Strategy::Dense);

        let a = three_scene_asset();
        let out = sample(&a, &cfg, &sim).unwrap();
        assert_eq!(out.strategy, Strategy::Keyframe);
        let idx: Vec<usize> = out.frames.iter().map(|f| f.frame.index).collect();
        assert_eq!(idx, vec![0, 100, 200]);

        // 20-minute constant-color video collapses to one frame.
        let flat = asset(
            (0..1200).map(|i| solid(i, i as f64, 9)).collect(),
            1.0,
            1200.0,
        );
        let cfg_auto = SamplerConfig {
            diff_threshold: DiffThreshold::Fixed(1.0),
            ..SamplerConfig::default()
        };
        assert_eq!(sample(&flat, &cfg_auto, &sim).unwrap().len(), 1);
    }

    #[test]
    fn merge_monotone_in_tau() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let frames: Vec<Frame> = (0..10).map(|i| solid(i, i as f64, i as u8)).collect();
        let mut table = HashMap::new();
        for i in 0..10usize {
            for j in (i + 1)..10 {
                table.insert((i, j), rng.gen::<f64>());
            }
        }
        let sim = TableSimilarity(table);
        let c = CandidateSet {
            stage: CandidateStage::Refined,
            frames,
        };
        let mut prev = 0usize;
        for k in 0..=20 {
            let tau = k as f64 / 20.0;
            let n = merge_similar(&c, &sim, tau).unwrap().len();
            assert!(n >= prev, "tau={tau}: {n} < {prev}");
            prev = n;
        }
    }
}
