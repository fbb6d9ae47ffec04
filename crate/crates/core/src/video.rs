//! Video assets as ordered frame sequences loaded from a directory of
//! numbered images plus a `meta.json` record.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VideoError {
    #[error("frame directory not found: {0}")]
    MissingDirectory(PathBuf),
    #[error("empty asset: no frames in {0}")]
    EmptyAsset(PathBuf),
    #[error("metadata mismatch for {id}: meta implies {expected} frames, found {found}")]
    FrameCountMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("unreadable image {path}: {source}")]
    UnreadableImage {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("invalid metadata in {path}: {message}")]
    InvalidMeta { path: PathBuf, message: String },
    #[error("timestamp {t}s out of range [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("frame dimension mismatch: {0}x{1}x{2} vs {3}x{4}x{5}")]
    DimensionMismatch(u32, u32, u8, u32, u32, u8),
}

/// A single decoded frame. Pixels are row-major, 8-bit per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub timestamp_s: f64,
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(
        index: usize,
        timestamp_s: f64,
        width: u32,
        height: u32,
        channels: u8,
        pixels: Vec<u8>,
    ) -> Self {
        assert_eq!(
            (width as usize) * (height as usize) * (channels as usize),
            pixels.len(),
            "pixel buffer length must equal width*height*channels"
        );
        Self {
            index,
            timestamp_s,
            width,
            height,
            channels,
            pixels,
        }
    }

    /// Number of spatial pixels (not samples).
    pub fn pixel_count(&self) -> usize {
        (self.width as usize) * (self.height as usize)
    }

    /// Grayscale intensity at a flat pixel position, as the integer
    /// average of channels.
    pub fn gray_at(&self, i: usize) -> u8 {
        let c = self.channels as usize;
        let base = i * c;
        let sum: u32 = self.pixels[base..base + c].iter().map(|&p| p as u32).sum();
        (sum / c as u32) as u8
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channels == other.channels
    }
}

/// Per-asset metadata record (`meta.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoMeta {
    pub id: String,
    pub fps: f64,
    pub duration_s: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

/// Coarse content category; drives the caption max-token tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Live,
    Vlog,
    Documentary,
}

/// One line of the asset manifest (JSONL).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub frames_dir: PathBuf,
    pub meta: PathBuf,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, VideoError> {
    let text = fs::read_to_string(path).map_err(|source| VideoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| VideoError::InvalidMeta {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// How frames are materialized: eagerly held in memory (synthetic /
/// test assets) or decoded from disk on access.
#[derive(Debug, Clone)]
enum FrameSource {
    Memory(Vec<Frame>),
    Directory { files: Vec<PathBuf>, fps: f64 },
}

/// An ordered frame sequence plus metadata. Read-only after
/// construction; safe to share across workers.
#[derive(Debug, Clone)]
pub struct VideoAsset {
    pub meta: VideoMeta,
    source: FrameSource,
}

impl VideoAsset {
    /// Build an in-memory asset, mainly for synthetic inputs.
    pub fn from_frames(meta: VideoMeta, frames: Vec<Frame>) -> Self {
        Self {
            meta,
            source: FrameSource::Memory(frames),
        }
    }

    pub fn id(&self) -> &str {
        &self.meta.id
    }

    pub fn duration_s(&self) -> f64 {
        self.meta.duration_s
    }

    pub fn frame_count(&self) -> usize {
        match &self.source {
            FrameSource::Memory(frames) => frames.len(),
            FrameSource::Directory { files, .. } => files.len(),
        }
    }

    /// Decode a frame by ordinal index.
    pub fn frame(&self, index: usize) -> Result<Frame, VideoError> {
        match &self.source {
            FrameSource::Memory(frames) => Ok(frames[index].clone()),
            FrameSource::Directory { files, fps } => {
                let path = &files[index];
                let img = image::open(path).map_err(|source| VideoError::UnreadableImage {
                    path: path.clone(),
                    source,
                })?;
                let timestamp_s = index as f64 / fps;
                Ok(match img {
                    image::DynamicImage::ImageLuma8(buf) => Frame::new(
                        index,
                        timestamp_s,
                        buf.width(),
                        buf.height(),
                        1,
                        buf.into_raw(),
                    ),
                    other => {
                        let rgb = other.to_rgb8();
                        Frame::new(
                            index,
                            timestamp_s,
                            rgb.width(),
                            rgb.height(),
                            3,
                            rgb.into_raw(),
                        )
                    }
                })
            }
        }
    }

    pub fn frames(&self) -> impl Iterator<Item = Result<Frame, VideoError>> + '_ {
        (0..self.frame_count()).map(move |i| self.frame(i))
    }

    /// Frame whose timestamp is nearest to `t` without exceeding it.
    pub fn frame_at_time(&self, t: f64) -> Result<Frame, VideoError> {
        if t < 0.0 || t > self.meta.duration_s {
            return Err(VideoError::TimeOutOfRange {
                t,
                duration: self.meta.duration_s,
            });
        }
        let idx = (t * self.meta.fps).floor() as usize;
        let idx = idx.min(self.frame_count().saturating_sub(1));
        self.frame(idx)
    }
}

/// Load an asset from a manifest entry. Frame count must agree with
/// `fps * duration_s` within one frame (decoders disagree on the final
/// frame).
pub fn load_asset(entry: &ManifestEntry) -> Result<VideoAsset, VideoError> {
    let meta_text = fs::read_to_string(&entry.meta).map_err(|source| VideoError::Io {
        path: entry.meta.clone(),
        source,
    })?;
    let meta: VideoMeta =
        serde_json::from_str(&meta_text).map_err(|e| VideoError::InvalidMeta {
            path: entry.meta.clone(),
            message: e.to_string(),
        })?;
    if meta.fps <= 0.0 || meta.duration_s <= 0.0 {
        return Err(VideoError::InvalidMeta {
            path: entry.meta.clone(),
            message: format!(
                "fps and duration_s must be positive (fps={}, duration_s={})",
                meta.fps, meta.duration_s
            ),
        });
    }

    if !entry.frames_dir.is_dir() {
        return Err(VideoError::MissingDirectory(entry.frames_dir.clone()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&entry.frames_dir)
        .map_err(|source| VideoError::Io {
            path: entry.frames_dir.clone(),
            source,
        })?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png") | Some("ppm")
            )
        })
        .collect();
    files.sort();

    if files.is_empty() {
        return Err(VideoError::EmptyAsset(entry.frames_dir.clone()));
    }

    let expected = (meta.fps * meta.duration_s).round() as usize;
    if files.len().abs_diff(expected) > 1 {
        return Err(VideoError::FrameCountMismatch {
            id: meta.id.clone(),
            expected,
            found: files.len(),
        });
    }

    let fps = meta.fps;
    Ok(VideoAsset {
        meta,
        source: FrameSource::Directory { files, fps },
    })
}
