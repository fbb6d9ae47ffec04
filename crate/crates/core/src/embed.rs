//! Frame similarity backends for the merge step: a deterministic local
//! grid-histogram embedding and a remote embedding-service client.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::video::Frame;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding backend mismatch: {0} vs {1}")]
    BackendMismatch(String, String),
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embedding service error after {attempts} attempts: {message}")]
    RemoteExhausted { attempts: u32, message: String },
    #[error("embedding service returned {got} vectors for {want} images")]
    RemoteShape { got: usize, want: usize },
    #[error("missing environment variable {0}")]
    MissingEnv(String),
    #[error("frame could not be encoded: {0}")]
    Encode(String),
}

/// L2-normalized embedding vector tagged with its producing backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub backend_id: String,
    pub frame_index: usize,
}

/// Cosine similarity. Backends with nonnegative components (the local
/// histogram) stay in [0, 1]; others are mapped via (s+1)/2 before the
/// tau comparison, see [`Embedder::tau_similarity`].
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, EmbedError> {
    if a.backend_id != b.backend_id {
        return Err(EmbedError::BackendMismatch(
            a.backend_id.clone(),
            b.backend_id.clone(),
        ));
    }
    if a.vector.len() != b.vector.len() {
        return Err(EmbedError::DimensionMismatch(a.vector.len(), b.vector.len()));
    }
    let dot: f64 = a
        .vector
        .iter()
        .zip(&b.vector)
        .map(|(&x, &y)| x as f64 * y as f64)
        .sum();
    let na: f64 = a.vector.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.vector.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub trait Embedder: Send + Sync {
    fn embed(&self, frame: &Frame) -> Result<Embedding, EmbedError>;

    fn backend_id(&self) -> &str;

    /// Whether cosine values from this backend can be negative and so
    /// need remapping into [0, 1] for tau comparisons.
    fn signed_similarity(&self) -> bool {
        false
    }

    /// Similarity as compared against tau: cosine, remapped via
    /// (s+1)/2 when the backend emits negatives.
    fn tau_similarity(&self, a: &Embedding, b: &Embedding) -> Result<f64, EmbedError> {
        let s = cosine_similarity(a, b)?;
        Ok(if self.signed_similarity() {
            (s + 1.0) / 2.0
        } else {
            s
        })
    }
}

/// Pairwise frame similarity as consumed by the merge step.
pub trait FrameSimilarity {
    fn similarity(&self, a: &Frame, b: &Frame) -> Result<f64, EmbedError>;
}

impl<E: Embedder + ?Sized> FrameSimilarity for E {
    fn similarity(&self, a: &Frame, b: &Frame) -> Result<f64, EmbedError> {
        let ea = self.embed(a)?;
        let eb = self.embed(b)?;
        self.tau_similarity(&ea, &eb)
    }
}

pub const LOCAL_GRID: usize = 4;
pub const LOCAL_BINS: usize = 8;

/// Deterministic fallback: 4×4 spatial grid, 8-bin intensity histogram
/// per cell, concatenated and L2-normalized (128-dim).
#[derive(Debug, Default, Clone)]
pub struct LocalEmbedder;

impl Embedder for LocalEmbedder {
    fn embed(&self, frame: &Frame) -> Result<Embedding, EmbedError> {
        let mut hist = vec![0f32; LOCAL_GRID * LOCAL_GRID * LOCAL_BINS];
        let w = frame.width as usize;
        let h = frame.height as usize;
        for y in 0..h {
            for x in 0..w {
                let cell_x = x * LOCAL_GRID / w;
                let cell_y = y * LOCAL_GRID / h;
                let v = frame.gray_at(y * w + x) as usize;
                let bin = v * LOCAL_BINS / 256;
                hist[(cell_y * LOCAL_GRID + cell_x) * LOCAL_BINS + bin] += 1.0;
            }
        }
        let norm = hist.iter().map(|&x| x * x).sum::<f32>().sqrt();
        if norm > 0.0 {
            for x in &mut hist {
                *x /= norm;
            }
        }
        Ok(Embedding {
            vector: hist,
            backend_id: "local".into(),
            frame_index: frame.index,
        })
    }

    fn backend_id(&self) -> &str {
        "local"
    }
}

pub const EMBED_URL_ENV: &str = "RF_EMBED_URL";
pub const EMBED_KEY_ENV: &str = "RF_EMBED_KEY";

/// Client for a batch embedding service: `POST /embed` with
/// `{images: [b64, ...]}` returning `{vectors: [[f, ...], ...]}`.
pub struct RemoteEmbedder {
    endpoint: String,
    api_key: Option<String>,
    retries: u32,
    timeout: Duration,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbedRequest {
    images: Vec<String>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

impl RemoteEmbedder {
    pub fn from_env() -> Result<Self, EmbedError> {
        let endpoint = std::env::var(EMBED_URL_ENV)
            .map_err(|_| EmbedError::MissingEnv(EMBED_URL_ENV.into()))?;
        let api_key = std::env::var(EMBED_KEY_ENV).ok();
        Ok(Self::new(endpoint, api_key))
    }

    pub fn new(endpoint: String, api_key: Option<String>) -> Self {
        Self {
            endpoint,
            api_key,
            retries: 3,
            timeout: Duration::from_secs(30),
            client: reqwest::blocking::Client::new(),
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn encode_png(frame: &Frame) -> Result<String, EmbedError> {
        let mut bytes = Vec::new();
        let encoder = image::codecs::png::PngEncoder::new(&mut bytes);
        let color = match frame.channels {
            1 => image::ExtendedColorType::L8,
            3 => image::ExtendedColorType::Rgb8,
            c => return Err(EmbedError::Encode(format!("unsupported channel count {c}"))),
        };
        image::ImageEncoder::write_image(encoder, &frame.pixels, frame.width, frame.height, color)
            .map_err(|e| EmbedError::Encode(e.to_string()))?;
        Ok(base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn embed_batch(&self, frames: &[&Frame]) -> Result<Vec<Embedding>, EmbedError> {
        let images = frames
            .iter()
            .map(|f| Self::encode_png(f))
            .collect::<Result<Vec<_>, _>>()?;
        let body = EmbedRequest { images };

        let mut last_err = String::new();
        let mut backoff = Duration::from_millis(200);
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            let mut req = self
                .client
                .post(format!("{}/embed", self.endpoint.trim_end_matches('/')))
                .timeout(self.timeout)
                .json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send().and_then(|r| r.error_for_status()) {
                Ok(resp) => {
                    let parsed: EmbedResponse = resp
                        .json()
                        .map_err(|e| EmbedError::Encode(e.to_string()))?;
                    if parsed.vectors.len() != frames.len() {
                        return Err(EmbedError::RemoteShape {
                            got: parsed.vectors.len(),
                            want: frames.len(),
                        });
                    }
                    return Ok(parsed
                        .vectors
                        .into_iter()
                        .zip(frames)
                        .map(|(mut vector, frame)| {
                            let norm =
                                vector.iter().map(|&x| x * x).sum::<f32>().sqrt();
                            if norm > 0.0 {
                                for x in &mut vector {
                                    *x /= norm;
                                }
                            }
                            Embedding {
                                vector,
                                backend_id: "remote".into(),
                                frame_index: frame.index,
                            }
                        })
                        .collect());
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(EmbedError::RemoteExhausted {
            attempts: self.retries + 1,
            message: last_err,
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, frame: &Frame) -> Result<Embedding, EmbedError> {
        Ok(self.embed_batch(&[frame])?.remove(0))
    }

    fn backend_id(&self) -> &str {
        "remote"
    }

    fn signed_similarity(&self) -> bool {
        true
    }
}
