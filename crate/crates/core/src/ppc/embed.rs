use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{FallbackTokenizer, Tokenizer};

pub const EMBED_DIM: usize = 768;

/// A frozen text encoder producing `EMBED_DIM`-vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn identity(&self) -> String;

    fn max_tokens(&self) -> usize;

    /// One vector per text, in input order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.embed_batch(&[text])?.pop().expect("one vector per text"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Hashed,
    Remote,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Signed hashed bag of tokens, mean-pooled and unit-normalized.
#[derive(Debug, Clone)]
pub struct HashedProvider {
    pub max_tokens: usize,
}

impl Default for HashedProvider {
    fn default() -> Self {
        Self { max_tokens: 512 }
    }
}

impl HashedProvider {
    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; EMBED_DIM];
        let starts = FallbackTokenizer.token_starts(text);
        let mut n = 0usize;
        for (i, &s) in starts.iter().enumerate().take(self.max_tokens) {
            let end = starts.get(i + 1).copied().unwrap_or(text.len());
            let piece = text[s..end].trim();
            if piece.is_empty() {
                continue;
            }
            let h = fnv1a(piece.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % EMBED_DIM as u64) as usize] += sign;
            n += 1;
        }
        if n == 0 {
            return v;
        }
        for x in &mut v {
            *x /= n as f64;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

impl EmbeddingProvider for HashedProvider {
    fn identity(&self) -> String {
        format!("hashed-fnv1a-{EMBED_DIM}-max{}", self.max_tokens)
    }

    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
    max_tokens: usize,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an embedding sidecar: `POST {base}/embed`, `GET {base}/healthz`.
pub struct RemoteProvider {
    base_url: String,
    model: String,
    max_tokens: usize,
    batch_size: usize,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(base_url: &str, model: &str, max_tokens: usize) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Transport { status: None, message: e.to_string() })?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            max_tokens,
            batch_size: 32,
            client,
        })
    }

    pub fn healthz(&self) -> Result<()> {
        let resp = self
            .client
            .get(format!("{}/healthz", self.base_url))
            .send()
            .map_err(|e| Error::Transport { status: None, message: e.to_string() })?;
        if resp.status().is_success() {
            Ok(())
        } else {
            Err(Error::Transport { status: Some(resp.status().as_u16()), message: "unhealthy".into() })
        }
    }

    fn post(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let resp = self
            .client
            .post(format!("{}/embed", self.base_url))
            .json(&EmbedRequest { texts, max_tokens: self.max_tokens })
            .send()
            .map_err(|e| Error::Transport { status: None, message: e.to_string() })?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(Error::Transport { status: Some(status.as_u16()), message: body });
        }
        let parsed: EmbedResponse = resp
            .json()
            .map_err(|e| Error::Transport { status: Some(status.as_u16()), message: e.to_string() })?;
        if parsed.vectors.len() != texts.len() {
            return Err(Error::Shape(format!(
                "embed returned {} vectors for {} texts",
                parsed.vectors.len(),
                texts.len()
            )));
        }
        if let Some(v) = parsed.vectors.iter().find(|v| v.len() != EMBED_DIM) {
            return Err(Error::Shape(format!("embed returned a {}-vector, expected {EMBED_DIM}", v.len())));
        }
        Ok(parsed.vectors)
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn identity(&self) -> String {
        format!("remote:{}:max{}", self.model, self.max_tokens)
    }

    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            out.extend(self.post(chunk)?);
        }
        Ok(out)
    }
}
