//! Text embedding providers.
//!
//! [`TrigramEmbedder`] is the offline default: each name is split into
//! lower-cased words (at non-alphanumerics and camelCase boundaries), every
//! word is padded as `#word#`, its character trigrams are hashed (FNV-1a) into
//! a fixed number of buckets, and the bucket counts are L2-normalized.
//!
//! [`HttpEmbedder`] talks to an embedding service: `POST {"texts": [...]}`
//! answered by `{"vectors": [[...], ...]}`.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_DIMENSION: usize = 64;

pub const EMBEDDING_URL_ENV: &str = "JOIN_SCAFFOLD_EMBEDDING_URL";
pub const EMBEDDING_TOKEN_ENV: &str = "JOIN_SCAFFOLD_EMBEDDING_TOKEN";

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Embedding("embedding has non-finite entries".into()));
        }
        Ok(Embedding(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Raw cosine in `[-1, 1]`; zero when either vector is zero.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            (dot / denom).clamp(-1.0, 1.0)
        }
    }

    /// Arithmetic mean of equally-sized vectors.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a Embedding>) -> Option<Embedding> {
        let mut iter = vectors.into_iter();
        let first = iter.next()?;
        let mut sum = first.0.clone();
        let mut n = 1.0;
        for v in iter {
            for (s, x) in sum.iter_mut().zip(&v.0) {
                *s += x;
            }
            n += 1.0;
        }
        for s in &mut sum {
            *s /= n;
        }
        Some(Embedding(sum))
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Embedding>;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Splits an identifier or phrase into lower-case words.
pub fn split_words(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for ch in text.chars() {
        if !ch.is_alphanumeric() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            let camel = p.is_lowercase() && ch.is_uppercase();
            if camel && !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        }
        current.extend(ch.to_lowercase());
        prev = Some(ch);
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

#[derive(Debug, Clone)]
pub struct TrigramEmbedder {
    dimension: usize,
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        TrigramEmbedder {
            dimension: DEFAULT_DIMENSION,
        }
    }
}

impl TrigramEmbedder {
    pub fn with_dimension(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        TrigramEmbedder { dimension }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Padded character trigrams of every word in `text`.
pub fn trigrams(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in split_words(text) {
        let padded: Vec<char> = std::iter::once('#')
            .chain(word.chars())
            .chain(std::iter::once('#'))
            .collect();
        for window in padded.windows(3) {
            out.push(window.iter().collect());
        }
    }
    out
}

impl EmbeddingProvider for TrigramEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let grams = trigrams(text);
        if grams.is_empty() {
            return Err(Error::EmptyText);
        }
        let mut v = vec![0.0; self.dimension];
        for g in grams {
            v[(fnv1a(g.as_bytes()) % self.dimension as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        Embedding::new(v)
    }
}

/// Fixed text-to-vector table; unknown texts are an error. Useful for
/// fixtures that need exact cosine values.
#[derive(Debug, Clone, Default)]
pub struct LookupEmbedder {
    dimension: usize,
    table: HashMap<String, Embedding>,
}

impl LookupEmbedder {
    pub fn new(dimension: usize) -> Self {
        LookupEmbedder {
            dimension,
            table: HashMap::new(),
        }
    }

    pub fn insert(&mut self, text: impl Into<String>, values: Vec<f64>) -> &mut Self {
        assert_eq!(values.len(), self.dimension, "lookup vector has wrong dimension");
        self.table
            .insert(text.into(), Embedding::new(values).expect("finite lookup vector"));
        self
    }
}

impl EmbeddingProvider for LookupEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        if text.is_empty() {
            return Err(Error::EmptyText);
        }
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| Error::Embedding(format!("no vector for `{text}`")))
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for a remote embedding service.
pub struct HttpEmbedder {
    endpoint: String,
    token: Option<String>,
    dimension: usize,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, dimension: usize, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpEmbedder {
            endpoint: endpoint.into(),
            token,
            dimension,
            agent,
        }
    }

    /// Endpoint from `JOIN_SCAFFOLD_EMBEDDING_URL`, bearer token from
    /// `JOIN_SCAFFOLD_EMBEDDING_TOKEN`.
    pub fn from_env(dimension: usize) -> Result<Self> {
        let endpoint = std::env::var(EMBEDDING_URL_ENV)
            .map_err(|_| Error::Embedding(format!("{EMBEDDING_URL_ENV} is not set")))?;
        let token = std::env::var(EMBEDDING_TOKEN_ENV).ok();
        Ok(HttpEmbedder::new(endpoint, token, dimension, Duration::from_secs(30)))
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(Error::EmptyText);
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let mut request = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(EmbedRequest { texts })
            .map_err(|e| Error::Embedding(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::Embedding(format!("service answered {status}")));
        }
        let body: EmbedResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::Embedding(format!("bad response body: {e}")))?;
        if body.vectors.len() != texts.len() {
            return Err(Error::Embedding(format!(
                "expected {} vectors, got {}",
                texts.len(),
                body.vectors.len()
            )));
        }
        body.vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dimension {
                    return Err(Error::Embedding(format!(
                        "expected dimension {}, got {}",
                        self.dimension,
                        v.len()
                    )));
                }
                Embedding::new(v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_snake_and_camel_case() {
        assert_eq!(split_words("productRevenue"), ["product", "revenue"]);
        assert_eq!(split_words("installation_altitude_m"), ["installation", "altitude", "m"]);
        assert_eq!(split_words("fullVisitorId"), ["full", "visitor", "id"]);
        assert_eq!(split_words("HTTPServer"), ["httpserver"]);
        assert!(split_words("__").is_empty());
    }

    #[test]
    fn trigram_embedding_is_deterministic_and_unit() {
        let e = TrigramEmbedder::default();
        let a = e.embed("price").unwrap();
        assert_eq!(a, e.embed("price").unwrap());
        assert_eq!(a.dimension(), DEFAULT_DIMENSION);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!((a.cosine(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_is_rejected() {
        let e = TrigramEmbedder::default();
        assert!(matches!(e.embed(""), Err(Error::EmptyText)));
        assert!(matches!(e.embed("  "), Err(Error::EmptyText)));
        assert!(matches!(e.embed("__"), Err(Error::EmptyText)));
    }

    #[test]
    fn trigram_overlap_orders_similarity() {
        // Unhashed trigram sets: price/prices share 4 of 5 and 6 grams
        // (cosine 4/sqrt(30) ~ 0.73); price/zzqx share none.
        let set = |s: &str| trigrams(s).into_iter().collect::<std::collections::BTreeSet<_>>();
        let shared = set("price").intersection(&set("prices")).count();
        assert_eq!(shared, 4);
        assert_eq!(set("price").intersection(&set("zzqx")).count(), 0);

        let e = TrigramEmbedder::default();
        let price = e.embed("price").unwrap();
        assert!(
            price.cosine(&e.embed("zzqx").unwrap()) < price.cosine(&e.embed("prices").unwrap())
        );
    }

    #[test]
    fn mean_of_vectors() {
        let a = Embedding::new(vec![1.0, 0.0]).unwrap();
        let b = Embedding::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(Embedding::mean([&a, &b]).unwrap().values(), &[0.5, 0.5]);
        assert!(Embedding::mean(std::iter::empty()).is_none());
        assert!(Embedding::new(vec![f64::NAN]).is_err());
    }
}
