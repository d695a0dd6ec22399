//! Run configuration: a TOML file, environment variables and command-line
//! flags, merged with precedence flags > env > file > defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cost::{
    CostWeights, EmbeddingProvider, HttpEmbedder, TrigramEmbedder, DEFAULT_DIMENSION, EMBEDDING_TOKEN_ENV,
};
use crate::schema::DEFAULT_SAMPLE_LIMIT;
use crate::{Error, Result};

pub const ENV_CONFIG: &str = "JOIN_SCAFFOLD_CONFIG";
pub const ENV_WEIGHTS: &str = "JOIN_SCAFFOLD_WEIGHTS";
pub const ENV_TAU: &str = "JOIN_SCAFFOLD_TAU";
pub const ENV_SAMPLE_LIMIT: &str = "JOIN_SCAFFOLD_SAMPLE_LIMIT";
pub const ENV_MAX_ITERATIONS: &str = "JOIN_SCAFFOLD_MAX_ITERATIONS";
pub const ENV_TEMPLATES: &str = "JOIN_SCAFFOLD_TEMPLATES";
pub const ENV_GENERATOR_URL: &str = "JOIN_SCAFFOLD_GENERATOR_URL";
pub const ENV_GENERATOR_MODEL: &str = "JOIN_SCAFFOLD_GENERATOR_MODEL";
/// Bearer token for the generator. Read at call time, never stored in config.
pub const ENV_API_KEY: &str = "JOIN_SCAFFOLD_API_KEY";
pub const ENV_EMBEDDING_URL: &str = crate::cost::EMBEDDING_URL_ENV;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Chat-completions URL.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    /// Attempts after the first failure.
    pub retries: u32,
    /// First backoff delay; doubles on each retry.
    pub backoff_ms: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            endpoint: None,
            model: "gpt-4o".to_string(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 60,
            retries: 3,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Trigram,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub provider: EmbeddingKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub dimension: usize,
    pub timeout_secs: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            provider: EmbeddingKind::Trigram,
            endpoint: None,
            dimension: DEFAULT_DIMENSION,
            timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sample_limit: usize,
    pub max_iterations: usize,
    /// Prompt template directory; the bundled templates when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    pub weights: CostWeights,
    pub generator: GeneratorConfig,
    pub embedding: EmbeddingConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sample_limit: DEFAULT_SAMPLE_LIMIT,
            max_iterations: 3,
            templates_dir: None,
            weights: CostWeights::default(),
            generator: GeneratorConfig::default(),
            embedding: EmbeddingConfig::default(),
        }
    }
}

/// Values from one source (environment or flags); `None` leaves the lower
/// layer alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layer {
    pub weights: Option<(f64, f64, f64)>,
    pub tau: Option<f64>,
    pub sample_limit: Option<usize>,
    pub max_iterations: Option<usize>,
    pub templates_dir: Option<PathBuf>,
    pub generator_endpoint: Option<String>,
    pub generator_model: Option<String>,
    pub embedding_endpoint: Option<String>,
}

fn parse_env<T: std::str::FromStr>(name: &str, value: Option<String>) -> Result<Option<T>> {
    value
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{name}: cannot parse `{v}`")))
        })
        .transpose()
}

impl Layer {
    /// Reads the `JOIN_SCAFFOLD_*` variables through `lookup`.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Layer> {
        Ok(Layer {
            weights: lookup(ENV_WEIGHTS).map(|w| parse_weights(&w)).transpose()?,
            tau: parse_env(ENV_TAU, lookup(ENV_TAU))?,
            sample_limit: parse_env(ENV_SAMPLE_LIMIT, lookup(ENV_SAMPLE_LIMIT))?,
            max_iterations: parse_env(ENV_MAX_ITERATIONS, lookup(ENV_MAX_ITERATIONS))?,
            templates_dir: lookup(ENV_TEMPLATES).map(PathBuf::from),
            generator_endpoint: lookup(ENV_GENERATOR_URL),
            generator_model: lookup(ENV_GENERATOR_MODEL),
            embedding_endpoint: lookup(ENV_EMBEDDING_URL),
        })
    }

    pub fn from_process_env() -> Result<Layer> {
        Layer::from_env(|k| std::env::var(k).ok().filter(|v| !v.is_empty()))
    }

    fn apply(&self, c: &mut Config) {
        if let Some((a, b, g)) = self.weights {
            c.weights.alpha = a;
            c.weights.beta = b;
            c.weights.gamma = g;
        }
        if let Some(t) = self.tau {
            c.weights.tau = t;
        }
        if let Some(n) = self.sample_limit {
            c.sample_limit = n;
        }
        if let Some(n) = self.max_iterations {
            c.max_iterations = n;
        }
        if let Some(d) = &self.templates_dir {
            c.templates_dir = Some(d.clone());
        }
        if let Some(u) = &self.generator_endpoint {
            c.generator.endpoint = Some(u.clone());
        }
        if let Some(m) = &self.generator_model {
            c.generator.model = m.clone();
        }
        if let Some(u) = &self.embedding_endpoint {
            c.embedding.endpoint = Some(u.clone());
            c.embedding.provider = EmbeddingKind::Http;
        }
    }
}

/// `"0.4,0.4,0.2"` to `(alpha, beta, gamma)`.
pub fn parse_weights(text: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("weights `{text}`: expected three numbers a,b,g")))?;
    match nums[..] {
        [a, b, g] => Ok((a, b, g)),
        _ => Err(Error::Config(format!("weights `{text}`: expected three numbers a,b,g"))),
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Merges defaults, the optional file, then `env`, then `flags`, and
    /// checks the result.
    pub fn resolve(file: Option<&Path>, env: &Layer, flags: &Layer) -> Result<Config> {
        let mut c = match file {
            Some(p) => Config::from_file(p)?,
            None => Config::default(),
        };
        env.apply(&mut c);
        flags.apply(&mut c);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.sample_limit == 0 {
            return Err(Error::Config("sample_limit must be at least 1".into()));
        }
        if self.embedding.dimension == 0 {
            return Err(Error::Config("embedding.dimension must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.generator.temperature) {
            return Err(Error::Config("generator.temperature must lie in [0, 2]".into()));
        }
        if self.embedding.provider == EmbeddingKind::Http && self.embedding.endpoint.is_none() {
            return Err(Error::Config("embedding.provider = \"http\" needs embedding.endpoint".into()));
        }
        Ok(())
    }

    /// Canonical TOML of the effective configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn embedding_provider(&self) -> Box<dyn EmbeddingProvider> {
        match (&self.embedding.provider, &self.embedding.endpoint) {
            (EmbeddingKind::Http, Some(url)) => Box::new(HttpEmbedder::new(
                url.clone(),
                std::env::var(EMBEDDING_TOKEN_ENV).ok(),
                self.embedding.dimension,
                Duration::from_secs(self.embedding.timeout_secs),
            )),
            _ => Box::new(TrigramEmbedder::with_dimension(self.embedding.dimension)),
        }
    }
}
