use std::path::Path;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{GeneratorConfig, ENV_API_KEY};
use crate::{Error, Result};

/// Turns a system prompt and a question into SQL text.
pub trait GeneratorClient {
    fn generate(&self, prompt: &str, question: &str) -> Result<String>;
}

/// Strips Markdown code fences and surrounding whitespace from a reply.
pub fn extract_sql(reply: &str) -> String {
    let text = reply.trim();
    if let Some(start) = text.find("```") {
        let body = &text[start + 3..];
        let body = body.split_once('\n').map_or(body, |(lang, rest)| {
            if lang.trim().chars().all(|c| c.is_ascii_alphanumeric()) {
                rest
            } else {
                body
            }
        });
        let end = body.find("```").unwrap_or(body.len());
        return body[..end].trim().to_string();
    }
    text.to_string()
}

/// OpenAI-style chat-completions client with bounded retries.
pub struct HttpGenerator {
    endpoint: String,
    api_key: Option<String>,
    config: GeneratorConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

impl HttpGenerator {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, config: GeneratorConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpGenerator {
            endpoint: endpoint.into(),
            api_key,
            config,
            agent,
        }
    }

    /// Endpoint from the config, key from `JOIN_SCAFFOLD_API_KEY`.
    pub fn from_config(config: &GeneratorConfig) -> Result<Self> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| Error::Generator("no generator endpoint configured".into()))?;
        let key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(HttpGenerator::new(endpoint, key, config.clone()))
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = match request.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(format!("service answered {status}"));
        }
        if !status.is_success() {
            return Attempt::Fatal(format!("service answered {status}"));
        }
        let value: serde_json::Value = match response.body_mut().read_json() {
            Ok(v) => v,
            Err(e) => return Attempt::Retry(format!("bad response body: {e}")),
        };
        match value.pointer("/choices/0/message/content").and_then(|v| v.as_str()) {
            Some(text) => Attempt::Done(extract_sql(text)),
            None => Attempt::Fatal("response has no choices[0].message.content".into()),
        }
    }
}

impl GeneratorClient for HttpGenerator {
    fn generate(&self, prompt: &str, question: &str) -> Result<String> {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "messages": [
                {"role": "system", "content": prompt},
                {"role": "user", "content": question},
            ],
        });
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(&body) {
                Attempt::Done(sql) => return Ok(sql),
                Attempt::Fatal(msg) => return Err(Error::Generator(msg)),
                Attempt::Retry(msg) => last = msg,
            }
        }
        Err(Error::Generator(format!(
            "giving up after {} attempts: {last}",
            self.config.retries + 1
        )))
    }
}

/// One scripted reply. Unset matchers match anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_contains: Option<String>,
    pub sql: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StubFile {
    List(Vec<StubRule>),
    Object {
        responses: Vec<StubRule>,
    },
}

/// Deterministic generator answering from fixture rules; the first rule
/// whose matchers all hold wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StubGenerator {
    pub rules: Vec<StubRule>,
}

impl StubGenerator {
    pub fn new(rules: Vec<StubRule>) -> Self {
        StubGenerator { rules }
    }

    /// A stub that always answers `sql`.
    pub fn constant(sql: &str) -> Self {
        StubGenerator::new(vec![StubRule {
            question: None,
            prompt_contains: None,
            sql: sql.to_string(),
        }])
    }

    /// Parses `[rule, ...]` or `{"responses": [rule, ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: StubFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedDocument(format!("stub responses: {e}")))?;
        Ok(StubGenerator::new(match file {
            StubFile::List(r) | StubFile::Object { responses: r } => r,
        }))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        StubGenerator::from_json(&text)
    }
}

impl GeneratorClient for StubGenerator {
    fn generate(&self, prompt: &str, question: &str) -> Result<String> {
        self.rules
            .iter()
            .find(|r| {
                r.question.as_deref().is_none_or(|q| q.trim() == question.trim())
                    && r.prompt_contains.as_deref().is_none_or(|p| prompt.contains(p))
            })
            .map(|r| r.sql.clone())
            .ok_or_else(|| Error::Generator(format!("stub has no response for question `{question}`")))
    }
}
