//! Back-translation augmentation.
//!
//! Every native example is translated into the two alternate languages, so a
//! corpus of N rows becomes exactly 3N rows with labels copied verbatim.
//! Translations come from a chat-completions compatible HTTP endpoint or a
//! deterministic mock, optionally through a content-addressed disk cache.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Example, Lang, Origin};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    HttpChatCompletions,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatorEndpoint {
    pub kind: EndpointKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

impl TranslatorEndpoint {
    pub fn mock() -> Self {
        TranslatorEndpoint {
            kind: EndpointKind::Mock,
            base_url: None,
            model_name: "mock".into(),
            cache_dir: None,
        }
    }

    pub fn http(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        TranslatorEndpoint {
            kind: EndpointKind::HttpChatCompletions,
            base_url: Some(base_url.into()),
            model_name: model_name.into(),
            cache_dir: None,
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == EndpointKind::HttpChatCompletions && self.base_url.is_none() {
            return Err(Error::Config("http translator endpoint requires base_url".into()));
        }
        Ok(())
    }
}

impl Default for TranslatorEndpoint {
    fn default() -> Self {
        TranslatorEndpoint::mock()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub text: String,
    pub source_lang: Lang,
    pub target_lang: Lang,
    pub temperature: f64,
    pub top_p: f64,
}

impl TranslationRequest {
    /// Decoding is pinned to temperature 0 and top_p 1 for reproducibility.
    pub fn new(text: impl Into<String>, source_lang: Lang, target_lang: Lang) -> Result<Self> {
        if source_lang == target_lang {
            return Err(Error::Config(format!(
                "translation source and target are both {source_lang}"
            )));
        }
        Ok(TranslationRequest {
            text: text.into(),
            source_lang,
            target_lang,
            temperature: 0.0,
            top_p: 1.0,
        })
    }

    pub fn prompt(&self) -> String {
        format!(
            "Translate the following tweet from {} to {}. Preserve meaning, tone, and any slur \
             reclamation nuance. Output only the translation.\n\n{}",
            self.source_lang.name(),
            self.target_lang.name(),
            self.text
        )
    }

    /// Hex sha256 over (text, source, target, model) used as the cache key.
    pub fn cache_key(&self, model_name: &str) -> String {
        let mut h = Sha256::new();
        for part in [
            self.text.as_str(),
            self.source_lang.code(),
            self.target_lang.code(),
            model_name,
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: TranslationRequest,
    response: String,
}

pub struct Translator {
    endpoint: TranslatorEndpoint,
    agent: ureq::Agent,
    cache_hits: AtomicUsize,
}

impl Translator {
    pub fn new(endpoint: TranslatorEndpoint) -> Result<Self> {
        endpoint.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Ok(Translator {
            endpoint,
            agent,
            cache_hits: AtomicUsize::new(0),
        })
    }

    pub fn endpoint(&self) -> &TranslatorEndpoint {
        &self.endpoint
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub fn translate(&self, request: &TranslationRequest) -> Result<String> {
        if request.source_lang == request.target_lang {
            return Err(Error::Config("translation source equals target".into()));
        }
        let cache_path = self
            .endpoint
            .cache_dir
            .as_ref()
            .map(|dir| dir.join(format!("{}.json", request.cache_key(&self.endpoint.model_name))));

        if let Some(path) = &cache_path {
            if let Some(hit) = read_cache(path) {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(hit);
            }
        }

        let response = match self.endpoint.kind {
            EndpointKind::Mock => format!("[{}] {}", request.target_lang, request.text),
            EndpointKind::HttpChatCompletions => self.call_http(request)?,
        };

        if let Some(path) = &cache_path {
            write_cache(path, request, &response)?;
        }
        Ok(response)
    }

    fn call_http(&self, request: &TranslationRequest) -> Result<String> {
        let base = self.endpoint.base_url.as_deref().unwrap_or_default();
        let url = format!("{}/chat/completions", base.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": self.endpoint.model_name,
            "messages": [{"role": "user", "content": request.prompt()}],
            "temperature": request.temperature,
            "top_p": request.top_p,
        });
        let transport = |message: String| Error::Transport {
            url: url.clone(),
            message,
        };
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| transport(e.to_string()))?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| transport(e.to_string()))?;
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .unwrap_or_default();
        if content.trim().is_empty() {
            return Err(Error::Provider(format!("empty completion from {url}")));
        }
        Ok(content.to_string())
    }
}

fn read_cache(path: &Path) -> Option<String> {
    let bytes = fs::read(path).ok()?;
    let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
    Some(entry.response)
}

fn write_cache(path: &Path, request: &TranslationRequest, response: &str) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let entry = CacheEntry {
        request: request.clone(),
        response: response.to_string(),
    };
    let bytes = serde_json::to_vec_pretty(&entry)?;
    // write-then-rename: concurrent writers of one key race harmlessly
    let tmp = path.with_extension(format!("json.tmp{}", std::process::id()));
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Triples a native corpus: each row is followed by its translations into the
/// two alternate languages (ids `<id>#<lang>`, origin `translated`).
pub fn augment_corpus(corpus: &Corpus, translator: &Translator) -> Result<Corpus> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("augment_corpus needs a non-empty corpus"));
    }
    if let Some(ex) = corpus.examples().iter().find(|e| e.origin != Origin::Native) {
        return Err(Error::Config(format!(
            "augment_corpus expects native examples, {:?} is translated",
            ex.id
        )));
    }

    let groups: Vec<Result<[Example; 3]>> = corpus
        .examples()
        .par_iter()
        .map(|ex| {
            let [a, b] = ex.lang.alternates();
            let first = translated(ex, a, translator)?;
            let second = translated(ex, b, translator)?;
            Ok([ex.clone(), first, second])
        })
        .collect();

    let mut out = Vec::with_capacity(corpus.len() * 3);
    for (ex, group) in corpus.examples().iter().zip(groups) {
        let group = group.map_err(|source| Error::Augmentation {
            id: ex.id.clone(),
            source: Box::new(source),
        })?;
        out.extend(group);
    }
    Corpus::new(out)
}

fn translated(ex: &Example, target: Lang, translator: &Translator) -> Result<Example> {
    let req = TranslationRequest::new(ex.text.clone(), ex.lang, target)?;
    let text = translator.translate(&req)?;
    Ok(Example {
        id: format!("{}#{}", ex.id, target),
        text,
        lang: target,
        label: ex.label,
        origin: Origin::Translated,
    })
}
