//! Translation clients behind one interface, plus a content-addressed disk
//! cache that makes reruns hermetic.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use crate::error::{Error, Result};

/// Environment variable naming the default cache directory.
pub const CACHE_DIR_ENV: &str = "BABEL_CACHE_DIR";

pub trait Translator: Send + Sync {
    /// Stable client name; part of every cache key.
    fn name(&self) -> &str;

    fn translate(&self, text: &str, source_lang: &str, target_lang: &str) -> Result<String>;
}

impl<T: Translator + ?Sized> Translator for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn translate(&self, text: &str, source_lang: &str, target_lang: &str) -> Result<String> {
        (**self).translate(text, source_lang, target_lang)
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn name(&self) -> &str {
        "identity"
    }

    fn translate(&self, text: &str, _: &str, _: &str) -> Result<String> {
        Ok(text.to_string())
    }
}

/// When the dictionary translator discards style.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StripPolicy {
    Never,
    Always,
    /// Strip a text when `unit(sha256(seed_le || text)) < fraction`.
    Fraction {
        fraction: f64,
        seed: u64,
    },
}

/// Word-for-word dictionary translation.
///
/// Words are split on whitespace; trailing punctuation is kept. Without
/// stripping, each word is looked up in lowercase in `entries` and the
/// source word's casing (all caps, capitalised, lower) is copied onto the
/// result. With stripping, `neutral` overrides `entries`, everything is
/// lowercased, and words mapped to the empty string are dropped. Unknown
/// words pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryTranslator {
    pub name: String,
    pub entries: BTreeMap<String, String>,
    #[serde(default)]
    pub neutral: BTreeMap<String, String>,
    pub strip: StripPolicy,
}

impl DictionaryTranslator {
    pub fn new(
        name: impl Into<String>,
        entries: BTreeMap<String, String>,
        neutral: BTreeMap<String, String>,
        strip: StripPolicy,
    ) -> Self {
        Self {
            name: name.into(),
            entries,
            neutral,
            strip,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn with_strip(mut self, strip: StripPolicy) -> Self {
        self.strip = strip;
        self
    }

    pub fn strips(&self, text: &str) -> bool {
        match self.strip {
            StripPolicy::Never => false,
            StripPolicy::Always => true,
            StripPolicy::Fraction { fraction, seed } => {
                let mut h = Sha256::new();
                h.update(seed.to_le_bytes());
                h.update(text.as_bytes());
                let d = h.finalize();
                let x = u64::from_le_bytes(d[..8].try_into().expect("8 bytes"));
                ((x >> 11) as f64 / (1u64 << 53) as f64) < fraction
            }
        }
    }

    fn map_word(&self, word: &str, strip: bool) -> Option<String> {
        let core = word.trim_end_matches(|c: char| c.is_ascii_punctuation());
        let trailing = &word[core.len()..];
        let key = core.to_lowercase();
        let mapped = if strip {
            self.neutral.get(&key).or_else(|| self.entries.get(&key))
        } else {
            self.entries.get(&key)
        };
        let translated = match mapped {
            Some(t) => t.clone(),
            None => key.clone(),
        };
        if translated.is_empty() {
            return (!trailing.is_empty()).then(|| trailing.to_string());
        }
        let cased = if strip {
            translated
        } else if core.chars().any(char::is_alphabetic)
            && core.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase)
            && core.chars().filter(|c| c.is_alphabetic()).count() > 1
        {
            translated.to_uppercase()
        } else if core.chars().next().is_some_and(char::is_uppercase) {
            let mut cs = translated.chars();
            cs.next()
                .map(|f| f.to_uppercase().chain(cs).collect())
                .unwrap_or_default()
        } else if mapped.is_none() {
            core.to_string()
        } else {
            translated
        };
        Some(format!("{cased}{trailing}"))
    }
}

impl Translator for DictionaryTranslator {
    fn name(&self) -> &str {
        &self.name
    }

    fn translate(&self, text: &str, _: &str, _: &str) -> Result<String> {
        let strip = self.strips(text);
        let mut out: Vec<String> = Vec::new();
        for word in text.split_whitespace() {
            match self.map_word(word, strip) {
                Some(w) if w.chars().all(|c| c.is_ascii_punctuation()) => match out.last_mut() {
                    Some(prev) => prev.push_str(&w),
                    None => out.push(w),
                },
                Some(w) => out.push(w),
                None => {}
            }
        }
        Ok(out.join(" "))
    }
}

/// Client for a LibreTranslate-compatible HTTP API: `POST {endpoint}/translate`
/// with `{"q","source","target","format":"text","api_key"?}` returning
/// `{"translatedText"}`. The key is read from the environment variable named
/// by `api_key_env`. Transport errors, 429 and 5xx are retried up to three
/// attempts with exponential backoff.
pub struct HttpTranslator {
    name: String,
    endpoint: String,
    api_key_env: String,
    agent: ureq::Agent,
    backoff: Duration,
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    q: &'a str,
    source: &'a str,
    target: &'a str,
    format: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct HttpResponse {
    #[serde(rename = "translatedText")]
    translated_text: String,
}

pub const HTTP_ATTEMPTS: usize = 3;

impl HttpTranslator {
    pub fn new(name: impl Into<String>, endpoint: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            name: name.into(),
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            api_key_env: api_key_env.into(),
            agent,
            backoff: Duration::from_millis(250),
        }
    }

    /// First retry delay; doubles on each further attempt.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &[u8]) -> std::result::Result<String, (bool, Error)> {
        let url = format!("{}/translate", self.endpoint);
        let mut resp = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| (true, Error::Transport(format!("{url}: {e}"))))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| (true, Error::Transport(format!("{url}: {e}"))))?;
        if !(200..300).contains(&status) {
            let retry = status == 429 || status >= 500;
            return Err((
                retry,
                Error::Remote {
                    status,
                    code: "translate_failed".into(),
                    message: text,
                },
            ));
        }
        serde_json::from_str::<HttpResponse>(&text)
            .map(|r| r.translated_text)
            .map_err(|e| (false, Error::from(e)))
    }
}

impl Translator for HttpTranslator {
    fn name(&self) -> &str {
        &self.name
    }

    fn translate(&self, text: &str, source_lang: &str, target_lang: &str) -> Result<String> {
        let body = serde_json::to_vec(&HttpRequest {
            q: text,
            source: source_lang,
            target: target_lang,
            format: "text",
            api_key: std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty()),
        })?;
        let mut delay = self.backoff;
        let mut last = None;
        for attempt in 0..HTTP_ATTEMPTS {
            match self.attempt(&body) {
                Ok(t) => return Ok(t),
                Err((retry, e)) => {
                    log::warn!("{} attempt {} failed: {e}", self.name, attempt + 1);
                    if !retry {
                        return Err(e);
                    }
                    last = Some(e);
                    if attempt + 1 < HTTP_ATTEMPTS {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    client: String,
    source: String,
    target: String,
    text: String,
    translation: String,
}

/// Disk cache in front of another client. Entries live at
/// `<dir>/<k[0..2]>/<k>.json` where `k` is the hex SHA-256 of
/// `client \0 source \0 target \0 text`.
pub struct CachedTranslator<T> {
    inner: T,
    dir: PathBuf,
    cache_only: bool,
    write_lock: Mutex<()>,
}

impl<T: Translator> CachedTranslator<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
            cache_only: false,
            write_lock: Mutex::new(()),
        }
    }

    /// Cache under `$BABEL_CACHE_DIR`.
    pub fn from_env(inner: T) -> Result<Self> {
        let dir = std::env::var(CACHE_DIR_ENV).map_err(|_| Error::Config(format!("{CACHE_DIR_ENV} is not set")))?;
        Ok(Self::new(inner, dir))
    }

    /// Never call the inner client; a miss is an error.
    pub fn cache_only(mut self, yes: bool) -> Self {
        self.cache_only = yes;
        self
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }

    pub fn key(&self, text: &str, source_lang: &str, target_lang: &str) -> String {
        let mut h = Sha256::new();
        for part in [self.inner.name(), source_lang, target_lang] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        h.update(text.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn entry_path(&self, text: &str, source_lang: &str, target_lang: &str) -> PathBuf {
        let k = self.key(text, source_lang, target_lang);
        self.dir.join(&k[..2]).join(format!("{k}.json"))
    }
}

impl<T: Translator> Translator for CachedTranslator<T> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn translate(&self, text: &str, source_lang: &str, target_lang: &str) -> Result<String> {
        let path = self.entry_path(text, source_lang, target_lang);
        if let Ok(bytes) = std::fs::read(&path) {
            let entry: CacheEntry = serde_json::from_slice(&bytes)?;
            if entry.text == text && entry.client == self.inner.name() {
                return Ok(entry.translation);
            }
            log::warn!("cache entry {} does not match its key; ignoring", path.display());
        }
        if self.cache_only {
            return Err(Error::NotReady(format!("no cached translation at {}", path.display())));
        }
        let translation = self.inner.translate(text, source_lang, target_lang)?;
        let entry = CacheEntry {
            client: self.inner.name().to_string(),
            source: source_lang.to_string(),
            target: target_lang.to_string(),
            text: text.to_string(),
            translation: translation.clone(),
        };
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let parent = path.parent().expect("entry path has a parent");
        std::fs::create_dir_all(parent)?;
        let tmp = parent.join(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("entry")
        ));
        std::fs::write(&tmp, serde_json::to_vec(&entry)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(translation)
    }
}
