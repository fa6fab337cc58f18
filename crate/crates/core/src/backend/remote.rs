//! JSON-over-HTTP client for an external model server.
//!
//! The wire format is documented in `docs/protocol.md`; the request and
//! response bodies below are its single source of truth on this side.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::Duration;

use super::{BackendDescriptor, BackendKind, Capability, ModelBackend, StyleDistribution, TokenSequence};
use crate::diffusion::Timestep;
use crate::error::{Error, Result};
use crate::tensor::{EmbeddingMatrix, LogitsMatrix, Matrix};

/// Environment variable holding an optional bearer token for the server.
pub const TOKEN_ENV: &str = "BABEL_BACKEND_TOKEN";

const MAX_BODY_BYTES: u64 = 256 * 1024 * 1024;

pub(crate) mod wire {
    use super::*;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct Capabilities {
        pub embedding_dim: usize,
        pub vocab_size: usize,
        pub style_labels: Vec<String>,
        pub languages: Vec<String>,
        pub max_sequence_len: usize,
        #[serde(default)]
        pub capabilities: Vec<Capability>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct TextBody {
        pub text: String,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct IdsBody {
        pub ids: Vec<u32>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(untagged, deny_unknown_fields)]
    pub enum EmbedRequest {
        Tokens { ids: Vec<u32> },
        Sentence { text: String },
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct EmbeddingsBody {
        pub embeddings: Vec<Vec<f64>>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct EmbeddingBody {
        pub embedding: Vec<f64>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(untagged, deny_unknown_fields)]
    pub enum StyleEmbedRequest {
        Vjp { pooled: Vec<f64>, cotangent: Vec<f64> },
        Head { pooled: Vec<f64> },
        Text { text: String },
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct GradientBody {
        pub gradient: Vec<f64>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct ClassifyRequest {
        pub text: String,
        pub language: String,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct ClassifyResponse {
        pub labels: Vec<String>,
        pub probs: Vec<f64>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct ParaphraseRequest {
        pub text: String,
        pub seed: u64,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct DenoiseRequest {
        pub x_t: Vec<Vec<f64>>,
        pub t: usize,
        pub total_steps: usize,
        pub condition: Vec<u32>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct DenoiseResponse {
        pub logits: Vec<Vec<f64>>,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ErrorBody {
        pub code: String,
        pub message: String,
    }
}

use wire::*;

/// Connection settings for [`RemoteBackend`].
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8700`.
    pub endpoint: String,
    pub timeout: Duration,
    /// Upper bound on concurrent requests from this handle.
    pub max_in_flight: usize,
    /// Bearer token; read from [`TOKEN_ENV`] by [`RemoteConfig::new`].
    pub token: Option<String>,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            timeout: Duration::from_secs(60),
            max_in_flight: 8,
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
        }
    }
}

struct InFlight {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        Permit(self)
    }

    #[cfg(test)]
    fn in_use(&self) -> usize {
        *self.used.lock().unwrap()
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

/// Client for a model server speaking the backend wire protocol.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    descriptor: BackendDescriptor,
    in_flight: InFlight,
    table: OnceLock<Arc<EmbeddingMatrix>>,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.config.endpoint)
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl RemoteBackend {
    /// Connect and perform the capabilities handshake. Fails if the server
    /// does not declare every capability.
    pub fn connect(config: RemoteConfig) -> Result<Self> {
        if config.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        if !config.endpoint.starts_with("http://") {
            return Err(Error::Config(format!(
                "endpoint must be an http:// URL, got {:?}",
                config.endpoint
            )));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut backend = Self {
            in_flight: InFlight {
                limit: config.max_in_flight,
                used: Mutex::new(0),
                freed: Condvar::new(),
            },
            config,
            agent,
            descriptor: BackendDescriptor {
                kind: BackendKind::Remote,
                embedding_dim: 0,
                vocab_size: 0,
                style_labels: Vec::new(),
                languages: Vec::new(),
                max_sequence_len: 0,
                capabilities: Vec::new(),
                endpoint: None,
            },
            table: OnceLock::new(),
        };
        let caps: Capabilities = backend.request("GET", "/v1/capabilities", None::<&()>)?;
        let missing: Vec<_> = Capability::ALL
            .iter()
            .filter(|c| !caps.capabilities.contains(c))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Unsupported(format!(
                "server at {} lacks capabilities {missing:?}",
                backend.config.endpoint
            )));
        }
        if caps.embedding_dim == 0 || caps.vocab_size == 0 || caps.style_labels.is_empty() {
            return Err(Error::validation(format!(
                "degenerate capabilities from server: {caps:?}"
            )));
        }
        backend.descriptor = BackendDescriptor {
            kind: BackendKind::Remote,
            embedding_dim: caps.embedding_dim,
            vocab_size: caps.vocab_size,
            style_labels: caps.style_labels,
            languages: caps.languages,
            max_sequence_len: caps.max_sequence_len,
            capabilities: caps.capabilities,
            endpoint: Some(backend.config.endpoint.clone()),
        };
        Ok(backend)
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn request<B: Serialize, R: DeserializeOwned>(&self, method: &str, path: &str, body: Option<&B>) -> Result<R> {
        let _permit = self.in_flight.acquire();
        let url = format!("{}{}", self.config.endpoint, path);
        let auth = self.config.token.as_ref().map(|t| format!("Bearer {t}"));
        let response = match (method, body) {
            ("GET", _) => {
                let mut req = self.agent.get(&url);
                if let Some(a) = &auth {
                    req = req.header("Authorization", a);
                }
                req.call()
            }
            (_, body) => {
                let mut req = self.agent.post(&url);
                if let Some(a) = &auth {
                    req = req.header("Authorization", a);
                }
                let payload = serde_json::to_vec(&body)?;
                req.header("Content-Type", "application/json").send(&payload[..])
            }
        };
        let mut response = response.map_err(|e| Error::Transport(format!("{url}: {e}")))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_string()
            .map_err(|e| Error::Transport(format!("{url}: {e}")))?;
        if !(200..300).contains(&status) {
            let (code, message) = match serde_json::from_str::<ErrorBody>(&text) {
                Ok(b) => (b.code, b.message),
                Err(_) => ("http_error".to_string(), text),
            };
            return Err(Error::Remote { status, code, message });
        }
        serde_json::from_str(&text).map_err(|e| Error::Remote {
            status,
            code: "bad_response".into(),
            message: format!("{path}: {e}"),
        })
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R> {
        self.request("POST", path, Some(body))
    }

    fn embedding_matrix(&self, rows: Vec<Vec<f64>>, expected_rows: usize) -> Result<EmbeddingMatrix> {
        if rows.len() != expected_rows {
            return Err(Error::shape(expected_rows, rows.len()));
        }
        if expected_rows == 0 {
            return Ok(EmbeddingMatrix::zeros(0, self.descriptor.embedding_dim));
        }
        let m = EmbeddingMatrix::from_rows(&rows)?;
        if m.cols() != self.descriptor.embedding_dim {
            return Err(Error::shape(self.descriptor.embedding_dim, m.cols()));
        }
        Ok(m)
    }

    fn check_vector(&self, v: &[f64], what: &str) -> Result<()> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric(what, "server returned a non-finite value"));
        }
        Ok(())
    }
}

impl ModelBackend for RemoteBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        let r: IdsBody = self.post("/v1/tokenize", &TextBody { text: text.into() })?;
        TokenSequence::new(r.ids, self.descriptor.vocab_size as u32)
    }

    fn detokenize(&self, tokens: &TokenSequence) -> Result<String> {
        if tokens.vocab_size() as usize != self.descriptor.vocab_size {
            return Err(Error::validation("token sequence from a different vocabulary"));
        }
        let r: TextBody = self.post(
            "/v1/detokenize",
            &IdsBody {
                ids: tokens.ids().to_vec(),
            },
        )?;
        Ok(r.text)
    }

    fn embed_tokens(&self, tokens: &TokenSequence) -> Result<EmbeddingMatrix> {
        let r: EmbeddingsBody = self.post(
            "/v1/embed",
            &EmbedRequest::Tokens {
                ids: tokens.ids().to_vec(),
            },
        )?;
        self.embedding_matrix(r.embeddings, tokens.len())
    }

    fn token_embedding_table(&self) -> Result<Arc<EmbeddingMatrix>> {
        if let Some(t) = self.table.get() {
            return Ok(t.clone());
        }
        let all = TokenSequence::new(
            (0..self.descriptor.vocab_size as u32).collect(),
            self.descriptor.vocab_size as u32,
        )?;
        let table = Arc::new(self.embed_tokens(&all)?);
        Ok(self.table.get_or_init(|| table).clone())
    }

    fn style_embed(&self, text: &str) -> Result<Vec<f64>> {
        let r: EmbeddingBody = self.post("/v1/style_embed", &StyleEmbedRequest::Text { text: text.into() })?;
        self.check_vector(&r.embedding, "style_embed")?;
        Ok(r.embedding)
    }

    fn style_head(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        let r: EmbeddingBody = self.post(
            "/v1/style_embed",
            &StyleEmbedRequest::Head {
                pooled: pooled.to_vec(),
            },
        )?;
        self.check_vector(&r.embedding, "style_head")?;
        Ok(r.embedding)
    }

    fn style_head_vjp(&self, pooled: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        let r: GradientBody = self.post(
            "/v1/style_embed",
            &StyleEmbedRequest::Vjp {
                pooled: pooled.to_vec(),
                cotangent: cotangent.to_vec(),
            },
        )?;
        if r.gradient.len() != pooled.len() {
            return Err(Error::shape(pooled.len(), r.gradient.len()));
        }
        self.check_vector(&r.gradient, "style_head_vjp")?;
        Ok(r.gradient)
    }

    fn sentence_embed(&self, text: &str) -> Result<Vec<f64>> {
        let r: EmbeddingBody = self.post("/v1/embed", &EmbedRequest::Sentence { text: text.into() })?;
        self.check_vector(&r.embedding, "sentence_embed")?;
        Ok(r.embedding)
    }

    fn classify_style(&self, text: &str, language: &str) -> Result<StyleDistribution> {
        let r: ClassifyResponse = self.post(
            "/v1/classify",
            &ClassifyRequest {
                text: text.into(),
                language: language.into(),
            },
        )?;
        StyleDistribution::new(r.labels, r.probs)
    }

    fn paraphrase(&self, text: &str, seed: u64) -> Result<String> {
        let r: TextBody = self.post(
            "/v1/paraphrase",
            &ParaphraseRequest {
                text: text.into(),
                seed,
            },
        )?;
        Ok(r.text)
    }

    fn denoise(&self, x_t: &EmbeddingMatrix, t: Timestep, condition: &TokenSequence) -> Result<LogitsMatrix> {
        let r: DenoiseResponse = self.post(
            "/v1/denoise",
            &DenoiseRequest {
                x_t: x_t.to_rows(),
                t: t.t,
                total_steps: t.total,
                condition: condition.ids().to_vec(),
            },
        )?;
        if r.logits.len() != x_t.rows() {
            return Err(Error::shape(x_t.rows(), r.logits.len()));
        }
        let m = if r.logits.is_empty() {
            Matrix::zeros(0, self.descriptor.vocab_size)
        } else {
            Matrix::from_rows(&r.logits)?
        };
        if m.cols() != self.descriptor.vocab_size {
            return Err(Error::shape(self.descriptor.vocab_size, m.cols()));
        }
        if let Some((row, _)) = m.first_non_finite() {
            return Err(Error::numeric(
                format!("denoise position {row}"),
                "server returned a non-finite logit",
            ));
        }
        Ok(LogitsMatrix::from_matrix_unchecked(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permits_are_bounded_and_released() {
        let gate = Arc::new(InFlight {
            limit: 2,
            used: Mutex::new(0),
            freed: Condvar::new(),
        });
        let peak = Arc::new(Mutex::new(0usize));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let gate = gate.clone();
                let peak = peak.clone();
                std::thread::spawn(move || {
                    let _p = gate.acquire();
                    let now = gate.in_use();
                    let mut pk = peak.lock().unwrap();
                    *pk = (*pk).max(now);
                    drop(pk);
                    std::thread::sleep(Duration::from_millis(5));
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(*peak.lock().unwrap() <= 2);
        assert_eq!(gate.in_use(), 0);
    }

    #[test]
    fn rejects_non_http_endpoints() {
        let cfg = RemoteConfig::new("ftp://example");
        assert!(matches!(RemoteBackend::connect(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn untagged_requests_pick_the_right_shape() {
        let r: StyleEmbedRequest = serde_json::from_str(r#"{"pooled":[1.0]}"#).unwrap();
        assert!(matches!(r, StyleEmbedRequest::Head { .. }));
        let r: StyleEmbedRequest = serde_json::from_str(r#"{"pooled":[1.0],"cotangent":[2.0]}"#).unwrap();
        assert!(matches!(r, StyleEmbedRequest::Vjp { .. }));
        let r: EmbedRequest = serde_json::from_str(r#"{"text":"x"}"#).unwrap();
        assert!(matches!(r, EmbedRequest::Sentence { .. }));
    }
}
