//! Minimal HTTP/1.1 server exposing any [`ModelBackend`] over the wire
//! protocol. Intended for tests, examples and local experiments; one thread
//! per connection, `Connection: close` on every response.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::remote::wire::*;
use super::{Capability, ModelBackend, TokenSequence};
use crate::diffusion::Timestep;
use crate::error::Error;
use crate::tensor::EmbeddingMatrix;

const MAX_REQUEST_BYTES: usize = 64 * 1024 * 1024;

/// A running protocol server. Stops when dropped.
pub struct ProtocolServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ProtocolServer {
    /// Bind `addr` (use port 0 for an ephemeral port) and serve `backend`.
    /// When `token` is set, requests must carry `Authorization: Bearer <token>`.
    pub fn spawn(backend: Arc<dyn ModelBackend>, addr: &str, token: Option<String>) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let token = Arc::new(token);
        let thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let backend = backend.clone();
                let token = token.clone();
                std::thread::spawn(move || {
                    if let Err(e) = serve_connection(stream, backend.as_ref(), token.as_deref()) {
                        log::debug!("connection error: {e}");
                    }
                });
            }
        });
        Ok(Self {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for ProtocolServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve_connection(stream: TcpStream, backend: &dyn ModelBackend, token: Option<&str>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Ok(());
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let target = parts.next().unwrap_or("");
    // Queries carry no meaning here; route on the path alone.
    let path = target.split('?').next().unwrap_or("").to_string();
    let mut content_length = 0usize;
    let mut authorization = None;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 {
            break;
        }
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            let value = value.trim();
            match name.trim().to_ascii_lowercase().as_str() {
                "content-length" => content_length = value.parse().unwrap_or(0),
                "authorization" => authorization = Some(value.to_string()),
                _ => {}
            }
        }
    }
    let (status, body) = if content_length > MAX_REQUEST_BYTES {
        error_response(413, "too_large", "request body too large")
    } else {
        let mut body = vec![0; content_length];
        reader.read_exact(&mut body)?;
        let authorised = match token {
            None => true,
            Some(t) => authorization.as_deref() == Some(&format!("Bearer {t}")),
        };
        if authorised {
            handle_request(backend, &method, &path, &body)
        } else {
            error_response(401, "unauthorized", "missing or wrong bearer token")
        }
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        reason(status),
        body.len()
    )?;
    stream.write_all(body.as_bytes())?;
    stream.flush()
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        400 => "Bad Request",
        401 => "Unauthorized",
        404 => "Not Found",
        405 => "Method Not Allowed",
        413 => "Payload Too Large",
        422 => "Unprocessable Entity",
        503 => "Service Unavailable",
        _ => "Internal Server Error",
    }
}

fn error_response(status: u16, code: &str, message: impl Into<String>) -> (u16, String) {
    let body = ErrorBody {
        code: code.into(),
        message: message.into(),
    };
    (status, serde_json::to_string(&body).expect("error body serialises"))
}

fn from_error(e: Error) -> (u16, String) {
    let (status, code) = match &e {
        Error::Unsupported(_) => (422, "unsupported"),
        Error::NotReady(_) => (503, "not_ready"),
        e if e.is_validation() => (400, "invalid_request"),
        _ => (500, "internal"),
    };
    error_response(status, code, e.to_string())
}

fn ok<T: serde::Serialize>(value: &T) -> (u16, String) {
    match serde_json::to_string(value) {
        Ok(s) => (200, s),
        Err(e) => error_response(500, "internal", e.to_string()),
    }
}

const ROUTES: [&str; 8] = [
    "/v1/capabilities",
    "/v1/tokenize",
    "/v1/detokenize",
    "/v1/embed",
    "/v1/style_embed",
    "/v1/classify",
    "/v1/paraphrase",
    "/v1/denoise",
];

/// Dispatch one request to `backend`. Returns the status and JSON body.
pub fn handle_request(backend: &dyn ModelBackend, method: &str, path: &str, body: &[u8]) -> (u16, String) {
    let d = backend.descriptor();
    let vocab = d.vocab_size as u32;
    let ids = |v: Vec<u32>| TokenSequence::new(v, vocab);

    macro_rules! parse {
        ($t:ty) => {
            match serde_json::from_slice::<$t>(body) {
                Ok(v) => v,
                Err(e) => return error_response(400, "bad_json", e.to_string()),
            }
        };
    }
    macro_rules! try_ {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => return from_error(e),
            }
        };
    }

    match (method, path) {
        ("GET", "/v1/capabilities") => ok(&Capabilities {
            embedding_dim: d.embedding_dim,
            vocab_size: d.vocab_size,
            style_labels: d.style_labels.clone(),
            languages: d.languages.clone(),
            max_sequence_len: d.max_sequence_len,
            capabilities: Capability::ALL.into_iter().filter(|c| d.supports(*c)).collect(),
        }),
        ("POST", "/v1/tokenize") => {
            let r = parse!(TextBody);
            let t = try_!(backend.tokenize(&r.text));
            ok(&IdsBody { ids: t.ids().to_vec() })
        }
        ("POST", "/v1/detokenize") => {
            let r = parse!(IdsBody);
            let t = try_!(ids(r.ids));
            ok(&TextBody {
                text: try_!(backend.detokenize(&t)),
            })
        }
        ("POST", "/v1/embed") => match parse!(EmbedRequest) {
            EmbedRequest::Tokens { ids: v } => {
                let t = try_!(ids(v));
                let e = try_!(backend.embed_tokens(&t));
                ok(&EmbeddingsBody {
                    embeddings: e.to_rows(),
                })
            }
            EmbedRequest::Sentence { text } => ok(&EmbeddingBody {
                embedding: try_!(backend.sentence_embed(&text)),
            }),
        },
        ("POST", "/v1/style_embed") => match parse!(StyleEmbedRequest) {
            StyleEmbedRequest::Text { text } => ok(&EmbeddingBody {
                embedding: try_!(backend.style_embed(&text)),
            }),
            StyleEmbedRequest::Head { pooled } => ok(&EmbeddingBody {
                embedding: try_!(backend.style_head(&pooled)),
            }),
            StyleEmbedRequest::Vjp { pooled, cotangent } => ok(&GradientBody {
                gradient: try_!(backend.style_head_vjp(&pooled, &cotangent)),
            }),
        },
        ("POST", "/v1/classify") => {
            let r = parse!(ClassifyRequest);
            let dist = try_!(backend.classify_style(&r.text, &r.language));
            ok(&ClassifyResponse {
                labels: dist.labels().to_vec(),
                probs: dist.probs().to_vec(),
            })
        }
        ("POST", "/v1/paraphrase") => {
            let r = parse!(ParaphraseRequest);
            ok(&TextBody {
                text: try_!(backend.paraphrase(&r.text, r.seed)),
            })
        }
        ("POST", "/v1/denoise") => {
            let r = parse!(DenoiseRequest);
            let step = try_!(Timestep::new(r.t, r.total_steps));
            let cond = try_!(ids(r.condition));
            let x = if r.x_t.is_empty() {
                EmbeddingMatrix::zeros(0, d.embedding_dim)
            } else {
                try_!(EmbeddingMatrix::from_rows(&r.x_t))
            };
            let logits = try_!(backend.denoise(&x, step, &cond));
            ok(&DenoiseResponse {
                logits: logits.to_rows(),
            })
        }
        (_, p) if ROUTES.contains(&p) => error_response(405, "method_not_allowed", format!("{method} {p}")),
        _ => error_response(404, "not_found", format!("no route for {method} {path}")),
    }
}
