use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use babel::harness::synthetic::style_stripping_translator;
use babel::harness::translate::{
    CachedTranslator, DictionaryTranslator, HttpTranslator, IdentityTranslator, StripPolicy, Translator, HTTP_ATTEMPTS,
};
use babel::{Error, Result};
use serde_json::Value;

/// Serves the scripted `(status, body)` responses in order, then repeats
/// the last one. Returns the base URL and the captured request bodies.
fn stub(script: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<Value>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock()
                .unwrap()
                .push(serde_json::from_slice(&body).unwrap_or(Value::Null));
            let (status, reply) = script[i.min(script.len() - 1)];
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    (url, seen)
}

fn http(url: &str) -> HttpTranslator {
    HttpTranslator::new("http-test", url, "BABEL_TEST_UNSET_KEY").with_backoff(Duration::from_millis(1))
}

#[test]
fn http_request_shape() {
    let (url, seen) = stub(vec![(200, r#"{"translatedText":"hola"}"#)]);
    assert_eq!(http(&url).translate("hello", "en", "es").unwrap(), "hola");
    let req = seen.lock().unwrap()[0].clone();
    assert_eq!(req["q"], "hello");
    assert_eq!(req["source"], "en");
    assert_eq!(req["target"], "es");
    assert!(req.get("api_key").is_none());
}

#[test]
fn server_errors_are_retried() {
    let (url, seen) = stub(vec![(503, "{}"), (429, "{}"), (200, r#"{"translatedText":"ok"}"#)]);
    assert_eq!(http(&url).translate("x", "en", "es").unwrap(), "ok");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn retries_are_bounded() {
    let (url, seen) = stub(vec![(500, r#"{"error":"boom"}"#)]);
    let err = http(&url).translate("x", "en", "es").unwrap_err();
    assert!(matches!(err, Error::Remote { status: 500, .. }), "{err}");
    assert_eq!(seen.lock().unwrap().len(), HTTP_ATTEMPTS);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = stub(vec![(400, "{}"), (200, r#"{"translatedText":"late"}"#)]);
    assert!(matches!(
        http(&url).translate("x", "en", "es"),
        Err(Error::Remote { status: 400, .. })
    ));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_success_is_an_error() {
    let (url, seen) = stub(vec![(200, r#"{"text":"wrong field"}"#)]);
    assert!(http(&url).translate("x", "en", "es").is_err());
    assert_eq!(seen.lock().unwrap().len(), 1);
}

struct Counting(AtomicUsize);

impl Translator for Counting {
    fn name(&self) -> &str {
        "counting"
    }
    fn translate(&self, text: &str, _: &str, _: &str) -> Result<String> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Ok(text.to_uppercase())
    }
}

#[test]
fn cache_serves_repeats_without_calling_through() {
    let dir = tempfile::tempdir().unwrap();
    let cached = CachedTranslator::new(Counting(AtomicUsize::new(0)), dir.path());
    assert_eq!(cached.translate("abc", "en", "es").unwrap(), "ABC");
    assert_eq!(cached.translate("abc", "en", "es").unwrap(), "ABC");
    assert_eq!(cached.translate("abc", "en", "fr").unwrap(), "ABC");
    assert_eq!(cached.inner().0.load(Ordering::SeqCst), 2);
    assert!(cached.entry_path("abc", "en", "es").exists());
}

#[test]
fn cache_key_covers_client_languages_and_text() {
    let dir = tempfile::tempdir().unwrap();
    let a = CachedTranslator::new(IdentityTranslator, dir.path());
    let b = CachedTranslator::new(Counting(AtomicUsize::new(0)), dir.path());
    let k = a.key("t", "en", "es");
    assert_eq!(k.len(), 64);
    assert_ne!(k, b.key("t", "en", "es"));
    assert_ne!(k, a.key("t", "es", "en"));
    assert_ne!(k, a.key("t ", "en", "es"));
    assert_eq!(k, a.key("t", "en", "es"));
    let p = a.entry_path("t", "en", "es");
    assert_eq!(p.parent().unwrap().file_name().unwrap().to_str().unwrap(), &k[..2]);
}

#[test]
fn cache_only_misses_are_errors_and_hits_need_no_network() {
    let dir = tempfile::tempdir().unwrap();
    let offline = CachedTranslator::new(http("http://127.0.0.1:9"), dir.path()).cache_only(true);
    assert!(offline.translate("hello", "en", "es").is_err());

    let (url, _) = stub(vec![(200, r#"{"translatedText":"hola"}"#)]);
    let online = CachedTranslator::new(http(&url), dir.path());
    online.translate("hello", "en", "es").unwrap();
    assert_eq!(offline.translate("hello", "en", "es").unwrap(), "hola");
}

#[test]
fn dictionary_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let original = style_stripping_translator(0.5, 3);
    let path = dir.path().join("dict.json");
    std::fs::write(&path, serde_json::to_string(&original).unwrap()).unwrap();
    let loaded = DictionaryTranslator::load(&path).unwrap();
    for text in [
        "The court shall hereby order the payment.",
        "the poet is gonna write the letter.",
    ] {
        assert_eq!(
            loaded.translate(text, "en", "es").unwrap(),
            original.translate(text, "en", "es").unwrap()
        );
    }
    assert_eq!(loaded.strip, StripPolicy::Fraction { fraction: 0.5, seed: 3 });
}
