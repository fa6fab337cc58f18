//! Serve a reference backend over HTTP and use it through the remote client.
//!
//! Any server speaking the same JSON protocol can stand in for the
//! in-process one; see docs/protocol.md.

use std::sync::Arc;

use babel::backend::reference::ClassifierTraining;
use babel::backend::{
    ModelBackend, ProtocolServer, ReferenceBackend, ReferenceConfig, RemoteBackend, RemoteConfig, Vocabulary,
};

pub fn run_example() -> babel::Result<()> {
    let mut backend = ReferenceBackend::new(ReferenceConfig::new(
        5,
        8,
        Vocabulary::printable_ascii(),
        vec!["formal".into(), "informal".into()],
        vec!["es".into()],
    ))?;
    let examples: Vec<(String, String)> = [
        ("EL TRIBUNAL DEBERA ORDENAR EL PAGO.", "formal"),
        ("LA REINA DEBERA LEER LA CARTA.", "formal"),
        ("el tribunal va a ordenar el pago ok.", "informal"),
        ("la reina va a leer la carta, vale.", "informal"),
    ]
    .iter()
    .map(|(t, l)| (t.to_string(), l.to_string()))
    .collect();
    backend.train_classifier("es", &examples, ClassifierTraining::default())?;

    let server = ProtocolServer::spawn(Arc::new(backend), "127.0.0.1:0", None)?;
    println!("serving on {}", server.url());

    let mut config = RemoteConfig::new(server.url());
    config.token = None;
    let remote = RemoteBackend::connect(config)?;
    let d = remote.descriptor();
    println!(
        "handshake: dim {}, vocab {}, labels {:?}",
        d.embedding_dim, d.vocab_size, d.style_labels
    );

    for text in ["EL JUEZ DEBERA FIRMAR.", "el juez va a firmar ok."] {
        let dist = remote.classify_style(text, "es")?;
        let probs: Vec<String> = dist.iter().map(|(l, p)| format!("{l}={p:.3}")).collect();
        println!("{text:<28} {}", probs.join(" "));
    }
    Ok(())
}

fn main() -> babel::Result<()> {
    run_example()
}
