mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use bitextkit::corpus::{Corpus, DomainTag, SentencePair};
use bitextkit::filter::{score_corpus, select_top_k, PairScorer, RemoteLossScorer};
use bitextkit::translate::{Direction, RemoteConfig, RemoteTranslator, TranslateError, TranslationCache, Translator, TranslatorGateway};
use common::StubServer;
use serde_json::{json, Value};

fn upper_service() -> StubServer {
    StubServer::start(|path, body| {
        assert_eq!(path, "/translate");
        assert!(body["source_lang"].is_string() && body["target_lang"].is_string());
        let out: Vec<Value> = body["texts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| json!(t.as_str().unwrap().to_uppercase()))
            .collect();
        (200, json!({ "translations": out }))
    })
}

fn config(url: &str, max_batch: usize, retries: usize) -> RemoteConfig {
    RemoteConfig {
        max_batch,
        retries,
        concurrency: 2,
        timeout_secs: 10.0,
        ..RemoteConfig::new(url)
    }
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("câu số {i}")).collect()
}

#[test]
fn remote_batches_and_keeps_order() {
    let server = upper_service();
    let t = RemoteTranslator::new(config(&server.url, 2, 0)).unwrap();
    let input = texts(5);
    let out = t.translate(Direction::VI_EN, &input).unwrap();
    assert_eq!(out, input.iter().map(|s| s.to_uppercase()).collect::<Vec<_>>());
    assert_eq!(server.requests(), 3);
}

#[test]
fn remote_retries_transient_failures() {
    let seen = Arc::new(AtomicUsize::new(0));
    let s = Arc::clone(&seen);
    let server = StubServer::start(move |_, body| {
        if s.fetch_add(1, Ordering::SeqCst) < 2 {
            return (503, json!({"error": "busy"}));
        }
        (200, json!({ "translations": body["texts"] }))
    });
    let t = RemoteTranslator::new(config(&server.url, 8, 3)).unwrap();
    assert_eq!(t.translate(Direction::EN_VI, &texts(3)).unwrap(), texts(3));
    assert_eq!(server.requests(), 3);
}

#[test]
fn remote_gives_up_after_retries() {
    let server = StubServer::start(|_, _| (500, json!({})));
    let t = RemoteTranslator::new(config(&server.url, 8, 1)).unwrap();
    match t.translate(Direction::EN_VI, &texts(2)) {
        Err(TranslateError::Remote { attempts, .. }) => assert_eq!(attempts, 2),
        other => panic!("expected a remote error, got {other:?}"),
    }
}

#[test]
fn remote_rejects_wrong_count() {
    let server = StubServer::start(|_, _| (200, json!({"translations": ["only one"]})));
    let t = RemoteTranslator::new(config(&server.url, 8, 0)).unwrap();
    assert!(matches!(t.translate(Direction::EN_VI, &texts(2)), Err(TranslateError::Remote { .. })));
}

#[test]
fn gateway_sends_each_distinct_text_once() {
    let server = upper_service();
    let backend = RemoteTranslator::new(config(&server.url, 4, 0)).unwrap();
    let gateway = TranslatorGateway::new(Arc::new(backend), Arc::new(TranslationCache::new()));
    let mut input = texts(6);
    input.extend(texts(6));
    gateway.translate(Direction::VI_EN, &input).unwrap();
    gateway.translate(Direction::VI_EN, &input).unwrap();
    assert_eq!(gateway.backend_translations(), 6);
    assert_eq!(server.requests(), 2);
}

#[test]
fn remote_loss_scorer_ranks_by_loss() {
    let server = StubServer::start(|path, body| {
        assert_eq!(path, "/score");
        let losses: Vec<f64> = body["pairs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p["en"].as_str().unwrap().len() as f64)
            .collect();
        (200, json!({ "losses": losses }))
    });
    let scorer = RemoteLossScorer::new(config(&server.url, 2, 0)).unwrap();
    assert!(!scorer.higher_is_better());
    let corpus = Corpus::new(
        "c",
        ["long sentence here", "a", "mid size", "xy"]
            .iter()
            .map(|e| SentencePair::new(*e, "v", DomainTag::Law, 2, "t"))
            .collect(),
    );
    let scored = score_corpus(&corpus, &scorer, None).unwrap();
    let scores: Vec<f64> = scored.pairs.iter().map(|p| p.score.unwrap()).collect();
    assert_eq!(scores, [18.0, 1.0, 8.0, 2.0]);
    let best = select_top_k(&scored, 2, scorer.higher_is_better()).unwrap();
    assert_eq!(best.pairs.iter().map(|p| p.en.as_str()).collect::<Vec<_>>(), ["a", "xy"]);
    assert_eq!(server.requests(), 2);
}
