//! HTTP adapter against a throwaway local server.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use sewtree::commands::Scorer;
use sewtree::extractor::{AdapterConfig, ExtractError, Extractor, Fallback, HttpAdapter};
use sewtree_core::extract::{InstructionDoc, PatternSpec};
use sewtree_core::pipeline::DiagnosticKind;
use sewtree_core::tree::parse_serialized;
use sewtree_core::PieceLabel;

#[derive(Clone, Copy)]
enum Reply {
    Json(&'static str),
    Status(u16),
    Hang,
    /// Answers from the request's inventory after a short pause.
    EchoAll,
}

struct Server {
    url: String,
    requests: Arc<Mutex<Vec<String>>>,
    max_in_flight: Arc<AtomicUsize>,
}

fn serve(reply: Reply) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/extract", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let max_in_flight = Arc::new(AtomicUsize::new(0));
    let (reqs, inf, maxf) = (requests.clone(), in_flight.clone(), max_in_flight.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let (reqs, inf, maxf) = (reqs.clone(), inf.clone(), maxf.clone());
            thread::spawn(move || {
                let now = inf.fetch_add(1, Ordering::SeqCst) + 1;
                maxf.fetch_max(now, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        inf.fetch_sub(1, Ordering::SeqCst);
                        return;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let body = String::from_utf8(body).unwrap();
                reqs.lock().unwrap().push(body.clone());
                let (status, text) = match reply {
                    Reply::Json(s) => (200, s.to_string()),
                    Reply::Status(code) => (code, "{}".to_string()),
                    Reply::Hang => {
                        thread::sleep(Duration::from_secs(5));
                        (200, "{\"pieces\":[]}".to_string())
                    }
                    Reply::EchoAll => {
                        thread::sleep(Duration::from_millis(20));
                        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
                        let step = v["step"].as_str().unwrap();
                        let pieces: Vec<&str> = v["inventory"]
                            .as_array()
                            .unwrap()
                            .iter()
                            .map(|p| p.as_str().unwrap())
                            .filter(|p| step.contains(&format!("({p})")))
                            .collect();
                        (200, serde_json::json!({ "pieces": pieces }).to_string())
                    }
                };
                inf.fetch_sub(1, Ordering::SeqCst);
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
            });
        }
    });
    Server {
        url,
        requests,
        max_in_flight,
    }
}

fn p(s: &str) -> PieceLabel {
    PieceLabel::parse(s).unwrap()
}

fn spec() -> PatternSpec {
    PatternSpec::new("skirt", [(p("A"), "Over Skirt"), (p("B"), "Under Skirt"), (p("C"), "Waistband")]).unwrap()
}

fn config(url: &str) -> AdapterConfig {
    let mut c = AdapterConfig::new(url);
    c.timeout = Duration::from_millis(300);
    c.retries = 1;
    c
}

#[test]
fn passes_pieces_through() {
    let s = serve(Reply::Json(r#"{"pieces": ["B", "A", "B"]}"#));
    let a = HttpAdapter::new(config(&s.url));
    let out = a.extract_step(0, "Sew the two skirts together.", &spec()).unwrap();
    assert_eq!(out.extraction.mentions, vec![p("B"), p("A")]);
    assert!(out.diagnostics.is_empty());
    let sent: serde_json::Value = serde_json::from_str(&s.requests.lock().unwrap()[0]).unwrap();
    assert_eq!(sent, serde_json::json!({"step": "Sew the two skirts together.", "inventory": ["A", "B", "C"]}));
}

#[test]
fn rejects_labels_outside_inventory() {
    let s = serve(Reply::Json(r#"{"pieces": ["Q"]}"#));
    let a = HttpAdapter::new(config(&s.url));
    let err = a.extract_step(2, "Sew (A) to (B).", &spec()).unwrap_err();
    assert_eq!(err, ExtractError::UnknownPiece { step_index: 2, label: "Q".into() });
    // Invalid answers are not retried.
    assert_eq!(s.requests.lock().unwrap().len(), 1);
}

#[test]
fn malformed_body_is_an_error() {
    let s = serve(Reply::Json(r#"{"labels": []}"#));
    let a = HttpAdapter::new(config(&s.url));
    assert!(matches!(a.extract_step(0, "x", &spec()), Err(ExtractError::Malformed { .. })));
}

#[test]
fn timeout_fails_by_default() {
    let s = serve(Reply::Hang);
    let a = HttpAdapter::new(config(&s.url));
    let err = a.extract_step(0, "Sew (A) to (B).", &spec()).unwrap_err();
    assert_eq!(err, ExtractError::Timeout { step_index: 0, attempts: 2 });
    assert_eq!(s.requests.lock().unwrap().len(), 2);
}

#[test]
fn timeout_with_fallback_uses_rule_based() {
    let s = serve(Reply::Hang);
    let mut c = config(&s.url);
    c.retries = 0;
    c.fallback = Fallback::RuleBased;
    let a = HttpAdapter::new(c);
    let out = a.extract_step(1, "Sew (A) to (B).", &spec()).unwrap();
    assert_eq!(out.extraction.mentions, vec![p("A"), p("B")]);
    assert_eq!(out.diagnostics.len(), 1);
    assert_eq!(out.diagnostics[0].kind, DiagnosticKind::ExtractorFallback);
}

#[test]
fn server_errors_are_retried() {
    let s = serve(Reply::Status(503));
    let a = HttpAdapter::new(config(&s.url));
    let err = a.extract_step(0, "x", &spec()).unwrap_err();
    assert!(matches!(err, ExtractError::Transport { attempts: 2, .. }), "{err:?}");
    assert_eq!(s.requests.lock().unwrap().len(), 2);
}

#[test]
fn unreachable_adapter() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let a = HttpAdapter::new(config(&format!("http://127.0.0.1:{port}/")));
    assert!(matches!(a.extract_step(0, "x", &spec()), Err(ExtractError::Transport { .. })));
}

fn corpus() -> Vec<InstructionDoc> {
    (0..8)
        .map(|i| InstructionDoc {
            pattern_id: "skirt".into(),
            doc_id: format!("d{i}"),
            steps: vec![
                "Sew the Over Skirt (A) to the Under Skirt (B).".into(),
                "Sew the component containing the Over Skirt (A) to itself.".into(),
                "Sew the component containing the Over Skirt (A) to the Waistband (C).".into(),
            ],
        })
        .collect()
}

fn scorer(url: &str, concurrent: bool) -> Scorer<HttpAdapter> {
    let mut c = config(url);
    c.timeout = Duration::from_secs(5);
    c.concurrent = concurrent;
    let gold = BTreeMap::from([("skirt".to_string(), vec![parse_serialized("(ABC_1 (AB_1 (AB A B)) C)").unwrap()])]);
    let specs = BTreeMap::from([("skirt".to_string(), spec())]);
    Scorer::from_gold(gold, specs, BTreeMap::new(), HttpAdapter::new(c))
}

#[test]
fn non_concurrent_adapter_is_serialized() {
    let s = serve(Reply::EchoAll);
    let rows = scorer(&s.url, false).score_all(&corpus(), 4).unwrap();
    assert!(rows.iter().all(|r| r.as_ref().unwrap().row.tree_f1 == 1.0));
    assert_eq!(s.requests.lock().unwrap().len(), 24);
    assert_eq!(s.max_in_flight.load(Ordering::SeqCst), 1);
}

#[test]
fn concurrent_adapter_runs_in_parallel() {
    let s = serve(Reply::EchoAll);
    let rows = scorer(&s.url, true).score_all(&corpus(), 4).unwrap();
    assert!(rows.iter().all(|r| r.as_ref().unwrap().row.tree_f1 == 1.0));
    assert!(s.max_in_flight.load(Ordering::SeqCst) > 1);
}

#[test]
fn failing_adapter_fails_only_that_document() {
    let s = serve(Reply::Json(r#"{"pieces": ["Z"]}"#));
    let rows = scorer(&s.url, true).score_all(&corpus()[..2], 1).unwrap();
    for r in rows {
        let f = r.unwrap_err();
        assert!(f.message.contains("\"Z\""), "{}", f.message);
    }
}
