use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use planner_core::backend::{BackendError, RemoteChat, PREAMBLE};
use planner_core::{BackendConfig, PlanBackend, SessionRecord};
use serde_json::Value;

/// One-shot HTTP server: answers the first request with `status` and `body`
/// after `delay`, and hands back the request body it saw.
fn stub(status: u16, body: &'static str, delay: Duration) -> (SocketAddr, mpsc::Receiver<Value>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    length = v.trim().parse().unwrap();
                }
            }
        }
        let mut buf = vec![0; length];
        reader.read_exact(&mut buf).unwrap();
        let _ = tx.send(serde_json::from_slice(&buf).unwrap_or(Value::Null));
        thread::sleep(delay);
        let mut stream = stream;
        let _ = write!(
            stream,
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        );
    });
    (addr, rx)
}

fn backend(addr: SocketAddr, timeout: f64) -> RemoteChat {
    let mut config = BackendConfig::remote(format!("http://{addr}/v1/chat/completions"));
    config.timeout = timeout;
    RemoteChat::new(config).unwrap()
}

fn record() -> SessionRecord {
    SessionRecord::request("fetch me an orange").unwrap()
}

#[test]
fn reply_content_is_returned_verbatim() {
    let (addr, seen) = stub(
        200,
        r#"{"choices":[{"message":{"role":"assistant","content":"PLAN: go(table) ; pick(orange)"}}]}"#,
        Duration::ZERO,
    );
    let reply = backend(addr, 5.0).plan(&record()).unwrap();
    assert_eq!(reply.text, "PLAN: go(table) ; pick(orange)");
    assert!(reply.latency >= 0.0);
    let body = seen.recv().unwrap();
    assert_eq!(body["messages"][0]["content"], PREAMBLE);
    assert!(body["messages"][1]["content"].as_str().unwrap().starts_with("<history> none\n<user> fetch me an orange"));
}

#[test]
fn slow_endpoint_times_out() {
    let (addr, _seen) = stub(200, r#"{"choices":[]}"#, Duration::from_secs(3));
    assert!(matches!(backend(addr, 0.3).plan(&record()), Err(BackendError::Timeout(_))));
}

#[test]
fn closed_port_is_unavailable() {
    let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    assert!(matches!(backend(addr, 2.0).plan(&record()), Err(BackendError::Unavailable(_))));
}

#[test]
fn bad_answers_are_unavailable() {
    for (status, body) in [(500, r#"{"error":"boom"}"#), (200, "not json"), (200, r#"{"choices":[]}"#)] {
        let (addr, _seen) = stub(status, body, Duration::ZERO);
        let err = backend(addr, 5.0).plan(&record()).unwrap_err();
        assert!(matches!(err, BackendError::Unavailable(_)), "{status} {body}: {err}");
    }
}
