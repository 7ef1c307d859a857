use std::net::SocketAddr;
use std::time::Duration;

use axum::routing::post;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use planner_cli::serve::{router, AppState, Created, ErrorFrame, StepReply};
use planner_core::orchestrator::{SessionEvent, SessionSnapshot};
use planner_core::{BackendConfig, SessionState};
use serde_json::{json, Value};
use std::sync::Arc;
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;

async fn spawn(app: Router) -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

async fn service() -> SocketAddr {
    spawn(router(Arc::new(AppState::new(BackendConfig::rule())))).await
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(20)))
        .build()
        .into()
}

/// Blocking HTTP call off the async runtime; returns status and JSON body.
async fn call(method: &'static str, url: String, body: Option<String>) -> (u16, Value) {
    tokio::task::spawn_blocking(move || {
        let agent = agent();
        let mut resp = match method {
            "GET" => agent.get(&url).call().unwrap(),
            _ => agent
                .post(&url)
                .header("content-type", "application/json")
                .send(body.unwrap_or_default())
                .unwrap(),
        };
        let status = resp.status().as_u16();
        let v: Value = resp.body_mut().read_json().unwrap();
        (status, v)
    })
    .await
    .unwrap()
}

async fn create(addr: SocketAddr, body: Value) -> Created {
    let (status, v) = call("POST", format!("http://{addr}/sessions"), Some(body.to_string())).await;
    assert_eq!(status, 201, "{v}");
    serde_json::from_value(v).unwrap()
}

async fn message(addr: SocketAddr, id: &str, text: &str) -> (u16, Value) {
    call(
        "POST",
        format!("http://{addr}/sessions/{id}/message"),
        Some(json!({ "text": text }).to_string()),
    )
    .await
}

async fn next_json<S>(ws: &mut S) -> Value
where
    S: StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("frame within timeout")
            .expect("stream open")
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn create_message_and_stream_round_trip() {
    let addr = service().await;
    let created = create(addr, json!({ "world": "apartment" })).await;
    assert_eq!(created.snapshot.state, SessionState::AwaitingUser);

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{}/events", created.id))
        .await
        .unwrap();
    let (status, reply) = message(addr, &created.id, "fetch me an orange").await;
    assert_eq!(status, 200, "{reply}");
    let reply: StepReply = serde_json::from_value(reply).unwrap();
    assert_eq!(reply.snapshot.state, SessionState::Done);

    let mut streamed: Vec<SessionEvent> = Vec::new();
    while streamed.len() < reply.events.len() {
        streamed.push(serde_json::from_value(next_json(&mut ws).await).unwrap());
    }
    assert_eq!(streamed, reply.events);
    let kinds: Vec<String> = streamed
        .iter()
        .map(|e| serde_json::to_value(e.kind).unwrap().as_str().unwrap().to_string())
        .collect();
    assert_eq!(
        &kinds[..4],
        ["user_input", "vision_feedback", "feasibility_feedback", "backend_reply"]
    );
    assert_eq!(kinds.iter().filter(|k| *k == "step_executed").count(), 3);
    assert_eq!(kinds.last().unwrap(), "session_end");
    for (i, e) in streamed.iter().enumerate() {
        assert_eq!(e.seq, i as u64);
    }

    let (status, snap) = call("GET", format!("http://{addr}/sessions/{}", created.id), None).await;
    assert_eq!(status, 200);
    let snap: SessionSnapshot = serde_json::from_value(snap).unwrap();
    assert_eq!(snap.state, SessionState::Done);
    assert_eq!(snap.event_count, streamed.len());
    assert_eq!(snap.world.objects["orange"].at.as_deref(), Some("home"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn late_subscriber_receives_backlog_then_live_events() {
    let addr = service().await;
    let created = create(addr, json!({ "policy": { "blocklist": ["orange"] } })).await;
    let (_, first) = message(addr, &created.id, "fetch me an orange").await;
    let first: StepReply = serde_json::from_value(first).unwrap();
    assert_eq!(first.snapshot.state, SessionState::AwaitingGuidance);

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{}/events", created.id))
        .await
        .unwrap();
    for want in &first.events {
        let got: SessionEvent = serde_json::from_value(next_json(&mut ws).await).unwrap();
        assert_eq!(&got, want);
    }
    // Guidance sent over the socket itself.
    ws.send(Message::Text(json!({ "text": "look again" }).to_string().into()))
        .await
        .unwrap();
    let live: SessionEvent = serde_json::from_value(next_json(&mut ws).await).unwrap();
    assert_eq!(live.seq, first.events.len() as u64);
    assert_eq!(live.payload["text"], "look again");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_sessions_are_isolated() {
    let addr = service().await;
    let a = create(addr, json!({ "policy": { "blocklist": ["orange"] } })).await;
    let b = create(addr, json!({})).await;
    assert_ne!(a.id, b.id);
    let (ra, rb) = tokio::join!(
        message(addr, &a.id, "fetch me an orange"),
        message(addr, &b.id, "fetch me an orange")
    );
    let ra: StepReply = serde_json::from_value(ra.1).unwrap();
    let rb: StepReply = serde_json::from_value(rb.1).unwrap();
    assert_eq!(ra.snapshot.state, SessionState::AwaitingGuidance);
    assert_eq!(rb.snapshot.state, SessionState::Done);
    assert_eq!(ra.snapshot.world.objects["orange"].at.as_deref(), Some("table"));
    assert_eq!(rb.snapshot.world.objects["orange"].at.as_deref(), Some("home"));
    assert_eq!(ra.events[0].seq, 0);
    assert_eq!(rb.events[0].seq, 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn malformed_requests_get_structured_errors() {
    let addr = service().await;
    let created = create(addr, json!({})).await;

    let (status, v) = call(
        "POST",
        format!("http://{addr}/sessions/{}/message", created.id),
        Some("{not json".into()),
    )
    .await;
    assert_eq!(status, 400);
    let err: ErrorFrame = serde_json::from_value(v).unwrap();
    assert_eq!(err.error.code, "malformed_message");

    let (status, v) = message(addr, &created.id, "   ").await;
    assert_eq!(status, 400);
    assert_eq!(v["error"]["code"], "empty_input");

    let (status, v) = message(addr, "nope", "hi").await;
    assert_eq!(status, 404);
    assert_eq!(v["error"]["code"], "unknown_session");

    let (status, v) = call("POST", format!("http://{addr}/sessions"), Some(json!({ "world": "moon" }).to_string())).await;
    assert_eq!(status, 422);
    assert_eq!(v["error"]["code"], "invalid_config");

    message(addr, &created.id, "go to the sofa").await;
    let (status, v) = message(addr, &created.id, "go to the sink").await;
    assert_eq!(status, 409);
    assert_eq!(v["error"]["code"], "not_accepting");

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{}/events", created.id))
        .await
        .unwrap();
    ws.send(Message::Text("garbage".into())).await.unwrap();
    loop {
        let v = next_json(&mut ws).await;
        if v.get("error").is_some() {
            assert_eq!(v["error"]["code"], "malformed_message");
            break;
        }
        assert!(v.get("seq").is_some(), "{v}");
    }
}

async fn stub_chat(reply: &'static str, delay: Duration) -> SocketAddr {
    let app = Router::new().route(
        "/v1/chat/completions",
        post(move |Json(body): Json<Value>| async move {
            assert_eq!(body["messages"][0]["role"], "system");
            tokio::time::sleep(delay).await;
            Json(json!({ "choices": [{ "message": { "role": "assistant", "content": reply } }] }))
        }),
    );
    spawn(app).await
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn session_with_remote_backend_uses_stub_reply() {
    let stub = stub_chat("PLAN: go(sofa)", Duration::ZERO).await;
    let addr = service().await;
    let created = create(
        addr,
        json!({ "backend": { "kind": "remote", "endpoint": format!("http://{stub}/v1/chat/completions"), "timeout": 5.0 } }),
    )
    .await;
    let (status, v) = message(addr, &created.id, "whatever you like").await;
    assert_eq!(status, 200, "{v}");
    let reply: StepReply = serde_json::from_value(v).unwrap();
    assert_eq!(reply.snapshot.state, SessionState::Done);
    assert_eq!(reply.snapshot.world.robot.at.as_deref(), Some("sofa"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn slow_remote_backend_surfaces_as_execution_failure() {
    let stub = stub_chat("PLAN: go(sofa)", Duration::from_secs(3)).await;
    let addr = service().await;
    let created = create(
        addr,
        json!({ "backend": { "kind": "remote", "endpoint": format!("http://{stub}/v1/chat/completions"), "timeout": 0.3 } }),
    )
    .await;
    let (_, v) = message(addr, &created.id, "go to the sofa").await;
    let reply: StepReply = serde_json::from_value(v).unwrap();
    assert_eq!(reply.snapshot.state, SessionState::AwaitingGuidance);
    let backend = reply
        .events
        .iter()
        .find(|e| serde_json::to_value(e.kind).unwrap() == "backend_reply")
        .unwrap();
    assert_eq!(backend.payload["attempts"], 2);
    assert!(backend.payload["error"].as_str().unwrap().contains("timed out"), "{}", backend.payload);
    let failure = reply
        .events
        .iter()
        .find(|e| serde_json::to_value(e.kind).unwrap() == "failure_reported")
        .unwrap();
    assert_eq!(failure.payload["kind"], "execution");
}
