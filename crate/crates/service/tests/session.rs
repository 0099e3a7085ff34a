use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use steerbeam_core::separation::EstimatorRegistry;
use steerbeam_service::{serve, Service, ServiceConfig};
use tokio::net::{TcpListener, TcpStream};
use tokio::time::{timeout, Instant};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start_server(cfg: ServiceConfig) -> String {
    let service = Service::new(cfg, EstimatorRegistry::default()).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, Arc::clone(&service)));
    format!("ws://{addr}/session")
}

async fn connect(url: &str) -> Ws {
    connect_async(url).await.unwrap().0
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

async fn next(ws: &mut Ws) -> Value {
    loop {
        let msg = timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("timed out waiting for a message")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = msg {
            let line = t.as_str();
            assert!(line.ends_with('\n'), "frames are newline-terminated");
            let v: Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["v"], 1);
            return v;
        }
    }
}

/// Next message that is not a metrics update.
async fn next_control(ws: &mut Ws) -> Value {
    loop {
        let v = next(ws).await;
        if v["type"] != "metrics" {
            return v;
        }
    }
}

fn scene() -> Value {
    json!({
        "duration_s": 2.0,
        "seed": 4,
        "room": {"kind": "anechoic"},
        "sources": [
            {"name": "talker", "role": "target", "signal": {"kind": "speech-like"}, "angle_deg": 90.0, "distance_m": 1.0},
            {"role": "interferer", "signal": {"kind": "speech-like"}, "angle_deg": 30.0, "distance_m": 1.0}
        ],
        "sir_db": 0.0,
        "snr_db": 30.0
    })
}

#[tokio::test(flavor = "multi_thread")]
async fn snapshot_on_connect() {
    let url = start_server(ServiceConfig::default()).await;
    let mut ws = connect(&url).await;
    let state = next(&mut ws).await;
    assert_eq!(state["type"], "state");
    assert_eq!(state["status"], "idle");
    let b = next(&mut ws).await;
    assert_eq!(b["type"], "boundaries");
    assert_eq!(b["eq12"]["phi_l"], 100.0);
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_messages_and_transitions_are_named() {
    let url = start_server(ServiceConfig::default()).await;
    let mut ws = connect(&url).await;
    next(&mut ws).await;
    next(&mut ws).await;

    send(&mut ws, json!({"type": "teleport"})).await;
    let e = next(&mut ws).await;
    assert_eq!(e["type"], "error");
    assert!(e["msg"].as_str().unwrap().contains("teleport"));

    send(&mut ws, json!({"v": 1, "type": "steer", "gamma_deg": 10})).await;
    let e = next(&mut ws).await;
    assert!(e["msg"].as_str().unwrap().contains("steer is only allowed when running; session is idle"), "{e}");

    send(&mut ws, json!({"type": "start", "extra": "ignored"})).await;
    let e = next(&mut ws).await;
    assert!(e["msg"].as_str().unwrap().contains("start requires a loaded scene"), "{e}");

    send(&mut ws, json!({"type": "stop"})).await;
    let e = next(&mut ws).await;
    assert!(e["msg"].as_str().unwrap().contains("stop is only allowed when running"), "{e}");

    send(&mut ws, json!({"type": "load_scene", "scene": "missing.json"})).await;
    assert_eq!(next(&mut ws).await["type"], "error");

    let mut bad = scene();
    bad["sources"][1]["angle_deg"] = json!(270.0);
    send(&mut ws, json!({"type": "load_scene", "scene": bad})).await;
    let e = next(&mut ws).await;
    assert!(e["msg"].as_str().unwrap().contains("source 1"), "{e}");
}

#[tokio::test(flavor = "multi_thread")]
async fn full_session() {
    let dir = tempfile::tempdir().unwrap();
    let url = start_server(ServiceConfig {
        output_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    })
    .await;
    let mut ws = connect(&url).await;
    next(&mut ws).await;
    next(&mut ws).await;

    send(&mut ws, json!({"type": "load_scene", "scene": scene()})).await;
    let state = next_control(&mut ws).await;
    assert_eq!(state["type"], "state");
    assert_eq!(state["scene_loaded"], true);
    let sources = state["sources"].as_array().unwrap();
    assert_eq!(sources.len(), 2);
    assert_eq!((sources[0]["angle_deg"].as_f64(), sources[0]["role"].as_str()), (Some(90.0), Some("target")));
    assert_eq!((sources[1]["angle_deg"].as_f64(), sources[1]["role"].as_str()), (Some(30.0), Some("interferer")));
    assert_eq!(next_control(&mut ws).await["type"], "boundaries");

    send(&mut ws, json!({"type": "start"})).await;
    let started = Instant::now();
    assert_eq!(next_control(&mut ws).await["status"], "running");
    assert_eq!(next_control(&mut ws).await["type"], "boundaries");

    send(&mut ws, json!({"type": "load_scene", "scene": scene()})).await;
    let e = next_control(&mut ws).await;
    assert!(e["msg"].as_str().unwrap().contains("load_scene is only allowed when idle or stopped"), "{e}");
    send(&mut ws, json!({"type": "start"})).await;
    assert_eq!(next_control(&mut ws).await["type"], "error");

    // A second client joining mid-session gets the snapshot first.
    let mut late = connect(&url).await;
    let snap = next(&mut late).await;
    assert_eq!((snap["type"].as_str(), snap["status"].as_str()), (Some("state"), Some("running")));
    assert_eq!(next(&mut late).await["type"], "boundaries");
    drop(late);

    // Count metrics over the first two seconds of playback.
    let mut metrics = 0;
    while started.elapsed() < Duration::from_secs(2) {
        let v = next(&mut ws).await;
        if v["type"] == "metrics" {
            metrics += 1;
            assert_eq!(v["per_source"].as_array().unwrap().len(), 2);
        }
    }
    assert!(metrics >= 15, "only {metrics} metrics messages in 2 s");

    send(&mut ws, json!({"v": 1, "type": "steer", "gamma_deg": 25})).await;
    let mut ack = None;
    while ack.is_none() {
        let v = next(&mut ws).await;
        match v["type"].as_str().unwrap() {
            "metrics" => assert_eq!(v["gamma_deg"], 0.0, "metrics under the new angle before its ack"),
            "state" => assert_eq!(v["gamma_deg"], 25.0),
            "boundaries" => ack = Some(v),
            other => panic!("unexpected {other}"),
        }
    }
    let b = ack.unwrap();
    assert!((b["eq12"]["phi_l"].as_f64().unwrap() - 75.58).abs() < 0.01);
    assert!((b["eq12"]["phi_r"].as_f64().unwrap() - 53.40).abs() < 0.01);
    assert_eq!(b["linear"]["phi_l"], 75.0);
    assert_eq!(b["eq12"]["saturated"], json!([false, false]));

    // Wait for metrics computed under the new angle.
    loop {
        let v = next(&mut ws).await;
        if v["type"] == "metrics" && v["gamma_deg"] == 25.0 {
            break;
        }
    }

    send(&mut ws, json!({"type": "steer", "gamma_deg": 95})).await;
    let e = next_control(&mut ws).await;
    assert_eq!(e["type"], "error");
    let s = next_control(&mut ws).await;
    assert_eq!((s["type"].as_str(), s["gamma_deg"].as_f64()), (Some("state"), Some(25.0)));
    let kept = next_control(&mut ws).await;
    assert!((kept["eq12"]["phi_l"].as_f64().unwrap() - 75.58).abs() < 0.01);

    send(&mut ws, json!({"type": "steer", "gamma_deg": 0})).await;
    next_control(&mut ws).await;
    let b0 = next_control(&mut ws).await;
    assert_eq!((b0["eq12"]["phi_l"].as_f64(), b0["eq12"]["phi_r"].as_f64().map(|x| (x * 1e9).round() / 1e9)), (Some(100.0), Some(80.0)));
    tokio::time::sleep(Duration::from_millis(600)).await;

    send(&mut ws, json!({"type": "stop"})).await;
    let summary = next_control(&mut ws).await;
    assert_eq!(summary["type"], "summary", "{summary}");
    let segs = summary["segments"].as_array().unwrap();
    let gammas: Vec<f64> = segs.iter().map(|s| s["gamma_deg"].as_f64().unwrap()).collect();
    assert_eq!(gammas, vec![0.0, 25.0, 0.0]);
    // The unsteered segment keeps the broadside target.
    assert!(segs[0]["si_sdr_db"].as_f64().unwrap() > 0.0, "{summary}");
    assert!(summary["duration_s"].as_f64().unwrap() > 2.0);
    assert_eq!(next_control(&mut ws).await["status"], "stopped");
    assert_eq!(next_control(&mut ws).await["type"], "boundaries");
    assert!(dir.path().join("session-run1.wav").exists());

    // A stopped session can be restarted.
    send(&mut ws, json!({"type": "start"})).await;
    assert_eq!(next_control(&mut ws).await["status"], "running");
}
