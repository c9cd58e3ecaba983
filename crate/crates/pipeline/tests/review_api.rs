use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use mmm_core::filter::{run_filters, FilterConfig};
use mmm_core::review::{ReviewAction, ReviewDecision};
use mmm_core::{RecordStatus, TranslationRecord};
use mmm_pipeline::corpus;
use mmm_pipeline::review::{manifest_path, router, ExportManifest, ReviewStore};
use serde_json::{json, Value};
use tower::ServiceExt;

mod common;

/// Pending-review records from the replayed fixture corpus.
fn fixture_records() -> Vec<TranslationRecord> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("records.jsonl");
    let run = common::mmm(&[
        "translate",
        "--input",
        common::fixture("source.jsonl").to_str().unwrap(),
        "--targets",
        "en,zh",
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "replay",
        "--cassette",
        common::fixture("cassette.jsonl").to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", common::stderr(&run));
    let records = corpus::read_records(&out).unwrap();
    run_filters(records, &FilterConfig::default()).unwrap().accepted
}

fn app() -> (Router, Arc<ReviewStore>) {
    let store = Arc::new(ReviewStore::in_memory(fixture_records(), FilterConfig::default()));
    (router(store.clone()), store)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn decision(action: &str, rev: u64) -> Value {
    json!({"action": action, "reviewer": "alice", "expected_revision": rev})
}

#[tokio::test]
async fn list_filters_and_pages() {
    let (app, _) = app();
    let (status, page) = call(&app, Method::GET, "/api/records?status=pending&page_size=5", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(page["total"], 13);
    assert_eq!(page["items"].as_array().unwrap().len(), 5);
    let (_, zh) = call(&app, Method::GET, "/api/records?language=zh&dataset=SCNM", None).await;
    assert_eq!(zh["total"], 3);
    let ids: Vec<&str> = zh["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["scnm-001-zh", "scnm-002-zh", "scnm-003-zh"]);
    let (_, last) = call(&app, Method::GET, "/api/records?page=3&page_size=5", None).await;
    assert_eq!(last["items"].as_array().unwrap().len(), 3);

    call(
        &app,
        Method::POST,
        "/api/records/scnm-001-en/decision",
        Some(decision("accept", 0)),
    )
    .await;
    let (_, queue) = call(&app, Method::GET, "/api/records", None).await;
    assert_eq!(queue["total"], 12);
    let (_, all) = call(&app, Method::GET, "/api/records?status=all", None).await;
    assert_eq!(all["total"], 13);
    let (_, accepted) = call(&app, Method::GET, "/api/records?status=accepted", None).await;
    assert_eq!(accepted["items"][0]["id"], "scnm-001-en");
}

#[tokio::test]
async fn bad_queries_are_400() {
    let (app, _) = app();
    for uri in [
        "/api/records?status=done",
        "/api/records?language=fr",
        "/api/records?page_size=0",
        "/api/records?page=abc",
        "/api/export?format=csv",
    ] {
        let (status, body) = call(&app, Method::GET, uri, None).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_eq!(body["code"], "bad-request", "{uri}");
    }
}

#[tokio::test]
async fn get_record_and_404() {
    let (app, _) = app();
    let (status, rec) = call(&app, Method::GET, "/api/records/tcree-001-en", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["candidate"]["text"], "SoftBank acquired a US company.");
    assert_eq!(rec["status"], "pending-review");
    let (status, err) = call(&app, Method::GET, "/api/records/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not-found");
}

#[tokio::test]
async fn accept_then_conflict_and_state_errors() {
    let (app, _) = app();
    let uri = "/api/records/scnm-001-en/decision";
    let (status, body) = call(&app, Method::POST, uri, Some(decision("accept", 0))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["record"]["status"], "accepted");
    assert_eq!(body["record"]["revision"], 1);
    assert_eq!(body["audit"]["seq"], 1);

    let (status, body) = call(&app, Method::POST, uri, Some(decision("reject", 0))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "not-pending");

    let uri = "/api/records/scnm-002-en/decision";
    let (status, body) = call(&app, Method::POST, uri, Some(decision("accept", 4))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "revision-conflict");

    let (status, _) = call(
        &app,
        Method::POST,
        "/api/records/missing/decision",
        Some(decision("accept", 0)),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn edit_reruns_filters() {
    let (app, store) = app();
    let uri = "/api/records/scnm-001-en/decision";
    let mut edited = serde_json::to_value(store.get("scnm-001-en").unwrap().candidate.unwrap()).unwrap();
    edited["pairs"][1]["entity"] = json!("Kyoto");
    let mut body = decision("edit", 0);
    body["edited"] = edited.clone();
    let (status, resp) = call(&app, Method::POST, uri, Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(resp["record"]["status"], "pending-review");
    assert_eq!(resp["record"]["flagged"], true);

    let (status, resp) = call(&app, Method::POST, uri, Some(decision("accept", 1))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(resp["code"], "failing-verdicts");

    edited["pairs"][1]["entity"] = json!("Tokyo");
    edited["text_label"] = json!("neutral ");
    let mut body = decision("edit", 1);
    body["edited"] = edited.clone();
    let (status, resp) = call(&app, Method::POST, uri, Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{resp}");
    assert_eq!(resp["code"], "invalid-decision");

    edited["text_label"] = json!("neutral");
    let mut body = decision("edit", 1);
    body["edited"] = edited;
    let (status, resp) = call(&app, Method::POST, uri, Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(resp["record"]["status"], "edited");
    assert_ne!(resp["record"]["flagged"], true);
}

#[tokio::test]
async fn malformed_bodies() {
    let (app, _) = app();
    let uri = "/api/records/scnm-001-en/decision";
    let (status, _) = call(
        &app,
        Method::POST,
        uri,
        Some(json!({"action": "maybe", "reviewer": "a", "expected_revision": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, body) = call(&app, Method::POST, uri, Some(decision("edit", 0))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid-decision");
    let (status, _) = call(
        &app,
        Method::POST,
        uri,
        Some(json!({"action": "accept", "reviewer": " ", "expected_revision": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let mut body = decision("accept", 0);
    body["record_id"] = json!("scnm-002-en");
    let (status, _) = call(&app, Method::POST, uri, Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let mut body = decision("accept", 0);
    body["record_id"] = json!("scnm-001-en");
    let (status, _) = call(&app, Method::POST, uri, Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from("{"))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn export_and_stats() {
    let (app, _) = app();
    call(
        &app,
        Method::POST,
        "/api/records/scnm-002-zh/decision",
        Some(decision("accept", 0)),
    )
    .await;
    call(
        &app,
        Method::POST,
        "/api/records/scnm-001-zh/decision",
        Some(decision("accept", 0)),
    )
    .await;
    call(
        &app,
        Method::POST,
        "/api/records/tcree-001-zh/decision",
        Some(decision("reject", 0)),
    )
    .await;
    let (status, body) = call(&app, Method::GET, "/api/export?format=jsonl", None).await;
    assert_eq!(status, StatusCode::OK);
    let lines: Vec<Value> = body
        .as_str()
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ids: Vec<&str> = lines.iter().map(|l| l["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["scnm-001-zh", "scnm-002-zh"]);

    let (_, stats) = call(&app, Method::GET, "/api/stats", None).await;
    assert_eq!(stats["total"], 13);
    assert_eq!(stats["by_status"]["accepted"], 2);
    assert_eq!(stats["by_status"]["rejected"], 1);
    assert_eq!(stats["by_status"]["pending-review"], 10);
}

#[test]
fn audit_log_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("accepted.jsonl");
    let audit = dir.path().join("audit.jsonl");
    corpus::write_records(&fixture_records(), &records).unwrap();

    let store = ReviewStore::open(&records, &audit, FilterConfig::default()).unwrap();
    let decide = |store: &ReviewStore, id: &str, action, rev| {
        store
            .decide(&ReviewDecision {
                record_id: id.into(),
                action,
                edited: None,
                reviewer: "bob".into(),
                expected_revision: rev,
            })
            .unwrap()
    };
    decide(&store, "scnm-001-en", ReviewAction::Accept, 0);
    decide(&store, "scnm-002-en", ReviewAction::Reject, 0);
    let before = store.records();
    drop(store);

    let store = ReviewStore::open(&records, &audit, FilterConfig::default()).unwrap();
    assert_eq!(store.records(), before);
    assert_eq!(store.get("scnm-001-en").unwrap().status, RecordStatus::Accepted);
    let (_, entry) = decide(&store, "tcree-001-en", ReviewAction::Accept, 0);
    assert_eq!(entry.seq, 3);

    let out = dir.path().join("final.jsonl");
    let manifest = store.export_accepted(&out).unwrap();
    assert_eq!(manifest.ids, ["scnm-001-en", "tcree-001-en"]);
    let on_disk: ExportManifest = serde_json::from_str(&std::fs::read_to_string(manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
    assert_eq!(corpus::read_corpus(&out).unwrap().len(), 2);

    // A log entry for a record the store does not know is refused.
    std::fs::write(&records, corpus::to_jsonl(&fixture_records()[..1])).unwrap();
    let err = ReviewStore::open(&records, &audit, FilterConfig::default())
        .err()
        .unwrap();
    assert!(err.to_string().contains("line 2"), "{err}");
}
