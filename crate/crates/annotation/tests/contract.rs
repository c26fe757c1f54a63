use std::sync::Arc;

use aloe_annotation::{router, AppState, Palette, Store};
use aloe_core::data::{compute_stats, read_corpus, PairKind, TargetObserverPair};
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const ADMIN: &str = "admin-token";

struct Env {
    app: Router,
    tokens: Vec<String>,
}

impl Env {
    async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let (status, text) = self.raw(method, uri, token, body).await;
        let value = serde_json::from_str(&text).unwrap_or(Value::String(text));
        (status, value)
    }

    async fn raw(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, String) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    fn ann(&self, i: usize) -> &str {
        &self.tokens[i]
    }
}

fn pair(i: usize) -> TargetObserverPair {
    TargetObserverPair {
        pair_id: format!("t{i:03}-c{i:03}"),
        target_text: format!("My dog {i} died 🐶 last week. I feel so alone and lost."),
        observer_text: "I am so sorry for your loss. Give yourself time to grieve.".into(),
        subreddit: "GriefSupport".into(),
        target_author: format!("poster{i}"),
        observer_author: format!("helper{i}"),
        observer_flair: None,
        created_utc_target: 1_600_000_000,
        created_utc_observer: 1_600_000_100,
        pair_kind: PairKind::PostComment,
    }
}

fn pair_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| pair(i).pair_id).collect()
}

/// Four valid spans; offsets are code points of the texts above.
fn four_spans() -> Value {
    json!([
        {"span_id": "", "role": "Target", "start": 0, "end": 26, "label": "ObjectiveExperience"},
        {"span_id": "", "role": "Target", "start": 27, "end": 52, "label": "Pleasantness"},
        {"span_id": "", "role": "Observer", "start": 0, "end": 28, "label": "Trope"},
        {"span_id": "", "role": "Observer", "start": 29, "end": 58, "label": "Advice"}
    ])
}

/// Admin plus annotators a0..a{n-1}, and `pairs` loaded pairs.
async fn env(annotators: usize, pairs: usize) -> Env {
    env_with(annotators, pairs, None).await
}

async fn env_with(annotators: usize, pairs: usize, ui: Option<std::path::PathBuf>) -> Env {
    let store = Store::open_in_memory().unwrap();
    store.ensure_admin("admin", Some(ADMIN)).unwrap();
    let app = router(Arc::new(AppState { store, palette: Palette::builtin() }), ui);
    let mut env = Env { app, tokens: vec![] };
    for i in 0..annotators {
        let (s, v) = env.call(Method::POST, "/annotators", Some(ADMIN), Some(json!({"annotator_id": format!("a{i}")}))).await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        env.tokens.push(v["token"].as_str().unwrap().to_string());
    }
    if pairs > 0 {
        let body = serde_json::to_value((0..pairs).map(pair).collect::<Vec<_>>()).unwrap();
        let (s, v) = env.call(Method::POST, "/pairs", Some(ADMIN), Some(body)).await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
    }
    env
}

fn all(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("a{i}")).collect()
}

async fn batch(env: &Env, pairs: Vec<String>, annotators: Vec<String>, phase: &str) -> (StatusCode, Value) {
    env.call(Method::POST, "/batches", Some(ADMIN), Some(json!({"pair_ids": pairs, "annotator_ids": annotators, "phase": phase})))
        .await
}

fn task(phase: &str, i: usize) -> String {
    format!("/tasks/{phase}:{}", pair(i).pair_id)
}

#[tokio::test]
async fn batch_creation() {
    let env = env(2, 10).await;
    let (s, v) = env
        .call(
            Method::POST,
            "/batches",
            Some(ADMIN),
            Some(json!({"pair_ids": pair_ids(10), "annotator_ids": ["a0", "a1"], "size": 10})),
        )
        .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["task_ids"].as_array().unwrap().len(), 10);
    let (s, tasks) = env.call(Method::GET, "/tasks?annotator=a0", Some(env.ann(0)), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(tasks.as_array().unwrap().len(), 10);
    assert!(tasks.as_array().unwrap().iter().all(|t| t["status"] == "unstarted"));

    let (s, _) = batch(&env, vec![pair(3).pair_id], all(1), "spans").await;
    assert_eq!(s, StatusCode::CONFLICT, "re-batching is rejected");
    let (s, _) = batch(&env, vec!["nope-1".into()], all(1), "spans").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn default_batch_size_is_634() {
    let env = env(1, 635).await;
    let (s, v) =
        env.call(Method::POST, "/batches", Some(ADMIN), Some(json!({"pair_ids": pair_ids(635), "annotator_ids": ["a0"]}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let sizes: Vec<usize> = v.as_array().unwrap().iter().map(|b| b["task_ids"].as_array().unwrap().len()).collect();
    assert_eq!(sizes, [634, 1]);
}

#[tokio::test]
async fn batch_rejects_unknown_annotator_atomically() {
    let env = env(1, 2).await;
    let (s, _) = batch(&env, pair_ids(2), vec!["a0".into(), "ghost".into()], "spans").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = batch(&env, pair_ids(2), all(1), "spans").await;
    assert_eq!(s, StatusCode::CREATED, "the failed call left nothing behind");
}

#[tokio::test]
async fn revisioned_submission() {
    let env = env(2, 1).await;
    batch(&env, pair_ids(1), all(1), "spans").await;
    let t = task("spans", 0);
    let (_, opened) = env.call(Method::GET, &t, Some(env.ann(0)), None).await;
    assert_eq!(opened["status"]["a0"], "in_progress");

    let (s, v) = env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(0)), Some(four_spans())).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    assert_eq!(v["revision"], 1);
    assert_eq!(v["payload"]["spans"][1]["span_id"], format!("{}:target:1", pair(0).pair_id));
    let (_, v) = env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(0)), Some(four_spans())).await;
    assert_eq!(v["revision"], 2);
    let (_, history) = env.call(Method::GET, &format!("{t}/submissions"), Some(env.ann(0)), None).await;
    let revs: Vec<i64> = history.as_array().unwrap().iter().map(|h| h["revision"].as_i64().unwrap()).collect();
    assert_eq!(revs, [1, 2], "prior revisions are retained");

    let bad = json!([{"span_id": "", "role": "Target", "start": 5, "end": 500, "label": "Certainty"}]);
    let (s, v) = env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(0)), Some(bad)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["report"]["violations"][0]["kind"], "span_out_of_bounds");

    let (s, _) = env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(1)), Some(four_spans())).await;
    assert_eq!(s, StatusCode::FORBIDDEN, "unassigned annotator");

    let (s, _) = env.call(Method::POST, &format!("{t}/alignments"), Some(env.ann(0)), Some(json!([]))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "wrong phase");

    let (s, _) = env.call(Method::POST, &format!("{t}/finalize"), Some(ADMIN), Some(json!({"select": "a0"}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(0)), Some(four_spans())).await;
    assert_eq!(s, StatusCode::CONFLICT, "finalized tasks are immutable");
}

#[tokio::test]
async fn notes_are_private_and_discussion_is_shared() {
    let env = env(6, 1).await;
    batch(&env, pair_ids(1), all(5), "spans").await;
    let t = task("spans", 0);
    let (s, _) =
        env.call(Method::POST, &format!("{t}/notes"), Some(env.ann(0)), Some(json!({"text": "check the second sentence"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, _) = env.call(Method::GET, &format!("{t}/notes?author=a0"), Some(env.ann(1)), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN, "another annotator's notes");
    let (_, own) = env.call(Method::GET, &format!("{t}/notes"), Some(env.ann(1)), None).await;
    assert_eq!(own.as_array().unwrap().len(), 0);
    let (_, admin) = env.call(Method::GET, &format!("{t}/notes"), Some(ADMIN), None).await;
    assert_eq!(admin.as_array().unwrap().len(), 1);

    for i in 0..5 {
        let (s, _) =
            env.call(Method::POST, &format!("{t}/discussion"), Some(env.ann(i)), Some(json!({"text": format!("msg {i}")}))).await;
        assert_eq!(s, StatusCode::CREATED);
    }
    for i in 0..5 {
        let (_, thread) = env.call(Method::GET, &format!("{t}/discussion"), Some(env.ann(i)), None).await;
        let stamps: Vec<i64> = thread.as_array().unwrap().iter().map(|e| e["created_at"].as_i64().unwrap()).collect();
        assert_eq!(stamps.len(), 5);
        assert!(stamps.windows(2).all(|w| w[0] < w[1]), "strictly increasing");
    }
    let (s, _) = env.call(Method::GET, &format!("{t}/discussion"), Some(env.ann(5)), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = env.call(Method::POST, &format!("{t}/discussion"), Some(env.ann(5)), Some(json!({"text": "hi"}))).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn review_shows_latest_revision_per_annotator() {
    let env = env(4, 1).await;
    batch(&env, pair_ids(1), all(3), "spans").await;
    let t = task("spans", 0);
    let (_, empty) = env.call(Method::GET, &format!("{t}/review"), Some(ADMIN), None).await;
    assert_eq!(empty["columns"].as_array().unwrap().len(), 0, "no submissions is not an error");
    let (s, _) = env.call(Method::GET, &format!("{t}/review"), Some(env.ann(0)), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN, "own submission comes first");
    for i in 0..3 {
        env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(i)), Some(four_spans())).await;
    }
    env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(1)), Some(four_spans())).await;
    let (s, view) = env.call(Method::GET, &format!("{t}/review"), Some(env.ann(0)), None).await;
    assert_eq!(s, StatusCode::OK);
    let cols = view["columns"].as_array().unwrap();
    assert_eq!(cols.len(), 3);
    assert_eq!(cols[1]["annotator_id"], "a1");
    assert_eq!(cols[1]["revision"], 2);
    let (_, status) = env.call(Method::GET, &t, Some(env.ann(0)), None).await;
    assert_eq!(status["status"]["a0"], "reviewed");
    assert_eq!(status["status"].as_object().unwrap().len(), 1, "annotators only see their own status");
    let (s, _) = env.call(Method::GET, &format!("{t}/review"), Some(env.ann(3)), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN, "unassigned requester");
}

#[tokio::test]
async fn finalize_selects_and_validates() {
    let env = env(3, 1).await;
    batch(&env, pair_ids(1), all(3), "spans").await;
    let t = task("spans", 0);
    let mut variant = four_spans();
    variant[0]["label"] = json!("Certainty");
    env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(0)), Some(four_spans())).await;
    env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(2)), Some(variant)).await;

    let (s, _) = env.call(Method::POST, &format!("{t}/finalize"), Some(env.ann(0)), Some(json!({"select": "a0"}))).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let bad = json!({"edited": {"spans": [{"span_id": "x", "role": "Target", "start": 0, "end": 5, "label": "Trope"}]}});
    let (s, v) = env.call(Method::POST, &format!("{t}/finalize"), Some(ADMIN), Some(bad)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["report"]["violations"][0]["kind"], "trope_on_target");
    let (_, state) = env.call(Method::GET, &format!("{t}/finalize"), Some(ADMIN), None).await;
    assert_eq!(state["finalized"], false, "rejected edit leaves state unchanged");

    let (s, state) = env.call(Method::POST, &format!("{t}/finalize"), Some(ADMIN), Some(json!({"select": "a2"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(state["source"], "selected-from-annotator");
    let (_, history) = env.call(Method::GET, &format!("{t}/submissions?annotator=a2"), Some(ADMIN), None).await;
    let latest = history.as_array().unwrap().last().unwrap()["payload"].to_string();
    assert_eq!(state["final_payload"].to_string(), latest);
    let (s, _) = env.call(Method::POST, &format!("{t}/finalize"), Some(ADMIN), Some(json!({"select": "a0"}))).await;
    assert_eq!(s, StatusCode::CONFLICT, "already finalized");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_finalize_has_one_winner() {
    for round in 0..5 {
        let env = Arc::new(env(2, 1).await);
        batch(&env, pair_ids(1), all(2), "spans").await;
        let t = task("spans", 0);
        for i in 0..2 {
            env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(i)), Some(four_spans())).await;
        }
        let calls: Vec<_> = (0..2)
            .map(|i| {
                let env = Arc::clone(&env);
                let uri = format!("{t}/finalize");
                tokio::spawn(async move {
                    env.call(Method::POST, &uri, Some(ADMIN), Some(json!({"select": format!("a{i}")}))).await.0
                })
            })
            .collect();
        let mut codes = Vec::new();
        for c in calls {
            codes.push(c.await.unwrap());
        }
        codes.sort();
        assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT], "round {round}");
    }
}

/// Runs both phases for pairs 0..n with a0 as the only annotator.
async fn complete(env: &Env, n: usize) {
    batch(env, pair_ids(n), all(1), "spans").await;
    for i in 0..n {
        let t = task("spans", i);
        env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(0)), Some(four_spans())).await;
        let (s, _) = env.call(Method::POST, &format!("{t}/finalize"), Some(ADMIN), Some(json!({"select": "a0"}))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, v) = batch(env, pair_ids(n), all(1), "alignment").await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    for i in 0..n {
        let t = task("alignment", i);
        let (_, opened) = env.call(Method::GET, &t, Some(env.ann(0)), None).await;
        assert_eq!(opened["reference_spans"].as_array().unwrap().len(), 4);
        let id = pair(i).pair_id;
        let links = json!([
            {"observer_span_id": format!("{id}:observer:1"), "target_span_id": format!("{id}:target:1")},
            {"observer_span_id": format!("{id}:observer:0"), "target_span_id": format!("{id}:target:1")}
        ]);
        let (s, v) = env.call(Method::POST, &format!("{t}/alignments"), Some(env.ann(0)), Some(links)).await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        env.call(Method::POST, &format!("{t}/finalize"), Some(ADMIN), Some(json!({"select": "a0"}))).await;
    }
}

#[tokio::test]
async fn alignment_phase_requires_finalized_spans() {
    let env = env(1, 2).await;
    batch(&env, pair_ids(2), all(1), "spans").await;
    let (s, v) = batch(&env, pair_ids(1), all(1), "alignment").await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");
    let t = task("spans", 0);
    env.call(Method::POST, &format!("{t}/spans"), Some(env.ann(0)), Some(four_spans())).await;
    env.call(Method::POST, &format!("{t}/finalize"), Some(ADMIN), Some(json!({"select": "a0"}))).await;
    let (s, _) = batch(&env, pair_ids(1), all(1), "alignment").await;
    assert_eq!(s, StatusCode::CREATED);
    let bogus = json!([{"observer_span_id": "made:up:0", "target_span_id": format!("{}:target:0", pair(0).pair_id)}]);
    let (s, v) = env.call(Method::POST, &format!("{}/alignments", task("alignment", 0)), Some(env.ann(0)), Some(bogus)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["report"]["violations"][0]["kind"], "unknown_span_reference");
}

#[tokio::test]
async fn export_is_deterministic_and_readable() {
    let env = env(1, 5).await;
    complete(&env, 5).await;
    let (s, first) = env.raw(Method::GET, "/export?batch=1", Some(ADMIN), None).await;
    assert_eq!(s, StatusCode::OK, "{first}");
    assert_eq!(first.lines().count(), 5);
    let (_, second) = env.raw(Method::GET, "/export?batch=1", Some(ADMIN), None).await;
    assert_eq!(first, second);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gold.jsonl");
    std::fs::write(&path, &first).unwrap();
    let corpus = read_corpus(&path).unwrap();
    let stats = compute_stats(&corpus).unwrap();
    assert_eq!((stats.total_spans, stats.total_alignments, stats.total_pairs), (20, 10, 5));
    // The emoji counts as one offset unit.
    let gold = &corpus[0];
    let s = &gold.spans[0];
    let text: String = gold.pair.target_text.chars().skip(s.start).take(s.end - s.start).collect();
    assert_eq!(text, "My dog 0 died 🐶 last week.");

    let (s, _) = env.raw(Method::GET, "/export", Some(env.ann(0)), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn export_names_unfinalized_tasks() {
    let env = env(1, 3).await;
    complete(&env, 2).await;
    let (s, v) = batch(&env, vec![pair(2).pair_id], all(1), "spans").await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let (s, v) = env.call(Method::GET, "/export", Some(ADMIN), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let id = pair(2).pair_id;
    assert_eq!(v["tasks"], json!([format!("spans:{id}"), format!("alignment:{id}")]));
}

#[tokio::test]
async fn authorization_matrix() {
    let env = env(2, 2).await;
    batch(&env, vec![pair(0).pair_id], all(1), "spans").await;
    let t = task("spans", 0);
    let ann = env.ann(0).to_string();
    let outsider = env.ann(1).to_string();
    let cases: Vec<(Method, String, Option<Value>, &str, StatusCode)> = vec![
        // Admin-only operations called by an annotator.
        (Method::POST, "/annotators".into(), Some(json!({"annotator_id": "x"})), &ann, StatusCode::FORBIDDEN),
        (Method::POST, "/pairs".into(), Some(json!([])), &ann, StatusCode::FORBIDDEN),
        (
            Method::POST,
            "/batches".into(),
            Some(json!({"pair_ids": [pair(1).pair_id], "annotator_ids": ["a0"]})),
            &ann,
            StatusCode::FORBIDDEN,
        ),
        (Method::POST, format!("{t}/finalize"), Some(json!({"select": "a0"})), &ann, StatusCode::FORBIDDEN),
        (Method::GET, "/export".into(), None, &ann, StatusCode::FORBIDDEN),
        (Method::GET, "/tasks?annotator=a1".into(), None, &ann, StatusCode::FORBIDDEN),
        (Method::GET, format!("{t}/submissions?annotator=a1"), None, &ann, StatusCode::FORBIDDEN),
        // Task-scoped operations by an annotator not assigned to the task.
        (Method::GET, t.clone(), None, &outsider, StatusCode::FORBIDDEN),
        (Method::POST, format!("{t}/spans"), Some(four_spans()), &outsider, StatusCode::FORBIDDEN),
        (Method::POST, format!("{t}/notes"), Some(json!({"text": "x"})), &outsider, StatusCode::FORBIDDEN),
        (Method::GET, format!("{t}/notes"), None, &outsider, StatusCode::FORBIDDEN),
        (Method::POST, format!("{t}/discussion"), Some(json!({"text": "x"})), &outsider, StatusCode::FORBIDDEN),
        (Method::GET, format!("{t}/discussion"), None, &outsider, StatusCode::FORBIDDEN),
        (Method::GET, format!("{t}/review"), None, &outsider, StatusCode::FORBIDDEN),
        (Method::GET, format!("{t}/finalize"), None, &outsider, StatusCode::FORBIDDEN),
        // Allowed cells.
        (Method::GET, "/tasks".into(), None, &ann, StatusCode::OK),
        (Method::GET, t.clone(), None, &ann, StatusCode::OK),
        (Method::GET, t.clone(), None, ADMIN, StatusCode::OK),
        (Method::POST, format!("{t}/notes"), Some(json!({"text": "x"})), ADMIN, StatusCode::CREATED),
        (Method::GET, "/tasks?annotator=a0".into(), None, ADMIN, StatusCode::OK),
    ];
    for (method, uri, body, token, expected) in cases {
        let (s, v) = env.call(method.clone(), &uri, Some(token), body.clone()).await;
        assert_eq!(s, expected, "{method} {uri}: {v}");
        if expected != StatusCode::OK && expected != StatusCode::CREATED {
            continue;
        }
        let (s, _) = env.call(method.clone(), &uri, None, body.clone()).await;
        assert_eq!(s, StatusCode::UNAUTHORIZED, "{method} {uri} without a token");
        let (s, _) = env.call(method.clone(), &uri, Some("bogus"), body).await;
        assert_eq!(s, StatusCode::UNAUTHORIZED, "{method} {uri} with a bad token");
    }
}

#[tokio::test]
async fn label_palette_needs_no_auth() {
    let env = env(0, 0).await;
    let (s, v) = env.call(Method::GET, "/config/labels", None, None).await;
    assert_eq!(s, StatusCode::OK);
    let labels: Vec<&str> = v["label"].as_array().unwrap().iter().map(|e| e["label"].as_str().unwrap()).collect();
    assert_eq!(labels.len(), 9);
    assert_eq!(labels[0], "Pleasantness");
    assert!(v["label"][0]["color"].as_str().unwrap().starts_with('#'));
    let (s, _) = env.call(Method::GET, "/no/such/route", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn serves_static_client_assets() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<!doctype html><title>aloe</title>").unwrap();
    std::fs::create_dir(dir.path().join("assets")).unwrap();
    std::fs::write(dir.path().join("assets/app.js"), "console.log('aloe')").unwrap();
    let env = env_with(0, 0, Some(dir.path().to_path_buf())).await;
    let (s, body) = env.raw(Method::GET, "/", None, None).await;
    assert_eq!((s, body.as_str()), (StatusCode::OK, "<!doctype html><title>aloe</title>"));
    let (s, body) = env.raw(Method::GET, "/assets/app.js", None, None).await;
    assert_eq!((s, body.as_str()), (StatusCode::OK, "console.log('aloe')"));
    let (s, body) = env.raw(Method::GET, "/review/spans:t000-c000", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(body.contains("<title>aloe</title>"), "client routes fall back to index.html");
    let (s, _) = env.call(Method::GET, "/config/labels", None, None).await;
    assert_eq!(s, StatusCode::OK, "API routes take precedence");
}

#[test]
fn store_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.sqlite");
    let issued = {
        let store = Store::open(&path).unwrap();
        store.ensure_admin("admin", None).unwrap().unwrap()
    };
    let store = Store::open(&path).unwrap();
    assert!(store.ensure_admin("admin", None).unwrap().is_none(), "admin already exists");
    let admin = store.authenticate(&issued.token).unwrap();
    assert_eq!(admin.annotator_id, "admin");
    assert!(matches!(store.authenticate("nope"), Err(aloe_annotation::ServiceError::Unauthorized)));
}
