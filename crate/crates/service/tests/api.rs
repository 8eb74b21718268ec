use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use faithkit_core::assign::{make_coarse_assignments, make_fine_assignments};
use faithkit_core::{HintMode, HintSet, Mode, ScaleSpec, SegmentConfig, SourceDocument, Summary};
use faithkit_service::{router, Ack, AppState, ErrorBody, NextTask, Progress, ProjectSpec, TOKEN_HEADER};
use reqwest::StatusCode;
use serde_json::{json, Value};

fn corpus() -> (Vec<SourceDocument>, Vec<Summary>) {
    let sentences: Vec<String> = (0..12).map(|i| format!("Source sentence {i} mentions fact {i}.")).collect();
    let doc = SourceDocument::new("d1", &sentences.join(" "), Some(&sentences)).unwrap();
    let units: Vec<String> = (0..10).map(|i| format!("The summary states fact {i}.")).collect();
    let s1: Summary = serde_json::from_value(json!({
        "summary_id": "s1", "doc_id": "d1", "system_id": "sys", "text": units.join(" "), "units": units,
    }))
    .unwrap();
    let s2: Summary = serde_json::from_value(json!({
        "summary_id": "s2", "doc_id": "d1", "system_id": "other",
        "text": "The captain sailed north with the whole crew, but the storm turned the ship back.",
    }))
    .unwrap();
    (vec![doc], vec![s1, s2])
}

fn fine_spec(id: &str, fraction: f64, hint_mode: HintMode) -> ProjectSpec {
    let (documents, summaries) = corpus();
    let mut assignments = Vec::new();
    for s in &summaries {
        let units = s.units(&SegmentConfig::default());
        assignments.extend(make_fine_assignments(&s.summary_id, &units, 3, fraction, 42, hint_mode).unwrap());
    }
    let hints = vec![HintSet {
        summary_id: "s1".into(),
        unit_index: 0,
        highlights: vec![0, 3, 5],
        scores: vec![0.9, 0.5, 0.4],
        scorer_name: "bm25".into(),
        threshold: 0.0,
    }];
    ProjectSpec {
        project_id: id.into(),
        mode: Mode::Fine,
        instructions: None,
        documents,
        summaries,
        assignments,
        hints,
        slot_tokens: BTreeMap::new(),
    }
}

fn coarse_spec(id: &str) -> ProjectSpec {
    let (documents, summaries) = corpus();
    let assignments = summaries
        .iter()
        .flat_map(|s| make_coarse_assignments(&s.summary_id, 2, ScaleSpec::LIKERT_0_5, 1).unwrap())
        .collect();
    ProjectSpec {
        project_id: id.into(),
        mode: Mode::Coarse,
        instructions: None,
        documents,
        summaries,
        assignments,
        hints: vec![],
        slot_tokens: BTreeMap::new(),
    }
}

struct Server {
    base: String,
    client: reqwest::Client,
    handle: tokio::task::JoinHandle<()>,
}

impl Server {
    async fn start(state: AppState) -> Self {
        let app = router(Arc::new(state), None);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        Server {
            base: format!("http://{addr}"),
            client: reqwest::Client::new(),
            handle,
        }
    }

    async fn create(&self, spec: &ProjectSpec) -> reqwest::Response {
        self.client.post(format!("{}/projects", self.base)).json(spec).send().await.unwrap()
    }

    async fn next(&self, project: &str, slot: usize) -> NextTask {
        let r = self
            .client
            .get(format!("{}/projects/{project}/tasks/next?slot={slot}", self.base))
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::OK);
        r.json().await.unwrap()
    }

    async fn submit(&self, project: &str, body: Value) -> reqwest::Response {
        self.client
            .post(format!("{}/projects/{project}/judgments", self.base))
            .json(&body)
            .send()
            .await
            .unwrap()
    }

    async fn progress(&self, project: &str) -> Progress {
        self.client
            .get(format!("{}/projects/{project}/progress", self.base))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap()
    }

    async fn export(&self, project: &str) -> Vec<Value> {
        let text = self
            .client
            .get(format!("{}/projects/{project}/export", self.base))
            .send()
            .await
            .unwrap()
            .text()
            .await
            .unwrap();
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

fn fine(summary: &str, unit: usize, slot: usize, label: u8) -> Value {
    json!({"kind": "fine", "summary_id": summary, "unit_index": unit, "annotator_slot": slot, "label": label, "elapsed_ms": 1500})
}

async fn error_code(r: reqwest::Response) -> (StatusCode, String) {
    let status = r.status();
    let body: ErrorBody = r.json().await.unwrap();
    (status, body.error)
}

fn task(next: NextTask) -> faithkit_service::TaskView {
    match next {
        NextTask::Task(t) => *t,
        NextTask::Done { .. } => panic!("expected a task"),
    }
}

#[tokio::test]
async fn sequential_delivery_and_done() {
    let server = Server::start(AppState::in_memory()).await;
    let spec = fine_spec("p1", 1.0, HintMode::None);
    assert_eq!(server.create(&spec).await.status(), StatusCode::CREATED);

    let first = task(server.next("p1", 0).await);
    assert_eq!((first.summary_id.as_str(), first.unit_index), ("s1", Some(0)));
    assert_eq!((first.position.index, first.position.total), (1, 10));
    assert_eq!(first.active_span.unwrap().start, 0);
    assert!(first.hints.is_empty());
    // Idempotent until a judgment arrives.
    assert_eq!(task(server.next("p1", 0).await), first);

    let n_s2 = spec.assignments.iter().find(|a| a.summary_id == "s2").unwrap().unit_indices.len();
    let mut seen = Vec::new();
    loop {
        match server.next("p1", 0).await {
            NextTask::Task(t) => {
                seen.push((t.summary_id.clone(), t.unit_index.unwrap()));
                let r = server.submit("p1", fine(&t.summary_id, t.unit_index.unwrap(), 0, 1)).await;
                assert_eq!(r.status(), StatusCode::CREATED);
            }
            NextTask::Done { annotator_slot, .. } => {
                assert_eq!(annotator_slot, 0);
                break;
            }
        }
    }
    let expected: Vec<(String, usize)> = (0..10)
        .map(|u| ("s1".to_string(), u))
        .chain((0..n_s2).map(|u| ("s2".to_string(), u)))
        .collect();
    assert_eq!(seen, expected);
}

#[tokio::test]
async fn submission_errors() {
    let server = Server::start(AppState::in_memory()).await;
    let spec = fine_spec("p2", 0.5, HintMode::None);
    server.create(&spec).await;
    let subset = &spec.assignments.iter().find(|a| a.summary_id == "s1" && a.annotator_slot == 0).unwrap().unit_indices;
    let inside = subset[0];
    let outside = (0..10).find(|u| !subset.contains(u)).unwrap();

    let r = server.submit("p2", fine("s1", inside, 0, 1)).await;
    assert_eq!(r.status(), StatusCode::CREATED);
    let ack: Ack = r.json().await.unwrap();
    assert_eq!(ack.store_size, 1);

    assert_eq!(error_code(server.submit("p2", fine("s1", inside, 0, 0)).await).await, (StatusCode::CONFLICT, "duplicate".into()));
    assert_eq!(
        error_code(server.submit("p2", fine("s1", outside, 0, 1)).await).await,
        (StatusCode::UNPROCESSABLE_ENTITY, "unassigned_unit".into())
    );
    assert_eq!(
        error_code(server.submit("p2", fine("s1", subset[1], 0, 2)).await).await,
        (StatusCode::UNPROCESSABLE_ENTITY, "invalid_label".into())
    );
    assert_eq!(error_code(server.submit("p2", fine("s1", inside, 9, 1)).await).await.1, "unknown_slot");
    assert_eq!(error_code(server.submit("nope", fine("s1", inside, 0, 1)).await).await.1, "unknown_project");
    let coarse = json!({"kind": "coarse", "summary_id": "s1", "annotator_slot": 0, "rating": 3});
    assert_eq!(error_code(server.submit("p2", coarse).await).await.1, "wrong_mode");
    let garbage = server
        .client
        .post(format!("{}/projects/p2/judgments", server.base))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(error_code(garbage).await.1, "bad_request");

    let r = server.client.get(format!("{}/projects/p2/tasks/next?slot=7", server.base)).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);

    // Only the one accepted judgment is stored.
    let exported = server.export("p2").await;
    assert_eq!(exported.len(), 1);
    assert_eq!(exported[0]["unit_index"], inside);
}

#[tokio::test]
async fn corrections_supersede() {
    let server = Server::start(AppState::in_memory()).await;
    server.create(&fine_spec("p3", 1.0, HintMode::None)).await;
    let ack: Ack = server.submit("p3", fine("s1", 0, 1, 1)).await.json().await.unwrap();
    let mut fix = fine("s1", 0, 1, 0);
    fix["supersedes"] = json!(ack.seq + 5);
    assert_eq!(error_code(server.submit("p3", fix.clone()).await).await.1, "bad_supersedes");
    fix["supersedes"] = json!(ack.seq);
    assert_eq!(server.submit("p3", fix).await.status(), StatusCode::CREATED);
    let exported = server.export("p3").await;
    assert_eq!(exported.len(), 2);
    assert_eq!(exported[1]["supersedes"], ack.seq);
    let p = server.progress("p3").await;
    assert_eq!(p.slots[1].judged, 1);
}

#[tokio::test]
async fn progress_counts() {
    let server = Server::start(AppState::in_memory()).await;
    let spec = fine_spec("p4", 1.0, HintMode::None);
    server.create(&spec).await;
    let p = server.progress("p4").await;
    let total = p.slots[0].total;
    assert!(p.slots.iter().all(|s| s.judged == 0 && s.total == total && s.median_elapsed_ms.is_none()));
    for u in 0..5 {
        server.submit("p4", fine("s1", u, 2, 1)).await;
    }
    let p = server.progress("p4").await;
    assert_eq!((p.slots[2].judged, p.slots[2].median_elapsed_ms), (5, Some(1500.0)));
    for u in 5..10 {
        server.submit("p4", fine("s1", u, 2, 0)).await;
    }
    let n_s2 = total - 10;
    for u in 0..n_s2 {
        server.submit("p4", fine("s2", u, 2, 0)).await;
    }
    let p = server.progress("p4").await;
    assert_eq!((p.slots[2].judged, p.slots[2].total), (total, total));
    let r = server.client.get(format!("{}/projects/zz/progress", server.base)).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn hints_follow_hint_mode() {
    let server = Server::start(AppState::in_memory()).await;
    server.create(&fine_spec("h", 1.0, HintMode::Algorithmic)).await;
    let t = task(server.next("h", 0).await);
    assert_eq!(t.hints.iter().map(|h| h.sentence_index).collect::<Vec<_>>(), [0, 3, 5]);
    let chars: Vec<char> = t.source_text.chars().collect();
    let s3: String = chars[t.hints[1].span.start..t.hints[1].span.end].iter().collect();
    assert_eq!(s3, "Source sentence 3 mentions fact 3.");
    server.submit("h", fine("s1", 0, 0, 1)).await;
    assert!(task(server.next("h", 0).await).hints.is_empty());
    let exported = server.export("h").await;
    assert_eq!(exported[0]["hint_mode"], "algorithmic");
}

#[tokio::test]
async fn coarse_project() {
    let server = Server::start(AppState::in_memory()).await;
    server.create(&coarse_spec("c")).await;
    let t = task(server.next("c", 1).await);
    assert_eq!((t.summary_id.as_str(), t.unit_index, t.active_span), ("s1", None, None));
    assert_eq!(t.scale, Some(ScaleSpec::LIKERT_0_5));
    assert_eq!((t.position.index, t.position.total), (1, 2));

    let bad = json!({"kind": "coarse", "summary_id": "s1", "annotator_slot": 1, "rating": 6});
    assert_eq!(error_code(server.submit("c", bad).await).await.1, "invalid_rating");
    let good = json!({"kind": "coarse", "summary_id": "s1", "annotator_slot": 1, "rating": 4, "comment": "one slip", "elapsed_ms": 9000});
    assert_eq!(server.submit("c", good).await.status(), StatusCode::CREATED);
    assert_eq!(task(server.next("c", 1).await).summary_id, "s2");
    let exported = server.export("c").await;
    assert_eq!((exported[0]["rating"].as_f64(), exported[0]["comment"].as_str()), (Some(4.0), Some("one slip")));
}

#[tokio::test]
async fn slot_tokens() {
    let server = Server::start(AppState::in_memory()).await;
    let mut spec = fine_spec("t", 1.0, HintMode::None);
    spec.slot_tokens.insert(0, "secret".into());
    server.create(&spec).await;
    let url = format!("{}/projects/t/tasks/next?slot=0", server.base);
    assert_eq!(server.client.get(&url).send().await.unwrap().status(), StatusCode::FORBIDDEN);
    let ok = server.client.get(&url).header(TOKEN_HEADER, "secret").send().await.unwrap();
    assert_eq!(ok.status(), StatusCode::OK);
    let ok = server.client.get(format!("{url}&token=secret")).send().await.unwrap();
    assert_eq!(ok.status(), StatusCode::OK);
    assert_eq!(error_code(server.submit("t", fine("s1", 0, 0, 1)).await).await.1, "forbidden");
    // Slots without a token stay open.
    assert_eq!(server.submit("t", fine("s1", 0, 1, 1)).await.status(), StatusCode::CREATED);
}

#[tokio::test]
async fn invalid_projects_rejected() {
    let server = Server::start(AppState::in_memory()).await;
    let mut spec = fine_spec("bad", 1.0, HintMode::None);
    spec.assignments[0].unit_indices.push(99);
    assert_eq!(error_code(server.create(&spec).await).await.1, "invalid_project");
    let mut spec = fine_spec("bad", 1.0, HintMode::None);
    spec.assignments[0].summary_id = "ghost".into();
    assert_eq!(error_code(server.create(&spec).await).await.1, "invalid_project");
    let mut spec = fine_spec("bad", 1.0, HintMode::None);
    spec.hints[0].highlights.push(40);
    spec.hints[0].scores.push(0.1);
    assert_eq!(error_code(server.create(&spec).await).await.1, "invalid_project");
    let spec = fine_spec("good", 1.0, HintMode::None);
    assert_eq!(server.create(&spec).await.status(), StatusCode::CREATED);
    assert_eq!(error_code(server.create(&spec).await).await.1, "project_exists");
}

async fn submit_all_concurrently(server: &Server, project: &str) -> Vec<Ack> {
    let mut tasks = Vec::new();
    for slot in 0..3 {
        for unit in 0..10 {
            let client = server.client.clone();
            let url = format!("{}/projects/{project}/judgments", server.base);
            tasks.push(tokio::spawn(async move {
                client.post(url).json(&fine("s1", unit, slot, (unit % 2) as u8)).send().await.unwrap()
            }));
        }
    }
    let mut acks = Vec::new();
    for t in tasks {
        let r = t.await.unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
        acks.push(r.json().await.unwrap());
    }
    acks
}

#[tokio::test]
async fn concurrent_submissions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let acks = {
        let server = Server::start(AppState::open(dir.path()).unwrap()).await;
        server.create(&fine_spec("d", 1.0, HintMode::None)).await;
        let acks = submit_all_concurrently(&server, "d").await;
        // A racing duplicate of every key is rejected.
        let dupes = submit_all_concurrently_expect_conflict(&server, "d").await;
        assert_eq!(dupes, 30);
        acks
    };
    let mut seqs: Vec<u64> = acks.iter().map(|a| a.seq).collect();
    seqs.sort_unstable();
    assert_eq!(seqs, (0..30).collect::<Vec<_>>());

    assert!(Path::new(&dir.path().join("projects/d/project.json")).is_file());
    let server = Server::start(AppState::open(dir.path()).unwrap()).await;
    let exported = server.export("d").await;
    assert_eq!(exported.len(), 30);
    let p = server.progress("d").await;
    assert!(p.slots.iter().all(|s| s.judged == 10));
}

async fn submit_all_concurrently_expect_conflict(server: &Server, project: &str) -> usize {
    let mut tasks = Vec::new();
    for slot in 0..3 {
        for unit in 0..10 {
            let client = server.client.clone();
            let url = format!("{}/projects/{project}/judgments", server.base);
            tasks.push(tokio::spawn(async move {
                client.post(url).json(&fine("s1", unit, slot, 1)).send().await.unwrap().status()
            }));
        }
    }
    let mut conflicts = 0;
    for t in tasks {
        if t.await.unwrap() == StatusCode::CONFLICT {
            conflicts += 1;
        }
    }
    conflicts
}
