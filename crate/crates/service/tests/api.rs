use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use revealplan_core::sim::{run_once, run_rng};
use revealplan_core::{play_round, preset, FollowerKnowledge, Game, Model, Planner, PlannerKind};
use revealplan_service::{
    bind_address, router, ApiError, AppState, Phase, PresetView, SessionView, Store,
};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Vec<u8>) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => request
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, bytes.to_vec())
}

async fn ok_view(app: &Router, method: Method, uri: &str, body: Option<Value>) -> SessionView {
    let (status, bytes) = call(app, method, uri, body).await;
    assert!(
        status.is_success(),
        "{status}: {}",
        String::from_utf8_lossy(&bytes)
    );
    serde_json::from_slice(&bytes).unwrap()
}

async fn err(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, ApiError) {
    let (status, bytes) = call(app, method, uri, body).await;
    assert!(!status.is_success());
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn app() -> Router {
    router(AppState::in_memory())
}

async fn create(app: &Router, body: Value) -> SessionView {
    ok_view(app, Method::POST, "/sessions", Some(body)).await
}

#[tokio::test]
async fn first_actions_per_planner() {
    let app = app();
    let partial = create(&app, json!({"preset": "table-clearing"})).await;
    assert_eq!(partial.leader_action.unwrap().label, "Pick up both");
    assert_eq!(partial.phase, Phase::AwaitingHuman);
    assert_eq!(partial.completed_rounds, 0);
    assert!(partial.history.is_empty());
    let complete = create(
        &app,
        json!({"preset": "table-clearing", "planner": "complete"}),
    )
    .await;
    assert_eq!(complete.leader_action.unwrap().label, "Pick up closest");
}

#[tokio::test]
async fn creation_errors() {
    let app = app();
    let (status, e) = err(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"preset": "nope"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(e.code, "unknown_preset");
    let (status, e) = err(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"preset": "table-clearing", "alpha": 2.0})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e.code, "invalid_spec");
    assert!(e.message.contains("alpha"));
    let mut spec = preset("table-clearing").unwrap();
    spec.belief_best_response = vec![0, 5, 0];
    let (_, e) = err(&app, Method::POST, "/sessions", Some(json!({"spec": spec}))).await;
    assert!(
        e.message.contains("invalid belief column at row 1"),
        "{}",
        e.message
    );
    let (status, e) = err(&app, Method::POST, "/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(e.phase, None);
    let (status, _) = err(&app, Method::POST, "/sessions", Some(json!({"bogus": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn m3_play_through() {
    let app = app();
    let view = create(&app, json!({"preset": "table-clearing"})).await;
    let uri = format!("/sessions/{}", view.id);

    let v = ok_view(
        &app,
        Method::POST,
        &format!("{uri}/action"),
        Some(json!({"column": 0})),
    )
    .await;
    assert_eq!(v.history[0].reward, 0.0);
    assert!(v.history[0].note.as_deref().unwrap().contains("torque"));
    assert_eq!(v.completed_rounds, 1);

    let v = ok_view(
        &app,
        Method::POST,
        &format!("{uri}/action"),
        Some(json!({"column": 2})),
    )
    .await;
    assert_eq!(v.history[1].reward, 4.0);
    assert_eq!(
        serde_json::to_value(&v.leader_state).unwrap(),
        json!({"belief": ["unplayed", "unplayed", "learned"]})
    );

    let (status, e) = err(
        &app,
        Method::POST,
        &format!("{uri}/learned"),
        Some(json!({"learned": true})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(e.phase, Some(Phase::AwaitingHuman));

    let (status, e) = err(
        &app,
        Method::POST,
        &format!("{uri}/action"),
        Some(json!({"column": 7})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e.code, "invalid_column");

    let v = ok_view(
        &app,
        Method::POST,
        &format!("{uri}/action"),
        Some(json!({"column": 2})),
    )
    .await;
    assert_eq!(v.phase, Phase::Finished);
    assert_eq!(v.cumulative_reward, 8.0);
    assert!(v.leader_action.is_none());
    assert!(v.revealed_rows.is_empty());

    let (status, e) = err(
        &app,
        Method::POST,
        &format!("{uri}/action"),
        Some(json!({"column": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(e.phase, Some(Phase::Finished));

    let (status, csv) = call(&app, Method::GET, &format!("{uri}/transcript.csv"), None).await;
    assert_eq!(status, StatusCode::OK);
    let csv = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1], "1,2,Pick up both,0,Clear cups,0,,0");
    assert!(lines[3].ends_with(",8"));

    let snapshot = ok_view(&app, Method::GET, &uri, None).await;
    assert_eq!(snapshot, v);
}

#[tokio::test]
async fn m2_declarations() {
    let app = app();
    let view = create(&app, json!({"preset": "table-clearing", "model": "M2"})).await;
    let uri = format!("/sessions/{}", view.id);
    let first = view.leader_action.unwrap().row;

    let v = ok_view(
        &app,
        Method::POST,
        &format!("{uri}/action"),
        Some(json!({"column": 0})),
    )
    .await;
    assert_eq!(v.phase, Phase::AwaitingLearnedDeclaration);
    assert!(v.leader_action.is_none());
    let (status, _) = err(
        &app,
        Method::POST,
        &format!("{uri}/action"),
        Some(json!({"column": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let v = ok_view(
        &app,
        Method::POST,
        &format!("{uri}/learned"),
        Some(json!({"learned": true})),
    )
    .await;
    assert_eq!(v.history[0].learned, Some(true));
    assert_eq!(v.leader_action.as_ref().unwrap().row, first);
    let v = ok_view(
        &app,
        Method::POST,
        &format!("{uri}/action"),
        Some(json!({"column": 2})),
    )
    .await;
    let v2 = ok_view(
        &app,
        Method::POST,
        &format!("{uri}/learned"),
        Some(json!({"learned": false})),
    )
    .await;
    assert_eq!(v.phase, Phase::AwaitingLearnedDeclaration);
    assert_eq!(v2.leader_action.unwrap().row, first);

    // A "not learned" answer leaves the leader planning from the unrevealed state.
    let other = create(&app, json!({"preset": "table-clearing", "model": "M2"})).await;
    let uri = format!("/sessions/{}", other.id);
    ok_view(
        &app,
        Method::POST,
        &format!("{uri}/action"),
        Some(json!({"column": 0})),
    )
    .await;
    let v = ok_view(
        &app,
        Method::POST,
        &format!("{uri}/learned"),
        Some(json!({"learned": false})),
    )
    .await;
    assert_eq!(
        serde_json::to_value(&v.leader_state).unwrap(),
        json!({"revealed": [false, false, false]})
    );
}

#[tokio::test]
async fn row_on_play_shows_payoffs() {
    let app = app();
    let view = create(
        &app,
        json!({"preset": "table-clearing", "planner": "complete", "reveal_mode": "row_on_play"}),
    )
    .await;
    let action = view.leader_action.unwrap();
    assert_eq!(action.payoffs, Some(vec![1.0, 3.0, 3.0]));
    assert_eq!(view.revealed_rows.len(), 1);
    let v = ok_view(
        &app,
        Method::POST,
        &format!("/sessions/{}/action", view.id),
        Some(json!({"column": 0})),
    )
    .await;
    let rows: Vec<usize> = v.revealed_rows.iter().map(|r| r.row).collect();
    assert_eq!(rows, vec![1, 2]);
}

#[tokio::test]
async fn unknown_sessions_and_routes() {
    let app = app();
    let (status, e) = err(&app, Method::GET, "/sessions/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(e.code, "not_found");
    let (status, _) = err(
        &app,
        Method::POST,
        "/sessions/missing/action",
        Some(json!({"column": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = err(&app, Method::GET, "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn presets_listing() {
    let app = app();
    let (status, bytes) = call(&app, Method::GET, "/presets", None).await;
    assert_eq!(status, StatusCode::OK);
    let presets: Vec<PresetView> = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(presets.len(), 1);
    assert_eq!(presets[0].name, "table-clearing");
    assert_eq!(presets[0].spec, preset("table-clearing").unwrap());
    assert!(!presets[0].outcome_notes.is_empty());
}

/// Plays the follower model through the API and compares with the simulator
/// under the same random stream.
async fn scripted_matches_simulator(model: Model, kind: PlannerKind, alpha: f64) {
    let app = app();
    let game = Game::new(
        preset("table-clearing")
            .unwrap()
            .with_model(model)
            .with_alpha(alpha)
            .with_horizon(5),
    )
    .unwrap();
    let planner = Planner::build(&game, kind).unwrap();
    for run in 0..25 {
        let expected = run_once(&game, &planner, &mut run_rng(99, run));

        let mut rng = run_rng(99, run);
        let mut knowledge = FollowerKnowledge::fresh(game.rows());
        let mut view = create(&app, json!({"spec": game.spec(), "planner": kind})).await;
        let uri = format!("/sessions/{}", view.id);
        while view.phase != Phase::Finished {
            let row = view.leader_action.as_ref().unwrap().row;
            let (outcome, next) = play_round(&game, &knowledge, row, &mut rng);
            view = ok_view(
                &app,
                Method::POST,
                &format!("{uri}/action"),
                Some(json!({"column": outcome.follower_action})),
            )
            .await;
            if view.phase == Phase::AwaitingLearnedDeclaration {
                let learned = next.is_learned(row);
                view = ok_view(
                    &app,
                    Method::POST,
                    &format!("{uri}/learned"),
                    Some(json!({"learned": learned})),
                )
                .await;
            }
            knowledge = next;
        }
        let got: Vec<(usize, usize, f64)> = view
            .history
            .iter()
            .map(|h| (h.leader_action, h.follower_action, h.reward))
            .collect();
        let want: Vec<(usize, usize, f64)> = expected
            .iter()
            .map(|o| (o.leader_action, o.follower_action, o.reward))
            .collect();
        assert_eq!(got, want, "{model} {kind} run {run}");
    }
}

#[tokio::test]
async fn scripted_follower_reproduces_simulator() {
    for (model, kind) in [
        (Model::M3, PlannerKind::Partial),
        (Model::M3, PlannerKind::Complete),
        (Model::M2, PlannerKind::Partial),
        (Model::M2, PlannerKind::Complete),
        (Model::M1, PlannerKind::Partial),
    ] {
        scripted_matches_simulator(model, kind, 0.5).await;
    }
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sessions.redb");
    let id;
    {
        let app = router(AppState::new(Store::open(&path).unwrap()).unwrap());
        let view = create(&app, json!({"preset": "table-clearing"})).await;
        id = view.id.clone();
        ok_view(
            &app,
            Method::POST,
            &format!("/sessions/{id}/action"),
            Some(json!({"column": 0})),
        )
        .await;
    }
    let app = router(AppState::new(Store::open(&path).unwrap()).unwrap());
    let view = ok_view(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(view.completed_rounds, 1);
    assert_eq!(view.leader_action.unwrap().label, "Pick up both");
    let v = ok_view(
        &app,
        Method::POST,
        &format!("/sessions/{id}/action"),
        Some(json!({"column": 2})),
    )
    .await;
    assert_eq!(v.cumulative_reward, 4.0);
}

#[tokio::test]
async fn concurrent_requests_are_serialized_per_session() {
    let state = AppState::in_memory();
    let app = router(Arc::clone(&state));
    let view = create(&app, json!({"preset": "table-clearing", "horizon": 3})).await;
    let uri = format!("/sessions/{}/action", view.id);
    let mut tasks = Vec::new();
    for _ in 0..8 {
        let app = app.clone();
        let uri = uri.clone();
        tasks.push(tokio::spawn(async move {
            call(&app, Method::POST, &uri, Some(json!({"column": 0})))
                .await
                .0
        }));
    }
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => {}
            other => panic!("unexpected {other}"),
        }
    }
    assert_eq!(ok, 3);
    let v = ok_view(&app, Method::GET, &format!("/sessions/{}", view.id), None).await;
    assert_eq!(v.completed_rounds, 3);
}

#[test]
fn bind_addresses() {
    assert_eq!(
        bind_address(None, None).unwrap().to_string(),
        "127.0.0.1:8080"
    );
    assert_eq!(
        bind_address(Some("0.0.0.0:9000"), Some(7000))
            .unwrap()
            .to_string(),
        "0.0.0.0:7000"
    );
    assert!(bind_address(Some("not an address"), None).is_err());
}
