use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use casemix_api::{router, AppState, ServiceOptions, DEFAULT_SESSION, PREVIEW_POINTS};
use casemix_core::engine::Engine;
use casemix_core::io::{bundled_case_study, bundled_toy};
use casemix_core::utility::{instantiate, Quantity, UfParams, UfSpec, UfTemplate};
use casemix_core::SimplexBackend;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn case_study() -> Engine {
    static ENGINE: OnceLock<Engine> = OnceLock::new();
    ENGINE
        .get_or_init(|| Engine::new(bundled_case_study(), Arc::new(SimplexBackend::default())).unwrap())
        .clone()
}

fn toy() -> Engine {
    Engine::new(bundled_toy(), Arc::new(SimplexBackend::default())).unwrap()
}

fn state(engine: Engine) -> AppState {
    AppState::new(engine, ServiceOptions::default()).unwrap()
}

async fn call(st: &AppState, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .header("origin", "http://localhost:5173");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(st.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

#[tokio::test]
async fn health_and_cors() {
    let st = state(toy());
    let req = Request::builder()
        .uri("/api/health")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = router(st).oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}

#[tokio::test]
async fn instance_lists_groups_resources_and_limits() {
    let e = case_study();
    let st = state(e.clone());
    let (s, v) = call(&st, "GET", "/api/instance", None).await;
    assert_eq!(s, StatusCode::OK);
    let groups = v["groups"].as_array().unwrap();
    assert_eq!(groups.len(), e.instance().groups.len());
    assert_eq!(groups[0]["id"], json!(e.instance().groups[0].id));
    assert_eq!(groups[0]["bound"].as_f64().unwrap(), e.bounds()[0]);
    let total: f64 = e.bounds().iter().sum();
    assert_eq!(v["total"].as_f64().unwrap(), total);
    assert!(v["resources"]["theatres"].as_u64().unwrap() > 0);
    assert!(v["resources"]["wards"].as_u64().unwrap() > 0);
}

#[tokio::test]
async fn templates_cover_the_catalog() {
    let st = state(toy());
    let (s, v) = call(&st, "GET", "/api/templates", None).await;
    assert_eq!(s, StatusCode::OK);
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), UfTemplate::ALL.len());
    assert_eq!(list[0]["template"], json!("UF1"));
    assert!(list.iter().all(|t| t["description"].is_string() && t["required"].is_array()));
}

#[tokio::test]
async fn preview_samples_the_utility() {
    let e = case_study();
    let st = state(e.clone());
    let g = 3;
    let id = e.instance().groups[g].id.clone();
    let body = json!({
        "group": id,
        "uf": {"template": "UF3", "aspiration_pct": 40.0},
        "at": [0.0, e.bounds()[g] * 0.4],
    });
    let (s, v) = call(&st, "POST", "/api/preview", Some(body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), PREVIEW_POINTS);

    let spec = UfSpec::with_params(
        UfTemplate::Uf3,
        UfParams {
            aspiration: Some(Quantity::Fraction(0.4)),
            ..Default::default()
        },
    );
    let plf = instantiate(&spec, e.bounds()[g]).unwrap();
    for p in points {
        let (n, u) = (p[0].as_f64().unwrap(), p[1].as_f64().unwrap());
        assert!((plf.evaluate(n).unwrap() - u).abs() < 1e-6, "u({n}) = {u}");
    }
    assert_eq!(points.last().unwrap()[0].as_f64().unwrap(), e.bounds()[g]);
    assert!((v["at"][1][1].as_f64().unwrap() - 100.0).abs() < 1e-9);
    assert_eq!(v["concave"], json!(true));
}

#[tokio::test]
async fn preview_rejects_bad_input() {
    let st = state(toy());
    let (s, v) = call(
        &st,
        "POST",
        "/api/preview",
        Some(json!({"group": "Z", "uf": {"template": "UF1"}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], json!("/group"));

    let (s, v) = call(
        &st,
        "POST",
        "/api/preview",
        Some(json!({"group": "A", "uf": {"template": "UF3", "aspirashun": 3}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["path"].as_str().unwrap().starts_with("/uf"), "{v}");

    let (s, _) = call(
        &st,
        "POST",
        "/api/preview",
        Some(json!({"group": "A", "uf": {"template": "UF1"}, "points": 1})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn invalid_aspiration_is_rejected_naming_the_group() {
    let st = state(toy());
    let cfg = json!({"default": {"template": "UF1"}, "B": {"template": "UF3", "aspiration": 1e6}});
    let (s, v) = call(&st, "PUT", "/api/sessions/default/uf-config", Some(cfg)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
    assert_eq!(v["error"], json!("validation"));
    assert!(v["path"].as_str().unwrap().starts_with("/B"), "{v}");
    assert!(v["message"].as_str().unwrap().contains('B'), "{v}");

    // The stored configuration is untouched.
    let (_, cfg) = call(&st, "GET", "/api/sessions/default/uf-config", None).await;
    assert!(cfg.get("B").is_none(), "{cfg}");
}

#[tokio::test]
async fn default_session_solves_linear_sum_of_utilities() {
    let st = state(case_study());
    let (s, v) = call(
        &st,
        "POST",
        "/api/sessions/default/solve",
        Some(json!({"objective": "msu"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let n = v["throughput"].as_f64().unwrap();
    assert!((n - 31663.97).abs() / 31663.97 < 0.01, "N = {n}");
    assert_eq!(v["history_index"], json!(0));
    assert_eq!(v["zeroed"], json!(false));

    let (s, h) = call(&st, "GET", "/api/sessions/default/history", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(h["summary"].as_array().unwrap().len(), 1);
    assert_eq!(h["entries"][0]["request"]["objective"], json!("msu"));
}

#[tokio::test]
async fn concurrent_solve_on_one_session_conflicts() {
    let st = state(toy());
    let guard = st.begin_solve(DEFAULT_SESSION).unwrap();
    let (s, v) = call(&st, "POST", "/api/sessions/default/solve", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], json!("solve_in_progress"));

    // Other sessions are unaffected.
    let (s, _) = call(&st, "PUT", "/api/sessions/other/uf-config", Some(json!({"default": {"template": "UF1"}}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(&st, "POST", "/api/sessions/other/solve", None).await;
    assert_eq!(s, StatusCode::OK);

    drop(guard);
    let (s, _) = call(&st, "POST", "/api/sessions/default/solve", None).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn zeroed_solve_is_422_and_still_recorded() {
    let st = state(case_study());
    let cfg = json!({"default": {"template": "UF2", "indifference_pct": 40.0}});
    let (s, v) = call(&st, "PUT", "/api/sessions/s1/uf-config", Some(cfg)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let (s, v) = call(&st, "POST", "/api/sessions/s1/solve", Some(json!({"objective": "mmu"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["error"], json!("zeroed"));
    assert_eq!(v["zeroed"], json!(true));
    assert_eq!(v["result"]["throughput"].as_f64().unwrap(), 0.0);

    let (_, h) = call(&st, "GET", "/api/sessions/s1/history", None).await;
    assert_eq!(h["summary"][0]["zeroed"], json!(true));
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let st = state(toy());
    for (m, uri) in [
        ("GET", "/api/sessions/nope"),
        ("GET", "/api/sessions/nope/uf-config"),
        ("POST", "/api/sessions/nope/solve"),
        ("POST", "/api/sessions/nope/pareto-check"),
        ("GET", "/api/sessions/nope/history"),
    ] {
        let (s, v) = call(&st, m, uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{m} {uri}: {v}");
        assert_eq!(v["error"], json!("not_found"));
    }
    // A session without solves has nothing to audit.
    let (s, _) = call(&st, "POST", "/api/sessions/default/pareto-check", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_solve_request_names_the_field() {
    let st = state(toy());
    let (s, v) = call(
        &st,
        "POST",
        "/api/sessions/default/solve",
        Some(json!({"objective": "best"})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], json!("/objective"));
}

#[tokio::test]
async fn pareto_check_finds_slack_in_max_min_caseload() {
    let st = state(case_study());
    let (s, v) = call(&st, "POST", "/api/sessions/default/solve", Some(json!({"objective": "mmu"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let (s, p) = call(
        &st,
        "POST",
        "/api/sessions/default/pareto-check",
        Some(json!({"which": "latest"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{p}");
    assert_eq!(p["is_pareto"], json!(false));
    assert!(p["diff"].as_f64().unwrap() > 1.0, "{p}");
    assert_eq!(p["history_index"], json!(0));
    assert_eq!(p["base_throughput"], v["throughput"]);
}

#[tokio::test]
async fn sweep_runs_against_the_engine() {
    let st = state(toy());
    let body = json!({"template": "UF3", "param": "aspiration", "values": [20.0, 60.0], "jobs": 1});
    let (s, v) = call(&st, "POST", "/api/sessions/default/sweep", Some(body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);

    let (s, _) = call(
        &st,
        "POST",
        "/api/sessions/default/sweep",
        Some(json!({"template": "UF3", "param": "nonsense", "values": [1.0]})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sessions_are_isolated() {
    let st = state(toy());
    let (s, created) = call(
        &st,
        "POST",
        "/api/sessions",
        Some(json!({"default": {"template": "UF3", "aspiration_pct": 50.0}})),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED, "{created}");
    let id = created["id"].as_str().unwrap().to_string();
    assert_ne!(id, DEFAULT_SESSION);

    let (s, _) = call(&st, "POST", &format!("/api/sessions/{id}/solve"), None).await;
    assert_eq!(s, StatusCode::OK);
    let (_, mine) = call(&st, "GET", &format!("/api/sessions/{id}"), None).await;
    let (_, default) = call(&st, "GET", "/api/sessions/default", None).await;
    assert_eq!(mine["solves"], json!(1));
    assert_eq!(default["solves"], json!(0));
    assert_eq!(default["uf_config"]["default"]["template"], json!("UF1"));
    assert_eq!(mine["uf_config"]["default"]["template"], json!("UF3"));
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let opts = ServiceOptions {
        persist_dir: Some(dir.path().to_path_buf()),
        workers: Some(1),
    };
    let first = AppState::new(toy(), opts.clone()).unwrap();
    let cfg = json!({"default": {"template": "UF1"}, "A": {"template": "UF3", "aspiration": 20.0}});
    let (s, _) = call(&first, "PUT", "/api/sessions/ward-7/uf-config", Some(cfg)).await;
    assert_eq!(s, StatusCode::OK);
    let (s, solved) = call(&first, "POST", "/api/sessions/ward-7/solve", Some(json!({"objective": "msu"}))).await;
    assert_eq!(s, StatusCode::OK);
    drop(first);

    let second = AppState::new(toy(), opts).unwrap();
    let (s, h) = call(&second, "GET", "/api/sessions/ward-7/history", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(h["entries"][0]["outcome"]["throughput"], solved["throughput"]);
    let (_, cfg) = call(&second, "GET", "/api/sessions/ward-7/uf-config", None).await;
    assert_eq!(cfg["A"]["aspiration"], json!(20.0));
}

#[tokio::test]
async fn session_ids_are_checked() {
    let st = state(toy());
    let (s, v) = call(
        &st,
        "PUT",
        "/api/sessions/bad%20id/uf-config",
        Some(json!({"default": {"template": "UF1"}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
}
