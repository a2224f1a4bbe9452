use std::path::PathBuf;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use detcost::catalog::LoadedCatalog;
use detcost::service::{router, AppState};
use detcost_core::scenarios::presets;
use http_body_util::BodyExt;
use tower::ServiceExt;

pub fn app() -> Router {
    router(
        AppState {
            catalog: LoadedCatalog::builtin(),
        },
        None,
    )
}

pub async fn send(app: Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req.body(Body::from(body.unwrap_or("").to_string())).unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    assert_eq!(resp.headers()[header::CONTENT_TYPE], "application/json");
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub struct GoldenRequest {
    pub name: String,
    pub method: Method,
    pub uri: &'static str,
    pub body: Option<String>,
}

pub fn golden_dir() -> PathBuf {
    // shared with the acceptance package, which sits next to this crate
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../detcost/tests/golden")
}

/// Every preset-driven request the web client issues.
pub fn golden_requests() -> Vec<GoldenRequest> {
    let req = |name: String, method: Method, uri, body: Option<String>| GoldenRequest {
        name,
        method,
        uri,
        body,
    };
    let mut v = vec![
        req("catalog".into(), Method::GET, "/v1/catalog", None),
        req("scenarios".into(), Method::GET, "/v1/scenarios", None),
        req("ccd_curve".into(), Method::POST, "/v1/ccd-curve", Some("{}".into())),
        req("tco".into(), Method::POST, "/v1/tco", Some("{}".into())),
    ];
    for scale in ["small", "medium", "large", "enterprise", "medical"] {
        v.push(req(
            format!("breakeven_{scale}"),
            Method::POST,
            "/v1/breakeven",
            Some(format!(r#"{{"scale": "{scale}"}}"#)),
        ));
    }
    for p in presets() {
        v.push(req(
            format!("decide_{}", p.id),
            Method::POST,
            "/v1/decide",
            Some(format!(r#"{{"preset": "{}"}}"#, p.id)),
        ));
    }
    v
}
