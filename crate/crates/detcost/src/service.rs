//! Stateless JSON API under `/v1`. Every response is an envelope:
//! `{"ok": true, "data": ...}` or `{"ok": false, "error": {code, message, field}}`.

use std::any::Any;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use detcost_core::decision::RULESET_VERSION;
use detcost_core::scenarios;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::api;
use crate::catalog::LoadedCatalog;
use crate::error::{from_json, AppError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEnvelope<T> {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

fn envelope_response<T: Serialize>(status: StatusCode, body: &ApiEnvelope<T>) -> Response {
    let bytes = serde_json::to_vec(body).expect("envelope serializes");
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        bytes,
    )
        .into_response()
}

fn ok<T: Serialize>(data: T) -> Response {
    envelope_response(
        StatusCode::OK,
        &ApiEnvelope {
            ok: true,
            data: Some(data),
            error: None,
        },
    )
}

fn fail(status: StatusCode, code: &str, message: impl Into<String>, field: Option<String>) -> Response {
    envelope_response::<()>(
        status,
        &ApiEnvelope {
            ok: false,
            data: None,
            error: Some(ApiError {
                code: code.into(),
                message: message.into(),
                field,
            }),
        },
    )
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        fail(StatusCode::BAD_REQUEST, self.code(), self.to_string(), self.field())
    }
}

/// Immutable state loaded at startup.
#[derive(Debug, Clone)]
pub struct AppState {
    pub catalog: LoadedCatalog,
}

type Shared = State<Arc<AppState>>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, AppError> {
    let text = std::str::from_utf8(bytes).map_err(|_| AppError::message("body is not UTF-8"))?;
    if text.trim().is_empty() {
        return Err(AppError::message("request body must be a JSON object"));
    }
    from_json(text)
}

async fn health(State(state): Shared) -> Response {
    #[derive(Serialize)]
    struct Health<'a> {
        status: &'a str,
        version: &'a str,
        catalog_version: &'a str,
        ruleset: &'a str,
    }
    ok(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
        catalog_version: &state.catalog.catalog.version,
        ruleset: RULESET_VERSION,
    })
}

async fn catalog(State(state): Shared) -> Response {
    ok(api::catalog_view(&state.catalog))
}

async fn presets() -> Response {
    ok(scenarios::presets())
}

async fn tco(State(state): Shared, bytes: Bytes) -> Result<Response, AppError> {
    let req: api::TcoRequest = body(&bytes)?;
    Ok(ok(api::tco(&state.catalog, &req)?))
}

async fn breakeven(State(state): Shared, bytes: Bytes) -> Result<Response, AppError> {
    let req: api::BreakevenRequest = body(&bytes)?;
    Ok(ok(api::breakeven(&state.catalog, &req)?))
}

async fn ccd_curve(State(state): Shared, bytes: Bytes) -> Result<Response, AppError> {
    let req: api::CcdCurveRequest = body(&bytes)?;
    Ok(ok(api::ccd_curve(&state.catalog, &req)?))
}

async fn decide(State(state): Shared, bytes: Bytes) -> Result<Response, AppError> {
    let req: api::DecideRequest = body(&bytes)?;
    Ok(ok(api::decide(&state.catalog, &req)?))
}

async fn not_found() -> Response {
    fail(StatusCode::NOT_FOUND, "not_found", "no such route", None)
}

fn panic_response(_: Box<dyn Any + Send + 'static>) -> Response<Body> {
    // the panic payload stays in the server log only
    log::error!("request handler panicked");
    fail(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error", None)
}

pub fn routes(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/catalog", get(catalog))
        .route("/v1/scenarios", get(presets))
        .route("/v1/tco", post(tco))
        .route("/v1/breakeven", post(breakeven))
        .route("/v1/ccd-curve", post(ccd_curve))
        .route("/v1/decide", post(decide))
        .fallback(not_found)
        .method_not_allowed_fallback(|| async {
            fail(
                StatusCode::METHOD_NOT_ALLOWED,
                "method_not_allowed",
                "method not allowed",
                None,
            )
        })
        .with_state(Arc::new(state))
}

/// Panic guard and CORS. `cors_origin: None` allows any origin.
pub fn harden(routes: Router, cors_origin: Option<HeaderValue>) -> Router {
    let origin = match cors_origin {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    routes.layer(CatchPanicLayer::custom(panic_response)).layer(cors)
}

pub fn router(state: AppState, cors_origin: Option<HeaderValue>) -> Router {
    harden(routes(state), cors_origin)
}

/// Serves until interrupted.
pub async fn serve(
    addr: std::net::SocketAddr,
    state: AppState,
    cors_origin: Option<HeaderValue>,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, cors_origin))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
