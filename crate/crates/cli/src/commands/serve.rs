use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use nutriplan_core::adime::FhirNutritionOrder;
use nutriplan_core::config::BackendMode;
use nutriplan_core::orchestrator::SynthesisBundle;
use nutriplan_core::planner::{PlanDocument, Planner};
use nutriplan_core::profile::parse_profile;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::load_planner;
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct ServeArgs {
    pub config: PathBuf,
    pub bind: SocketAddr,
    pub backend: Option<BackendMode>,
}

/// Body of a successful `POST /v1/plan`. Each document is the same value
/// `run` writes to disk for that patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeResponse {
    pub manifest_id: String,
    pub plan: PlanDocument,
    pub fhir: FhirNutritionOrder,
    pub bundle: SynthesisBundle,
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(status: StatusCode, message: String, path: Option<&str>) -> Response {
    let mut body = json!({ "error": message });
    if let Some(p) = path {
        body["path"] = json!(p);
    }
    json_response(status, nutriplan_core::canonical_json(&body))
}

async fn plan(State(planner): State<Arc<Planner>>, body: String) -> Response {
    let profile = match parse_profile(&body) {
        Ok(p) => p,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e.to_string(), e.path()),
    };
    let worker = Arc::clone(&planner);
    let result = tokio::task::spawn_blocking(move || worker.plan_patient(&profile)).await;
    match result {
        Ok(Ok(out)) => {
            let resp = ServeResponse {
                manifest_id: planner.manifest_id().to_string(),
                plan: out.plan,
                fhir: out.fhir,
                bundle: out.bundle,
            };
            json_response(StatusCode::OK, nutriplan_core::canonical_json(&resp))
        }
        Ok(Err(e)) if e.is_backend() => error_response(StatusCode::BAD_GATEWAY, e.to_string(), None),
        Ok(Err(e)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, format!("planning task failed: {e}"), None),
    }
}

pub fn router(planner: Arc<Planner>) -> Router {
    Router::new().route("/v1/plan", post(plan)).with_state(planner)
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let planner = Arc::new(load_planner(&args.config, args.backend)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Server(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.bind)
            .await
            .map_err(|e| CliError::Server(format!("cannot bind {}: {e}", args.bind)))?;
        log::info!(
            "serving POST /v1/plan on {} (manifest {}, {} backend)",
            args.bind,
            planner.manifest_id(),
            planner.mode().as_str()
        );
        axum::serve(listener, router(planner))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Server(e.to_string()))
    })
}
