//! HTTP API over loaded event logs and taxonomies.
//!
//! | route | |
//! |---|---|
//! | `POST /v1/predict` | ranked next-activity candidates with breakdowns |
//! | `GET /v1/logs` | loaded logs |
//! | `GET /v1/logs/{id}/stats` | log statistics |
//! | `GET /v1/taxonomies` | loaded taxonomies |
//! | `GET /v1/taxonomy/{tax_id}/code/{code}` | description, ancestors and IC of a code |
//! | `GET /v1/taxonomy/{tax_id}/search?prefix=&limit=` | code prefix search |

pub mod api;
pub mod config;
pub mod state;

use std::path::Path;
use std::sync::Arc;

use axum::Router;
use thiserror::Error;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub use config::{Defaults, ServiceConfig};
pub use state::{read_sources, AppState};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new().nest("/v1", api::routes()).with_state(state)
}

fn app(state: AppState, cfg: &ServiceConfig) -> Router {
    let mut app = router(Arc::new(state));
    if let Some(dir) = &cfg.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    if cfg.cors {
        app = app.layer(CorsLayer::permissive());
    }
    app
}

/// Binds `cfg.bind` and serves until ctrl-c.
pub async fn serve(state: AppState, cfg: &ServiceConfig) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(cfg.bind)
        .await
        .map_err(|e| ServiceError::Io {
            path: cfg.bind.to_string(),
            source: e,
        })?;
    log::info!("listening on http://{}", listener.local_addr().map_err(|e| ServiceError::io(Path::new("socket"), e))?);
    axum::serve(listener, app(state, cfg))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::io(Path::new("socket"), e))
}
