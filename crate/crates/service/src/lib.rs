//! HTTP/JSON facade over the mfrs engine with a server-sent event feed of
//! recognitions.

pub mod config;
pub mod error;
pub mod events;
mod handlers;
pub mod sessions;

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::header::AUTHORIZATION;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use mfrs_core::engine::{context_from_store, load_or_train_detector, Engine, EngineError};
use mfrs_core::store::{Store, StoreOptions};
use thiserror::Error;
use tokio::net::TcpListener;

pub use config::{ConfigError, PublicConfig, ServiceConfig};
pub use error::{ApiError, ErrorCode};
pub use events::{EventHub, RecognitionEvent};
pub use sessions::{Sessions, DEFAULT_SESSION};

/// Header naming the memo-association session of a client.
pub const SESSION_HEADER: &str = "x-mfrs-session";

/// The published JSON schemas of every response body.
pub const API_SCHEMA: &str = include_str!("../schemas/api.schema.json");

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Shared request state.
#[derive(Clone)]
pub struct AppState {
    pub engine: Engine,
    pub events: Arc<EventHub>,
    pub sessions: Arc<Sessions>,
    pub public: PublicConfig,
    token: Option<Arc<str>>,
}

impl AppState {
    /// The default session starts from the newest stored enrollment.
    pub fn new(engine: Engine, config: &ServiceConfig) -> Self {
        let ctx = context_from_store(&engine.store, engine.config.association_window_s);
        Self {
            engine,
            events: Arc::new(EventHub::new(events::DEFAULT_HISTORY)),
            sessions: Arc::new(Sessions::new(ctx)),
            public: config.public(),
            token: config.token.as_deref().map(Arc::from),
        }
    }
}

/// Open the store and detector named by `config`.
pub fn open_engine(config: &ServiceConfig) -> Result<Engine, ServeError> {
    let store = Store::open(&config.data_dir, StoreOptions::default().durability(config.durability))
        .map_err(EngineError::from)?;
    let model = load_or_train_detector(&config.data_dir, &config.detector)?;
    Ok(Engine::new(Arc::new(store), Arc::new(model), config.engine())?)
}

pub fn router(state: AppState, max_body_bytes: usize) -> Router {
    let api = Router::new()
        .route("/persons", post(handlers::create_person).get(handlers::list_persons))
        .route(
            "/persons/{id}",
            get(handlers::get_person)
                .patch(handlers::update_person)
                .delete(handlers::delete_person),
        )
        .route("/persons/{id}/images", post(handlers::add_image))
        .route("/persons/{id}/profile", get(handlers::profile))
        .route("/images/{id}", get(handlers::get_image))
        .route("/recognize", post(handlers::recognize))
        .route("/memos", post(handlers::add_memo).get(handlers::list_memos))
        .route("/memos/{id}", get(handlers::get_memo).delete(handlers::delete_memo))
        .route("/memos/{id}/link", post(handlers::link_memo))
        .route("/memos/{id}/audio", get(handlers::memo_audio))
        .route("/events", get(handlers::events))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .route("/config", get(handlers::public_config))
        .route("/schema", get(handlers::schema))
        .fallback(handlers::not_found)
        .method_not_allowed_fallback(handlers::method_not_allowed);
    Router::new()
        .nest("/api", api)
        .fallback(handlers::not_found)
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state)
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    let Some(expected) = state.token.as_deref() else {
        return next.run(request).await;
    };
    let header = request
        .headers()
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    // Browsers cannot set headers on EventSource or <audio>, so the token
    // may also travel as a query parameter.
    let query = request.uri().query().and_then(|q| {
        q.split('&')
            .find_map(|kv| kv.strip_prefix("access_token="))
    });
    let ok = header.or(query).is_some_and(|t| constant_time_eq(t.as_bytes(), expected.as_bytes()));
    if ok {
        next.run(request).await
    } else {
        ApiError::new(ErrorCode::Unauthorized, "missing or wrong bearer token").into_response()
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Fold the journal into a checkpoint every `interval`.
pub fn spawn_checkpointer(store: Arc<Store>, interval: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(interval);
        tick.tick().await;
        loop {
            tick.tick().await;
            let store = store.clone();
            match tokio::task::spawn_blocking(move || store.checkpoint()).await {
                Ok(Ok(())) => tracing::debug!("checkpoint written"),
                Ok(Err(e)) => tracing::warn!(error = %e, "checkpoint failed"),
                Err(e) => tracing::warn!(error = %e, "checkpoint task panicked"),
            }
        }
    })
}

pub async fn bind(config: &ServiceConfig) -> Result<TcpListener, ServeError> {
    TcpListener::bind(&config.bind).await.map_err(|source| ServeError::Bind {
        addr: config.bind.clone(),
        source,
    })
}

/// Serve on `listener` until `shutdown` resolves, then write a final
/// checkpoint.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    config: &ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let store = state.engine.store.clone();
    let checkpointer = (config.checkpoint_interval_s > 0)
        .then(|| spawn_checkpointer(store.clone(), Duration::from_secs(config.checkpoint_interval_s)));
    let app = router(state, config.max_body_bytes);
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    if let Some(handle) = checkpointer {
        handle.abort();
    }
    match tokio::task::spawn_blocking(move || store.checkpoint()).await {
        Ok(Ok(())) => {}
        Ok(Err(e)) => tracing::warn!(error = %e, "final checkpoint failed"),
        Err(e) => tracing::warn!(error = %e, "final checkpoint task panicked"),
    }
    result.map_err(ServeError::from)
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
