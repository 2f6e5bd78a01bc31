//! Operator surface for the facility engine: the `oticctl` CLI and the
//! HTTP API share one journalled engine per state directory.

use std::path::Path;
use std::sync::{Arc, RwLock};

use anyhow::Context;

use otic_core::engine::Engine;

pub mod auth;
pub mod cli;
pub mod http;

pub use http::{router, AppState};

/// Run the HTTP API over the engine in `state_dir` until interrupted.
pub fn serve(state_dir: &Path, addr: &str) -> anyhow::Result<()> {
    let engine = Engine::open(state_dir)
        .with_context(|| format!("opening state dir {}", state_dir.display()))?;
    let tokens = auth::TokenMap::load_or_init(state_dir)?;
    let state = AppState {
        engine: Arc::new(RwLock::new(engine)),
        tokens: Arc::new(tokens),
    };
    let app = router(state);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        log::info!("serving on {addr}");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("server error")
    })
}
