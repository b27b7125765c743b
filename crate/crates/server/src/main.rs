use std::path::PathBuf;

use studio_core::orchestrator::Orchestrator;
use studio_server::{router, AppState, ServerConfig};
use tracing_subscriber::EnvFilter;

fn usage() -> ! {
    eprintln!("usage: studio-server [--config FILE]");
    std::process::exit(1)
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt().with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into())).init();

    let mut args = std::env::args().skip(1);
    let mut file: Option<PathBuf> = None;
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--config" => file = Some(args.next().unwrap_or_else(|| usage()).into()),
            _ => usage(),
        }
    }

    let config = match ServerConfig::load(file.as_deref(), |k| std::env::var(k).ok()) {
        Ok(c) => c,
        Err(e) => {
            tracing::error!("{e}");
            std::process::exit(2);
        }
    };
    let orchestrator = match Orchestrator::from_config(config.pipeline.clone()) {
        Ok(o) => o,
        Err(e) => {
            tracing::error!("{e}");
            std::process::exit(2);
        }
    };
    let addr = format!("{}:{}", config.host, config.port);
    let listener = match tokio::net::TcpListener::bind(&addr).await {
        Ok(l) => l,
        Err(e) => {
            tracing::error!("cannot bind {addr}: {e}");
            std::process::exit(3);
        }
    };
    tracing::info!(%addr, fingerprint = %config.pipeline.fingerprint(), "listening");
    if let Err(e) = axum::serve(listener, router(AppState::new(orchestrator))).await {
        tracing::error!("server stopped: {e}");
        std::process::exit(3);
    }
}
