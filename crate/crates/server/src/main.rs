use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use mlfix_server::{AppState, ServerConfig};

/// Stateless analysis service for mlfix artifact bundles.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Listen address, overriding the config file.
    #[arg(long)]
    bind: Option<SocketAddr>,
    /// Stub fixture file; replaces any configured endpoint.
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let args = Args::parse();
    let mut config = match &args.config {
        Some(path) => ServerConfig::from_file(path)?,
        None => ServerConfig::default(),
    };
    config.apply_env(|k| std::env::var(k).ok());
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    if let Some(f) = args.fixtures {
        config.provider.fixtures = Some(f);
    }
    let state = Arc::new(AppState::from_config(&config).context("server startup")?);

    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .with_context(|| format!("cannot bind {}", config.bind))?;
    let addr = listener.local_addr()?;
    tracing::info!(%addr, cache_capacity = config.cache_capacity, "listening");
    // machine-readable line for supervisors binding port 0
    println!("listening on http://{addr}");
    std::io::stdout().flush()?;

    mlfix_server::serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
