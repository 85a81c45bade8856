use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use archforge_core::bundled;
use archforge_core::io::load_catalog;
use archforge_server::{app, AppState, Config};
use clap::Parser;

#[derive(Parser)]
#[command(name = "archforge-server", version, about = "HTTP API for archforge")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Default catalog files (merged); the bundled datacenter catalog if none.
    #[arg(short, long = "catalog")]
    catalog: Vec<PathBuf>,
    #[arg(long, default_value_t = 1800)]
    ttl_seconds: u64,
    #[arg(long, default_value_t = 30)]
    budget_seconds: u64,
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt().with_env_filter(tracing_subscriber::EnvFilter::from_default_env()).init();
    let args = Args::parse();
    let catalog = if args.catalog.is_empty() {
        bundled::dc()
    } else {
        match load_catalog(&args.catalog) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                std::process::exit(2);
            }
        }
    };
    let config = Config {
        ttl: Duration::from_secs(args.ttl_seconds),
        budget: Duration::from_secs(args.budget_seconds),
        ..Config::default()
    };
    let state = AppState::new(catalog, config);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.evict_expired();
        }
    });
    let listener = match tokio::net::TcpListener::bind(args.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cannot bind {}: {e}", args.bind);
            std::process::exit(2);
        }
    };
    tracing::info!(addr = %args.bind, "listening");
    axum::serve(listener, app(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .expect("server error");
}
