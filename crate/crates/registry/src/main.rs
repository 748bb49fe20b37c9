use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use tracing_subscriber::EnvFilter;
use vamp_core::ledger::EntryMode;
use vamp_registry::ServerConfig;

#[derive(Clone, Copy, ValueEnum)]
enum Entries {
    Digest,
    Full,
}

/// Manifest registry and transparency log service.
#[derive(Parser)]
#[command(name = "vamp-registry", version)]
struct Args {
    #[arg(long, env = "VAMP_REGISTRY_ADDR", default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long, env = "VAMP_DATA_DIR", default_value = "registry-data")]
    data_dir: PathBuf,
    #[arg(long, env = "VAMP_TRUST_DIR", default_value = "trust")]
    trust_dir: PathBuf,
    /// Log signing key; generated on first start if missing.
    #[arg(long, env = "VAMP_LOG_KEY")]
    log_key: Option<PathBuf>,
    /// What the log records for each manifest.
    #[arg(long, value_enum, default_value = "digest")]
    log_entries: Entries,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let config = ServerConfig {
        addr: args.addr,
        data_dir: args.data_dir,
        trust_dir: args.trust_dir,
        log_key: args.log_key,
        entry_mode: match args.log_entries {
            Entries::Digest => EntryMode::DigestOnly,
            Entries::Full => EntryMode::Full,
        },
    };
    let registry = match config.open_registry() {
        Ok(r) => Arc::new(r),
        Err(e) => {
            eprintln!("vamp-registry: {e}");
            return ExitCode::from(3);
        }
    };
    let listener = match tokio::net::TcpListener::bind(&config.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("vamp-registry: cannot listen on {}: {e}", config.addr);
            return ExitCode::from(3);
        }
    };
    tracing::info!(addr = %config.addr, records = registry.view().len(), "listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match vamp_registry::server::serve(listener, registry, shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vamp-registry: {e}");
            ExitCode::from(3)
        }
    }
}
