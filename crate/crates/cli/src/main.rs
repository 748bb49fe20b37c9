use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;
mod files;

/// Sign, embed, publish and verify manifests for machine-learning objects.
#[derive(Parser)]
#[command(name = "vamp", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone)]
pub struct Global {
    /// Directory of trusted root certificates.
    #[arg(long, global = true, env = "VAMP_TRUST_DIR", default_value = "trust")]
    pub trust_dir: PathBuf,
    /// Registry base URL, e.g. http://127.0.0.1:8080
    #[arg(long, global = true, env = "VAMP_REGISTRY_URL")]
    pub registry: Option<String>,
    /// Local provenance graph store.
    #[arg(long, global = true, env = "VAMP_GRAPH_DIR")]
    pub graph_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "human")]
    pub output: OutputMode,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputMode {
    Human,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Serialization {
    Json,
    Cbor,
}

impl From<Serialization> for vamp_core::codec::Format {
    fn from(s: Serialization) -> Self {
        match s {
            Serialization::Json => vamp_core::codec::Format::Json,
            Serialization::Cbor => vamp_core::codec::Format::Cbor,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Text,
    Binary,
}

impl From<Kind> for vamp_core::container::ContainerKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Text => vamp_core::container::ContainerKind::Text,
            Kind::Binary => vamp_core::container::ContainerKind::Binary,
        }
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a signing key and certificate.
    Keygen(commands::keys::KeygenArgs),
    /// Manage the trust directory.
    #[command(subcommand)]
    Trust(commands::keys::TrustCommand),
    /// Build an unsigned manifest for an object file.
    Create(commands::manifest::CreateArgs),
    /// Sign a manifest into an envelope.
    Sign(commands::manifest::SignArgs),
    /// Write a container with the envelope embedded before the payload.
    Embed(commands::container::EmbedArgs),
    /// Write a container that points to a detached manifest.
    Stub(commands::container::StubArgs),
    /// Show a container header and optionally split it apart.
    Extract(commands::container::ExtractArgs),
    /// Publish an envelope to the registry and save its receipt.
    Publish(commands::registry::PublishArgs),
    /// Verify an object against its manifest.
    Verify(commands::verify::VerifyArgs),
    /// Walk the provenance graph from a manifest.
    Trace(commands::graph::TraceArgs),
    /// Manage the local provenance graph.
    #[command(subcommand)]
    Graph(commands::graph::GraphCommand),
    /// Work with ledger receipts.
    #[command(subcommand)]
    Receipt(commands::registry::ReceiptCommand),
    /// Fetch the registry's log public key.
    LogKey(commands::registry::LogKeyArgs),
}

fn main() -> ExitCode {
    // Exit quietly when piped into `head` and friends.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Keygen(a) => commands::keys::keygen(&cli.global, a),
        Command::Trust(c) => commands::keys::trust(&cli.global, c),
        Command::Create(a) => commands::manifest::create(&cli.global, a),
        Command::Sign(a) => commands::manifest::sign(&cli.global, a),
        Command::Embed(a) => commands::container::embed(&cli.global, a),
        Command::Stub(a) => commands::container::stub(&cli.global, a),
        Command::Extract(a) => commands::container::extract(&cli.global, a),
        Command::Publish(a) => commands::registry::publish(&cli.global, a),
        Command::Verify(a) => commands::verify::verify(&cli.global, a),
        Command::Trace(a) => commands::graph::trace(&cli.global, a),
        Command::Graph(c) => commands::graph::graph(&cli.global, c),
        Command::Receipt(c) => commands::registry::receipt(&cli.global, c),
        Command::LogKey(a) => commands::registry::log_key(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.quiet {
                eprintln!("vamp: {}", e.message);
            }
            ExitCode::from(e.code)
        }
    }
}
