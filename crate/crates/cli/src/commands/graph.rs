use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde_json::json;
use vamp_core::manifest::ManifestId;
use vamp_core::provenance::{Direction, ExportFormat, GraphStore, ProvenanceError, ProvenanceGraph};

use crate::error::{CliError, CliResult};
use crate::files;
use crate::{Global, OutputMode};

#[derive(Clone, Copy, ValueEnum)]
pub enum TraceDirection {
    Ancestors,
    Descendants,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TraceFormat {
    Text,
    Dot,
    Json,
}

#[derive(Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub id: ManifestId,
    #[arg(long, value_enum, default_value = "ancestors")]
    pub direction: TraceDirection,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TraceFormat,
}

#[derive(Subcommand)]
pub enum GraphCommand {
    /// Verify envelopes and add them to the graph store.
    Add {
        #[arg(required = true)]
        envelopes: Vec<PathBuf>,
        #[arg(long)]
        at: Option<String>,
    },
    /// List stored manifests.
    List,
}

fn store(global: &Global) -> CliResult<GraphStore> {
    let dir = global
        .graph_dir
        .as_deref()
        .ok_or_else(|| CliError::usage("no graph store configured (use --graph-dir or VAMP_GRAPH_DIR)"))?;
    Ok(GraphStore::open(dir)?)
}

fn load(store: &GraphStore) -> CliResult<ProvenanceGraph> {
    store.load().map_err(|e| match e {
        ProvenanceError::Io(e) => CliError::env(e),
        other => CliError::env(other),
    })
}

pub fn trace(global: &Global, args: &TraceArgs) -> CliResult {
    let graph = load(&store(global)?)?;
    let dir = match args.direction {
        TraceDirection::Ancestors => Direction::Ancestors,
        TraceDirection::Descendants => Direction::Descendants,
    };
    let ids = graph.trace(&args.id, dir).map_err(CliError::verify)?;
    let object = |id: &ManifestId| graph.get(id).map(|n| n.manifest.object_id.clone());
    match args.format {
        TraceFormat::Dot => print!("{}", String::from_utf8_lossy(&graph.subgraph(&ids).export(ExportFormat::Dot))),
        TraceFormat::Json => println!("{}", String::from_utf8_lossy(&graph.subgraph(&ids).export(ExportFormat::Json))),
        TraceFormat::Text if global.output == OutputMode::Json => files::print_json(&json!({
            "root": args.id.as_str(),
            "trace": ids.iter().map(|id| json!({"id": id.as_str(), "objectId": object(id)})).collect::<Vec<_>>(),
        })),
        TraceFormat::Text => {
            for id in &ids {
                match object(id) {
                    Some(o) => println!("{id} {o}"),
                    None => println!("{id} (unresolved)"),
                }
            }
        }
    }
    Ok(())
}

pub fn graph(global: &Global, cmd: &GraphCommand) -> CliResult {
    let store = store(global)?;
    let mut graph = load(&store)?;
    match cmd {
        GraphCommand::Add { envelopes, at } => {
            let trust = files::trust_store(&global.trust_dir)?;
            let at = super::at_time(at.as_deref())?;
            for path in envelopes {
                let (env, _) = files::envelope(path)?;
                let id = store.add(&mut graph, env, &trust, at).map_err(|e| match e {
                    ProvenanceError::Io(e) => CliError::env(e),
                    other => CliError::verify(format!("{}: {other}", path.display())),
                })?;
                if global.output == OutputMode::Human {
                    println!("{id} {}", path.display());
                }
            }
            if global.output == OutputMode::Json {
                files::print_json(&json!({ "size": graph.len() }));
            }
        }
        GraphCommand::List => {
            let rows: Vec<_> = graph
                .ids()
                .map(|id| (id.clone(), graph.get(id).map(|n| n.manifest.object_id.clone())))
                .collect();
            match global.output {
                OutputMode::Json => files::print_json(&json!({
                    "manifests": rows.iter().map(|(id, o)| json!({"id": id.as_str(), "objectId": o})).collect::<Vec<_>>(),
                    "unresolved": graph.unresolved().iter().map(|i| i.as_str().to_owned()).collect::<Vec<_>>(),
                })),
                OutputMode::Human => {
                    for (id, o) in rows {
                        println!("{id} {}", o.unwrap_or_default());
                    }
                }
            }
        }
    }
    Ok(())
}
