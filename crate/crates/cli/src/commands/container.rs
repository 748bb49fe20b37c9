use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;
use vamp_core::container::{
    self, embed_manifest, write_detached_stub, ContainerError, ContainerHeader, ContainerKind,
};

use crate::error::{CliError, CliResult};
use crate::files;
use crate::{Global, Kind, OutputMode, Serialization};

#[derive(Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub object: PathBuf,
    /// Signed envelope to embed.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    pub kind: Kind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args)]
pub struct StubArgs {
    #[arg(long)]
    pub object: PathBuf,
    /// Registry URL or manifest id of the detached manifest.
    #[arg(long)]
    pub locator: String,
    #[arg(long, value_enum, default_value = "json")]
    pub serialization: Serialization,
    #[arg(long, value_enum, default_value = "binary")]
    pub kind: Kind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// Write the payload bytes here.
    #[arg(long)]
    pub payload_out: Option<PathBuf>,
    /// Write the embedded envelope here.
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

fn container_error(path: &Path, e: ContainerError) -> CliError {
    match e {
        ContainerError::Io(e) => CliError::env(format!("{}: {e}", path.display())),
        ContainerError::BindingMismatch(_) | ContainerError::CorruptHeader(_) => {
            CliError::verify(format!("{}: {e}", path.display()))
        }
        other => CliError::usage(format!("{}: {other}", path.display())),
    }
}

/// The payload of `path`, stripping an existing container header.
fn read_payload(path: &Path) -> CliResult<Vec<u8>> {
    let mut bytes = files::read(path)?;
    let header = container::extract(&bytes).map_err(|e| container_error(path, e))?;
    if !header.is_bare() {
        let (off, len) = header.payload_span;
        bytes = bytes[off as usize..(off + len) as usize].to_vec();
    }
    Ok(bytes)
}

pub fn embed(global: &Global, args: &EmbedArgs) -> CliResult {
    let payload = read_payload(&args.object)?;
    let (env, _) = files::envelope(&args.manifest)?;
    let out = embed_manifest(&payload, &env, args.kind.into())
        .map_err(|e| container_error(&args.object, e))?;
    files::write(&args.out, &out, args.force)?;
    report_written(global, &args.out, &out)
}

pub fn stub(global: &Global, args: &StubArgs) -> CliResult {
    let payload = read_payload(&args.object)?;
    let out = write_detached_stub(&payload, &args.locator, args.serialization.into(), args.kind.into())
        .map_err(|e| container_error(&args.object, e))?;
    files::write(&args.out, &out, args.force)?;
    report_written(global, &args.out, &out)
}

fn report_written(global: &Global, path: &Path, bytes: &[u8]) -> CliResult {
    let header = container::extract(bytes).map_err(|e| container_error(path, e))?;
    match global.output {
        OutputMode::Json => files::print_json(&header_json(&header)),
        OutputMode::Human => println!(
            "wrote {} ({} header bytes, {} payload bytes)",
            path.display(),
            header.payload_span.0,
            header.payload_span.1
        ),
    }
    Ok(())
}

fn header_json(h: &ContainerHeader) -> serde_json::Value {
    json!({
        "container": h.kind.map(|k| match k {
            ContainerKind::Text => "text",
            ContainerKind::Binary => "binary",
        }),
        "manifestType": h.manifest_type().map(|t| t.as_str()),
        "serialization": h.serialization().map(|f| f.as_str()),
        "locator": h.locator(),
        "manifestId": h.envelope().and_then(|e| e.manifest_id().ok()).map(|id| id.to_string()),
        "payloadOffset": h.payload_span.0,
        "payloadLength": h.payload_span.1,
    })
}

pub fn extract(global: &Global, args: &ExtractArgs) -> CliResult {
    let bytes = files::read(&args.file)?;
    let header = container::extract(&bytes).map_err(|e| container_error(&args.file, e))?;
    if let Some(p) = &args.payload_out {
        files::write(p, header.payload(&bytes), args.force)?;
    }
    if let Some(p) = &args.manifest_out {
        let env = header.envelope_bytes().ok_or_else(|| {
            CliError::usage(format!("{} has no embedded manifest", args.file.display()))
        })?;
        files::write(p, env, args.force)?;
    }
    match global.output {
        OutputMode::Json => files::print_json(&header_json(&header)),
        OutputMode::Human => {
            let v = header_json(&header);
            if header.is_bare() {
                println!("bare file, {} bytes", header.payload_span.1);
            } else {
                for key in ["container", "manifestType", "serialization", "locator", "manifestId"] {
                    if let Some(s) = v[key].as_str() {
                        println!("{key}: {s}");
                    }
                }
                println!("payload: {} bytes at offset {}", header.payload_span.1, header.payload_span.0);
            }
        }
    }
    Ok(())
}
