use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde_json::json;
use vamp_core::crypto::{PublicKey, SignedManifest};
use vamp_core::ledger::{verify_receipt, EntryMode, Receipt};
use vamp_registry::ClientError;

use crate::error::{CliError, CliResult};
use crate::files;
use crate::{Global, OutputMode};

#[derive(Args)]
pub struct PublishArgs {
    /// Signed envelope to publish.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Defaults to ENVELOPE.rcpt.
    #[arg(long)]
    pub receipt_out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum ReceiptCommand {
    /// Check a receipt offline against the log public key.
    Verify {
        #[arg(long)]
        receipt: PathBuf,
        /// Log public key file. Fetched from the registry when omitted.
        #[arg(long)]
        log_key: Option<PathBuf>,
        /// Also check that the receipt covers this envelope.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Args)]
pub struct LogKeyArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

pub fn client_error(e: ClientError) -> CliError {
    match e.status() {
        Some(400 | 401 | 409) => CliError::verify(e),
        _ => CliError::env(e),
    }
}

/// Whether the receipt's leaf is the log entry for `envelope` under either
/// entry mode.
fn receipt_covers(receipt: &Receipt, envelope: &SignedManifest, bytes: &[u8]) -> CliResult<bool> {
    let id = envelope.manifest_id().map_err(CliError::verify)?;
    Ok([EntryMode::DigestOnly, EntryMode::Full]
        .iter()
        .any(|m| receipt.covers_entry(&m.entry_bytes(&id, bytes))))
}

fn receipt_json(r: &Receipt) -> serde_json::Value {
    serde_json::from_slice(&r.to_json_bytes()).expect("receipt JSON parses")
}

pub fn publish(global: &Global, args: &PublishArgs) -> CliResult {
    let client = super::client(global)?;
    let (env, bytes) = files::envelope(&args.manifest)?;
    let outcome = client.publish(&bytes).map_err(client_error)?;
    let log_key = client.log_key().map_err(client_error)?;
    let receipt = &outcome.record.receipt;
    if !verify_receipt(receipt, &log_key) || !receipt_covers(receipt, &env, &bytes)? {
        return Err(CliError::verify("registry returned a receipt that does not verify"));
    }
    let out = args
        .receipt_out
        .clone()
        .unwrap_or_else(|| files::with_suffix(&args.manifest, ".rcpt"));
    files::write(&out, &receipt.to_json_bytes(), true)?;
    match global.output {
        OutputMode::Json => files::print_json(&json!({
            "manifestId": outcome.record.manifest_id.as_str(),
            "created": outcome.created,
            "sequence": outcome.record.sequence,
            "receiptPath": out,
            "receipt": receipt_json(receipt),
        })),
        OutputMode::Human => {
            println!(
                "{} {} at sequence {}",
                outcome.record.manifest_id,
                if outcome.created { "published" } else { "already published" },
                outcome.record.sequence
            );
            let sth = &receipt.signed_tree_head;
            println!("tree size {} root {}", sth.tree_size, sth.root_hash);
            println!("receipt written to {}", out.display());
        }
    }
    Ok(())
}

fn load_log_key(global: &Global, path: Option<&Path>) -> CliResult<PublicKey> {
    match path {
        Some(p) => files::public_key(p),
        None => super::client(global)?.log_key().map_err(client_error),
    }
}

pub fn receipt(global: &Global, cmd: &ReceiptCommand) -> CliResult {
    let ReceiptCommand::Verify {
        receipt,
        log_key,
        manifest,
    } = cmd;
    let r = files::receipt(receipt)?;
    let key = load_log_key(global, log_key.as_deref())?;
    let mut problems = Vec::new();
    if !verify_receipt(&r, &key) {
        problems.push("inclusion proof or tree head signature does not verify".to_owned());
    }
    if let Some(m) = manifest {
        let (env, bytes) = files::envelope(m)?;
        if !receipt_covers(&r, &env, &bytes)? {
            problems.push(format!("receipt does not cover {}", m.display()));
        }
    }
    let ok = problems.is_empty();
    match global.output {
        OutputMode::Json => files::print_json(&json!({
            "verified": ok,
            "sequence": r.sequence,
            "treeSize": r.signed_tree_head.tree_size,
            "problems": problems,
        })),
        OutputMode::Human => {
            if ok {
                println!(
                    "receipt verified: sequence {} in tree of size {}",
                    r.sequence, r.signed_tree_head.tree_size
                );
            } else {
                problems.iter().for_each(|p| println!("FAILED: {p}"));
            }
        }
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::reported())
    }
}

pub fn log_key(global: &Global, args: &LogKeyArgs) -> CliResult {
    let key = super::client(global)?.log_key().map_err(client_error)?;
    match &args.out {
        Some(p) => files::write(p, &key.to_json_bytes(), args.force)?,
        None => println!("{}", String::from_utf8_lossy(&key.to_json_bytes())),
    }
    if args.out.is_some() && global.output == OutputMode::Human {
        println!("{key}");
    }
    Ok(())
}
