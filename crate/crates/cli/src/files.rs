//! Reading and writing the CLI's on-disk artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use vamp_core::crypto::{Certificate, PrivateKey, PublicKey, SignedManifest, TrustStore};
use vamp_core::ledger::Receipt;

use crate::error::{CliError, CliResult};

pub fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::env(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, bytes: &[u8], force: bool) -> CliResult {
    if !force && path.exists() {
        return Err(CliError::usage(format!(
            "{} already exists (use --force to overwrite)",
            path.display()
        )));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes).map_err(|e| CliError::env(format!("{}: {e}", path.display())))
}

pub fn write_secret(path: &Path, bytes: &[u8], force: bool) -> CliResult {
    if path.exists() {
        if !force {
            return Err(CliError::usage(format!(
                "{} already exists (use --force to overwrite)",
                path.display()
            )));
        }
        fs::remove_file(path)?;
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    vamp_registry::store::write_private(path, bytes)
        .map_err(|e| CliError::env(format!("{}: {e}", path.display())))
}

pub fn private_key(path: &Path) -> CliResult<PrivateKey> {
    PrivateKey::from_keystore_bytes(&read(path)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn public_key(path: &Path) -> CliResult<PublicKey> {
    PublicKey::from_json_bytes(&read(path)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn certificate(path: &Path) -> CliResult<Certificate> {
    Certificate::from_json_bytes(&read(path)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn envelope(path: &Path) -> CliResult<(SignedManifest, Vec<u8>)> {
    let bytes = read(path)?;
    let env = SignedManifest::from_bytes(&bytes)
        .map_err(|e| CliError::verify(format!("{}: {e}", path.display())))?;
    Ok((env, bytes))
}

pub fn receipt(path: &Path) -> CliResult<Receipt> {
    Receipt::from_json_bytes(&read(path)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn trust_store(dir: &Path) -> CliResult<TrustStore> {
    if !dir.is_dir() {
        return Err(CliError::env(format!("trust directory {} does not exist", dir.display())));
    }
    TrustStore::load_dir(dir).map_err(CliError::env)
}

pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `X.manifest.json` and `X.manifest.cbor` sign to `X.man`; anything else
/// gets `.man` appended.
pub fn default_envelope_path(manifest: &Path) -> PathBuf {
    let name = manifest.to_string_lossy();
    for ext in [".manifest.json", ".manifest.cbor"] {
        if let Some(stem) = name.strip_suffix(ext) {
            return PathBuf::from(format!("{stem}.man"));
        }
    }
    with_suffix(manifest, ".man")
}

pub fn print_json(v: &serde_json::Value) {
    let text = serde_json::to_string_pretty(v).expect("serializable");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_naming() {
        assert_eq!(
            default_envelope_path(Path::new("data/train.csv.manifest.json")),
            PathBuf::from("data/train.csv.man")
        );
        assert_eq!(
            default_envelope_path(Path::new("m.manifest.cbor")),
            PathBuf::from("m.man")
        );
        assert_eq!(default_envelope_path(Path::new("x.json")), PathBuf::from("x.json.man"));
    }
}
