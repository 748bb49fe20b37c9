//! Registry state: envelope files, record metadata, indexes and the log.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use vamp_core::binding::BindingBody;
use vamp_core::crypto::{
    verify_signed_manifest, CryptoError, Digest, HashAlgorithm, PrivateKey, PublicKey,
    SignedManifest, TrustStore,
};
use vamp_core::ledger::{EntryMode, Ledger, LedgerError, Receipt, SignedTreeHead};
use vamp_core::manifest::{compute_manifest_id, Manifest, ManifestId};
use vamp_core::merkle;
use vamp_core::timestamp::{format_utc, now};

use crate::wire::{receipt_from_json, receipt_to_json};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub manifest_id: ManifestId,
    pub object_id: String,
    pub envelope: Vec<u8>,
    pub receipt: Receipt,
    pub published_at: String,
    pub sequence: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum PublishError {
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),
    #[error("untrusted signer: {0}")]
    UntrustedSigner(CryptoError),
    #[error("{0} is already stored with different bytes")]
    ConflictingBytes(ManifestId),
    #[error("storage failure: {0}")]
    Storage(String),
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("corrupt registry data: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Where publish-time trust anchors come from.
#[derive(Debug, Clone)]
pub enum TrustSource {
    Fixed(TrustStore),
    /// Re-read on every publish so anchors can be added while running.
    Dir(PathBuf),
}

impl TrustSource {
    fn load(&self) -> Result<TrustStore, CryptoError> {
        match self {
            TrustSource::Fixed(t) => Ok(t.clone()),
            TrustSource::Dir(d) => TrustStore::load_dir(d),
        }
    }
}

/// Immutable read view swapped in after every publish.
#[derive(Debug, Default, Clone)]
pub struct View {
    records: BTreeMap<ManifestId, Arc<Record>>,
    by_object: BTreeMap<String, Vec<Arc<Record>>>,
    by_content: BTreeMap<String, Vec<Arc<Record>>>,
}

impl View {
    pub fn get(&self, id: &ManifestId) -> Option<Arc<Record>> {
        self.records.get(id).cloned()
    }

    /// Records for `object_id` in log order.
    pub fn by_object(&self, object_id: &str) -> Vec<Arc<Record>> {
        self.by_object.get(object_id).cloned().unwrap_or_default()
    }

    /// Records whose manifest has a static binding with this digest, in
    /// log order.
    pub fn by_content(&self, digest: &str) -> Vec<Arc<Record>> {
        self.by_content.get(digest).cloned().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn insert(&mut self, record: Arc<Record>, manifest: &Manifest) {
        self.records.insert(record.manifest_id.clone(), record.clone());
        self.by_object
            .entry(record.object_id.clone())
            .or_default()
            .push(record.clone());
        for d in content_keys(manifest) {
            self.by_content.entry(d).or_default().push(record.clone());
        }
    }

    fn sort(&mut self) {
        for list in self.by_object.values_mut().chain(self.by_content.values_mut()) {
            list.sort_by_key(|r| r.sequence);
        }
    }
}

fn content_keys(m: &Manifest) -> Vec<String> {
    let mut keys: Vec<String> = m
        .bindings
        .iter()
        .filter_map(|b| match &b.body {
            BindingBody::Static { digest } if digest.algorithm() == HashAlgorithm::Sha256 => {
                Some(digest.to_string())
            }
            _ => None,
        })
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct MetaDoc {
    manifest_id: String,
    object_id: String,
    published_at: String,
    sequence: u64,
    receipt: serde_json::Value,
}

struct Writer {
    ledger: Ledger,
    manifests_dir: PathBuf,
    mode: EntryMode,
}

pub struct Registry {
    writer: Mutex<Writer>,
    trust: TrustSource,
    view: RwLock<Arc<View>>,
    log_key: PublicKey,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("records", &self.view().len())
            .finish_non_exhaustive()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::File::open(&tmp)?.sync_all()?;
    fs::rename(&tmp, path)
}

impl Registry {
    /// Opens `data_dir`, creating `ledger/` and `manifests/` as needed, and
    /// reconciles envelope files with the log.
    pub fn open(
        data_dir: &Path,
        trust: TrustSource,
        log_key: PrivateKey,
        mode: EntryMode,
    ) -> Result<Self, StoreError> {
        let manifests_dir = data_dir.join("manifests");
        fs::create_dir_all(&manifests_dir)?;
        let log_public = log_key.public_key();
        let mut ledger = Ledger::open(&data_dir.join("ledger"), log_key)?;

        let mut paths: Vec<PathBuf> = fs::read_dir(&manifests_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "env"))
            .collect();
        paths.sort();
        let mut view = View::default();
        for path in paths {
            let bad = |m: String| StoreError::Corrupt(format!("{}: {m}", path.display()));
            let bytes = fs::read(&path)?;
            let envelope = SignedManifest::from_bytes(&bytes).map_err(|e| bad(e.to_string()))?;
            let manifest = envelope.manifest_unverified().map_err(|e| bad(e.to_string()))?;
            let id = compute_manifest_id(&manifest).map_err(|e| bad(e.to_string()))?;
            if path.file_stem().and_then(|s| s.to_str()) != Some(id.as_str()) {
                return Err(bad(format!("file name does not match manifest id {id}")));
            }
            let entry = mode.entry_bytes(&id, &bytes);
            let leaf = merkle::leaf_hash(vamp_core::ledger::LOG_HASH, &entry);
            let meta_path = path.with_extension("json");
            let record = if meta_path.exists() {
                let meta: MetaDoc =
                    serde_json::from_slice(&fs::read(&meta_path)?).map_err(|e| bad(e.to_string()))?;
                if ledger.leaf_hash(meta.sequence) != Some(&leaf) {
                    return Err(bad(format!("log entry {} does not match", meta.sequence)));
                }
                Record {
                    manifest_id: id,
                    object_id: manifest.object_id.clone(),
                    envelope: bytes,
                    receipt: receipt_from_json(&meta.receipt).map_err(bad)?,
                    published_at: meta.published_at,
                    sequence: meta.sequence,
                }
            } else {
                // Envelope stored but metadata missing: finish the interrupted publish.
                let found = (0..ledger.size()).find(|i| ledger.leaf_hash(*i) == Some(&leaf));
                let receipt = match found {
                    Some(seq) => ledger.prove_inclusion(seq, seq + 1)?,
                    None => ledger.append(&entry)?,
                };
                let record = Record {
                    manifest_id: id,
                    object_id: manifest.object_id.clone(),
                    envelope: bytes,
                    sequence: receipt.sequence,
                    receipt,
                    published_at: format_utc(now()),
                };
                write_meta(&meta_path, &record)?;
                record
            };
            view.insert(Arc::new(record), &manifest);
        }
        view.sort();
        Ok(Registry {
            writer: Mutex::new(Writer {
                ledger,
                manifests_dir,
                mode,
            }),
            trust,
            view: RwLock::new(Arc::new(view)),
            log_key: log_public,
        })
    }

    pub fn view(&self) -> Arc<View> {
        self.view.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn log_key(&self) -> &PublicKey {
        &self.log_key
    }

    /// Stores and anchors a verified envelope. Returns the record and
    /// whether it was newly created.
    pub fn publish(&self, bytes: &[u8]) -> Result<(Arc<Record>, bool), PublishError> {
        let envelope = SignedManifest::from_bytes(bytes)
            .map_err(|e| PublishError::MalformedEnvelope(e.to_string()))?;
        let trust = self.trust.load().map_err(|e| PublishError::Storage(e.to_string()))?;
        let (manifest, _) = verify_signed_manifest(&envelope, &trust, now()).map_err(|e| match e {
            CryptoError::MalformedPayload(_) | CryptoError::InvalidManifest(_) => {
                PublishError::MalformedEnvelope(e.to_string())
            }
            other => PublishError::UntrustedSigner(other),
        })?;
        let id = compute_manifest_id(&manifest)
            .map_err(|e| PublishError::MalformedEnvelope(e.to_string()))?;
        let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(existing) = self.view().get(&id) {
            return if existing.envelope == bytes {
                Ok((existing, false))
            } else {
                Err(PublishError::ConflictingBytes(id))
            };
        }
        let storage = |e: &dyn std::fmt::Display| PublishError::Storage(e.to_string());
        let env_path = w.manifests_dir.join(format!("{}.env", id.as_str()));
        write_atomic(&env_path, bytes).map_err(|e| storage(&e))?;
        let entry = w.mode.entry_bytes(&id, bytes);
        let receipt = w.ledger.append(&entry).map_err(|e| storage(&e))?;
        let record = Arc::new(Record {
            manifest_id: id,
            object_id: manifest.object_id.clone(),
            envelope: bytes.to_vec(),
            sequence: receipt.sequence,
            receipt,
            published_at: format_utc(now()),
        });
        write_meta(&env_path.with_extension("json"), &record).map_err(|e| storage(&e))?;

        let mut next = View::clone(&self.view());
        next.insert(record.clone(), &manifest);
        *self.view.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        Ok((record, true))
    }

    pub fn head(&self) -> SignedTreeHead {
        self.writer.lock().unwrap_or_else(|e| e.into_inner()).ledger.head()
    }

    pub fn proof(&self, sequence: u64, tree_size: u64) -> Result<Receipt, LedgerError> {
        self.writer
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .ledger
            .prove_inclusion(sequence, tree_size)
    }

    pub fn consistency(&self, old_size: u64, new_size: u64) -> Result<Vec<Digest>, LedgerError> {
        self.writer
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .ledger
            .prove_consistency(old_size, new_size)
    }
}

fn write_meta(path: &Path, r: &Record) -> io::Result<()> {
    let meta = MetaDoc {
        manifest_id: r.manifest_id.to_string(),
        object_id: r.object_id.clone(),
        published_at: r.published_at.clone(),
        sequence: r.sequence,
        receipt: receipt_to_json(&r.receipt),
    };
    write_atomic(path, &serde_json::to_vec(&meta).expect("serializable"))
}

/// Loads the log signing key from `path`, generating an Ed25519 key (and a
/// `<path>.pub` companion) if the file does not exist.
pub fn load_or_create_log_key(path: &Path) -> Result<PrivateKey, StoreError> {
    if path.exists() {
        return Ok(PrivateKey::from_keystore_bytes(&fs::read(path)?)?);
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let key = vamp_core::crypto::generate_keypair(vamp_core::crypto::SignatureAlgorithm::Ed25519);
    write_private(path, &key.to_keystore_bytes())?;
    let mut pub_path = path.as_os_str().to_owned();
    pub_path.push(".pub");
    fs::write(PathBuf::from(pub_path), key.public_key().to_json_bytes())?;
    Ok(key)
}

/// Writes a file readable only by its owner where the platform allows.
pub fn write_private(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    use std::io::Write;
    opts.open(path)?.write_all(bytes)
}
