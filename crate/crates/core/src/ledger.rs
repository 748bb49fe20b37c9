//! Append-only Merkle transparency log with signed tree heads and offline
//! receipts.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};

use crate::binding::digest_from_value;
use crate::codec::{self, DecodeError, Format, MapBuilder, MapReader, Value};
use crate::crypto::{Digest, HashAlgorithm, PrivateKey, PublicKey, SignatureAlgorithm};
use crate::manifest::ManifestId;
use crate::merkle;
use crate::timestamp::{format_utc, now, parse_utc};

pub const LOG_HASH: HashAlgorithm = HashAlgorithm::Sha256;

const LOG_FILE: &str = "ledger.log";
const HEAD_FILE: &str = "head.json";
const SEALED_FILE: &str = "sealed";

/// What gets written as a log entry for a published manifest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum EntryMode {
    /// The manifest id text.
    #[default]
    DigestOnly,
    /// The full envelope bytes.
    Full,
}

impl EntryMode {
    pub fn entry_bytes(self, id: &ManifestId, envelope: &[u8]) -> Vec<u8> {
        match self {
            EntryMode::DigestOnly => id.as_str().as_bytes().to_vec(),
            EntryMode::Full => envelope.to_vec(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("requested range is out of range for a log of size {size}")]
    OutOfRange { size: u64 },
    #[error("log is sealed")]
    LogSealed,
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt log: {0}")]
    CorruptLog(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedTreeHead {
    pub tree_size: u64,
    pub root_hash: Digest,
    pub timestamp: String,
    pub signature: Vec<u8>,
}

impl SignedTreeHead {
    fn signed_bytes(tree_size: u64, root_hash: &Digest, timestamp: &str) -> Vec<u8> {
        let v = MapBuilder::new()
            .put("rootHash", Value::text(root_hash.to_string()))
            .put("timestamp", Value::text(timestamp))
            .put("treeSize", Value::Uint(tree_size))
            .build();
        codec::encode(&v, Format::Json)
    }

    fn sign(key: &PrivateKey, tree_size: u64, root_hash: Digest, at: DateTime<Utc>) -> Self {
        let timestamp = format_utc(at);
        let signature = key.sign(&Self::signed_bytes(tree_size, &root_hash, &timestamp));
        SignedTreeHead {
            tree_size,
            root_hash,
            timestamp,
            signature,
        }
    }

    pub fn verify(&self, log_key: &PublicKey) -> bool {
        self.root_hash.algorithm() == LOG_HASH
            && parse_utc(&self.timestamp).is_some()
            && log_key.verify(
                &Self::signed_bytes(self.tree_size, &self.root_hash, &self.timestamp),
                &self.signature,
            )
    }

    pub fn to_value(&self, format: Format) -> Value {
        MapBuilder::new()
            .put("rootHash", digest_value(format, &self.root_hash))
            .put("signature", Value::bytes_for(format, &self.signature))
            .put("timestamp", Value::text(&self.timestamp))
            .put("treeSize", Value::Uint(self.tree_size))
            .build()
    }

    pub fn from_value(v: &Value, format: Format, path: &str) -> Result<Self, DecodeError> {
        let mut r = MapReader::new(v, format, path)?;
        let p = r.field_path("rootHash");
        let root_hash = digest_from_value(r.req("rootHash")?, format, LOG_HASH, &p)?;
        let signature = r.bytes("signature")?;
        let timestamp = r.text("timestamp")?.to_owned();
        if parse_utc(&timestamp).is_none() {
            return Err(DecodeError::schema(&r.field_path("timestamp"), "not an RFC 3339 UTC time"));
        }
        let tree_size = r.uint("treeSize")?;
        r.finish()?;
        Ok(SignedTreeHead {
            tree_size,
            root_hash,
            timestamp,
            signature,
        })
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        codec::encode(&self.to_value(Format::Json), Format::Json)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        Self::from_value(&codec::decode(bytes, Format::Json)?, Format::Json, "")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub sequence: u64,
    pub leaf_hash: Digest,
    /// Siblings from the leaf level upwards.
    pub audit_path: Vec<Digest>,
    pub signed_tree_head: SignedTreeHead,
}

impl Receipt {
    pub fn to_value(&self, format: Format) -> Value {
        MapBuilder::new()
            .put(
                "auditPath",
                Value::Array(self.audit_path.iter().map(|d| digest_value(format, d)).collect()),
            )
            .put("leafHash", digest_value(format, &self.leaf_hash))
            .put("sequence", Value::Uint(self.sequence))
            .put("signedTreeHead", self.signed_tree_head.to_value(format))
            .build()
    }

    pub fn from_value(v: &Value, format: Format, path: &str) -> Result<Self, DecodeError> {
        let mut r = MapReader::new(v, format, path)?;
        let p = r.field_path("auditPath");
        let audit_path = r
            .array("auditPath")?
            .iter()
            .enumerate()
            .map(|(i, d)| digest_from_value(d, format, LOG_HASH, &format!("{p}[{i}]")))
            .collect::<Result<_, _>>()?;
        let p = r.field_path("leafHash");
        let leaf_hash = digest_from_value(r.req("leafHash")?, format, LOG_HASH, &p)?;
        let sequence = r.uint("sequence")?;
        let p = r.field_path("signedTreeHead");
        let signed_tree_head = SignedTreeHead::from_value(r.req("signedTreeHead")?, format, &p)?;
        r.finish()?;
        Ok(Receipt {
            sequence,
            leaf_hash,
            audit_path,
            signed_tree_head,
        })
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        codec::encode(&self.to_value(Format::Json), Format::Json)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        Self::from_value(&codec::decode(bytes, Format::Json)?, Format::Json, "")
    }

    /// Whether this receipt's leaf is `H(0x00 || entry)`.
    pub fn covers_entry(&self, entry: &[u8]) -> bool {
        merkle::leaf_hash(LOG_HASH, entry) == self.leaf_hash
    }
}

fn digest_value(format: Format, d: &Digest) -> Value {
    match format {
        Format::Json => Value::text(d.to_string()),
        Format::Cbor => Value::Bytes(d.as_bytes().to_vec()),
    }
}

/// Checks a receipt using only the log's public key.
pub fn verify_receipt(receipt: &Receipt, log_key: &PublicKey) -> bool {
    let sth = &receipt.signed_tree_head;
    if receipt.leaf_hash.algorithm() != LOG_HASH || !sth.verify(log_key) {
        return false;
    }
    merkle::root_from_inclusion(
        LOG_HASH,
        receipt.sequence,
        sth.tree_size,
        &receipt.leaf_hash,
        &receipt.audit_path,
    )
    .is_some_and(|root| root == sth.root_hash)
}

/// Hash-level check that `new` extends `old`. Signatures are checked
/// separately with [`SignedTreeHead::verify`].
pub fn verify_consistency(old: &SignedTreeHead, new: &SignedTreeHead, proof: &[Digest]) -> bool {
    if old.tree_size == 0 {
        return proof.is_empty() && old.root_hash == merkle::empty_root(LOG_HASH);
    }
    merkle::verify_consistency(
        LOG_HASH,
        old.tree_size,
        new.tree_size,
        &old.root_hash,
        &new.root_hash,
        proof,
    )
}

struct Storage {
    dir: PathBuf,
    log: File,
}

pub struct Ledger {
    key: PrivateKey,
    leaves: Vec<Digest>,
    acc: merkle::Accumulator,
    sealed: bool,
    storage: Option<Storage>,
}

impl std::fmt::Debug for Ledger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ledger")
            .field("size", &self.size())
            .field("sealed", &self.sealed)
            .finish_non_exhaustive()
    }
}

impl Ledger {
    pub fn in_memory(key: PrivateKey) -> Self {
        Ledger {
            key,
            leaves: Vec::new(),
            acc: merkle::Accumulator::new(LOG_HASH),
            sealed: false,
            storage: None,
        }
    }

    /// Opens or creates a persistent log in `dir`. A torn final record left
    /// by a crash is dropped; anything else inconsistent is `CorruptLog`.
    pub fn open(dir: &Path, key: PrivateKey) -> Result<Self, LedgerError> {
        fs::create_dir_all(dir)?;
        let log_path = dir.join(LOG_FILE);
        let mut bytes = Vec::new();
        if log_path.exists() {
            File::open(&log_path)?.read_to_end(&mut bytes)?;
        }
        let mut ledger = Ledger::in_memory(key);
        let mut pos = 0usize;
        while bytes.len() - pos >= 4 {
            let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
            if bytes.len() - pos - 4 < len {
                break;
            }
            ledger.push(&bytes[pos + 4..pos + 4 + len]);
            pos += 4 + len;
        }
        let head_path = dir.join(HEAD_FILE);
        if head_path.exists() {
            let head = SignedTreeHead::from_json_bytes(&fs::read(&head_path)?)
                .map_err(|e| LedgerError::CorruptLog(format!("unreadable checkpoint: {e}")))?;
            if !head.verify(&ledger.public_key()) {
                return Err(LedgerError::CorruptLog("checkpoint not signed by the log key".into()));
            }
            if head.tree_size > ledger.size() {
                return Err(LedgerError::CorruptLog(format!(
                    "checkpoint covers {} entries but the log holds {}",
                    head.tree_size,
                    ledger.size()
                )));
            }
            let root = merkle::root(LOG_HASH, &ledger.leaves[..head.tree_size as usize]);
            if root != head.root_hash {
                return Err(LedgerError::CorruptLog("log does not match checkpoint root".into()));
            }
        }
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        if pos < bytes.len() {
            log.set_len(pos as u64)?;
        }
        ledger.sealed = dir.join(SEALED_FILE).exists();
        ledger.storage = Some(Storage {
            dir: dir.to_path_buf(),
            log,
        });
        Ok(ledger)
    }

    fn push(&mut self, entry: &[u8]) {
        let leaf = merkle::leaf_hash(LOG_HASH, entry);
        self.acc.push_leaf(leaf.clone());
        self.leaves.push(leaf);
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.public_key()
    }

    pub fn key_algorithm(&self) -> SignatureAlgorithm {
        self.key.algorithm()
    }

    pub fn size(&self) -> u64 {
        self.leaves.len() as u64
    }

    pub fn root(&self) -> Digest {
        self.acc.root()
    }

    pub fn leaf_hash(&self, sequence: u64) -> Option<&Digest> {
        self.leaves.get(sequence as usize)
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn append(&mut self, entry: &[u8]) -> Result<Receipt, LedgerError> {
        if self.sealed {
            return Err(LedgerError::LogSealed);
        }
        let len = u32::try_from(entry.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "entry too large"))?;
        if let Some(s) = &mut self.storage {
            let mut record = Vec::with_capacity(4 + entry.len());
            record.extend_from_slice(&len.to_be_bytes());
            record.extend_from_slice(entry);
            s.log.write_all(&record)?;
            s.log.sync_data()?;
        }
        self.push(entry);
        let head = self.head();
        if let Some(s) = &self.storage {
            write_atomic(&s.dir.join(HEAD_FILE), &head.to_json_bytes())?;
        }
        let sequence = self.size() - 1;
        Ok(Receipt {
            sequence,
            leaf_hash: self.leaves[sequence as usize].clone(),
            audit_path: merkle::inclusion_path(LOG_HASH, &self.leaves, sequence as usize),
            signed_tree_head: head,
        })
    }

    /// Freshly signed head for the current size.
    pub fn head(&self) -> SignedTreeHead {
        SignedTreeHead::sign(&self.key, self.size(), self.root(), now())
    }

    /// Signed head for an earlier size.
    pub fn head_at(&self, tree_size: u64) -> Result<SignedTreeHead, LedgerError> {
        if tree_size > self.size() {
            return Err(LedgerError::OutOfRange { size: self.size() });
        }
        let root = merkle::root(LOG_HASH, &self.leaves[..tree_size as usize]);
        Ok(SignedTreeHead::sign(&self.key, tree_size, root, now()))
    }

    pub fn prove_inclusion(&self, sequence: u64, tree_size: u64) -> Result<Receipt, LedgerError> {
        if sequence >= tree_size || tree_size > self.size() {
            return Err(LedgerError::OutOfRange { size: self.size() });
        }
        let leaves = &self.leaves[..tree_size as usize];
        Ok(Receipt {
            sequence,
            leaf_hash: leaves[sequence as usize].clone(),
            audit_path: merkle::inclusion_path(LOG_HASH, leaves, sequence as usize),
            signed_tree_head: self.head_at(tree_size)?,
        })
    }

    pub fn prove_consistency(&self, old_size: u64, new_size: u64) -> Result<Vec<Digest>, LedgerError> {
        if old_size == 0 || old_size > new_size || new_size > self.size() {
            return Err(LedgerError::OutOfRange { size: self.size() });
        }
        Ok(merkle::consistency_proof(
            LOG_HASH,
            &self.leaves[..new_size as usize],
            old_size as usize,
        ))
    }

    /// Refuses all further appends, persistently if the log is on disk.
    pub fn seal(&mut self) -> Result<(), LedgerError> {
        if let Some(s) = &self.storage {
            fs::write(s.dir.join(SEALED_FILE), b"")?;
        }
        self.sealed = true;
        Ok(())
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
