//! Content bindings between a manifest and the payload bytes it describes.
//!
//! Four kinds are supported:
//!
//! * `static`: one digest over the whole payload.
//! * `fixed-chunk`: consecutive fixed-length chunks, one digest each.
//! * `box`: labeled byte ranges at arbitrary offsets and lengths. Minibatch
//!   bindings are boxes where each box covers `B` consecutive records.
//! * `record-merkle`: a Merkle root over individual records, so that any
//!   contiguous run of records can be verified with a short proof whatever
//!   the minibatch size.
//!
//! All computation and verification is single-pass over a [`Read`]; nothing
//! requires the payload to be held in memory.

use std::fmt;
use std::io::{self, BufRead, BufReader, Read};

use crate::codec::{DecodeError, Format, MapBuilder, MapReader, Value};
use crate::crypto::{Digest, HashAlgorithm};
use crate::merkle::{self, RangeProofError};

pub const DEFAULT_CHUNK_SIZE: u64 = 1024 * 1024;
pub const DEFAULT_RECORD_DELIMITER: &[u8] = b"\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BindingKind {
    Static,
    FixedChunk,
    Box,
    RecordMerkle,
}

impl BindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BindingKind::Static => "static",
            BindingKind::FixedChunk => "fixed-chunk",
            BindingKind::Box => "box",
            BindingKind::RecordMerkle => "record-merkle",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "static" => BindingKind::Static,
            "fixed-chunk" => BindingKind::FixedChunk,
            "box" => BindingKind::Box,
            "record-merkle" => BindingKind::RecordMerkle,
            _ => return None,
        })
    }
}

impl fmt::Display for BindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxEntry {
    pub offset: u64,
    pub length: u64,
    pub digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BindingBody {
    Static {
        digest: Digest,
    },
    FixedChunk {
        chunk_size: u64,
        total_length: u64,
        digests: Vec<Digest>,
    },
    Box {
        boxes: Vec<BoxEntry>,
    },
    RecordMerkle {
        record_delimiter: Vec<u8>,
        leaf_count: u64,
        root: Digest,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindingSet {
    pub name: String,
    pub hash_algorithm: HashAlgorithm,
    pub body: BindingBody,
}

impl BindingSet {
    pub fn kind(&self) -> BindingKind {
        match self.body {
            BindingBody::Static { .. } => BindingKind::Static,
            BindingBody::FixedChunk { .. } => BindingKind::FixedChunk,
            BindingBody::Box { .. } => BindingKind::Box,
            BindingBody::RecordMerkle { .. } => BindingKind::RecordMerkle,
        }
    }

    /// Returns a copy under a different name.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Structural problems that can be detected without the payload.
    pub fn structural_issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.name.is_empty() {
            issues.push("binding name is empty".to_owned());
        }
        let alg = self.hash_algorithm;
        let check = |d: &Digest, what: &str, issues: &mut Vec<String>| {
            if d.algorithm() != alg {
                issues.push(format!("{what} uses {} but the set declares {alg}", d.algorithm()));
            }
        };
        match &self.body {
            BindingBody::Static { digest } => check(digest, "digest", &mut issues),
            BindingBody::FixedChunk {
                chunk_size,
                total_length,
                digests,
            } => {
                if *chunk_size == 0 {
                    issues.push("chunkSize must be positive".to_owned());
                } else if digests.len() as u64 != total_length.div_ceil(*chunk_size) {
                    issues.push(format!(
                        "{} chunk digests for totalLength {total_length} and chunkSize {chunk_size}",
                        digests.len()
                    ));
                }
                for (i, d) in digests.iter().enumerate() {
                    check(d, &format!("digests[{i}]"), &mut issues);
                }
            }
            BindingBody::Box { boxes } => {
                let mut expected = 0u64;
                for (i, b) in boxes.iter().enumerate() {
                    if b.length == 0 {
                        issues.push(format!("boxes[{i}] has zero length"));
                    }
                    if b.offset != expected {
                        issues.push(format!(
                            "boxes[{i}] starts at {} but the previous box ends at {expected}",
                            b.offset
                        ));
                    }
                    expected = b.offset.saturating_add(b.length);
                    check(&b.digest, &format!("boxes[{i}].digest"), &mut issues);
                }
            }
            BindingBody::RecordMerkle {
                record_delimiter,
                root,
                ..
            } => {
                if record_delimiter.is_empty() {
                    issues.push("recordDelimiter is empty".to_owned());
                }
                check(root, "root", &mut issues);
            }
        }
        issues
    }

    pub fn to_value(&self, format: Format) -> Value {
        let digest = |d: &Digest| match format {
            Format::Json => Value::text(d.to_string()),
            Format::Cbor => Value::Bytes(d.as_bytes().to_vec()),
        };
        let b = MapBuilder::new()
            .put("hashAlgorithm", Value::text(self.hash_algorithm.as_str()))
            .put("kind", Value::text(self.kind().as_str()))
            .put("name", Value::text(&self.name));
        match &self.body {
            BindingBody::Static { digest: d } => b.put("digest", digest(d)),
            BindingBody::FixedChunk {
                chunk_size,
                total_length,
                digests,
            } => b
                .put("chunkSize", Value::Uint(*chunk_size))
                .put("totalLength", Value::Uint(*total_length))
                .put("digests", Value::Array(digests.iter().map(digest).collect())),
            BindingBody::Box { boxes } => b.put(
                "boxes",
                Value::Array(
                    boxes
                        .iter()
                        .map(|bx| {
                            MapBuilder::new()
                                .put("digest", digest(&bx.digest))
                                .put("length", Value::Uint(bx.length))
                                .put("offset", Value::Uint(bx.offset))
                                .build()
                        })
                        .collect(),
                ),
            ),
            BindingBody::RecordMerkle {
                record_delimiter,
                leaf_count,
                root,
            } => b
                .put("leafCount", Value::Uint(*leaf_count))
                .put("recordDelimiter", Value::bytes_for(format, record_delimiter))
                .put("root", digest(root)),
        }
        .build()
    }

    pub fn from_value(v: &Value, format: Format, path: &str) -> Result<Self, DecodeError> {
        let mut r = MapReader::new(v, format, path)?;
        let hash_algorithm: HashAlgorithm = r
            .text("hashAlgorithm")?
            .parse()
            .map_err(|e: String| DecodeError::schema(&r.field_path("hashAlgorithm"), e))?;
        let kind_text = r.text("kind")?;
        let kind = BindingKind::parse(kind_text).ok_or_else(|| {
            DecodeError::schema(&r.field_path("kind"), format!("unknown binding kind {kind_text:?}"))
        })?;
        let name = r.text("name")?.to_owned();
        let body = match kind {
            BindingKind::Static => {
                let p = r.field_path("digest");
                BindingBody::Static {
                    digest: digest_from_value(r.req("digest")?, format, hash_algorithm, &p)?,
                }
            }
            BindingKind::FixedChunk => {
                let chunk_size = r.uint("chunkSize")?;
                let total_length = r.uint("totalLength")?;
                let p = r.field_path("digests");
                let digests = r
                    .array("digests")?
                    .iter()
                    .enumerate()
                    .map(|(i, d)| digest_from_value(d, format, hash_algorithm, &format!("{p}[{i}]")))
                    .collect::<Result<_, _>>()?;
                BindingBody::FixedChunk {
                    chunk_size,
                    total_length,
                    digests,
                }
            }
            BindingKind::Box => {
                let p = r.field_path("boxes");
                let boxes = r
                    .array("boxes")?
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let bp = format!("{p}[{i}]");
                        let mut br = MapReader::new(b, format, &bp)?;
                        let dp = br.field_path("digest");
                        let digest = digest_from_value(br.req("digest")?, format, hash_algorithm, &dp)?;
                        let length = br.uint("length")?;
                        let offset = br.uint("offset")?;
                        br.finish()?;
                        Ok(BoxEntry {
                            offset,
                            length,
                            digest,
                        })
                    })
                    .collect::<Result<_, DecodeError>>()?;
                BindingBody::Box { boxes }
            }
            BindingKind::RecordMerkle => {
                let leaf_count = r.uint("leafCount")?;
                let record_delimiter = r.bytes("recordDelimiter")?;
                let p = r.field_path("root");
                let root = digest_from_value(r.req("root")?, format, hash_algorithm, &p)?;
                BindingBody::RecordMerkle {
                    record_delimiter,
                    leaf_count,
                    root,
                }
            }
        };
        r.finish()?;
        Ok(BindingSet {
            name,
            hash_algorithm,
            body,
        })
    }
}

/// Digests are `alg:hex` text in JSON and raw bytes in CBOR (the algorithm
/// then comes from the enclosing set).
pub(crate) fn digest_from_value(
    v: &Value,
    format: Format,
    alg: HashAlgorithm,
    path: &str,
) -> Result<Digest, DecodeError> {
    match (format, v) {
        (Format::Json, Value::Text(s)) => s.parse().map_err(|e: String| DecodeError::schema(path, e)),
        (Format::Cbor, Value::Bytes(b)) => {
            Digest::new(alg, b.clone()).map_err(|e| DecodeError::schema(path, e))
        }
        (_, other) => Err(DecodeError::schema(
            path,
            format!("expected digest, found {}", other.kind()),
        )),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BindingError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("chunk size must be positive")]
    ZeroChunkSize,
    #[error("batch size must be at least 1")]
    ZeroBatchSize,
    #[error("record delimiter must be non-empty")]
    EmptyDelimiter,
    #[error("binding set {0:?} is not a record-merkle binding")]
    NotRecordMerkle(String),
    #[error("record range [{start}, {end}) is out of bounds for {leaf_count} records")]
    RangeOutOfBounds { start: u64, end: u64, leaf_count: u64 },
    #[error("malformed proof: {0}")]
    MalformedProof(&'static str),
}

/// Reads as many bytes as are available up to `buf.len()`.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Hashes up to `len` bytes from `r`; returns the digest and the number of
/// bytes actually read (less than `len` only at EOF).
fn hash_span<R: Read>(
    r: &mut R,
    len: u64,
    alg: HashAlgorithm,
    buf: &mut [u8],
) -> io::Result<(Digest, u64)> {
    let mut h = alg.hasher();
    let mut done = 0u64;
    while done < len {
        let want = (len - done).min(buf.len() as u64) as usize;
        let n = read_full(r, &mut buf[..want])?;
        h.update(&buf[..n]);
        done += n as u64;
        if n < want {
            break;
        }
    }
    Ok((h.finish(), done))
}

const IO_BUF: usize = 64 * 1024;

/// Iterates over delimiter-terminated records. The delimiter is part of the
/// record; the last record may lack one.
pub struct Records<R> {
    reader: R,
    delimiter: Vec<u8>,
}

impl<R: BufRead> Records<R> {
    pub fn new(reader: R, delimiter: &[u8]) -> Self {
        assert!(!delimiter.is_empty(), "record delimiter must be non-empty");
        Self {
            reader,
            delimiter: delimiter.to_vec(),
        }
    }
}

impl<R: BufRead> Iterator for Records<R> {
    type Item = io::Result<Vec<u8>>;

    fn next(&mut self) -> Option<Self::Item> {
        let last = *self.delimiter.last().expect("non-empty");
        let mut record = Vec::new();
        loop {
            match self.reader.read_until(last, &mut record) {
                Ok(0) => break,
                Ok(_) => {
                    if record.ends_with(&self.delimiter) {
                        break;
                    }
                    if record.last() != Some(&last) {
                        // EOF inside a record
                        break;
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Some(Err(e)),
            }
        }
        (!record.is_empty()).then_some(Ok(record))
    }
}

pub fn bind_static<R: Read>(payload: R, alg: HashAlgorithm) -> Result<BindingSet, BindingError> {
    let digest = crate::crypto::hash_stream(alg, payload)?;
    Ok(BindingSet {
        name: "static".to_owned(),
        hash_algorithm: alg,
        body: BindingBody::Static { digest },
    })
}

pub fn bind_fixed_chunks<R: Read>(
    mut payload: R,
    chunk_size: u64,
    alg: HashAlgorithm,
) -> Result<BindingSet, BindingError> {
    if chunk_size == 0 {
        return Err(BindingError::ZeroChunkSize);
    }
    let mut buf = vec![0u8; IO_BUF];
    let mut digests = Vec::new();
    let mut total = 0u64;
    loop {
        let (digest, n) = hash_span(&mut payload, chunk_size, alg, &mut buf)?;
        if n == 0 {
            break;
        }
        digests.push(digest);
        total += n;
        if n < chunk_size {
            break;
        }
    }
    Ok(BindingSet {
        name: format!("chunk:{chunk_size}"),
        hash_algorithm: alg,
        body: BindingBody::FixedChunk {
            chunk_size,
            total_length: total,
            digests,
        },
    })
}

/// Box binding where each box covers `batch_size` consecutive records.
pub fn bind_minibatches<R: Read>(
    payload: R,
    delimiter: &[u8],
    batch_size: u64,
    alg: HashAlgorithm,
) -> Result<BindingSet, BindingError> {
    if batch_size == 0 {
        return Err(BindingError::ZeroBatchSize);
    }
    if delimiter.is_empty() {
        return Err(BindingError::EmptyDelimiter);
    }
    let mut boxes = Vec::new();
    let mut offset = 0u64;
    let mut current: Option<(crate::crypto::Hasher, u64, u64)> = None;
    for record in Records::new(BufReader::new(payload), delimiter) {
        let record = record?;
        let (hasher, len, count) = current.get_or_insert_with(|| (alg.hasher(), 0, 0));
        hasher.update(&record);
        *len += record.len() as u64;
        *count += 1;
        if *count == batch_size {
            let (h, len, _) = current.take().unwrap();
            boxes.push(BoxEntry {
                offset,
                length: len,
                digest: h.finish(),
            });
            offset += len;
        }
    }
    if let Some((h, len, _)) = current {
        boxes.push(BoxEntry {
            offset,
            length: len,
            digest: h.finish(),
        });
    }
    Ok(BindingSet {
        name: format!("minibatch:{batch_size}"),
        hash_algorithm: alg,
        body: BindingBody::Box { boxes },
    })
}

/// Box binding over caller-supplied fixed-length binary records.
pub fn bind_fixed_records<R: Read>(
    payload: R,
    record_length: u64,
    batch_size: u64,
    alg: HashAlgorithm,
) -> Result<BindingSet, BindingError> {
    if batch_size == 0 {
        return Err(BindingError::ZeroBatchSize);
    }
    let box_len = record_length
        .checked_mul(batch_size)
        .filter(|&n| n > 0)
        .ok_or(BindingError::ZeroChunkSize)?;
    let chunks = bind_fixed_chunks(payload, box_len, alg)?;
    let BindingBody::FixedChunk {
        digests,
        total_length,
        ..
    } = chunks.body
    else {
        unreachable!("bind_fixed_chunks returns a fixed-chunk body")
    };
    let mut boxes = Vec::with_capacity(digests.len());
    let mut offset = 0;
    for digest in digests {
        let length = box_len.min(total_length - offset);
        boxes.push(BoxEntry {
            offset,
            length,
            digest,
        });
        offset += length;
    }
    Ok(BindingSet {
        name: format!("records:{record_length}x{batch_size}"),
        hash_algorithm: alg,
        body: BindingBody::Box { boxes },
    })
}

fn record_leaves<R: Read>(
    payload: R,
    delimiter: &[u8],
    alg: HashAlgorithm,
) -> Result<Vec<Digest>, BindingError> {
    if delimiter.is_empty() {
        return Err(BindingError::EmptyDelimiter);
    }
    Records::new(BufReader::new(payload), delimiter)
        .map(|r| Ok(merkle::leaf_hash(alg, &r?)))
        .collect()
}

pub fn bind_record_merkle<R: Read>(
    payload: R,
    delimiter: &[u8],
    alg: HashAlgorithm,
) -> Result<BindingSet, BindingError> {
    if delimiter.is_empty() {
        return Err(BindingError::EmptyDelimiter);
    }
    let mut acc = merkle::Accumulator::new(alg);
    for record in Records::new(BufReader::new(payload), delimiter) {
        acc.push_leaf(merkle::leaf_hash(alg, &record?));
    }
    Ok(BindingSet {
        name: "record-merkle".to_owned(),
        hash_algorithm: alg,
        body: BindingBody::RecordMerkle {
            record_delimiter: delimiter.to_vec(),
            leaf_count: acc.count(),
            root: acc.root(),
        },
    })
}

/// Proof for records `[start, end)` against a record-merkle binding of
/// `payload`.
pub fn record_range_proof<R: Read>(
    payload: R,
    delimiter: &[u8],
    alg: HashAlgorithm,
    start: u64,
    end: u64,
) -> Result<Vec<Digest>, BindingError> {
    let leaves = record_leaves(payload, delimiter, alg)?;
    let leaf_count = leaves.len() as u64;
    if start >= end || end > leaf_count {
        return Err(BindingError::RangeOutOfBounds {
            start,
            end,
            leaf_count,
        });
    }
    Ok(merkle::range_proof(alg, &leaves, start as usize, end as usize))
}

/// Checks records `[start, end)` against a record-merkle binding.
pub fn verify_minibatch_range<B: AsRef<[u8]>>(
    set: &BindingSet,
    start: u64,
    end: u64,
    records: &[B],
    proof: &[Digest],
) -> Result<bool, BindingError> {
    let BindingBody::RecordMerkle {
        leaf_count, root, ..
    } = &set.body
    else {
        return Err(BindingError::NotRecordMerkle(set.name.clone()));
    };
    if start >= end || end > *leaf_count {
        return Err(BindingError::RangeOutOfBounds {
            start,
            end,
            leaf_count: *leaf_count,
        });
    }
    let alg = set.hash_algorithm;
    let leaves: Vec<Digest> = records
        .iter()
        .map(|r| merkle::leaf_hash(alg, r.as_ref()))
        .collect();
    match merkle::root_from_range(alg, *leaf_count as usize, start as usize, end as usize, &leaves, proof) {
        Ok(computed) => Ok(&computed == root),
        Err(RangeProofError::OutOfBounds) => Err(BindingError::RangeOutOfBounds {
            start,
            end,
            leaf_count: *leaf_count,
        }),
        Err(RangeProofError::Malformed(m)) => Err(BindingError::MalformedProof(m)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BindingIssue {
    /// Chunk or box `unit` does not match its digest.
    DigestMismatch { unit: u64 },
    /// Static digest or Merkle root does not match.
    RootMismatch,
    LengthMismatch { expected: u64, actual: u64 },
    LeafCountMismatch { expected: u64, actual: u64 },
    Structural(String),
}

impl fmt::Display for BindingIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BindingIssue::DigestMismatch { unit } => write!(f, "unit {unit} digest mismatch"),
            BindingIssue::RootMismatch => f.write_str("digest mismatch"),
            BindingIssue::LengthMismatch { expected, actual } => {
                write!(f, "LengthMismatch: expected {expected} bytes, found {actual}")
            }
            BindingIssue::LeafCountMismatch { expected, actual } => {
                write!(f, "expected {expected} records, found {actual}")
            }
            BindingIssue::Structural(m) => write!(f, "structural: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub binding: String,
    pub kind: BindingKind,
    pub passed: bool,
    /// Indices of failing chunks or boxes, ascending.
    pub failing_units: Vec<u64>,
    pub issues: Vec<BindingIssue>,
}

impl VerificationReport {
    fn new(set: &BindingSet, failing_units: Vec<u64>, issues: Vec<BindingIssue>) -> Self {
        Self {
            binding: set.name.clone(),
            kind: set.kind(),
            passed: issues.is_empty(),
            failing_units,
            issues,
        }
    }
}

/// Counts the bytes left in `r` without keeping them.
fn drain<R: Read>(r: &mut R) -> io::Result<u64> {
    io::copy(r, &mut io::sink())
}

/// Verifies `payload` against one binding set. Mismatches are reported, not
/// returned as errors.
pub fn verify_binding<R: Read>(
    mut payload: R,
    set: &BindingSet,
) -> Result<VerificationReport, BindingError> {
    let structural = set.structural_issues();
    if !structural.is_empty() {
        return Ok(VerificationReport::new(
            set,
            Vec::new(),
            structural.into_iter().map(BindingIssue::Structural).collect(),
        ));
    }
    let alg = set.hash_algorithm;
    let mut units = Vec::new();
    let mut issues = Vec::new();
    match &set.body {
        BindingBody::Static { digest } => {
            if &crate::crypto::hash_stream(alg, payload)? != digest {
                issues.push(BindingIssue::RootMismatch);
            }
        }
        BindingBody::FixedChunk {
            chunk_size,
            total_length,
            digests,
        } => {
            let mut buf = vec![0u8; IO_BUF];
            let mut actual = 0u64;
            let mut exhausted = false;
            for (i, expected) in digests.iter().enumerate() {
                if exhausted {
                    units.push(i as u64);
                    continue;
                }
                let (digest, n) = hash_span(&mut payload, *chunk_size, alg, &mut buf)?;
                actual += n;
                if n == 0 || &digest != expected {
                    units.push(i as u64);
                }
                exhausted = n < *chunk_size;
            }
            actual += drain(&mut payload)?;
            for &u in &units {
                issues.push(BindingIssue::DigestMismatch { unit: u });
            }
            if actual != *total_length {
                issues.push(BindingIssue::LengthMismatch {
                    expected: *total_length,
                    actual,
                });
            }
        }
        BindingBody::Box { boxes } => {
            let mut actual = 0u64;
            let mut buf = vec![0u8; IO_BUF];
            for (i, b) in boxes.iter().enumerate() {
                let (digest, n) = hash_span(&mut payload, b.length, alg, &mut buf)?;
                actual += n;
                if n < b.length || digest != b.digest {
                    units.push(i as u64);
                }
            }
            actual += drain(&mut payload)?;
            for &u in &units {
                issues.push(BindingIssue::DigestMismatch { unit: u });
            }
            let expected = boxes.last().map_or(0, |b| b.offset + b.length);
            if actual != expected {
                issues.push(BindingIssue::LengthMismatch { expected, actual });
            }
        }
        BindingBody::RecordMerkle {
            record_delimiter,
            leaf_count,
            root,
        } => {
            let mut acc = merkle::Accumulator::new(alg);
            for record in Records::new(BufReader::new(payload), record_delimiter) {
                acc.push_leaf(merkle::leaf_hash(alg, &record?));
            }
            if acc.count() != *leaf_count {
                issues.push(BindingIssue::LeafCountMismatch {
                    expected: *leaf_count,
                    actual: acc.count(),
                });
            }
            if &acc.root() != root {
                issues.push(BindingIssue::RootMismatch);
            }
        }
    }
    Ok(VerificationReport::new(set, units, issues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest as _, Sha256};

    const ALG: HashAlgorithm = HashAlgorithm::Sha256;

    fn sha256(data: &[u8]) -> Vec<u8> {
        Sha256::digest(data).to_vec()
    }

    fn digest_hex(set: &BindingSet) -> String {
        match &set.body {
            BindingBody::Static { digest } => digest.to_hex(),
            _ => panic!("not static"),
        }
    }

    #[test]
    fn static_vectors() {
        let s = bind_static(&b"abc"[..], ALG).unwrap();
        assert_eq!(s.name, "static");
        assert_eq!(
            digest_hex(&s),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let e = bind_static(&b""[..], ALG).unwrap();
        assert_eq!(
            digest_hex(&e),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(bind_static(&b"abc"[..], ALG).unwrap(), s);
    }

    #[test]
    fn fixed_chunks() {
        let s = bind_fixed_chunks(&b"abc"[..], 1, ALG).unwrap();
        assert_eq!(s.name, "chunk:1");
        let BindingBody::FixedChunk { digests, total_length, .. } = &s.body else { panic!() };
        assert_eq!(digests.len(), 3);
        assert_eq!(*total_length, 3);
        assert_eq!(digests[0].as_bytes(), &sha256(b"a")[..]);
        assert_eq!(digests[2].as_bytes(), &sha256(b"c")[..]);

        let payload = b"0123456789";
        let s = bind_fixed_chunks(&payload[..], 16, ALG).unwrap();
        let BindingBody::FixedChunk { digests, .. } = &s.body else { panic!() };
        assert_eq!(digests.len(), 1);
        assert_eq!(digests[0].to_hex(), digest_hex(&bind_static(&payload[..], ALG).unwrap()));

        let s = bind_fixed_chunks(&b""[..], 16, ALG).unwrap();
        let BindingBody::FixedChunk { digests, total_length, .. } = &s.body else { panic!() };
        assert!(digests.is_empty());
        assert_eq!(*total_length, 0);
        assert!(matches!(bind_fixed_chunks(&b""[..], 0, ALG), Err(BindingError::ZeroChunkSize)));
    }

    fn boxes(set: &BindingSet) -> &[BoxEntry] {
        match &set.body {
            BindingBody::Box { boxes } => boxes,
            _ => panic!("not a box binding"),
        }
    }

    #[test]
    fn minibatch_partition() {
        let payload = b"r1\nr2\nr3\nr4\nr5\n";
        let s = bind_minibatches(&payload[..], b"\n", 2, ALG).unwrap();
        assert_eq!(s.name, "minibatch:2");
        let bx = boxes(&s);
        assert_eq!(bx.len(), 3);
        assert_eq!((bx[0].offset, bx[0].length), (0, 6));
        assert_eq!((bx[1].offset, bx[1].length), (6, 6));
        assert_eq!((bx[2].offset, bx[2].length), (12, 3));
        assert_eq!(bx.iter().map(|b| b.length).sum::<u64>(), payload.len() as u64);
        assert_eq!(bx[0].digest.as_bytes(), &sha256(b"r1\nr2\n")[..]);
    }

    #[test]
    fn minibatch_equal_lines() {
        let payload = b"aaaaaaaaa\nbbbbbbbbb\nccccccccc\nddddddddd\n";
        let s = bind_minibatches(&payload[..], b"\n", 2, ALG).unwrap();
        let bx = boxes(&s);
        assert_eq!(bx.len(), 2);
        assert_eq!((bx[0].offset, bx[0].length), (0, 20));
        assert_eq!((bx[1].offset, bx[1].length), (20, 20));
    }

    #[test]
    fn minibatch_unterminated_last_record_and_empty() {
        let s = bind_minibatches(&b"a\nb"[..], b"\n", 1, ALG).unwrap();
        let bx = boxes(&s);
        assert_eq!(bx.len(), 2);
        assert_eq!(bx[1].digest.as_bytes(), &sha256(b"b")[..]);
        let e = bind_minibatches(&b""[..], b"\n", 4, ALG).unwrap();
        assert!(boxes(&e).is_empty());
        assert!(verify_binding(&b""[..], &e).unwrap().passed);
    }

    #[test]
    fn multi_byte_delimiter() {
        let recs: Vec<_> = Records::new(&b"a\r\nb\rc\r\n\r\nd"[..], b"\r\n")
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(recs, vec![b"a\r\n".to_vec(), b"b\rc\r\n".to_vec(), b"\r\n".to_vec(), b"d".to_vec()]);
    }

    #[test]
    fn record_merkle_roots() {
        let s = bind_record_merkle(&b"only"[..], b"\n", ALG).unwrap();
        let BindingBody::RecordMerkle { root, leaf_count, .. } = &s.body else { panic!() };
        assert_eq!(*leaf_count, 1);
        let mut leaf = vec![0u8];
        leaf.extend_from_slice(b"only");
        assert_eq!(root.as_bytes(), &sha256(&leaf)[..]);

        let s = bind_record_merkle(&b"r0\nr1\n"[..], b"\n", ALG).unwrap();
        let BindingBody::RecordMerkle { root, .. } = &s.body else { panic!() };
        let l0 = sha256(b"\x00r0\n");
        let l1 = sha256(b"\x00r1\n");
        let mut node = vec![1u8];
        node.extend_from_slice(&l0);
        node.extend_from_slice(&l1);
        assert_eq!(root.as_bytes(), &sha256(&node)[..]);

        let s = bind_record_merkle(&b""[..], b"\n", ALG).unwrap();
        let BindingBody::RecordMerkle { root, leaf_count, .. } = &s.body else { panic!() };
        assert_eq!(*leaf_count, 0);
        assert_eq!(root.as_bytes(), &sha256(b"")[..]);
    }

    #[test]
    fn range_verification_two_leaves() {
        let payload = b"r0\nr1\n";
        let s = bind_record_merkle(&payload[..], b"\n", ALG).unwrap();
        let leaf1 = merkle::leaf_hash(ALG, b"r1\n");
        assert!(verify_minibatch_range(&s, 0, 1, &[b"r0\n"], &[leaf1.clone()]).unwrap());
        assert!(!verify_minibatch_range(&s, 0, 1, &[b"rX\n"], &[leaf1.clone()]).unwrap());
        assert!(matches!(
            verify_minibatch_range(&s, 1, 3, &[b"r1\n", b"r2\n"], &[]),
            Err(BindingError::RangeOutOfBounds { .. })
        ));
        assert!(matches!(
            verify_minibatch_range(&s, 0, 1, &[b"r0\n"], &[]),
            Err(BindingError::MalformedProof(_))
        ));
        let st = bind_static(&payload[..], ALG).unwrap();
        assert!(matches!(
            verify_minibatch_range(&st, 0, 1, &[b"r0\n"], &[leaf1]),
            Err(BindingError::NotRecordMerkle(_))
        ));
    }

    #[test]
    fn verify_reports_failing_box() {
        let payload = b"r1\nr2\nr3\nr4\nr5\n".to_vec();
        let s = bind_minibatches(&payload[..], b"\n", 2, ALG).unwrap();
        let ok = verify_binding(&payload[..], &s).unwrap();
        assert!(ok.passed);
        assert!(ok.failing_units.is_empty());
        let mut bad = payload.clone();
        bad[7] ^= 1;
        let r = verify_binding(&bad[..], &s).unwrap();
        assert!(!r.passed);
        assert_eq!(r.failing_units, vec![1]);
    }

    #[test]
    fn truncation_is_length_mismatch() {
        let payload = b"0123456789abcdef0123".to_vec();
        let s = bind_fixed_chunks(&payload[..], 8, ALG).unwrap();
        let r = verify_binding(&payload[..payload.len() - 1], &s).unwrap();
        assert!(!r.passed);
        assert!(r.issues.contains(&BindingIssue::LengthMismatch { expected: 20, actual: 19 }));
        assert_eq!(r.failing_units, vec![2]);

        let mut longer = payload.clone();
        longer.push(b'!');
        let r = verify_binding(&longer[..], &s).unwrap();
        assert!(r.issues.contains(&BindingIssue::LengthMismatch { expected: 20, actual: 21 }));
    }

    #[test]
    fn structural_problems_fail_verification() {
        let mut s = bind_minibatches(&b"a\nb\n"[..], b"\n", 1, ALG).unwrap();
        if let BindingBody::Box { boxes } = &mut s.body {
            boxes[1].offset = 5;
        }
        let r = verify_binding(&b"a\nb\n"[..], &s).unwrap();
        assert!(!r.passed);
        assert!(matches!(r.issues[0], BindingIssue::Structural(_)));
    }

    #[test]
    fn fixed_records_boxes() {
        let payload = [7u8; 40];
        let s = bind_fixed_records(&payload[..], 4, 3, ALG).unwrap();
        let bx = boxes(&s);
        assert_eq!(bx.len(), 4);
        assert_eq!(bx[3].offset, 36);
        // last box holds only one record
        assert_eq!(bx[3].length, 4);
        assert!(verify_binding(&payload[..], &s).unwrap().passed);
    }

    #[test]
    fn json_and_cbor_values_round_trip() {
        let payload = b"x,1\ny,2\n";
        for set in [
            bind_static(&payload[..], HashAlgorithm::Sha512).unwrap(),
            bind_fixed_chunks(&payload[..], 3, ALG).unwrap(),
            bind_minibatches(&payload[..], b"\n", 1, ALG).unwrap(),
            bind_record_merkle(&payload[..], b"\n", ALG).unwrap(),
        ] {
            for f in [Format::Json, Format::Cbor] {
                let back = BindingSet::from_value(&set.to_value(f), f, "b").unwrap();
                assert_eq!(back, set);
            }
        }
    }
}
