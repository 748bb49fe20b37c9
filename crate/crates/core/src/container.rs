//! Object file layouts: embedded manifests, detached stubs and sidecars.
//!
//! Text containers carry `#%VAMP-` header lines before the payload; binary
//! containers start with the `VAMP` magic. Bindings always cover the payload
//! region only.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Cursor, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use crate::binding::verify_binding;
use crate::codec::{base64_decode, base64_encode, Format};
use crate::crypto::{hash_stream, CryptoError, Digest, HashAlgorithm, SignedManifest};

pub const MAX_ENVELOPE_LEN: usize = 16 * 1024 * 1024;
pub const BINARY_MAGIC: &[u8; 4] = b"VAMP";
pub const TEXT_PREFIX: &[u8] = b"#%VAMP-";
pub const CONTAINER_VERSION: u8 = 1;
pub const SIDECAR_SUFFIX: &str = ".man";

const TYPE_EMBEDDED: u8 = 0x01;
const TYPE_DETACHED: u8 = 0x02;
const SER_JSON: u8 = 0x01;
const SER_CBOR: u8 = 0x02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    Text,
    Binary,
}

impl ContainerKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Some(ContainerKind::Text),
            "binary" => Some(ContainerKind::Binary),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestType {
    Embedded,
    Detached,
}

impl ManifestType {
    pub fn as_str(self) -> &'static str {
        match self {
            ManifestType::Embedded => "Embedded",
            ManifestType::Detached => "Detached",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("corrupt container header: {0}")]
    CorruptHeader(String),
    #[error("payload does not match the manifest bindings: {0}")]
    BindingMismatch(String),
    #[error("manifest of {0} bytes exceeds the {MAX_ENVELOPE_LEN}-byte limit")]
    OversizeManifest(usize),
    #[error("manifest locator must be non-empty and a single line")]
    InvalidLocator,
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

fn corrupt(msg: impl Into<String>) -> ContainerError {
    ContainerError::CorruptHeader(msg.into())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeaderManifest {
    Embedded {
        envelope: SignedManifest,
        envelope_bytes: Vec<u8>,
    },
    Detached {
        serialization: Format,
        locator: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerHeader {
    /// `None` for a bare file with no header.
    pub kind: Option<ContainerKind>,
    pub manifest: Option<HeaderManifest>,
    /// Offset and length of the payload region.
    pub payload_span: (u64, u64),
}

impl ContainerHeader {
    pub fn is_bare(&self) -> bool {
        self.kind.is_none()
    }

    pub fn manifest_type(&self) -> Option<ManifestType> {
        self.manifest.as_ref().map(|m| match m {
            HeaderManifest::Embedded { .. } => ManifestType::Embedded,
            HeaderManifest::Detached { .. } => ManifestType::Detached,
        })
    }

    pub fn serialization(&self) -> Option<Format> {
        self.manifest.as_ref().map(|m| match m {
            HeaderManifest::Embedded { envelope, .. } => envelope.serialization,
            HeaderManifest::Detached { serialization, .. } => *serialization,
        })
    }

    pub fn locator(&self) -> Option<&str> {
        match &self.manifest {
            Some(HeaderManifest::Detached { locator, .. }) => Some(locator),
            _ => None,
        }
    }

    pub fn envelope(&self) -> Option<&SignedManifest> {
        match &self.manifest {
            Some(HeaderManifest::Embedded { envelope, .. }) => Some(envelope),
            _ => None,
        }
    }

    pub fn envelope_bytes(&self) -> Option<&[u8]> {
        match &self.manifest {
            Some(HeaderManifest::Embedded { envelope_bytes, .. }) => Some(envelope_bytes),
            _ => None,
        }
    }

    /// The payload region of `file`.
    pub fn payload<'a>(&self, file: &'a [u8]) -> &'a [u8] {
        let (off, len) = self.payload_span;
        &file[off as usize..(off + len) as usize]
    }
}

fn ser_byte(f: Format) -> u8 {
    match f {
        Format::Json => SER_JSON,
        Format::Cbor => SER_CBOR,
    }
}

fn write_header(
    out: &mut Vec<u8>,
    kind: ContainerKind,
    mtype: ManifestType,
    serialization: Format,
    body: &[u8],
) {
    match kind {
        ContainerKind::Text => {
            out.extend_from_slice(b"#%VAMP-Version: 1\n");
            out.extend_from_slice(format!("#%VAMP-ManifestType: {}\n", mtype.as_str()).as_bytes());
            out.extend_from_slice(
                format!("#%VAMP-ManifestSerialization: {}\n", serialization.as_str()).as_bytes(),
            );
            match mtype {
                ManifestType::Embedded => {
                    out.extend_from_slice(b"#%VAMP-Manifest: ");
                    out.extend_from_slice(base64_encode(body).as_bytes());
                }
                ManifestType::Detached => {
                    out.extend_from_slice(b"#%VAMP-ManifestLocator: ");
                    out.extend_from_slice(body);
                }
            }
            out.extend_from_slice(b"\n#%VAMP-End\n");
        }
        ContainerKind::Binary => {
            out.extend_from_slice(BINARY_MAGIC);
            out.push(CONTAINER_VERSION);
            out.push(match mtype {
                ManifestType::Embedded => TYPE_EMBEDDED,
                ManifestType::Detached => TYPE_DETACHED,
            });
            out.push(ser_byte(serialization));
            out.extend_from_slice(&(body.len() as u32).to_be_bytes());
            out.extend_from_slice(body);
        }
    }
}

/// Wraps `payload` with a header carrying `envelope`, after checking that
/// every binding set in the manifest matches the payload.
pub fn embed_manifest(
    payload: &[u8],
    envelope: &SignedManifest,
    kind: ContainerKind,
) -> Result<Vec<u8>, ContainerError> {
    let env_bytes = envelope.to_bytes();
    if env_bytes.len() > MAX_ENVELOPE_LEN {
        return Err(ContainerError::OversizeManifest(env_bytes.len()));
    }
    let manifest = envelope
        .manifest_unverified()
        .map_err(|e| ContainerError::BindingMismatch(format!("unreadable manifest: {e}")))?;
    let mut failing = Vec::new();
    for set in &manifest.bindings {
        let report = verify_binding(payload, set).map_err(|e| match e {
            crate::binding::BindingError::Io(e) => ContainerError::Io(e),
            other => ContainerError::BindingMismatch(other.to_string()),
        })?;
        if !report.passed {
            failing.push(set.name.clone());
        }
    }
    if !failing.is_empty() {
        return Err(ContainerError::BindingMismatch(format!(
            "binding sets failed: {}",
            failing.join(", ")
        )));
    }
    let mut out = Vec::with_capacity(env_bytes.len() * 4 / 3 + payload.len() + 128);
    write_header(&mut out, kind, ManifestType::Embedded, envelope.serialization, &env_bytes);
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn write_detached_stub(
    payload: &[u8],
    locator: &str,
    serialization: Format,
    kind: ContainerKind,
) -> Result<Vec<u8>, ContainerError> {
    if locator.is_empty() || locator.contains(['\n', '\r']) || locator.len() > MAX_ENVELOPE_LEN {
        return Err(ContainerError::InvalidLocator);
    }
    let mut out = Vec::with_capacity(locator.len() + payload.len() + 128);
    write_header(&mut out, kind, ManifestType::Detached, serialization, locator.as_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn extract(file: &[u8]) -> Result<ContainerHeader, ContainerError> {
    extract_from(Cursor::new(file), file.len() as u64)
}

pub fn extract_path(path: &Path) -> Result<ContainerHeader, ContainerError> {
    let f = File::open(path)?;
    let len = f.metadata()?.len();
    extract_from(BufReader::new(f), len)
}

/// Reads only the header from `r`, whose total length is `file_len`.
pub fn extract_from<R: BufRead>(mut r: R, file_len: u64) -> Result<ContainerHeader, ContainerError> {
    let mut sniffed = Vec::with_capacity(TEXT_PREFIX.len());
    (&mut r).take(TEXT_PREFIX.len() as u64).read_to_end(&mut sniffed)?;
    let r = Cursor::new(sniffed.clone()).chain(r);
    if sniffed.starts_with(TEXT_PREFIX) {
        read_text_header(r, file_len)
    } else if sniffed.starts_with(BINARY_MAGIC) {
        read_binary_header(r, file_len)
    } else {
        Ok(ContainerHeader {
            kind: None,
            manifest: None,
            payload_span: (0, file_len),
        })
    }
}

fn read_line<R: BufRead>(r: &mut R, consumed: &mut u64) -> Result<String, ContainerError> {
    let limit = (MAX_ENVELOPE_LEN as u64 / 3 + 1) * 4 + 64;
    let mut buf = Vec::new();
    r.take(limit).read_until(b'\n', &mut buf)?;
    if buf.last() != Some(&b'\n') {
        return Err(corrupt("truncated header line"));
    }
    *consumed += buf.len() as u64;
    buf.pop();
    String::from_utf8(buf).map_err(|_| corrupt("header line is not UTF-8"))
}

fn header_field<'a>(line: &'a str, name: &str) -> Result<&'a str, ContainerError> {
    line.strip_prefix("#%VAMP-")
        .and_then(|rest| rest.strip_prefix(name))
        .and_then(|rest| rest.strip_prefix(": "))
        .ok_or_else(|| corrupt(format!("expected {name} line")))
}

fn read_text_header<R: BufRead>(mut r: R, file_len: u64) -> Result<ContainerHeader, ContainerError> {
    let mut used = 0u64;
    let version = read_line(&mut r, &mut used)?;
    if header_field(&version, "Version")? != "1" {
        return Err(corrupt(format!("unsupported version line {version:?}")));
    }
    let mtype = match header_field(&read_line(&mut r, &mut used)?, "ManifestType")? {
        "Embedded" => ManifestType::Embedded,
        "Detached" => ManifestType::Detached,
        other => return Err(corrupt(format!("unknown manifest type {other:?}"))),
    };
    let ser_line = read_line(&mut r, &mut used)?;
    let ser_text = header_field(&ser_line, "ManifestSerialization")?;
    let serialization = match ser_text {
        "JSON" => Format::Json,
        "CBOR" => Format::Cbor,
        other => return Err(corrupt(format!("unknown serialization {other:?}"))),
    };
    let body_line = read_line(&mut r, &mut used)?;
    let manifest = match mtype {
        ManifestType::Embedded => {
            let b64 = header_field(&body_line, "Manifest")?;
            let bytes = base64_decode(b64).ok_or_else(|| corrupt("manifest is not valid Base64"))?;
            embedded(bytes, serialization)?
        }
        ManifestType::Detached => {
            let locator = header_field(&body_line, "ManifestLocator")?;
            if locator.is_empty() {
                return Err(corrupt("empty manifest locator"));
            }
            HeaderManifest::Detached {
                serialization,
                locator: locator.to_owned(),
            }
        }
    };
    if read_line(&mut r, &mut used)? != "#%VAMP-End" {
        return Err(corrupt("missing end line"));
    }
    Ok(ContainerHeader {
        kind: Some(ContainerKind::Text),
        manifest: Some(manifest),
        payload_span: (used, file_len - used),
    })
}

fn read_binary_header<R: Read>(mut r: R, file_len: u64) -> Result<ContainerHeader, ContainerError> {
    let mut fixed = [0u8; 11];
    r.read_exact(&mut fixed)
        .map_err(|_| corrupt("truncated binary header"))?;
    if fixed[4] != CONTAINER_VERSION {
        return Err(corrupt(format!("unsupported version {}", fixed[4])));
    }
    let serialization = match fixed[6] {
        SER_JSON => Format::Json,
        SER_CBOR => Format::Cbor,
        b => return Err(corrupt(format!("unknown serialization byte {b:#04x}"))),
    };
    let len = u32::from_be_bytes(fixed[7..11].try_into().unwrap()) as usize;
    if len > MAX_ENVELOPE_LEN {
        return Err(ContainerError::OversizeManifest(len));
    }
    if 11 + len as u64 > file_len {
        return Err(corrupt("manifest length runs past end of file"));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)
        .map_err(|_| corrupt("truncated manifest field"))?;
    let manifest = match fixed[5] {
        TYPE_EMBEDDED => embedded(body, serialization)?,
        TYPE_DETACHED => {
            let locator = String::from_utf8(body).map_err(|_| corrupt("locator is not UTF-8"))?;
            if locator.is_empty() {
                return Err(corrupt("empty manifest locator"));
            }
            HeaderManifest::Detached {
                serialization,
                locator,
            }
        }
        b => return Err(corrupt(format!("unknown manifest type byte {b:#04x}"))),
    };
    let used = 11 + len as u64;
    Ok(ContainerHeader {
        kind: Some(ContainerKind::Binary),
        manifest: Some(manifest),
        payload_span: (used, file_len - used),
    })
}

fn embedded(bytes: Vec<u8>, serialization: Format) -> Result<HeaderManifest, ContainerError> {
    if bytes.len() > MAX_ENVELOPE_LEN {
        return Err(ContainerError::OversizeManifest(bytes.len()));
    }
    let envelope = SignedManifest::from_bytes(&bytes)
        .map_err(|e| corrupt(format!("embedded envelope: {e}")))?;
    if envelope.serialization != serialization {
        return Err(corrupt(format!(
            "header declares {serialization} but the envelope is {}",
            envelope.serialization
        )));
    }
    Ok(HeaderManifest::Embedded {
        envelope,
        envelope_bytes: bytes,
    })
}

/// `data/training.csv` becomes `data/training.csv.man`.
pub fn detached_manifest_path(object_path: &Path) -> PathBuf {
    let mut s: OsString = object_path.as_os_str().to_owned();
    s.push(SIDECAR_SUFFIX);
    PathBuf::from(s)
}

/// Opens `path` positioned at the payload region.
pub fn open_payload(path: &Path, header: &ContainerHeader) -> io::Result<io::Take<BufReader<File>>> {
    let mut f = File::open(path)?;
    let (off, len) = header.payload_span;
    f.seek(SeekFrom::Start(off))?;
    Ok(BufReader::new(f).take(len))
}

/// Cloud lookups needed for manifest resolution.
pub trait ManifestRegistry {
    /// Envelope bytes behind a stub locator, or `None` if unknown.
    fn fetch_locator(&self, locator: &str) -> Result<Option<Vec<u8>>, String>;
    /// Envelope bytes of every published manifest whose static binding has
    /// this digest, oldest first.
    fn find_by_content(&self, digest: &Digest) -> Result<Vec<Vec<u8>>, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestSource {
    Embedded,
    DetachedLocal,
    DetachedCloud,
}

impl ManifestSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ManifestSource::Embedded => "embedded",
            ManifestSource::DetachedLocal => "detached-local",
            ManifestSource::DetachedCloud => "detached-cloud",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub envelope: SignedManifest,
    pub envelope_bytes: Vec<u8>,
    pub source: ManifestSource,
    pub header: ContainerHeader,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ResolveError {
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("no manifest found for {0}")]
    ManifestNotFound(PathBuf),
    #[error("local and registry copies of the manifest for {0} differ")]
    DivergentCopies(PathBuf),
    #[error("malformed envelope in {source_name}: {error}")]
    MalformedEnvelope {
        source_name: String,
        error: CryptoError,
    },
    #[error("registry lookup failed: {0}")]
    Registry(String),
}

impl From<io::Error> for ResolveError {
    fn from(e: io::Error) -> Self {
        ResolveError::Container(ContainerError::Io(e))
    }
}

/// Finds the manifest for the object at `path`: embedded header first,
/// then the `.man` sidecar, then the registry.
pub fn resolve_manifest(
    path: &Path,
    registry: Option<&dyn ManifestRegistry>,
) -> Result<Resolved, ResolveError> {
    let header = extract_path(path)?;
    let sidecar = detached_manifest_path(path);
    let mut warnings = Vec::new();

    if let Some(HeaderManifest::Embedded {
        envelope,
        envelope_bytes,
    }) = &header.manifest
    {
        if sidecar.exists() {
            warnings.push(format!(
                "ignoring sidecar {} because the file has an embedded manifest",
                sidecar.display()
            ));
        }
        return Ok(Resolved {
            envelope: envelope.clone(),
            envelope_bytes: envelope_bytes.clone(),
            source: ManifestSource::Embedded,
            header,
            warnings,
        });
    }

    let local = if sidecar.exists() {
        let bytes = std::fs::read(&sidecar)?;
        let env = SignedManifest::from_bytes(&bytes).map_err(|error| ResolveError::MalformedEnvelope {
            source_name: sidecar.display().to_string(),
            error,
        })?;
        Some((env, bytes))
    } else {
        None
    };

    let cloud = match registry {
        None => None,
        Some(reg) => {
            let lookup = match header.locator() {
                Some(loc) => reg.fetch_locator(loc).map(|o| o.into_iter().collect::<Vec<_>>()),
                None => {
                    let mut payload = open_payload(path, &header)?;
                    let digest = hash_stream(HashAlgorithm::Sha256, &mut payload)?;
                    reg.find_by_content(&digest)
                }
            };
            match lookup {
                Ok(copies) => Some(copies),
                Err(e) if local.is_some() => {
                    warnings.push(format!("registry lookup failed, using local copy: {e}"));
                    None
                }
                Err(e) => return Err(ResolveError::Registry(e)),
            }
        }
    };

    match (local, cloud) {
        (Some((env, bytes)), cloud) => {
            if let Some(copies) = cloud {
                if !copies.is_empty() && !copies.iter().any(|c| *c == bytes) {
                    return Err(ResolveError::DivergentCopies(path.to_path_buf()));
                }
            }
            Ok(Resolved {
                envelope: env,
                envelope_bytes: bytes,
                source: ManifestSource::DetachedLocal,
                header,
                warnings,
            })
        }
        (None, Some(mut copies)) if !copies.is_empty() => {
            if copies.len() > 1 {
                warnings.push(format!(
                    "registry holds {} manifests for this content; using the latest",
                    copies.len()
                ));
            }
            let bytes = copies.pop().unwrap();
            let env = SignedManifest::from_bytes(&bytes).map_err(|error| ResolveError::MalformedEnvelope {
                source_name: "registry".into(),
                error,
            })?;
            Ok(Resolved {
                envelope: env,
                envelope_bytes: bytes,
                source: ManifestSource::DetachedCloud,
                header,
                warnings,
            })
        }
        _ => Err(ResolveError::ManifestNotFound(path.to_path_buf())),
    }
}
