//! Manifest data model, canonical serialization and identity.
//!
//! A manifest's identity is `sha2-256:<hex>` of its canonical JSON bytes,
//! whatever format it is stored in.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::binding::BindingSet;
use crate::codec::{self, DecodeError, Format, MapBuilder, MapReader, Value};
use crate::crypto::HashAlgorithm;
use crate::timestamp::parse_utc;

pub const SCHEMA_VERSION: u64 = 1;
pub const MAX_OBJECT_ID_LEN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectType {
    Dataset,
    Code,
    Package,
    Container,
    Model,
    Media,
    Other,
}

impl ObjectType {
    pub const ALL: [ObjectType; 7] = [
        ObjectType::Dataset,
        ObjectType::Code,
        ObjectType::Package,
        ObjectType::Container,
        ObjectType::Model,
        ObjectType::Media,
        ObjectType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectType::Dataset => "dataset",
            ObjectType::Code => "code",
            ObjectType::Package => "package",
            ObjectType::Container => "container",
            ObjectType::Model => "model",
            ObjectType::Media => "media",
            ObjectType::Other => "other",
        }
    }
}

impl fmt::Display for ObjectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown object type {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FacsimileRelation {
    SplitOf,
    Rebinding,
    Subsample,
    Oversample,
    SameContent,
    Other,
}

impl FacsimileRelation {
    pub const ALL: [FacsimileRelation; 6] = [
        FacsimileRelation::SplitOf,
        FacsimileRelation::Rebinding,
        FacsimileRelation::Subsample,
        FacsimileRelation::Oversample,
        FacsimileRelation::SameContent,
        FacsimileRelation::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FacsimileRelation::SplitOf => "split-of",
            FacsimileRelation::Rebinding => "rebinding",
            FacsimileRelation::Subsample => "subsample",
            FacsimileRelation::Oversample => "oversample",
            FacsimileRelation::SameContent => "same-content",
            FacsimileRelation::Other => "other",
        }
    }
}

impl fmt::Display for FacsimileRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FacsimileRelation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown facsimile relation {s:?}"))
    }
}

/// Self-certifying manifest identifier: `sha2-256:` + 64 lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ManifestId(String);

impl ManifestId {
    const PREFIX: &'static str = "sha2-256:";

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn from_digest_bytes(bytes: &[u8]) -> Self {
        ManifestId(format!("{}{}", Self::PREFIX, hex::encode(bytes)))
    }
}

impl fmt::Display for ManifestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ManifestId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex_part = s
            .strip_prefix(Self::PREFIX)
            .ok_or_else(|| format!("manifest id {s:?} must start with {}", Self::PREFIX))?;
        if hex_part.len() != 64
            || !hex_part
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        {
            return Err(format!("manifest id {s:?} must carry 64 lowercase hex digits"));
        }
        Ok(ManifestId(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacsimileRef {
    pub manifest_id: ManifestId,
    pub relation: FacsimileRelation,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub schema_version: u64,
    pub object_id: String,
    pub object_type: ObjectType,
    pub master_copy_locator: Option<String>,
    pub encoding_information: String,
    pub copyright: Option<String>,
    /// RFC 3339 UTC, seconds precision, `Z` suffix.
    pub created_at: String,
    pub origin_manifest_ids: Vec<ManifestId>,
    pub transformation: Option<String>,
    pub facsimiles: Vec<FacsimileRef>,
    pub bindings: Vec<BindingSet>,
}

impl Manifest {
    /// A manifest with the required fields set and everything else empty.
    pub fn new(
        object_id: impl Into<String>,
        object_type: ObjectType,
        encoding_information: impl Into<String>,
        created_at: impl Into<String>,
        bindings: Vec<BindingSet>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            object_id: object_id.into(),
            object_type,
            master_copy_locator: None,
            encoding_information: encoding_information.into(),
            copyright: None,
            created_at: created_at.into(),
            origin_manifest_ids: Vec::new(),
            transformation: None,
            facsimiles: Vec::new(),
            bindings,
        }
    }

    pub fn binding(&self, name: &str) -> Option<&BindingSet> {
        self.bindings.iter().find(|b| b.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IssueKind {
    UnsupportedSchemaVersion(u64),
    EmptyObjectId,
    ObjectIdTooLong(usize),
    InvalidCreatedAt,
    NoBindings,
    DuplicateBindingName(String),
    DuplicateOrigin(ManifestId),
    SelfReference,
    InvalidBinding(String),
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IssueKind::UnsupportedSchemaVersion(v) => write!(f, "unsupported schema version {v}"),
            IssueKind::EmptyObjectId => f.write_str("empty object id"),
            IssueKind::ObjectIdTooLong(n) => {
                write!(f, "object id is {n} bytes, limit {MAX_OBJECT_ID_LEN}")
            }
            IssueKind::InvalidCreatedAt => f.write_str("createdAt is not an RFC 3339 UTC timestamp"),
            IssueKind::NoBindings => f.write_str("no binding sets"),
            IssueKind::DuplicateBindingName(n) => write!(f, "duplicate binding name {n:?}"),
            IssueKind::DuplicateOrigin(id) => write!(f, "duplicate origin {id}"),
            IssueKind::SelfReference => f.write_str("self-reference"),
            IssueKind::InvalidBinding(m) => write!(f, "invalid binding: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub path: String,
    pub kind: IssueKind,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, pred: impl Fn(&IssueKind) -> bool) -> bool {
        self.issues.iter().any(|i| pred(&i.kind))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ManifestError {
    #[error("invalid manifest: {0}")]
    InvalidManifest(ValidationReport),
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("input is not in canonical form")]
    NonCanonical,
}

impl From<DecodeError> for ManifestError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::Malformed(m) => ManifestError::MalformedInput(m),
            DecodeError::Schema { path, message } => ManifestError::SchemaViolation { path, message },
        }
    }
}

pub fn validate_manifest(manifest: &Manifest) -> ValidationReport {
    let own_id = id_of_unchecked(manifest);
    collect_issues(manifest, &own_id)
}

fn collect_issues(m: &Manifest, own_id: &ManifestId) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |path: String, kind: IssueKind| issues.push(ValidationIssue { path, kind });
    if m.schema_version != SCHEMA_VERSION {
        push("schemaVersion".into(), IssueKind::UnsupportedSchemaVersion(m.schema_version));
    }
    if m.object_id.is_empty() {
        push("objectId".into(), IssueKind::EmptyObjectId);
    } else if m.object_id.len() > MAX_OBJECT_ID_LEN {
        push("objectId".into(), IssueKind::ObjectIdTooLong(m.object_id.len()));
    }
    if parse_utc(&m.created_at).is_none() {
        push("createdAt".into(), IssueKind::InvalidCreatedAt);
    }
    if m.bindings.is_empty() {
        push("bindings".into(), IssueKind::NoBindings);
    }
    let mut names = BTreeSet::new();
    for (i, b) in m.bindings.iter().enumerate() {
        if !names.insert(b.name.as_str()) {
            push(format!("bindings[{i}].name"), IssueKind::DuplicateBindingName(b.name.clone()));
        }
        for problem in b.structural_issues() {
            push(format!("bindings[{i}]"), IssueKind::InvalidBinding(problem));
        }
    }
    let mut origins = BTreeSet::new();
    for (i, id) in m.origin_manifest_ids.iter().enumerate() {
        if id == own_id {
            push(format!("originManifestIds[{i}]"), IssueKind::SelfReference);
        }
        if !origins.insert(id) {
            push(format!("originManifestIds[{i}]"), IssueKind::DuplicateOrigin(id.clone()));
        }
    }
    ValidationReport { issues }
}

impl Manifest {
    pub fn to_value(&self, format: Format) -> Value {
        MapBuilder::new()
            .put(
                "bindings",
                Value::Array(self.bindings.iter().map(|b| b.to_value(format)).collect()),
            )
            .put_opt("copyright", self.copyright.as_deref().map(Value::text))
            .put("createdAt", Value::text(&self.created_at))
            .put("encodingInformation", Value::text(&self.encoding_information))
            .put(
                "facsimiles",
                Value::Array(
                    self.facsimiles
                        .iter()
                        .map(|f| {
                            MapBuilder::new()
                                .put("manifestId", Value::text(f.manifest_id.as_str()))
                                .put_opt("note", f.note.as_deref().map(Value::text))
                                .put("relation", Value::text(f.relation.as_str()))
                                .build()
                        })
                        .collect(),
                ),
            )
            .put_opt(
                "masterCopyLocator",
                self.master_copy_locator.as_deref().map(Value::text),
            )
            .put("objectId", Value::text(&self.object_id))
            .put("objectType", Value::text(self.object_type.as_str()))
            .put(
                "originManifestIds",
                Value::Array(
                    self.origin_manifest_ids
                        .iter()
                        .map(|id| Value::text(id.as_str()))
                        .collect(),
                ),
            )
            .put("schemaVersion", Value::Uint(self.schema_version))
            .put_opt("transformation", self.transformation.as_deref().map(Value::text))
            .build()
    }

    pub fn from_value(v: &Value, format: Format) -> Result<Self, DecodeError> {
        let mut r = MapReader::new(v, format, "")?;
        let bindings_path = r.field_path("bindings");
        let bindings = r
            .array("bindings")?
            .iter()
            .enumerate()
            .map(|(i, b)| BindingSet::from_value(b, format, &format!("{bindings_path}[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let copyright = r.opt_text("copyright")?.map(str::to_owned);
        let created_at = r.text("createdAt")?.to_owned();
        let encoding_information = r.text("encodingInformation")?.to_owned();
        let fac_path = r.field_path("facsimiles");
        let facsimiles = r
            .array("facsimiles")?
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let mut fr = MapReader::new(f, format, &format!("{fac_path}[{i}]"))?;
                let id_text = fr.text("manifestId")?;
                let manifest_id = parse_field(&fr, "manifestId", id_text)?;
                let note = fr.opt_text("note")?.map(str::to_owned);
                let relation_text = fr.text("relation")?;
                let relation = parse_field(&fr, "relation", relation_text)?;
                fr.finish()?;
                Ok(FacsimileRef {
                    manifest_id,
                    relation,
                    note,
                })
            })
            .collect::<Result<Vec<_>, DecodeError>>()?;
        let master_copy_locator = r.opt_text("masterCopyLocator")?.map(str::to_owned);
        let object_id = r.text("objectId")?.to_owned();
        let object_type_text = r.text("objectType")?;
        let object_type = parse_field(&r, "objectType", object_type_text)?;
        let origin_path = r.field_path("originManifestIds");
        let origin_manifest_ids = r
            .array("originManifestIds")?
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::Text(s) => s
                    .parse()
                    .map_err(|e: String| DecodeError::schema(&format!("{origin_path}[{i}]"), e)),
                other => Err(DecodeError::schema(
                    &format!("{origin_path}[{i}]"),
                    format!("expected text, found {}", other.kind()),
                )),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let schema_version = r.uint("schemaVersion")?;
        let transformation = r.opt_text("transformation")?.map(str::to_owned);
        r.finish()?;
        if bindings.is_empty() {
            return Err(DecodeError::schema(&bindings_path, "at least one binding set is required"));
        }
        Ok(Manifest {
            schema_version,
            object_id,
            object_type,
            master_copy_locator,
            encoding_information,
            copyright,
            created_at,
            origin_manifest_ids,
            transformation,
            facsimiles,
            bindings,
        })
    }
}

fn parse_field<T: FromStr<Err = String>>(
    r: &MapReader<'_>,
    key: &str,
    text: &str,
) -> Result<T, DecodeError> {
    text.parse().map_err(|e| DecodeError::schema(&r.field_path(key), e))
}

fn id_of_unchecked(m: &Manifest) -> ManifestId {
    let bytes = codec::encode(&m.to_value(Format::Json), Format::Json);
    ManifestId::from_digest_bytes(HashAlgorithm::Sha256.digest(&bytes).as_bytes())
}

/// Deterministic bytes for a valid manifest.
pub fn canonical_serialize(manifest: &Manifest, format: Format) -> Result<Vec<u8>, ManifestError> {
    let report = validate_manifest(manifest);
    if !report.is_valid() {
        return Err(ManifestError::InvalidManifest(report));
    }
    Ok(codec::encode(&manifest.to_value(format), format))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Reject anything that is not byte-identical to the canonical form.
    Strict,
    /// Accept non-canonical input and flag it.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub manifest: Manifest,
    pub canonical: bool,
}

/// Parses in strict mode.
pub fn parse_manifest(bytes: &[u8], format: Format) -> Result<Manifest, ManifestError> {
    parse_manifest_with(bytes, format, ParseMode::Strict).map(|p| p.manifest)
}

pub fn parse_manifest_with(
    bytes: &[u8],
    format: Format,
    mode: ParseMode,
) -> Result<Parsed, ManifestError> {
    let value = codec::decode(bytes, format)?;
    let manifest = Manifest::from_value(&value, format)?;
    let canonical = codec::encode(&manifest.to_value(format), format) == bytes;
    if !canonical && mode == ParseMode::Strict {
        return Err(ManifestError::NonCanonical);
    }
    Ok(Parsed { manifest, canonical })
}

/// `sha2-256:` + hex SHA-256 of the canonical JSON form, for either storage
/// format.
pub fn compute_manifest_id(manifest: &Manifest) -> Result<ManifestId, ManifestError> {
    let bytes = canonical_serialize(manifest, Format::Json)?;
    Ok(ManifestId::from_digest_bytes(
        HashAlgorithm::Sha256.digest(&bytes).as_bytes(),
    ))
}
