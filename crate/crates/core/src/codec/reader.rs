use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{base64_decode, Format, Value};

/// Failure to turn bytes or a [`Value`] into a typed structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    /// The bytes are not a well-formed document in the expected format.
    Malformed(String),
    /// The document is well-formed but does not fit the schema.
    Schema { path: String, message: String },
}

impl DecodeError {
    pub fn malformed(msg: impl Into<String>) -> Self {
        DecodeError::Malformed(msg.into())
    }

    pub fn schema(path: &str, msg: impl Into<String>) -> Self {
        DecodeError::Schema {
            path: path.to_owned(),
            message: msg.into(),
        }
    }
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::Malformed(m) => write!(f, "malformed input: {m}"),
            DecodeError::Schema { path, message } => write!(f, "{path}: {message}"),
        }
    }
}

impl std::error::Error for DecodeError {}

/// Typed access to the fields of a decoded map.
///
/// Every field read is recorded; [`MapReader::finish`] rejects keys the
/// schema does not know. `null` is treated as an absent optional field.
pub struct MapReader<'a> {
    map: &'a BTreeMap<String, Value>,
    format: Format,
    path: String,
    seen: BTreeSet<&'static str>,
}

impl<'a> MapReader<'a> {
    pub fn new(value: &'a Value, format: Format, path: &str) -> Result<Self, DecodeError> {
        match value {
            Value::Map(map) => Ok(Self {
                map,
                format,
                path: path.to_owned(),
                seen: BTreeSet::new(),
            }),
            other => Err(DecodeError::schema(
                path,
                format!("expected map, found {}", other.kind()),
            )),
        }
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn field_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_owned()
        } else {
            format!("{}.{}", self.path, key)
        }
    }

    fn wrong_type(&self, key: &str, want: &str, got: &Value) -> DecodeError {
        DecodeError::schema(
            &self.field_path(key),
            format!("expected {want}, found {}", got.kind()),
        )
    }

    pub fn opt(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.insert(key);
        match self.map.get(key) {
            None | Some(Value::Null) => None,
            Some(v) => Some(v),
        }
    }

    pub fn req(&mut self, key: &'static str) -> Result<&'a Value, DecodeError> {
        let path = self.field_path(key);
        self.opt(key)
            .ok_or_else(|| DecodeError::schema(&path, "required field is missing"))
    }

    pub fn opt_text(&mut self, key: &'static str) -> Result<Option<&'a str>, DecodeError> {
        match self.opt(key) {
            None => Ok(None),
            Some(Value::Text(s)) => Ok(Some(s)),
            Some(other) => Err(self.wrong_type(key, "text", other)),
        }
    }

    pub fn text(&mut self, key: &'static str) -> Result<&'a str, DecodeError> {
        let path = self.field_path(key);
        self.opt_text(key)?
            .ok_or_else(|| DecodeError::schema(&path, "required field is missing"))
    }

    pub fn uint(&mut self, key: &'static str) -> Result<u64, DecodeError> {
        match self.req(key)? {
            Value::Uint(n) => Ok(*n),
            other => Err(self.wrong_type(key, "integer", other)),
        }
    }

    pub fn bool(&mut self, key: &'static str) -> Result<bool, DecodeError> {
        match self.req(key)? {
            Value::Bool(b) => Ok(*b),
            other => Err(self.wrong_type(key, "bool", other)),
        }
    }

    pub fn array(&mut self, key: &'static str) -> Result<&'a [Value], DecodeError> {
        match self.req(key)? {
            Value::Array(items) => Ok(items),
            other => Err(self.wrong_type(key, "array", other)),
        }
    }

    /// Byte string: native bytes in CBOR, Base64 text in JSON.
    pub fn bytes(&mut self, key: &'static str) -> Result<Vec<u8>, DecodeError> {
        let v = self.req(key)?;
        let path = self.field_path(key);
        value_bytes(v, self.format, &path)
    }

    pub fn opt_bytes(&mut self, key: &'static str) -> Result<Option<Vec<u8>>, DecodeError> {
        let path = self.field_path(key);
        match self.opt(key) {
            None => Ok(None),
            Some(v) => value_bytes(v, self.format, &path).map(Some),
        }
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if let Some(unknown) = self.map.keys().find(|k| !self.seen.contains(k.as_str())) {
            return Err(DecodeError::schema(&self.field_path(unknown), "unknown field"));
        }
        Ok(())
    }
}

pub(crate) fn value_bytes(v: &Value, format: Format, path: &str) -> Result<Vec<u8>, DecodeError> {
    match (format, v) {
        (Format::Cbor, Value::Bytes(b)) => Ok(b.clone()),
        (Format::Json, Value::Text(s)) => {
            base64_decode(s).ok_or_else(|| DecodeError::schema(path, "invalid Base64"))
        }
        (_, other) => Err(DecodeError::schema(
            path,
            format!("expected byte string, found {}", other.kind()),
        )),
    }
}
