//! Canonical encodings shared by manifests, envelopes, certificates and log
//! structures.
//!
//! Everything that gets hashed or signed goes through [`Value`], a small
//! tree with exactly the shapes our schemas need. Two canonical byte forms
//! are defined over it:
//!
//! * JSON: UTF-8, keys sorted by code point, no insignificant whitespace,
//!   non-negative integers only, minimal string escaping, byte strings as
//!   padded standard Base64 text.
//! * CBOR: definite lengths, shortest-form heads, map keys sorted by the
//!   bytewise order of their encodings, byte strings as major type 2.
//!
//! Decoding is intentionally permissive (duplicate keys collapse, CBOR heads
//! may be over-long); callers detect non-canonical input by re-encoding and
//! comparing bytes.

mod cbor;
mod json;
mod reader;

use std::collections::BTreeMap;
use std::fmt;

pub use reader::{DecodeError, MapReader};

/// Wire format of a serialized structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Format {
    Json,
    Cbor,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Json => "JSON",
            Format::Cbor => "CBOR",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "JSON" => Some(Format::Json),
            "CBOR" => Some(Format::Cbor),
            _ => None,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Null,
    Bool(bool),
    Uint(u64),
    Text(String),
    Bytes(Vec<u8>),
    Array(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    /// Encodes a byte string the way `format` represents binary data.
    pub fn bytes_for(format: Format, bytes: &[u8]) -> Self {
        match format {
            Format::Json => Value::Text(base64_encode(bytes)),
            Format::Cbor => Value::Bytes(bytes.to_vec()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Uint(_) => "integer",
            Value::Text(_) => "text",
            Value::Bytes(_) => "bytes",
            Value::Array(_) => "array",
            Value::Map(_) => "map",
        }
    }
}

/// Builder for map values that keeps call sites terse.
#[derive(Debug, Default)]
pub struct MapBuilder(BTreeMap<String, Value>);

impl MapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(mut self, key: &str, value: Value) -> Self {
        self.0.insert(key.to_owned(), value);
        self
    }

    pub fn put_opt(self, key: &str, value: Option<Value>) -> Self {
        match value {
            Some(v) => self.put(key, v),
            None => self,
        }
    }

    pub fn build(self) -> Value {
        Value::Map(self.0)
    }
}

pub fn encode(value: &Value, format: Format) -> Vec<u8> {
    match format {
        Format::Json => json::encode(value),
        Format::Cbor => cbor::encode(value),
    }
}

pub fn decode(bytes: &[u8], format: Format) -> Result<Value, DecodeError> {
    match format {
        Format::Json => json::decode(bytes),
        Format::Cbor => cbor::decode(bytes),
    }
}

pub fn base64_encode(bytes: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn base64_decode(text: &str) -> Option<Vec<u8>> {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.decode(text).ok()
}
