//! JSON documents exchanged over HTTP.

use serde::{Deserialize, Serialize};
use vamp_core::codec::{base64_decode, base64_encode};
use vamp_core::ledger::Receipt;
use vamp_core::manifest::ManifestId;

use crate::store::Record;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PublishRequest {
    /// Base64 envelope bytes.
    pub envelope: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RecordDoc {
    pub manifest_id: String,
    pub object_id: String,
    pub envelope: String,
    pub receipt: serde_json::Value,
    pub published_at: String,
    pub sequence: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordList {
    pub records: Vec<RecordDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorDoc {
    pub error: String,
    pub message: String,
}

pub fn receipt_to_json(r: &Receipt) -> serde_json::Value {
    serde_json::from_slice(&r.to_json_bytes()).expect("canonical JSON parses")
}

pub fn receipt_from_json(v: &serde_json::Value) -> Result<Receipt, String> {
    let bytes = serde_json::to_vec(v).map_err(|e| e.to_string())?;
    Receipt::from_json_bytes(&bytes).map_err(|e| e.to_string())
}

impl From<&Record> for RecordDoc {
    fn from(r: &Record) -> Self {
        RecordDoc {
            manifest_id: r.manifest_id.to_string(),
            object_id: r.object_id.clone(),
            envelope: base64_encode(&r.envelope),
            receipt: receipt_to_json(&r.receipt),
            published_at: r.published_at.clone(),
            sequence: r.sequence,
        }
    }
}

/// A record as received by a client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteRecord {
    pub manifest_id: ManifestId,
    pub object_id: String,
    pub envelope: Vec<u8>,
    pub receipt: Receipt,
    pub published_at: String,
    pub sequence: u64,
}

impl TryFrom<RecordDoc> for RemoteRecord {
    type Error = String;

    fn try_from(d: RecordDoc) -> Result<Self, String> {
        Ok(RemoteRecord {
            manifest_id: d.manifest_id.parse()?,
            object_id: d.object_id,
            envelope: base64_decode(&d.envelope).ok_or("envelope is not valid Base64")?,
            receipt: receipt_from_json(&d.receipt)?,
            published_at: d.published_at,
            sequence: d.sequence,
        })
    }
}
