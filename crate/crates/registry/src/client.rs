//! Blocking HTTP client for the registry.

use std::time::Duration;

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde::de::DeserializeOwned;
use vamp_core::codec::base64_encode;
use vamp_core::container::ManifestRegistry;
use vamp_core::crypto::{Digest, PublicKey, SignedManifest};
use vamp_core::ledger::{Receipt, SignedTreeHead};
use vamp_core::manifest::ManifestId;

use crate::wire::{receipt_from_json, ErrorDoc, PublishRequest, RecordDoc, RecordList, RemoteRecord};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("network: {0}")]
    Network(String),
    #[error("registry returned {status} {error}: {message}")]
    Status {
        status: u16,
        error: String,
        message: String,
    },
    #[error("unexpected response: {0}")]
    Protocol(String),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegistryClient {
    base: String,
    agent: ureq::Agent,
}

pub struct PublishOutcome {
    pub record: RemoteRecord,
    pub created: bool,
}

fn segment(s: &str) -> String {
    utf8_percent_encode(s, NON_ALPHANUMERIC).to_string()
}

impl RegistryClient {
    pub fn new(base_url: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        RegistryClient {
            base: base_url.trim_end_matches('/').to_owned(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    /// The URL a detached stub should carry for `id`.
    pub fn manifest_url(&self, id: &ManifestId) -> String {
        format!("{}/v1/manifests/{}", self.base, segment(id.as_str()))
    }

    fn finish<T: DeserializeOwned>(
        resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<(u16, T), ClientError> {
        let mut resp = resp.map_err(|e| ClientError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            let doc: Option<ErrorDoc> = serde_json::from_slice(&body).ok();
            return Err(ClientError::Status {
                status,
                error: doc.as_ref().map(|d| d.error.clone()).unwrap_or_default(),
                message: doc
                    .map(|d| d.message)
                    .unwrap_or_else(|| String::from_utf8_lossy(&body).into_owned()),
            });
        }
        let value = serde_json::from_slice(&body).map_err(|e| ClientError::Protocol(e.to_string()))?;
        Ok((status, value))
    }

    fn get<T: DeserializeOwned>(&self, url: &str) -> Result<T, ClientError> {
        Self::finish(self.agent.get(url).call()).map(|(_, v)| v)
    }

    fn get_bytes(&self, path: &str) -> Result<Vec<u8>, ClientError> {
        let v: serde_json::Value = self.get(&format!("{}{path}", self.base))?;
        Ok(serde_json::to_vec(&v).expect("serializable"))
    }

    pub fn publish(&self, envelope: &[u8]) -> Result<PublishOutcome, ClientError> {
        let req = PublishRequest {
            envelope: base64_encode(envelope),
        };
        let (status, doc): (u16, RecordDoc) =
            Self::finish(self.agent.post(format!("{}/v1/manifests", self.base)).send_json(&req))?;
        Ok(PublishOutcome {
            record: doc.try_into().map_err(ClientError::Protocol)?,
            created: status == 201,
        })
    }

    fn record_at(&self, url: &str) -> Result<Option<RemoteRecord>, ClientError> {
        match self.get::<RecordDoc>(url) {
            Ok(doc) => {
                let r: RemoteRecord = doc.try_into().map_err(ClientError::Protocol)?;
                check_self_certifying(&r)?;
                Ok(Some(r))
            }
            Err(ClientError::Status { status: 404, .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Fetches a record and checks that its envelope hashes to `id`.
    pub fn fetch(&self, id: &ManifestId) -> Result<Option<RemoteRecord>, ClientError> {
        let r = self.record_at(&self.manifest_url(id))?;
        if let Some(r) = &r {
            if r.manifest_id != *id {
                return Err(ClientError::Protocol(format!("asked for {id}, got {}", r.manifest_id)));
            }
        }
        Ok(r)
    }

    fn list(&self, url: &str) -> Result<Vec<RemoteRecord>, ClientError> {
        let list: RecordList = self.get(url)?;
        list.records
            .into_iter()
            .map(|d| {
                let r: RemoteRecord = d.try_into().map_err(ClientError::Protocol)?;
                check_self_certifying(&r)?;
                Ok(r)
            })
            .collect()
    }

    pub fn by_object(&self, object_id: &str) -> Result<Vec<RemoteRecord>, ClientError> {
        self.list(&format!("{}/v1/objects/{}/manifests", self.base, segment(object_id)))
    }

    pub fn by_content(&self, digest: &Digest) -> Result<Vec<RemoteRecord>, ClientError> {
        self.list(&format!(
            "{}/v1/content/{}/manifests",
            self.base,
            segment(&digest.to_string())
        ))
    }

    pub fn head(&self) -> Result<SignedTreeHead, ClientError> {
        SignedTreeHead::from_json_bytes(&self.get_bytes("/v1/log/head")?)
            .map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub fn log_key(&self) -> Result<PublicKey, ClientError> {
        PublicKey::from_json_bytes(&self.get_bytes("/v1/log/key")?)
            .map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub fn proof(&self, sequence: u64, tree_size: u64) -> Result<Receipt, ClientError> {
        let v: serde_json::Value = self.get(&format!(
            "{}/v1/log/proof?seq={sequence}&size={tree_size}",
            self.base
        ))?;
        receipt_from_json(&v).map_err(ClientError::Protocol)
    }

    pub fn consistency(&self, old_size: u64, new_size: u64) -> Result<Vec<Digest>, ClientError> {
        #[derive(serde::Deserialize)]
        struct Doc {
            proof: Vec<String>,
        }
        let doc: Doc = self.get(&format!(
            "{}/v1/log/consistency?old={old_size}&new={new_size}",
            self.base
        ))?;
        doc.proof
            .iter()
            .map(|s| s.parse().map_err(ClientError::Protocol))
            .collect()
    }
}

fn check_self_certifying(r: &RemoteRecord) -> Result<(), ClientError> {
    let id = SignedManifest::from_bytes(&r.envelope)
        .map_err(|e| ClientError::Protocol(e.to_string()))?
        .manifest_id()
        .map_err(|e| ClientError::Protocol(e.to_string()))?;
    if id != r.manifest_id {
        return Err(ClientError::Protocol(format!(
            "envelope hashes to {id}, not {}",
            r.manifest_id
        )));
    }
    Ok(())
}

impl ManifestRegistry for RegistryClient {
    fn fetch_locator(&self, locator: &str) -> Result<Option<Vec<u8>>, String> {
        let record = if locator.starts_with("http://") || locator.starts_with("https://") {
            self.record_at(locator)
        } else if let Ok(id) = locator.parse::<ManifestId>() {
            self.fetch(&id)
        } else {
            return Err(format!("unsupported manifest locator {locator:?}"));
        };
        record.map(|r| r.map(|r| r.envelope)).map_err(|e| e.to_string())
    }

    fn find_by_content(&self, digest: &Digest) -> Result<Vec<Vec<u8>>, String> {
        self.by_content(digest)
            .map(|rs| rs.into_iter().map(|r| r.envelope).collect())
            .map_err(|e| e.to_string())
    }
}
