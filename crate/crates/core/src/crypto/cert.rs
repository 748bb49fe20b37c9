//! Minimal certificate model: a canonical-JSON document naming a subject and
//! its public key, signed by an issuer. Stands in for X.509 without ASN.1.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use sha2::{Digest as _, Sha256};

use super::{CryptoError, PrivateKey, PublicKey, SignatureAlgorithm};
use crate::codec::{self, DecodeError, Format, MapBuilder, MapReader, Value};
use crate::timestamp::{format_utc, parse_utc};

pub const MAX_CHAIN_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validity {
    pub not_before: DateTime<Utc>,
    pub not_after: DateTime<Utc>,
}

impl Validity {
    pub fn new(not_before: DateTime<Utc>, not_after: DateTime<Utc>) -> Self {
        Self {
            not_before,
            not_after,
        }
    }

    /// `days` days starting at `start`.
    pub fn days_from(start: DateTime<Utc>, days: i64) -> Self {
        Self::new(start, start + chrono::Duration::days(days))
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.not_before <= t && t <= self.not_after
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject: String,
    pub issuer: String,
    pub public_key: PublicKey,
    pub validity: Validity,
    pub self_signed: bool,
    pub signature_algorithm: SignatureAlgorithm,
    pub signature: Vec<u8>,
}

/// Who signs a new certificate.
pub enum Issuer<'a> {
    SelfSigned(&'a PrivateKey),
    Certificate {
        key: &'a PrivateKey,
        cert: &'a Certificate,
    },
}

/// Issues a certificate for `subject` at time `at`.
pub fn issue_certificate(
    subject: &str,
    subject_key: &PublicKey,
    validity: Validity,
    issuer: Issuer<'_>,
    at: DateTime<Utc>,
) -> Result<Certificate, CryptoError> {
    if validity.not_before >= validity.not_after {
        return Err(CryptoError::InvalidValidity);
    }
    let (signing_key, issuer_name, self_signed) = match issuer {
        Issuer::SelfSigned(key) => {
            if key.public_key() != *subject_key {
                return Err(CryptoError::InvalidIssuerKey);
            }
            (key, subject.to_owned(), true)
        }
        Issuer::Certificate { key, cert } => {
            if key.public_key() != cert.public_key {
                return Err(CryptoError::InvalidIssuerKey);
            }
            if !cert.validity.contains(at) {
                return Err(CryptoError::ExpiredIssuer(cert.subject.clone()));
            }
            (key, cert.subject.clone(), false)
        }
    };
    let mut cert = Certificate {
        subject: subject.to_owned(),
        issuer: issuer_name,
        public_key: subject_key.clone(),
        validity: Validity::new(
            truncate(validity.not_before),
            truncate(validity.not_after),
        ),
        self_signed,
        signature_algorithm: signing_key.algorithm(),
        signature: Vec::new(),
    };
    cert.signature = signing_key.sign(&Sha256::digest(cert.unsigned_bytes()));
    Ok(cert)
}

fn truncate(t: DateTime<Utc>) -> DateTime<Utc> {
    parse_utc(&format_utc(t)).expect("formatted timestamp parses")
}

impl Certificate {
    fn to_value_inner(&self, format: Format, with_signature: bool) -> Value {
        let b = MapBuilder::new()
            .put("issuer", Value::text(&self.issuer))
            .put("notAfter", Value::text(format_utc(self.validity.not_after)))
            .put("notBefore", Value::text(format_utc(self.validity.not_before)))
            .put("publicKey", Value::bytes_for(format, self.public_key.as_bytes()))
            .put(
                "publicKeyAlgorithm",
                Value::text(self.public_key.algorithm().as_str()),
            )
            .put("selfSigned", Value::Bool(self.self_signed))
            .put(
                "signatureAlgorithm",
                Value::text(self.signature_algorithm.as_str()),
            )
            .put("subject", Value::text(&self.subject));
        if with_signature {
            b.put("signature", Value::bytes_for(format, &self.signature)).build()
        } else {
            b.build()
        }
    }

    pub fn to_value(&self, format: Format) -> Value {
        self.to_value_inner(format, true)
    }

    /// The bytes covered by the issuer's signature: canonical JSON of every
    /// field except `signature`.
    pub fn unsigned_bytes(&self) -> Vec<u8> {
        codec::encode(&self.to_value_inner(Format::Json, false), Format::Json)
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        codec::encode(&self.to_value(Format::Json), Format::Json)
    }

    pub fn from_value(v: &Value, format: Format, path: &str) -> Result<Self, DecodeError> {
        let mut r = MapReader::new(v, format, path)?;
        let issuer = r.text("issuer")?.to_owned();
        let not_after = timestamp_field(&mut r, "notAfter")?;
        let not_before = timestamp_field(&mut r, "notBefore")?;
        let key_bytes = r.bytes("publicKey")?;
        let key_alg: SignatureAlgorithm = r
            .text("publicKeyAlgorithm")?
            .parse()
            .map_err(|e: String| DecodeError::schema(&r.field_path("publicKeyAlgorithm"), e))?;
        let public_key = PublicKey::from_bytes(key_alg, key_bytes)
            .map_err(|e| DecodeError::schema(&r.field_path("publicKey"), e.to_string()))?;
        let self_signed = r.bool("selfSigned")?;
        let signature_algorithm: SignatureAlgorithm = r
            .text("signatureAlgorithm")?
            .parse()
            .map_err(|e: String| DecodeError::schema(&r.field_path("signatureAlgorithm"), e))?;
        let signature = r.bytes("signature")?;
        let subject = r.text("subject")?.to_owned();
        r.finish()?;
        Ok(Certificate {
            subject,
            issuer,
            public_key,
            validity: Validity::new(not_before, not_after),
            self_signed,
            signature_algorithm,
            signature,
        })
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let v = codec::decode(bytes, Format::Json)
            .map_err(|e| CryptoError::MalformedCertificate(e.to_string()))?;
        let cert = Self::from_value(&v, Format::Json, "")
            .map_err(|e| CryptoError::MalformedCertificate(e.to_string()))?;
        Ok(cert)
    }

    /// Whether `issuer_key` produced this certificate's signature.
    pub fn signed_by(&self, issuer_key: &PublicKey) -> bool {
        issuer_key.algorithm() == self.signature_algorithm
            && issuer_key.verify(&Sha256::digest(self.unsigned_bytes()), &self.signature)
    }
}

fn timestamp_field(r: &mut MapReader<'_>, key: &'static str) -> Result<DateTime<Utc>, DecodeError> {
    let s = r.text(key)?;
    parse_utc(s).ok_or_else(|| DecodeError::schema(&r.field_path(key), "invalid timestamp"))
}

/// Set of trust anchors. Membership is bitwise equality of certificates.
#[derive(Debug, Clone, Default)]
pub struct TrustStore {
    roots: Vec<Certificate>,
}

impl TrustStore {
    pub fn new(roots: impl IntoIterator<Item = Certificate>) -> Self {
        let mut store = Self::default();
        for r in roots {
            store.add(r);
        }
        store
    }

    pub fn add(&mut self, cert: Certificate) {
        if !self.contains(&cert) {
            self.roots.push(cert);
        }
    }

    pub fn remove(&mut self, cert: &Certificate) {
        self.roots.retain(|c| c != cert);
    }

    pub fn contains(&self, cert: &Certificate) -> bool {
        self.roots.iter().any(|c| c == cert)
    }

    pub fn roots(&self) -> &[Certificate] {
        &self.roots
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Loads every `*.cert` / `*.json` file in `dir` as a root certificate.
    pub fn load_dir(dir: &Path) -> Result<Self, CryptoError> {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .map_err(|e| CryptoError::Io(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.is_file()
                    && matches!(
                        p.extension().and_then(|x| x.to_str()),
                        Some("cert") | Some("json")
                    )
            })
            .collect();
        entries.sort();
        let mut store = Self::default();
        for path in entries {
            let bytes =
                fs::read(&path).map_err(|e| CryptoError::Io(format!("{}: {e}", path.display())))?;
            let cert = Certificate::from_json_bytes(&bytes).map_err(|e| {
                CryptoError::MalformedCertificate(format!("{}: {e}", path.display()))
            })?;
            store.add(cert);
        }
        Ok(store)
    }
}

/// Validates `chain` (leaf first) against `trust` at time `at` and returns
/// the leaf subject.
pub fn verify_chain(
    chain: &[Certificate],
    trust: &TrustStore,
    at: DateTime<Utc>,
) -> Result<String, CryptoError> {
    let leaf = chain.first().ok_or(CryptoError::EmptyChain)?;
    if chain.len() > MAX_CHAIN_LEN {
        return Err(CryptoError::ChainTooLong(chain.len()));
    }
    let anchor = chain.last().expect("non-empty");
    if !trust.contains(anchor) {
        return Err(CryptoError::UntrustedRoot(anchor.subject.clone()));
    }
    for cert in chain {
        if !cert.validity.contains(at) {
            return Err(CryptoError::Expired(cert.subject.clone()));
        }
    }
    for pair in chain.windows(2) {
        let (child, parent) = (&pair[0], &pair[1]);
        if child.issuer != parent.subject || !child.signed_by(&parent.public_key) {
            return Err(CryptoError::BadSignature(format!(
                "certificate {:?} is not signed by {:?}",
                child.subject, parent.subject
            )));
        }
    }
    if anchor.self_signed
        && (anchor.issuer != anchor.subject || !anchor.signed_by(&anchor.public_key))
    {
        return Err(CryptoError::BadSignature(format!(
            "root {:?} self-signature does not verify",
            anchor.subject
        )));
    }
    Ok(leaf.subject.clone())
}
