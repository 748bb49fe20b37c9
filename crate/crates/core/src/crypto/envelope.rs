//! Signed manifest envelope.
//!
//! A JSON manifest travels in a canonical-JSON envelope and a CBOR manifest
//! in a deterministic-CBOR envelope, mirroring the JWT / COSE split. The
//! signature covers SHA-256 of the payload bytes.

use chrono::{DateTime, Utc};
use sha2::{Digest as _, Sha256};

use super::{verify_chain, Certificate, CryptoError, PrivateKey, SignatureAlgorithm, TrustStore};
use crate::codec::{self, DecodeError, Format, MapBuilder, MapReader, Value};
use crate::ledger::Receipt;
use crate::manifest::{
    canonical_serialize, compute_manifest_id, parse_manifest, Manifest, ManifestError, ManifestId,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedManifest {
    pub serialization: Format,
    pub payload: Vec<u8>,
    pub signature_algorithm: SignatureAlgorithm,
    pub signature: Vec<u8>,
    /// Leaf first.
    pub cert_chain: Vec<Certificate>,
    pub ledger_receipt: Option<Receipt>,
}

pub fn sign_manifest(
    manifest: &Manifest,
    format: Format,
    key: &PrivateKey,
    cert_chain: &[Certificate],
) -> Result<SignedManifest, CryptoError> {
    let leaf = cert_chain.first().ok_or(CryptoError::EmptyChain)?;
    if leaf.public_key != key.public_key() {
        return Err(CryptoError::KeyMismatch);
    }
    let payload = canonical_serialize(manifest, format)
        .map_err(|e| CryptoError::InvalidManifest(e.to_string()))?;
    let signature = key.sign(&Sha256::digest(&payload));
    Ok(SignedManifest {
        serialization: format,
        payload,
        signature_algorithm: key.algorithm(),
        signature,
        cert_chain: cert_chain.to_vec(),
        ledger_receipt: None,
    })
}

/// Checks the chain, then the payload signature, then parses the payload
/// strictly. Returns the manifest and the signer's subject.
pub fn verify_signed_manifest(
    envelope: &SignedManifest,
    trust: &TrustStore,
    at: DateTime<Utc>,
) -> Result<(Manifest, String), CryptoError> {
    let subject = verify_chain(&envelope.cert_chain, trust, at)?;
    let leaf = &envelope.cert_chain[0];
    if leaf.public_key.algorithm() != envelope.signature_algorithm
        || !leaf
            .public_key
            .verify(&Sha256::digest(&envelope.payload), &envelope.signature)
    {
        return Err(CryptoError::BadSignature(
            "payload signature does not verify under the leaf certificate".into(),
        ));
    }
    let manifest = parse_manifest(&envelope.payload, envelope.serialization)
        .map_err(|e| CryptoError::MalformedPayload(e.to_string()))?;
    Ok((manifest, subject))
}

impl SignedManifest {
    /// Parses the payload without checking the signature.
    pub fn manifest_unverified(&self) -> Result<Manifest, ManifestError> {
        parse_manifest(&self.payload, self.serialization)
    }

    pub fn manifest_id(&self) -> Result<ManifestId, ManifestError> {
        compute_manifest_id(&self.manifest_unverified()?)
    }

    pub fn signer_subject(&self) -> Option<&str> {
        self.cert_chain.first().map(|c| c.subject.as_str())
    }

    pub fn to_value(&self) -> Value {
        let f = self.serialization;
        MapBuilder::new()
            .put(
                "certChain",
                Value::Array(self.cert_chain.iter().map(|c| c.to_value(f)).collect()),
            )
            .put_opt("ledgerReceipt", self.ledger_receipt.as_ref().map(|r| r.to_value(f)))
            .put("payload", Value::bytes_for(f, &self.payload))
            .put("serialization", Value::text(f.as_str()))
            .put("signature", Value::bytes_for(f, &self.signature))
            .put("signatureAlgorithm", Value::text(self.signature_algorithm.as_str()))
            .build()
    }

    /// Envelope bytes in the envelope's own serialization format.
    pub fn to_bytes(&self) -> Vec<u8> {
        codec::encode(&self.to_value(), self.serialization)
    }

    /// Decodes an envelope, detecting JSON (`{`) versus CBOR (a map head).
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let format = match bytes.first() {
            Some(b'{') => Format::Json,
            Some(b) if (0xa0..=0xbb).contains(b) => Format::Cbor,
            _ => return Err(CryptoError::MalformedEnvelope("unrecognized envelope encoding".into())),
        };
        let bad = |e: DecodeError| CryptoError::MalformedEnvelope(e.to_string());
        let value = codec::decode(bytes, format).map_err(bad)?;
        let env = Self::from_value(&value, format).map_err(bad)?;
        if env.to_bytes() != bytes {
            return Err(CryptoError::MalformedEnvelope("envelope is not in canonical form".into()));
        }
        Ok(env)
    }

    fn from_value(v: &Value, format: Format) -> Result<Self, DecodeError> {
        let mut r = MapReader::new(v, format, "")?;
        let chain_path = r.field_path("certChain");
        let cert_chain = r
            .array("certChain")?
            .iter()
            .enumerate()
            .map(|(i, c)| Certificate::from_value(c, format, &format!("{chain_path}[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let receipt_path = r.field_path("ledgerReceipt");
        let ledger_receipt = r
            .opt("ledgerReceipt")
            .map(|v| Receipt::from_value(v, format, &receipt_path))
            .transpose()?;
        let payload = r.bytes("payload")?;
        let ser_text = r.text("serialization")?;
        let serialization = Format::parse(ser_text).ok_or_else(|| {
            DecodeError::schema(&r.field_path("serialization"), format!("unknown format {ser_text:?}"))
        })?;
        if serialization != format {
            return Err(DecodeError::schema(
                &r.field_path("serialization"),
                format!("{serialization} payload in a {format} envelope"),
            ));
        }
        let signature = r.bytes("signature")?;
        let alg_text = r.text("signatureAlgorithm")?;
        let signature_algorithm = alg_text
            .parse()
            .map_err(|e: String| DecodeError::schema(&r.field_path("signatureAlgorithm"), e))?;
        r.finish()?;
        Ok(SignedManifest {
            serialization,
            payload,
            signature_algorithm,
            signature,
            cert_chain,
            ledger_receipt,
        })
    }
}
