//! Hashing, signing keys, the certificate trust model and the signed
//! manifest envelope.

mod cert;
mod envelope;
mod hash;
mod keys;

pub use cert::{issue_certificate, verify_chain, Certificate, Issuer, TrustStore, Validity, MAX_CHAIN_LEN};
pub use envelope::{sign_manifest, verify_signed_manifest, SignedManifest};
pub use hash::{hash_stream, Digest, HashAlgorithm, Hasher};
pub use keys::{generate_keypair, PrivateKey, PublicKey, SignatureAlgorithm};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("certificate chain ends in untrusted root {0:?}")]
    UntrustedRoot(String),
    #[error("certificate {0:?} is outside its validity period")]
    Expired(String),
    #[error("bad signature: {0}")]
    BadSignature(String),
    #[error("certificate chain of length {0} exceeds the maximum of {MAX_CHAIN_LEN}")]
    ChainTooLong(usize),
    #[error("certificate chain is empty")]
    EmptyChain,
    #[error("signing key does not match the chain's leaf certificate")]
    KeyMismatch,
    #[error("issuer certificate {0:?} is not valid at issuance time")]
    ExpiredIssuer(String),
    #[error("issuer key does not match the issuer certificate")]
    InvalidIssuerKey,
    #[error("validity period must have notBefore < notAfter")]
    InvalidValidity,
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("io: {0}")]
    Io(String),
}
