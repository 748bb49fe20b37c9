use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer as _, Verifier as _};
use rand::rngs::OsRng;

use super::CryptoError;
use crate::codec::{self, Format, MapBuilder, MapReader, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SignatureAlgorithm {
    #[default]
    Ed25519,
    EcdsaP256,
}

impl SignatureAlgorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            SignatureAlgorithm::Ed25519 => "ed25519",
            SignatureAlgorithm::EcdsaP256 => "ecdsa-p256",
        }
    }
}

impl fmt::Display for SignatureAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignatureAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ed25519" => Ok(SignatureAlgorithm::Ed25519),
            "ecdsa-p256" => Ok(SignatureAlgorithm::EcdsaP256),
            other => Err(format!("unknown signature algorithm {other:?}")),
        }
    }
}

/// Secret signing key. Never serialized except through [`PrivateKey::to_keystore_bytes`].
#[derive(Clone)]
pub enum PrivateKey {
    Ed25519(ed25519_dalek::SigningKey),
    EcdsaP256(p256::ecdsa::SigningKey),
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrivateKey({}, public={})", self.algorithm(), self.public_key())
    }
}

/// Creates a fresh random keypair; the public half is [`PrivateKey::public_key`].
pub fn generate_keypair(algorithm: SignatureAlgorithm) -> PrivateKey {
    match algorithm {
        SignatureAlgorithm::Ed25519 => {
            PrivateKey::Ed25519(ed25519_dalek::SigningKey::generate(&mut OsRng))
        }
        SignatureAlgorithm::EcdsaP256 => {
            PrivateKey::EcdsaP256(p256::ecdsa::SigningKey::random(&mut OsRng))
        }
    }
}

impl PrivateKey {
    /// Rebuilds a key from its 32-byte secret scalar/seed.
    pub fn from_secret_bytes(
        algorithm: SignatureAlgorithm,
        secret: &[u8],
    ) -> Result<Self, CryptoError> {
        match algorithm {
            SignatureAlgorithm::Ed25519 => {
                let seed: [u8; 32] = secret
                    .try_into()
                    .map_err(|_| CryptoError::InvalidKey("ed25519 secret must be 32 bytes".into()))?;
                Ok(PrivateKey::Ed25519(ed25519_dalek::SigningKey::from_bytes(&seed)))
            }
            SignatureAlgorithm::EcdsaP256 => p256::ecdsa::SigningKey::from_slice(secret)
                .map(PrivateKey::EcdsaP256)
                .map_err(|e| CryptoError::InvalidKey(format!("p256 secret: {e}"))),
        }
    }

    pub fn algorithm(&self) -> SignatureAlgorithm {
        match self {
            PrivateKey::Ed25519(_) => SignatureAlgorithm::Ed25519,
            PrivateKey::EcdsaP256(_) => SignatureAlgorithm::EcdsaP256,
        }
    }

    pub fn public_key(&self) -> PublicKey {
        let bytes = match self {
            PrivateKey::Ed25519(k) => k.verifying_key().to_bytes().to_vec(),
            PrivateKey::EcdsaP256(k) => k
                .verifying_key()
                .to_encoded_point(true)
                .as_bytes()
                .to_vec(),
        };
        PublicKey {
            algorithm: self.algorithm(),
            bytes,
        }
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        match self {
            PrivateKey::Ed25519(k) => k.sign(message).to_bytes().to_vec(),
            PrivateKey::EcdsaP256(k) => {
                let sig: p256::ecdsa::Signature = k.sign(message);
                sig.to_bytes().to_vec()
            }
        }
    }

    fn secret_bytes(&self) -> Vec<u8> {
        match self {
            PrivateKey::Ed25519(k) => k.to_bytes().to_vec(),
            PrivateKey::EcdsaP256(k) => k.to_bytes().to_vec(),
        }
    }

    /// Keystore file contents: canonical JSON with the algorithm and the
    /// Base64 secret.
    pub fn to_keystore_bytes(&self) -> Vec<u8> {
        let v = MapBuilder::new()
            .put("algorithm", Value::text(self.algorithm().as_str()))
            .put("privateKey", Value::bytes_for(Format::Json, &self.secret_bytes()))
            .build();
        codec::encode(&v, Format::Json)
    }

    pub fn from_keystore_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let bad = |e: codec::DecodeError| CryptoError::InvalidKey(e.to_string());
        let v = codec::decode(bytes, Format::Json).map_err(bad)?;
        let mut r = MapReader::new(&v, Format::Json, "").map_err(bad)?;
        let algorithm: SignatureAlgorithm = r
            .text("algorithm")
            .map_err(bad)?
            .parse()
            .map_err(CryptoError::InvalidKey)?;
        let secret = r.bytes("privateKey").map_err(bad)?;
        r.finish().map_err(bad)?;
        Self::from_secret_bytes(algorithm, &secret)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PublicKey {
    algorithm: SignatureAlgorithm,
    bytes: Vec<u8>,
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.algorithm, hex::encode(&self.bytes))
    }
}

impl PublicKey {
    pub fn from_bytes(algorithm: SignatureAlgorithm, bytes: Vec<u8>) -> Result<Self, CryptoError> {
        let ok = match algorithm {
            SignatureAlgorithm::Ed25519 => <[u8; 32]>::try_from(bytes.as_slice())
                .ok()
                .and_then(|b| ed25519_dalek::VerifyingKey::from_bytes(&b).ok())
                .is_some(),
            SignatureAlgorithm::EcdsaP256 => {
                p256::ecdsa::VerifyingKey::from_sec1_bytes(&bytes).is_ok()
            }
        };
        if !ok {
            return Err(CryptoError::InvalidKey(format!("not a valid {algorithm} public key")));
        }
        Ok(Self { algorithm, bytes })
    }

    pub fn algorithm(&self) -> SignatureAlgorithm {
        self.algorithm
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        match self.algorithm {
            SignatureAlgorithm::Ed25519 => {
                let Ok(key_bytes) = <[u8; 32]>::try_from(self.bytes.as_slice()) else {
                    return false;
                };
                let Ok(key) = ed25519_dalek::VerifyingKey::from_bytes(&key_bytes) else {
                    return false;
                };
                let Ok(sig) = ed25519_dalek::Signature::from_slice(signature) else {
                    return false;
                };
                key.verify(message, &sig).is_ok()
            }
            SignatureAlgorithm::EcdsaP256 => {
                let Ok(key) = p256::ecdsa::VerifyingKey::from_sec1_bytes(&self.bytes) else {
                    return false;
                };
                let Ok(sig) = p256::ecdsa::Signature::from_slice(signature) else {
                    return false;
                };
                key.verify(message, &sig).is_ok()
            }
        }
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let v = MapBuilder::new()
            .put("algorithm", Value::text(self.algorithm.as_str()))
            .put("publicKey", Value::bytes_for(Format::Json, &self.bytes))
            .build();
        codec::encode(&v, Format::Json)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let bad = |e: codec::DecodeError| CryptoError::InvalidKey(e.to_string());
        let v = codec::decode(bytes, Format::Json).map_err(bad)?;
        let mut r = MapReader::new(&v, Format::Json, "").map_err(bad)?;
        let algorithm: SignatureAlgorithm = r
            .text("algorithm")
            .map_err(bad)?
            .parse()
            .map_err(CryptoError::InvalidKey)?;
        let key = r.bytes("publicKey").map_err(bad)?;
        r.finish().map_err(bad)?;
        Self::from_bytes(algorithm, key)
    }
}
