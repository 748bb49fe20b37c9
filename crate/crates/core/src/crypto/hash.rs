use std::fmt;
use std::io::{self, Read};
use std::str::FromStr;

use sha2::{Digest as _, Sha256, Sha512};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum HashAlgorithm {
    #[default]
    Sha256,
    Sha512,
}

impl HashAlgorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            HashAlgorithm::Sha256 => "sha2-256",
            HashAlgorithm::Sha512 => "sha2-512",
        }
    }

    pub fn output_len(self) -> usize {
        match self {
            HashAlgorithm::Sha256 => 32,
            HashAlgorithm::Sha512 => 64,
        }
    }

    pub fn hasher(self) -> Hasher {
        match self {
            HashAlgorithm::Sha256 => Hasher::Sha256(Sha256::new()),
            HashAlgorithm::Sha512 => Hasher::Sha512(Sha512::new()),
        }
    }

    pub fn digest(self, data: &[u8]) -> Digest {
        let mut h = self.hasher();
        h.update(data);
        h.finish()
    }
}

impl fmt::Display for HashAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HashAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sha2-256" => Ok(HashAlgorithm::Sha256),
            "sha2-512" => Ok(HashAlgorithm::Sha512),
            other => Err(format!("unknown hash algorithm {other:?}")),
        }
    }
}

/// Incremental SHA-2 state.
#[derive(Clone)]
pub enum Hasher {
    Sha256(Sha256),
    Sha512(Sha512),
}

impl Hasher {
    pub fn update(&mut self, data: &[u8]) {
        match self {
            Hasher::Sha256(h) => h.update(data),
            Hasher::Sha512(h) => h.update(data),
        }
    }

    pub fn finish(self) -> Digest {
        match self {
            Hasher::Sha256(h) => Digest {
                algorithm: HashAlgorithm::Sha256,
                value: h.finalize().to_vec(),
            },
            Hasher::Sha512(h) => Digest {
                algorithm: HashAlgorithm::Sha512,
                value: h.finalize().to_vec(),
            },
        }
    }
}

/// A SHA-2 digest with its algorithm; text form is `alg:hex`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest {
    algorithm: HashAlgorithm,
    value: Vec<u8>,
}

impl Digest {
    pub fn new(algorithm: HashAlgorithm, value: Vec<u8>) -> Result<Self, String> {
        if value.len() != algorithm.output_len() {
            return Err(format!(
                "{algorithm} digest must be {} bytes, got {}",
                algorithm.output_len(),
                value.len()
            ));
        }
        Ok(Self { algorithm, value })
    }

    pub fn algorithm(&self) -> HashAlgorithm {
        self.algorithm
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.value
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.value)
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.algorithm, self.to_hex())
    }
}

impl FromStr for Digest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (alg, hex_part) = s
            .split_once(':')
            .ok_or_else(|| format!("digest {s:?} lacks an algorithm prefix"))?;
        let algorithm: HashAlgorithm = alg.parse()?;
        if hex_part.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err("digest hex must be lowercase".into());
        }
        let value = hex::decode(hex_part).map_err(|e| format!("bad digest hex: {e}"))?;
        Digest::new(algorithm, value)
    }
}

/// Hashes everything `reader` yields until EOF.
pub fn hash_stream<R: Read>(algorithm: HashAlgorithm, mut reader: R) -> io::Result<Digest> {
    let mut hasher = algorithm.hasher();
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => hasher.update(&buf[..n]),
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(hasher.finish())
}
