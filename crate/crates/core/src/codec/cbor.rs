use std::collections::BTreeMap;

use super::{DecodeError, Value};

const MAJOR_UINT: u8 = 0;
const MAJOR_BYTES: u8 = 2;
const MAJOR_TEXT: u8 = 3;
const MAJOR_ARRAY: u8 = 4;
const MAJOR_MAP: u8 = 5;
const MAJOR_SIMPLE: u8 = 7;

const FALSE: u8 = 0xf4;
const TRUE: u8 = 0xf5;
const NULL: u8 = 0xf6;

pub(super) fn encode(value: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    write_value(&mut out, value);
    out
}

fn write_head(out: &mut Vec<u8>, major: u8, n: u64) {
    let m = major << 5;
    if n < 24 {
        out.push(m | n as u8);
    } else if n <= u8::MAX as u64 {
        out.push(m | 24);
        out.push(n as u8);
    } else if n <= u16::MAX as u64 {
        out.push(m | 25);
        out.extend_from_slice(&(n as u16).to_be_bytes());
    } else if n <= u32::MAX as u64 {
        out.push(m | 26);
        out.extend_from_slice(&(n as u32).to_be_bytes());
    } else {
        out.push(m | 27);
        out.extend_from_slice(&n.to_be_bytes());
    }
}

fn write_value(out: &mut Vec<u8>, value: &Value) {
    match value {
        Value::Null => out.push(NULL),
        Value::Bool(false) => out.push(FALSE),
        Value::Bool(true) => out.push(TRUE),
        Value::Uint(n) => write_head(out, MAJOR_UINT, *n),
        Value::Text(s) => {
            write_head(out, MAJOR_TEXT, s.len() as u64);
            out.extend_from_slice(s.as_bytes());
        }
        Value::Bytes(b) => {
            write_head(out, MAJOR_BYTES, b.len() as u64);
            out.extend_from_slice(b);
        }
        Value::Array(items) => {
            write_head(out, MAJOR_ARRAY, items.len() as u64);
            for item in items {
                write_value(out, item);
            }
        }
        Value::Map(map) => {
            // Deterministic order is the bytewise order of the encoded keys,
            // i.e. shorter keys first, then lexicographic.
            let mut entries: Vec<(Vec<u8>, &Value)> = map
                .iter()
                .map(|(k, v)| (encode(&Value::Text(k.clone())), v))
                .collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            write_head(out, MAJOR_MAP, entries.len() as u64);
            for (k, v) in entries {
                out.extend_from_slice(&k);
                write_value(out, v);
            }
        }
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<Value, DecodeError> {
    let mut dec = Decoder { bytes, pos: 0 };
    let v = dec.value(0)?;
    if dec.pos != bytes.len() {
        return Err(DecodeError::malformed("trailing bytes after CBOR item"));
    }
    Ok(v)
}

const MAX_DEPTH: usize = 64;

struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| DecodeError::malformed("truncated CBOR"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn head(&mut self) -> Result<(u8, u8, u64), DecodeError> {
        let b = self.take(1)?[0];
        let major = b >> 5;
        let info = b & 0x1f;
        let arg = match info {
            0..=23 => info as u64,
            24 => self.take(1)?[0] as u64,
            25 => u16::from_be_bytes(self.take(2)?.try_into().unwrap()) as u64,
            26 => u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as u64,
            27 => u64::from_be_bytes(self.take(8)?.try_into().unwrap()),
            31 => return Err(DecodeError::malformed("indefinite-length CBOR items are not allowed")),
            _ => return Err(DecodeError::malformed("reserved CBOR additional info")),
        };
        Ok((major, info, arg))
    }

    fn len(&mut self, n: u64) -> Result<usize, DecodeError> {
        let n = usize::try_from(n).map_err(|_| DecodeError::malformed("CBOR length overflow"))?;
        if n > self.bytes.len() - self.pos {
            return Err(DecodeError::malformed("truncated CBOR"));
        }
        Ok(n)
    }

    fn value(&mut self, depth: usize) -> Result<Value, DecodeError> {
        if depth > MAX_DEPTH {
            return Err(DecodeError::malformed("nesting too deep"));
        }
        let (major, info, arg) = self.head()?;
        Ok(match major {
            MAJOR_UINT => Value::Uint(arg),
            MAJOR_BYTES => {
                let n = self.len(arg)?;
                Value::Bytes(self.take(n)?.to_vec())
            }
            MAJOR_TEXT => {
                let n = self.len(arg)?;
                let raw = self.take(n)?;
                Value::Text(
                    std::str::from_utf8(raw)
                        .map_err(|_| DecodeError::malformed("CBOR text is not UTF-8"))?
                        .to_owned(),
                )
            }
            MAJOR_ARRAY => {
                // every item takes at least one byte
                let n = self.len(arg)?;
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    items.push(self.value(depth + 1)?);
                }
                Value::Array(items)
            }
            MAJOR_MAP => {
                let n = self.len(arg)?;
                let mut map = BTreeMap::new();
                for _ in 0..n {
                    let key = match self.value(depth + 1)? {
                        Value::Text(k) => k,
                        other => {
                            return Err(DecodeError::malformed(format!(
                                "CBOR map key must be text, found {}",
                                other.kind()
                            )))
                        }
                    };
                    let v = self.value(depth + 1)?;
                    map.insert(key, v);
                }
                Value::Map(map)
            }
            MAJOR_SIMPLE if info < 24 => match arg {
                20 => Value::Bool(false),
                21 => Value::Bool(true),
                22 => Value::Null,
                _ => return Err(DecodeError::malformed("unsupported CBOR simple value")),
            },
            1 => return Err(DecodeError::malformed("negative integers are not supported")),
            6 => return Err(DecodeError::malformed("CBOR tags are not supported")),
            _ => return Err(DecodeError::malformed("unsupported CBOR item")),
        })
    }
}
