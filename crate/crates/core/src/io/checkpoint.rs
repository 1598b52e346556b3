//! Binary checkpoint container.
//!
//! Layout: 8-byte magic `ARBORCKP`, little-endian `u64` header length, the
//! JSON header, then the tensor payload as little-endian `f32`. The header
//! directory lists every tensor with its shape and byte offset into the
//! payload.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FormatError;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"ARBORCKP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub hyperparameters: serde_json::Value,
    pub vocabularies: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hyperparameters: serde_json::Value,
    pub vocabularies: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn write_to(&self, mut w: impl Write) -> Result<(), FormatError> {
        let mut names = std::collections::HashSet::new();
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut offset = 0usize;
        for t in &self.tensors {
            if !names.insert(t.name.as_str()) {
                return Err(FormatError::Checkpoint(format!("duplicate tensor `{}`", t.name)));
            }
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(FormatError::Checkpoint(format!("tensor `{}` shape/data mismatch", t.name)));
            }
            entries.push(TensorEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
                offset,
            });
            offset += t.data.len() * 4;
        }
        let header = CheckpointHeader {
            format_version: FORMAT_VERSION,
            hyperparameters: self.hyperparameters.clone(),
            vocabularies: self.vocabularies.clone(),
            tensors: entries,
        };
        let json = serde_json::to_vec(&header).map_err(|e| FormatError::Checkpoint(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        let mut payload = Vec::with_capacity(offset);
        for t in &self.tensors {
            for v in &t.data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, FormatError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(FormatError::Checkpoint("not a checkpoint file".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: CheckpointHeader =
            serde_json::from_slice(&json).map_err(|e| FormatError::Checkpoint(e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(FormatError::Version {
                expected: FORMAT_VERSION,
                found: header.format_version,
            });
        }
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        let expected: usize = header
            .tensors
            .iter()
            .map(|t| t.shape.iter().product::<usize>() * 4)
            .sum();
        if payload.len() != expected {
            return Err(FormatError::Checkpoint(format!(
                "payload has {} bytes, directory describes {expected}",
                payload.len()
            )));
        }
        let tensors = header
            .tensors
            .iter()
            .map(|e| {
                let n: usize = e.shape.iter().product();
                let bytes = &payload[e.offset..e.offset + n * 4];
                NamedTensor {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                    data: bytes
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect(),
                }
            })
            .collect();
        Ok(Checkpoint {
            hyperparameters: header.hyperparameters,
            vocabularies: header.vocabularies,
            tensors,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), FormatError> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    ckpt.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, FormatError> {
    let f = std::fs::File::open(path)?;
    Checkpoint::read_from(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            hyperparameters: serde_json::json!({"hidden": 4}),
            vocabularies: serde_json::json!({"words": ["a", "b"]}),
            tensors: vec![
                NamedTensor {
                    name: "w".into(),
                    shape: vec![2, 2],
                    data: vec![1.5, -0.0, f32::MIN_POSITIVE, 3.25e-7],
                },
                NamedTensor {
                    name: "b".into(),
                    shape: vec![3],
                    data: vec![0.1, 0.2, 0.3],
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let ck = sample();
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        for (a, b) in ck.tensors.iter().zip(&back.tensors) {
            let bits_a: Vec<u32> = a.data.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = b.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(back, ck);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let header = CheckpointHeader {
            format_version: 9,
            hyperparameters: serde_json::Value::Null,
            vocabularies: serde_json::Value::Null,
            tensors: Vec::new(),
        };
        let json = serde_json::to_vec(&header).unwrap();
        let mut bad = MAGIC.to_vec();
        bad.extend_from_slice(&(json.len() as u64).to_le_bytes());
        bad.extend_from_slice(&json);
        let err = Checkpoint::read_from(bad.as_slice()).unwrap_err();
        assert!(matches!(err, FormatError::Version { expected: 1, found: 9 }));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(Checkpoint::read_from(buf.as_slice()).is_err());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut ck = sample();
        ck.tensors[1].name = "w".into();
        assert!(ck.write_to(Vec::new()).is_err());
    }
}
