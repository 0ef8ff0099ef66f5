//! Binary parameter container shared by model checkpoints and frozen backbone weights.
//!
//! Layout (little-endian): magic `CSCKPT1`, role tag (`u8` length + UTF-8), spec
//! digest `u64`, array count `u32`, then per array: name length `u32`, UTF-8 name,
//! rank `u32`, `rank` dims as `u64`, and the values as `f32`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::nn::{Network, Tensor};

pub const MAGIC: &[u8; 7] = b"CSCKPT1";
pub const ROLE_CHECKPOINT: &str = "checkpoint";
pub const ROLE_FROZEN_BACKBONE: &str = "frozen-backbone";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub role: String,
    pub digest: u64,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(self.role.len() as u8);
        out.extend_from_slice(self.role.as_bytes());
        out.extend_from_slice(&self.digest.to_le_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            out.extend_from_slice(&(a.name.len() as u32).to_le_bytes());
            out.extend_from_slice(a.name.as_bytes());
            out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for d in &a.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic".into()));
        }
        let role_len = r.take(1)?[0] as usize;
        let role = r.utf8(role_len)?;
        let digest = r.u64()?;
        let count = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = r.utf8(name_len)?;
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::CorruptCheckpoint(format!("array `{name}` dimensions overflow")))?;
            let raw = r.take(
                n.checked_mul(4)
                    .ok_or_else(|| Error::CorruptCheckpoint("size overflow".into()))?,
            )?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            arrays.push(NamedArray { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint { role, digest, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }

    pub fn expect(&self, role: &str, digest: u64) -> Result<()> {
        if self.role != role {
            return Err(Error::CorruptCheckpoint(format!(
                "expected role `{role}`, found `{}`",
                self.role
            )));
        }
        if self.digest != digest {
            return Err(Error::DigestMismatch {
                expected: digest,
                found: self.digest,
            });
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn utf8(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::CorruptCheckpoint("name is not UTF-8".into()))
    }
}

/// Arrays of `net` (optionally only those whose slot name satisfies `keep`), names prefixed by `prefix`.
pub fn export_arrays(net: &Network<f32>, prefix: &str, keep: impl Fn(&str) -> bool) -> Vec<NamedArray> {
    net.named_arrays()
        .into_iter()
        .filter(|(name, _)| keep(name))
        .map(|(name, t)| NamedArray {
            name: format!("{prefix}{name}"),
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        })
        .collect()
}

/// Overwrites the arrays of `net` selected by `keep` from `ckpt`; every selected array
/// must be present with a matching shape.
pub fn import_arrays(
    net: &mut Network<f32>,
    ckpt: &Checkpoint,
    prefix: &str,
    keep: impl Fn(&str) -> bool,
) -> Result<()> {
    for (name, t) in net.named_arrays_mut() {
        if !keep(&name) {
            continue;
        }
        let full = format!("{prefix}{name}");
        let a = ckpt
            .get(&full)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("missing array `{full}`")))?;
        if a.shape != t.shape() {
            return Err(Error::CorruptCheckpoint(format!(
                "array `{full}` has shape {:?}, model expects {:?}",
                a.shape,
                t.shape()
            )));
        }
        *t = Tensor::from_vec(&a.shape, a.data.clone())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            role: ROLE_CHECKPOINT.into(),
            digest: 0xdead_beef_0123_4567,
            arrays: vec![
                NamedArray {
                    name: "a.kernel".into(),
                    shape: vec![2, 3],
                    data: vec![1.0, -2.5, 3.25, 0.0, f32::MIN_POSITIVE, 7.0],
                },
                NamedArray {
                    name: "scalar".into(),
                    shape: vec![],
                    data: vec![4.0],
                },
            ],
        }
    }

    #[test]
    fn round_trip_and_layout() {
        let c = sample();
        let bytes = c.encode();
        assert_eq!(&bytes[..7], b"CSCKPT1");
        assert_eq!(bytes[7] as usize, "checkpoint".len());
        assert_eq!(Checkpoint::decode(&bytes).unwrap(), c);
    }

    #[test]
    fn truncation_and_trailing_bytes_are_corrupt() {
        let bytes = sample().encode();
        for cut in [3, 20, bytes.len() - 1] {
            assert!(matches!(
                Checkpoint::decode(&bytes[..cut]),
                Err(Error::CorruptCheckpoint(_))
            ));
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(Checkpoint::decode(&extra), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn digest_and_role_checks() {
        let c = sample();
        assert!(c.expect(ROLE_CHECKPOINT, c.digest).is_ok());
        assert!(matches!(
            c.expect(ROLE_CHECKPOINT, 1),
            Err(Error::DigestMismatch { .. })
        ));
        assert!(c.expect(ROLE_FROZEN_BACKBONE, c.digest).is_err());
    }
}
