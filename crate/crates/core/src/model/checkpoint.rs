//! CHAN checkpoints: model configuration plus named `f32` parameter blocks.
//!
//! ```text
//! magic       4 bytes "CHAN"
//! version     u32     1
//! d_e         u32
//! m           u32
//! n_encoders  u32
//! ffn_mult    u32
//! dropout     f64
//! init_seed   u64
//! blocks      u32
//! per block:
//!   name_len  u16
//!   name      UTF-8
//!   rows      u32
//!   cols      u32
//!   values    rows × cols f32, row-major
//! ```
//!
//! Everything is little-endian. Weights are held as `f64` in memory and
//! rounded to `f32` on save.

use std::io::Write;
use std::path::Path;

use super::{Model, ModelConfig, ModelError, ModelParams};
use crate::numerics::Matrix;

pub const CHAN_MAGIC: &[u8; 4] = b"CHAN";
pub const CHAN_VERSION: u32 = 1;

fn to_u32(v: usize, what: &str) -> Result<u32, ModelError> {
    u32::try_from(v).map_err(|_| ModelError::Config(format!("{what} {v} exceeds u32")))
}

impl Model {
    pub fn to_checkpoint_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let c = &self.config;
        let mut buf = Vec::new();
        buf.extend_from_slice(CHAN_MAGIC);
        buf.extend_from_slice(&CHAN_VERSION.to_le_bytes());
        for (v, what) in [
            (c.dim, "d_e"),
            (c.max_claims, "m"),
            (c.n_encoders, "n_encoders"),
            (c.ffn_mult, "ffn_mult"),
        ] {
            buf.extend_from_slice(&to_u32(v, what)?.to_le_bytes());
        }
        buf.extend_from_slice(&c.dropout.to_le_bytes());
        buf.extend_from_slice(&c.init_seed.to_le_bytes());
        let names = self.params.block_names();
        let blocks = self.params.blocks();
        buf.extend_from_slice(&to_u32(blocks.len(), "block count")?.to_le_bytes());
        for (name, m) in names.iter().zip(blocks) {
            buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&to_u32(m.rows(), "rows")?.to_le_bytes());
            buf.extend_from_slice(&to_u32(m.cols(), "cols")?.to_le_bytes());
            for &v in m.as_slice() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(buf)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < 4 || &bytes[..4] != CHAN_MAGIC {
            return Err(ModelError::NotCheckpoint);
        }
        let mut cur = Cursor { bytes, pos: 4 };
        let version = u32::from_le_bytes(cur.take()?);
        if version != CHAN_VERSION {
            return Err(ModelError::UnsupportedVersion(version));
        }
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = u32::from_le_bytes(cur.take()?) as usize;
        }
        let config = ModelConfig {
            dim: dims[0],
            max_claims: dims[1],
            n_encoders: dims[2],
            ffn_mult: dims[3],
            dropout: f64::from_le_bytes(cur.take()?),
            init_seed: u64::from_le_bytes(cur.take()?),
        };
        config.validate()?;
        let expected_names = ModelParams::zeros(&config).block_names();
        let count = u32::from_le_bytes(cur.take()?) as usize;
        if count != expected_names.len() {
            return Err(ModelError::Config(format!(
                "checkpoint holds {count} blocks, config implies {}",
                expected_names.len()
            )));
        }
        let mut blocks = Vec::with_capacity(count);
        for (index, expected) in expected_names.into_iter().enumerate() {
            let len = u16::from_le_bytes(cur.take()?) as usize;
            let name = String::from_utf8_lossy(cur.slice(len)?).into_owned();
            if name != expected {
                return Err(ModelError::BlockName {
                    index,
                    expected,
                    found: name,
                });
            }
            let rows = u32::from_le_bytes(cur.take()?) as usize;
            let cols = u32::from_le_bytes(cur.take()?) as usize;
            let n = rows
                .checked_mul(cols)
                .and_then(|n| n.checked_mul(4))
                .ok_or(ModelError::Truncated {
                    offset: cur.pos,
                    needed: usize::MAX,
                })?;
            let data: Vec<f64> = cur
                .slice(n)?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            blocks.push(Matrix::from_vec(rows, cols, data)?);
        }
        if cur.pos != bytes.len() {
            return Err(ModelError::TrailingBytes {
                offset: cur.pos,
                trailing: bytes.len() - cur.pos,
            });
        }
        let params = ModelParams::from_blocks(&config, blocks)?;
        Ok(Self { config, params })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn slice(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        match self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()) {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(ModelError::Truncated {
                offset: self.pos,
                needed: n,
            }),
        }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], ModelError> {
        Ok(self.slice(N)?.try_into().expect("slice of length N"))
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &Model) -> Result<(), ModelError> {
    let bytes = model.to_checkpoint_bytes()?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model, ModelError> {
    Model::from_checkpoint_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::ClaimMatrix;
    use crate::model::Mode;

    fn model() -> Model {
        Model::new(ModelConfig {
            dim: 5,
            max_claims: 4,
            n_encoders: 2,
            ffn_mult: 3,
            dropout: 0.25,
            init_seed: 77,
        })
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_f32_weights_bitwise() {
        let mut m = model();
        m.params.round_to_f32();
        let back = Model::from_checkpoint_bytes(&m.to_checkpoint_bytes().unwrap()).unwrap();
        assert_eq!(back, m);
        let claims = ClaimMatrix::from_vectors(&[vec![0.1, 0.2, -0.3, 0.4, 0.0]], 4, 5).unwrap();
        let a = m.forward(&claims, Mode::Eval).unwrap();
        let b = back.forward(&claims, Mode::Eval).unwrap();
        assert_eq!(a.logits[0].to_bits(), b.logits[0].to_bits());
        assert_eq!(a.logits[1].to_bits(), b.logits[1].to_bits());
    }

    #[test]
    fn save_is_idempotent_after_rounding() {
        let m = model();
        let once = m.to_checkpoint_bytes().unwrap();
        let twice = Model::from_checkpoint_bytes(&once)
            .unwrap()
            .to_checkpoint_bytes()
            .unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = model().to_checkpoint_bytes().unwrap();
        assert!(matches!(
            Model::from_checkpoint_bytes(b"CEMB\x01\0\0\0"),
            Err(ModelError::NotCheckpoint)
        ));
        let mut v2 = bytes.clone();
        v2[4] = 9;
        assert!(matches!(
            Model::from_checkpoint_bytes(&v2),
            Err(ModelError::UnsupportedVersion(9))
        ));
        assert!(matches!(
            Model::from_checkpoint_bytes(&bytes[..bytes.len() - 1]),
            Err(ModelError::Truncated { .. })
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            Model::from_checkpoint_bytes(&extra),
            Err(ModelError::TrailingBytes { trailing: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.chan");
        let m = model();
        save_checkpoint(&path, &m).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.config, m.config);
        assert_eq!(back.to_checkpoint_bytes().unwrap(), m.to_checkpoint_bytes().unwrap());
    }
}
