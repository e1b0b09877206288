//! CEMB: binary interchange format for precomputed claim embeddings.
//!
//! Little-endian layout:
//!
//! ```text
//! magic        4 bytes  "CEMB"
//! version      u32      1
//! d_e          u32
//! records      u64
//! per record:
//!   id_len     u16
//!   id         id_len bytes, UTF-8
//!   claims     u16
//!   vectors    claims × d_e f32, row-major
//! ```

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::{ClaimMatrix, EmbedError};

pub const CEMB_MAGIC: &[u8; 4] = b"CEMB";
pub const CEMB_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CembEntry {
    pub patent_id: String,
    /// One `d_e`-vector per claim.
    pub claims: Vec<Vec<f32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CembFile {
    pub dim: usize,
    pub entries: Vec<CembEntry>,
}

impl CembFile {
    pub fn new(dim: usize, entries: Vec<CembEntry>) -> Result<Self, EmbedError> {
        let file = Self { dim, entries };
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> Result<(), EmbedError> {
        if self.dim == 0 || self.dim > u32::MAX as usize {
            return Err(EmbedError::InvalidArgument(format!(
                "d_e {} out of range",
                self.dim
            )));
        }
        for e in &self.entries {
            if e.patent_id.len() > u16::MAX as usize {
                return Err(EmbedError::InvalidArgument(format!(
                    "patent id of {} bytes exceeds the u16 length field",
                    e.patent_id.len()
                )));
            }
            if e.claims.len() > u16::MAX as usize {
                return Err(EmbedError::InvalidArgument(format!(
                    "patent {} has {} claims, more than a u16 count",
                    e.patent_id,
                    e.claims.len()
                )));
            }
            if let Some(v) = e.claims.iter().find(|v| v.len() != self.dim) {
                return Err(EmbedError::DimensionMismatch {
                    expected: self.dim,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }

    pub fn index(&self) -> HashMap<&str, &CembEntry> {
        self.entries
            .iter()
            .map(|e| (e.patent_id.as_str(), e))
            .collect()
    }

    pub fn get(&self, patent_id: &str) -> Option<&CembEntry> {
        self.entries.iter().find(|e| e.patent_id == patent_id)
    }

    /// Claim matrix for one stored patent, checked against the model's `d_e`.
    pub fn claim_matrix(
        entry: &CembEntry,
        dim: usize,
        expected_dim: usize,
        max_claims: usize,
    ) -> Result<ClaimMatrix, EmbedError> {
        if dim != expected_dim {
            return Err(EmbedError::DimensionMismatch {
                expected: expected_dim,
                found: dim,
            });
        }
        let vectors: Vec<Vec<f64>> = entry
            .claims
            .iter()
            .map(|v| v.iter().map(|&x| x as f64).collect())
            .collect();
        ClaimMatrix::from_vectors(&vectors, max_claims, dim)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, EmbedError> {
        self.validate()?;
        let mut buf = Vec::new();
        buf.extend_from_slice(CEMB_MAGIC);
        buf.extend_from_slice(&CEMB_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for e in &self.entries {
            buf.extend_from_slice(&(e.patent_id.len() as u16).to_le_bytes());
            buf.extend_from_slice(e.patent_id.as_bytes());
            buf.extend_from_slice(&(e.claims.len() as u16).to_le_bytes());
            for v in &e.claims {
                for x in v {
                    buf.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbedError> {
        let mut cur = Cursor { bytes, pos: 0 };
        if bytes.len() < 4 || &bytes[..4] != CEMB_MAGIC {
            return Err(EmbedError::NotCemb);
        }
        cur.pos = 4;
        let version = u32::from_le_bytes(cur.take()?);
        if version != CEMB_VERSION {
            return Err(EmbedError::UnsupportedVersion(version));
        }
        let dim = u32::from_le_bytes(cur.take()?) as usize;
        if dim == 0 {
            return Err(EmbedError::InvalidArgument("d_e of 0 in CEMB header".into()));
        }
        let count = u64::from_le_bytes(cur.take()?);
        let mut entries = Vec::new();
        for _ in 0..count {
            let id_len = u16::from_le_bytes(cur.take()?) as usize;
            let at = cur.pos;
            let id = std::str::from_utf8(cur.slice(id_len)?)
                .map_err(|_| {
                    EmbedError::InvalidArgument(format!("patent id at byte offset {at} is not UTF-8"))
                })?
                .to_string();
            let claims = u16::from_le_bytes(cur.take()?) as usize;
            let raw = cur.slice(claims * dim * 4)?;
            let vectors = raw
                .chunks_exact(dim * 4)
                .map(|row| {
                    row.chunks_exact(4)
                        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                        .collect()
                })
                .collect();
            entries.push(CembEntry {
                patent_id: id,
                claims: vectors,
            });
        }
        if cur.pos != bytes.len() {
            return Err(EmbedError::TrailingBytes {
                offset: cur.pos,
                trailing: bytes.len() - cur.pos,
            });
        }
        Ok(Self { dim, entries })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn slice(&mut self, n: usize) -> Result<&'a [u8], EmbedError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(EmbedError::Truncated {
                offset: self.pos,
                needed: n,
            }),
        }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], EmbedError> {
        let s = self.slice(N)?;
        Ok(s.try_into().expect("slice of length N"))
    }
}

pub fn write_embeddings(path: impl AsRef<Path>, file: &CembFile) -> Result<(), EmbedError> {
    let bytes = file.to_bytes()?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<CembFile, EmbedError> {
    CembFile::from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> CembFile {
        CembFile::new(
            3,
            vec![
                CembEntry {
                    patent_id: "6010682".into(),
                    claims: vec![vec![0.5, -1.0, f32::MIN_POSITIVE], vec![1e-30, 2.0, -0.0]],
                },
                CembEntry {
                    patent_id: "é-7".into(),
                    claims: vec![],
                },
                CembEntry {
                    patent_id: "7635568".into(),
                    claims: vec![vec![3.25, 4.0, 5.5]],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"CEMB");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[3, 0, 0, 0]);
        assert_eq!(&bytes[12..20], &[3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[20..22], &[7, 0]);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let f = sample();
        let back = CembFile::from_bytes(&f.to_bytes().unwrap()).unwrap();
        assert_eq!(back.entries.len(), 3);
        for (a, b) in f.entries.iter().zip(&back.entries) {
            assert_eq!(a.patent_id, b.patent_id);
            let bits = |e: &CembEntry| -> Vec<u32> { e.claims.concat().iter().map(|x| x.to_bits()).collect() };
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] = b'X';
        assert_eq!(CembFile::from_bytes(&bytes).unwrap_err().to_string(), "not a CEMB file");
    }

    #[test]
    fn wrong_version() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[4] = 2;
        assert!(matches!(
            CembFile::from_bytes(&bytes),
            Err(EmbedError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn missing_row_is_truncation_with_offset() {
        let f = CembFile::new(
            2,
            vec![CembEntry {
                patent_id: "p".into(),
                claims: vec![vec![1.0, 2.0]; 5],
            }],
        )
        .unwrap();
        let bytes = f.to_bytes().unwrap();
        let cut = &bytes[..bytes.len() - 8];
        match CembFile::from_bytes(cut) {
            Err(EmbedError::Truncated { offset, needed }) => {
                // header 20 + id_len 2 + id 1 + count 2
                assert_eq!(offset, 25);
                assert_eq!(needed, 40);
            }
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_on_model_read() {
        let f = sample();
        let err = CembFile::claim_matrix(&f.entries[0], f.dim, 8, 4).unwrap_err();
        assert!(matches!(err, EmbedError::DimensionMismatch { expected: 8, found: 3 }));
        let m = CembFile::claim_matrix(&f.entries[0], f.dim, 3, 4).unwrap();
        assert_eq!(m.active(), 2);
    }

    proptest! {
        #[test]
        fn arbitrary_files_round_trip(
            dim in 1usize..5,
            raw in proptest::collection::vec((any::<String>(), proptest::collection::vec(any::<u32>(), 0..12)), 0..6)
        ) {
            let entries: Vec<CembEntry> = raw.into_iter().map(|(id, bits)| {
                let n = bits.len() / dim;
                CembEntry {
                    patent_id: id,
                    claims: (0..n).map(|i| bits[i * dim..(i + 1) * dim].iter().map(|&b| f32::from_bits(b)).collect()).collect(),
                }
            }).collect();
            let f = CembFile::new(dim, entries).unwrap();
            let bytes = f.to_bytes().unwrap();
            let back = CembFile::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }
}
