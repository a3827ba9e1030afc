//! Binary field snapshots: little-endian header followed by row-major f64
//! payloads.

use std::io::{Read, Write};

use nsul_core::evolve::SolverState;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"NSUL";
pub const VERSION: u32 = 1;
const TAG_LEN: usize = 8;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("bad magic {0:?}")]
    Magic([u8; 4]),
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("field tag {0:?} longer than 8 bytes or not ASCII")]
    Tag(String),
    #[error("payload has {actual} bytes, header implies {expected}")]
    Length { expected: usize, actual: usize },
    #[error("field {name} has {len} values, grid has {expected}")]
    FieldSize { name: String, len: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub version: u32,
    pub n1: u32,
    pub n2: u32,
    pub l1: f64,
    pub l2: f64,
    pub t: f64,
    pub names: Vec<String>,
}

impl SnapshotHeader {
    pub fn byte_len(&self) -> usize {
        4 + 4 + 4 + 4 + 8 * 3 + 1 + TAG_LEN * self.names.len()
    }

    pub fn payload_len(&self) -> usize {
        self.names.len() * self.n1 as usize * self.n2 as usize * 8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub fields: Vec<Vec<f64>>,
}

impl Snapshot {
    /// Velocity components and vorticity of a state.
    pub fn from_state(s: &SolverState) -> Self {
        let g = s.u.grid;
        Self {
            header: SnapshotHeader {
                version: VERSION,
                n1: g.n1 as u32,
                n2: g.n2 as u32,
                l1: g.l1,
                l2: g.l2,
                t: s.t,
                names: vec!["u1".into(), "u2".into(), "omega".into()],
            },
            fields: vec![s.u.u1.values.clone(), s.u.u2.values.clone(), s.omega.values.clone()],
        }
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.header.names.iter().position(|n| n == name).map(|i| self.fields[i].as_slice())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, SnapshotError> {
        let h = &self.header;
        let cells = h.n1 as usize * h.n2 as usize;
        let mut out = Vec::with_capacity(h.byte_len() + h.payload_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&h.version.to_le_bytes());
        out.extend_from_slice(&h.n1.to_le_bytes());
        out.extend_from_slice(&h.n2.to_le_bytes());
        for v in [h.l1, h.l2, h.t] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let count = u8::try_from(h.names.len()).map_err(|_| SnapshotError::Tag("too many fields".into()))?;
        out.push(count);
        for name in &h.names {
            if name.len() > TAG_LEN || !name.is_ascii() {
                return Err(SnapshotError::Tag(name.clone()));
            }
            let mut tag = [b' '; TAG_LEN];
            tag[..name.len()].copy_from_slice(name.as_bytes());
            out.extend_from_slice(&tag);
        }
        for (name, f) in h.names.iter().zip(&self.fields) {
            if f.len() != cells {
                return Err(SnapshotError::FieldSize { name: name.clone(), len: f.len(), expected: cells });
            }
            for v in f {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SnapshotError::Magic(magic));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(SnapshotError::Version(version));
        }
        let n1 = read_u32(&mut r)?;
        let n2 = read_u32(&mut r)?;
        let (l1, l2, t) = (read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
        let mut count = [0u8; 1];
        r.read_exact(&mut count)?;
        let mut names = Vec::with_capacity(count[0] as usize);
        for _ in 0..count[0] {
            let mut tag = [0u8; TAG_LEN];
            r.read_exact(&mut tag)?;
            let name = String::from_utf8_lossy(&tag).trim_end_matches(' ').to_string();
            names.push(name);
        }
        let header = SnapshotHeader { version, n1, n2, l1, l2, t, names };
        let expected = header.payload_len();
        if r.len() != expected {
            return Err(SnapshotError::Length { expected, actual: r.len() });
        }
        let cells = n1 as usize * n2 as usize;
        let fields = r
            .chunks_exact(cells * 8)
            .map(|chunk| chunk.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect())
            .collect();
        Ok(Self { header, fields })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), SnapshotError> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }
}

fn read_u32(r: &mut &[u8]) -> Result<u32, SnapshotError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut &[u8]) -> Result<f64, SnapshotError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        Snapshot {
            header: SnapshotHeader { version: VERSION, n1: 2, n2: 3, l1: 1.0, l2: 2.5, t: 0.125, names: vec!["a".into()] },
            fields: vec![vec![0.1, -2.0, f64::MIN_POSITIVE, 1e300, -0.0, 3.0]],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let bytes = s.to_bytes().unwrap();
        assert_eq!(bytes.len(), s.header.byte_len() + s.header.payload_len());
        let back = Snapshot::from_bytes(&bytes).unwrap();
        assert_eq!(back.header, s.header);
        for (a, b) in back.fields[0].iter().zip(&s.fields[0]) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_and_padded_payloads_are_rejected() {
        let bytes = sample().to_bytes().unwrap();
        assert!(matches!(Snapshot::from_bytes(&bytes[..bytes.len() - 1]), Err(SnapshotError::Length { .. })));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(Snapshot::from_bytes(&longer), Err(SnapshotError::Length { .. })));
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(matches!(Snapshot::from_bytes(&bad), Err(SnapshotError::Magic(_))));
    }
}
