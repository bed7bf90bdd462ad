//! BPNS snapshots: a 32-byte little-endian header followed by the `n × n`
//! physical field, row-major (`y` slowest), as little-endian f64.
//!
//! ```text
//! 0  magic "BPNS"
//! 4  version u32
//! 8  n u32
//! 12 field kind u32 (0 vorticity, 1 streamfunction)
//! 16 L f64
//! 24 t f64
//! ```

use std::fs;
use std::io;
use std::path::Path;

use betaplane::dynamics::SimState;
use betaplane::{GridSpec, PhysicalField};

pub const MAGIC: &[u8; 4] = b"BPNS";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Vorticity = 0,
    Streamfunction = 1,
}

impl FieldKind {
    fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(FieldKind::Vorticity),
            1 => Some(FieldKind::Streamfunction),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot I/O: {0}")]
    Io(#[from] io::Error),
    #[error("bad snapshot magic: expected \"BPNS\", found {0:?}")]
    Magic([u8; 4]),
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("unknown field kind tag {0}")]
    Kind(u32),
    #[error("snapshot length {found} bytes, expected {expected}")]
    Length { found: usize, expected: usize },
    #[error("invalid snapshot grid: {0}")]
    Grid(String),
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub kind: FieldKind,
    pub t: f64,
    pub field: PhysicalField,
}

impl Snapshot {
    pub fn of_state(state: &SimState) -> Self {
        Snapshot { kind: FieldKind::Vorticity, t: state.t, field: state.omega.inverse() }
    }

    /// Spectral state from a vorticity snapshot, mean re-zeroed.
    pub fn into_state(self) -> SimState {
        SimState::new(self.t, self.field.forward())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let grid = self.field.grid();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
        out.extend_from_slice(&(self.kind as u32).to_le_bytes());
        out.extend_from_slice(&grid.length().to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        for v in self.field.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < HEADER_LEN {
            return Err(SnapshotError::Length { found: bytes.len(), expected: HEADER_LEN });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let float = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if &magic != MAGIC {
            return Err(SnapshotError::Magic(magic));
        }
        let version = word(4);
        if version != VERSION {
            return Err(SnapshotError::Version(version));
        }
        let n = word(8) as usize;
        let kind = FieldKind::from_tag(word(12)).ok_or(SnapshotError::Kind(word(12)))?;
        let (length, t) = (float(16), float(24));
        let expected = HEADER_LEN + 8 * n * n;
        if bytes.len() != expected {
            return Err(SnapshotError::Length { found: bytes.len(), expected });
        }
        let grid = GridSpec::new(length, n).map_err(|e| SnapshotError::Grid(e.to_string()))?;
        let values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let field = PhysicalField::new(&grid, values).map_err(|e| SnapshotError::Grid(e.to_string()))?;
        Ok(Snapshot { kind, t, field })
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<(), SnapshotError> {
    fs::write(path, snap.to_bytes())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    Snapshot::from_bytes(&fs::read(path)?)
}
