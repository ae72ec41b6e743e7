//! Binary field files.
//!
//! Layout, all little-endian:
//!
//! | offset | bytes | content                                   |
//! |-------:|------:|-------------------------------------------|
//! | 0      | 8     | magic `MACFIELD`                          |
//! | 8      | 12    | cell counts `nx, ny, nz` (u32)            |
//! | 20     | 3     | axis kinds (u8, 0 = periodic, 1 = wall)   |
//! | 23     | 1     | component id (see [`Component`])          |
//! | 24     | 8     | time stamp (f64)                          |
//! | 32     | 24    | lengths `Lx, Ly, Lz` (f64)                |
//! | 56     | 8     | number of values (u64)                    |
//! | 64     | 8·n   | values (f64), x fastest                   |
//!
//! A trailer follows the values: magic `MACTRAIL`, the 32-byte sha256 of
//! the producing configuration, a u32 length and the version string.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};

use robin_ns::grid::{AxisKind, BoxGrid};
use robin_ns::{CellField, FaceField};

pub const MAGIC: &[u8; 8] = b"MACFIELD";
pub const TRAILER_MAGIC: &[u8; 8] = b"MACTRAIL";
pub const HEADER_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Component {
    FaceX = 0,
    FaceY = 1,
    FaceZ = 2,
    /// All three face components, x then y then z.
    Faces = 3,
    Cells = 4,
}

impl Component {
    fn from_u8(b: u8) -> Result<Self> {
        Ok(match b {
            0 => Self::FaceX,
            1 => Self::FaceY,
            2 => Self::FaceZ,
            3 => Self::Faces,
            4 => Self::Cells,
            _ => bail!("unknown component id {b}"),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub grid: BoxGrid,
    pub component: Component,
    pub time: f64,
    pub values: Vec<f64>,
    /// Raw sha256 of the producing configuration.
    pub config_sha256: [u8; 32],
    pub version: String,
}

pub fn version_string() -> String {
    format!("robin-ns {}", env!("CARGO_PKG_VERSION"))
}

impl FieldFile {
    pub fn faces(grid: &BoxGrid, u: &FaceField, time: f64, config_sha256: [u8; 32]) -> Self {
        Self {
            grid: grid.clone(),
            component: Component::Faces,
            time,
            values: u.values().collect(),
            config_sha256,
            version: version_string(),
        }
    }

    pub fn cells(grid: &BoxGrid, p: &CellField, time: f64, config_sha256: [u8; 32]) -> Self {
        Self {
            grid: grid.clone(),
            component: Component::Cells,
            time,
            values: p.data().to_vec(),
            config_sha256,
            version: version_string(),
        }
    }

    pub fn to_face_field(&self) -> Result<FaceField> {
        ensure!(self.component == Component::Faces, "expected a face field, found {:?}", self.component);
        Ok(FaceField::from_values(&self.grid, &self.values)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(HEADER_LEN + 8 * self.values.len() + 64);
        b.extend_from_slice(MAGIC);
        for n in self.grid.cells() {
            b.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for k in self.grid.kinds() {
            b.push(match k {
                AxisKind::Periodic => 0,
                AxisKind::Wall => 1,
            });
        }
        b.push(self.component as u8);
        b.extend_from_slice(&self.time.to_le_bytes());
        for l in self.grid.lengths() {
            b.extend_from_slice(&l.to_le_bytes());
        }
        b.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        debug_assert_eq!(b.len(), HEADER_LEN);
        for v in &self.values {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(TRAILER_MAGIC);
        b.extend_from_slice(&self.config_sha256);
        b.extend_from_slice(&(self.version.len() as u32).to_le_bytes());
        b.extend_from_slice(self.version.as_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        ensure!(b.len() >= HEADER_LEN, "file shorter than the {HEADER_LEN}-byte header");
        ensure!(&b[..8] == MAGIC, "bad magic");
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let cells = [0, 1, 2].map(|a| u32_at(8 + 4 * a) as usize);
        let mut kinds = [AxisKind::Periodic; 3];
        for (a, k) in kinds.iter_mut().enumerate() {
            *k = match b[20 + a] {
                0 => AxisKind::Periodic,
                1 => AxisKind::Wall,
                x => bail!("unknown axis kind {x}"),
            };
        }
        let component = Component::from_u8(b[23])?;
        let time = f64_at(24);
        let lengths = [0, 1, 2].map(|a| f64_at(32 + 8 * a));
        let count = u64::from_le_bytes(b[56..64].try_into().unwrap()) as usize;
        let grid = BoxGrid::new(lengths, cells, kinds).context("header describes an invalid grid")?;
        let expected = match component {
            Component::Faces => (0..3).map(|d| grid.face_dims(d).iter().product::<usize>()).sum(),
            Component::Cells => cells.iter().product(),
            c => grid.face_dims(c as usize).iter().product(),
        };
        ensure!(count == expected, "header declares {count} values, grid needs {expected}");
        let end = HEADER_LEN + 8 * count;
        ensure!(b.len() >= end + 8 + 32 + 4, "truncated data or missing trailer");
        let values = b[HEADER_LEN..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        ensure!(&b[end..end + 8] == TRAILER_MAGIC, "bad trailer magic");
        let config_sha256 = b[end + 8..end + 40].try_into().unwrap();
        let vlen = u32_at(end + 40) as usize;
        ensure!(b.len() == end + 44 + vlen, "trailer length mismatch");
        let version = String::from_utf8(b[end + 44..].to_vec()).context("version string is not UTF-8")?;
        Ok(Self {
            grid,
            component,
            time,
            values,
            config_sha256,
            version,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let b = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_bytes(&b).with_context(|| format!("in {}", path.display()))
    }
}

/// Hex string to 32 raw bytes; anything else maps to zeros.
pub fn sha_bytes(hex: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    if hex.len() == 64 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).unwrap_or(0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use robin_ns::grid::AxisKind::*;

    #[test]
    fn round_trip_and_layout() {
        let g = BoxGrid::new([1.0, 2.0, 3.0], [4, 5, 6], [Wall, Periodic, Wall]).unwrap();
        let u = FaceField::from_fn(&g, |d, x| d as f64 + x[0] * x[1] - x[2]);
        let f = FieldFile::faces(&g, &u, 0.25, [7; 32]);
        let b = f.to_bytes();
        assert_eq!(&b[..8], b"MACFIELD");
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 5);
        assert_eq!(b[20..24], [1, 0, 1, 3]);
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 0.25);
        let back = FieldFile::from_bytes(&b).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_face_field().unwrap(), u);
    }

    #[test]
    fn rejects_corruption() {
        let g = BoxGrid::new([1.0; 3], [4, 4, 4], [Wall, Periodic, Wall]).unwrap();
        let p = CellField::from_fn(&g, |x| x[0]);
        let b = FieldFile::cells(&g, &p, 0.0, [0; 32]).to_bytes();
        assert!(FieldFile::from_bytes(&b[..40]).is_err());
        assert!(FieldFile::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(FieldFile::from_bytes(&bad).is_err());
        let mut bad = b.clone();
        bad[56] += 1;
        assert!(FieldFile::from_bytes(&bad).is_err());
        assert!(FieldFile::from_bytes(&b).unwrap().to_face_field().is_err());
    }
}
