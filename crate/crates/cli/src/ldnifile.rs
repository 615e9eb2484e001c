//! Binary container for sampled solids.
//!
//! Layout, all little-endian: magic `LDNI`, version `u16`, normal-mode `u8`
//! (0 accurate, 1 quantized), reserved `u8`, resolution `u32`, cube origin
//! `3×f64`, cube width `f64`; then for each image in X, Y, Z order: `w²`
//! per-column sample counts (`u32`, in `v·w + u` order) followed by that
//! image's samples in the same column order — each sample a depth `f32`
//! plus either `3×f32` or `3×i8` normal components. Reads validate column
//! parity and ordering, so a solid that survives reading is usable.

use std::fmt;
use std::fs;
use std::path::Path;

use ldni::sample::quantize_normal;
use ldni::{Axis, GridError, GridSpec, HermiteSample, Ldni, LdniSolid, NormalMode, AXES};
use nalgebra::{Point3, Vector3};

/// Leading file signature.
pub const LDNI_MAGIC: [u8; 4] = *b"LDNI";
/// The single supported format version.
pub const LDNI_VERSION: u16 = 1;

/// Solid-container file failures.
#[derive(Debug)]
pub enum LdniFileError {
    Io(std::io::Error),
    /// The file does not start with the `LDNI` signature.
    BadMagic,
    /// The file's version is not [`LDNI_VERSION`].
    VersionUnsupported(u16),
    /// The normal-mode byte is neither 0 (accurate) nor 1 (quantized).
    BadNormalMode(u8),
    /// The header's grid dimensions are unusable.
    BadGrid(GridError),
    /// The file ends before its declared contents do.
    TruncatedFile,
    /// A stored column has an odd sample count or unsorted depths.
    ParityViolation {
        axis: Axis,
        u: u32,
        v: u32,
    },
}

impl fmt::Display for LdniFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LdniFileError::Io(e) => write!(f, "{e}"),
            LdniFileError::BadMagic => write!(f, "not an LDNI file (bad signature)"),
            LdniFileError::VersionUnsupported(v) => {
                write!(f, "file version {v} unsupported (expected {LDNI_VERSION})")
            }
            LdniFileError::BadNormalMode(m) => {
                write!(f, "unknown normal-mode byte {m} (expected 0 or 1)")
            }
            LdniFileError::BadGrid(e) => write!(f, "unusable grid header: {e}"),
            LdniFileError::TruncatedFile => {
                write!(f, "file ends before its declared contents")
            }
            LdniFileError::ParityViolation { axis, u, v } => write!(
                f,
                "column {axis:?}({u},{v}) has an odd sample count or unsorted depths"
            ),
        }
    }
}

impl std::error::Error for LdniFileError {}

impl From<std::io::Error> for LdniFileError {
    fn from(e: std::io::Error) -> Self {
        LdniFileError::Io(e)
    }
}

/// Serializes a solid into the container byte layout.
pub fn encode_ldni(solid: &LdniSolid) -> Vec<u8> {
    let grid = solid.grid();
    let w = grid.resolution as usize;
    let mut out = Vec::new();
    out.extend_from_slice(&LDNI_MAGIC);
    out.extend_from_slice(&LDNI_VERSION.to_le_bytes());
    out.push(match solid.normal_mode() {
        NormalMode::Accurate => 0,
        NormalMode::Quantized8 => 1,
    });
    out.push(0); // reserved
    out.extend_from_slice(&grid.resolution.to_le_bytes());
    for c in [grid.origin.x, grid.origin.y, grid.origin.z, grid.width] {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for image in solid.images() {
        for c in 0..w * w {
            out.extend_from_slice(&(image.column_at(c).len() as u32).to_le_bytes());
        }
        for c in 0..w * w {
            for s in image.column_at(c) {
                out.extend_from_slice(&s.depth.to_le_bytes());
                match solid.normal_mode() {
                    NormalMode::Accurate => {
                        for k in 0..3 {
                            out.extend_from_slice(&s.normal[k].to_le_bytes());
                        }
                    }
                    NormalMode::Quantized8 => {
                        let q = s
                            .qnormal()
                            .unwrap_or_else(|| quantize_normal(&s.normal.cast::<f64>()));
                        out.extend_from_slice(&q.map(|b| b as u8));
                    }
                }
            }
        }
    }
    out
}

/// Sequential little-endian reader over the file bytes.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LdniFileError> {
        let end = self
            .pos
            .checked_add(n)
            .ok_or(LdniFileError::TruncatedFile)?;
        if end > self.bytes.len() {
            return Err(LdniFileError::TruncatedFile);
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, LdniFileError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, LdniFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, LdniFileError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, LdniFileError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Deserializes and validates a solid from container bytes.
pub fn decode_ldni(bytes: &[u8]) -> Result<LdniSolid, LdniFileError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != LDNI_MAGIC {
        return Err(LdniFileError::BadMagic);
    }
    let version = cur.u16()?;
    if version != LDNI_VERSION {
        return Err(LdniFileError::VersionUnsupported(version));
    }
    let mode = match cur.take(1)?[0] {
        0 => NormalMode::Accurate,
        1 => NormalMode::Quantized8,
        other => return Err(LdniFileError::BadNormalMode(other)),
    };
    cur.take(1)?; // reserved
    let resolution = cur.u32()?;
    let origin = Point3::new(cur.f64()?, cur.f64()?, cur.f64()?);
    let width = cur.f64()?;
    let grid = GridSpec::new(origin, width, resolution).map_err(LdniFileError::BadGrid)?;
    let w = resolution as usize;

    let sample_bytes = match mode {
        NormalMode::Accurate => 16,
        NormalMode::Quantized8 => 7,
    };
    let mut images = Vec::with_capacity(3);
    for axis in AXES {
        let mut counts = Vec::with_capacity(w * w);
        let mut total: u64 = 0;
        for _ in 0..w * w {
            let n = cur.u32()?;
            total += n as u64;
            counts.push(n);
        }
        // Reject inflated counts before allocating for them.
        let remaining = (bytes.len() - cur.pos) as u64;
        if total * sample_bytes as u64 > remaining {
            return Err(LdniFileError::TruncatedFile);
        }
        let mut columns = Vec::with_capacity(w * w);
        for &n in &counts {
            let mut col = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let depth = cur.f32()?;
                let sample = match mode {
                    NormalMode::Accurate => {
                        let n = Vector3::new(cur.f32()?, cur.f32()?, cur.f32()?);
                        HermiteSample::accurate(depth, n)
                    }
                    NormalMode::Quantized8 => {
                        let q = cur.take(3)?;
                        HermiteSample::quantized(depth, [q[0] as i8, q[1] as i8, q[2] as i8])
                    }
                };
                col.push(sample);
            }
            columns.push(col);
        }
        images.push(Ldni::from_columns(axis, grid, columns));
    }
    let images: [Ldni; 3] = images.try_into().expect("three images were read");
    let solid = LdniSolid::from_images(grid, mode, images)
        .expect("images were built on the header grid in axis order");
    if let Some(&(axis, u, v)) = ldni::validate_parity(&solid).first() {
        return Err(LdniFileError::ParityViolation { axis, u, v });
    }
    Ok(solid)
}

/// Writes a solid to disk.
pub fn write_ldni(solid: &LdniSolid, path: &Path) -> Result<(), LdniFileError> {
    fs::write(path, encode_ldni(solid))?;
    Ok(())
}

/// Reads a solid back from disk.
pub fn read_ldni(path: &Path) -> Result<LdniSolid, LdniFileError> {
    decode_ldni(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ldni::{fixtures, sample_solid};
    use tempfile::tempdir;

    fn box_solid(mode: NormalMode) -> LdniSolid {
        let grid = GridSpec::new(Point3::origin(), 1.0, 4).unwrap();
        let mesh = fixtures::axis_box(Point3::new(0.25, 0.25, 0.25), Point3::new(0.75, 0.75, 0.75));
        sample_solid(&mesh, &grid, mode).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical_in_both_modes() {
        let dir = tempdir().unwrap();
        for mode in [NormalMode::Accurate, NormalMode::Quantized8] {
            let solid = box_solid(mode);
            let path = dir.path().join("box.ldni");
            write_ldni(&solid, &path).unwrap();
            let back = read_ldni(&path).unwrap();
            assert_eq!(back, solid);
            // Re-encoding reproduces the same bytes.
            assert_eq!(encode_ldni(&back), encode_ldni(&solid));
        }
    }

    #[test]
    fn file_size_matches_the_layout_formula() {
        let solid = box_solid(NormalMode::Quantized8);
        let bytes = encode_ldni(&solid);
        // Header 44 bytes; per axis 16 u32 counts + 8 samples × 7 bytes.
        assert_eq!(bytes.len(), 44 + 3 * (16 * 4 + 8 * 7));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode_ldni(&box_solid(NormalMode::Accurate));
        bytes[0] = b'X';
        assert!(matches!(decode_ldni(&bytes), Err(LdniFileError::BadMagic)));
    }

    #[test]
    fn future_version_is_rejected() {
        let mut bytes = encode_ldni(&box_solid(NormalMode::Accurate));
        bytes[4..6].copy_from_slice(&2u16.to_le_bytes());
        assert!(matches!(
            decode_ldni(&bytes),
            Err(LdniFileError::VersionUnsupported(2))
        ));
    }

    #[test]
    fn unknown_normal_mode_is_rejected() {
        let mut bytes = encode_ldni(&box_solid(NormalMode::Accurate));
        bytes[6] = 9;
        assert!(matches!(
            decode_ldni(&bytes),
            Err(LdniFileError::BadNormalMode(9))
        ));
    }

    #[test]
    fn cut_off_file_is_reported_truncated() {
        let bytes = encode_ldni(&box_solid(NormalMode::Accurate));
        for keep in [10, 43, 44, bytes.len() - 1] {
            assert!(
                matches!(
                    decode_ldni(&bytes[..keep]),
                    Err(LdniFileError::TruncatedFile)
                ),
                "kept {keep} bytes"
            );
        }
    }

    #[test]
    fn inflated_column_count_is_caught() {
        let solid = box_solid(NormalMode::Accurate);
        let mut bytes = encode_ldni(&solid);
        // First x-image column count lives right after the 44-byte header.
        let was = u32::from_le_bytes(bytes[44..48].try_into().unwrap());
        bytes[44..48].copy_from_slice(&(was + 1).to_le_bytes());
        assert!(matches!(
            decode_ldni(&bytes),
            Err(LdniFileError::TruncatedFile) | Err(LdniFileError::ParityViolation { .. })
        ));
    }

    #[test]
    fn odd_column_parity_is_rejected_on_read() {
        // Hand-build a solid with a single lone sample.
        let grid = GridSpec::new(Point3::origin(), 1.0, 2).unwrap();
        let mut columns = vec![Vec::new(); 4];
        columns[0].push(HermiteSample::accurate(0.5, Vector3::new(0.0, 0.0, 1.0)));
        let images = [
            Ldni::from_columns(Axis::X, grid, columns),
            Ldni::from_columns(Axis::Y, grid, vec![Vec::new(); 4]),
            Ldni::from_columns(Axis::Z, grid, vec![Vec::new(); 4]),
        ];
        let solid = LdniSolid::from_images(grid, NormalMode::Accurate, images).unwrap();
        let bytes = encode_ldni(&solid);
        assert!(matches!(
            decode_ldni(&bytes),
            Err(LdniFileError::ParityViolation {
                axis: Axis::X,
                u: 0,
                v: 0
            })
        ));
    }
}
