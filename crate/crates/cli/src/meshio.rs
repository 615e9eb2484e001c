//! Triangle-mesh file IO.
//!
//! Wavefront OBJ (polygons fan-triangulated on read) and STL in both binary
//! and ASCII flavors (the reader sniffs which; exact-duplicate vertices are
//! welded back together since STL stores each triangle's corners verbatim).

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use ldni::{MeshError, TriangleMesh};
use nalgebra::Point3;

/// On-disk mesh encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    StlBinary,
    StlAscii,
}

/// Mesh file failures.
#[derive(Debug)]
pub enum MeshIoError {
    Io(std::io::Error),
    /// Unparsable content; `line` is 1-based (0 for binary offsets).
    Parse {
        line: usize,
        message: String,
    },
    /// A face with fewer than three distinct vertex references.
    NonTriangulablePolygon {
        line: usize,
    },
    /// The path's extension maps to no supported format.
    UnknownExtension(String),
    /// The parsed data does not form a usable mesh (empty, bad indices).
    InvalidMesh(MeshError),
}

impl fmt::Display for MeshIoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshIoError::Io(e) => write!(f, "{e}"),
            MeshIoError::Parse { line, message } => {
                write!(f, "line {line}: {message}")
            }
            MeshIoError::NonTriangulablePolygon { line } => {
                write!(f, "line {line}: face needs at least three vertices")
            }
            MeshIoError::UnknownExtension(ext) => {
                write!(f, "unsupported mesh extension {ext:?} (use .obj or .stl)")
            }
            MeshIoError::InvalidMesh(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for MeshIoError {}

impl From<std::io::Error> for MeshIoError {
    fn from(e: std::io::Error) -> Self {
        MeshIoError::Io(e)
    }
}

/// Picks the format a path's extension implies (`.stl` reads are sniffed
/// between binary and ASCII later; writes default to binary).
fn format_for(path: &Path) -> Result<MeshFormat, MeshIoError> {
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "obj" => Ok(MeshFormat::Obj),
        "stl" => Ok(MeshFormat::StlBinary),
        other => Err(MeshIoError::UnknownExtension(other.to_string())),
    }
}

/// Reads a triangle mesh, choosing the parser from the file extension and,
/// for STL, sniffing binary against ASCII content.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh, MeshIoError> {
    let bytes = fs::read(path)?;
    match format_for(path)? {
        MeshFormat::Obj => read_obj(&bytes),
        MeshFormat::StlBinary | MeshFormat::StlAscii => read_stl(&bytes),
    }
}

/// Writes a mesh in the requested format.
pub fn write_mesh(mesh: &TriangleMesh, path: &Path, format: MeshFormat) -> Result<(), MeshIoError> {
    let mut out = Vec::new();
    match format {
        MeshFormat::Obj => write_obj(mesh, &mut out)?,
        MeshFormat::StlBinary => write_stl_binary(mesh, &mut out)?,
        MeshFormat::StlAscii => write_stl_ascii(mesh, &mut out)?,
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes a mesh using the format the path's extension implies.
pub fn write_mesh_auto(mesh: &TriangleMesh, path: &Path) -> Result<(), MeshIoError> {
    write_mesh(mesh, path, format_for(path)?)
}

fn read_obj(bytes: &[u8]) -> Result<TriangleMesh, MeshIoError> {
    let text = String::from_utf8_lossy(bytes);
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coord = |what: &str| -> Result<f64, MeshIoError> {
                    tokens
                        .next()
                        .ok_or_else(|| MeshIoError::Parse {
                            line,
                            message: format!("vertex missing {what} coordinate"),
                        })?
                        .parse()
                        .map_err(|_| MeshIoError::Parse {
                            line,
                            message: format!("vertex {what} coordinate is not a number"),
                        })
                };
                let (x, y, z) = (coord("x")?, coord("y")?, coord("z")?);
                vertices.push(Point3::new(x, y, z));
            }
            Some("f") => {
                let mut ids = Vec::new();
                for token in tokens {
                    // `v`, `v/vt`, `v//vn`, `v/vt/vn` — the vertex index
                    // is always the first field.
                    let first = token.split('/').next().unwrap_or("");
                    let idx: i64 = first.parse().map_err(|_| MeshIoError::Parse {
                        line,
                        message: format!("face index {first:?} is not an integer"),
                    })?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(MeshIoError::Parse {
                            line,
                            message: "face index 0 is not valid".into(),
                        });
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(MeshIoError::Parse {
                            line,
                            message: format!("face index {idx} out of range"),
                        });
                    }
                    ids.push(resolved as u32);
                }
                if ids.len() < 3 {
                    return Err(MeshIoError::NonTriangulablePolygon { line });
                }
                for k in 1..ids.len() - 1 {
                    faces.push([ids[0], ids[k], ids[k + 1]]);
                }
            }
            // Normals, texture coordinates, groups, materials and comments
            // carry nothing we keep.
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces).map_err(MeshIoError::InvalidMesh)
}

fn write_obj(mesh: &TriangleMesh, out: &mut Vec<u8>) -> Result<(), MeshIoError> {
    for p in mesh.vertices() {
        // `{}` prints the shortest digits that parse back exactly.
        writeln!(out, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for f in mesh.faces() {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

fn read_stl(bytes: &[u8]) -> Result<TriangleMesh, MeshIoError> {
    // A binary STL is exactly 84 + 50n bytes; that check beats looking for
    // a leading "solid", which binary exporters also emit in the header.
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        if bytes.len() == 84 + 50 * n {
            return read_stl_binary(bytes, n);
        }
    }
    read_stl_ascii(bytes)
}

/// Accumulates welded vertices: triangle corners with bit-identical
/// coordinates share one index.
struct Welder {
    vertices: Vec<Point3<f64>>,
    seen: HashMap<[u32; 3], u32>,
    faces: Vec<[u32; 3]>,
}

impl Welder {
    fn new() -> Welder {
        Welder {
            vertices: Vec::new(),
            seen: HashMap::new(),
            faces: Vec::new(),
        }
    }

    fn corner(&mut self, p: [f32; 3]) -> u32 {
        let key = p.map(f32::to_bits);
        *self.seen.entry(key).or_insert_with(|| {
            self.vertices
                .push(Point3::new(p[0] as f64, p[1] as f64, p[2] as f64));
            (self.vertices.len() - 1) as u32
        })
    }

    fn triangle(&mut self, corners: [[f32; 3]; 3]) {
        let ids = corners.map(|c| self.corner(c));
        self.faces.push(ids);
    }

    fn finish(self) -> Result<TriangleMesh, MeshIoError> {
        TriangleMesh::new(self.vertices, self.faces).map_err(MeshIoError::InvalidMesh)
    }
}

fn read_stl_binary(bytes: &[u8], count: usize) -> Result<TriangleMesh, MeshIoError> {
    let mut welder = Welder::new();
    for t in 0..count {
        let base = 84 + 50 * t + 12; // skip the facet normal
        let mut corners = [[0f32; 3]; 3];
        for (v, corner) in corners.iter_mut().enumerate() {
            for (k, c) in corner.iter_mut().enumerate() {
                let at = base + 12 * v + 4 * k;
                *c = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            }
        }
        welder.triangle(corners);
    }
    welder.finish()
}

fn read_stl_ascii(bytes: &[u8]) -> Result<TriangleMesh, MeshIoError> {
    let text = String::from_utf8_lossy(bytes);
    let mut welder = Welder::new();
    let mut pending: Vec<[f32; 3]> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut tokens = raw.split_whitespace();
        if tokens.next() != Some("vertex") {
            continue;
        }
        let mut coord = || -> Result<f32, MeshIoError> {
            tokens
                .next()
                .ok_or_else(|| MeshIoError::Parse {
                    line,
                    message: "vertex needs three coordinates".into(),
                })?
                .parse()
                .map_err(|_| MeshIoError::Parse {
                    line,
                    message: "vertex coordinate is not a number".into(),
                })
        };
        pending.push([coord()?, coord()?, coord()?]);
        if pending.len() == 3 {
            welder.triangle([pending[0], pending[1], pending[2]]);
            pending.clear();
        }
    }
    if !pending.is_empty() {
        return Err(MeshIoError::Parse {
            line: 0,
            message: "facet with fewer than three vertices".into(),
        });
    }
    welder.finish()
}

fn write_stl_binary(mesh: &TriangleMesh, out: &mut Vec<u8>) -> Result<(), MeshIoError> {
    out.extend_from_slice(&[0u8; 80]);
    out.extend_from_slice(&(mesh.faces().len() as u32).to_le_bytes());
    for (fi, _) in mesh.faces().iter().enumerate() {
        let n = mesh.face_normals()[fi];
        for c in [n.x, n.y, n.z] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
        for p in mesh.face_points(fi as u32) {
            for c in [p.x, p.y, p.z] {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok(())
}

fn write_stl_ascii(mesh: &TriangleMesh, out: &mut Vec<u8>) -> Result<(), MeshIoError> {
    writeln!(out, "solid model")?;
    for (fi, _) in mesh.faces().iter().enumerate() {
        let n = mesh.face_normals()[fi];
        writeln!(out, "  facet normal {} {} {}", n.x, n.y, n.z)?;
        writeln!(out, "    outer loop")?;
        for p in mesh.face_points(fi as u32) {
            writeln!(out, "      vertex {} {} {}", p.x, p.y, p.z)?;
        }
        writeln!(out, "    endloop")?;
        writeln!(out, "  endfacet")?;
    }
    writeln!(out, "endsolid model")?;
    Ok(())
}
