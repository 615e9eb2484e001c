//! Indexed triangle meshes, their topology audit and the padded bounding cube
//! used to fit a sampling grid around a model.

use nalgebra::{Point3, Vector3};
use std::collections::HashMap;
use std::fmt;

/// Errors raised while constructing a [`TriangleMesh`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum MeshError {
    /// A face references a vertex index outside the vertex array.
    IndexOutOfRange { face: u32, index: u32 },
    /// The mesh has no faces (an empty mesh is valid; a mesh whose faces were
    /// all degenerate is reported through [`TriangleMesh::degenerate_faces`]).
    Empty,
}

impl fmt::Display for MeshError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshError::IndexOutOfRange { face, index } => {
                write!(
                    f,
                    "face {face} references vertex {index} beyond the vertex array"
                )
            }
            MeshError::Empty => write!(f, "mesh has no faces"),
        }
    }
}

impl std::error::Error for MeshError {}

/// An indexed triangle mesh with per-face unit normals.
///
/// The structure is immutable after construction; every stage that consumes a
/// mesh reads it concurrently without synchronization.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
    face_normals: Vec<Vector3<f64>>,
    degenerate_faces: u32,
}

impl TriangleMesh {
    /// Build a mesh from vertex positions and vertex-index triples.
    ///
    /// Face normals are the normalized cross products of the face edges. A
    /// face whose cross product is exactly zero (repeated or exactly
    /// collinear vertices) gets a zero normal and is counted in
    /// [`TriangleMesh::degenerate_faces`]; such faces never intersect a ray
    /// and are skipped by the sampler.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len() as u32;
        let mut degenerate = 0u32;
        let mut normals = Vec::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            for &ix in f {
                if ix >= n {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi as u32,
                        index: ix,
                    });
                }
            }
            let [a, b, c] = [
                vertices[f[0] as usize],
                vertices[f[1] as usize],
                vertices[f[2] as usize],
            ];
            let cross = (b - a).cross(&(c - a));
            let len = cross.norm();
            if len == 0.0 {
                degenerate += 1;
                normals.push(Vector3::zeros());
            } else {
                normals.push(cross / len);
            }
        }
        Ok(TriangleMesh {
            vertices,
            faces,
            face_normals: normals,
            degenerate_faces: degenerate,
        })
    }

    /// Vertex positions.
    #[inline]
    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    /// Vertex-index triples, counter-clockwise when viewed from outside for a
    /// consistently oriented closed mesh.
    #[inline]
    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    /// Unit outward normal per face (zero vector for degenerate faces).
    #[inline]
    pub fn face_normals(&self) -> &[Vector3<f64>] {
        &self.face_normals
    }

    /// Number of faces whose area is exactly zero.
    #[inline]
    pub fn degenerate_faces(&self) -> u32 {
        self.degenerate_faces
    }

    /// The three corner positions of face `fi`.
    #[inline]
    pub fn face_points(&self, fi: u32) -> [Point3<f64>; 3] {
        let f = self.faces[fi as usize];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    /// Axis-aligned bounding box as `(min, max)`. `None` for a mesh without
    /// vertices.
    pub fn aabb(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Some((lo, hi))
    }

    /// Total surface area.
    pub fn surface_area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let a = self.vertices[f[0] as usize];
                let b = self.vertices[f[1] as usize];
                let c = self.vertices[f[2] as usize];
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    /// Signed volume (positive for an outward-oriented closed mesh).
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let a = self.vertices[f[0] as usize].coords;
                let b = self.vertices[f[1] as usize].coords;
                let c = self.vertices[f[2] as usize].coords;
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }
}

/// Undirected-edge incidence of a mesh: for every edge (canonical vertex-id
/// pair) the list of incident faces, plus the direction each face traverses
/// the edge. Built once and shared by the audit and the ray caster.
pub struct MeshTopology {
    /// Canonical `(min_vid, max_vid)` edge -> incident faces. `forward` means
    /// the face traverses the edge from `min_vid` to `max_vid`.
    edges: HashMap<(u32, u32), Vec<EdgeUse>>,
}

/// One face's use of an undirected edge.
#[derive(Copy, Clone, Debug)]
pub struct EdgeUse {
    /// Face index.
    pub face: u32,
    /// Whether the face walks the edge from the smaller to the larger vertex
    /// index.
    pub forward: bool,
}

impl MeshTopology {
    /// Collect edge incidence for `mesh`.
    pub fn new(mesh: &TriangleMesh) -> Self {
        let mut edges: HashMap<(u32, u32), Vec<EdgeUse>> = HashMap::new();
        for (fi, f) in mesh.faces().iter().enumerate() {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                let (key, forward) = if a <= b {
                    ((a, b), true)
                } else {
                    ((b, a), false)
                };
                edges.entry(key).or_default().push(EdgeUse {
                    face: fi as u32,
                    forward,
                });
            }
        }
        MeshTopology { edges }
    }

    /// Incident faces of the undirected edge `(a, b)`, if present.
    #[inline]
    pub fn edge_faces(&self, a: u32, b: u32) -> Option<&[EdgeUse]> {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.edges.get(&key).map(|v| v.as_slice())
    }

    /// Iterate over all undirected edges and their incident faces.
    pub fn edges(&self) -> impl Iterator<Item = (&(u32, u32), &Vec<EdgeUse>)> {
        self.edges.iter()
    }

    /// Number of undirected edges.
    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Result of a topology audit, the gate every mesh passes before sampling and
/// the closure/manifoldness check applied to contoured output.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct MeshAudit {
    /// No boundary edges.
    pub is_closed: bool,
    /// No edge with more than two incident faces and no vertex whose incident
    /// faces form more than one fan.
    pub is_two_manifold: bool,
    /// Every interior edge is traversed once in each direction by its two
    /// faces.
    pub is_consistently_oriented: bool,
    /// `V - E + F` (2 for a sphere, 0 for a torus, `2 - 2g` in general).
    pub euler_characteristic: i64,
    /// Edges with exactly one incident face.
    pub boundary_edge_count: u64,
    /// Edges with three or more incident faces.
    pub nonmanifold_edge_count: u64,
    /// Vertices whose incident faces split into more than one
    /// edge-connected fan.
    pub nonmanifold_vertex_count: u64,
}

impl MeshAudit {
    /// Whether the mesh is acceptable as sampler input: a closed, oriented
    /// two-manifold.
    #[inline]
    pub fn is_watertight_solid(&self) -> bool {
        self.is_closed && self.is_two_manifold && self.is_consistently_oriented
    }
}

/// Audit closure, manifoldness, orientation and the Euler characteristic of a
/// mesh in one pass over its edge incidence.
pub fn audit_mesh(mesh: &TriangleMesh) -> MeshAudit {
    let topo = MeshTopology::new(mesh);
    audit_with_topology(mesh, &topo)
}

/// [`audit_mesh`] against a pre-built topology (avoids rebuilding the edge
/// table when the caller already has one).
pub fn audit_with_topology(mesh: &TriangleMesh, topo: &MeshTopology) -> MeshAudit {
    let mut boundary = 0u64;
    let mut nonmanifold_edges = 0u64;
    let mut oriented = true;
    for (_, uses) in topo.edges() {
        match uses.len() {
            1 => boundary += 1,
            2 => {
                if uses[0].forward == uses[1].forward {
                    oriented = false;
                }
            }
            _ => nonmanifold_edges += 1,
        }
    }

    let nonmanifold_vertices = count_nonmanifold_vertices(mesh, topo);

    MeshAudit {
        is_closed: boundary == 0,
        is_two_manifold: nonmanifold_edges == 0 && nonmanifold_vertices == 0,
        is_consistently_oriented: oriented,
        euler_characteristic: mesh.vertices().len() as i64 - topo.edge_count() as i64
            + mesh.faces().len() as i64,
        boundary_edge_count: boundary,
        nonmanifold_edge_count: nonmanifold_edges,
        nonmanifold_vertex_count: nonmanifold_vertices,
    }
}

/// A vertex is non-manifold when the faces around it do not form a single fan
/// connected through *manifold* (exactly-two-face) edges incident to the
/// vertex. Unreferenced vertices are ignored.
fn count_nonmanifold_vertices(mesh: &TriangleMesh, topo: &MeshTopology) -> u64 {
    // faces around each vertex
    let mut incident: Vec<Vec<u32>> = vec![Vec::new(); mesh.vertices().len()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        for &v in f {
            incident[v as usize].push(fi as u32);
        }
    }

    let mut count = 0u64;
    let mut component: HashMap<u32, u32> = HashMap::new();
    for (v, faces) in incident.iter().enumerate() {
        if faces.len() < 2 {
            continue;
        }
        // Union-find over this vertex's faces, linked when two faces share a
        // manifold edge through the vertex.
        component.clear();
        for (slot, &f) in faces.iter().enumerate() {
            component.insert(f, slot as u32);
        }
        let mut parent: Vec<u32> = (0..faces.len() as u32).collect();
        fn find(parent: &mut [u32], mut x: u32) -> u32 {
            while parent[x as usize] != x {
                parent[x as usize] = parent[parent[x as usize] as usize];
                x = parent[x as usize];
            }
            x
        }
        for &f in faces {
            let tri = mesh.faces()[f as usize];
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                if a != v as u32 && b != v as u32 {
                    continue;
                }
                if let Some(uses) = topo.edge_faces(a, b) {
                    if uses.len() == 2 {
                        let (s0, s1) = (component[&uses[0].face], component[&uses[1].face]);
                        let (r0, r1) = (find(&mut parent, s0), find(&mut parent, s1));
                        if r0 != r1 {
                            parent[r0 as usize] = r1;
                        }
                    }
                }
            }
        }
        let roots: std::collections::HashSet<u32> = (0..faces.len() as u32)
            .map(|s| find(&mut parent, s))
            .collect();
        if roots.len() > 1 {
            count += 1;
        }
    }
    count
}

/// Smallest axis-aligned cube containing `mesh`, expanded by
/// `padding` (a fraction of the largest bounding-box extent) on every side,
/// centered on the bounding-box center. Returns `(origin, edge_length)`.
pub fn bounding_cube(mesh: &TriangleMesh, padding: f64) -> (Point3<f64>, f64) {
    bounding_cube_of(&[mesh], padding)
}

/// [`bounding_cube`] over the union of several meshes' bounding boxes.
pub fn bounding_cube_of(meshes: &[&TriangleMesh], padding: f64) -> (Point3<f64>, f64) {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for mesh in meshes {
        if let Some((l, h)) = mesh.aabb() {
            for a in 0..3 {
                lo[a] = lo[a].min(l[a]);
                hi[a] = hi[a].max(h[a]);
            }
        }
    }
    assert!(lo.x.is_finite(), "bounding cube of empty mesh set");
    let extent = (hi - lo).amax().max(0.0);
    let width = extent * (1.0 + padding);
    let center = nalgebra::center(&lo, &hi);
    let half = width / 2.0;
    (
        Point3::new(center.x - half, center.y - half, center.z - half),
        width,
    )
}
