//! Final surface-finishing stages: relaxation of vertices that carry no
//! surface samples, and quad-to-triangle conversion that follows the local
//! orientation of the surface when picking diagonals.

use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};

use crate::mesh::TriangleMesh;

use super::quads::QuadMesh;
use super::ContourError;

/// Upper bound on relaxation sweeps in [`smooth_unconstrained`].
pub const SMOOTH_MAX_ITERS: u32 = 50;

/// Relaxes the listed vertices toward the centroid of their edge neighbors.
///
/// Each sweep recomputes every listed vertex from the previous sweep's
/// positions (all vertices move simultaneously). Sweeps stop once the
/// largest single-vertex displacement falls below `tolerance`, or after
/// [`SMOOTH_MAX_ITERS`] sweeps. Vertices not listed never move, so
/// positions anchored to surface samples are preserved exactly.
pub fn smooth_unconstrained(mesh: &QuadMesh, unconstrained: &[u32], tolerance: f64) -> QuadMesh {
    let mut out = mesh.clone();
    if unconstrained.is_empty() || mesh.quads.is_empty() {
        return out;
    }
    let mut neighbors: BTreeMap<u32, Vec<u32>> =
        unconstrained.iter().map(|&v| (v, Vec::new())).collect();
    for quad in &mesh.quads {
        for s in 0..4 {
            let a = quad[s];
            let b = quad[(s + 1) % 4];
            if let Some(list) = neighbors.get_mut(&a) {
                list.push(b);
            }
            if let Some(list) = neighbors.get_mut(&b) {
                list.push(a);
            }
        }
    }
    for list in neighbors.values_mut() {
        list.sort_unstable();
        list.dedup();
    }
    for _ in 0..SMOOTH_MAX_ITERS {
        let mut max_move = 0.0f64;
        let mut next = out.vertices.clone();
        for (&v, list) in &neighbors {
            if list.is_empty() {
                continue;
            }
            let mut sum = Vector3::zeros();
            for &n in list {
                sum += out.vertices[n as usize].coords;
            }
            let target = Point3::from(sum / list.len() as f64);
            max_move = max_move.max((target - out.vertices[v as usize]).norm());
            next[v as usize] = target;
        }
        out.vertices = next;
        if max_move < tolerance {
            break;
        }
    }
    out
}

/// Normal of the triangle `(a, b, c)`, or `None` when its area is zero.
fn tri_normal(a: Point3<f64>, b: Point3<f64>, c: Point3<f64>) -> Option<Vector3<f64>> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        Some(n / len)
    } else {
        None
    }
}

/// Angle between a triangle's normal and a reference direction; a missing
/// (zero-area) normal counts as the worst possible deviation.
fn deviation(normal: Option<Vector3<f64>>, reference: Vector3<f64>) -> f64 {
    match normal {
        Some(n) => {
            let len = reference.norm();
            if len > 0.0 {
                n.angle(&(reference / len))
            } else {
                0.0
            }
        }
        None => std::f64::consts::PI,
    }
}

/// Splits every quad into two triangles and assembles the final mesh.
///
/// For each quad both diagonals are scored: each candidate triangle is
/// compared against the orientation of its surroundings (the quads across
/// the two quad edges it covers, plus its sibling triangle), and the
/// diagonal with the smaller summed angular deviation wins. Exact ties go
/// to the geometrically shorter diagonal, then to the diagonal with the
/// lexicographically smaller vertex-index pair, keeping the choice
/// deterministic.
///
/// Returns the mesh and the number of quads whose chosen split contains a
/// zero-area triangle. Fails with [`ContourError::EmptyOutput`] when there
/// are no quads.
pub fn triangulate(mesh: &QuadMesh) -> Result<(TriangleMesh, u32), ContourError> {
    if mesh.quads.is_empty() {
        return Err(ContourError::EmptyOutput);
    }

    // Orientation of each whole quad, used as the neighborhood reference.
    let quad_normal = |q: &[u32; 4]| -> Vector3<f64> {
        let p: Vec<Point3<f64>> = q.iter().map(|&v| mesh.vertices[v as usize]).collect();
        let mut n = Vector3::zeros();
        for s in 0..4 {
            let a = p[s];
            let b = p[(s + 1) % 4];
            n.x += (a.y - b.y) * (a.z + b.z);
            n.y += (a.z - b.z) * (a.x + b.x);
            n.z += (a.x - b.x) * (a.y + b.y);
        }
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            n
        }
    };
    let normals: Vec<Vector3<f64>> = mesh.quads.iter().map(quad_normal).collect();

    // Across-edge adjacency: which quad faces use each undirected edge.
    let mut edge_faces: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
    for (fi, quad) in mesh.quads.iter().enumerate() {
        for s in 0..4 {
            let a = quad[s];
            let b = quad[(s + 1) % 4];
            let key = (a.min(b), a.max(b));
            edge_faces.entry(key).or_default().push(fi as u32);
        }
    }
    let neighbor_normal = |fi: u32, a: u32, b: u32| -> Option<Vector3<f64>> {
        let key = (a.min(b), a.max(b));
        edge_faces
            .get(&key)?
            .iter()
            .find(|&&other| other != fi)
            .map(|&other| normals[other as usize])
    };

    let mut faces = Vec::with_capacity(mesh.quads.len() * 2);
    let mut degenerate_quads = 0u32;
    for (fi, quad) in mesh.quads.iter().enumerate() {
        let fi = fi as u32;
        let p: Vec<Point3<f64>> = quad.iter().map(|&v| mesh.vertices[v as usize]).collect();
        // Neighbor orientation across each of the four quad edges.
        let around: Vec<Option<Vector3<f64>>> = (0..4)
            .map(|s| neighbor_normal(fi, quad[s], quad[(s + 1) % 4]))
            .collect();

        // Candidate A splits along (v0, v2), candidate B along (v1, v3).
        // Each triangle lists the quad-edge slots it covers.
        let candidates = [
            (
                (0usize, 2usize),
                [([0, 1, 2], [0usize, 1usize]), ([0, 2, 3], [2, 3])],
            ),
            ((1, 3), [([0, 1, 3], [0, 3]), ([1, 2, 3], [1, 2])]),
        ];
        let mut scored = Vec::with_capacity(2);
        for (diag, tris) in &candidates {
            let tri_normals: Vec<Option<Vector3<f64>>> = tris
                .iter()
                .map(|(corners, _)| tri_normal(p[corners[0]], p[corners[1]], p[corners[2]]))
                .collect();
            let mut total = 0.0f64;
            for (ti, (_, slots)) in tris.iter().enumerate() {
                let mut reference = Vector3::zeros();
                for &s in slots {
                    if let Some(n) = around[s] {
                        reference += n;
                    }
                }
                if let Some(sibling) = tri_normals[1 - ti] {
                    reference += sibling;
                }
                total += deviation(tri_normals[ti], reference);
            }
            let has_degenerate = tri_normals.iter().any(Option::is_none);
            let length = (p[diag.1] - p[diag.0]).norm();
            let ids = (
                quad[diag.0].min(quad[diag.1]),
                quad[diag.0].max(quad[diag.1]),
            );
            scored.push((total, length, ids, *tris, has_degenerate));
        }

        let (a, b) = (&scored[0], &scored[1]);
        let pick = if (a.0 - b.0).abs() > 1e-12 {
            if a.0 < b.0 {
                a
            } else {
                b
            }
        } else if (a.1 - b.1).abs() > 1e-12 {
            if a.1 < b.1 {
                a
            } else {
                b
            }
        } else if a.2 <= b.2 {
            a
        } else {
            b
        };
        if pick.4 {
            degenerate_quads += 1;
        }
        for (corners, _) in &pick.3 {
            faces.push([quad[corners[0]], quad[corners[1]], quad[corners[2]]]);
        }
    }

    let mesh = TriangleMesh::new(mesh.vertices.clone(), faces)
        .expect("triangulated quads always reference valid vertices");
    Ok((mesh, degenerate_quads))
}
