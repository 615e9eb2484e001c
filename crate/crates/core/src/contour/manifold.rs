//! Non-manifold repair of the quad mesh.
//!
//! Quad assembly can join distinct surface sheets through a shared edge
//! (four or more faces around one edge) or a shared vertex (two fans
//! touching at a point). Repair runs in two passes, edges first:
//!
//! 1. at every singular edge, the incident faces are sorted angularly
//!    around the edge and paired so that the two faces of a pair form the
//!    most convex dihedral among the non-crossing pairings — paired faces
//!    stay connected, unpaired ones are separated;
//! 2. every vertex's incident faces are grouped into fans connected by the
//!    (now pairing-respecting) edge adjacency; each fan beyond the first
//!    receives its own duplicate of the vertex.
//!
//! Splitting a singular edge falls out of the vertex pass: once both its
//! end vertices are duplicated per fan, each pair references its own copy.

use nalgebra::Vector3;
use std::collections::BTreeMap;

use super::QuadMesh;

/// Repair non-manifold edges and vertices. Manifold input is returned
/// unchanged, bit for bit.
pub fn fix_nonmanifold(mesh: &QuadMesh) -> QuadMesh {
    let nf = mesh.quads.len();
    let mut edge_uses: BTreeMap<(u32, u32), Vec<(u32, u8)>> = BTreeMap::new();
    for (f, q) in mesh.quads.iter().enumerate() {
        for s in 0..4 {
            let (a, b) = (q[s], q[(s + 1) % 4]);
            edge_uses
                .entry((a.min(b), a.max(b)))
                .or_default()
                .push((f as u32, s as u8));
        }
    }

    let normals: Vec<Vector3<f64>> = mesh.quads.iter().map(|q| newell(mesh, q)).collect();

    // Face adjacency across each quad slot, respecting singular-edge pairing.
    let mut partner: Vec<[Option<(u32, u8)>; 4]> = vec![[None; 4]; nf];
    for (&(a, b), uses) in &edge_uses {
        let pairs: Vec<((u32, u8), (u32, u8))> = if uses.len() == 2 {
            vec![(uses[0], uses[1])]
        } else if uses.len() >= 4 && uses.len() % 2 == 0 {
            pair_singular_edge(mesh, &normals, (a, b), uses)
        } else {
            continue; // boundary or odd incidence: nothing to pair
        };
        for ((f, fs), (g, gs)) in pairs {
            partner[f as usize][fs as usize] = Some((g, gs));
            partner[g as usize][gs as usize] = Some((f, fs));
        }
    }

    // Vertex pass: group each vertex's face corners into fans and duplicate
    // the vertex for every fan beyond the first.
    let mut incident: Vec<Vec<(u32, u8)>> = vec![Vec::new(); mesh.vertices.len()];
    for (f, q) in mesh.quads.iter().enumerate() {
        for (c, &v) in q.iter().enumerate() {
            incident[v as usize].push((f as u32, c as u8));
        }
    }

    let mut quads = mesh.quads.clone();
    let mut vertices = mesh.vertices.clone();
    let mut constrained = mesh.constrained.clone();
    for (v, inc) in incident.iter().enumerate() {
        if inc.len() <= 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..inc.len()).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut c = x;
            while parent[c] != r {
                let next = parent[c];
                parent[c] = r;
                c = next;
            }
            r
        }
        for (idx, &(f, c)) in inc.iter().enumerate() {
            // The two face edges meeting at corner c: slots c and (c+3)%4.
            for s in [c, (c + 3) % 4] {
                let Some((g, _)) = partner[f as usize][s as usize] else {
                    continue;
                };
                if let Some(jdx) = inc.iter().position(|&(h, _)| h == g) {
                    let (ra, rb) = (find(&mut parent, idx), find(&mut parent, jdx));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        // Fans in first-appearance order; the first keeps the vertex.
        let mut fan_of_root: BTreeMap<usize, u32> = BTreeMap::new();
        for (idx, &(f, c)) in inc.iter().enumerate() {
            let root = find(&mut parent, idx);
            let id = match fan_of_root.get(&root) {
                Some(&id) => id,
                None => {
                    let id = if fan_of_root.is_empty() {
                        v as u32
                    } else {
                        vertices.push(mesh.vertices[v]);
                        constrained.push(mesh.constrained[v]);
                        (vertices.len() - 1) as u32
                    };
                    fan_of_root.insert(root, id);
                    id
                }
            };
            quads[f as usize][c as usize] = id;
        }
    }
    QuadMesh {
        vertices,
        quads,
        constrained,
    }
}

fn newell(mesh: &QuadMesh, q: &[u32; 4]) -> Vector3<f64> {
    let mut n = Vector3::zeros();
    for i in 0..4 {
        let p = mesh.vertices[q[i] as usize];
        let r = mesh.vertices[q[(i + 1) % 4] as usize];
        n.x += (p.y - r.y) * (p.z + r.z);
        n.y += (p.z - r.z) * (p.x + r.x);
        n.z += (p.x - r.x) * (p.y + r.y);
    }
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        n
    }
}

/// Pair the faces around a singular edge so that paired faces form the most
/// convex dihedrals, choosing between the two non-crossing alternating
/// pairings of the angular order. Pairs must traverse the edge in opposite
/// directions (consistent orientation).
fn pair_singular_edge(
    mesh: &QuadMesh,
    normals: &[Vector3<f64>],
    (a, b): (u32, u32),
    uses: &[(u32, u8)],
) -> Vec<((u32, u8), (u32, u8))> {
    let pa = mesh.vertices[a as usize];
    let pb = mesh.vertices[b as usize];
    let axis = {
        let d = pb - pa;
        let n = d.norm();
        if n > 0.0 {
            d / n
        } else {
            Vector3::z()
        }
    };
    // Deterministic basis perpendicular to the edge.
    let helper = if axis.x.abs() <= axis.y.abs() && axis.x.abs() <= axis.z.abs() {
        Vector3::x()
    } else if axis.y.abs() <= axis.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = {
        let v = helper.cross(&axis);
        v / v.norm()
    };
    let e2 = axis.cross(&e1);

    // In-plane direction from the edge toward each face, its angle, and the
    // direction the face traverses the edge (true = a→b).
    struct Wing {
        use_: (u32, u8),
        tangent: Vector3<f64>,
        theta: f64,
        forward: bool,
    }
    let mut wings: Vec<Wing> = uses
        .iter()
        .map(|&(f, s)| {
            let q = &mesh.quads[f as usize];
            let mut centroid = Vector3::zeros();
            for &vid in q.iter() {
                centroid += mesh.vertices[vid as usize].coords;
            }
            centroid /= 4.0;
            let rel = centroid - pa.coords;
            let t = rel - axis * rel.dot(&axis);
            let tn = t.norm();
            let tangent = if tn > 0.0 { t / tn } else { Vector3::zeros() };
            Wing {
                use_: (f, s),
                tangent,
                theta: tangent.dot(&e2).atan2(tangent.dot(&e1)),
                forward: q[s as usize] == a,
            }
        })
        .collect();
    wings.sort_by(|x, y| {
        x.theta
            .partial_cmp(&y.theta)
            .unwrap()
            .then(x.use_.0.cmp(&y.use_.0))
    });

    let m = wings.len();
    // A pairing candidate: its total angular score plus the matched
    // (quad, slot) pairs it would seam together.
    type Pairing = (f64, Vec<((u32, u8), (u32, u8))>);
    let candidate = |offset: usize| -> Option<Pairing> {
        let mut score = 0.0;
        let mut pairs = Vec::with_capacity(m / 2);
        for p in 0..m / 2 {
            let i = (2 * p + offset) % m;
            let j = (2 * p + 1 + offset) % m;
            let (wi, wj) = (&wings[i], &wings[j]);
            if wi.forward == wj.forward {
                return None; // both traverse the edge the same way
            }
            let (ni, nj) = (normals[wi.use_.0 as usize], normals[wj.use_.0 as usize]);
            score -= ni.dot(&wj.tangent) + nj.dot(&wi.tangent);
            pairs.push((wi.use_, wj.use_));
        }
        Some((score, pairs))
    };
    match (candidate(0), candidate(1)) {
        (Some((s0, p0)), Some((s1, p1))) => {
            if s1 > s0 {
                p1
            } else {
                p0
            }
        }
        (Some((_, p0)), None) => p0,
        (None, Some((_, p1))) => p1,
        (None, None) => {
            // No orientation-consistent alternating pairing; keep the
            // angular one so the vertex pass can still separate fans.
            (0..m / 2)
                .map(|p| (wings[2 * p].use_, wings[2 * p + 1].use_))
                .collect()
        }
    }
}
