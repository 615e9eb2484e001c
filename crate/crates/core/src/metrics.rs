//! Surface-error measurement, storage accounting, and a node-sign-only
//! contouring baseline.
//!
//! [`surface_distance`] samples one mesh uniformly by area (vertices plus a
//! stratified barycentric lattice per triangle) and measures each point's
//! exact distance to the other mesh through a bounding-box tree, reporting
//! the maximum and the area-weighted mean. [`memory_report`] gives the
//! deterministic byte accounting of a sampled solid together with per-axis
//! layer histograms.

use nalgebra::Point3;
use rayon::prelude::*;

use crate::contour::{contour_reference, ContourError};
use crate::mesh::TriangleMesh;
use crate::sample::{stats, Ldni, LdniSolid, LdniStats};

/// How the distances in an [`ErrorReport`] are scaled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Raw model units.
    Absolute,
    /// Distances divided by a bounding-box diagonal.
    BBoxDiagonal,
}

/// Result of a surface-distance measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    /// Largest sampled surface distance.
    pub e_max: f64,
    /// Area-weighted mean surface distance.
    pub e_mean: f64,
    /// Number of sample points measured.
    pub sample_count: u64,
    /// Scaling of `e_max` and `e_mean`.
    pub normalization: Normalization,
}

impl ErrorReport {
    /// Re-expresses the distances as fractions of the given bounding-box
    /// diagonal.
    #[inline]
    pub fn bbox_normalized(self, diagonal: f64) -> ErrorReport {
        ErrorReport {
            e_max: self.e_max / diagonal,
            e_mean: self.e_mean / diagonal,
            sample_count: self.sample_count,
            normalization: Normalization::BBoxDiagonal,
        }
    }
}

/// Measurement failures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetricsError {
    /// The sampled mesh has no positive-area triangles to sample.
    EmptyMesh,
}

impl std::fmt::Display for MetricsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricsError::EmptyMesh => {
                write!(f, "mesh has no positive-area triangles to sample")
            }
        }
    }
}

impl std::error::Error for MetricsError {}

/// Diagonal length of a mesh's axis-aligned bounding box.
pub fn bbox_diagonal(mesh: &TriangleMesh) -> f64 {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in mesh.vertices() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

/// Squared distance from `p` to the closed triangle `(a, b, c)`.
fn point_triangle_distance2(p: Point3<f64>, a: Point3<f64>, b: Point3<f64>, c: Point3<f64>) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm_squared();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm_squared();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm_squared();
    }
    let denom = va + vb + vc;
    if denom > 0.0 {
        let v = vb / denom;
        let w = vc / denom;
        let d = (ap - ab * v - ac * w).norm_squared();
        if d.is_finite() {
            return d;
        }
    }
    // Degenerate (zero-area) triangle: fall back to its edges.
    let seg = |p: Point3<f64>, a: Point3<f64>, b: Point3<f64>| {
        let ab = b - a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 {
            ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (p - (a + ab * t)).norm_squared()
    };
    seg(p, a, b).min(seg(p, b, c)).min(seg(p, c, a))
}

/// Bounding-box tree over a mesh's triangles for nearest-distance queries.
struct TriangleIndex {
    nodes: Vec<IndexNode>,
    tris: Vec<[Point3<f64>; 3]>,
}

struct IndexNode {
    lo: Point3<f64>,
    hi: Point3<f64>,
    /// Child node ids, or `u32::MAX` markers on leaves.
    children: (u32, u32),
    /// Triangle range for leaves.
    range: (u32, u32),
}

const LEAF_SIZE: usize = 8;

impl TriangleIndex {
    fn new(mesh: &TriangleMesh) -> TriangleIndex {
        let mut tris: Vec<[Point3<f64>; 3]> = (0..mesh.faces().len())
            .map(|fi| mesh.face_points(fi as u32))
            .collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            let n = tris.len();
            Self::build(&mut nodes, &mut tris, 0, n);
        }
        TriangleIndex { nodes, tris }
    }

    /// Builds the subtree over `tris[start..end]`, returning its node id.
    fn build(
        nodes: &mut Vec<IndexNode>,
        tris: &mut [[Point3<f64>; 3]],
        start: usize,
        end: usize,
    ) -> u32 {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for t in &tris[start..end] {
            for p in t {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
        }
        let id = nodes.len() as u32;
        nodes.push(IndexNode {
            lo,
            hi,
            children: (u32::MAX, u32::MAX),
            range: (start as u32, end as u32),
        });
        if end - start > LEAF_SIZE {
            let extent = hi - lo;
            let axis = extent.imax();
            let mid = (start + end) / 2;
            tris[start..end].select_nth_unstable_by(mid - start, |a, b| {
                let ca = a[0][axis] + a[1][axis] + a[2][axis];
                let cb = b[0][axis] + b[1][axis] + b[2][axis];
                ca.partial_cmp(&cb).unwrap()
            });
            let left = Self::build(nodes, tris, start, mid);
            let right = Self::build(nodes, tris, mid, end);
            nodes[id as usize].children = (left, right);
        }
        id
    }

    /// Squared distance from `p` to the node's bounding box.
    fn box_distance2(&self, id: u32, p: Point3<f64>) -> f64 {
        let node = &self.nodes[id as usize];
        let mut d2 = 0.0;
        for k in 0..3 {
            let gap = (node.lo[k] - p[k]).max(p[k] - node.hi[k]).max(0.0);
            d2 += gap * gap;
        }
        d2
    }

    /// Distance from `p` to the nearest point of any indexed triangle.
    fn distance(&self, p: Point3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            if self.box_distance2(id, p) >= best {
                continue;
            }
            let node = &self.nodes[id as usize];
            if node.children.0 == u32::MAX {
                for t in &self.tris[node.range.0 as usize..node.range.1 as usize] {
                    best = best.min(point_triangle_distance2(p, t[0], t[1], t[2]));
                }
            } else {
                // Visit the nearer child first for tighter pruning.
                let (a, b) = node.children;
                if self.box_distance2(a, p) <= self.box_distance2(b, p) {
                    stack.push(b);
                    stack.push(a);
                } else {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        best.sqrt()
    }
}

/// One-sided surface distance from `from` to `to`.
///
/// Sample points are the vertices of `from` plus, on every positive-area
/// triangle, a stratified interior lattice of roughly
/// `area × samples_per_area` points. Each point's exact distance to the
/// nearest triangle of `to` enters `e_max`; the interior points also enter
/// the area-weighted `e_mean`. Fails with [`MetricsError::EmptyMesh`] when
/// `from` has no positive-area triangle to spread samples over.
pub fn surface_distance(
    from: &TriangleMesh,
    to: &TriangleMesh,
    samples_per_area: f64,
) -> Result<ErrorReport, MetricsError> {
    let index = TriangleIndex::new(to);
    if index.tris.is_empty() {
        return Err(MetricsError::EmptyMesh);
    }

    // Per-triangle maximum, weighted sum, weight, and point count, reduced
    // in face order so the result does not depend on thread scheduling.
    let per_face: Vec<(f64, f64, f64, u64)> = (0..from.faces().len() as u32)
        .into_par_iter()
        .map(|fi| {
            let [a, b, c] = from.face_points(fi);
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            // Degenerate faces (zero area, or NaN from infinite coordinates)
            // contribute no sample points.
            if area.is_nan() || area <= 0.0 {
                return (0.0, 0.0, 0.0, 0);
            }
            let wanted = (area * samples_per_area).ceil().max(1.0) as usize;
            let mut level = 1usize;
            while level * (level + 1) / 2 < wanted {
                level += 1;
            }
            let count = level * (level + 1) / 2;
            let weight = area / count as f64;
            let mut max_d = 0.0f64;
            let mut sum = 0.0f64;
            for i in 0..level {
                for j in 0..level - i {
                    let u = (i as f64 + 1.0 / 3.0) / level as f64;
                    let v = (j as f64 + 1.0 / 3.0) / level as f64;
                    let p = a + (b - a) * u + (c - a) * v;
                    let d = index.distance(p);
                    max_d = max_d.max(d);
                    sum += d;
                }
            }
            (max_d, sum * weight, area, count as u64)
        })
        .collect();

    let vertex_max: Vec<f64> = from
        .vertices()
        .par_iter()
        .map(|&p| index.distance(p))
        .collect();

    let mut e_max = 0.0f64;
    let mut weighted = 0.0f64;
    let mut total_area = 0.0f64;
    let mut count = from.vertices().len() as u64;
    for &(m, s, w, n) in &per_face {
        e_max = e_max.max(m);
        weighted += s;
        total_area += w;
        count += n;
    }
    for &d in &vertex_max {
        e_max = e_max.max(d);
    }
    if total_area <= 0.0 {
        return Err(MetricsError::EmptyMesh);
    }
    Ok(ErrorReport {
        e_max,
        e_mean: weighted / total_area,
        sample_count: count,
        normalization: Normalization::Absolute,
    })
}

/// Symmetric surface distance: the field-wise combination of both one-sided
/// measurements (largest `e_max`, mean of the two `e_mean`s).
pub fn symmetric_surface_distance(
    a: &TriangleMesh,
    b: &TriangleMesh,
    samples_per_area: f64,
) -> Result<ErrorReport, MetricsError> {
    let ab = surface_distance(a, b, samples_per_area)?;
    let ba = surface_distance(b, a, samples_per_area)?;
    Ok(ErrorReport {
        e_max: ab.e_max.max(ba.e_max),
        e_mean: 0.5 * (ab.e_mean + ba.e_mean),
        sample_count: ab.sample_count + ba.sample_count,
        normalization: Normalization::Absolute,
    })
}

/// Storage accounting for a sampled solid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemoryReport {
    /// Sample totals and the byte estimate.
    pub stats: LdniStats,
    /// `layer_histogram[axis][n]` = number of pixel columns holding exactly
    /// `n` samples along that axis.
    pub layer_histogram: [Vec<usize>; 3],
}

/// Computes [`MemoryReport`] for a solid: deterministic byte accounting
/// (4 depth bytes per sample plus 12 or 3 normal bytes, plus a 4-byte count
/// per nonempty column) and the per-axis layer histograms.
pub fn memory_report(solid: &LdniSolid) -> MemoryReport {
    let histogram = |image: &Ldni| {
        let w = image.resolution();
        let mut hist = vec![0usize; image.max_layers() as usize + 1];
        for v in 0..w {
            for u in 0..w {
                hist[image.column(u, v).len()] += 1;
            }
        }
        hist
    };
    let images = solid.images();
    MemoryReport {
        stats: stats(solid),
        layer_histogram: [
            histogram(&images[0]),
            histogram(&images[1]),
            histogram(&images[2]),
        ],
    }
}

/// Contours using grid-node signs only: crossings whose end nodes agree in
/// sign are dropped instead of kept in pairs. A measurement baseline that
/// shows what the paired-crossing rule preserves (thin structures vanish
/// here); on solids without such crossings it matches [`crate::contour`]
/// exactly.
pub fn reference_gridnode_contour(solid: &LdniSolid) -> Result<TriangleMesh, ContourError> {
    contour_reference(solid)
}
