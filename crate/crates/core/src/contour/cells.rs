//! Per-cell vertex clustering and placement.
//!
//! A cell is the cube between eight adjacent grid nodes. Its outside
//! corners are partitioned into components connected by empty edges
//! (flood-fill); each component becomes one mesh vertex, so a cell crossed
//! by a thin structure contributes a vertex per side instead of collapsing
//! the two sheets into one. Vertices with Hermite data are placed by
//! minimizing the quadratic error of the sampled tangent planes, which
//! reproduces sharp edges and corners; the rest start at their corner
//! centroid and are positioned later by smoothing.

use nalgebra::{Matrix3, Point3, Vector3};
use rayon::prelude::*;
use std::collections::{BTreeSet, HashMap};

use super::{CellEdgeRecord, EdgeClass, NodeSignField};
use crate::geom::Axis;
use crate::grid::GridSpec;
use crate::sample::Membership;

/// Offsets `(dx, dy, dz)` of cell corner `index`: `index = dx + 2dy + 4dz`.
#[inline]
pub(crate) fn corner_offsets(index: u8) -> (u32, u32, u32) {
    (
        (index & 1) as u32,
        ((index >> 1) & 1) as u32,
        ((index >> 2) & 1) as u32,
    )
}

/// Layout of the cell's 12 edges in canonical order: edge `e` runs along
/// `axis` with cross-axis corner offsets `(d1, d2)`, where
/// `e = 4 * axis + 2 * d2 + d1`.
#[inline]
pub(crate) fn cell_edge_layout(e: usize) -> (Axis, u32, u32) {
    let axis = crate::geom::AXES[e / 4];
    ((axis), (e as u32 & 1), (e as u32 >> 1) & 1)
}

/// Corner indices of the lower and upper end of cell edge `(axis, d1, d2)`.
#[inline]
pub(crate) fn edge_corner_indices(axis: Axis, d1: u32, d2: u32) -> (u8, u8) {
    let (c1, c2) = axis.cross_axes();
    let mut off = [0u32; 3];
    off[c1.index()] = d1;
    off[c2.index()] = d2;
    let lower = (off[0] + 2 * off[1] + 4 * off[2]) as u8;
    off[axis.index()] = 1;
    let upper = (off[0] + 2 * off[1] + 4 * off[2]) as u8;
    (lower, upper)
}

/// One flooded component of a cell's outside corners, with the Hermite
/// data gathered from its incident crossing edges.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexCluster {
    /// Member corner indices, ascending.
    pub corners: Vec<u8>,
    /// Crossing points and unit normals from incident intersect and
    /// complex edges.
    pub hermite: Vec<(Point3<f64>, Vector3<f64>)>,
}

/// World position of a regularized sample on its edge's pixel ray.
fn sample_position(grid: &GridSpec, rec: &CellEdgeRecord, depth: f32) -> Point3<f64> {
    let (cu, cv) = grid.ray_uv(rec.axis, rec.u, rec.v);
    rec.axis
        .unproject(grid.origin[rec.axis.index()] + depth as f64, cu, cv)
}

/// Partition a cell's outside corners into empty-edge-connected clusters
/// and distribute the Hermite data of its crossing edges among them.
///
/// `edges` holds the cell's 12 edge records in canonical order (see
/// [`cell_edge_layout`]); `None` means an empty edge. Intersect-edge
/// samples go to the cluster holding the edge's outside corner; each
/// complex-edge sample goes to the cluster holding its nearer end corner
/// (when that corner is outside). Clusters are returned ordered by their
/// smallest corner index.
pub fn cluster_cell_nodes(
    grid: &GridSpec,
    cell: (u32, u32, u32),
    corner_signs: [Membership; 8],
    edges: [Option<&CellEdgeRecord>; 12],
) -> Vec<VertexCluster> {
    let _ = cell;
    let mut parent: [u8; 8] = [0, 1, 2, 3, 4, 5, 6, 7];
    fn find(parent: &mut [u8; 8], x: u8) -> u8 {
        let mut r = x;
        while parent[r as usize] != r {
            r = parent[r as usize];
        }
        let mut c = x;
        while parent[c as usize] != r {
            let next = parent[c as usize];
            parent[c as usize] = r;
            c = next;
        }
        r
    }

    for (e, rec) in edges.iter().enumerate() {
        let (axis, d1, d2) = cell_edge_layout(e);
        let (lo, hi) = edge_corner_indices(axis, d1, d2);
        let complex = matches!(rec.map(|r| r.class), Some(EdgeClass::Complex));
        if corner_signs[lo as usize] == Membership::Outside
            && corner_signs[hi as usize] == Membership::Outside
            && !complex
        {
            let (ra, rb) = (find(&mut parent, lo), find(&mut parent, hi));
            if ra != rb {
                parent[ra.max(rb) as usize] = ra.min(rb);
            }
        }
    }

    let mut clusters: Vec<VertexCluster> = Vec::new();
    let mut cluster_of_root: [Option<u8>; 8] = [None; 8];
    for c in 0..8u8 {
        if corner_signs[c as usize] != Membership::Outside {
            continue;
        }
        let root = find(&mut parent, c);
        match cluster_of_root[root as usize] {
            Some(ci) => clusters[ci as usize].corners.push(c),
            None => {
                cluster_of_root[root as usize] = Some(clusters.len() as u8);
                clusters.push(VertexCluster {
                    corners: vec![c],
                    hermite: Vec::new(),
                });
            }
        }
    }

    for (e, rec) in edges.iter().enumerate() {
        let Some(rec) = rec else { continue };
        let (axis, d1, d2) = cell_edge_layout(e);
        let (lo, hi) = edge_corner_indices(axis, d1, d2);
        let mut assign = |corner: u8, sample_idx: usize, parent: &mut [u8; 8]| {
            if corner_signs[corner as usize] != Membership::Outside {
                return;
            }
            let root = find(parent, corner);
            let ci = cluster_of_root[root as usize].expect("outside corner has a cluster");
            let s = rec.kept[sample_idx];
            let p = sample_position(grid, rec, s.depth);
            clusters[ci as usize]
                .hermite
                .push((p, s.normal.cast::<f64>()));
        };
        match rec.class {
            EdgeClass::Intersect => {
                let corner = if corner_signs[lo as usize] == Membership::Outside {
                    lo
                } else {
                    hi
                };
                assign(corner, 0, &mut parent);
            }
            EdgeClass::Complex => {
                assign(lo, 0, &mut parent);
                assign(hi, 1, &mut parent);
            }
            EdgeClass::NoneIntersect | EdgeClass::Empty => {}
        }
    }
    clusters
}

/// Place a cluster's vertex by minimizing `Σ (nᵢ · (x − pᵢ))²` over its
/// Hermite data, clamped to the closed cell box.
///
/// The quadratic form is solved relative to the Hermite centroid through
/// an eigendecomposition; eigenvalues below a tenth of the largest are
/// truncated, so rank-deficient configurations (a face, an edge) pick the
/// centroid-nearest point of their solution set instead of shooting off
/// along the unconstrained direction.
pub fn place_vertex(
    cluster: &VertexCluster,
    cell_lo: &Point3<f64>,
    cell_hi: &Point3<f64>,
) -> Point3<f64> {
    debug_assert!(
        !cluster.hermite.is_empty(),
        "clusters without Hermite data are smoothed"
    );
    if cluster.hermite.is_empty() {
        return nalgebra::center(cell_lo, cell_hi);
    }
    let mut centroid = Vector3::zeros();
    for (p, _) in &cluster.hermite {
        centroid += p.coords;
    }
    centroid /= cluster.hermite.len() as f64;

    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (p, n) in &cluster.hermite {
        ata += n * n.transpose();
        atb += n * n.dot(&(p.coords - centroid));
    }
    let eig = ata.symmetric_eigen();
    let lambda_max = eig.eigenvalues.amax();
    let mut x = Vector3::zeros();
    if lambda_max > 0.0 {
        for i in 0..3 {
            let lambda = eig.eigenvalues[i];
            if lambda > 0.1 * lambda_max {
                let v = eig.eigenvectors.column(i);
                x += v * (v.dot(&atb) / lambda);
            }
        }
    }
    let p = centroid + x;
    Point3::new(
        p.x.clamp(cell_lo.x, cell_hi.x),
        p.y.clamp(cell_lo.y, cell_hi.y),
        p.z.clamp(cell_lo.z, cell_hi.z),
    )
}

/// All placed cluster vertices of a solid, addressable by cell and corner.
#[derive(Clone, Debug)]
pub struct ClusterField {
    resolution: u32,
    /// Per active cell: vertex id claimed by each of the 8 corners
    /// (`u32::MAX` where the corner is inside or the cell is inactive).
    cells: HashMap<(u32, u32, u32), [u32; 8]>,
    /// Vertex positions, in lexicographic (cell, cluster) order.
    pub vertices: Vec<Point3<f64>>,
    /// Whether each vertex was QEF-placed (`true`) or awaits smoothing.
    pub constrained: Vec<bool>,
}

impl ClusterField {
    /// Vertex claimed by `corner` of `cell`, if any.
    #[inline]
    pub fn vertex_at(&self, cell: (u32, u32, u32), corner: u8) -> Option<u32> {
        let id = *self.cells.get(&cell)?.get(corner as usize)?;
        (id != u32::MAX).then_some(id)
    }

    /// Number of active (clustered) cells.
    #[inline]
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Lattice resolution the field was built at.
    #[inline]
    pub fn resolution(&self) -> u32 {
        self.resolution
    }
}

/// Cluster and place vertices for every cell incident to a non-empty edge.
///
/// Cells whose 12 edges are all empty get no clusters; nothing references
/// them. Vertex ids are assigned in lexicographic cell order, so the field
/// is identical regardless of worker count.
pub fn build_cluster_field(
    grid: &GridSpec,
    signs: &NodeSignField,
    records: &[CellEdgeRecord],
) -> ClusterField {
    let w = grid.resolution;
    let mut by_edge: HashMap<(u8, u32, u32, u32), &CellEdgeRecord> = HashMap::new();
    let mut active: BTreeSet<(u32, u32, u32)> = BTreeSet::new();
    for rec in records {
        if rec.class == EdgeClass::Empty {
            continue;
        }
        by_edge.insert((rec.axis.index() as u8, rec.u, rec.v, rec.slot), rec);
        let (c1, c2) = rec.axis.cross_axes();
        for (du, dv) in [(-1i64, -1i64), (0, -1), (0, 0), (-1, 0)] {
            let cu = rec.u as i64 + du;
            let cv = rec.v as i64 + dv;
            if cu < 0 || cv < 0 || cu > (w - 2) as i64 || cv > (w - 2) as i64 {
                continue;
            }
            let mut ids = [0u32; 3];
            ids[rec.axis.index()] = rec.slot;
            ids[c1.index()] = cu as u32;
            ids[c2.index()] = cv as u32;
            active.insert((ids[0], ids[1], ids[2]));
        }
    }

    // One placed cluster: the cell corners it owns, its vertex position, and
    // whether that position came from Hermite data (`true`) or a corner mean.
    type PlacedCluster = (Vec<u8>, Point3<f64>, bool);
    let active: Vec<(u32, u32, u32)> = active.into_iter().collect();
    let placed: Vec<Vec<PlacedCluster>> = active
        .par_iter()
        .map(|&cell| {
            let (ci, cj, ck) = cell;
            let mut corner_signs = [Membership::Outside; 8];
            for (c, sign) in corner_signs.iter_mut().enumerate() {
                let (dx, dy, dz) = corner_offsets(c as u8);
                *sign = signs.membership(ci + dx, cj + dy, ck + dz);
            }
            let mut edges: [Option<&CellEdgeRecord>; 12] = [None; 12];
            for (e, slot) in edges.iter_mut().enumerate() {
                let (axis, d1, d2) = cell_edge_layout(e);
                let (a1, a2) = axis.cross_axes();
                let ids = [ci, cj, ck];
                let u = ids[a1.index()] + d1;
                let v = ids[a2.index()] + d2;
                let t = ids[axis.index()];
                *slot = by_edge.get(&(axis.index() as u8, u, v, t)).copied();
            }
            let cell_lo = grid.node_position(ci, cj, ck);
            let cell_hi = grid.node_position(ci + 1, cj + 1, ck + 1);
            cluster_cell_nodes(grid, cell, corner_signs, edges)
                .into_iter()
                .map(|cl| {
                    if cl.hermite.is_empty() {
                        let mut c = Vector3::zeros();
                        for &corner in &cl.corners {
                            let (dx, dy, dz) = corner_offsets(corner);
                            c += grid.node_position(ci + dx, cj + dy, ck + dz).coords;
                        }
                        c /= cl.corners.len() as f64;
                        (cl.corners, Point3::from(c), false)
                    } else {
                        let p = place_vertex(&cl, &cell_lo, &cell_hi);
                        (cl.corners, p, true)
                    }
                })
                .collect()
        })
        .collect();

    let mut field = ClusterField {
        resolution: w,
        cells: HashMap::with_capacity(active.len()),
        vertices: Vec::new(),
        constrained: Vec::new(),
    };
    for (cell, clusters) in active.into_iter().zip(placed) {
        let mut corner_map = [u32::MAX; 8];
        for (corners, pos, constrained) in clusters {
            let id = field.vertices.len() as u32;
            field.vertices.push(pos);
            field.constrained.push(constrained);
            for c in corners {
                corner_map[c as usize] = id;
            }
        }
        field.cells.insert(cell, corner_map);
    }
    field
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::HermiteSample;

    const OUT: Membership = Membership::Outside;
    const IN: Membership = Membership::Inside;

    fn grid8() -> GridSpec {
        GridSpec::new(Point3::origin(), 1.0, 8).unwrap()
    }

    fn complex_record(axis: Axis, u: u32, v: u32, slot: u32, d0: f32, d1: f32) -> CellEdgeRecord {
        let s0 = HermiteSample::accurate(d0, -axis.unit().cast::<f32>());
        let s1 = HermiteSample::accurate(d1, axis.unit().cast::<f32>());
        CellEdgeRecord {
            axis,
            u,
            v,
            slot,
            end_signs: (OUT, OUT),
            raw_samples: vec![s0, s1],
            class: EdgeClass::Complex,
            kept: vec![s0, s1],
        }
    }

    fn intersect_record(
        axis: Axis,
        u: u32,
        v: u32,
        slot: u32,
        depth: f32,
        sign: f32,
        ends: (Membership, Membership),
    ) -> CellEdgeRecord {
        let s = HermiteSample::accurate(depth, axis.unit().cast::<f32>() * sign);
        CellEdgeRecord {
            axis,
            u,
            v,
            slot,
            end_signs: ends,
            raw_samples: vec![s],
            class: EdgeClass::Intersect,
            kept: vec![s],
        }
    }

    #[test]
    fn empty_cell_floods_to_a_single_cluster() {
        let grid = grid8();
        let clusters = cluster_cell_nodes(&grid, (3, 3, 3), [OUT; 8], [None; 12]);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].corners, (0..8).collect::<Vec<u8>>());
        assert!(clusters[0].hermite.is_empty());
    }

    #[test]
    fn thin_plate_cell_splits_into_two_clusters_with_four_hermite_points_each() {
        // Four parallel complex z-edges: corners 0–3 below the plate,
        // 4–7 above it.
        let grid = grid8();
        let cell = (3, 3, 3);
        let d = grid.pixel_width();
        let mid = (grid.node_depth(3) + grid.node_depth(4)) / 2.0;
        let (lo_d, hi_d) = ((mid - 0.2 * d) as f32, (mid + 0.2 * d) as f32);
        let mut edges: [Option<&CellEdgeRecord>; 12] = [None; 12];
        let recs: Vec<CellEdgeRecord> = (0..4)
            .map(|i| complex_record(Axis::Z, 3 + (i & 1), 3 + (i >> 1), 3, lo_d, hi_d))
            .collect();
        // Z-edges occupy canonical slots 8..12 with (d1, d2) = (dx, dy).
        for (i, r) in recs.iter().enumerate() {
            edges[8 + i] = Some(r);
        }
        let clusters = cluster_cell_nodes(&grid, cell, [OUT; 8], edges);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].corners, vec![0, 1, 2, 3]);
        assert_eq!(clusters[1].corners, vec![4, 5, 6, 7]);
        for (ci, z) in [(0usize, lo_d as f64), (1, hi_d as f64)] {
            assert_eq!(clusters[ci].hermite.len(), 4);
            for (p, n) in &clusters[ci].hermite {
                assert!((p.z - z).abs() < 1e-7);
                assert_eq!(n.z.signum(), if ci == 0 { -1.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn half_inside_cell_keeps_one_cluster_of_the_outside_corners() {
        // Bottom four corners inside, top four outside, four intersect
        // z-edges: the classic marching-cubes configuration.
        let grid = grid8();
        let mut signs = [IN; 8];
        signs[4..].fill(OUT);
        let depth = grid.node_depth(3) as f32 + 0.02;
        let recs: Vec<CellEdgeRecord> = (0..4)
            .map(|i| intersect_record(Axis::Z, 3 + (i & 1), 3 + (i >> 1), 3, depth, 1.0, (IN, OUT)))
            .collect();
        let mut edges: [Option<&CellEdgeRecord>; 12] = [None; 12];
        for (i, r) in recs.iter().enumerate() {
            edges[8 + i] = Some(r);
        }
        let clusters = cluster_cell_nodes(&grid, (3, 3, 3), signs, edges);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].corners, vec![4, 5, 6, 7]);
        assert_eq!(clusters[0].hermite.len(), 4);
    }

    #[test]
    fn checkerboard_cell_yields_four_isolated_clusters() {
        let grid = grid8();
        let mut signs = [OUT; 8];
        for c in 0..8u8 {
            let (dx, dy, dz) = corner_offsets(c);
            if (dx + dy + dz) % 2 == 0 {
                signs[c as usize] = IN;
            }
        }
        // Every edge changes sign; no empty edges, so no flooding at all.
        let mut records = Vec::new();
        for e in 0..12 {
            let (axis, d1, d2) = cell_edge_layout(e);
            let (a1, a2) = axis.cross_axes();
            let mut ids = [3u32; 3];
            ids[a1.index()] += d1;
            ids[a2.index()] += d2;
            let (lo, _) = edge_corner_indices(axis, d1, d2);
            let entering = signs[lo as usize] == OUT;
            let depth = grid.node_depth(3) as f32 + 0.03;
            records.push(intersect_record(
                axis,
                ids[a1.index()],
                ids[a2.index()],
                3,
                depth,
                if entering { -1.0 } else { 1.0 },
                if entering { (OUT, IN) } else { (IN, OUT) },
            ));
        }
        let mut edges: [Option<&CellEdgeRecord>; 12] = [None; 12];
        for (e, r) in records.iter().enumerate() {
            edges[e] = Some(r);
        }
        let clusters = cluster_cell_nodes(&grid, (3, 3, 3), signs, edges);
        assert_eq!(clusters.len(), 4);
        for cl in &clusters {
            assert_eq!(cl.corners.len(), 1);
            assert_eq!(cl.hermite.len(), 3, "each outside corner ends three edges");
        }
    }

    fn cluster_from(hermite: Vec<(Point3<f64>, Vector3<f64>)>) -> VertexCluster {
        VertexCluster {
            corners: vec![0],
            hermite,
        }
    }

    #[test]
    fn three_orthogonal_planes_reconstruct_their_corner() {
        let cl = cluster_from(vec![
            (Point3::new(0.3, 0.5, 0.5), Vector3::x()),
            (Point3::new(0.5, 0.7, 0.5), Vector3::y()),
            (Point3::new(0.5, 0.5, 0.2), Vector3::z()),
        ]);
        let p = place_vertex(&cl, &Point3::origin(), &Point3::new(1.0, 1.0, 1.0));
        assert!((p - Point3::new(0.3, 0.7, 0.2)).norm() < 1e-12);
    }

    #[test]
    fn coplanar_data_projects_the_centroid_onto_the_plane() {
        let n = Vector3::z();
        let cl = cluster_from(vec![
            (Point3::new(0.1, 0.2, 0.4), n),
            (Point3::new(0.8, 0.3, 0.4), n),
            (Point3::new(0.4, 0.9, 0.4), n),
        ]);
        let p = place_vertex(&cl, &Point3::origin(), &Point3::new(1.0, 1.0, 1.0));
        assert!((p.x - (0.1 + 0.8 + 0.4) / 3.0).abs() < 1e-12);
        assert!((p.y - (0.2 + 0.3 + 0.9) / 3.0).abs() < 1e-12);
        assert!((p.z - 0.4).abs() < 1e-12);
    }

    #[test]
    fn two_planes_reconstruct_a_point_on_their_intersection_line() {
        let cl = cluster_from(vec![
            (Point3::new(0.4, 0.1, 0.3), Vector3::x()),
            (Point3::new(0.4, 0.9, 0.6), Vector3::x()),
            (Point3::new(0.2, 0.7, 0.5), Vector3::y()),
            (Point3::new(0.9, 0.7, 0.1), Vector3::y()),
        ]);
        let p = place_vertex(&cl, &Point3::origin(), &Point3::new(1.0, 1.0, 1.0));
        assert!((p.x - 0.4).abs() < 1e-9, "{p}");
        assert!((p.y - 0.7).abs() < 1e-9, "{p}");
        assert!((0.0..=1.0).contains(&p.z));
    }

    #[test]
    fn solutions_outside_the_cell_are_clamped_to_it() {
        let cl = cluster_from(vec![(Point3::new(1.4, 0.5, 0.5), Vector3::x())]);
        let p = place_vertex(&cl, &Point3::origin(), &Point3::new(1.0, 1.0, 1.0));
        assert_eq!(p.x, 1.0);
    }
}
