//! Contouring: convert a sampled solid into a closed, consistently oriented
//! two-manifold triangle mesh.
//!
//! The pipeline is a Hermite-data dual-contouring variant driven entirely by
//! the three depth-normal images:
//!
//! 1. classify every grid node inside/outside by majority vote of the three
//!    images ([`build_node_signs`]);
//! 2. classify every grid edge from its end signs and the samples on its
//!    interval, regularizing the samples to at most two per edge
//!    ([`classify_and_regularize_edges`]);
//! 3. in every cell, cluster the outside corners into components connected
//!    by sample-free edges and place one vertex per cluster by minimizing
//!    the quadratic error of its Hermite data ([`cluster_cell_nodes`],
//!    [`place_vertex`]);
//! 4. emit one quad per sign-crossing edge and two per double-crossing
//!    ("complex") edge ([`build_quads`]);
//! 5. repair non-manifold edges and vertices ([`fix_nonmanifold`]), relax
//!    the vertices that carried no Hermite data ([`smooth_unconstrained`]),
//!    and split quads into triangles along feature-following diagonals
//!    ([`triangulate`]).
//!
//! Complex edges — edges whose end nodes agree in sign but which carry a
//! pair of crossings — are what preserves structures thinner than a pixel;
//! a node-sign-only contouring discards them (see
//! [`crate::metrics::reference_gridnode_contour`]).

pub mod cells;
pub mod edges;
pub mod finish;
pub mod manifold;
pub mod quads;

use rayon::prelude::*;
use std::fmt;

use crate::geom::{Axis, AXES};
use crate::mesh::TriangleMesh;
use crate::sample::{LdniSolid, Membership};

pub use cells::{
    build_cluster_field, cluster_cell_nodes, place_vertex, ClusterField, VertexCluster,
};
pub use edges::{classify_and_regularize_edges, CellEdgeRecord, EdgeClass};
pub use finish::{smooth_unconstrained, triangulate, SMOOTH_MAX_ITERS};
pub use manifold::fix_nonmanifold;
pub use quads::{build_quads, QuadMesh};

/// Errors from the contouring pipeline.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ContourError {
    /// A quad referenced a cell corner that no cluster claimed — the sign
    /// field and edge records disagree, which valid sampled input cannot
    /// produce.
    MissingCluster { cell: (u32, u32, u32), corner: u8 },
    /// The solid produced no surface (it is empty at this resolution).
    EmptyOutput,
}

impl fmt::Display for ContourError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContourError::MissingCluster { cell, corner } => write!(
                f,
                "no vertex cluster at corner {corner} of cell {cell:?}; edge records and node \
                 signs are inconsistent"
            ),
            ContourError::EmptyOutput => write!(f, "solid is empty; nothing to contour"),
        }
    }
}

impl std::error::Error for ContourError {}

/// Inside/outside classification of every grid node, the w×w×w lattice of
/// pixel-ray intersections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSignField {
    resolution: u32,
    inside: Vec<bool>,
}

impl NodeSignField {
    /// Lattice resolution (nodes per side).
    #[inline]
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    /// Whether node `(i, j, k)` is inside the solid.
    #[inline]
    pub fn is_inside(&self, i: u32, j: u32, k: u32) -> bool {
        let w = self.resolution as usize;
        self.inside[(k as usize * w + j as usize) * w + i as usize]
    }

    /// Node sign as a [`Membership`].
    #[inline]
    pub fn membership(&self, i: u32, j: u32, k: u32) -> Membership {
        if self.is_inside(i, j, k) {
            Membership::Inside
        } else {
            Membership::Outside
        }
    }
}

/// Node ids `(i, j, k)` of the node at depth index `n` on the ray `(u, v)`
/// of image `axis`.
#[inline]
pub(crate) fn compose_node(axis: Axis, u: u32, v: u32, n: u32) -> (u32, u32, u32) {
    let (c1, c2) = axis.cross_axes();
    let mut ids = [0u32; 3];
    ids[axis.index()] = n;
    ids[c1.index()] = u;
    ids[c2.index()] = v;
    (ids[0], ids[1], ids[2])
}

/// Classify every grid node by majority vote of the three images: a node is
/// inside when at least two of its three pixel columns contain it in an
/// inside interval (a sample exactly at the node depth counts as outside).
///
/// The result matches [`crate::sample::classify_grid_node`] pointwise.
pub fn build_node_signs(solid: &LdniSolid) -> NodeSignField {
    let grid = solid.grid();
    let w = grid.resolution as usize;

    // Per-axis membership bits in that axis' own column-major layout
    // (column index * w + depth index), each column filled by one walk.
    let mut per_axis: Vec<Vec<bool>> = Vec::with_capacity(3);
    for axis in AXES {
        let img = solid.image(axis);
        let mut bits = vec![false; w * w * w];
        bits.par_chunks_mut(w).enumerate().for_each(|(ci, chunk)| {
            let col = img.column_at(ci);
            let mut cur = 0usize;
            let mut below = 0usize;
            for (n, slot) in chunk.iter_mut().enumerate() {
                let nd = grid.node_depth(n as u32);
                let mut on_node = false;
                while cur < col.len() {
                    let x = col[cur].depth as f64;
                    if x < nd {
                        below += 1;
                        cur += 1;
                    } else {
                        on_node = x == nd;
                        break;
                    }
                }
                *slot = below % 2 == 1 && !on_node;
            }
        });
        per_axis.push(bits);
    }

    let mut inside = vec![false; w * w * w];
    inside
        .par_chunks_mut(w * w)
        .enumerate()
        .for_each(|(k, slab)| {
            for j in 0..w {
                for i in 0..w {
                    let vx = per_axis[0][(k * w + j) * w + i] as u8;
                    let vy = per_axis[1][(i * w + k) * w + j] as u8;
                    let vz = per_axis[2][(j * w + i) * w + k] as u8;
                    slab[j * w + i] = vx + vy + vz >= 2;
                }
            }
        });
    NodeSignField {
        resolution: w as u32,
        inside,
    }
}

fn contour_impl(solid: &LdniSolid, keep_complex: bool) -> Result<TriangleMesh, ContourError> {
    let grid = solid.grid();
    let signs = build_node_signs(solid);
    let mut records = classify_and_regularize_edges(solid, &signs);
    if !keep_complex {
        // Node-sign-only mode: a discarded complex edge behaves exactly like
        // an empty one (its end signs agree), so its corners reconnect.
        records.retain(|r| r.class != EdgeClass::Complex);
    }
    let field = build_cluster_field(grid, &signs, &records);
    let quad_mesh = build_quads(grid, &records, &field)?;
    let quad_mesh = fix_nonmanifold(&quad_mesh);
    let unconstrained: Vec<u32> = quad_mesh
        .constrained
        .iter()
        .enumerate()
        .filter(|(_, &c)| !c)
        .map(|(i, _)| i as u32)
        .collect();
    let quad_mesh = smooth_unconstrained(&quad_mesh, &unconstrained, 1e-6 * grid.pixel_width());
    let (mesh, _degenerate) = triangulate(&quad_mesh)?;
    Ok(mesh)
}

/// Contour a solid into a closed, consistently oriented two-manifold
/// triangle mesh.
pub fn contour(solid: &LdniSolid) -> Result<TriangleMesh, ContourError> {
    contour_impl(solid, true)
}

/// Node-sign-only contouring baseline: identical pipeline but complex edges
/// are treated as empty, so structures thinner than a pixel are lost. Kept
/// for comparison; exposed as [`crate::metrics::reference_gridnode_contour`].
pub(crate) fn contour_reference(solid: &LdniSolid) -> Result<TriangleMesh, ContourError> {
    contour_impl(solid, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg::{boolean_solid, BooleanConfig, BooleanOp};
    use crate::fixtures;
    use crate::grid::GridSpec;
    use crate::mesh::audit_mesh;
    use crate::sample::{classify_grid_node, sample_solid, sample_sphere, Ldni, NormalMode};
    use nalgebra::{Point3, Vector3};

    fn empty_solid(grid: GridSpec) -> LdniSolid {
        let w = grid.resolution as usize;
        let images = [Axis::X, Axis::Y, Axis::Z]
            .map(|a| Ldni::from_columns(a, grid, vec![Vec::new(); w * w]));
        LdniSolid::from_images(grid, NormalMode::Accurate, images).unwrap()
    }

    #[test]
    fn node_signs_match_pointwise_classification() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 16).unwrap();
        let mesh = fixtures::rotated_cube(Point3::new(0.5, 0.5, 0.5), 0.5, 20.0);
        let solid = sample_solid(&mesh, &grid, NormalMode::Accurate).unwrap();
        let signs = build_node_signs(&solid);
        for i in 0..16 {
            for j in 0..16 {
                for k in 0..16 {
                    assert_eq!(
                        signs.is_inside(i, j, k),
                        classify_grid_node(&solid, i, j, k).is_inside(),
                        "node ({i},{j},{k})"
                    );
                }
            }
        }
    }

    #[test]
    fn box_at_w4_has_exactly_the_eight_interior_nodes_inside() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 4).unwrap();
        let mesh = fixtures::axis_box(Point3::new(0.25, 0.25, 0.25), Point3::new(0.75, 0.75, 0.75));
        let solid = sample_solid(&mesh, &grid, NormalMode::Accurate).unwrap();
        let signs = build_node_signs(&solid);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let p = grid.node_position(i, j, k);
                    let want = p.iter().all(|&c| c > 0.25 && c < 0.75);
                    assert_eq!(signs.is_inside(i, j, k), want, "node ({i},{j},{k})");
                }
            }
        }
        assert_eq!((0..64).filter(|n| signs.inside[*n as usize]).count(), 8);
    }

    #[test]
    fn empty_solid_is_all_outside_and_contours_to_an_error() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 8).unwrap();
        let solid = empty_solid(grid);
        let signs = build_node_signs(&solid);
        assert!(signs.inside.iter().all(|&b| !b));
        assert_eq!(contour(&solid).unwrap_err(), ContourError::EmptyOutput);
    }

    #[test]
    fn contoured_box_is_exact_closed_and_axis_aligned() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 16).unwrap();
        let mesh = fixtures::axis_box(Point3::new(0.25, 0.25, 0.25), Point3::new(0.75, 0.75, 0.75));
        let solid = sample_solid(&mesh, &grid, NormalMode::Accurate).unwrap();
        let out = contour(&solid).unwrap();
        let audit = audit_mesh(&out);
        assert!(audit.is_watertight_solid(), "{audit:?}");
        assert_eq!(audit.euler_characteristic, 2);
        // Every Hermite plane is a box face, so the reconstruction is the
        // box itself: volume exact and normals axis-aligned.
        assert!((out.signed_volume() - 0.125).abs() < 1e-9);
        for n in out.face_normals() {
            let m = n.amax();
            assert!(m > 1.0 - 1e-6, "normal {n:?} not axis-aligned");
        }
        for p in out.vertices() {
            let on_face = p
                .iter()
                .any(|&c| (c - 0.25).abs() < 1e-7 || (c - 0.75).abs() < 1e-7);
            assert!(on_face, "{p} lies on no box face");
            for c in p.iter() {
                assert!((0.25 - 1e-7..=0.75 + 1e-7).contains(c));
            }
        }
    }

    #[test]
    fn contoured_sphere_is_genus_zero_within_two_pixels() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 64).unwrap();
        let center = Point3::new(0.5, 0.5, 0.5);
        let solid = sample_sphere(&center, 0.3, &grid, NormalMode::Accurate).unwrap();
        let out = contour(&solid).unwrap();
        let audit = audit_mesh(&out);
        assert!(audit.is_watertight_solid(), "{audit:?}");
        assert_eq!(audit.euler_characteristic, 2);
        let d = grid.pixel_width();
        for p in out.vertices() {
            let dev = ((p - center).norm() - 0.3).abs();
            assert!(dev <= 2.0 * d, "radial deviation {dev} at {p}");
        }
        let vol = out.signed_volume();
        let true_vol = 4.0 / 3.0 * std::f64::consts::PI * 0.3f64.powi(3);
        assert!((vol - true_vol).abs() < 5.0 * d * out.surface_area());
    }

    #[test]
    fn contoured_torus_preserves_genus_one() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 64).unwrap();
        let mesh = fixtures::torus(Point3::new(0.5, 0.5, 0.5), 0.27, 0.11, 64, 32);
        let solid = sample_solid(&mesh, &grid, NormalMode::Accurate).unwrap();
        let out = contour(&solid).unwrap();
        let audit = audit_mesh(&out);
        assert!(audit.is_watertight_solid(), "{audit:?}");
        assert_eq!(audit.euler_characteristic, 0);
    }

    #[test]
    fn thin_plate_keeps_two_sheets_and_reference_mode_loses_them() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 64).unwrap();
        let d = grid.pixel_width();
        let k = 31;
        let plate = fixtures::plate_between_node_planes(&grid, (0.25, 0.25), (0.75, 0.75), k, 0.4);
        let solid = sample_solid(&plate, &grid, NormalMode::Accurate).unwrap();
        let out = contour(&solid).unwrap();
        let audit = audit_mesh(&out);
        assert!(audit.is_watertight_solid(), "{audit:?}");
        assert_eq!(audit.euler_characteristic, 2);

        let z_mid = grid.origin.z + (grid.node_depth(k) + grid.node_depth(k + 1)) / 2.0;
        // Interior vertices (away from the rim) sit on the two faces.
        let (mut lo_z, mut hi_z) = (Vec::new(), Vec::new());
        for p in out.vertices() {
            if p.x > 0.3 && p.x < 0.7 && p.y > 0.3 && p.y < 0.7 {
                if p.z < z_mid {
                    lo_z.push(p.z);
                } else {
                    hi_z.push(p.z);
                }
            }
        }
        assert!(
            !lo_z.is_empty() && !hi_z.is_empty(),
            "both sheets must survive"
        );
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let thickness = mean(&hi_z) - mean(&lo_z);
        assert!(
            (thickness - 0.4 * d).abs() < 0.25 * d,
            "thickness {thickness} vs true {}",
            0.4 * d
        );

        // The node-sign-only baseline sees no sign changes at all.
        assert_eq!(
            contour_reference(&solid).unwrap_err(),
            ContourError::EmptyOutput
        );
    }

    #[test]
    fn reference_mode_is_identical_on_solids_without_complex_edges() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 16).unwrap();
        let mesh = fixtures::axis_box(Point3::new(0.25, 0.25, 0.25), Point3::new(0.75, 0.75, 0.75));
        let solid = sample_solid(&mesh, &grid, NormalMode::Accurate).unwrap();
        let full = contour(&solid).unwrap();
        let baseline = contour_reference(&solid).unwrap();
        assert_eq!(full.vertices(), baseline.vertices());
        assert_eq!(full.faces(), baseline.faces());
    }

    #[test]
    fn crossing_thin_plates_contour_closed_and_manifold() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 32).unwrap();
        let d = grid.pixel_width();
        let plate_z =
            fixtures::plate_between_node_planes(&grid, (0.25, 0.25), (0.75, 0.75), 15, 0.4);
        // The same slab rotated onto y: thin in y, extended in x and z.
        let y_mid = grid.origin.y + (grid.node_depth(15) + grid.node_depth(16)) / 2.0;
        let plate_y = fixtures::axis_box(
            Point3::new(0.25, y_mid - 0.2 * d, 0.25),
            Point3::new(0.75, y_mid + 0.2 * d, 0.75),
        );
        let sz = sample_solid(&plate_z, &grid, NormalMode::Accurate).unwrap();
        let sy = sample_solid(&plate_y, &grid, NormalMode::Accurate).unwrap();
        let uni = boolean_solid(&sz, &sy, BooleanOp::Union, BooleanConfig::default()).unwrap();
        let out = contour(&uni).unwrap();
        let audit = audit_mesh(&out);
        assert!(audit.is_watertight_solid(), "{audit:?}");
        assert_eq!(audit.euler_characteristic, 2);
        assert!(out.signed_volume() > 0.0);
    }

    /// Union of balls of radius `0.3 d` centered at the given grid nodes.
    fn union_of_node_balls(grid: &GridSpec, nodes: &[(u32, u32, u32)]) -> LdniSolid {
        let d = grid.pixel_width();
        let cfg = BooleanConfig::default();
        let mut solid: Option<LdniSolid> = None;
        for &(i, j, k) in nodes {
            let c = grid.node_position(i, j, k);
            let ball = sample_sphere(&c, 0.3 * d, grid, NormalMode::Accurate).unwrap();
            solid = Some(match solid {
                None => ball,
                Some(s) => boolean_solid(&s, &ball, BooleanOp::Union, cfg).unwrap(),
            });
        }
        solid.unwrap()
    }

    #[test]
    fn isolated_node_balls_contour_to_octahedral_shells() {
        // Sub-pixel balls two nodes apart never share a cell, so each one
        // becomes its own shell: 8 cluster vertices (one per surrounding
        // cell), 6 quads (one per crossed cell edge) — an octahedron.
        let grid = GridSpec::new(Point3::origin(), 1.0, 8).unwrap();
        let mut nodes = Vec::new();
        for i in [1, 3, 5] {
            for j in [1, 3, 5] {
                for k in [1, 3, 5] {
                    nodes.push((i, j, k));
                }
            }
        }
        let solid = union_of_node_balls(&grid, &nodes);
        let out = contour(&solid).unwrap();
        let audit = audit_mesh(&out);
        assert!(audit.is_watertight_solid(), "{audit:?}");
        assert_eq!(audit.euler_characteristic, 2 * 27);
        assert_eq!(out.vertices().len(), 8 * 27);
        assert_eq!(out.faces().len(), 2 * 6 * 27);
        assert!(out.signed_volume() > 0.0);
    }

    #[test]
    fn dense_node_checkerboard_contours_to_a_watertight_fused_surface() {
        // Balls at every other grid node: every cell between them has
        // checkerboard corner signs and keeps four separate clusters, one
        // per outside corner. Diagonally adjacent shells then share whole
        // cluster edges, so the contour fuses them into a single connected
        // watertight surface instead of 108 octahedra — the standard
        // dual-contouring resolution of checkerboard data. The Euler
        // characteristic is pinned as a regression value.
        let grid = GridSpec::new(Point3::origin(), 1.0, 8).unwrap();
        let mut nodes = Vec::new();
        for i in 1..7u32 {
            for j in 1..7u32 {
                for k in 1..7u32 {
                    if (i + j + k) % 2 == 0 {
                        nodes.push((i, j, k));
                    }
                }
            }
        }
        assert_eq!(nodes.len(), 108);
        let solid = union_of_node_balls(&grid, &nodes);
        let out = contour(&solid).unwrap();
        let audit = audit_mesh(&out);
        assert!(audit.is_watertight_solid(), "{audit:?}");
        assert_eq!(audit.euler_characteristic, 66);
        // The fused sponge no longer bounds the balls — its signed volume
        // is negative. Orientation guarantees apply to solids resolved by
        // the grid, which sub-pixel balls at every other node are not;
        // this pins the out-of-scope behavior so changes are noticed.
        assert!(out.signed_volume() < 0.0);
    }

    #[test]
    fn contour_is_bit_identical_across_thread_counts() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 32).unwrap();
        let mesh = fixtures::rotated_cube(Point3::new(0.5, 0.5, 0.5), 0.5, 30.0);
        let solid = sample_solid(&mesh, &grid, NormalMode::Accurate).unwrap();
        let a = contour(&solid).unwrap();
        let b = contour(&solid).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap();
        let c = pool.install(|| contour(&solid).unwrap());
        for other in [&b, &c] {
            assert_eq!(a.vertices(), other.vertices());
            assert_eq!(a.faces(), other.faces());
        }
    }

    #[test]
    fn rotated_cube_contour_is_watertight_with_accurate_volume() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 32).unwrap();
        let mesh = fixtures::rotated_cube(Point3::new(0.5, 0.5, 0.5), 0.5, 30.0);
        let solid = sample_solid(&mesh, &grid, NormalMode::Accurate).unwrap();
        let out = contour(&solid).unwrap();
        let audit = audit_mesh(&out);
        assert!(audit.is_watertight_solid(), "{audit:?}");
        assert_eq!(audit.euler_characteristic, 2);
        let d = grid.pixel_width();
        assert!((out.signed_volume() - 0.125).abs() < 5.0 * d * out.surface_area());
    }

    #[test]
    fn random_primitive_unions_always_contour_watertight() {
        use rand::{Rng, SeedableRng};
        let grid = GridSpec::new(Point3::origin(), 1.0, 32).unwrap();
        let d = grid.pixel_width();
        let cfg = BooleanConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for round in 0..8 {
            // Union of a few well-resolved primitives at random poses
            // (every feature at least four pixels across).
            let mut solid: Option<LdniSolid> = None;
            for _ in 0..rng.random_range(2..=4usize) {
                let part = if rng.random_range(0..3u32) == 0 {
                    let c = Point3::new(
                        rng.random_range(0.3..0.7),
                        rng.random_range(0.3..0.7),
                        rng.random_range(0.3..0.7),
                    );
                    let r = rng.random_range(4.0 * d..0.25);
                    sample_sphere(&c, r, &grid, NormalMode::Accurate).unwrap()
                } else {
                    let lo = Point3::new(
                        rng.random_range(0.1..0.5),
                        rng.random_range(0.1..0.5),
                        rng.random_range(0.1..0.5),
                    );
                    let side = Vector3::new(
                        rng.random_range(4.0 * d..0.4),
                        rng.random_range(4.0 * d..0.4),
                        rng.random_range(4.0 * d..0.4),
                    );
                    let mesh = fixtures::axis_box(lo, lo + side);
                    sample_solid(&mesh, &grid, NormalMode::Accurate).unwrap()
                };
                solid = Some(match solid {
                    None => part,
                    Some(s) => boolean_solid(&s, &part, BooleanOp::Union, cfg).unwrap(),
                });
            }
            let out = contour(&solid.unwrap()).unwrap();
            let audit = audit_mesh(&out);
            assert!(audit.is_watertight_solid(), "round {round}: {audit:?}");
            assert!(out.signed_volume() > 0.0, "round {round}");
        }
    }
}
