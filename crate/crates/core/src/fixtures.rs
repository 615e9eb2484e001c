//! Deterministic procedural meshes used by the test suites, the benchmarks
//! and the command-line examples. Every generator produces a closed,
//! consistently outward-oriented two-manifold.

use nalgebra::{Point3, Vector3};
use std::collections::HashMap;

use crate::grid::GridSpec;
use crate::mesh::TriangleMesh;

/// Axis-aligned box `[lo, hi]` as 12 triangles.
pub fn axis_box(lo: Point3<f64>, hi: Point3<f64>) -> TriangleMesh {
    let vertices = vec![
        Point3::new(lo.x, lo.y, lo.z),
        Point3::new(hi.x, lo.y, lo.z),
        Point3::new(lo.x, hi.y, lo.z),
        Point3::new(hi.x, hi.y, lo.z),
        Point3::new(lo.x, lo.y, hi.z),
        Point3::new(hi.x, lo.y, hi.z),
        Point3::new(lo.x, hi.y, hi.z),
        Point3::new(hi.x, hi.y, hi.z),
    ];
    // One outward counter-clockwise quad per side, split along a diagonal.
    let quads: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // z = lo
        [4, 5, 7, 6], // z = hi
        [0, 1, 5, 4], // y = lo
        [2, 6, 7, 3], // y = hi
        [0, 4, 6, 2], // x = lo
        [1, 3, 7, 5], // x = hi
    ];
    let mut faces = Vec::with_capacity(12);
    for q in quads {
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
    }
    TriangleMesh::new(vertices, faces).expect("box fixture is well-formed")
}

/// The unit cube `[0, 1]^3`.
pub fn unit_cube() -> TriangleMesh {
    axis_box(Point3::origin(), Point3::new(1.0, 1.0, 1.0))
}

/// Cube of edge length `side` centered at `center` and rotated by
/// `angle_deg` degrees about the z axis. With a generic angle its slanted
/// faces exercise the sampler away from the pixel lattice while its vertical
/// faces stay exactly parallel to z rays.
pub fn rotated_cube(center: Point3<f64>, side: f64, angle_deg: f64) -> TriangleMesh {
    let base = axis_box(
        Point3::new(-side / 2.0, -side / 2.0, -side / 2.0),
        Point3::new(side / 2.0, side / 2.0, side / 2.0),
    );
    let angle = angle_deg.to_radians();
    let (sin, cos) = angle.sin_cos();
    let vertices = base
        .vertices()
        .iter()
        .map(|p| {
            Point3::new(
                center.x + p.x * cos - p.y * sin,
                center.y + p.x * sin + p.y * cos,
                center.z + p.z,
            )
        })
        .collect();
    TriangleMesh::new(vertices, base.faces().to_vec()).expect("rotated cube is well-formed")
}

/// Geodesic sphere: a subdivided icosahedron projected onto the sphere of the
/// given radius. `subdivisions = 4` yields 2562 vertices / 5120 faces.
pub fn icosphere(center: Point3<f64>, radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut dirs: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0u32; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = if a < b { (a, b) } else { (b, a) };
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = (dirs[a as usize] + dirs[b as usize]).normalize();
                    dirs.push(m);
                    dirs.len() as u32 - 1
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        faces = next;
    }

    let vertices = dirs.iter().map(|d| center + d * radius).collect();
    TriangleMesh::new(vertices, faces).expect("icosphere is well-formed")
}

/// Torus around the z axis through `center`: `major_radius` to the tube
/// center, `minor_radius` of the tube, tessellated into
/// `major_segments x minor_segments` quads (two triangles each).
pub fn torus(
    center: Point3<f64>,
    major_radius: f64,
    minor_radius: f64,
    major_segments: u32,
    minor_segments: u32,
) -> TriangleMesh {
    assert!(major_segments >= 3 && minor_segments >= 3);
    let mut vertices = Vec::with_capacity((major_segments * minor_segments) as usize);
    for i in 0..major_segments {
        let theta = i as f64 / major_segments as f64 * std::f64::consts::TAU;
        let (st, ct) = theta.sin_cos();
        for j in 0..minor_segments {
            let phi = j as f64 / minor_segments as f64 * std::f64::consts::TAU;
            let (sp, cp) = phi.sin_cos();
            let ring = major_radius + minor_radius * cp;
            vertices.push(Point3::new(
                center.x + ring * ct,
                center.y + ring * st,
                center.z + minor_radius * sp,
            ));
        }
    }
    let idx = |i: u32, j: u32| (i % major_segments) * minor_segments + (j % minor_segments);
    let mut faces = Vec::with_capacity((major_segments * minor_segments * 2) as usize);
    for i in 0..major_segments {
        for j in 0..minor_segments {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("torus is well-formed")
}

/// Thin closed plate perpendicular to z, sized so its slab sits strictly
/// *between* the node planes `k` and `k + 1` of `grid` (thickness
/// `thickness_fraction * pixel_width`, centered in the gap). Rays parallel to
/// the plate's large faces then miss it entirely, which is the degenerate
/// thin-feature configuration the perpendicular image must catch.
pub fn plate_between_node_planes(
    grid: &GridSpec,
    xy_lo: (f64, f64),
    xy_hi: (f64, f64),
    k: u32,
    thickness_fraction: f64,
) -> TriangleMesh {
    assert!(thickness_fraction > 0.0 && thickness_fraction < 1.0);
    assert!(k + 1 < grid.resolution);
    let d = grid.pixel_width();
    let z_mid = grid.origin.z + (grid.node_depth(k) + grid.node_depth(k + 1)) / 2.0;
    let half = thickness_fraction * d / 2.0;
    axis_box(
        Point3::new(xy_lo.0, xy_lo.1, z_mid - half),
        Point3::new(xy_hi.0, xy_hi.1, z_mid + half),
    )
}
