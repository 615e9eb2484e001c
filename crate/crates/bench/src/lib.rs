//! Shared fixture builders for the benchmark targets: meshes and pre-sampled
//! solids sized so each benchmark measures one pipeline stage in isolation.

use ldni::{bounding_cube, fixtures, sample_solid, GridSpec, LdniSolid, NormalMode, TriangleMesh};
use nalgebra::Point3;

/// Geodesic sphere used by every benchmark (1280 faces).
pub fn bench_mesh() -> TriangleMesh {
    fixtures::icosphere(Point3::new(0.5, 0.5, 0.5), 0.3, 3)
}

/// Cubic grid fitted around `mesh` with a five percent margin.
pub fn bench_grid(mesh: &TriangleMesh, resolution: u32) -> GridSpec {
    let (origin, width) = bounding_cube(mesh, 0.05);
    GridSpec::new(origin, width, resolution).expect("valid benchmark grid")
}

/// The benchmark mesh pre-sampled at the given resolution.
pub fn bench_solid(resolution: u32) -> LdniSolid {
    let mesh = bench_mesh();
    let grid = bench_grid(&mesh, resolution);
    sample_solid(&mesh, &grid, NormalMode::Accurate).expect("benchmark mesh samples cleanly")
}
