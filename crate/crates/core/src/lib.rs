//! Sparse implicit representation of solid models as layered depth-normal
//! images: three axis-aligned stacks of depth/normal samples over a shared
//! cubic grid, with boolean solid modeling, offsetting, contouring back to
//! triangle meshes, and error measurement against the source mesh.

pub mod contour;
pub mod csg;
pub mod fixtures;
pub mod geom;
pub mod grid;
pub mod mesh;
pub mod metrics;
pub mod raycast;
pub mod sample;

pub use contour::{
    build_cluster_field, build_node_signs, build_quads, classify_and_regularize_edges,
    cluster_cell_nodes, contour, fix_nonmanifold, place_vertex, smooth_unconstrained, triangulate,
    CellEdgeRecord, ClusterField, ContourError, EdgeClass, NodeSignField, QuadMesh, VertexCluster,
};
pub use csg::{
    boolean_columns, boolean_samples, boolean_solid, offset_solid, remove_small_intervals,
    BooleanConfig, BooleanOp, CsgError,
};
pub use geom::{Axis, AXES};
pub use grid::{GridError, GridSpec};
pub use mesh::{
    audit_mesh, bounding_cube, bounding_cube_of, MeshAudit, MeshError, MeshTopology, TriangleMesh,
};
pub use metrics::{
    bbox_diagonal, memory_report, reference_gridnode_contour, surface_distance,
    symmetric_surface_distance, ErrorReport, MemoryReport, MetricsError, Normalization,
};
pub use raycast::{
    point_in_solid_oracle, ray_surface_hits, AxisRayCaster, OracleError, RayCastError, RayHit,
    SolidOracle,
};
pub use sample::{
    classify_grid_node, column_membership, sample_solid, sample_sphere, stats, validate_parity,
    HermiteSample, Ldni, LdniSolid, LdniStats, Membership, NormalMode, PixelColumn, SampleError,
};
