//! Quad assembly: one face per crossing edge, linking the vertices of the
//! four cells around it.
//!
//! Every intersect or none-intersect edge yields one quad whose corners are
//! the clusters claiming the edge's outside node in the four surrounding
//! cells. A complex edge yields two — one sheet toward each outside end
//! node. Winding is chosen so each face's normal points along the edge
//! axis toward the outside node it was built for, which orients the whole
//! surface outward.

use nalgebra::Point3;

use super::{CellEdgeRecord, ClusterField, ContourError, EdgeClass};
use crate::grid::GridSpec;
use crate::sample::Membership;

/// Intermediate quad-face mesh between contouring and triangulation.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadMesh {
    pub vertices: Vec<Point3<f64>>,
    /// Vertex-index quadruples, outward-oriented.
    pub quads: Vec<[u32; 4]>,
    /// Whether each vertex is QEF-placed (fixed) or free to be smoothed.
    pub constrained: Vec<bool>,
}

/// Cross-plane cell offsets around an edge, in counterclockwise order when
/// viewed down the edge axis (so this traversal order faces up the axis).
const RING: [(i64, i64); 4] = [(-1, -1), (0, -1), (0, 0), (-1, 0)];

/// Build the quad mesh from the classified edges and the placed clusters.
/// Unreferenced cluster vertices are dropped.
///
/// Edges on the image boundary (cross-pixel index 0 or w−1) have no
/// complete cell ring and are skipped; sampled solids keep their geometry
/// strictly inside the grid, so such edges never carry surface.
pub fn build_quads(
    grid: &GridSpec,
    records: &[CellEdgeRecord],
    field: &ClusterField,
) -> Result<QuadMesh, ContourError> {
    let w = grid.resolution;
    let mut quads: Vec<[u32; 4]> = Vec::new();
    for rec in records {
        match rec.class {
            EdgeClass::Intersect | EdgeClass::NoneIntersect => {
                let end = u32::from(rec.end_signs.0 != Membership::Outside);
                emit(w, field, rec, end, &mut quads)?;
            }
            EdgeClass::Complex => {
                if rec.end_signs.0 == Membership::Outside {
                    emit(w, field, rec, 0, &mut quads)?;
                }
                if rec.end_signs.1 == Membership::Outside {
                    emit(w, field, rec, 1, &mut quads)?;
                }
            }
            EdgeClass::Empty => {}
        }
    }

    // Compact away clusters no quad references (e.g. far corners of cells
    // that only touch the surface through one edge).
    let mut remap = vec![u32::MAX; field.vertices.len()];
    let mut vertices = Vec::new();
    let mut constrained = Vec::new();
    for q in &mut quads {
        for id in q.iter_mut() {
            let old = *id as usize;
            if remap[old] == u32::MAX {
                remap[old] = vertices.len() as u32;
                vertices.push(field.vertices[old]);
                constrained.push(field.constrained[old]);
            }
            *id = remap[old];
        }
    }
    Ok(QuadMesh {
        vertices,
        quads,
        constrained,
    })
}

fn emit(
    w: u32,
    field: &ClusterField,
    rec: &CellEdgeRecord,
    end: u32,
    quads: &mut Vec<[u32; 4]>,
) -> Result<(), ContourError> {
    if rec.u == 0 || rec.v == 0 || rec.u == w - 1 || rec.v == w - 1 {
        return Ok(());
    }
    let (c1, c2) = rec.axis.cross_axes();
    let mut ids = [0u32; 4];
    for (slot, &(du, dv)) in RING.iter().enumerate() {
        let mut cell = [0u32; 3];
        cell[rec.axis.index()] = rec.slot;
        cell[c1.index()] = (rec.u as i64 + du) as u32;
        cell[c2.index()] = (rec.v as i64 + dv) as u32;
        let cell = (cell[0], cell[1], cell[2]);
        // Corner of the edge's outside node within this cell.
        let mut off = [0u32; 3];
        off[rec.axis.index()] = end;
        off[c1.index()] = (-du) as u32;
        off[c2.index()] = (-dv) as u32;
        let corner = (off[0] + 2 * off[1] + 4 * off[2]) as u8;
        ids[slot] = field
            .vertex_at(cell, corner)
            .ok_or(ContourError::MissingCluster { cell, corner })?;
    }
    debug_assert!(
        ids[0] != ids[1]
            && ids[0] != ids[2]
            && ids[0] != ids[3]
            && ids[1] != ids[2]
            && ids[1] != ids[3]
            && ids[2] != ids[3],
        "quad corners come from four distinct cells"
    );
    // The ring order faces up the axis; a quad built for the lower outside
    // node must face down it.
    if end == 1 {
        quads.push(ids);
    } else {
        quads.push([ids[3], ids[2], ids[1], ids[0]]);
    }
    Ok(())
}
