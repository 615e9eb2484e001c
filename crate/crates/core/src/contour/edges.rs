//! Grid-edge classification and sample regularization.
//!
//! Every grid edge — the segment between two adjacent nodes — is classified
//! from its end signs and the samples whose depth falls strictly inside its
//! interval, then its samples are regularized down to the at-most-two the
//! later stages consume:
//!
//! * end signs differ, ≥1 sample → `Intersect`, keeping the single best
//!   crossing (sign-compatible normal, closest to the edge midpoint);
//! * end signs differ, no sample → `NoneIntersect` (a numerical-error edge:
//!   the crossing was voted in by the other two images);
//! * end signs equal, ≥2 samples → `Complex`, keeping the two crossings
//!   closest to the end nodes — the carrier of sub-pixel thin structures;
//! * end signs equal, 1 sample → the lone crossing is inconsistent with the
//!   signs; it is discarded and the edge behaves as empty;
//! * end signs equal, no samples → empty (not reported).

use rayon::prelude::*;

use super::{compose_node, NodeSignField};
use crate::geom::{Axis, AXES};
use crate::grid::GridSpec;
use crate::sample::{HermiteSample, LdniSolid, Membership};

/// The four edge classes.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EdgeClass {
    /// End signs differ; one regularized crossing.
    Intersect,
    /// End signs differ; no crossing recorded on this axis.
    NoneIntersect,
    /// End signs equal and no usable crossing (also the discarded
    /// lone-sample case).
    Empty,
    /// End signs equal with a pair of crossings: a thin structure passes
    /// between the nodes.
    Complex,
}

/// A classified, regularized grid edge.
///
/// The edge runs along `axis` on the pixel ray `(u, v)` of that axis'
/// image, between the node planes `slot` and `slot + 1`. `end_signs` are
/// the signs of the lower and upper end nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct CellEdgeRecord {
    pub axis: Axis,
    pub u: u32,
    pub v: u32,
    pub slot: u32,
    pub end_signs: (Membership, Membership),
    /// Samples strictly inside the edge interval, in depth order.
    pub raw_samples: Vec<HermiteSample>,
    pub class: EdgeClass,
    /// Regularized samples: 1 for `Intersect`, 2 for `Complex`, else empty.
    pub kept: Vec<HermiteSample>,
}

impl CellEdgeRecord {
    /// Node ids of the lower end node.
    #[inline]
    pub fn lower_node(&self) -> (u32, u32, u32) {
        compose_node(self.axis, self.u, self.v, self.slot)
    }

    /// Node ids of the upper end node.
    #[inline]
    pub fn upper_node(&self) -> (u32, u32, u32) {
        compose_node(self.axis, self.u, self.v, self.slot + 1)
    }
}

/// Classify and regularize every non-trivial grid edge of the solid.
///
/// Edges with equal end signs and no samples (the overwhelming majority)
/// are omitted; absence from the result means *empty*. Records are ordered
/// by axis, then pixel (row-major), then slot.
pub fn classify_and_regularize_edges(
    solid: &LdniSolid,
    signs: &NodeSignField,
) -> Vec<CellEdgeRecord> {
    let grid = solid.grid();
    let w = grid.resolution as usize;
    assert_eq!(
        signs.resolution(),
        grid.resolution,
        "sign field resolution mismatch"
    );
    let mut all = Vec::new();
    for axis in AXES {
        let img = solid.image(axis);
        let per_column: Vec<Vec<CellEdgeRecord>> = (0..w * w)
            .into_par_iter()
            .map(|ci| {
                let (u, v) = ((ci % w) as u32, (ci / w) as u32);
                classify_column(grid, signs, axis, u, v, img.column_at(ci))
            })
            .collect();
        for recs in per_column {
            all.extend(recs);
        }
    }
    all
}

fn classify_column(
    grid: &GridSpec,
    signs: &NodeSignField,
    axis: Axis,
    u: u32,
    v: u32,
    samples: &[HermiteSample],
) -> Vec<CellEdgeRecord> {
    let w = grid.resolution;
    let mut out = Vec::new();
    let mut cur = 0usize;
    let sign_at = |n: u32| {
        let (i, j, k) = compose_node(axis, u, v, n);
        signs.membership(i, j, k)
    };
    let mut lower_sign = sign_at(0);
    for slot in 0..w - 1 {
        let nd_lo = grid.node_depth(slot);
        let nd_hi = grid.node_depth(slot + 1);
        let upper_sign = sign_at(slot + 1);
        // Samples at or below the lower node plane belong to no edge.
        while cur < samples.len() && samples[cur].depth as f64 <= nd_lo {
            cur += 1;
        }
        let start = cur;
        while cur < samples.len() && (samples[cur].depth as f64) < nd_hi {
            cur += 1;
        }
        let raws = &samples[start..cur];
        if !raws.is_empty() || lower_sign != upper_sign {
            let (class, kept) =
                classify_slot(lower_sign, upper_sign, raws, axis, (nd_lo + nd_hi) / 2.0);
            out.push(CellEdgeRecord {
                axis,
                u,
                v,
                slot,
                end_signs: (lower_sign, upper_sign),
                raw_samples: raws.to_vec(),
                class,
                kept,
            });
        }
        lower_sign = upper_sign;
    }
    out
}

/// Classify one edge interval and pick its regularized samples.
pub(crate) fn classify_slot(
    lower: Membership,
    upper: Membership,
    raws: &[HermiteSample],
    axis: Axis,
    midpoint: f64,
) -> (EdgeClass, Vec<HermiteSample>) {
    if lower != upper {
        if raws.is_empty() {
            return (EdgeClass::NoneIntersect, Vec::new());
        }
        // A crossing from outside to inside (walking up the axis) must face
        // down the axis, and vice versa.
        let entering = lower == Membership::Outside;
        let compatible = |s: &HermiteSample| {
            let na = s.normal[axis.index()];
            if entering {
                na < 0.0
            } else {
                na > 0.0
            }
        };
        let best_of = |pool: &mut dyn Iterator<Item = &HermiteSample>| -> HermiteSample {
            let mut best: Option<(&HermiteSample, f64)> = None;
            for s in pool {
                let dist = (s.depth as f64 - midpoint).abs();
                // Strict comparison: ties keep the earlier (smaller) depth.
                if best.is_none_or(|(_, bd)| dist < bd) {
                    best = Some((s, dist));
                }
            }
            *best.expect("pool is non-empty").0
        };
        let kept = if raws.iter().any(compatible) {
            best_of(&mut raws.iter().filter(|s| compatible(s)))
        } else {
            // No sample faces the right way; falling back beats a hole.
            best_of(&mut raws.iter())
        };
        (EdgeClass::Intersect, vec![kept])
    } else if raws.len() >= 2 {
        (EdgeClass::Complex, vec![raws[0], raws[raws.len() - 1]])
    } else {
        // Zero samples, or a lone crossing that contradicts the equal end
        // signs; either way the edge carries nothing usable.
        (EdgeClass::Empty, Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::grid::GridSpec;
    use crate::sample::{sample_solid, NormalMode};
    use nalgebra::{Point3, Vector3};

    fn s(depth: f32, nz: f64) -> HermiteSample {
        HermiteSample::accurate(depth, Vector3::new(0.0, 0.0, nz as f32))
    }

    const OUT: Membership = Membership::Outside;
    const IN: Membership = Membership::Inside;

    #[test]
    fn sign_compatible_sample_wins_even_when_not_closest_to_midpoint() {
        // Out→In along +z expects downward normals; only 0.45 qualifies.
        let raws = [s(0.2, 1.0), s(0.45, -1.0), s(0.8, 1.0)];
        let (class, kept) = classify_slot(OUT, IN, &raws, Axis::Z, 0.5);
        assert_eq!(class, EdgeClass::Intersect);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].depth, 0.45);
    }

    #[test]
    fn complex_edge_keeps_the_crossings_closest_to_the_end_nodes() {
        let raws = [s(0.1, -1.0), s(0.3, 1.0), s(0.6, -1.0), s(0.9, 1.0)];
        let (class, kept) = classify_slot(OUT, OUT, &raws, Axis::Z, 0.5);
        assert_eq!(class, EdgeClass::Complex);
        assert_eq!(kept.iter().map(|k| k.depth).collect::<Vec<_>>(), [0.1, 0.9]);
    }

    #[test]
    fn sign_change_without_samples_is_a_none_intersect_edge() {
        let (class, kept) = classify_slot(OUT, IN, &[], Axis::Z, 0.5);
        assert_eq!(class, EdgeClass::NoneIntersect);
        assert!(kept.is_empty());
    }

    #[test]
    fn lone_sample_with_equal_signs_is_discarded() {
        let (class, kept) = classify_slot(OUT, OUT, &[s(0.4, -1.0)], Axis::Z, 0.5);
        assert_eq!(class, EdgeClass::Empty);
        assert!(kept.is_empty());
    }

    #[test]
    fn incompatible_samples_fall_back_to_the_midpoint_rule() {
        // Both face the wrong way; 0.6 is closer to the midpoint 0.5.
        let raws = [s(0.3, 1.0), s(0.6, 1.0)];
        let (class, kept) = classify_slot(OUT, IN, &raws, Axis::Z, 0.5);
        assert_eq!(class, EdgeClass::Intersect);
        assert_eq!(kept[0].depth, 0.6);
    }

    #[test]
    fn midpoint_distance_tie_keeps_the_smaller_depth() {
        let raws = [s(0.4, -1.0), s(0.6, -1.0)];
        let (_, kept) = classify_slot(OUT, IN, &raws, Axis::Z, 0.5);
        assert_eq!(kept[0].depth, 0.4);
    }

    #[test]
    fn box_column_classification_is_frozen() {
        // Box [0.25, 0.75]³ at w = 4: per axis, 4 interior pixel columns,
        // each with entry 0.25 in slot 0 and exit 0.75 in slot 2 — 24
        // intersect edges total, nothing else.
        let grid = GridSpec::new(Point3::origin(), 1.0, 4).unwrap();
        let mesh = fixtures::axis_box(Point3::new(0.25, 0.25, 0.25), Point3::new(0.75, 0.75, 0.75));
        let solid = sample_solid(&mesh, &grid, NormalMode::Accurate).unwrap();
        let signs = super::super::build_node_signs(&solid);
        let records = classify_and_regularize_edges(&solid, &signs);
        assert_eq!(records.len(), 24);
        for r in &records {
            assert_eq!(r.class, EdgeClass::Intersect);
            assert_eq!(r.raw_samples.len(), 1);
            let depth = r.kept[0].depth;
            match r.slot {
                0 => assert_eq!(depth, 0.25),
                2 => assert_eq!(depth, 0.75),
                other => panic!("unexpected slot {other}"),
            }
        }
        assert_eq!(records.iter().filter(|r| r.axis == Axis::X).count(), 8);
    }

    #[test]
    fn thin_plate_produces_only_z_axis_complex_edges() {
        let grid = GridSpec::new(Point3::origin(), 1.0, 16).unwrap();
        let plate = fixtures::plate_between_node_planes(&grid, (0.25, 0.25), (0.75, 0.75), 7, 0.4);
        let solid = sample_solid(&plate, &grid, NormalMode::Accurate).unwrap();
        let signs = super::super::build_node_signs(&solid);
        let records = classify_and_regularize_edges(&solid, &signs);
        // Rays strictly inside (0.25, 0.75): pixel indices 4..=11 → 8×8.
        assert_eq!(records.len(), 64);
        for r in &records {
            assert_eq!(r.axis, Axis::Z);
            assert_eq!(r.slot, 7);
            assert_eq!(r.class, EdgeClass::Complex);
            assert_eq!(r.end_signs, (OUT, OUT));
            assert_eq!(r.kept.len(), 2);
            assert!(r.kept[0].depth < r.kept[1].depth);
        }
    }
}
