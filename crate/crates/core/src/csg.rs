//! Boolean solid modeling and offsetting on the layered representation.
//!
//! Because both operands share one grid, a Boolean of two solids decomposes
//! into independent 1D problems: per axis and pixel, combine the two
//! columns' inside intervals with exact segment algebra. All samples at one
//! `f32` depth are processed as a group and at most one sample is emitted
//! per depth — the one observing the result's inside/outside transition —
//! so coincident boundaries (tangential contacts, self-subtraction) cancel
//! exactly rather than leaving zero-width slivers.
//!
//! Offsetting by radius `r` is the Minkowski sum with a sphere, realized as
//! the union (dilation) or difference (erosion) of analytic spheres of
//! radius `|r|` centered at every boundary sample of all three images.

use nalgebra::Point3;
use rayon::prelude::*;
use std::fmt;

use crate::geom::AXES;
use crate::sample::{HermiteSample, Ldni, LdniSolid, PixelColumn};

/// Segment-algebra parameters.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BooleanConfig {
    /// Minimum surviving inside-interval thickness (model units). Intervals
    /// thinner than this are removed after each Boolean, resolving
    /// tangential contacts and numerical slivers.
    pub epsilon: f64,
}

impl Default for BooleanConfig {
    fn default() -> Self {
        BooleanConfig { epsilon: 1e-5 }
    }
}

/// The three regularized Boolean operations.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BooleanOp {
    Union,
    Intersection,
    Difference,
}

/// Errors from solid-level Boolean and offset operations.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum CsgError {
    /// Operands were sampled on different grids (origin, width, or
    /// resolution differ). Resampling is never done silently; co-sample the
    /// operands on one grid instead.
    GridMismatch,
    /// Operands store normals in different modes.
    NormalModeMismatch,
    /// A positive offset would push the surface outside the grid cube.
    OffsetOverflow,
    /// Offset radius was zero or not finite.
    ZeroRadius,
}

impl fmt::Display for CsgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsgError::GridMismatch => write!(
                f,
                "operands must be sampled on the identical grid (same origin, width, and \
                 resolution); co-sample them in one invocation"
            ),
            CsgError::NormalModeMismatch => {
                write!(f, "operands must share the same normal storage mode")
            }
            CsgError::OffsetOverflow => {
                write!(
                    f,
                    "offset surface would exceed the grid cube; enlarge the grid"
                )
            }
            CsgError::ZeroRadius => write!(f, "offset radius must be nonzero and finite"),
        }
    }
}

impl std::error::Error for CsgError {}

#[inline]
fn result_state(op: BooleanOp, in_a: bool, in_b: bool) -> bool {
    match op {
        BooleanOp::Union => in_a || in_b,
        BooleanOp::Intersection => in_a && in_b,
        BooleanOp::Difference => in_a && !in_b,
    }
}

/// Exact 1D Boolean of two columns given as raw sample slices; the slice
/// form of [`boolean_columns`]. In a difference, samples contributed by `b`
/// carry `b`'s normal reversed (that part of `b`'s boundary now faces the
/// other way). Where both inputs have a sample at one depth, the surviving
/// sample is taken from `a`.
pub fn boolean_samples(
    a: &[HermiteSample],
    b: &[HermiteSample],
    op: BooleanOp,
    cfg: BooleanConfig,
) -> Vec<HermiteSample> {
    let mut out: Vec<HermiteSample> = Vec::new();
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut in_a, mut in_b) = (false, false);
    let mut inside = false;
    while ia < a.len() || ib < b.len() {
        let depth = match (a.get(ia), b.get(ib)) {
            (Some(x), Some(y)) => x.depth.min(y.depth),
            (Some(x), None) => x.depth,
            (None, Some(y)) => y.depth,
            (None, None) => unreachable!(),
        };
        // Apply every crossing at this depth before looking at the state.
        let mut emit: Option<HermiteSample> = None;
        while ia < a.len() && a[ia].depth == depth {
            in_a = !in_a;
            if emit.is_none() {
                emit = Some(a[ia]);
            }
            ia += 1;
        }
        while ib < b.len() && b[ib].depth == depth {
            in_b = !in_b;
            if emit.is_none() {
                let s = b[ib];
                emit = Some(if op == BooleanOp::Difference {
                    s.flipped()
                } else {
                    s
                });
            }
            ib += 1;
        }
        let now = result_state(op, in_a, in_b);
        if now != inside {
            out.push(emit.expect("a state change requires a crossing at this depth"));
            inside = now;
        }
    }
    remove_small_samples(&mut out, cfg.epsilon);
    out
}

/// Exact 1D Boolean of two pixel columns sampled on the same ray.
pub fn boolean_columns(
    a: &PixelColumn,
    b: &PixelColumn,
    op: BooleanOp,
    cfg: BooleanConfig,
) -> PixelColumn {
    PixelColumn::from_sorted(boolean_samples(a.samples(), b.samples(), op, cfg))
}

/// Drop inside intervals thinner than `epsilon` from a raw sample list.
pub fn remove_small_samples(samples: &mut Vec<HermiteSample>, epsilon: f64) {
    if epsilon <= 0.0 {
        return;
    }
    let mut kept = 0;
    for i in (0..samples.len()).step_by(2) {
        let thickness = samples[i + 1].depth as f64 - samples[i].depth as f64;
        if thickness >= epsilon {
            samples.copy_within(i..i + 2, kept);
            kept += 2;
        }
    }
    samples.truncate(kept);
}

/// Remove inside intervals thinner than `epsilon` from a column.
pub fn remove_small_intervals(column: &PixelColumn, epsilon: f64) -> PixelColumn {
    let mut samples = column.samples().to_vec();
    remove_small_samples(&mut samples, epsilon);
    PixelColumn::from_sorted(samples)
}

/// Boolean of two solids sampled on the identical grid: the per-column
/// segment algebra applied to every pixel of every axis.
pub fn boolean_solid(
    a: &LdniSolid,
    b: &LdniSolid,
    op: BooleanOp,
    cfg: BooleanConfig,
) -> Result<LdniSolid, CsgError> {
    if a.grid() != b.grid() {
        return Err(CsgError::GridMismatch);
    }
    if a.normal_mode() != b.normal_mode() {
        return Err(CsgError::NormalModeMismatch);
    }
    let grid = *a.grid();
    let w = grid.resolution as usize;
    let mut images = Vec::with_capacity(3);
    for axis in AXES {
        let ia = a.image(axis);
        let ibm = b.image(axis);
        let columns: Vec<Vec<HermiteSample>> = (0..w * w)
            .into_par_iter()
            .map(|c| boolean_samples(ia.column_at(c), ibm.column_at(c), op, cfg))
            .collect();
        images.push(Ldni::from_columns(axis, grid, columns));
    }
    let images: [Ldni; 3] = images.try_into().expect("three axes");
    Ok(LdniSolid::from_images(grid, a.normal_mode(), images).expect("axes and grid consistent"))
}

/// Offset a solid by `r` (the Minkowski sum with a sphere of radius `|r|`):
/// outward for `r > 0` (union of spheres centered at every boundary sample),
/// inward for `r < 0` (their subtraction). The result stays on `h`'s grid;
/// an outward offset that would not fit is an error.
pub fn offset_solid(h: &LdniSolid, r: f64, cfg: BooleanConfig) -> Result<LdniSolid, CsgError> {
    if !r.is_finite() || r == 0.0 {
        return Err(CsgError::ZeroRadius);
    }
    let radius = r.abs();
    let grid = *h.grid();
    let mode = h.normal_mode();

    // World positions of all boundary samples, in one deterministic order.
    let mut centers: Vec<Point3<f64>> = Vec::with_capacity(h.total_samples());
    for axis in AXES {
        let img = h.image(axis);
        let origin_along = grid.origin[axis.index()];
        for (u, v, col) in img.columns() {
            let (cu, cv) = grid.ray_uv(axis, u, v);
            for s in col {
                centers.push(axis.unproject(origin_along + s.depth as f64, cu, cv));
            }
        }
    }
    if centers.is_empty() {
        return Ok(h.clone());
    }
    if r > 0.0 {
        let mut lo = centers[0];
        let mut hi = centers[0];
        for c in &centers {
            for k in 0..3 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let pad = nalgebra::Vector3::repeat(radius);
        if !grid.contains_box(&(lo - pad), &(hi + pad)) {
            return Err(CsgError::OffsetOverflow);
        }
    }
    centers.sort_unstable_by(|p, q| {
        p.x.partial_cmp(&q.x)
            .unwrap()
            .then(p.y.partial_cmp(&q.y).unwrap())
            .then(p.z.partial_cmp(&q.z).unwrap())
    });

    let op = if r > 0.0 {
        BooleanOp::Union
    } else {
        BooleanOp::Difference
    };
    let w = grid.resolution as usize;
    let d = grid.pixel_width();
    let rad_px = (radius / d).ceil() as i64 + 1;

    let mut images = Vec::with_capacity(3);
    for axis in AXES {
        // Bucket sphere centers by the pixel their projection falls in, so
        // a column only visits spheres whose disc can reach it.
        let (a1, a2) = axis.cross_axes();
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); w * w];
        for (idx, c) in centers.iter().enumerate() {
            let bu = (((c[a1.index()] - grid.origin[a1.index()]) / d).floor() as i64)
                .clamp(0, w as i64 - 1) as usize;
            let bv = (((c[a2.index()] - grid.origin[a2.index()]) / d).floor() as i64)
                .clamp(0, w as i64 - 1) as usize;
            buckets[bv * w + bu].push(idx as u32);
        }

        let img = h.image(axis);
        let origin_along = grid.origin[axis.index()];
        let columns: Vec<Vec<HermiteSample>> = (0..w * w)
            .into_par_iter()
            .map(|ci| {
                let (u, v) = ((ci % w) as i64, (ci / w) as i64);
                let (cu, cv) = grid.ray_uv(axis, u as u32, v as u32);
                // Chords of all spheres crossing this ray, in bucket order
                // (deterministic: buckets are scanned row-major and each
                // holds center indices in sorted-center order).
                let mut chords: Vec<(HermiteSample, HermiteSample)> = Vec::new();
                for bv in (v - rad_px).max(0)..=(v + rad_px).min(w as i64 - 1) {
                    for bu in (u - rad_px).max(0)..=(u + rad_px).min(w as i64 - 1) {
                        for &idx in &buckets[bv as usize * w + bu as usize] {
                            let c = &centers[idx as usize];
                            let du = cu - c[a1.index()];
                            let dv = cv - c[a2.index()];
                            let rho2 = radius * radius - du * du - dv * dv;
                            if rho2 <= 0.0 {
                                continue;
                            }
                            let rho = rho2.sqrt();
                            let c_along = c[axis.index()];
                            let lo = (c_along - rho - origin_along) as f32;
                            let hi = (c_along + rho - origin_along) as f32;
                            if lo >= hi {
                                continue;
                            }
                            let mut n_lo = nalgebra::Vector3::zeros();
                            n_lo[axis.index()] = -rho / radius;
                            n_lo[a1.index()] = du / radius;
                            n_lo[a2.index()] = dv / radius;
                            let mut n_hi = n_lo;
                            n_hi[axis.index()] = rho / radius;
                            chords.push((
                                HermiteSample::from_exact(lo as f64, &n_lo, mode),
                                HermiteSample::from_exact(hi as f64, &n_hi, mode),
                            ));
                        }
                    }
                }
                let cover = union_chords(chords);
                boolean_samples(img.column_at(ci), &cover, op, cfg)
            })
            .collect();
        images.push(Ldni::from_columns(axis, grid, columns));
    }
    let images: [Ldni; 3] = images.try_into().expect("three axes");
    Ok(LdniSolid::from_images(grid, mode, images).expect("axes and grid consistent"))
}

/// Union many `(entry, exit)` chords into one valid column. Touching chords
/// merge; the surviving entry/exit samples keep their own normals.
fn union_chords(mut chords: Vec<(HermiteSample, HermiteSample)>) -> Vec<HermiteSample> {
    chords.sort_by(|x, y| {
        x.0.depth
            .partial_cmp(&y.0.depth)
            .unwrap()
            .then(x.1.depth.partial_cmp(&y.1.depth).unwrap())
    });
    let mut out: Vec<HermiteSample> = Vec::new();
    for (lo, hi) in chords {
        match out.last_mut() {
            Some(end) if lo.depth <= end.depth => {
                if hi.depth > end.depth {
                    *end = hi;
                }
            }
            _ => {
                out.push(lo);
                out.push(hi);
            }
        }
    }
    out
}
