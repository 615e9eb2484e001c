//! Layered depth-normal images: the sparse implicit solid representation.
//!
//! A solid is encoded as three orthogonal `w x w` images sharing one cubic
//! grid. Each image pixel stores the sorted depths (and surface normals) of
//! every crossing between the solid's boundary and the axis-parallel ray
//! through the pixel center. Crossing counts are even for a closed solid, so
//! consecutive depth pairs bound the inside intervals of the solid along the
//! ray; that 1D structure is what the Boolean and contouring stages consume.
//!
//! Depths are measured from the grid origin along the positive axis and
//! stored in `f32` (computed in `f64`, rounded once on store).

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

use crate::geom::{Axis, AXES};
use crate::grid::GridSpec;
use crate::mesh::{audit_mesh, MeshAudit, MeshTopology, TriangleMesh};
use crate::raycast::{jitter_uv, AxisRayCaster, RayHit, CAST_RETRIES};

/// How surface normals are stored in samples.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum NormalMode {
    /// Full `f32` components.
    Accurate,
    /// Signed 8-bit components (1/127 steps), decoded and renormalized on
    /// use. Roughly 1/2.3 of the accurate footprint at equal sample counts.
    Quantized8,
}

/// Encode a unit normal into signed 8-bit components.
#[inline]
pub fn quantize_normal(n: &Vector3<f64>) -> [i8; 3] {
    let q = |x: f64| (x * 127.0).round().clamp(-127.0, 127.0) as i8;
    [q(n.x), q(n.y), q(n.z)]
}

/// Decode signed 8-bit components back to a (renormalized) unit normal.
#[inline]
pub fn decode_normal(q: [i8; 3]) -> Vector3<f32> {
    let v = Vector3::new(q[0] as f32, q[1] as f32, q[2] as f32);
    let len = v.norm();
    if len > 0.0 {
        v / len
    } else {
        Vector3::zeros()
    }
}

/// One boundary crossing: a depth along the ray paired with the surface
/// normal there (Hermite data).
///
/// In quantized mode the raw 8-bit triple is kept alongside the decoded
/// normal: re-encoding a decoded normal is not always identity, so file
/// round-trips stay bit-exact only by carrying the original bytes.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct HermiteSample {
    /// Distance from the grid origin along the positive ray axis.
    pub depth: f32,
    /// Unit surface normal (decoded if quantized).
    pub normal: Vector3<f32>,
    qnormal: Option<[i8; 3]>,
}

impl HermiteSample {
    /// Sample with full-precision normal storage.
    #[inline]
    pub fn accurate(depth: f32, normal: Vector3<f32>) -> Self {
        HermiteSample {
            depth,
            normal,
            qnormal: None,
        }
    }

    /// Sample carrying quantized normal bytes.
    #[inline]
    pub fn quantized(depth: f32, q: [i8; 3]) -> Self {
        HermiteSample {
            depth,
            normal: decode_normal(q),
            qnormal: Some(q),
        }
    }

    /// Build from an exact normal under the given storage mode.
    #[inline]
    pub fn from_exact(depth: f64, normal: &Vector3<f64>, mode: NormalMode) -> Self {
        let depth = depth as f32;
        match mode {
            NormalMode::Accurate => HermiteSample::accurate(depth, normal.map(|x| x as f32)),
            NormalMode::Quantized8 => HermiteSample::quantized(depth, quantize_normal(normal)),
        }
    }

    /// The stored quantized bytes, when this sample was built in quantized
    /// mode.
    #[inline]
    pub fn qnormal(&self) -> Option<[i8; 3]> {
        self.qnormal
    }

    /// The same crossing with the normal reversed (used when a solid's
    /// boundary changes role in a difference).
    #[inline]
    pub fn flipped(&self) -> Self {
        HermiteSample {
            depth: self.depth,
            normal: -self.normal,
            qnormal: self.qnormal.map(|q| [-q[0], -q[1], -q[2]]),
        }
    }
}

/// Inside/outside classification result.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Outside,
}

impl Membership {
    #[inline]
    pub fn is_inside(self) -> bool {
        self == Membership::Inside
    }
}

/// Why a hand-built column was rejected.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ColumnError {
    /// Crossing counts of a closed solid are even.
    OddCount,
    /// Depths must be strictly increasing.
    NotIncreasing,
}

impl fmt::Display for ColumnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnError::OddCount => write!(f, "column has an odd number of samples"),
            ColumnError::NotIncreasing => write!(f, "column depths are not strictly increasing"),
        }
    }
}

impl std::error::Error for ColumnError {}

/// The sorted, even-length crossing sequence of one pixel: depth pairs
/// `(samples[2k], samples[2k+1])` bound the solid's inside intervals along
/// the ray. The unit of all 1D Boolean algebra.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PixelColumn {
    samples: Vec<HermiteSample>,
}

impl PixelColumn {
    /// Validate and wrap a sample list (even count, strictly increasing).
    pub fn new(samples: Vec<HermiteSample>) -> Result<Self, ColumnError> {
        if !samples.len().is_multiple_of(2) {
            return Err(ColumnError::OddCount);
        }
        if samples.windows(2).any(|w| w[0].depth >= w[1].depth) {
            return Err(ColumnError::NotIncreasing);
        }
        Ok(PixelColumn { samples })
    }

    /// Wrap samples already known to satisfy the invariants.
    #[inline]
    pub fn from_sorted(samples: Vec<HermiteSample>) -> Self {
        debug_assert!(PixelColumn::new(samples.clone()).is_ok());
        PixelColumn { samples }
    }

    #[inline]
    pub fn samples(&self) -> &[HermiteSample] {
        &self.samples
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// The inside intervals as `(entry, exit)` sample pairs.
    pub fn intervals(&self) -> impl Iterator<Item = (&HermiteSample, &HermiteSample)> {
        self.samples.chunks_exact(2).map(|c| (&c[0], &c[1]))
    }
}

/// Whether `depth` lies strictly inside one of the column's inside
/// intervals. Intervals are open: a depth exactly equal to any stored sample
/// depth is classified `Outside` (boundary points are not interior).
pub fn column_membership(samples: &[HermiteSample], depth: f64) -> Membership {
    let mut below = 0usize;
    for s in samples {
        let sd = s.depth as f64;
        if sd == depth {
            return Membership::Outside;
        }
        if sd < depth {
            below += 1;
        }
    }
    if below % 2 == 1 {
        Membership::Inside
    } else {
        Membership::Outside
    }
}

/// One axis's layered depth-normal image: a `w x w` grid of pixel columns
/// stored sparsely (per-column offsets into one flat sample array; empty
/// columns cost only their offset entry).
#[derive(Clone, Debug, PartialEq)]
pub struct Ldni {
    axis: Axis,
    grid: GridSpec,
    offsets: Vec<u32>,
    samples: Vec<HermiteSample>,
}

impl Ldni {
    /// Assemble an image from per-column sample lists (`columns[v*w + u]`).
    /// Valid columns are sorted, strictly increasing, and even-length, but
    /// this is deliberately not enforced here: untrusted data (for example a
    /// corrupted file) must be representable so [`validate_parity`] can
    /// report which pixels are broken.
    pub fn from_columns(axis: Axis, grid: GridSpec, columns: Vec<Vec<HermiteSample>>) -> Self {
        let w = grid.resolution as usize;
        assert_eq!(columns.len(), w * w, "expected one sample list per pixel");
        let total: usize = columns.iter().map(Vec::len).sum();
        assert!(
            total <= u32::MAX as usize,
            "sample count exceeds u32 offsets"
        );
        let mut offsets = Vec::with_capacity(w * w + 1);
        let mut samples = Vec::with_capacity(total);
        offsets.push(0);
        for col in columns {
            samples.extend_from_slice(&col);
            offsets.push(samples.len() as u32);
        }
        Ldni {
            axis,
            grid,
            offsets,
            samples,
        }
    }

    /// Image axis (rays run along it).
    #[inline]
    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Shared grid.
    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Image resolution `w`.
    #[inline]
    pub fn resolution(&self) -> u32 {
        self.grid.resolution
    }

    /// Linear pixel index of `(u, v)`.
    #[inline]
    pub fn column_index(&self, u: u32, v: u32) -> usize {
        v as usize * self.grid.resolution as usize + u as usize
    }

    /// Samples of pixel `(u, v)`, sorted by depth.
    #[inline]
    pub fn column(&self, u: u32, v: u32) -> &[HermiteSample] {
        self.column_at(self.column_index(u, v))
    }

    /// Samples of the pixel with linear index `c`.
    #[inline]
    pub fn column_at(&self, c: usize) -> &[HermiteSample] {
        &self.samples[self.offsets[c] as usize..self.offsets[c + 1] as usize]
    }

    /// All samples, column by column.
    #[inline]
    pub fn samples(&self) -> &[HermiteSample] {
        &self.samples
    }

    /// Per-column offsets into [`samples`](Self::samples) (length
    /// `w*w + 1`).
    #[inline]
    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    /// Total sample count.
    #[inline]
    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Largest per-column sample count.
    pub fn max_layers(&self) -> u32 {
        self.offsets
            .windows(2)
            .map(|w| w[1] - w[0])
            .max()
            .unwrap_or(0)
    }

    /// Number of pixels with at least one sample.
    pub fn nonempty_columns(&self) -> usize {
        self.offsets.windows(2).filter(|w| w[1] > w[0]).count()
    }

    /// Iterate `(u, v, column)` over all pixels.
    pub fn columns(&self) -> impl Iterator<Item = (u32, u32, &[HermiteSample])> {
        let w = self.grid.resolution;
        (0..w).flat_map(move |v| (0..w).map(move |u| (u, v, self.column(u, v))))
    }
}

/// Three orthogonal layered depth-normal images over one shared cubic grid;
/// the sparse implicit representation of a solid.
#[derive(Clone, Debug, PartialEq)]
pub struct LdniSolid {
    grid: GridSpec,
    normal_mode: NormalMode,
    images: [Ldni; 3],
}

impl LdniSolid {
    /// Assemble a solid from its three images; all must share `grid` and be
    /// ordered/keyed X, Y, Z.
    pub fn from_images(
        grid: GridSpec,
        normal_mode: NormalMode,
        images: [Ldni; 3],
    ) -> Result<Self, SampleError> {
        for (expect, img) in AXES.iter().zip(&images) {
            if img.axis() != *expect || img.grid() != &grid {
                return Err(SampleError::ImageMismatch);
            }
        }
        Ok(LdniSolid {
            grid,
            normal_mode,
            images,
        })
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn normal_mode(&self) -> NormalMode {
        self.normal_mode
    }

    /// The image whose rays run along `axis`.
    #[inline]
    pub fn image(&self, axis: Axis) -> &Ldni {
        &self.images[axis.index()]
    }

    #[inline]
    pub fn images(&self) -> &[Ldni; 3] {
        &self.images
    }

    /// Total sample count across the three images.
    pub fn total_samples(&self) -> usize {
        self.images.iter().map(Ldni::sample_count).sum()
    }
}

/// Size statistics of a solid's representation.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct LdniStats {
    /// Samples across all three images.
    pub total_samples: usize,
    /// Largest per-column sample count, per axis (X, Y, Z).
    pub max_layers: [u32; 3],
    /// Estimated storage: per sample 4 depth bytes + 12 (full) or 3
    /// (quantized) normal bytes, plus a 4-byte count per nonempty column.
    pub bytes_estimate: usize,
}

/// Compute [`LdniStats`] for a solid.
pub fn stats(solid: &LdniSolid) -> LdniStats {
    let per_sample = match solid.normal_mode() {
        NormalMode::Accurate => 16,
        NormalMode::Quantized8 => 7,
    };
    let total_samples = solid.total_samples();
    let nonempty: usize = solid.images().iter().map(Ldni::nonempty_columns).sum();
    LdniStats {
        total_samples,
        max_layers: [
            solid.images()[0].max_layers(),
            solid.images()[1].max_layers(),
            solid.images()[2].max_layers(),
        ],
        bytes_estimate: total_samples * per_sample + nonempty * 4,
    }
}

/// Sampling failures.
#[derive(Clone, Debug, PartialEq)]
pub enum SampleError {
    /// The input mesh is not a closed two-manifold; carries the audit so the
    /// caller can report which property failed.
    OpenMesh(MeshAudit),
    /// The mesh's bounding box is not contained in the grid cube.
    MeshOutsideGrid,
    /// A pixel kept an odd crossing count through all perturbation retries.
    ParityViolation { axis: Axis, u: u32, v: u32 },
    /// A pixel's ray stayed degenerate (vertex piercing, ray-parallel faces,
    /// or irreparable duplicate depths) through all perturbation retries.
    DegenerateColumn { axis: Axis, u: u32, v: u32 },
    /// A sphere to be sampled does not fit in the grid cube.
    OutOfGrid,
    /// Images passed to `LdniSolid::from_images` disagree on axis or grid.
    ImageMismatch,
}

impl fmt::Display for SampleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleError::OpenMesh(a) => write!(
                f,
                "mesh is not a closed two-manifold (boundary edges: {}, non-manifold edges: {}, \
                 non-manifold vertices: {}, consistently oriented: {})",
                a.boundary_edge_count,
                a.nonmanifold_edge_count,
                a.nonmanifold_vertex_count,
                a.is_consistently_oriented
            ),
            SampleError::MeshOutsideGrid => {
                write!(f, "mesh bounding box extends outside the grid cube")
            }
            SampleError::ParityViolation { axis, u, v } => {
                write!(
                    f,
                    "odd crossing count at {axis:?} pixel ({u}, {v}) after retries"
                )
            }
            SampleError::DegenerateColumn { axis, u, v } => {
                write!(
                    f,
                    "degenerate ray at {axis:?} pixel ({u}, {v}) after retries"
                )
            }
            SampleError::OutOfGrid => write!(f, "sphere does not fit in the grid cube"),
            SampleError::ImageMismatch => {
                write!(f, "images do not share the expected axes and grid")
            }
        }
    }
}

impl std::error::Error for SampleError {}

/// Sample a closed two-manifold mesh into its three-image representation.
///
/// For each axis and pixel, the ray through the pixel center is intersected
/// with the mesh; hits become samples carrying the hit face's normal under
/// `normal_mode`. Columns that land on degenerate configurations (vertex
/// piercings, rays in face planes, coincident depths that do not cancel) are
/// re-cast with nudged ray origins; a column that stays odd or degenerate
/// after all retries is an error, not a silent repair.
pub fn sample_solid(
    mesh: &TriangleMesh,
    grid: &GridSpec,
    normal_mode: NormalMode,
) -> Result<LdniSolid, SampleError> {
    let audit = audit_mesh(mesh);
    if !audit.is_watertight_solid() {
        return Err(SampleError::OpenMesh(audit));
    }
    let (lo, hi) = mesh.aabb().expect("audited mesh has faces");
    if !grid.contains_box(&lo, &hi) {
        return Err(SampleError::MeshOutsideGrid);
    }
    let topo = Arc::new(MeshTopology::new(mesh));
    let mut images = Vec::with_capacity(3);
    for axis in AXES {
        images.push(sample_axis(mesh, &topo, grid, axis, normal_mode)?);
    }
    let images: [Ldni; 3] = images.try_into().expect("three axes");
    Ok(LdniSolid {
        grid: *grid,
        normal_mode,
        images,
    })
}

fn sample_axis(
    mesh: &TriangleMesh,
    topo: &Arc<MeshTopology>,
    grid: &GridSpec,
    axis: Axis,
    mode: NormalMode,
) -> Result<Ldni, SampleError> {
    let w = grid.resolution as usize;
    let jitter_step = grid.pixel_width() * 1e-7;
    let caster = AxisRayCaster::new(mesh, topo.clone(), axis, jitter_step);
    let origin_along = grid.origin[axis.index()];

    // Columns are independent; the parallel map writes each result into its
    // own slot, so output is identical for any worker count.
    let columns: Vec<Result<Vec<HermiteSample>, SampleError>> = (0..w * w)
        .into_par_iter()
        .map(|c| {
            let (u, v) = ((c % w) as u32, (c / w) as u32);
            sample_column(&caster, mesh, grid, axis, u, v, mode, origin_along)
        })
        .collect();
    let mut out = Vec::with_capacity(w * w);
    for col in columns {
        out.push(col?);
    }
    Ok(Ldni::from_columns(axis, *grid, out))
}

#[allow(clippy::too_many_arguments)]
fn sample_column(
    caster: &AxisRayCaster<'_>,
    mesh: &TriangleMesh,
    grid: &GridSpec,
    axis: Axis,
    u: u32,
    v: u32,
    mode: NormalMode,
    origin_along: f64,
) -> Result<Vec<HermiteSample>, SampleError> {
    let (cu, cv) = grid.ray_uv(axis, u, v);
    let mut saw_odd = false;
    for attempt in 0..=CAST_RETRIES {
        let (ju, jv) = jitter_uv(cu, cv, caster.jitter_step(), attempt);
        let hits = match caster.cast_raw(ju, jv) {
            Ok(h) => h,
            Err(_) => continue,
        };
        match build_column(&hits, mesh, axis, mode, origin_along) {
            Ok(col) => return Ok(col),
            Err(ColumnBuildIssue::OddCount) => {
                saw_odd = true;
                continue;
            }
            Err(ColumnBuildIssue::DuplicateDepth) => continue,
        }
    }
    if saw_odd {
        Err(SampleError::ParityViolation { axis, u, v })
    } else {
        Err(SampleError::DegenerateColumn { axis, u, v })
    }
}

enum ColumnBuildIssue {
    OddCount,
    DuplicateDepth,
}

/// Convert sorted ray hits into a valid column: round depths to `f32`,
/// cancel equal-depth crossing pairs with opposite facings (zero-thickness
/// slivers and tangential contacts), and enforce evenness plus strictly
/// increasing depths.
fn build_column(
    hits: &[RayHit],
    mesh: &TriangleMesh,
    axis: Axis,
    mode: NormalMode,
    origin_along: f64,
) -> Result<Vec<HermiteSample>, ColumnBuildIssue> {
    let ai = axis.index();
    // (f32 depth, facing sign of the normal's axis component, face id)
    let mut entries: Vec<(f32, bool, u32)> = hits
        .iter()
        .map(|h| {
            let n = mesh.face_normals()[h.face as usize];
            ((h.along - origin_along) as f32, n[ai] < 0.0, h.face)
        })
        .collect();

    // Cancel adjacent equal-depth pairs with opposite facings; repeat until
    // stable (a cancellation can bring a new opposite pair together).
    loop {
        let mut cancelled = false;
        let mut i = 0;
        while i + 1 < entries.len() {
            if entries[i].0 == entries[i + 1].0 && entries[i].1 != entries[i + 1].1 {
                entries.drain(i..i + 2);
                cancelled = true;
            } else {
                i += 1;
            }
        }
        if !cancelled {
            break;
        }
    }

    if !entries.len().is_multiple_of(2) {
        return Err(ColumnBuildIssue::OddCount);
    }
    if entries.windows(2).any(|w| w[0].0 == w[1].0) {
        // Same-facing coincident crossings cannot be cancelled; re-cast.
        return Err(ColumnBuildIssue::DuplicateDepth);
    }
    Ok(entries
        .iter()
        .map(|&(depth, _, face)| {
            let n = mesh.face_normals()[face as usize];
            HermiteSample::from_exact(depth as f64, &n, mode)
        })
        .collect())
}

/// Analytically sample a sphere into the three-image representation; every
/// crossing gets its exact radial normal (no mesh involved). Building block
/// of offsetting.
pub fn sample_sphere(
    center: &Point3<f64>,
    radius: f64,
    grid: &GridSpec,
    normal_mode: NormalMode,
) -> Result<LdniSolid, SampleError> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(SampleError::OutOfGrid);
    }
    let r = Vector3::repeat(radius);
    if !grid.contains_box(&(center - r), &(center + r)) {
        return Err(SampleError::OutOfGrid);
    }
    let w = grid.resolution as usize;
    let mut images = Vec::with_capacity(3);
    for axis in AXES {
        let mut columns = vec![Vec::new(); w * w];
        for (c, col) in columns.iter_mut().enumerate() {
            let (u, v) = ((c % w) as u32, (c / w) as u32);
            *col = sphere_column(center, radius, grid, axis, u, v, normal_mode);
        }
        images.push(Ldni::from_columns(axis, *grid, columns));
    }
    let images: [Ldni; 3] = images.try_into().expect("three axes");
    Ok(LdniSolid {
        grid: *grid,
        normal_mode,
        images,
    })
}

/// The two crossings (or none) of a sphere along one pixel ray. Zero or
/// tangential chords — including chords collapsing to one `f32` depth — are
/// dropped; both outcomes are parity-safe.
pub(crate) fn sphere_column(
    center: &Point3<f64>,
    radius: f64,
    grid: &GridSpec,
    axis: Axis,
    u: u32,
    v: u32,
    mode: NormalMode,
) -> Vec<HermiteSample> {
    let (cu, cv) = grid.ray_uv(axis, u, v);
    let (a1, a2) = axis.cross_axes();
    let du = cu - center[a1.index()];
    let dv = cv - center[a2.index()];
    let rho2 = radius * radius - du * du - dv * dv;
    if rho2 <= 0.0 {
        return Vec::new();
    }
    let rho = rho2.sqrt();
    let origin_along = grid.origin[axis.index()];
    let c_along = center[axis.index()];
    let lo = (c_along - rho - origin_along) as f32;
    let hi = (c_along + rho - origin_along) as f32;
    if lo >= hi {
        return Vec::new();
    }
    let mut n_lo = Vector3::zeros();
    n_lo[axis.index()] = -rho / radius;
    n_lo[a1.index()] = du / radius;
    n_lo[a2.index()] = dv / radius;
    let mut n_hi = n_lo;
    n_hi[axis.index()] = rho / radius;
    vec![
        HermiteSample::from_exact(lo as f64, &n_lo, mode),
        HermiteSample::from_exact(hi as f64, &n_hi, mode),
    ]
}

/// Pixels violating the even-count or strictly-increasing column invariants,
/// as `(axis, u, v)` triples. Empty for any valid sampler output; nonempty
/// for hand-built or corrupted data.
pub fn validate_parity(solid: &LdniSolid) -> Vec<(Axis, u32, u32)> {
    let mut bad = Vec::new();
    for img in solid.images() {
        for (u, v, col) in img.columns() {
            let odd = col.len() % 2 != 0;
            let unsorted = col.windows(2).any(|w| w[0].depth >= w[1].depth);
            if odd || unsorted {
                bad.push((img.axis(), u, v));
            }
        }
    }
    bad
}

/// Classify the grid node `(i, j, k)` against the solid: each image votes by
/// testing the node's depth against its column's inside intervals, and the
/// node is inside when at least two of the three votes agree on inside.
/// (A single image can miss geometry its rays run parallel to; two cannot.)
pub fn classify_grid_node(solid: &LdniSolid, i: u32, j: u32, k: u32) -> Membership {
    let ids = [i, j, k];
    let mut votes = 0;
    for axis in AXES {
        let (a1, a2) = axis.cross_axes();
        let img = solid.image(axis);
        let col = img.column(ids[a1.index()], ids[a2.index()]);
        let depth = solid.grid().node_depth(ids[axis.index()]);
        if column_membership(col, depth).is_inside() {
            votes += 1;
        }
    }
    if votes >= 2 {
        Membership::Inside
    } else {
        Membership::Outside
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn box_grid(w: u32) -> GridSpec {
        GridSpec::new(Point3::origin(), 1.0, w).unwrap()
    }

    fn small_box() -> TriangleMesh {
        fixtures::axis_box(Point3::new(0.25, 0.25, 0.25), Point3::new(0.75, 0.75, 0.75))
    }

    #[test]
    fn box_at_w4_samples_exact_interior_columns() {
        let solid = sample_solid(&small_box(), &box_grid(4), NormalMode::Accurate).unwrap();
        for axis in AXES {
            let img = solid.image(axis);
            for (u, v, col) in img.columns() {
                let interior = (1..=2).contains(&u) && (1..=2).contains(&v);
                if interior {
                    assert_eq!(col.len(), 2, "{axis:?} ({u},{v})");
                    assert_eq!(col[0].depth, 0.25);
                    assert_eq!(col[1].depth, 0.75);
                    assert_eq!(col[0].normal[axis.index()], -1.0);
                    assert_eq!(col[1].normal[axis.index()], 1.0);
                } else {
                    assert!(col.is_empty(), "{axis:?} ({u},{v}) should be empty");
                }
            }
            assert_eq!(img.nonempty_columns(), 4);
            assert_eq!(img.max_layers(), 2);
        }
        assert_eq!(solid.total_samples(), 24);
        assert!(validate_parity(&solid).is_empty());
    }

    #[test]
    fn box_at_w2_grazing_rays_resolve_deterministically() {
        // All four rays per axis graze box faces/edges exactly. The nudge
        // direction (+u, +v) pulls the (0,0) ray into the box footprint and
        // pushes the other three outside it, so exactly one column per axis
        // carries the (0.25, 0.75) pair.
        let solid = sample_solid(&small_box(), &box_grid(2), NormalMode::Accurate).unwrap();
        for axis in AXES {
            let img = solid.image(axis);
            assert_eq!(
                img.column(0, 0).iter().map(|s| s.depth).collect::<Vec<_>>(),
                [0.25, 0.75]
            );
            for (u, v) in [(1, 0), (0, 1), (1, 1)] {
                assert!(img.column(u, v).is_empty(), "{axis:?} ({u},{v})");
            }
        }
        assert!(validate_parity(&solid).is_empty());
    }

    #[test]
    fn meshed_sphere_columns_match_analytic_depths_and_radial_normals() {
        let center = Point3::new(0.5, 0.5, 0.5);
        let mesh = fixtures::icosphere(center, 0.3, 4);
        let solid = sample_solid(&mesh, &box_grid(64), NormalMode::Accurate).unwrap();
        // Chordal sag bound for this tessellation (spherical cap over the
        // ~2.6 degree circumradius of the least-uniform subdivided face).
        let sag = 4e-4;
        let mut nonempty = 0;
        for axis in AXES {
            let img = solid.image(axis);
            let (a1, a2) = axis.cross_axes();
            for (u, v, col) in img.columns() {
                if col.is_empty() {
                    continue;
                }
                let (cu, cv) = solid.grid().ray_uv(axis, u, v);
                let du = cu - center[a1.index()];
                let dv = cv - center[a2.index()];
                let rho2 = 0.09 - du * du - dv * dv;
                // Columns near the silhouette circle may or may not hit the
                // polyhedral surface; only well-covered chords are checked.
                if rho2 < 1e-3 {
                    continue;
                }
                nonempty += 1;
                assert_eq!(col.len(), 2);
                let rho = rho2.sqrt();
                // Depth error along an oblique ray is the chordal sag
                // divided by the ray/normal cosine (rho / r).
                let tol = sag * 0.3 / rho;
                let dev_lo = (col[0].depth as f64 - (0.5 - rho)).abs();
                let dev_hi = (col[1].depth as f64 - (0.5 + rho)).abs();
                assert!(
                    dev_lo < tol,
                    "lo dev {dev_lo:.2e} tol {tol:.2e} rho {rho:.4}"
                );
                assert!(
                    dev_hi < tol,
                    "hi dev {dev_hi:.2e} tol {tol:.2e} rho {rho:.4}"
                );
                for s in col {
                    let p =
                        axis.unproject(s.depth as f64 + solid.grid().origin[axis.index()], cu, cv);
                    let radial = (p - center).normalize().map(|x| x as f32);
                    let dot = s.normal.dot(&radial).clamp(-1.0, 1.0);
                    assert!(dot.acos() < 0.06, "normal deviates {} rad", dot.acos());
                }
            }
        }
        assert!(nonempty > 3000);
    }

    #[test]
    fn analytic_sphere_sampling_is_exact() {
        let center = Point3::new(0.5, 0.5, 0.5);
        let grid = box_grid(64);
        let solid = sample_sphere(&center, 0.3, &grid, NormalMode::Accurate).unwrap();
        for axis in AXES {
            let img = solid.image(axis);
            let (a1, a2) = axis.cross_axes();
            for (u, v, col) in img.columns() {
                let (cu, cv) = grid.ray_uv(axis, u, v);
                let du = cu - center[a1.index()];
                let dv = cv - center[a2.index()];
                let rho2 = 0.09 - du * du - dv * dv;
                if rho2 <= 0.0 {
                    assert!(col.is_empty());
                    continue;
                }
                let rho = rho2.sqrt();
                assert_eq!(col.len(), 2);
                assert_eq!(col[0].depth, (0.5 - rho) as f32);
                assert_eq!(col[1].depth, (0.5 + rho) as f32);
                for s in col {
                    assert!((s.normal.norm() - 1.0).abs() < 1e-6);
                }
                assert!(col[0].normal[axis.index()] < 0.0);
                assert!(col[1].normal[axis.index()] > 0.0);
            }
        }
        assert!(validate_parity(&solid).is_empty());
    }

    #[test]
    fn sphere_smaller_than_pixel_gap_can_vanish() {
        // Radius under d/2 with the center centered between rays on every
        // axis: no pixel center lies within the projected circle.
        let grid = box_grid(64);
        let d = grid.pixel_width();
        let node = grid.node_position(31, 31, 31);
        let center = node + Vector3::repeat(0.5 * d);
        let solid = sample_sphere(&center, 0.4 * d, &grid, NormalMode::Accurate).unwrap();
        assert_eq!(solid.total_samples(), 0);
    }

    #[test]
    fn small_sphere_on_a_ray_forms_plus_stencil() {
        let grid = box_grid(64);
        let d = grid.pixel_width();
        let center = grid.node_position(31, 31, 31);
        let solid = sample_sphere(&center, 1.2 * d, &grid, NormalMode::Accurate).unwrap();
        for axis in AXES {
            let img = solid.image(axis);
            let hits: Vec<(u32, u32)> = img
                .columns()
                .filter(|(_, _, c)| !c.is_empty())
                .map(|(u, v, _)| (u, v))
                .collect();
            assert_eq!(
                hits,
                [(31, 30), (30, 31), (31, 31), (32, 31), (31, 32)],
                "{axis:?}"
            );
            // Depths symmetric about the center's coordinate.
            let c_along = center[axis.index()] - grid.origin[axis.index()];
            for (u, v) in hits {
                let col = img.column(u, v);
                let lo = col[0].depth as f64 - c_along;
                let hi = col[1].depth as f64 - c_along;
                // Symmetric up to the f32 rounding of the two stored depths.
                assert!((lo + hi).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn thin_plate_between_node_planes_is_seen_only_along_z() {
        let grid = box_grid(64);
        let plate = fixtures::plate_between_node_planes(&grid, (0.2, 0.2), (0.8, 0.8), 31, 0.4);
        let solid = sample_solid(&plate, &grid, NormalMode::Accurate).unwrap();
        assert_eq!(solid.image(Axis::X).sample_count(), 0);
        assert_eq!(solid.image(Axis::Y).sample_count(), 0);
        let z = solid.image(Axis::Z);
        assert!(z.nonempty_columns() > 0);
        let d = grid.pixel_width();
        for (_, _, col) in z.columns().filter(|(_, _, c)| !c.is_empty()) {
            assert_eq!(col.len(), 2);
            let thickness = (col[1].depth - col[0].depth) as f64;
            assert!((thickness - 0.4 * d).abs() < 1e-6);
        }
    }

    #[test]
    fn open_mesh_is_rejected() {
        let cube = fixtures::unit_cube();
        let faces: Vec<[u32; 3]> = cube.faces()[..11].to_vec();
        let open = TriangleMesh::new(cube.vertices().to_vec(), faces).unwrap();
        let grid = GridSpec::new(Point3::new(-0.5, -0.5, -0.5), 2.0, 16).unwrap();
        match sample_solid(&open, &grid, NormalMode::Accurate) {
            Err(SampleError::OpenMesh(a)) => assert!(!a.is_closed),
            other => panic!("expected OpenMesh, got {other:?}"),
        }
    }

    #[test]
    fn mesh_outside_grid_is_rejected() {
        let err =
            sample_solid(&fixtures::unit_cube(), &box_grid(8), NormalMode::Accurate).unwrap_err();
        // The unit cube touches the unit grid cube's boundary exactly;
        // strict containment is required.
        assert_eq!(err, SampleError::MeshOutsideGrid);
    }

    #[test]
    fn sphere_outside_grid_is_rejected() {
        let grid = box_grid(16);
        let err = sample_sphere(
            &Point3::new(0.9, 0.5, 0.5),
            0.2,
            &grid,
            NormalMode::Accurate,
        )
        .unwrap_err();
        assert_eq!(err, SampleError::OutOfGrid);
    }

    #[test]
    fn column_membership_counts_crossings_below() {
        let s = |d: f32| HermiteSample::accurate(d, Vector3::new(0.0, 0.0, 1.0));
        let col = [s(0.25), s(0.75)];
        assert_eq!(column_membership(&col, 0.5), Membership::Inside);
        assert_eq!(column_membership(&col, 0.9), Membership::Outside);
        assert_eq!(column_membership(&col, 0.25), Membership::Outside);
        assert_eq!(column_membership(&col, 0.75), Membership::Outside);
        let col4 = [s(1.0), s(2.0), s(5.0), s(6.0)];
        assert_eq!(column_membership(&col4, 3.0), Membership::Outside);
        assert_eq!(column_membership(&col4, 5.5), Membership::Inside);
        assert_eq!(column_membership(&[], 0.5), Membership::Outside);
    }

    #[test]
    fn grid_node_classification_needs_two_votes() {
        let grid = box_grid(4);
        let w = 4usize;
        let s = |d: f32| HermiteSample::accurate(d, Vector3::new(0.0, 0.0, 1.0));
        // Enclose node (1,1,1) (depths 0.375 on each axis) in x and y
        // images only.
        let mut cols_x = vec![Vec::new(); w * w];
        cols_x[w + 1] = vec![s(0.1), s(0.9)]; // (u=j,v=k) = (1,1)
        let mut cols_y = vec![Vec::new(); w * w];
        cols_y[w + 1] = vec![s(0.1), s(0.9)]; // (u=k,v=i) = (1,1)
        let cols_z = vec![Vec::new(); w * w];
        let solid = LdniSolid::from_images(
            grid,
            NormalMode::Accurate,
            [
                Ldni::from_columns(Axis::X, grid, cols_x),
                Ldni::from_columns(Axis::Y, grid, cols_y),
                Ldni::from_columns(Axis::Z, grid, cols_z),
            ],
        )
        .unwrap();
        assert_eq!(classify_grid_node(&solid, 1, 1, 1), Membership::Inside);
        // Any other node gets at most one vote.
        assert_eq!(classify_grid_node(&solid, 2, 1, 1), Membership::Outside);
        assert_eq!(classify_grid_node(&solid, 0, 0, 0), Membership::Outside);
    }

    #[test]
    fn grid_node_classification_on_sampled_box_matches_geometry() {
        let solid = sample_solid(&small_box(), &box_grid(4), NormalMode::Accurate).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let p = box_grid(4).node_position(i, j, k);
                    let inside = p.iter().all(|&c| c > 0.25 && c < 0.75);
                    assert_eq!(
                        classify_grid_node(&solid, i, j, k).is_inside(),
                        inside,
                        "node ({i},{j},{k})"
                    );
                }
            }
        }
    }

    #[test]
    fn stats_counts_box_footprint() {
        let solid = sample_solid(&small_box(), &box_grid(4), NormalMode::Accurate).unwrap();
        let st = stats(&solid);
        assert_eq!(st.total_samples, 24);
        assert_eq!(st.max_layers, [2, 2, 2]);
        assert_eq!(st.bytes_estimate, 24 * 16 + 12 * 4);

        let q = sample_solid(&small_box(), &box_grid(4), NormalMode::Quantized8).unwrap();
        let qst = stats(&q);
        assert_eq!(qst.total_samples, 24);
        assert_eq!(qst.bytes_estimate, 24 * 7 + 12 * 4);
    }

    #[test]
    fn quantized_normals_stay_within_a_degree_and_keep_their_bytes() {
        let mesh = fixtures::icosphere(Point3::new(0.5, 0.5, 0.5), 0.3, 3);
        for n in mesh.face_normals() {
            let q = quantize_normal(n);
            let dec = decode_normal(q);
            let dot = dec.dot(&n.map(|x| x as f32)).clamp(-1.0, 1.0);
            assert!(dot.acos().to_degrees() <= 1.0);
        }
        let solid = sample_solid(&mesh, &box_grid(32), NormalMode::Quantized8).unwrap();
        for img in solid.images() {
            for s in img.samples() {
                let q = s.qnormal().expect("quantized mode keeps bytes");
                assert_eq!(s.normal, decode_normal(q));
                assert!((s.normal.norm() - 1.0).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn flipping_negates_normal_and_bytes() {
        let s = HermiteSample::quantized(0.5, [74, -74, 73]);
        let f = s.flipped();
        assert_eq!(f.qnormal(), Some([-74, 74, -73]));
        assert_eq!(f.normal, -s.normal);
        assert_eq!(f.depth, s.depth);
        let a = HermiteSample::accurate(0.5, Vector3::new(0.6, 0.0, 0.8));
        assert_eq!(a.flipped().normal, Vector3::new(-0.6, 0.0, -0.8));
        assert_eq!(a.flipped().qnormal(), None);
    }

    #[test]
    fn pixel_column_validation() {
        let s = |d: f32| HermiteSample::accurate(d, Vector3::new(0.0, 0.0, 1.0));
        assert!(PixelColumn::new(vec![s(0.1), s(0.2)]).is_ok());
        assert!(PixelColumn::new(vec![]).is_ok());
        assert_eq!(
            PixelColumn::new(vec![s(0.1)]).unwrap_err(),
            ColumnError::OddCount
        );
        assert_eq!(
            PixelColumn::new(vec![s(0.2), s(0.2)]).unwrap_err(),
            ColumnError::NotIncreasing
        );
    }

    #[test]
    fn validate_parity_flags_hand_built_violations() {
        let grid = box_grid(2);
        let s = |d: f32| HermiteSample::accurate(d, Vector3::new(0.0, 0.0, 1.0));
        let mut cols = vec![Vec::new(); 4];
        cols[0] = vec![s(0.1), s(0.5), s(0.9)];
        let solid = LdniSolid::from_images(
            grid,
            NormalMode::Accurate,
            [
                Ldni::from_columns(Axis::X, grid, cols),
                Ldni::from_columns(Axis::Y, grid, vec![Vec::new(); 4]),
                Ldni::from_columns(Axis::Z, grid, vec![Vec::new(); 4]),
            ],
        )
        .unwrap();
        assert_eq!(validate_parity(&solid), vec![(Axis::X, 0, 0)]);
    }

    #[test]
    fn sampling_is_repeatable_bit_for_bit() {
        let mesh = fixtures::rotated_cube(Point3::new(0.5, 0.5, 0.5), 0.5, 30.0);
        let a = sample_solid(&mesh, &box_grid(32), NormalMode::Accurate).unwrap();
        let b = sample_solid(&mesh, &box_grid(32), NormalMode::Accurate).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn membership_against_oracle_on_rotated_cube() {
        use rand::{Rng, SeedableRng};
        let mesh = fixtures::rotated_cube(Point3::new(0.5, 0.5, 0.5), 0.5, 30.0);
        let grid = box_grid(64);
        let d = grid.pixel_width();
        let solid = sample_solid(&mesh, &grid, NormalMode::Accurate).unwrap();
        let oracle = crate::raycast::SolidOracle::new(&mesh);
        // Exact signed distance to the rotated cube, to exclude points
        // within one pixel of the surface (where the nearest ray may
        // legitimately lie on the other side).
        let ang = 30f64.to_radians();
        let (rc, rs) = (ang.cos(), ang.sin());
        let sdf = |p: &Point3<f64>| -> f64 {
            let (dx, dy, dz) = (p.x - 0.5, p.y - 0.5, p.z - 0.5);
            let q = Vector3::new(
                (rc * dx + rs * dy).abs() - 0.25,
                (-rs * dx + rc * dy).abs() - 0.25,
                dz.abs() - 0.25,
            );
            let outside = q.map(|x| x.max(0.0)).norm();
            outside + q.x.max(q.y).max(q.z).min(0.0)
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut tested = 0;
        while tested < 1500 {
            let p = Point3::new(
                rng.random_range(0.05..0.95),
                rng.random_range(0.05..0.95),
                rng.random_range(0.05..0.95),
            );
            if sdf(&p).abs() < d {
                continue;
            }
            let truth = oracle.is_inside(&p).unwrap();
            assert_eq!(truth, sdf(&p) < 0.0, "oracle disagrees with SDF at {p}");
            // Probe the z image at the nearest ray if the point is close to
            // it.
            let u = ((p.x - grid.origin.x) / d - 0.5).round() as i64;
            let v = ((p.y - grid.origin.y) / d - 0.5).round() as i64;
            if !(0..64).contains(&u) || !(0..64).contains(&v) {
                continue;
            }
            let (cu, cv) = grid.ray_uv(Axis::Z, u as u32, v as u32);
            if (p.x - cu).hypot(p.y - cv) > d / 4.0 {
                continue;
            }
            tested += 1;
            let m = column_membership(
                solid.image(Axis::Z).column(u as u32, v as u32),
                p.z - grid.origin.z,
            );
            assert_eq!(m.is_inside(), truth, "at {p}");
        }
    }
}
