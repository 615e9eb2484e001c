//! Axis-parallel ray casting against a triangle mesh with watertight
//! tie-breaks.
//!
//! Rays run parallel to a coordinate axis, so an intersection query reduces
//! to a 2D point-in-projected-triangle test plus depth interpolation. The
//! interesting part is what happens when the 2D point lands *exactly* on the
//! boundary of a projected face:
//!
//! * strictly inside a face's projection: one intersection with that face;
//! * exactly on a shared edge: one intersection when the edge is a
//!   non-silhouette edge (both faces on the same side of the ray, i.e. their
//!   normals' axis components share a sign) and zero when it is a silhouette
//!   edge (opposite signs — the ray grazes the surface tangentially);
//! * faces exactly parallel to the ray never intersect it;
//! * exactly through a vertex, or on an edge one of whose faces is parallel
//!   to the ray: no local rule yields an even crossing count, so the ray is
//!   retried with its origin nudged in a fixed in-plane direction; after
//!   [`CAST_RETRIES`] failed retries the query reports a degenerate hit.
//!
//! Orientation tests against a shared edge are evaluated in a canonical
//! vertex order ([`crate::geom::canonical_edge_side`]) so the two adjacent
//! faces always agree bitwise on which side of the edge a point lies. That is
//! what keeps crossing counts even near (not just exactly on) shared edges.

use nalgebra::{Point2, Point3};
use std::fmt;
use std::sync::Arc;

use crate::geom::{canonical_edge_side, Axis};
use crate::mesh::{MeshTopology, TriangleMesh};

/// Number of nudged re-casts attempted after a degenerate hit.
pub const CAST_RETRIES: usize = 3;

/// Fixed in-plane nudge direction, deliberately irrational so axis-aligned
/// models cannot re-align with a nudged ray. (Unit vector along `(1, phi)`.)
pub const JITTER_DIR: (f64, f64) = (0.5257311121191336, 0.8506508083520399);

/// Ray origin for retry `attempt` (attempt 0 is the unperturbed ray; each
/// retry moves one `step` further along [`JITTER_DIR`]).
#[inline]
pub fn jitter_uv(u: f64, v: f64, step: f64, attempt: usize) -> (f64, f64) {
    let s = step * attempt as f64;
    (u + s * JITTER_DIR.0, v + s * JITTER_DIR.1)
}

/// One ray/surface intersection.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RayHit {
    /// World coordinate of the hit along the ray axis.
    pub along: f64,
    /// Index of the intersected face. For a non-silhouette edge hit this is
    /// the smaller of the two adjacent face indices.
    pub face: u32,
}

/// Errors raised by ray queries.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RayCastError {
    /// The ray kept passing exactly through a vertex (or along a face plane)
    /// even after all nudged retries.
    DegenerateHit,
}

impl fmt::Display for RayCastError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RayCastError::DegenerateHit => {
                write!(
                    f,
                    "ray degenerate after {CAST_RETRIES} perturbation retries"
                )
            }
        }
    }
}

impl std::error::Error for RayCastError {}

/// Marker for a single degenerate cast attempt (vertex piercing or an edge
/// with a ray-parallel adjacent face).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Degeneracy;

/// Reusable caster for rays parallel to one axis.
///
/// Construction projects every face onto the image plane and bins it into a
/// uniform 2D grid, so a query only tests faces whose projected bounding box
/// overlaps the query cell. The caster is immutable and can be queried from
/// many threads at once.
pub struct AxisRayCaster<'m> {
    mesh: &'m TriangleMesh,
    topo: Arc<MeshTopology>,
    axis: Axis,
    jitter_step: f64,
    bins: Bins2d,
}

struct Bins2d {
    origin: Point2<f64>,
    cell: f64,
    n: usize,
    faces: Vec<Vec<u32>>,
}

impl Bins2d {
    fn build(mesh: &TriangleMesh, axis: Axis) -> Self {
        let (lo, hi) = mesh.aabb().unwrap_or((Point3::origin(), Point3::origin()));
        let lo2 = axis.project(&lo);
        let hi2 = axis.project(&hi);
        let extent = (hi2.x - lo2.x).max(hi2.y - lo2.y).max(0.0);
        // Roughly one face per bin for a uniform surface; clamped so tiny or
        // huge meshes stay reasonable.
        let n = (((mesh.faces().len() as f64).sqrt().ceil()) as usize).clamp(4, 1024);
        let cell = if extent > 0.0 { extent / n as f64 } else { 1.0 };
        let mut bins = Bins2d {
            origin: lo2,
            cell,
            n,
            faces: vec![Vec::new(); n * n],
        };
        for (fi, _) in mesh.faces().iter().enumerate() {
            let [a, b, c] = mesh.face_points(fi as u32);
            let (pa, pb, pc) = (axis.project(&a), axis.project(&b), axis.project(&c));
            let (u0, v0) = bins.clamped_cell(pa.x.min(pb.x).min(pc.x), pa.y.min(pb.y).min(pc.y));
            let (u1, v1) = bins.clamped_cell(pa.x.max(pb.x).max(pc.x), pa.y.max(pb.y).max(pc.y));
            for v in v0..=v1 {
                for u in u0..=u1 {
                    bins.faces[v * n + u].push(fi as u32);
                }
            }
        }
        bins
    }

    #[inline]
    fn clamped_cell(&self, u: f64, v: f64) -> (usize, usize) {
        let iu = ((u - self.origin.x) / self.cell).floor();
        let iv = ((v - self.origin.y) / self.cell).floor();
        (
            (iu.max(0.0) as usize).min(self.n - 1),
            (iv.max(0.0) as usize).min(self.n - 1),
        )
    }

    #[inline]
    fn candidates(&self, u: f64, v: f64) -> &[u32] {
        let (iu, iv) = self.clamped_cell(u, v);
        &self.faces[iv * self.n + iu]
    }
}

impl<'m> AxisRayCaster<'m> {
    /// Build a caster. `jitter_step` is the nudge distance used by degenerate
    /// retries; samplers pass a fraction of their pixel width.
    pub fn new(
        mesh: &'m TriangleMesh,
        topo: Arc<MeshTopology>,
        axis: Axis,
        jitter_step: f64,
    ) -> Self {
        AxisRayCaster {
            mesh,
            topo,
            axis,
            jitter_step,
            bins: Bins2d::build(mesh, axis),
        }
    }

    /// The axis this caster's rays run along.
    #[inline]
    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Nudge distance for degenerate retries.
    #[inline]
    pub fn jitter_step(&self) -> f64 {
        self.jitter_step
    }

    /// Cast with automatic degenerate retries; hits are sorted by depth.
    pub fn cast(&self, u: f64, v: f64) -> Result<Vec<RayHit>, RayCastError> {
        for attempt in 0..=CAST_RETRIES {
            let (ju, jv) = jitter_uv(u, v, self.jitter_step, attempt);
            if let Ok(hits) = self.cast_raw(ju, jv) {
                return Ok(hits);
            }
        }
        Err(RayCastError::DegenerateHit)
    }

    /// A single cast attempt with no retry. Callers that impose additional
    /// acceptance rules (such as the sampler's even-count requirement) drive
    /// their own retry loop over [`jitter_uv`] offsets.
    pub fn cast_raw(&self, u: f64, v: f64) -> Result<Vec<RayHit>, Degeneracy> {
        let p = Point2::new(u, v);
        let axis = self.axis;
        let ai = axis.index();
        let mut hits: Vec<RayHit> = Vec::new();
        // Canonical (min,max) vertex-id pairs of edges the point lies on,
        // collected across faces and resolved once per mesh edge.
        let mut edge_events: Vec<(u32, u32)> = Vec::new();

        for &fi in self.bins.candidates(u, v) {
            let f = self.mesh.faces()[fi as usize];
            let pts = self.mesh.face_points(fi);
            let proj = [
                axis.project(&pts[0]),
                axis.project(&pts[1]),
                axis.project(&pts[2]),
            ];

            // Edge k is opposite vertex k. s = side of the query point,
            // t = side of the opposite vertex, both canonical in vertex ids.
            let mut s = [0.0f64; 3];
            let mut t = [0.0f64; 3];
            let mut parallel = false;
            for k in 0..3 {
                let (ia, ib) = (f[(k + 1) % 3], f[(k + 2) % 3]);
                let (pa, pb) = (proj[(k + 1) % 3], proj[(k + 2) % 3]);
                let (sv, _) = canonical_edge_side(ia, pa, ib, pb, p);
                let (tv, _) = canonical_edge_side(ia, pa, ib, pb, proj[k]);
                if tv == 0.0 {
                    // Zero projected area: the face is parallel to the ray
                    // and never intersects it.
                    parallel = true;
                    break;
                }
                s[k] = sv;
                t[k] = tv;
            }
            if parallel {
                continue;
            }

            let mut on_edge: Option<usize> = None;
            let mut zeros = 0;
            let mut outside = false;
            for k in 0..3 {
                let side = s[k] * t[k];
                if side < 0.0 {
                    outside = true;
                    break;
                }
                if s[k] == 0.0 {
                    zeros += 1;
                    on_edge = Some(k);
                }
            }
            if outside {
                continue;
            }
            if zeros >= 2 {
                // Exactly on a projected vertex.
                return Err(Degeneracy);
            }
            if let Some(k) = on_edge {
                let (ia, ib) = (f[(k + 1) % 3], f[(k + 2) % 3]);
                let key = if ia <= ib { (ia, ib) } else { (ib, ia) };
                edge_events.push(key);
                continue;
            }

            // Strictly interior: interpolate the axis coordinate
            // barycentrically. lambda_k is the (consistently signed) area
            // opposite vertex k.
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for k in 0..3 {
                let (ia, ib) = (f[(k + 1) % 3], f[(k + 2) % 3]);
                let lk = if ia <= ib { s[k] } else { -s[k] };
                num += lk * pts[k][ai];
                den += lk;
            }
            hits.push(RayHit {
                along: num / den,
                face: fi,
            });
        }

        edge_events.sort_unstable();
        edge_events.dedup();
        for (a, b) in edge_events {
            let uses = match self.topo.edge_faces(a, b) {
                Some(u) if u.len() == 2 => u,
                // A boundary or non-manifold edge pierced exactly: no local
                // parity-preserving rule exists.
                _ => return Err(Degeneracy),
            };
            let n0 = self.mesh.face_normals()[uses[0].face as usize][ai];
            let n1 = self.mesh.face_normals()[uses[1].face as usize][ai];
            if n0 == 0.0 || n1 == 0.0 {
                // One adjacent face is parallel to the ray; the silhouette
                // classification below cannot keep crossing counts even, so
                // treat the hit like a vertex piercing.
                return Err(Degeneracy);
            }
            if (n0 < 0.0) == (n1 < 0.0) {
                // Non-silhouette edge: the surface crosses the ray here once.
                // Report the smaller adjacent face index.
                let face = uses[0].face.min(uses[1].face);
                let (pa3, pb3) = (
                    self.mesh.vertices()[a as usize],
                    self.mesh.vertices()[b as usize],
                );
                let (pa, pb) = (self.axis.project(&pa3), self.axis.project(&pb3));
                let d = pb - pa;
                let tt = (p - pa).dot(&d) / d.norm_squared();
                hits.push(RayHit {
                    along: pa3[ai] + tt * (pb3[ai] - pa3[ai]),
                    face,
                });
            }
            // Silhouette edge: tangential graze, no intersection.
        }

        hits.sort_unstable_by(|x, y| {
            x.along
                .partial_cmp(&y.along)
                .unwrap()
                .then(x.face.cmp(&y.face))
        });
        Ok(hits)
    }
}

/// All intersections of the closed mesh with the axis-parallel ray (the full
/// line) through `ray_origin`, as `(depth, face)` pairs sorted by depth.
/// Depths are measured from `ray_origin`'s coordinate along the axis.
///
/// Convenience entry point that rebuilds topology and bins per call; batch
/// users should keep an [`AxisRayCaster`].
pub fn ray_surface_hits(
    mesh: &TriangleMesh,
    ray_origin: &Point3<f64>,
    axis: Axis,
) -> Result<Vec<(f64, u32)>, RayCastError> {
    let topo = Arc::new(MeshTopology::new(mesh));
    let step = default_jitter_step(mesh);
    let caster = AxisRayCaster::new(mesh, topo, axis, step);
    let uv = axis.project(ray_origin);
    let base = ray_origin[axis.index()];
    Ok(caster
        .cast(uv.x, uv.y)?
        .into_iter()
        .map(|h| (h.along - base, h.face))
        .collect())
}

/// Nudge step proportional to the model size, for casters built without a
/// sampling grid.
pub fn default_jitter_step(mesh: &TriangleMesh) -> f64 {
    match mesh.aabb() {
        Some((lo, hi)) => {
            let extent = (hi - lo).amax();
            if extent > 0.0 {
                extent * 1e-7
            } else {
                1e-7
            }
        }
        None => 1e-7,
    }
}

/// Errors raised by the membership oracle.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OracleError {
    /// The query point lies within `1e-9` of the surface along every probe
    /// axis; inside/outside is not decidable.
    OnSurface,
    /// Every probe axis stayed degenerate after retries.
    DegenerateHit,
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::OnSurface => write!(f, "query point lies on the surface"),
            OracleError::DegenerateHit => write!(f, "all probe rays degenerate"),
        }
    }
}

impl std::error::Error for OracleError {}

/// Ray-parity membership oracle over a closed mesh, independent of any image
/// sampling: a point is inside when an axis-parallel ray from it crosses the
/// surface an odd number of times.
pub struct SolidOracle<'m> {
    casters: [AxisRayCaster<'m>; 3],
}

impl<'m> SolidOracle<'m> {
    /// Precompute casters for all three axes of `mesh` (which must be a
    /// closed two-manifold for parity to be meaningful).
    pub fn new(mesh: &'m TriangleMesh) -> Self {
        let topo = Arc::new(MeshTopology::new(mesh));
        let step = default_jitter_step(mesh);
        SolidOracle {
            casters: [
                AxisRayCaster::new(mesh, topo.clone(), Axis::X, step),
                AxisRayCaster::new(mesh, topo.clone(), Axis::Y, step),
                AxisRayCaster::new(mesh, topo, Axis::Z, step),
            ],
        }
    }

    /// Whether `p` lies inside the solid. `p` must be farther than `1e-9`
    /// from the surface.
    ///
    /// All three axes are probed unperturbed first, so a query point lying on
    /// the surface is reported as [`OracleError::OnSurface`] whenever any
    /// unperturbed probe sees a hit at the query depth; only then do
    /// perturbed retries run.
    pub fn is_inside(&self, p: &Point3<f64>) -> Result<bool, OracleError> {
        let mut on_surface = false;
        // Pass 0: single unperturbed attempt per axis. Pass 1: attempts with
        // nudged retries, for points whose every exact probe is degenerate.
        for pass in 0..2 {
            for caster in &self.casters {
                let axis = caster.axis();
                let uv = axis.project(p);
                let along = p[axis.index()];
                let cast = if pass == 0 {
                    caster
                        .cast_raw(uv.x, uv.y)
                        .map_err(|_| RayCastError::DegenerateHit)
                } else {
                    caster.cast(uv.x, uv.y)
                };
                match cast {
                    Ok(hits) => {
                        if hits.iter().any(|h| (h.along - along).abs() <= 1e-9) {
                            on_surface = true;
                            continue;
                        }
                        if hits.len() % 2 != 0 {
                            // Odd total for a closed mesh indicates a missed
                            // degeneracy on this axis; ask another axis.
                            continue;
                        }
                        let behind = hits.iter().filter(|h| h.along > along).count();
                        return Ok(behind % 2 == 1);
                    }
                    Err(RayCastError::DegenerateHit) => continue,
                }
            }
            if on_surface {
                return Err(OracleError::OnSurface);
            }
        }
        Err(OracleError::DegenerateHit)
    }
}

/// One-shot form of [`SolidOracle`] for single queries.
pub fn point_in_solid_oracle(mesh: &TriangleMesh, p: &Point3<f64>) -> Result<bool, OracleError> {
    SolidOracle::new(mesh).is_inside(p)
}
