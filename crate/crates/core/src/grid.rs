//! The cubic sampling grid shared by the three orthogonal depth-normal images.
//!
//! A grid is an axis-aligned cube of edge length `width` anchored at `origin`,
//! subdivided into `resolution` pixels per side. Rays are cast through pixel
//! *centers*, so the rays of the three images meet in `resolution^3` grid
//! nodes at coordinates `origin + (i + 0.5) * pixel_width` per axis.

use nalgebra::Point3;
use std::fmt;

use crate::geom::Axis;
use crate::mesh::TriangleMesh;

/// Errors raised while building a [`GridSpec`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum GridError {
    /// The per-side resolution must be at least 2.
    BadResolution(u32),
    /// The cube edge length must be a finite positive number.
    BadWidth,
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::BadResolution(w) => {
                write!(f, "grid resolution must be at least 2, got {w}")
            }
            GridError::BadWidth => write!(f, "grid width must be finite and positive"),
        }
    }
}

impl std::error::Error for GridError {}

/// Cubic sampling domain shared by all three images of a solid.
///
/// Two solids can be combined by the boolean stage only when their grids
/// compare *exactly* equal (same origin bits, same width bits, same
/// resolution); there is no resampling fallback.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GridSpec {
    /// Minimum corner of the sampling cube.
    pub origin: Point3<f64>,
    /// Edge length of the cube, in model units.
    pub width: f64,
    /// Number of pixels along each side of each image (`w`); the images are
    /// `w x w` and the node lattice is `w^3`.
    pub resolution: u32,
}

impl GridSpec {
    /// Build a grid, validating the resolution and edge length.
    pub fn new(origin: Point3<f64>, width: f64, resolution: u32) -> Result<Self, GridError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(GridError::BadWidth);
        }
        if resolution < 2 {
            return Err(GridError::BadResolution(resolution));
        }
        Ok(GridSpec {
            origin,
            width,
            resolution,
        })
    }

    /// Grid whose cube is the padded bounding cube of `mesh` (see
    /// [`crate::mesh::bounding_cube`]).
    pub fn fitted(mesh: &TriangleMesh, padding: f64, resolution: u32) -> Result<Self, GridError> {
        let (origin, width) = crate::mesh::bounding_cube(mesh, padding);
        GridSpec::new(origin, width, resolution)
    }

    /// Grid whose cube is the padded bounding cube of several meshes at once,
    /// used when operands of a boolean must share one grid.
    pub fn fitted_all(
        meshes: &[&TriangleMesh],
        padding: f64,
        resolution: u32,
    ) -> Result<Self, GridError> {
        let (origin, width) = crate::mesh::bounding_cube_of(meshes, padding);
        GridSpec::new(origin, width, resolution)
    }

    /// Side length of one pixel (and spacing of the node lattice).
    #[inline]
    pub fn pixel_width(&self) -> f64 {
        self.width / self.resolution as f64
    }

    /// Depth of the node plane with index `i` along any axis, measured from
    /// the grid origin: `(i + 0.5) * pixel_width`.
    #[inline]
    pub fn node_depth(&self, i: u32) -> f64 {
        (i as f64 + 0.5) * self.pixel_width()
    }

    /// World coordinate of a pixel center along one axis.
    #[inline]
    pub fn pixel_center(&self, axis: Axis, i: u32) -> f64 {
        self.origin[axis.index()] + self.node_depth(i)
    }

    /// World position of grid node `(i, j, k)` (O(1); nodes are the
    /// intersections of the three images' rays).
    #[inline]
    pub fn node_position(&self, i: u32, j: u32, k: u32) -> Point3<f64> {
        Point3::new(
            self.pixel_center(Axis::X, i),
            self.pixel_center(Axis::Y, j),
            self.pixel_center(Axis::Z, k),
        )
    }

    /// `(u, v)` world coordinates of the ray of image `axis` at pixel
    /// `(u, v)`, in the axis' cyclic cross-coordinate order.
    #[inline]
    pub fn ray_uv(&self, axis: Axis, u: u32, v: u32) -> (f64, f64) {
        let (au, av) = axis.cross_axes();
        (self.pixel_center(au, u), self.pixel_center(av, v))
    }

    /// Maximum corner of the sampling cube.
    #[inline]
    pub fn max_corner(&self) -> Point3<f64> {
        Point3::new(
            self.origin.x + self.width,
            self.origin.y + self.width,
            self.origin.z + self.width,
        )
    }

    /// Whether an axis-aligned box `[lo, hi]` fits strictly inside the cube.
    /// Boundary contact is rejected: geometry touching the cube faces is a
    /// degenerate sampling configuration, so callers pad their grids.
    pub fn contains_box(&self, lo: &Point3<f64>, hi: &Point3<f64>) -> bool {
        let max = self.max_corner();
        (0..3).all(|a| lo[a] > self.origin[a] && hi[a] < max[a])
    }
}
