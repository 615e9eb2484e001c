//! Small geometric primitives shared by the sampler, the contouring stage and
//! the error metrics: axis bookkeeping, consistent 2D orientation tests and
//! exact point/triangle distance.

use nalgebra::{Point2, Point3, Vector3};

/// One of the three image axes. Every depth-normal image is perpendicular to
/// exactly one of these; its rays run parallel to the axis.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

/// All three axes in canonical order.
pub const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

impl Axis {
    /// Index of the axis into a coordinate triple.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// The two cross axes `(u, v)` of the image plane, in cyclic order
    /// (`X -> (Y, Z)`, `Y -> (Z, X)`, `Z -> (X, Y)`), so that
    /// `unit(u) x unit(v) = unit(axis)` and windings stay right-handed.
    #[inline]
    pub fn cross_axes(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::Z, Axis::X),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }

    /// Unit vector along the axis.
    #[inline]
    pub fn unit(self) -> Vector3<f64> {
        match self {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        }
    }

    /// Project a 3D point onto the image plane of this axis, returning the
    /// `(u, v)` cross coordinates in cyclic order.
    #[inline]
    pub fn project(self, p: &Point3<f64>) -> Point2<f64> {
        let (u, v) = self.cross_axes();
        Point2::new(p[u.index()], p[v.index()])
    }

    /// Rebuild a 3D point from an axis coordinate plus `(u, v)` cross
    /// coordinates.
    #[inline]
    pub fn unproject(self, along: f64, u: f64, v: f64) -> Point3<f64> {
        let (au, av) = self.cross_axes();
        let mut p = Point3::origin();
        p[self.index()] = along;
        p[au.index()] = u;
        p[av.index()] = v;
        p
    }
}

/// Twice the signed area of the 2D triangle `(a, b, c)`.
///
/// The sign partitions the plane consistently only when the same expression is
/// evaluated with the same operand order, which is why callers that compare
/// classifications across neighbouring triangles must go through
/// [`canonical_edge_side`].
#[inline]
pub fn orient2d(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Orientation of point `p` against the projected mesh edge `(ia, ib)`.
///
/// The evaluation order is fixed by the *vertex indices*, not by the winding
/// of whichever face asked: both faces sharing the edge obtain bitwise the
/// same scalar, so "left of", "right of" and "exactly on" partition the plane
/// identically for the two faces. Returns the orientation value together with
/// a flag telling whether the canonical order swapped the endpoints.
#[inline]
pub fn canonical_edge_side(
    ia: u32,
    a: Point2<f64>,
    ib: u32,
    b: Point2<f64>,
    p: Point2<f64>,
) -> (f64, bool) {
    if ia <= ib {
        (orient2d(a, b, p), false)
    } else {
        (orient2d(b, a, p), true)
    }
}

/// Squared Euclidean distance from point `p` to triangle `(a, b, c)`.
///
/// Classic region decomposition over the barycentric parameterization; exact
/// for all degenerate inputs (needle and cap triangles fall back to the
/// closest edge or vertex).
pub fn point_triangle_distance_sq(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;

    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared(); // vertex region a
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared(); // vertex region b
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return (ap - ab * t).norm_squared(); // edge region ab
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared(); // vertex region c
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return (ap - ac * t).norm_squared(); // edge region ac
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        let bc = c - b;
        return (bp - bc * t).norm_squared(); // edge region bc
    }

    // interior region: project onto the triangle plane
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    let closest = a + ab * v + ac * w;
    (p - closest).norm_squared()
}

/// Distance flavour of [`point_triangle_distance_sq`].
#[inline]
pub fn point_triangle_distance(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> f64 {
    point_triangle_distance_sq(p, a, b, c).sqrt()
}

/// Distance from a point to a 3D segment `(a, b)`.
pub fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_squared();
    if len_sq == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len_sq).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}
