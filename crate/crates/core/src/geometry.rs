//! Planar geometry for word regions: convex quads, polygon clipping, IoU,
//! and sampling of displaced boxes at a prescribed IoU.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Signed areas with magnitude below this are snapped to zero to absorb
/// collinear-edge noise from clipping.
pub const AREA_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible IoU target {target} for the requested sampling mode")]
    InfeasibleTarget { target: f64 },
}

/// A point in page pixel coordinates (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// An axis-aligned box, the fast path for IAM-style annotations and for
/// layout computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl AxisBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(GeometryError::InvalidGeometry(format!(
                "empty axis box ({x_min},{y_min})-({x_max},{y_max})"
            )));
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        Point2::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn to_quad(&self) -> Quad {
        Quad::from_points([
            Point2::new(self.x_min, self.y_min),
            Point2::new(self.x_max, self.y_min),
            Point2::new(self.x_max, self.y_max),
            Point2::new(self.x_min, self.y_max),
        ])
        .expect("non-empty axis box is a valid quad")
    }

    pub fn intersects(&self, other: &AxisBox) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }
}

/// A convex four-vertex word region in page pixel coordinates.
///
/// Vertices are stored in canonical order: clockwise on screen (y down),
/// starting at the vertex with minimal (y, x). Construction rejects
/// non-convex or degenerate vertex sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    vertices: [Point2; 4],
}

impl Quad {
    /// Builds a canonical quad from four vertices in any order.
    pub fn from_points(points: [Point2; 4]) -> Result<Self, GeometryError> {
        for p in &points {
            if !p.is_finite() {
                return Err(GeometryError::InvalidGeometry(
                    "non-finite vertex coordinate".into(),
                ));
            }
        }
        let mut pts = points;
        // Sort around the centroid. Screen-clockwise equals mathematical
        // counterclockwise because y points down, so the standard shoelace
        // sum of the result is positive.
        let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
        let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
        pts.sort_by(|a, b| {
            let aa = (a.y - cy).atan2(a.x - cx);
            let ab = (b.y - cy).atan2(b.x - cx);
            aa.partial_cmp(&ab).unwrap()
        });

        let signed = signed_area(&pts);
        if signed.abs() <= AREA_EPS {
            return Err(GeometryError::InvalidGeometry("degenerate quad (zero area)".into()));
        }
        if signed < 0.0 {
            pts.reverse();
        }

        // Convexity: all consecutive edge cross products share a sign.
        for i in 0..4 {
            let a = pts[i];
            let b = pts[(i + 1) % 4];
            let c = pts[(i + 2) % 4];
            let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
            if cross < -AREA_EPS {
                return Err(GeometryError::InvalidGeometry("non-convex vertex set".into()));
            }
        }

        // Start at minimal (y, then x).
        let start = (0..4)
            .min_by(|&i, &j| {
                (pts[i].y, pts[i].x)
                    .partial_cmp(&(pts[j].y, pts[j].x))
                    .unwrap()
            })
            .unwrap();
        pts.rotate_left(start);
        Ok(Self { vertices: pts })
    }

    pub fn vertices(&self) -> &[Point2; 4] {
        &self.vertices
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Quad {
        let v = self.vertices.map(|p| Point2::new(p.x + dx, p.y + dy));
        Quad::from_points(v).expect("translation preserves validity")
    }
}

fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    s / 2.0
}

/// Area of a convex polygon given in consistent winding order.
pub fn polygon_area(pts: &[Point2]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let a = signed_area(pts).abs();
    if a <= AREA_EPS {
        0.0
    } else {
        a
    }
}

/// Area of a quad via the shoelace formula.
pub fn quad_area(q: &Quad) -> f64 {
    polygon_area(&q.vertices)
}

/// Intersection of two convex quads by clipping `a` against every
/// half-plane of `b` (Sutherland-Hodgman). The result has 0 to 8 vertices.
pub fn convex_intersection(a: &Quad, b: &Quad) -> Vec<Point2> {
    let mut poly: Vec<Point2> = a.vertices.to_vec();
    let bv = b.vertices;
    for i in 0..4 {
        if poly.is_empty() {
            break;
        }
        let e0 = bv[i];
        let e1 = bv[(i + 1) % 4];
        poly = clip_halfplane(&poly, e0, e1);
    }
    if polygon_area(&poly) == 0.0 {
        return Vec::new();
    }
    poly
}

/// Keeps the part of `poly` on the interior side of directed edge e0->e1.
/// Interior is the left side in shoelace-positive winding.
fn clip_halfplane(poly: &[Point2], e0: Point2, e1: Point2) -> Vec<Point2> {
    let side = |p: Point2| (e1.x - e0.x) * (p.y - e0.y) - (e1.y - e0.y) * (p.x - e0.x);
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let sc = side(cur);
        let sn = side(next);
        if sc >= 0.0 {
            out.push(cur);
        }
        if (sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0) {
            let t = sc / (sc - sn);
            out.push(Point2::new(
                cur.x + t * (next.x - cur.x),
                cur.y + t * (next.y - cur.y),
            ));
        }
    }
    out
}

/// Intersection over union of two quads.
pub fn iou(a: &Quad, b: &Quad) -> f64 {
    let ia = polygon_area(&convex_intersection(a, b));
    let aa = quad_area(a);
    let ab = quad_area(b);
    let union = aa + ab - ia;
    if union <= 0.0 {
        return 0.0;
    }
    (ia / union).clamp(0.0, 1.0)
}

/// How the IoU sampler perturbs the ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SampleMode {
    /// Displace a congruent copy of the box (no size change).
    #[default]
    TranslateOnly,
    /// Additionally jitter each axis scale by up to +/-10% before displacing.
    ScaleJitter,
}

/// Lowest IoU target the sampler accepts.
pub const SAMPLE_TARGET_MIN: f64 = 0.05;

/// Draws a quad whose IoU with `gt` is within `epsilon` of `target`.
///
/// The displacement direction is uniformly random; the magnitude is found
/// by bisection along that ray, using the fact that overlap with a
/// translated copy is non-increasing in the displacement magnitude.
pub fn sample_quad_at_iou<R: Rng>(
    gt: &Quad,
    target: f64,
    epsilon: f64,
    mode: SampleMode,
    rng: &mut R,
) -> Result<Quad, GeometryError> {
    if !(SAMPLE_TARGET_MIN..=1.0).contains(&target) {
        return Err(GeometryError::InfeasibleTarget { target });
    }
    if epsilon <= 0.0 {
        return Err(GeometryError::InvalidArgument("epsilon must be positive".into()));
    }
    if target == 1.0 && mode == SampleMode::TranslateOnly {
        return Ok(*gt);
    }

    let base = match mode {
        SampleMode::TranslateOnly => *gt,
        SampleMode::ScaleJitter => {
            // Shrink the jitter toward identity until the target stays
            // reachable at zero displacement.
            let mut sx: f64 = rng.gen_range(0.9..=1.1);
            let mut sy: f64 = rng.gen_range(0.9..=1.1);
            loop {
                let cand = scale_about_centroid(gt, sx, sy);
                if iou(gt, &cand) >= target {
                    break cand;
                }
                sx = 1.0 + (sx - 1.0) * 0.5;
                sy = 1.0 + (sy - 1.0) * 0.5;
            }
        }
    };

    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    sample_along_direction(gt, &base, target, epsilon, angle.cos(), angle.sin())
}

/// Bisects the displacement of `base` along (dx, dy) until the IoU with
/// `gt` lands within `epsilon` of `target`. Direction must be a unit vector.
pub fn sample_along_direction(
    gt: &Quad,
    base: &Quad,
    target: f64,
    epsilon: f64,
    dx: f64,
    dy: f64,
) -> Result<Quad, GeometryError> {
    let at = |s: f64| base.translate(s * dx, s * dy);
    if iou(gt, base) < target - epsilon {
        return Err(GeometryError::InfeasibleTarget { target });
    }

    // Grow until the IoU drops below target, then bisect.
    let ext = enclosing_axis_box(gt);
    let mut hi = (ext.width() + ext.height()).max(1.0);
    let mut grow = 0;
    while iou(gt, &at(hi)) >= target {
        hi *= 2.0;
        grow += 1;
        if grow > 64 {
            return Err(GeometryError::InfeasibleTarget { target });
        }
    }
    let mut lo = 0.0;
    for _ in 0..64 {
        let mid = (lo + hi) / 2.0;
        let v = iou(gt, &at(mid));
        if (v - target).abs() <= epsilon {
            return Ok(at(mid));
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let result = at((lo + hi) / 2.0);
    if (iou(gt, &result) - target).abs() <= epsilon {
        Ok(result)
    } else {
        Err(GeometryError::InfeasibleTarget { target })
    }
}

fn scale_about_centroid(q: &Quad, sx: f64, sy: f64) -> Quad {
    let v = q.vertices();
    let cx = v.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = v.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let scaled = v.map(|p| Point2::new(cx + (p.x - cx) * sx, cy + (p.y - cy) * sy));
    Quad::from_points(scaled).expect("positive scaling preserves validity")
}

/// Scales a quad about the origin, as used by the page resize transform.
pub fn scale_quad(q: &Quad, sx: f64, sy: f64) -> Result<Quad, GeometryError> {
    if sx <= 0.0 || sy <= 0.0 {
        return Err(GeometryError::InvalidArgument(format!(
            "scale factors must be positive, got ({sx}, {sy})"
        )));
    }
    let v = q.vertices().map(|p| Point2::new(p.x * sx, p.y * sy));
    Quad::from_points(v)
}

/// Smallest axis-aligned box containing all vertices of `q`.
pub fn enclosing_axis_box(q: &Quad) -> AxisBox {
    let v = q.vertices();
    let x_min = v.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let x_max = v.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let y_min = v.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y_max = v.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    AxisBox { x_min, y_min, x_max, y_max }
}

/// Closed-form displacement along one axis that yields IoU `t` for an
/// axis box of extent `w` along that axis: dx = w(1-t)/(1+t).
pub fn axis_offset_for_target(extent: f64, target: f64) -> f64 {
    extent * (1.0 - target) / (1.0 + target)
}
