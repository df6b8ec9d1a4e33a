//! Down-closed convex polygons in the `(R_SK, R_SM)` quadrant.

use serde::{Deserialize, Serialize};

const COLLINEAR_EPS: f64 = 1e-12;

/// Coordinates closer than this to an axis are put on it.
const AXIS_SNAP: f64 = 1e-12;

fn snap(v: f64) -> f64 {
    if v < AXIS_SNAP {
        0.0
    } else {
        v
    }
}

/// `coef.0 * r_sk + coef.1 * r_sm <= bound`, normalized so `max |coef| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub coef: (f64, f64),
    pub bound: f64,
}

impl HalfPlane {
    fn new(a: f64, b: f64, bound: f64) -> Self {
        let s = a.abs().max(b.abs());
        HalfPlane {
            coef: (a / s, b / s),
            bound: bound / s,
        }
    }

    /// `bound - coef . point`; negative when violated.
    pub fn slack(&self, p: (f64, f64)) -> f64 {
        self.bound - (self.coef.0 * p.0 + self.coef.1 * p.1)
    }
}

/// Vertices are `(R_SK, R_SM)` in bits per use, counterclockwise from the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPolygon {
    vertices: Vec<(f64, f64)>,
    constraints: Vec<HalfPlane>,
}

impl RegionPolygon {
    /// `{(0,0)}`.
    pub fn origin() -> Self {
        Self::down_closed_hull(&[])
    }

    /// The region `R_SM <= a`, `R_SK + R_SM <= b` in the quadrant, bounds clamped at zero.
    pub fn from_bounds(a: f64, b: f64) -> Self {
        let b = b.max(0.0);
        let a = a.max(0.0).min(b);
        Self::down_closed_hull(&[(b, 0.0), (b - a, a)])
    }

    /// Down-closed convex hull of `points` together with the origin.
    pub fn down_closed_hull(points: &[(f64, f64)]) -> Self {
        let mut pts = vec![(0.0, 0.0)];
        for &(x, y) in points {
            let (x, y) = (snap(x), snap(y));
            pts.extend([(x, y), (x, 0.0), (0.0, y)]);
        }
        let vertices = hull_from_origin(pts);
        let constraints = constraints_of(&vertices);
        RegionPolygon {
            vertices,
            constraints,
        }
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn constraints(&self) -> &[HalfPlane] {
        &self.constraints
    }

    /// Smallest constraint slack at `point`; nonnegative means member.
    pub fn margin(&self, point: (f64, f64)) -> f64 {
        self.constraints
            .iter()
            .map(|h| h.slack(point))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, point: (f64, f64), tol: f64) -> bool {
        self.margin(point) >= -tol
    }

    /// Every vertex of `other` lies in `self` within `tol`.
    pub fn contains_region(&self, other: &RegionPolygon, tol: f64) -> bool {
        other.vertices.iter().all(|&v| self.contains(v, tol))
    }

    /// Largest `R_SK + R_SM`.
    pub fn sum_rate(&self) -> f64 {
        self.support((1.0, 1.0))
    }

    pub fn max_key_rate(&self) -> f64 {
        self.support((1.0, 0.0))
    }

    pub fn max_message_rate(&self) -> f64 {
        self.support((0.0, 1.0))
    }

    /// `max lambda * R_SK + mu * R_SM` over the region.
    pub fn support(&self, (lambda, mu): (f64, f64)) -> f64 {
        self.vertices
            .iter()
            .map(|v| lambda * v.0 + mu * v.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Convex hull of the union.
    pub fn union(&self, other: &RegionPolygon) -> RegionPolygon {
        let mut pts = self.vertices.clone();
        pts.extend_from_slice(&other.vertices);
        Self::down_closed_hull(&pts)
    }

    /// Vertices strictly away from both axes.
    pub fn boundary_corners(&self) -> usize {
        self.vertices.iter().filter(|v| v.0 > 0.0 && v.1 > 0.0).count()
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain, rotated so the origin comes first.
fn hull_from_origin(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let scale = pts.iter().fold(1.0f64, |m, p| m.max(p.0).max(p.1));
    let eps = COLLINEAR_EPS * scale * scale;
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= eps {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= eps {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    // lower starts at the smallest (x, y), which is the origin
    lower
}

fn constraints_of(vertices: &[(f64, f64)]) -> Vec<HalfPlane> {
    let nonneg = [HalfPlane::new(-1.0, 0.0, 0.0), HalfPlane::new(0.0, -1.0, 0.0)];
    match vertices.len() {
        0 | 1 => {
            let mut c = nonneg.to_vec();
            c.extend([HalfPlane::new(1.0, 0.0, 0.0), HalfPlane::new(0.0, 1.0, 0.0)]);
            c
        }
        2 => {
            let far = vertices[1];
            let mut c = nonneg.to_vec();
            c.extend([HalfPlane::new(1.0, 0.0, far.0), HalfPlane::new(0.0, 1.0, far.1)]);
            c
        }
        n => (0..n)
            .map(|i| {
                let p = vertices[i];
                let q = vertices[(i + 1) % n];
                let (a, b) = (q.1 - p.1, p.0 - q.0);
                HalfPlane::new(a, b, a * p.0 + b * p.1)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_triangle() -> RegionPolygon {
        RegionPolygon::from_bounds(1.0, 1.0)
    }

    #[test]
    fn triangle_shape() {
        let t = unit_triangle();
        assert_eq!(t.vertices(), &[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        assert_eq!(t.constraints().len(), 3);
        assert_eq!(t.margin((1.0, 1.0)), -1.0);
        assert_eq!(t.margin((0.0, 0.0)), 0.0);
        assert!(t.margin((1.0, 0.0)).abs() < 1e-12);
        assert!(t.margin((0.25, 0.25)) > 0.0);
    }

    #[test]
    fn degenerate_shapes() {
        let o = RegionPolygon::origin();
        assert_eq!(o.vertices(), &[(0.0, 0.0)]);
        assert_eq!(o.margin((0.0, 0.0)), 0.0);
        assert!(o.margin((0.1, 0.0)) < 0.0);

        let key_only = RegionPolygon::from_bounds(0.0, 0.7);
        assert_eq!(key_only.vertices(), &[(0.0, 0.0), (0.7, 0.0)]);
        assert!(key_only.contains((0.7, 0.0), 1e-12));
        assert!(!key_only.contains((0.1, 0.1), 1e-12));
    }

    #[test]
    fn trapezoid() {
        let p = RegionPolygon::from_bounds(0.4, 1.0);
        assert_eq!(p.vertices(), &[(0.0, 0.0), (1.0, 0.0), (0.6, 0.4), (0.0, 0.4)]);
        assert!((p.margin((0.6, 0.4))).abs() < 1e-12);
        assert!(p.margin((0.0, 0.5)) < 0.0);
    }

    proptest! {
        #[test]
        fn hull_is_down_closed_and_contains_inputs(
            pts in prop::collection::vec((0.0f64..3.0, 0.0f64..3.0), 1..30),
            shrink in (0.0f64..1.0, 0.0f64..1.0),
        ) {
            let poly = RegionPolygon::down_closed_hull(&pts);
            for &p in &pts {
                prop_assert!(poly.contains(p, 1e-9));
            }
            for &v in poly.vertices() {
                prop_assert!(v.0 >= 0.0 && v.1 >= 0.0);
                prop_assert!(poly.contains((v.0 * shrink.0, v.1 * shrink.1), 1e-9));
                prop_assert!(poly.margin(v).abs() < 1e-9);
            }
        }
    }
}
