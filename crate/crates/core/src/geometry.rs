//! Planar domains: level sets, boundary parametrizations and ray queries.

use serde::{Deserialize, Serialize};

use crate::{vec2, Error, Result, Vec2, TWO_PI};

/// Shape of a bounded, simply connected domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    UnitDisk,
    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    Rectangle { x0: f64, y0: f64, x1: f64, y1: f64 },
    Ellipse { center: [f64; 2], a: f64, b: f64 },
    /// Star-shaped domain `|x - c| < r0 (1 + Σ a_k cos kθ + b_k sin kθ)`.
    /// Non-convex for large enough coefficients.
    Star {
        center: [f64; 2],
        r0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Interior,
    Boundary,
    Exterior,
}

/// A point on a smooth boundary together with derivatives of the
/// parametrization `t ↦ γ(t)`, `t ∈ [0, 2π)`, counter-clockwise.
#[derive(Clone, Copy, Debug)]
pub struct BoundarySample {
    pub p: Vec2,
    pub d1: Vec2,
    pub d2: Vec2,
}

impl BoundarySample {
    pub fn speed(&self) -> f64 {
        self.d1.norm()
    }
    /// Outward unit normal.
    pub fn normal(&self) -> Vec2 {
        vec2(self.d1.y, -self.d1.x) / self.d1.norm()
    }
    pub fn curvature(&self) -> f64 {
        (self.d1.x * self.d2.y - self.d1.y * self.d2.x) / self.d1.norm().powi(3)
    }
}

/// Domain geometry with the spacing used for boundary resolution and for
/// finite-difference steps on numeric paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub shape: Shape,
    pub spacing: f64,
}

impl Domain {
    pub fn new(shape: Shape) -> Result<Self> {
        shape.validate()?;
        let (lo, hi) = shape.bbox();
        let spacing = (hi - lo).max() / 256.0;
        Ok(Self { shape, spacing })
    }

    pub fn with_spacing(shape: Shape, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::Argument(format!("spacing must be positive, got {spacing}")));
        }
        shape.validate()?;
        Ok(Self { shape, spacing })
    }

    pub fn unit_disk() -> Self {
        Self::new(Shape::UnitDisk).unwrap()
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(Shape::Rectangle { x0, y0, x1, y1 })
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        self.shape.bbox()
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    /// Signed level function, negative inside. Distance-like near the boundary.
    pub fn level(&self, p: Vec2) -> f64 {
        self.shape.level(p)
    }

    fn boundary_tol(&self) -> f64 {
        1e-13 * self.diameter()
    }

    pub fn locate(&self, p: Vec2) -> Location {
        let l = self.level(p);
        if !l.is_finite() {
            return Location::Exterior;
        }
        if l < -self.boundary_tol() {
            Location::Interior
        } else if l <= self.boundary_tol() {
            Location::Boundary
        } else {
            Location::Exterior
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.locate(p) == Location::Interior
    }

    /// Fails with a domain error unless `p` is strictly inside.
    pub fn require_interior(&self, p: Vec2, what: &str) -> Result<()> {
        match self.locate(p) {
            Location::Interior => Ok(()),
            Location::Boundary => Err(Error::Domain(format!("{what} ({}, {}) lies on the boundary", p.x, p.y))),
            Location::Exterior => Err(Error::Domain(format!("{what} ({}, {}) lies outside the domain", p.x, p.y))),
        }
    }

    /// Fraction `t ∈ (0, 1]` along `a → b` where the segment leaves the
    /// domain; `a` must be interior and `b` not.
    pub fn segment_exit(&self, a: Vec2, b: Vec2) -> f64 {
        if let Shape::Rectangle { .. } = self.shape {
            // linear level along axis-aligned segments: exact
            let la = self.level(a);
            let lb = self.level(b);
            if lb > la {
                return (-la / (lb - la)).clamp(0.0, 1.0);
            }
        }
        if self.locate(b) == Location::Boundary {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.level(a + (b - a) * mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-17 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Distance along the unit direction `dir` from interior `o` to the first
    /// boundary crossing.
    pub fn ray_exit(&self, o: Vec2, dir: Vec2) -> f64 {
        match &self.shape {
            Shape::UnitDisk => {
                let b = o.dot(&dir);
                let c = o.norm_squared() - 1.0;
                -b + (b * b - c).max(0.0).sqrt()
            }
            Shape::Rectangle { x0, y0, x1, y1 } => {
                let mut s = f64::INFINITY;
                if dir.x > 0.0 {
                    s = s.min((x1 - o.x) / dir.x);
                } else if dir.x < 0.0 {
                    s = s.min((x0 - o.x) / dir.x);
                }
                if dir.y > 0.0 {
                    s = s.min((y1 - o.y) / dir.y);
                } else if dir.y < 0.0 {
                    s = s.min((y0 - o.y) / dir.y);
                }
                s
            }
            _ => {
                let step = self.diameter() / 512.0;
                let mut s = 0.0;
                while self.level(o + dir * (s + step)) < 0.0 {
                    s += step;
                }
                s + step * self.segment_exit(o + dir * s, o + dir * (s + step))
            }
        }
    }

    /// Euclidean distance from `p` to the boundary.
    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        match &self.shape {
            Shape::UnitDisk => (1.0 - p.norm()).abs(),
            Shape::Rectangle { x0, y0, x1, y1 } => {
                if self.contains(p) {
                    (p.x - x0).min(x1 - p.x).min(p.y - y0).min(y1 - p.y)
                } else {
                    let dx = (x0 - p.x).max(p.x - x1).max(0.0);
                    let dy = (y0 - p.y).max(p.y - y1).max(0.0);
                    dx.hypot(dy)
                }
            }
            _ => {
                let n = 1024;
                let mut best = (f64::INFINITY, 0.0);
                for k in 0..n {
                    let t = TWO_PI * k as f64 / n as f64;
                    let d = (self.shape.boundary(t).unwrap().p - p).norm();
                    if d < best.0 {
                        best = (d, t);
                    }
                }
                // Newton on d/dt |γ(t) - p|² = 0
                let mut t = best.1;
                for _ in 0..20 {
                    let b = self.shape.boundary(t).unwrap();
                    let r = b.p - p;
                    let f = r.dot(&b.d1);
                    let df = b.d1.norm_squared() + r.dot(&b.d2);
                    if df <= 0.0 {
                        break;
                    }
                    let dt = f / df;
                    t -= dt;
                    if dt.abs() < 1e-15 {
                        break;
                    }
                }
                best.0.min((self.shape.boundary(t).unwrap().p - p).norm())
            }
        }
    }

    /// Smooth boundary parametrization; `None` for domains with corners.
    pub fn boundary(&self, t: f64) -> Option<BoundarySample> {
        self.shape.boundary(t)
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self.shape, Shape::Rectangle { .. })
    }

    pub fn perimeter(&self) -> f64 {
        match &self.shape {
            Shape::Rectangle { x0, y0, x1, y1 } => 2.0 * ((x1 - x0) + (y1 - y0)),
            _ => {
                let n = 4096;
                (0..n)
                    .map(|k| self.shape.boundary(TWO_PI * k as f64 / n as f64).unwrap().speed())
                    .sum::<f64>()
                    * TWO_PI
                    / n as f64
            }
        }
    }

    /// Short identifier used in file headers.
    pub fn id(&self) -> String {
        match &self.shape {
            Shape::UnitDisk => "unit_disk".into(),
            Shape::Rectangle { x0, y0, x1, y1 } => format!("rectangle[{x0},{x1}]x[{y0},{y1}]"),
            Shape::Ellipse { center, a, b } => format!("ellipse(c=({},{}),a={a},b={b})", center[0], center[1]),
            Shape::Star { center, r0, .. } => format!("star(c=({},{}),r0={r0})", center[0], center[1]),
        }
    }
}

impl Shape {
    fn validate(&self) -> Result<()> {
        match self {
            Shape::UnitDisk => Ok(()),
            Shape::Rectangle { x0, y0, x1, y1 } => {
                if x1 > x0 && y1 > y0 {
                    Ok(())
                } else {
                    Err(Error::Geometry("rectangle needs x1 > x0 and y1 > y0".into()))
                }
            }
            Shape::Ellipse { a, b, .. } => {
                if *a > 0.0 && *b > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Geometry("ellipse semi-axes must be positive".into()))
                }
            }
            Shape::Star { r0, .. } => {
                if !(*r0 > 0.0) {
                    return Err(Error::Geometry("star radius must be positive".into()));
                }
                let min = (0..2048)
                    .map(|k| self.star_radius(TWO_PI * k as f64 / 2048.0).0)
                    .fold(f64::INFINITY, f64::min);
                if min > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Geometry("star radius function must stay positive".into()))
                }
            }
        }
    }

    /// Radius and its first two derivatives in θ for star shapes.
    fn star_radius(&self, th: f64) -> (f64, f64, f64) {
        let Shape::Star { r0, cos, sin, .. } = self else {
            return (0.0, 0.0, 0.0);
        };
        let (mut r, mut r1, mut r2) = (1.0, 0.0, 0.0);
        for (k, a) in cos.iter().enumerate() {
            let kf = (k + 1) as f64;
            let (s, c) = (kf * th).sin_cos();
            r += a * c;
            r1 -= a * kf * s;
            r2 -= a * kf * kf * c;
        }
        for (k, b) in sin.iter().enumerate() {
            let kf = (k + 1) as f64;
            let (s, c) = (kf * th).sin_cos();
            r += b * s;
            r1 += b * kf * c;
            r2 -= b * kf * kf * s;
        }
        (r0 * r, r0 * r1, r0 * r2)
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        match self {
            Shape::UnitDisk => (vec2(-1.0, -1.0), vec2(1.0, 1.0)),
            Shape::Rectangle { x0, y0, x1, y1 } => (vec2(*x0, *y0), vec2(*x1, *y1)),
            Shape::Ellipse { center, a, b } => (
                vec2(center[0] - a, center[1] - b),
                vec2(center[0] + a, center[1] + b),
            ),
            Shape::Star { .. } => {
                let mut lo = vec2(f64::INFINITY, f64::INFINITY);
                let mut hi = -lo;
                for k in 0..4096 {
                    let p = self.boundary(TWO_PI * k as f64 / 4096.0).unwrap().p;
                    lo = lo.inf(&p);
                    hi = hi.sup(&p);
                }
                let pad = 1e-3 * (hi - lo).max();
                (lo - vec2(pad, pad), hi + vec2(pad, pad))
            }
        }
    }

    pub fn level(&self, p: Vec2) -> f64 {
        match self {
            Shape::UnitDisk => p.norm() - 1.0,
            Shape::Rectangle { x0, y0, x1, y1 } => (x0 - p.x).max(p.x - x1).max(y0 - p.y).max(p.y - y1),
            Shape::Ellipse { center, a, b } => {
                let q = vec2((p.x - center[0]) / a, (p.y - center[1]) / b);
                (q.norm() - 1.0) * a.min(*b)
            }
            Shape::Star { center, .. } => {
                let d = p - vec2(center[0], center[1]);
                d.norm() - self.star_radius(d.y.atan2(d.x)).0
            }
        }
    }

    pub fn boundary(&self, t: f64) -> Option<BoundarySample> {
        let (s, c) = t.sin_cos();
        match self {
            Shape::UnitDisk => Some(BoundarySample { p: vec2(c, s), d1: vec2(-s, c), d2: vec2(-c, -s) }),
            Shape::Rectangle { .. } => None,
            Shape::Ellipse { center, a, b } => Some(BoundarySample {
                p: vec2(center[0] + a * c, center[1] + b * s),
                d1: vec2(-a * s, b * c),
                d2: vec2(-a * c, -b * s),
            }),
            Shape::Star { center, .. } => {
                let (r, r1, r2) = self.star_radius(t);
                let e = vec2(c, s);
                let ep = vec2(-s, c);
                Some(BoundarySample {
                    p: vec2(center[0], center[1]) + e * r,
                    d1: e * r1 + ep * r,
                    d2: e * (r2 - r) + ep * (2.0 * r1),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        let d = Domain::unit_disk();
        assert_eq!(d.locate(vec2(0.0, 0.0)), Location::Interior);
        assert_eq!(d.locate(vec2(1.0, 0.0)), Location::Boundary);
        assert_eq!(d.locate(vec2(0.0, 1.5)), Location::Exterior);
        let r = Domain::rectangle(0.0, 0.0, 2.0, 1.0).unwrap();
        assert_eq!(r.locate(vec2(2.0, 0.5)), Location::Boundary);
        assert!(r.contains(vec2(1.9, 0.9)));
    }

    #[test]
    fn segment_and_ray_exit() {
        let d = Domain::unit_disk();
        let t = d.segment_exit(vec2(0.0, 0.0), vec2(2.0, 0.0));
        assert!((t - 0.5).abs() < 1e-14);
        let s = d.ray_exit(vec2(0.5, 0.0), vec2(-1.0, 0.0));
        assert!((s - 1.5).abs() < 1e-14);
        let e = Domain::new(Shape::Ellipse { center: [0.0, 0.0], a: 2.0, b: 1.0 }).unwrap();
        let s = e.ray_exit(vec2(0.0, 0.0), vec2(1.0, 0.0));
        assert!((s - 2.0).abs() < 1e-12, "{s}");
    }

    #[test]
    fn boundary_parametrization_derivatives() {
        let star = Shape::Star { center: [0.1, 0.0], r0: 1.0, cos: vec![0.0, 0.0, 0.25], sin: vec![0.05] };
        let h = 1e-5;
        for k in 0..7 {
            let t = 0.3 + k as f64;
            let b = star.boundary(t).unwrap();
            let fd1 = (star.boundary(t + h).unwrap().p - star.boundary(t - h).unwrap().p) / (2.0 * h);
            let fd2 = (star.boundary(t + h).unwrap().d1 - star.boundary(t - h).unwrap().d1) / (2.0 * h);
            assert!((fd1 - b.d1).norm() < 1e-8);
            assert!((fd2 - b.d2).norm() < 1e-8);
            assert!(star.level(b.p).abs() < 1e-12);
        }
    }

    #[test]
    fn distances() {
        let e = Domain::new(Shape::Ellipse { center: [0.0, 0.0], a: 2.0, b: 1.0 }).unwrap();
        assert!((e.distance_to_boundary(vec2(0.0, 0.5)) - 0.5).abs() < 1e-10);
        assert!((Domain::unit_disk().perimeter() - TWO_PI).abs() < 1e-12);
    }
}
