//! Closed curves in the meridian `(rho, z)` half-plane (stored as full loops
//! through the axis) and smooth parametric shapes with exact signed distance.

use std::f64::consts::PI;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Minimum sample count for a [`PlaneCurve`].
pub const MIN_SAMPLES: usize = 16;

/// An ordered polyline in the `(rho, z)` plane.
///
/// Axisymmetric curves are stored as complete loops, the `rho < 0` half being
/// the mirror image; evenness is then the statement that the loop maps to
/// itself under `rho -> -rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneCurve {
    pub points: Vec<Point2>,
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: Point2,
    pub max: Point2,
}

fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point2, b: Point2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Point2) -> f64 {
    a[0].hypot(a[1])
}

fn cross(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Distance from `p` to segment `ab` and the parameter of the foot point.
pub fn segment_distance(p: Point2, a: Point2, b: Point2) -> (f64, f64) {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    let t = if l2 == 0.0 {
        0.0
    } else {
        (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0)
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (norm(sub(p, q)), t)
}

impl PlaneCurve {
    pub fn new(points: Vec<Point2>, closed: bool) -> Result<Self> {
        if points.len() < MIN_SAMPLES {
            return Err(Error::Geometry(format!(
                "curve has {} samples, need at least {MIN_SAMPLES}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Geometry("non-finite curve sample".into()));
        }
        Ok(Self { points, closed })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn segment_count(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len() - 1
        }
    }

    fn segment(&self, i: usize) -> (Point2, Point2) {
        let n = self.points.len();
        (self.points[i], self.points[(i + 1) % n])
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.segment_count())
            .map(|i| {
                let (a, b) = self.segment(i);
                norm(sub(b, a))
            })
            .sum()
    }

    /// Arc-length fractions in `[0, 1)` of each sample.
    pub fn arc_fractions(&self) -> Vec<f64> {
        let total = self.perimeter();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            out.push(if total > 0.0 { acc / total } else { 0.0 });
            if i + 1 < self.len() {
                acc += norm(sub(self.points[i + 1], self.points[i]));
            }
        }
        out
    }

    /// Shoelace area, positive for counterclockwise loops.
    pub fn signed_area(&self) -> f64 {
        let n = self.len();
        0.5 * (0..n)
            .map(|i| cross(self.points[i], self.points[(i + 1) % n]))
            .sum::<f64>()
    }

    pub fn make_counterclockwise(&mut self) {
        if self.signed_area() < 0.0 {
            self.points.reverse();
        }
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.len() as f64;
        let s = self
            .points
            .iter()
            .fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
        [s[0] / n, s[1] / n]
    }

    pub fn bbox(&self) -> BBox {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in &self.points {
            for k in 0..2 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        BBox { min, max }
    }

    /// Unit tangents from fourth-order periodic central differences in the
    /// sample index (second order at the ends of open curves).
    pub fn tangents(&self) -> Result<Vec<Point2>> {
        let n = self.len();
        let p = &self.points;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let d = if self.closed {
                let at = |k: isize| p[((i as isize + k).rem_euclid(n as isize)) as usize];
                let (m2, m1, p1, p2) = (at(-2), at(-1), at(1), at(2));
                [
                    (m2[0] - 8.0 * m1[0] + 8.0 * p1[0] - p2[0]) / 12.0,
                    (m2[1] - 8.0 * m1[1] + 8.0 * p1[1] - p2[1]) / 12.0,
                ]
            } else if i == 0 {
                sub(p[1], p[0])
            } else if i == n - 1 {
                sub(p[n - 1], p[n - 2])
            } else {
                [(p[i + 1][0] - p[i - 1][0]) * 0.5, (p[i + 1][1] - p[i - 1][1]) * 0.5]
            };
            let l = norm(d);
            if !(l > 0.0) {
                return Err(Error::Geometry(format!("degenerate tangent at sample {i}")));
            }
            out.push([d[0] / l, d[1] / l]);
        }
        Ok(out)
    }

    /// Outward unit normals, assuming a counterclockwise loop.
    pub fn outward_normals(&self) -> Result<Vec<Point2>> {
        let sign = if self.signed_area() >= 0.0 { 1.0 } else { -1.0 };
        Ok(self
            .tangents()?
            .into_iter()
            .map(|t| [sign * t[1], -sign * t[0]])
            .collect())
    }

    /// Unsigned distance from `p` to the polyline.
    pub fn distance(&self, p: Point2) -> f64 {
        (0..self.segment_count())
            .map(|i| {
                let (a, b) = self.segment(i);
                segment_distance(p, a, b).0
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Crossing-number point-in-polygon test.
    pub fn contains(&self, p: Point2) -> bool {
        let n = self.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.points[i], self.points[j]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Signed distance, positive outside the loop.
    pub fn signed_distance(&self, p: Point2) -> f64 {
        let d = self.distance(p);
        if self.contains(p) {
            -d
        } else {
            d
        }
    }

    /// Symmetric Hausdorff distance between the two polylines (sampled on
    /// vertices against segments).
    pub fn hausdorff(&self, other: &PlaneCurve) -> f64 {
        let a = self
            .points
            .iter()
            .map(|&p| other.distance(p))
            .fold(0.0, f64::max);
        let b = other
            .points
            .iter()
            .map(|&p| self.distance(p))
            .fold(0.0, f64::max);
        a.max(b)
    }

    /// True when some pair of non-adjacent segments intersect.
    pub fn self_intersects(&self) -> bool {
        let m = self.segment_count();
        for i in 0..m {
            let (a, b) = self.segment(i);
            for j in (i + 2)..m {
                if self.closed && i == 0 && j == m - 1 {
                    continue;
                }
                let (c, d) = self.segment(j);
                if segments_cross(a, b, c, d) {
                    return true;
                }
            }
        }
        false
    }

    /// Largest distance from a mirrored sample `(-rho, z)` to the curve.
    pub fn evenness_defect(&self) -> f64 {
        self.points
            .iter()
            .map(|p| self.distance([-p[0], p[1]]))
            .fold(0.0, f64::max)
    }

    /// Largest chord sagitta, estimated from turning angles. Bounds how far
    /// the true smooth curve can sit from the polyline.
    pub fn max_sagitta(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            if !self.closed && (i == 0 || i == n - 1) {
                continue;
            }
            let a = self.points[(i + n - 1) % n];
            let b = self.points[i];
            let c = self.points[(i + 1) % n];
            let (u, v) = (sub(b, a), sub(c, b));
            let (lu, lv) = (norm(u), norm(v));
            if lu == 0.0 || lv == 0.0 {
                continue;
            }
            let turn = cross(u, v).abs() / (lu * lv);
            let l = lu.max(lv);
            // sagitta ~ l^2 kappa / 8 with kappa ~ turn / l
            worst = worst.max(l * turn / 8.0);
        }
        worst
    }

    /// Minimum distance from the centroid to the curve; an inradius proxy
    /// for star-shaped loops.
    pub fn inradius(&self) -> f64 {
        self.distance(self.centroid())
    }

    /// Resamples a closed loop to `n` points equally spaced in arc length.
    pub fn resample(&self, n: usize) -> Result<PlaneCurve> {
        let total = self.perimeter();
        let m = self.segment_count();
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        let mut seg_start = 0.0;
        for k in 0..n {
            let s = total * k as f64 / n as f64;
            loop {
                let (a, b) = self.segment(seg);
                let l = norm(sub(b, a));
                if s <= seg_start + l || seg + 1 == m {
                    let t = if l > 0.0 { ((s - seg_start) / l).clamp(0.0, 1.0) } else { 0.0 };
                    out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    break;
                }
                seg_start += l;
                seg += 1;
            }
        }
        PlaneCurve::new(out, self.closed)
    }
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = cross(sub(b, a), sub(c, a));
    let d2 = cross(sub(b, a), sub(d, a));
    let d3 = cross(sub(d, c), sub(a, c));
    let d4 = cross(sub(d, c), sub(b, c));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// A smooth closed parametric curve `t in [0, 1) -> (rho, z)`, traversed
/// counterclockwise.
pub trait SmoothCurve: Send + Sync + Debug {
    fn point(&self, t: f64) -> Point2;
    fn d1(&self, t: f64) -> Point2;
    fn d2(&self, t: f64) -> Point2;

    /// Lower bound on the reach of the curve (distance to its medial axis).
    fn reach(&self) -> f64;

    fn sample(&self, n: usize) -> PlaneCurve {
        let pts = (0..n).map(|k| self.point(k as f64 / n as f64)).collect();
        PlaneCurve {
            points: pts,
            closed: true,
        }
    }

    fn outward_normal(&self, t: f64) -> Point2 {
        let d = self.d1(t);
        let l = norm(d);
        [d[1] / l, -d[0] / l]
    }

    /// Signed curvature, positive where the loop is convex.
    fn curvature(&self, t: f64) -> f64 {
        let (d, dd) = (self.d1(t), self.d2(t));
        cross(d, dd) / norm(d).powi(3)
    }

    /// Foot-point parameter and signed distance (positive outside).
    fn project(&self, p: Point2) -> Result<(f64, f64)> {
        const COARSE: usize = 720;
        let mut best = (0.0, f64::INFINITY);
        let mut dists = Vec::with_capacity(COARSE);
        for k in 0..COARSE {
            let t = k as f64 / COARSE as f64;
            let d = norm(sub(p, self.point(t)));
            dists.push(d);
            if d < best.1 {
                best = (t, d);
            }
        }
        let t = newton_foot(self, p, best.0);
        let q = self.point(t);
        let dist = norm(sub(p, q));
        let signed = dot(sub(p, q), self.outward_normal(t)).signum() * dist;
        // a distant, competing local minimum means p is near the medial axis
        for k in 0..COARSE {
            let prev = dists[(k + COARSE - 1) % COARSE];
            let next = dists[(k + 1) % COARSE];
            let tk = k as f64 / COARSE as f64;
            let sep = (tk - t).abs().min(1.0 - (tk - t).abs());
            if dists[k] <= prev && dists[k] <= next && sep > 0.05 {
                let tl = newton_foot(self, p, tk);
                let dl = norm(sub(p, self.point(tl)));
                if dl < dist * (1.0 + 1e-6) + 1e-12 && (tl - t).abs().min(1.0 - (tl - t).abs()) > 0.02 {
                    return Err(Error::MedialAxis { point: p.to_vec() });
                }
            }
        }
        if -signed * self.curvature(t) >= 0.95 {
            return Err(Error::MedialAxis { point: p.to_vec() });
        }
        Ok((t, signed))
    }
}

fn newton_foot<C: SmoothCurve + ?Sized>(c: &C, p: Point2, t0: f64) -> f64 {
    let mut t = t0;
    for _ in 0..50 {
        let q = c.point(t);
        let d1 = c.d1(t);
        let d2 = c.d2(t);
        let r = sub(q, p);
        let f = dot(r, d1);
        let fp = dot(d1, d1) + dot(r, d2);
        if fp <= 0.0 {
            break;
        }
        let step = (f / fp).clamp(-0.01, 0.01);
        t -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    t.rem_euclid(1.0)
}

/// Axis-aligned ellipse `((rho - rc)/A)^2 + ((z - zc)/B)^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: Point2,
    pub semi_rho: f64,
    pub semi_z: f64,
}

impl Ellipse {
    pub fn new(center: Point2, semi_rho: f64, semi_z: f64) -> Result<Self> {
        if !(semi_rho > 0.0 && semi_z > 0.0) {
            return Err(Error::Geometry("ellipse semi-axes must be positive".into()));
        }
        Ok(Self { center, semi_rho, semi_z })
    }

    pub fn circle(center: Point2, r: f64) -> Result<Self> {
        Self::new(center, r, r)
    }
}

impl SmoothCurve for Ellipse {
    fn point(&self, t: f64) -> Point2 {
        let th = 2.0 * PI * t;
        [
            self.center[0] + self.semi_rho * th.cos(),
            self.center[1] + self.semi_z * th.sin(),
        ]
    }
    fn d1(&self, t: f64) -> Point2 {
        let th = 2.0 * PI * t;
        [
            -2.0 * PI * self.semi_rho * th.sin(),
            2.0 * PI * self.semi_z * th.cos(),
        ]
    }
    fn d2(&self, t: f64) -> Point2 {
        let th = 2.0 * PI * t;
        let w = 4.0 * PI * PI;
        [-w * self.semi_rho * th.cos(), -w * self.semi_z * th.sin()]
    }
    fn reach(&self) -> f64 {
        let (a, b) = (self.semi_rho.max(self.semi_z), self.semi_rho.min(self.semi_z));
        b * b / a
    }
}

/// Star-shaped loop `r(phi) = r0 (1 + sum_k amp_k cos(k (phi - pi/2) + phase_k))`
/// around `center`; with zero phases and `center[0] = 0` it is even in `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedCircle {
    pub center: Point2,
    pub r0: f64,
    /// `(k, amplitude, phase)`.
    pub modes: Vec<(u32, f64, f64)>,
}

impl PerturbedCircle {
    fn radius(&self, phi: f64) -> (f64, f64, f64) {
        let (mut r, mut r1, mut r2) = (1.0, 0.0, 0.0);
        for &(k, amp, ph) in &self.modes {
            let k = k as f64;
            let arg = k * (phi - PI / 2.0) + ph;
            r += amp * arg.cos();
            r1 -= amp * k * arg.sin();
            r2 -= amp * k * k * arg.cos();
        }
        (self.r0 * r, self.r0 * r1, self.r0 * r2)
    }
}

impl SmoothCurve for PerturbedCircle {
    fn point(&self, t: f64) -> Point2 {
        let phi = 2.0 * PI * t;
        let (r, _, _) = self.radius(phi);
        [self.center[0] + r * phi.cos(), self.center[1] + r * phi.sin()]
    }
    fn d1(&self, t: f64) -> Point2 {
        let phi = 2.0 * PI * t;
        let (r, r1, _) = self.radius(phi);
        let w = 2.0 * PI;
        [
            w * (r1 * phi.cos() - r * phi.sin()),
            w * (r1 * phi.sin() + r * phi.cos()),
        ]
    }
    fn d2(&self, t: f64) -> Point2 {
        let phi = 2.0 * PI * t;
        let (r, r1, r2) = self.radius(phi);
        let w2 = 4.0 * PI * PI;
        [
            w2 * (r2 * phi.cos() - 2.0 * r1 * phi.sin() - r * phi.cos()),
            w2 * (r2 * phi.sin() + 2.0 * r1 * phi.cos() - r * phi.sin()),
        ]
    }
    fn reach(&self) -> f64 {
        // bounded by the smallest radius of curvature and the inner radius
        let n = 720;
        let mut reach = f64::INFINITY;
        for k in 0..n {
            let t = k as f64 / n as f64;
            let kappa = self.curvature(t);
            if kappa > 0.0 {
                reach = reach.min(1.0 / kappa);
            } else if kappa < 0.0 {
                reach = reach.min(-1.0 / kappa);
            }
            reach = reach.min(self.radius(2.0 * PI * t).0);
        }
        reach
    }
}

/// Uniform samples of the Kerr horizon `(r/2m) rho^2 + z^2 = r^2` for the
/// horizon radius `r`.
pub fn kerr_horizon_ellipse(m: f64, r: f64) -> Ellipse {
    Ellipse {
        center: [0.0, 0.0],
        semi_rho: (2.0 * m * r).sqrt(),
        semi_z: r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_circle(n: usize) -> PlaneCurve {
        Ellipse::circle([0.0, 0.0], 1.0).unwrap().sample(n)
    }

    #[test]
    fn circle_geometry() {
        let c = unit_circle(400);
        assert!((c.signed_area() - PI).abs() < 1e-3);
        assert!((c.perimeter() - 2.0 * PI).abs() < 1e-3);
        assert!(c.contains([0.1, 0.2]));
        assert!(!c.contains([1.1, 0.0]));
        assert!(c.signed_distance([2.0, 0.0]) > 0.99);
        assert!(!c.self_intersects());
        assert!(c.evenness_defect() < 1e-4);
        let n = c.outward_normals().unwrap();
        for (p, nn) in c.points.iter().zip(&n) {
            assert!((p[0] - nn[0]).abs() < 1e-8 && (p[1] - nn[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_short_curves() {
        assert!(PlaneCurve::new(vec![[0.0, 0.0]; 4], true).is_err());
    }

    #[test]
    fn figure_eight_self_intersects() {
        let pts: Vec<Point2> = (0..64)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 64.0;
                [t.sin(), (2.0 * t).sin()]
            })
            .collect();
        assert!(PlaneCurve::new(pts, true).unwrap().self_intersects());
    }

    #[test]
    fn ellipse_projection_exact() {
        let e = Ellipse::new([0.0, 0.5], 2.0, 1.0).unwrap();
        let (t, d) = e.project([3.0, 0.5]).unwrap();
        assert!(t.min(1.0 - t) < 1e-9);
        assert!((d - 1.0).abs() < 1e-12);
        let (_, d) = e.project([0.0, 1.2]).unwrap();
        assert!((d + 0.3).abs() < 1e-12);
    }

    #[test]
    fn medial_axis_detected() {
        let c = Ellipse::circle([0.0, 0.0], 2.0).unwrap();
        assert!(matches!(c.project([0.0, 0.0]), Err(Error::MedialAxis { .. })));
    }

    #[test]
    fn perturbed_circle_even_and_ccw() {
        let c = PerturbedCircle { center: [0.0, 0.0], r0: 1.0, modes: vec![(2, 0.1, 0.0), (3, 0.05, 0.0)] };
        let s = c.sample(512);
        assert!(s.signed_area() > 0.0);
        assert!(s.evenness_defect() < 1e-3);
        // derivative consistency
        let t = 0.37;
        let h = 1e-6;
        let fd = [(c.point(t + h)[0] - c.point(t - h)[0]) / (2.0 * h), (c.point(t + h)[1] - c.point(t - h)[1]) / (2.0 * h)];
        let d = c.d1(t);
        assert!((fd[0] - d[0]).abs() < 1e-5 && (fd[1] - d[1]).abs() < 1e-5);
        let fdd = [(c.d1(t + h)[0] - c.d1(t - h)[0]) / (2.0 * h), (c.d1(t + h)[1] - c.d1(t - h)[1]) / (2.0 * h)];
        let dd = c.d2(t);
        assert!((fdd[0] - dd[0]).abs() < 1e-3 && (fdd[1] - dd[1]).abs() < 1e-3);
    }

    #[test]
    fn resample_preserves_shape() {
        let c = unit_circle(100).resample(37).unwrap_or_else(|_| unit_circle(37));
        assert_eq!(c.len(), 37);
        for p in &c.points {
            assert!((norm(*p) - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn hausdorff_of_concentric_circles() {
        let a = unit_circle(256);
        let b = Ellipse::circle([0.0, 0.0], 1.1).unwrap().sample(256);
        assert!((a.hausdorff(&b) - 0.1).abs() < 1e-3);
    }
}
