//! Metrics with prescribed horizons.
//!
//! The eikonal problem `|grad a|^2 = a`, `a = 1` on a surface, becomes
//! `|grad b| = 1`, `b = 2` under `b = 2 sqrt(a)`, so `a = (1 + d/2)^2` with `d`
//! the signed distance. A flow with `v = grad a` near the surface has
//! `|v| = 1` exactly on it, which makes the surface both the ergosphere and a
//! characteristic surface.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curve::{PlaneCurve, Point2, SmoothCurve};
use crate::error::{Error, Result};
use crate::metric::{build_flow_metric, Coords, FlowForm, KerrParams, StationaryMetric, V0Mode};

/// A closed hypersurface with signed distance (positive outside).
pub trait Surface: Send + Sync + Debug {
    fn dim(&self) -> usize;
    /// Signed distance and the outward unit normal at the foot point.
    fn signed_distance(&self, p: &[f64]) -> Result<(f64, Vec<f64>)>;
    fn contains(&self, p: &[f64]) -> bool;
    /// A point well inside and its distance to the surface.
    fn center(&self) -> Vec<f64>;
    fn inradius(&self) -> f64;
    /// Lower bound on the distance to the medial axis.
    fn reach(&self) -> f64;
    /// `n` points on the surface with outward unit normals.
    fn samples(&self, n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>);
}

/// A smooth parametric curve viewed as a [`Surface`].
#[derive(Debug, Clone)]
pub struct ParametricCurve {
    pub curve: Arc<dyn SmoothCurve>,
    polygon: PlaneCurve,
    center: Point2,
    inradius: f64,
}

impl ParametricCurve {
    pub fn new(curve: Arc<dyn SmoothCurve>) -> Result<Self> {
        let polygon = curve.sample(1440);
        if polygon.signed_area() <= 0.0 || polygon.self_intersects() {
            return Err(Error::Geometry("curve must be a simple counterclockwise loop".into()));
        }
        let center = polygon.centroid();
        let inradius = polygon.distance(center);
        Ok(Self { curve, polygon, center, inradius })
    }

    pub fn polygon(&self) -> &PlaneCurve {
        &self.polygon
    }
}

impl Surface for ParametricCurve {
    fn dim(&self) -> usize {
        2
    }
    fn signed_distance(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (t, d) = self.curve.project([p[0], p[1]])?;
        Ok((d, self.curve.outward_normal(t).to_vec()))
    }
    fn contains(&self, p: &[f64]) -> bool {
        self.polygon.contains([p[0], p[1]])
    }
    fn center(&self) -> Vec<f64> {
        self.center.to_vec()
    }
    fn inradius(&self) -> f64 {
        self.inradius
    }
    fn reach(&self) -> f64 {
        self.curve.reach()
    }
    fn samples(&self, n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (0..n)
            .map(|k| {
                let t = k as f64 / n as f64;
                (self.curve.point(t).to_vec(), self.curve.outward_normal(t).to_vec())
            })
            .unzip()
    }
}

/// A sampled loop; distances come from the circle through the nearest
/// vertex and its neighbours.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    pub curve: PlaneCurve,
    center: Point2,
    inradius: f64,
    reach: f64,
}

impl SampledCurve {
    pub fn new(mut curve: PlaneCurve) -> Result<Self> {
        if !curve.closed || curve.self_intersects() {
            return Err(Error::Geometry("curve must be closed and simple".into()));
        }
        curve.make_counterclockwise();
        let center = curve.centroid();
        let inradius = curve.distance(center);
        let n = curve.len();
        let mut reach = inradius;
        for i in 0..n {
            if let Some((_, r)) = circumcircle(curve.points[(i + n - 1) % n], curve.points[i], curve.points[(i + 1) % n]) {
                reach = reach.min(r);
            }
        }
        Ok(Self { curve, center, inradius, reach })
    }
}

fn circumcircle(a: Point2, b: Point2, c: Point2) -> Option<(Point2, f64)> {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let scale = (b[0] - a[0]).hypot(b[1] - a[1]) * (c[0] - b[0]).hypot(c[1] - b[1]);
    if d.abs() <= 1e-12 * scale {
        return None;
    }
    let sq = |p: Point2| p[0] * p[0] + p[1] * p[1];
    let ux = (sq(a) * (b[1] - c[1]) + sq(b) * (c[1] - a[1]) + sq(c) * (a[1] - b[1])) / d;
    let uy = (sq(a) * (c[0] - b[0]) + sq(b) * (a[0] - c[0]) + sq(c) * (b[0] - a[0])) / d;
    Some(([ux, uy], (a[0] - ux).hypot(a[1] - uy)))
}

impl Surface for SampledCurve {
    fn dim(&self) -> usize {
        2
    }
    fn signed_distance(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
        let q = [p[0], p[1]];
        let pts = &self.curve.points;
        let n = pts.len();
        let i = (0..n)
            .min_by(|&i, &j| {
                let di = (pts[i][0] - q[0]).hypot(pts[i][1] - q[1]);
                let dj = (pts[j][0] - q[0]).hypot(pts[j][1] - q[1]);
                di.total_cmp(&dj)
            })
            .unwrap();
        let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
        let turn = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        let normal = match circumcircle(a, b, c) {
            Some((o, r)) => {
                let (dx, dy) = (q[0] - o[0], q[1] - o[1]);
                let l = dx.hypot(dy);
                if l == 0.0 {
                    return Err(Error::MedialAxis { point: p.to_vec() });
                }
                let foot = [o[0] + r * dx / l, o[1] + r * dy / l];
                let radial = [(foot[0] - o[0]) / r, (foot[1] - o[1]) / r];
                let nrm = if turn > 0.0 { radial } else { [-radial[0], -radial[1]] };
                let d = (q[0] - foot[0]) * nrm[0] + (q[1] - foot[1]) * nrm[1];
                return Ok((d, nrm.to_vec()));
            }
            None => {
                let t = [c[0] - a[0], c[1] - a[1]];
                let l = t[0].hypot(t[1]);
                [t[1] / l, -t[0] / l]
            }
        };
        let d = (q[0] - b[0]) * normal[0] + (q[1] - b[1]) * normal[1];
        Ok((d, normal.to_vec()))
    }
    fn contains(&self, p: &[f64]) -> bool {
        self.curve.contains([p[0], p[1]])
    }
    fn center(&self) -> Vec<f64> {
        self.center.to_vec()
    }
    fn inradius(&self) -> f64 {
        self.inradius
    }
    fn reach(&self) -> f64 {
        self.reach
    }
    fn samples(&self, n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let c = self.curve.resample(n).unwrap_or_else(|_| self.curve.clone());
        let normals = c.outward_normals().unwrap_or_default();
        (c.points.iter().map(|p| p.to_vec()).collect(), normals.iter().map(|p| p.to_vec()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Surface for Sphere {
    fn dim(&self) -> usize {
        3
    }
    fn signed_distance(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d: Vec<f64> = (0..3).map(|k| p[k] - self.center[k]).collect();
        let l = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if l == 0.0 {
            return Err(Error::MedialAxis { point: p.to_vec() });
        }
        Ok((l - self.radius, d.iter().map(|x| x / l).collect()))
    }
    fn contains(&self, p: &[f64]) -> bool {
        (0..3).map(|k| (p[k] - self.center[k]).powi(2)).sum::<f64>() < self.radius * self.radius
    }
    fn center(&self) -> Vec<f64> {
        self.center.to_vec()
    }
    fn inradius(&self) -> f64 {
        self.radius
    }
    fn reach(&self) -> f64 {
        self.radius
    }
    /// Fibonacci lattice.
    fn samples(&self, n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|k| {
                let y = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let th = golden * k as f64;
                let nrm = vec![r * th.cos(), y, r * th.sin()];
                let p = (0..3).map(|j| self.center[j] + self.radius * nrm[j]).collect();
                (p, nrm)
            })
            .unzip()
    }
}

/// Which side of the surface has `a > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `a > 1` outside; the convention of the Kerr-type families.
    OutwardIncreasing,
    /// `a > 1` inside; the convention of [`build_horizon_metric`].
    InwardIncreasing,
}

#[derive(Debug, Clone)]
pub struct EikonalField {
    pub surface: Arc<dyn Surface>,
    pub orientation: Orientation,
}

impl EikonalField {
    pub fn new(surface: Arc<dyn Surface>, orientation: Orientation) -> Self {
        Self { surface, orientation }
    }

    /// Signed distance `d`, positive where `a > 1`, and its gradient.
    pub fn distance(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (d, n) = self.surface.signed_distance(p)?;
        Ok(match self.orientation {
            Orientation::OutwardIncreasing => (d, n),
            Orientation::InwardIncreasing => (-d, n.into_iter().map(|x| -x).collect()),
        })
    }

    /// `(a, grad a)` at `p`.
    pub fn eval(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (d, grad) = self.distance(p)?;
        let b = 1.0 + 0.5 * d;
        if b <= 0.0 {
            return Err(Error::Domain {
                point: p.to_vec(),
                reason: format!("signed distance {d} is past the a = 0 level"),
            });
        }
        Ok((b * b, grad.into_iter().map(|x| b * x).collect()))
    }
}

/// Free-function form of [`EikonalField::eval`].
pub fn eikonal_solution(surface: &Arc<dyn Surface>, p: &[f64], orientation: Orientation) -> Result<(f64, Vec<f64>)> {
    EikonalField::new(surface.clone(), orientation).eval(p)
}

/// `C^infinity` step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        psi(t) / (psi(t) + psi(1.0 - t))
    }
}

/// Equal to 1 for `|d| <= w/2`, 0 for `|d| >= w`.
fn tube_weight(d: f64, w: f64) -> f64 {
    1.0 - smooth_step((d.abs() - 0.5 * w) / (0.5 * w))
}

#[derive(Debug, Clone)]
pub struct HorizonMetric {
    pub metric: StationaryMetric,
    pub flow: FlowForm,
    pub eikonal: EikonalField,
    /// Half-width of the region where `v = grad a` is blended out.
    pub tube_width: f64,
}

/// Flow-form metric whose ergosphere and black-hole horizon is `surface`.
///
/// Near the surface `v = grad a` with `a > 1` inside; it is blended over
/// `0.2 x inradius` into `-(R/2)(x - c)/|x - c|^2` outside (so `|v| < 1` and
/// `v = O(1/|x|)`) and into a linear inward drain inside. Curves give a 2D
/// Cartesian metric, or an axisymmetric one when `meridian` is set (the curve
/// must then be even in `rho`); spheres give a 3D Cartesian metric.
pub fn build_horizon_metric(surface: Arc<dyn Surface>, meridian: bool) -> Result<HorizonMetric> {
    let dim = surface.dim();
    let r_in = surface.inradius();
    let w = 0.2 * r_in;
    if !(w < 0.9 * surface.reach()) {
        return Err(Error::Construction(format!(
            "blend width {w} exceeds the reach {} of the surface",
            surface.reach()
        )));
    }
    if meridian {
        if dim != 2 {
            return Err(Error::Construction("axisymmetric output needs a meridian curve".into()));
        }
        let (pts, _) = surface.samples(512);
        let defect = pts
            .iter()
            .map(|p| surface.signed_distance(&[-p[0], p[1]]).map(|(d, _)| d.abs()).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        if defect > 1e-9 * r_in.max(1.0) {
            return Err(Error::Construction(format!("curve is not even in rho (defect {defect:e})")));
        }
    }
    let eik = EikonalField::new(surface.clone(), Orientation::InwardIncreasing);
    let c = surface.center();
    let field = eik.clone();
    let velocity = move |p: &[f64]| -> Result<Vec<f64>> {
        let x = &p[..dim];
        let rel: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        let r2: f64 = rel.iter().map(|v| v * v).sum();
        let inside = field.surface.contains(x);
        let far: Vec<f64> = if inside {
            rel.iter().map(|v| -1.2 * v / r_in).collect()
        } else {
            rel.iter().map(|v| -0.5 * r_in * v / r2).collect()
        };
        let mut v = match field.distance(x) {
            Ok((d, _)) if d.abs() < w => {
                let (_, grad) = field.eval(x)?;
                let chi = tube_weight(d, w);
                grad.iter().zip(&far).map(|(g, f)| chi * g + (1.0 - chi) * f).collect()
            }
            Ok(_) | Err(Error::MedialAxis { .. }) => far,
            Err(e) => return Err(e),
        };
        if meridian {
            v.push(0.0);
        }
        Ok(v)
    };
    let flow = if meridian {
        FlowForm::meridian("horizon_design", velocity)
    } else {
        FlowForm::cartesian("horizon_design", dim, velocity)
    };
    // the exterior blend must stay subsonic
    let (pts, normals) = surface.samples(256);
    for (p, n) in pts.iter().zip(&normals) {
        for frac in [0.25, 0.5, 0.75, 1.0, 1.5] {
            let q: Vec<f64> = p.iter().zip(n).map(|(x, y)| x + frac * w * y).collect();
            let v = flow.velocity_at(&q)?;
            let speed2: f64 = v.iter().map(|x| x * x).sum();
            if !(speed2 < 1.0) {
                return Err(Error::Construction(format!("exterior flow is supersonic at {q:?} (|v|^2 = {speed2})")));
            }
        }
    }
    Ok(HorizonMetric { metric: build_flow_metric(&flow), flow, eikonal: eik, tube_width: w })
}

/// Kerr in flow form: `v = sqrt(f) (m^rho, m^z, m^phi_hat)`, `v^0 = -sqrt(f)`.
pub fn kerr_flow_form(params: KerrParams) -> FlowForm {
    let kerr = crate::metric::build_kerr(params);
    let k0 = kerr.clone();
    FlowForm::meridian(format!("kerr_flow(m={},a={})", params.m, params.a), move |p: &[f64]| {
        let g = kerr.inverse(p)?;
        let f = g[(0, 0)] - 1.0;
        let s = f.sqrt();
        // g^{0j} = -f m^j, so v^j = sqrt(f) m^j = -g^{0j}/sqrt(f)
        Ok((1..4).map(|j| if s > 0.0 { -g[(0, j)] / s } else { 0.0 }).collect())
    })
    .with_v0(V0Mode::Explicit(Arc::new(move |p: &[f64]| {
        let g = k0.inverse(p)?;
        Ok(-(g[(0, 0)] - 1.0).max(0.0).sqrt())
    })))
}

/// One member of the family that moves the restricted ergosphere of a
/// Kerr-type flow from `base_curve` to `curve`.
///
/// With `Phi` mapping `gamma_eps(t) + d nu_eps(t)` to `gamma_0(t) + d nu_0(t)`
/// and the defect `D = v - grad a_0` of the base flow,
/// `v_eps = v + chi (grad a_eps + D o Phi - v)` in the poloidal components.
/// The azimuthal and time components are those of the base flow.
pub fn family_member(
    base: &FlowForm,
    base_curve: Arc<dyn SmoothCurve>,
    curve: Arc<dyn SmoothCurve>,
) -> Result<FlowForm> {
    if base.coords != Coords::Meridian {
        return Err(Error::Construction("family needs an axisymmetric base flow".into()));
    }
    let s0 = ParametricCurve::new(base_curve.clone())?;
    let s1 = ParametricCurve::new(curve.clone())?;
    let w = 0.2 * s0.inradius().min(s1.inradius());
    let reach = base_curve.reach().min(curve.reach());
    if !(w < 0.9 * reach) {
        return Err(Error::Construction(format!("blend width {w} exceeds curve reach {reach}")));
    }
    let base_v = base.velocity.clone();
    let velocity = move |p: &[f64]| -> Result<Vec<f64>> {
        let mut v = base_v(p)?;
        let (t, d) = match curve.project([p[0], p[1]]) {
            Ok(td) => td,
            Err(Error::MedialAxis { .. }) => return Ok(v),
            Err(e) => return Err(e),
        };
        if d.abs() >= w {
            return Ok(v);
        }
        let chi = tube_weight(d, w);
        let n1 = curve.outward_normal(t);
        let b = 1.0 + 0.5 * d;
        let grad_eps = [b * n1[0], b * n1[1]];
        let g0 = base_curve.point(t);
        let n0 = base_curve.outward_normal(t);
        let y = [g0[0] + d * n0[0], g0[1] + d * n0[1]];
        let vy = base_v(&y)?;
        let defect = [vy[0] - b * n0[0], vy[1] - b * n0[1]];
        for k in 0..2 {
            v[k] += chi * (grad_eps[k] + defect[k] - v[k]);
        }
        Ok(v)
    };
    Ok(FlowForm {
        name: format!("{}+family", base.name),
        dim: 3,
        coords: Coords::Meridian,
        velocity: Arc::new(velocity),
        v0: base.v0.clone(),
    })
}

/// `eps -> g_eps` for a curve family `psi(eps)` with `psi(0)` characteristic
/// for `base`.
pub fn family_with_horizons<P>(psi: P, base: FlowForm) -> impl Fn(f64) -> Result<StationaryMetric>
where
    P: Fn(f64) -> Arc<dyn SmoothCurve>,
{
    move |eps: f64| {
        let f = family_member(&base, psi(0.0), psi(eps))?;
        Ok(build_flow_metric(&f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: Point2,
    pub radius: f64,
    pub epsilon: f64,
}

/// Mollifier `exp(-1/(1 - s^2))` scaled to 1 at `s = 0`; exactly 0 for
/// `|s| >= 1` and for values under `1e-300`.
pub fn bump_profile(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let v = (1.0 - 1.0 / (1.0 - s * s)).exp();
    if v < 1e-300 {
        0.0
    } else {
        v
    }
}

/// Rotates the poloidal flow `(v^rho, v^z) = beta (cos alpha, sin alpha)` by
/// `eps * bump` inside the disk `U_0`; `beta` and hence `Delta_1` are kept.
pub fn perturb_metric_bump(base: &FlowForm, spec: BumpSpec) -> Result<FlowForm> {
    if base.coords != Coords::Meridian {
        return Err(Error::Construction("bump perturbation needs an axisymmetric flow".into()));
    }
    if !(spec.radius > 0.0) {
        return Err(Error::InvalidParams("bump radius must be positive".into()));
    }
    let n = 48;
    for i in 0..=n {
        for j in 0..=n {
            let q = [
                spec.center[0] + spec.radius * (2.0 * i as f64 / n as f64 - 1.0),
                spec.center[1] + spec.radius * (2.0 * j as f64 / n as f64 - 1.0),
            ];
            if (q[0] - spec.center[0]).hypot(q[1] - spec.center[1]) >= spec.radius {
                continue;
            }
            let v = base.velocity_at(&q)?;
            if v[0].hypot(v[1]) < 1e-12 {
                return Err(Error::Construction(format!("poloidal flow vanishes at {q:?} inside the bump")));
            }
        }
    }
    let base_v = base.velocity.clone();
    let velocity = move |p: &[f64]| -> Result<Vec<f64>> {
        let mut v = base_v(p)?;
        let s = (p[0] - spec.center[0]).hypot(p[1] - spec.center[1]) / spec.radius;
        let angle = spec.epsilon * bump_profile(s);
        if angle != 0.0 {
            let (sn, cs) = angle.sin_cos();
            let (a, b) = (v[0], v[1]);
            v[0] = cs * a - sn * b;
            v[1] = sn * a + cs * b;
        }
        Ok(v)
    };
    Ok(FlowForm {
        name: format!("{}+bump(eps={})", base.name, spec.epsilon),
        dim: 3,
        coords: Coords::Meridian,
        velocity: Arc::new(velocity),
        v0: base.v0.clone(),
    })
}
