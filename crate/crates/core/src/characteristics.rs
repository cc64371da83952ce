//! Characteristic curves and surfaces of a stationary metric.
//!
//! A closed curve `S` with normal `n` is characteristic when
//! `sum_{j,k>=1} g^{jk} n_j n_k = 0` on it. In the meridian plane the
//! characteristic curves are the integral curves of the null tangents of the
//! restricted quadratic form `g^{11} n_1^2 + 2 g^{12} n_1 n_2 + g^{22} n_2^2`.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{PlaneCurve, Point2};
use crate::error::{Error, Result};
use crate::levelset::{trace_level_set, Window};
use crate::metric::{spatial_block, Coords, StationaryMetric};

/// Relative residual below which a curve counts as characteristic.
pub const CHAR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    BlackHole,
    WhiteHole,
    Mixed,
    NotCharacteristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharReport {
    /// Max over samples of `|n.G.n| / (|n|^2 |G|)`, `G` the spatial block.
    pub residual: f64,
    /// `sum_j g^{0j} n_j` per sample, with `n` the outward unit normal.
    pub flux: Vec<f64>,
    /// Max over samples of `|G n| / |G|`, the conormal defect.
    pub conormal_max: f64,
    pub classification: Classification,
}

impl CharReport {
    pub fn flux_sign(&self) -> Vec<i8> {
        self.flux
            .iter()
            .map(|&f| if f > 0.0 { 1 } else if f < 0.0 { -1 } else { 0 })
            .collect()
    }
}

/// Characteristic residual and flux for arbitrary samples with outward
/// normals (spatial components only, length `dim`).
pub fn characteristic_report(g: &StationaryMetric, points: &[Vec<f64>], normals: &[Vec<f64>]) -> Result<CharReport> {
    if points.len() != normals.len() || points.is_empty() {
        return Err(Error::Geometry("need matching, non-empty samples and normals".into()));
    }
    let n = g.dim();
    let mut residual: f64 = 0.0;
    let mut conormal: f64 = 0.0;
    let mut flux = Vec::with_capacity(points.len());
    for (p, nu) in points.iter().zip(normals) {
        if nu.len() != n {
            return Err(Error::Geometry(format!("normal has {} components, expected {n}", nu.len())));
        }
        let len2: f64 = nu.iter().map(|x| x * x).sum();
        if !(len2 > 0.0) || !len2.is_finite() {
            return Err(Error::Geometry(format!("degenerate normal at {p:?}")));
        }
        let inv = g.inverse(p)?;
        let block = spatial_block(&inv);
        let gnorm = SymmetricEigen::new(block.clone()).eigenvalues.amax().max(f64::MIN_POSITIVE);
        let mut q = 0.0;
        let mut f = 0.0;
        let mut gn2 = 0.0;
        for j in 0..n {
            let mut row = 0.0;
            for k in 0..n {
                row += block[(j, k)] * nu[k];
            }
            q += row * nu[j];
            gn2 += row * row;
            f += inv[(0, j + 1)] * nu[j];
        }
        let len = len2.sqrt();
        residual = residual.max(q.abs() / (len2 * gnorm));
        conormal = conormal.max(gn2.sqrt() / (len * gnorm));
        flux.push(f / len);
    }
    let classification = if residual >= CHAR_TOL {
        Classification::NotCharacteristic
    } else if flux.iter().all(|&f| f < 0.0) {
        Classification::BlackHole
    } else if flux.iter().all(|&f| f > 0.0) {
        Classification::WhiteHole
    } else {
        Classification::Mixed
    };
    Ok(CharReport { residual, flux, conormal_max: conormal, classification })
}

fn lift_normal(g: &StationaryMetric, n: Point2) -> Vec<f64> {
    let mut v = n.to_vec();
    v.resize(g.dim(), 0.0);
    v
}

fn check_planar(g: &StationaryMetric) -> Result<()> {
    match g.coords() {
        Coords::Meridian => Ok(()),
        Coords::Cartesian if g.dim() == 2 => Ok(()),
        Coords::Cartesian => Err(Error::InvalidParams(format!(
            "plane curves need a meridian or 2D metric, got {}D Cartesian",
            g.dim()
        ))),
    }
}

/// [`characteristic_report`] on a closed plane curve, with normals from
/// fourth-order periodic differences.
pub fn characteristic_residual(g: &StationaryMetric, c: &PlaneCurve) -> Result<CharReport> {
    check_planar(g)?;
    let normals = c.outward_normals()?;
    let pts: Vec<Vec<f64>> = c.points.iter().map(|q| q.to_vec()).collect();
    let nus: Vec<Vec<f64>> = normals.into_iter().map(|n| lift_normal(g, n)).collect();
    characteristic_report(g, &pts, &nus)
}

/// Restricted `(rho, z)` block `(A, B, C)` at `q`.
pub fn restricted_block(g: &StationaryMetric, q: Point2) -> Result<(f64, f64, f64)> {
    check_planar(g)?;
    let inv = g.inverse(&q)?;
    Ok((inv[(1, 1)], inv[(1, 2)], inv[(2, 2)]))
}

/// Eigen-decomposition of `[[a, b], [b, c]]`: eigenvalues ascending and
/// matching unit eigenvectors; the first one has a positive leading
/// non-zero component and the second is its counterclockwise rotation.
fn sym2_eigen(a: f64, b: f64, c: f64) -> ([f64; 2], Point2, Point2) {
    let mean = 0.5 * (a + c);
    let rad = (0.5 * (a - c)).hypot(b);
    let (l1, l2) = (mean - rad, mean + rad);
    // eigenvector of l1, picking the better-conditioned of two formulas
    let v = if (a - l1).abs() >= (c - l1).abs() { [-b, a - l1] } else { [c - l1, -b] };
    let len = v[0].hypot(v[1]);
    let mut e1 = if len > 0.0 { [v[0] / len, v[1] / len] } else { [1.0, 0.0] };
    if e1[0] < 0.0 || (e1[0] == 0.0 && e1[1] < 0.0) {
        e1 = [-e1[0], -e1[1]];
    }
    ([l1, l2], e1, [-e1[1], e1[0]])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDirections {
    pub count: u8,
    pub tangents: Vec<Point2>,
}

const NULL_TOL: f64 = 1e-10;

/// Null normals of the restricted form at `q`, returned as their tangents.
pub fn null_directions(g: &StationaryMetric, q: Point2) -> Result<NullDirections> {
    let (a, b, c) = restricted_block(g, q)?;
    let scale = a.abs().max(b.abs()).max(c.abs()).powi(2);
    let d1 = a * c - b * b;
    let (l, e1, e2) = sym2_eigen(a, b, c);
    if d1.abs() <= NULL_TOL * scale {
        // the eigenvector of the smaller eigenvalue is the null normal
        let n = if l[0].abs() <= l[1].abs() { e1 } else { e2 };
        return Ok(NullDirections { count: 1, tangents: vec![[-n[1], n[0]]] });
    }
    if d1 > 0.0 {
        return Ok(NullDirections { count: 0, tangents: vec![] });
    }
    Ok(NullDirections { count: 2, tangents: split_tangents(l, e1, e2).to_vec() })
}

fn split_tangents(l: [f64; 2], e1: Point2, e2: Point2) -> [Point2; 2] {
    let (s1, s2) = (l[1].abs().sqrt(), l[0].abs().sqrt());
    let norm = (s1 * s1 + s2 * s2).sqrt();
    let np = [(s1 * e1[0] + s2 * e2[0]) / norm, (s1 * e1[1] + s2 * e2[1]) / norm];
    let nm = [(s1 * e1[0] - s2 * e2[0]) / norm, (s1 * e1[1] - s2 * e2[1]) / norm];
    [[-np[1], np[0]], [-nm[1], nm[0]]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    /// Arc-length step.
    pub h: f64,
    pub max_len: f64,
    /// A step base with `-band_in <= Delta_1 / |G|^2 <= band_out` follows the
    /// degenerate direction tangent to the zero set.
    pub band_in: f64,
    pub band_out: f64,
    /// Closure tolerance on the return gap, relative to `max(1, |start|)`.
    pub closure_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { h: 1e-3, max_len: 50.0, band_in: 1e-6, band_out: 1e-6, closure_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "detail", rename_all = "snake_case")]
pub enum ExitEvent {
    Closed { gap: f64 },
    /// Left the restricted ergosphere outward.
    LeftOutward,
    /// An interior trajectory reached `Delta_1 = 0`.
    ReachedDelta1,
    MaxLength,
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Point2>,
    pub length: f64,
    pub exit: ExitEvent,
    /// Return gaps of every Poincare crossing, closing or not.
    pub returns: Vec<f64>,
}

impl Trajectory {
    pub fn is_closed(&self) -> bool {
        matches!(self.exit, ExitEvent::Closed { .. })
    }

    pub fn curve(&self) -> Result<PlaneCurve> {
        PlaneCurve::new(self.points.clone(), self.is_closed())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Surface,
    Interior,
}

struct Field<'a> {
    g: &'a StationaryMetric,
}

impl Field<'_> {
    /// Normalized `Delta_1` and the block eigen-data.
    fn probe(&self, q: Point2) -> Result<(f64, [f64; 2], Point2, Point2)> {
        let (a, b, c) = restricted_block(self.g, q)?;
        let scale = a.abs().max(b.abs()).max(c.abs()).powi(2).max(f64::MIN_POSITIVE);
        let (l, e1, e2) = sym2_eigen(a, b, c);
        Ok(((a * c - b * b) / scale, l, e1, e2))
    }

    fn direction(&self, q: Point2, mode: Mode, prev: Point2) -> Result<Point2> {
        let (d1, l, e1, e2) = self.probe(q)?;
        let cands: Vec<Point2> = if mode == Mode::Surface || d1 >= 0.0 {
            let n = if l[0].abs() <= l[1].abs() { e1 } else { e2 };
            vec![[-n[1], n[0]], [n[1], -n[0]]]
        } else {
            let [t1, t2] = split_tangents(l, e1, e2);
            vec![t1, [-t1[0], -t1[1]], t2, [-t2[0], -t2[1]]]
        };
        Ok(cands
            .into_iter()
            .max_by(|a, b| (a[0] * prev[0] + a[1] * prev[1]).total_cmp(&(b[0] * prev[0] + b[1] * prev[1])))
            .unwrap())
    }
}

/// RK4 integration of a characteristic curve from `start`.
///
/// A start inside the band around `Delta_1 = 0` follows the degenerate
/// direction; a start with `Delta_1 < 0` follows the chosen null family, with
/// each step continuing the branch closest to the previous tangent. The curve
/// is closed when it returns through the normal line of the start point
/// within the closure tolerance.
pub fn integrate_characteristic(
    g: &StationaryMetric,
    start: Point2,
    family: Family,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(opts.h > 0.0 && opts.max_len > opts.h) {
        return Err(Error::InvalidParams("need 0 < h < max_len".into()));
    }
    let field = Field { g };
    let (d1, l, e1, e2) = field.probe(start)?;
    if d1 > opts.band_out {
        return Err(Error::InvalidParams(format!(
            "start {start:?} lies outside the restricted ergosphere (Delta_1 = {d1:e})"
        )));
    }
    let mut mode = if d1 >= -opts.band_in { Mode::Surface } else { Mode::Interior };
    let t0 = match mode {
        Mode::Surface => {
            let n = if l[0].abs() <= l[1].abs() { e1 } else { e2 };
            let t = [-n[1], n[0]];
            if family == Family::Plus { t } else { [-t[0], -t[1]] }
        }
        Mode::Interior => {
            let [tp, tm] = split_tangents(l, e1, e2);
            if family == Family::Plus { tp } else { tm }
        }
    };
    let touch = 0.5 * opts.band_in;
    let h = opts.h;
    let close_tol = opts.closure_tol * start[0].hypot(start[1]).max(1.0);
    let mut pts = vec![start];
    let mut x = start;
    let mut tan = t0;
    let mut length = 0.0;
    let mut returns = Vec::new();
    let mut far = false;
    let side = |p: Point2| (p[0] - start[0]) * t0[0] + (p[1] - start[1]) * t0[1];
    let exit = loop {
        if length >= opts.max_len {
            break ExitEvent::MaxLength;
        }
        let step = (|| -> Result<(Point2, Point2)> {
            let k1 = field.direction(x, mode, tan)?;
            let k2 = field.direction([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]], mode, k1)?;
            let k3 = field.direction([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]], mode, k1)?;
            let k4 = field.direction([x[0] + h * k3[0], x[1] + h * k3[1]], mode, k1)?;
            let nx = [
                x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            Ok((nx, k1))
        })();
        let (nx, k1) = match step {
            Ok(s) => s,
            Err(e) => break ExitEvent::Domain(e.to_string()),
        };
        let k_end = match field.direction(nx, mode, k1) {
            Ok(t) => t,
            Err(e) => break ExitEvent::Domain(e.to_string()),
        };
        let (s0, s1) = (side(x), side(nx));
        if (nx[0] - start[0]).hypot(nx[1] - start[1]) > 10.0 * h {
            far = true;
        }
        if far && s0 < 0.0 && s1 >= 0.0 {
            let cross = hermite_crossing(x, k1, nx, k_end, h, &side);
            let gap = (cross[0] - start[0]).hypot(cross[1] - start[1]);
            returns.push(gap);
            if gap <= close_tol {
                length += h;
                break ExitEvent::Closed { gap };
            }
        }
        x = nx;
        tan = k_end;
        length += h;
        pts.push(x);
        let (d1, ..) = match field.probe(x) {
            Ok(p) => p,
            Err(e) => break ExitEvent::Domain(e.to_string()),
        };
        match mode {
            Mode::Surface if d1 > opts.band_out => break ExitEvent::LeftOutward,
            Mode::Surface if d1 < -opts.band_in => mode = Mode::Interior,
            Mode::Interior if d1 >= -touch => break ExitEvent::ReachedDelta1,
            _ => {}
        }
    };
    Ok(Trajectory { points: pts, length, exit, returns })
}

/// Point where the cubic Hermite arc between two steps crosses `side = 0`.
fn hermite_crossing<S: Fn(Point2) -> f64>(x0: Point2, t0: Point2, x1: Point2, t1: Point2, h: f64, side: &S) -> Point2 {
    let at = |s: f64| -> Point2 {
        let (h00, h10, h01, h11) = (
            2.0 * s * s * s - 3.0 * s * s + 1.0,
            s * s * s - 2.0 * s * s + s,
            -2.0 * s * s * s + 3.0 * s * s,
            s * s * s - s * s,
        );
        [
            h00 * x0[0] + h10 * h * t0[0] + h01 * x1[0] + h11 * h * t1[0],
            h00 * x0[1] + h10 * h * t0[1] + h01 * x1[1] + h11 * h * t1[1],
        ]
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if side(at(mid)) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub integrate: IntegrateOptions,
    /// Grid resolution for tracing `Delta_1 = 0`.
    pub trace_resolution: usize,
    /// Interior seeds lie within this fraction of the component inradius.
    pub near_fraction: f64,
    /// Restrict seeding to the component enclosing the largest area.
    pub outermost_only: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            integrate: IntegrateOptions::default(),
            trace_resolution: 256,
            near_fraction: 0.1,
            outermost_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: Point2,
    pub family: Family,
    pub on_curve: bool,
    pub length: f64,
    pub exit: ExitEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureSearch {
    pub closed: Option<PlaneCurve>,
    /// Index into `outcomes` of the first closure.
    pub closing_seed: Option<usize>,
    pub outcomes: Vec<SeedOutcome>,
    /// Number of traced `Delta_1 = 0` components that were seeded.
    pub components: usize,
}

/// Searches for a closed characteristic near `Delta_1 = 0` inside `window`.
///
/// Half of the `n_seeds` lie on the traced zero set, the rest on inward
/// offsets within `near_fraction` of the inradius; each seed runs in both
/// families. Seeds run in parallel and the first closure by seed order wins.
/// Without closure the outcomes form the certificate.
pub fn find_closed_characteristic(
    g: &StationaryMetric,
    window: Window,
    n_seeds: usize,
    opts: &SearchOptions,
) -> Result<ClosureSearch> {
    check_planar(g)?;
    let comps = trace_level_set(
        |q| {
            let (a, b, c) = restricted_block(g, q)?;
            Ok(a * c - b * b)
        },
        window,
        opts.trace_resolution,
    )?;
    let comps: Vec<_> = if opts.outermost_only { comps.into_iter().take(1).collect() } else { comps };
    let mut seeds: Vec<(Point2, bool)> = Vec::new();
    if !comps.is_empty() && n_seeds > 0 {
        let per = n_seeds.div_ceil(comps.len());
        let on = per.div_ceil(2);
        let inside = per - on;
        for c in &comps {
            let curve = c.curve.resample(on.max(crate::curve::MIN_SAMPLES))?;
            let normals = curve.outward_normals()?;
            let depth = opts.near_fraction * c.curve.inradius();
            let stride = curve.len() as f64 / on as f64;
            for k in 0..on {
                seeds.push((curve.points[(k as f64 * stride) as usize], true));
            }
            for k in 0..inside {
                let idx = ((k as f64 + 0.5) * curve.len() as f64 / inside as f64) as usize % curve.len();
                let frac = (k % 4 + 1) as f64 / 4.0;
                let (p, n) = (curve.points[idx], normals[idx]);
                seeds.push(([p[0] - frac * depth * n[0], p[1] - frac * depth * n[1]], false));
            }
        }
    }
    let jobs: Vec<(Point2, bool, Family)> = seeds
        .iter()
        .flat_map(|&(p, on)| [(p, on, Family::Plus), (p, on, Family::Minus)])
        .collect();
    let results: Vec<(SeedOutcome, Option<Trajectory>)> = jobs
        .par_iter()
        .map(|&(seed, on_curve, family)| match integrate_characteristic(g, seed, family, &opts.integrate) {
            Ok(t) => (
                SeedOutcome { seed, family, on_curve, length: t.length, exit: t.exit.clone() },
                Some(t),
            ),
            Err(e) => (
                SeedOutcome { seed, family, on_curve, length: 0.0, exit: ExitEvent::Domain(e.to_string()) },
                None,
            ),
        })
        .collect();
    let mut closed = None;
    let mut closing_seed = None;
    for (i, (_, t)) in results.iter().enumerate() {
        if let Some(t) = t.as_ref().filter(|t| t.is_closed()) {
            closed = Some(t.curve()?);
            closing_seed = Some(i);
            break;
        }
    }
    Ok(ClosureSearch {
        closed,
        closing_seed,
        outcomes: results.into_iter().map(|(o, _)| o).collect(),
        components: comps.len(),
    })
}
