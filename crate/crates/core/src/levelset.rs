//! Zero level sets of scalar fields on the meridian plane.
//!
//! Marching squares on a uniform grid, with every edge crossing polished by a
//! bracketed root search. Saddle cells are resolved by the field value at the
//! cell centre; when that value is too small to trust the grid is refined.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{BBox, PlaneCurve, Point2, MIN_SAMPLES};
use crate::error::{Error, Result};

/// Default grid resolution (cells per side).
pub const DEFAULT_RESOLUTION: usize = 512;
/// Relative residual bound on polished samples.
pub const TRACE_TOL: f64 = 1e-8;
const MAX_REFINEMENTS: usize = 2;

/// Rectangle in the `(rho, z)` plane. A window whose `rho` range starts at
/// zero is taken to border the symmetry axis: the field is assumed even in
/// `rho` and traced on the mirrored window, so curves meeting the axis close.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub rho: (f64, f64),
    pub z: (f64, f64),
}

impl Window {
    pub fn new(rho: (f64, f64), z: (f64, f64)) -> Result<Self> {
        if !(rho.1 > rho.0 && z.1 > z.0) || ![rho.0, rho.1, z.0, z.1].iter().all(|x| x.is_finite()) {
            return Err(Error::Geometry(format!("empty window rho={rho:?} z={z:?}")));
        }
        Ok(Self { rho, z })
    }

    pub fn touches_axis(&self) -> bool {
        self.rho.0 == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetReport {
    pub curve: PlaneCurve,
    pub residual_max: f64,
    pub bbox: BBox,
}

/// Traces every closed component of `{f = 0}` inside `window` on an `n x n`
/// grid. Components are counterclockwise and sorted by enclosed area,
/// largest first. Nodes where `f` fails are treated as holes in the grid; a
/// component that runs into one (or leaves the window) is an open chain and
/// makes the trace fail.
pub fn trace_level_set<F>(f: F, window: Window, n: usize) -> Result<Vec<LevelSetReport>>
where
    F: Fn(Point2) -> Result<f64> + Sync,
{
    if n < 4 {
        return Err(Error::Geometry("level-set grid needs at least 4 cells".into()));
    }
    let mut n = n;
    for attempt in 0..=MAX_REFINEMENTS {
        match trace_once(&f, window, n) {
            Ok(r) => return Ok(r),
            Err(Retry::Ambiguous) if attempt < MAX_REFINEMENTS => n *= 2,
            Err(Retry::Ambiguous) => {
                return Err(Error::Topology(format!(
                    "ambiguous saddle or unresolved component at resolution {n}"
                )))
            }
            Err(Retry::Fatal(e)) => return Err(e),
        }
    }
    unreachable!()
}

enum Retry {
    Ambiguous,
    Fatal(Error),
}

impl From<Error> for Retry {
    fn from(e: Error) -> Self {
        Retry::Fatal(e)
    }
}

/// Edge identifier: `(i, j, vertical)`; horizontal edges join node `(i, j)`
/// to `(i + 1, j)`, vertical ones `(i, j)` to `(i, j + 1)`.
type EdgeId = (usize, usize, bool);

fn trace_once<F>(f: &F, window: Window, n: usize) -> std::result::Result<Vec<LevelSetReport>, Retry>
where
    F: Fn(Point2) -> Result<f64> + Sync,
{
    let mirror = window.touches_axis();
    let (r0, r1) = if mirror { (-window.rho.1, window.rho.1) } else { window.rho };
    let (z0, z1) = window.z;
    let hr = (r1 - r0) / n as f64;
    let hz = (z1 - z0) / n as f64;
    let eval = |p: Point2| -> f64 {
        let q = if mirror { [p[0].abs(), p[1]] } else { p };
        match f(q) {
            Ok(v) if v.is_finite() => v,
            _ => f64::NAN,
        }
    };
    let node = |i: usize, j: usize| -> Point2 { [r0 + i as f64 * hr, z0 + j as f64 * hz] };

    // values[j][i]
    let values: Vec<Vec<f64>> = (0..=n)
        .into_par_iter()
        .map(|j| (0..=n).map(|i| eval(node(i, j))).collect())
        .collect();
    let scale = values
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let pos = |i: usize, j: usize| values[j][i] >= 0.0;
    let ok = |i: usize, j: usize| values[j][i].is_finite();

    let mut crossings: HashMap<EdgeId, Point2> = HashMap::new();
    let mut links: HashMap<EdgeId, Vec<EdgeId>> = HashMap::new();
    let mut link = |a: EdgeId, b: EdgeId| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };

    for j in 0..n {
        for i in 0..n {
            if !(ok(i, j) && ok(i + 1, j) && ok(i, j + 1) && ok(i + 1, j + 1)) {
                continue;
            }
            // corners counterclockwise: (i,j) (i+1,j) (i+1,j+1) (i,j+1)
            let c = [pos(i, j), pos(i + 1, j), pos(i + 1, j + 1), pos(i, j + 1)];
            let edges: [EdgeId; 4] = [(i, j, false), (i + 1, j, true), (i, j + 1, false), (i, j, true)];
            let cut: Vec<usize> = (0..4).filter(|&k| c[k] != c[(k + 1) % 4]).collect();
            match cut.len() {
                0 => {}
                2 => link(edges[cut[0]], edges[cut[1]]),
                4 => {
                    let centre = eval([r0 + (i as f64 + 0.5) * hr, z0 + (j as f64 + 0.5) * hz]);
                    if !centre.is_finite() || centre.abs() < 1e-12 * scale {
                        return Err(Retry::Ambiguous);
                    }
                    // the centre joins the corners of its own sign
                    if (centre >= 0.0) == c[0] {
                        link(edges[0], edges[1]);
                        link(edges[2], edges[3]);
                    } else {
                        link(edges[3], edges[0]);
                        link(edges[1], edges[2]);
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    for &e in links.keys() {
        let (i, j, vertical) = e;
        let (a, b) = if vertical { (node(i, j), node(i, j + 1)) } else { (node(i, j), node(i + 1, j)) };
        let (fa, fb) = if vertical { (values[j][i], values[j + 1][i]) } else { (values[j][i], values[j][i + 1]) };
        crossings.insert(e, polish_edge(&eval, a, b, fa, fb));
    }

    let mut seen: HashMap<EdgeId, bool> = HashMap::new();
    let mut keys: Vec<EdgeId> = links.keys().copied().collect();
    keys.sort_unstable();
    let mut reports = Vec::new();
    for start in keys {
        if seen.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        seen.insert(start, true);
        let mut prev = start;
        let mut cur = match links[&start].first() {
            Some(&c) => c,
            None => continue,
        };
        let closed = loop {
            if cur == start {
                break true;
            }
            let nb = &links[&cur];
            if nb.len() != 2 {
                break false;
            }
            chain.push(cur);
            seen.insert(cur, true);
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
        };
        if !closed || links[&start].len() != 2 {
            let p = crossings[&start];
            return Err(Retry::Fatal(Error::Topology(format!(
                "open level-set component near ({:.6}, {:.6}) with {} samples",
                p[0],
                p[1],
                chain.len()
            ))));
        }
        let mut pts: Vec<Point2> = Vec::with_capacity(chain.len());
        let tiny = 1e-12 * hr.max(hz);
        for e in &chain {
            let p = crossings[e];
            if pts.last().is_none_or(|q: &Point2| (q[0] - p[0]).hypot(q[1] - p[1]) > tiny) {
                pts.push(p);
            }
        }
        if pts.len() > 1 {
            let (a, b) = (pts[0], pts[pts.len() - 1]);
            if (a[0] - b[0]).hypot(a[1] - b[1]) <= tiny {
                pts.pop();
            }
        }
        if pts.len() < MIN_SAMPLES {
            return Err(Retry::Ambiguous);
        }
        let residual_max = pts.iter().map(|&p| eval(p).abs()).fold(0.0, f64::max);
        let mut curve = PlaneCurve::new(pts, true)?;
        curve.make_counterclockwise();
        let bbox = curve.bbox();
        reports.push(LevelSetReport { curve, residual_max, bbox });
    }
    reports.sort_by(|a, b| b.curve.signed_area().total_cmp(&a.curve.signed_area()));
    Ok(reports)
}

/// Illinois false position on a bracketing edge; falls back to the linear
/// interpolant if the field misbehaves inside the bracket.
fn polish_edge<E: Fn(Point2) -> f64>(eval: &E, a: Point2, b: Point2, fa: f64, fb: f64) -> Point2 {
    let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let linear = fa / (fa - fb);
    let (mut lo, mut hi, mut flo, mut fhi) = (0.0, 1.0, fa, fb);
    let mut side = 0i8;
    for _ in 0..100 {
        let t = (lo * fhi - hi * flo) / (fhi - flo);
        let ft = eval(at(t));
        if !ft.is_finite() {
            return at(linear);
        }
        if ft == 0.0 || hi - lo < 1e-15 {
            return at(t);
        }
        if (ft > 0.0) == (flo > 0.0) {
            lo = t;
            flo = ft;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            fhi = ft;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    let t = (lo * fhi - hi * flo) / (fhi - flo);
    at(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_circle_closes_through_axis() {
        let w = Window::new((0.0, 2.0), (-2.0, 2.0)).unwrap();
        let r = trace_level_set(|p| Ok(p[0] * p[0] + p[1] * p[1] - 1.0), w, 64).unwrap();
        assert_eq!(r.len(), 1);
        let c = &r[0].curve;
        assert!(r[0].residual_max < 1e-12);
        assert!(c.signed_area() > 0.0);
        assert!(c.evenness_defect() < 1e-12);
        for p in &c.points {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_components_sorted_by_area() {
        let w = Window::new((-3.0, 3.0), (-3.0, 3.0)).unwrap();
        let f = |p: Point2| {
            let a = (p[0] + 1.5).hypot(p[1]) - 1.0;
            let b = (p[0] - 1.5).hypot(p[1]) - 0.5;
            Ok(a.min(b))
        };
        let r = trace_level_set(f, w, 97).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r[0].bbox.max[0] < 0.0);
        assert!(r[1].bbox.min[0] > 0.0);
    }

    #[test]
    fn curve_leaving_window_is_topology_error() {
        let w = Window::new((0.5, 2.0), (-2.0, 2.0)).unwrap();
        let e = trace_level_set(|p| Ok(p[0] * p[0] + p[1] * p[1] - 1.0), w, 64).unwrap_err();
        assert!(matches!(e, Error::Topology(_)));
    }

    #[test]
    fn no_sign_change_gives_no_components() {
        let w = Window::new((-1.0, 1.0), (-1.0, 1.0)).unwrap();
        assert!(trace_level_set(|_| Ok(1.0), w, 16).unwrap().is_empty());
    }
}
