//! Ergosphere and restricted-ergosphere scalars, Kerr horizons and
//! ergospheres, and the containment test between nested curves.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curve::{kerr_horizon_ellipse, PlaneCurve, Point2, SmoothCurve};
use crate::error::{Error, Result};
use crate::metric::{spatial_block, Coords, KerrParams, StationaryMetric};

/// Oriented ergosphere scalar `(-1)^n det[g^{jk}]_{j,k>=1}`: positive outside
/// the ergosphere, `+1` for Minkowski.
pub fn delta(g: &StationaryMetric, p: &[f64]) -> Result<f64> {
    let inv = g.inverse(p)?;
    let n = g.dim();
    let d = spatial_block(&inv).determinant();
    Ok(if n.is_multiple_of(2) { d } else { -d })
}

/// Restricted ergosphere scalar: determinant of the `(rho, z)` block of an
/// axisymmetric metric.
pub fn delta1(g: &StationaryMetric, p: &[f64]) -> Result<f64> {
    if g.coords() != Coords::Meridian {
        return Err(Error::InvalidParams(format!(
            "delta1 needs a meridian-plane metric, got {:?}",
            g.coords()
        )));
    }
    let inv = g.inverse(p)?;
    Ok(inv[(1, 1)] * inv[(2, 2)] - inv[(1, 2)] * inv[(2, 1)])
}

/// Outer and inner horizon radii `m +- sqrt(m^2 - a^2)`.
pub fn kerr_horizon_radii(params: KerrParams) -> (f64, f64) {
    let s = (params.m * params.m - params.a * params.a).sqrt();
    (params.m + s, params.m - s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Outer,
    Inner,
}

/// Residual of the ergosphere quartic `r^4 - 2 m r^3 + a^2 z^2`.
pub fn ergosphere_quartic(params: KerrParams, r: f64, z: f64) -> f64 {
    r.powi(4) - 2.0 * params.m * r.powi(3) + params.a * params.a * z * z
}

/// Boyer-Lindquist-like radius of the Kerr ergosphere at height `z`.
///
/// The quartic `h(r) = r^4 - 2 m r^3 + a^2 z^2` decreases on `(0, 3m/2)` and
/// increases after, so each branch has at most one root and bisection is
/// exact. A branch reaches the axis at `|z| = r_+` (outer) or `|z| = r_-`
/// (inner); beyond that `rho^2 = (r^2 + a^2)(1 - z^2/r^2)` would be negative.
pub fn kerr_ergosphere_radius(params: KerrParams, z: f64, branch: Branch) -> Result<f64> {
    let (rp, rm) = kerr_horizon_radii(params);
    let m = params.m;
    let reach = match branch {
        Branch::Outer => rp,
        Branch::Inner => rm,
    };
    let range_err = || Error::BranchRange {
        branch: match branch {
            Branch::Outer => "outer",
            Branch::Inner => "inner",
        },
        z,
    };
    if !z.is_finite() || z.abs() > reach * (1.0 + 1e-12) {
        return Err(range_err());
    }
    if branch == Branch::Inner && z == 0.0 {
        // the inner branch shrinks onto the ring
        return Ok(0.0);
    }
    let h = |r: f64| ergosphere_quartic(params, r, z);
    let (mut lo, mut hi) = match branch {
        Branch::Outer => (1.5 * m, 2.0 * m),
        Branch::Inner => (0.0, 1.5 * m),
    };
    if h(1.5 * m) > 0.0 {
        return Err(range_err());
    }
    // orient so that h(lo) <= 0 < h(hi) for outer, h(lo) > 0 >= h(hi) for inner
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let neg = h(mid) <= 0.0;
        match (branch, neg) {
            (Branch::Outer, true) | (Branch::Inner, false) => lo = mid,
            _ => hi = mid,
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    Ok(r.max(z.abs()))
}

/// `rho >= 0` of the Kerr ergosphere at height `z`.
pub fn kerr_ergosphere_rho(params: KerrParams, z: f64, branch: Branch) -> Result<f64> {
    let r = kerr_ergosphere_radius(params, z, branch)?;
    if r == 0.0 {
        return Ok(params.a);
    }
    let a2 = params.a * params.a;
    Ok(((r * r + a2) * (1.0 - z * z / (r * r))).max(0.0).sqrt())
}

/// Closed loop through the axis sampling a Kerr ergosphere branch at
/// `z = z_max sin(theta)`; `n` is rounded up to a multiple of 4 so both axis
/// points are samples.
pub fn kerr_ergosphere_curve(params: KerrParams, branch: Branch, n: usize) -> Result<PlaneCurve> {
    let (rp, rm) = kerr_horizon_radii(params);
    let zmax = match branch {
        Branch::Outer => rp,
        Branch::Inner => rm,
    };
    let n = n.div_ceil(4) * 4;
    let half = n / 2;
    let mut right = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let th = -PI / 2.0 + PI * k as f64 / half as f64;
        let z = (zmax * th.sin()).clamp(-zmax, zmax);
        right.push([kerr_ergosphere_rho(params, z, branch)?, z]);
    }
    let first = right[0];
    let last = right[half];
    right[0] = [0.0, first[1]];
    right[half] = [0.0, last[1]];
    let mut pts = right.clone();
    for k in (1..half).rev() {
        pts.push([-right[k][0], right[k][1]]);
    }
    PlaneCurve::new(pts, true)
}

/// Horizon `r = r_+` (outer) or `r = r_-` (inner) as a sampled ellipse.
pub fn kerr_horizon_curve(params: KerrParams, branch: Branch, n: usize) -> Result<PlaneCurve> {
    let (rp, rm) = kerr_horizon_radii(params);
    let r = match branch {
        Branch::Outer => rp,
        Branch::Inner => rm,
    };
    if !(r > 0.0) {
        return Err(Error::InvalidParams("inner horizon degenerates for a = 0".into()));
    }
    PlaneCurve::new(kerr_horizon_ellipse(params.m, r).sample(n.div_ceil(4) * 4).points, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "points", rename_all = "lowercase")]
pub enum Containment {
    Inside,
    Touching(Vec<Point2>),
    Violated(Vec<Point2>),
}

/// Checks every sample of `inner` lies inside or on `outer`.
///
/// Samples within the boundary band of `outer` count as touching. The band
/// is `1e-9` plus twice the largest chord sagitta of `outer`, the furthest
/// the underlying smooth curve can stray from its polyline.
pub fn containment_check(inner: &PlaneCurve, outer: &PlaneCurve) -> Containment {
    let band = 1e-9 + 2.0 * outer.max_sagitta();
    let mut touching = Vec::new();
    let mut violated = Vec::new();
    for &p in &inner.points {
        let d = outer.distance(p);
        if d <= band {
            touching.push(p);
        } else if !outer.contains(p) {
            violated.push(p);
        }
    }
    if !violated.is_empty() {
        Containment::Violated(violated)
    } else if !touching.is_empty() {
        Containment::Touching(touching)
    } else {
        Containment::Inside
    }
}
