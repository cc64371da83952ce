//! Forward observables of the 1 + 1 restriction: characteristic speeds along
//! a path, travel time, and Dirichlet-to-Neumann traces.

use std::cell::RefCell;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::solver::{BoundaryData, OuterLayer, SimConfig, Simulation, Wall};
use crate::error::{Error, Result};
use crate::horizon_design::bump_profile;
use crate::metric::StationaryMetric;

/// A path `x(sigma)`, `sigma in [0, 1]`, in the metric's point coordinates.
pub trait Path: Send + Sync + Debug {
    fn point(&self, s: f64) -> Vec<f64>;
    fn tangent(&self, s: f64) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinePath {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl Path for LinePath {
    fn point(&self, s: f64) -> Vec<f64> {
        self.start.iter().zip(&self.end).map(|(a, b)| a + s * (b - a)).collect()
    }

    fn tangent(&self, _s: f64) -> Vec<f64> {
        self.start.iter().zip(&self.end).map(|(a, b)| b - a).collect()
    }
}

/// Roots of `a11 l^2 + 2 a01 l + a00 = 0` with the restricted metric entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaPair {
    pub plus: f64,
    pub minus: f64,
    pub a00: f64,
    pub a01: f64,
    pub a11: f64,
}

impl LambdaPair {
    /// Largest deviation from `l+ + l- = -2 a01/a11` and `l+ l- = a00/a11`,
    /// each relative to the size of its right-hand side.
    pub fn vieta_defect(&self) -> f64 {
        let sum = -2.0 * self.a01 / self.a11;
        let prod = self.a00 / self.a11;
        let ds = (self.plus + self.minus - sum).abs() / sum.abs().max(self.plus.abs()).max(1e-300);
        let dp = (self.plus * self.minus - prod).abs() / prod.abs().max(1e-300);
        ds.max(dp)
    }
}

/// Restricts the covariant metric to `span{d_t, x'(s)}` and factors it as
/// `a11 (ds - l+ dt)(ds - l- dt)`; `l+ >= l-`.
pub fn lambda_pm(g: &StationaryMetric, path: &dyn Path, s: f64) -> Result<LambdaPair> {
    let x = path.point(s);
    let xd = path.tangent(s);
    let cov = g.covariant(&x)?;
    let n = xd.len();
    let a00 = cov[(0, 0)];
    let a01: f64 = (0..n).map(|j| cov[(0, j + 1)] * xd[j]).sum();
    let mut a11 = 0.0;
    for j in 0..n {
        for k in 0..n {
            a11 += cov[(j + 1, k + 1)] * xd[j] * xd[k];
        }
    }
    let scale = a00.abs().max(a01.abs()).max(a11.abs());
    if a11 == 0.0 || a11.abs() <= 1e-14 * scale {
        return Err(Error::PathDegenerate { sigma: s, reason: format!("a11 = {a11}") });
    }
    let disc = a01 * a01 - a00 * a11;
    if disc < -1e-14 * scale * scale {
        return Err(Error::Hyperbolicity(format!("complex speeds at sigma = {s}")));
    }
    let root = disc.max(0.0).sqrt();
    // cancellation-free pair: q / a11 and a00 / q
    let q = -(a01 + if a01 >= 0.0 { root } else { -root });
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a11, a00 / q) };
    Ok(LambdaPair { plus: r1.max(r2), minus: r1.min(r2), a00, a01, a11 })
}

/// Half the round-trip time `1/2 int_0^s (1/l+ - 1/l-) ds'` of a signal
/// running along the path to `x(s)` and back.
pub fn travel_time(g: &StationaryMetric, path: &dyn Path, s_target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s_target) {
        return Err(Error::Range(format!("sigma {s_target} outside [0, 1]")));
    }
    if s_target == 0.0 {
        return Ok(0.0);
    }
    let slowness = |s: f64| -> Result<f64> {
        let l = lambda_pm(g, path, s)?;
        if !(l.plus > 0.0 && l.minus < 0.0) {
            return Err(Error::Range(format!(
                "speeds ({}, {}) at sigma = {s}: the path meets the ergosphere",
                l.plus, l.minus
            )));
        }
        Ok(0.5 * (1.0 / l.plus - 1.0 / l.minus))
    };
    slowness(0.0)?;
    slowness(s_target)?;
    let failure = RefCell::new(None);
    let out = quadrature::integrate(
        |s| match slowness(s) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        0.0,
        s_target,
        1e-12,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(out.integral)
}

/// Dirichlet pulse `amplitude * bump((t - t_center)/half_width)`, optionally
/// tapered by `bump(rho / rho_half_width)` along the wall.
pub fn bump_data(t_center: f64, half_width: f64, amplitude: f64, rho_half_width: Option<f64>) -> BoundaryData {
    Arc::new(move |t: f64, rho: f64| {
        let s = (t - t_center) / half_width;
        let b = bump_profile(s);
        let db = if b == 0.0 { 0.0 } else { -2.0 * s / (1.0 - s * s).powi(2) * b / half_width };
        let taper = rho_half_width.map_or(1.0, |w| bump_profile(rho / w));
        (amplitude * b * taper, amplitude * db * taper)
    })
}

#[derive(Clone)]
pub struct DnSetup {
    pub grid: GridSpec,
    pub t_final: f64,
    pub data: BoundaryData,
    /// Wall at `z_max`.
    pub far_wall: Wall,
    pub outer: OuterLayer,
    pub cfl: f64,
    pub sample_stride: usize,
}

impl Debug for DnSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DnSetup")
            .field("grid", &self.grid)
            .field("t_final", &self.t_final)
            .field("far_wall", &self.far_wall)
            .field("outer", &self.outer)
            .field("cfl", &self.cfl)
            .finish()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DnTrace {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    /// `values[k][i]` at `times[k]`, `rho[i]`.
    pub values: Vec<Vec<f64>>,
}

/// Weighted conormal derivative on the `z = z_min` wall of the solution with
/// Dirichlet data there and zero initial state.
pub fn dn_operator(g: &StationaryMetric, setup: &DnSetup) -> Result<DnTrace> {
    let mut cfg = SimConfig::new(setup.grid, setup.t_final);
    cfg.z_walls = (Wall::Dirichlet, setup.far_wall);
    cfg.outer = setup.outer;
    cfg.cfl = setup.cfl;
    cfg.boundary_data = Some(setup.data.clone());
    cfg.sample_stride = setup.sample_stride;
    let mut sim = Simulation::new(g, cfg)?;
    let (hr, hz) = setup.grid.h();
    let row = sim.wall_row();
    let spec = setup.grid;
    let mut coeffs = Vec::with_capacity(row.len());
    for (_, p) in &row {
        let wall = [p[0], spec.z_min];
        let inv = g.inverse(&wall)?;
        let gzz = inv[(2, 2)];
        if gzz.abs() < 1e-8 {
            return Err(Error::Config(format!("characteristic boundary patch at {wall:?}")));
        }
        // outward normal (0, -1): -(g^{z rho} u_rho + g^{zz} u_z) / sqrt|g^{zz}|
        coeffs.push((inv[(2, 1)], gzz, 1.0 / gzz.abs().sqrt()));
    }
    let s = spec.stride();
    let f = setup.data.clone();
    let trace = |st: &super::solver::WaveState| -> Vec<f64> {
        row.iter()
            .zip(&coeffs)
            .map(|((k, p), (gzr, gzz, norm))| {
                let fw = f(st.t, p[0]).0;
                // quadratic through the wall value and the first two nodes
                let uz = (-8.0 * fw + 9.0 * st.u[*k] - st.u[k + s]) / (3.0 * hz);
                let d = 0.5 * hr;
                let ur = (f(st.t, p[0] + d).0 - f(st.t, (p[0] - d).abs()).0) / (2.0 * d);
                -(gzr * ur + gzz * uz) * norm
            })
            .collect()
    };
    let (dt, n) = sim.plan(setup.t_final)?;
    let mut state = sim.initial_state();
    let mut out = DnTrace { rho: row.iter().map(|(_, p)| p[0]).collect(), ..Default::default() };
    out.times.push(0.0);
    out.values.push(trace(&state));
    for step in 1..=n {
        sim.step(&mut state, dt)?;
        if step % setup.sample_stride == 0 || step == n {
            out.times.push(state.t);
            out.values.push(trace(&state));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoSetup {
    /// Distance from the wall `z = 0` at which the reflector sits.
    pub depths: Vec<f64>,
    pub cells_per_unit: usize,
    pub pulse_center: f64,
    pub pulse_half_width: f64,
    /// Radius at which the trace is read and the travel path runs.
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoPoint {
    pub depth: f64,
    /// Energy-weighted mean time of the echo minus the pulse centre.
    pub delay: f64,
    /// `2 * travel_time` to the reflector.
    pub predicted: f64,
}

/// Sends a plane pulse into the slab `0 <= z <= depth` with a reflecting far
/// wall and times the echo in the DN trace.
pub fn echo_experiment(g: &StationaryMetric, setup: &EchoSetup) -> Result<Vec<EchoPoint>> {
    let mut out = Vec::new();
    for &depth in &setup.depths {
        let path = LinePath { start: vec![setup.rho, 0.0], end: vec![setup.rho, depth] };
        let predicted = 2.0 * travel_time(g, &path, 1.0)?;
        let n_z = ((depth * setup.cells_per_unit as f64).ceil() as usize).max(8);
        let hz = depth / n_z as f64;
        let grid = GridSpec { rho_max: 4.0 * hz, z_min: 0.0, z_max: depth, n_rho: 4, n_z };
        let quiet = setup.pulse_center + setup.pulse_half_width;
        let t_final = setup.pulse_center + 1.5 * predicted + 2.0 * setup.pulse_half_width;
        let dn = DnSetup {
            grid,
            t_final,
            data: bump_data(setup.pulse_center, setup.pulse_half_width, 1.0, None),
            far_wall: Wall::Neumann,
            outer: OuterLayer::Reflecting,
            cfl: 0.4,
            sample_stride: 1,
        };
        let tr = dn_operator(g, &dn)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (t, v) in tr.times.iter().zip(&tr.values) {
            if *t > quiet {
                let e = v[0] * v[0];
                num += t * e;
                den += e;
            }
        }
        if den == 0.0 {
            return Err(Error::Range(format!("no echo from depth {depth} before t = {t_final}")));
        }
        out.push(EchoPoint { depth, delay: num / den - setup.pulse_center, predicted });
    }
    Ok(out)
}
