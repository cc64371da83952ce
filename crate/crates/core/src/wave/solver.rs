//! Method-of-lines solver for the m = 0 mode.
//!
//! The semi-discrete system comes from a discrete Lagrangian
//! `L = 1/2 p.M p + p.B D u - V(u)`, so it reads `M u'' = -S u' - K u` with
//! `K` symmetric and `S = B D - D^T B` skew. The discrete energy
//! `1/2 p.M p + V(u)` is then exactly conserved away from excision and
//! sponge, and its exterior part changes only through the horizon flux.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{Grid2D, GridSpec};
use crate::characteristics::characteristic_report;
use crate::error::{Error, Result};
use crate::horizon_design::Surface;
use crate::metric::{Coords, StationaryMetric};

pub const DEFAULT_CFL: f64 = 0.4;
/// Excised nodes lie at least this many cells inside the horizon.
pub const DEFAULT_EXCISION_DEPTH: f64 = 1.0;
/// Gaussian profiles are cut to zero beyond this many widths.
pub const GAUSSIAN_CUTOFF: f64 = 8.0;
const CFL_DIRECTIONS: usize = 16;
/// Width, relative to the volume weight, of the smooth transition between
/// the compact and wide parts of the spatial operator.
const SPLIT_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OuterLayer {
    Reflecting,
    /// Damping `strength * s^3` where `s` ramps from 0 to 1 across the outer
    /// `fraction` of the window.
    Sponge { fraction: f64, strength: f64 },
}

impl OuterLayer {
    pub fn default_sponge() -> Self {
        OuterLayer::Sponge { fraction: 0.15, strength: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Zero,
    Constant(f64),
    /// `amplitude * exp(-|x - center|^2 / sigma^2)`, zero past the cutoff.
    Gaussian { center: [f64; 2], sigma: f64, amplitude: f64 },
}

impl Profile {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant(c) => c,
            Profile::Gaussian { center, sigma, amplitude } => {
                let r = (p[0] - center[0]).hypot(p[1] - center[1]) / sigma;
                if r >= GAUSSIAN_CUTOFF {
                    0.0
                } else {
                    amplitude * (-r * r).exp()
                }
            }
        }
    }
}

/// Dirichlet data on the `z = z_min` wall: `(t, rho) -> (f, df/dt)`.
pub type BoundaryData = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

#[derive(Clone)]
pub struct SimConfig {
    pub grid: GridSpec,
    /// Walls at `(z_min, z_max)`.
    pub z_walls: (Wall, Wall),
    pub outer: OuterLayer,
    pub excision: Option<Arc<dyn Surface>>,
    pub excision_depth: f64,
    pub cfl: f64,
    /// Requested step; defaults to the CFL limit.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub sample_stride: usize,
    pub u0: Profile,
    pub u1: Profile,
    /// Kreiss-Oliger strength.
    pub dissipation: f64,
    /// Dissipation acts where the signed distance to the excision surface is
    /// below this many cells.
    pub dissipation_band: f64,
    pub flux_samples: usize,
    pub boundary_data: Option<BoundaryData>,
}

impl fmt::Debug for SimConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimConfig")
            .field("grid", &self.grid)
            .field("z_walls", &self.z_walls)
            .field("outer", &self.outer)
            .field("excision", &self.excision)
            .field("excision_depth", &self.excision_depth)
            .field("cfl", &self.cfl)
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .field("sample_stride", &self.sample_stride)
            .field("u0", &self.u0)
            .field("u1", &self.u1)
            .field("dissipation", &self.dissipation)
            .field("dissipation_band", &self.dissipation_band)
            .field("flux_samples", &self.flux_samples)
            .field("boundary_data", &self.boundary_data.is_some())
            .finish()
    }
}

impl SimConfig {
    pub fn new(grid: GridSpec, t_final: f64) -> Self {
        Self {
            grid,
            z_walls: (Wall::Neumann, Wall::Neumann),
            outer: OuterLayer::default_sponge(),
            excision: None,
            excision_depth: DEFAULT_EXCISION_DEPTH,
            cfl: DEFAULT_CFL,
            dt: None,
            t_final,
            sample_stride: 10,
            u0: Profile::Zero,
            u1: Profile::Zero,
            dissipation: 0.2,
            dissipation_band: 0.0,
            flux_samples: 2048,
            boundary_data: None,
        }
    }

    fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParams(format!("cfl {} outside (0, 1]", self.cfl)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParams(format!("t_final {}", self.t_final)));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParams("sample_stride must be positive".into()));
        }
        if self.boundary_data.is_some() && self.z_walls.0 != Wall::Dirichlet {
            return Err(Error::InvalidParams("boundary data needs a Dirichlet z_min wall".into()));
        }
        if let OuterLayer::Sponge { fraction, strength } = self.outer {
            if !(fraction > 0.0 && fraction < 0.5) || !(strength >= 0.0) {
                return Err(Error::InvalidParams("sponge fraction in (0, 0.5), strength >= 0".into()));
            }
        }
        if !(self.dissipation >= 0.0) || !(self.excision_depth >= 1.0) {
            return Err(Error::InvalidParams("dissipation >= 0 and excision depth >= 1 cell".into()));
        }
        Ok(())
    }
}

/// Fields on the padded grid; entries at excised nodes carry no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    pub e: f64,
    pub e1: f64,
    pub e2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub e: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub flux: Vec<f64>,
    /// Trapezoid-rule `int_0^t flux`.
    pub flux_integral: Vec<f64>,
    pub sup_u: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
}

impl EnergyReport {
    /// `E(t) - E(0) - int_0^t flux` at each sample.
    pub fn balance_residual(&self) -> Vec<f64> {
        let e0 = self.e.first().copied().unwrap_or(0.0);
        self.e.iter().zip(&self.flux_integral).map(|(e, f)| e - e0 - f).collect()
    }

    fn push(&mut self, t: f64, en: Energies, flux: f64, flux_integral: f64, sup_u: f64) {
        self.times.push(t);
        self.e.push(en.e);
        self.e1.push(en.e1);
        self.e2.push(en.e2);
        self.flux.push(flux);
        self.flux_integral.push(flux_integral);
        self.sup_u.push(sup_u);
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Parity {
    Field,
    Transposed,
}

#[derive(Clone, Copy)]
enum Data {
    None,
    Value(f64),
    Rate(f64),
}

/// Centred fourth difference, or the second difference next to the
/// excision where five nodes do not fit.
#[derive(Clone, Copy, Debug)]
enum Damping {
    Fourth,
    Second,
}

#[derive(Clone, Copy, Default)]
struct Node {
    w: f64,
    g00: f64,
    g01: f64,
    g02: f64,
    crr: f64,
    czz: f64,
    crz: f64,
    /// Diagonal of the positive part of `-w g^{jk}`, differenced
    /// with the compact stencil.
    drr: f64,
    dzz: f64,
    /// Diagonal of the negative part, differenced with the wide stencil.
    nrr: f64,
    nzz: f64,
}

pub struct Simulation {
    pub grid: Grid2D,
    cfg: SimConfig,
    /// Padded indices of active nodes and their real-cell indices.
    active: Vec<usize>,
    real: Vec<usize>,
    node: Vec<Node>,
    fr: Vec<f64>,
    fz: Vec<f64>,
    sponge: Vec<f64>,
    /// Dissipation nodes with the stencil used along `rho` and `z`.
    ko: Vec<(usize, Damping, Damping)>,
    ghosts: Vec<(usize, Vec<(usize, f64)>)>,
    flux_points: Vec<([f64; 2], f64)>,
    scratch: [Vec<f64>; 4],
    /// Largest characteristic speed over active nodes.
    pub lambda_max: f64,
    /// CFL step limit `cfl * min(h) / lambda_max`.
    pub dt_max: f64,
    /// Characteristic residual of the excision surface, if any.
    pub horizon_residual: Option<f64>,
}

impl fmt::Debug for Simulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulation")
            .field("grid", &self.grid.spec)
            .field("active", &self.active.len())
            .field("lambda_max", &self.lambda_max)
            .field("dt_max", &self.dt_max)
            .finish()
    }
}

fn node_coefficients(g: &StationaryMetric, p: [f64; 2]) -> Result<Node> {
    let inv = g.inverse(&p)?;
    let w = g.volume_weight(&p)?;
    let (crr, czz, crz) = (-w * inv[(1, 1)], -w * inv[(2, 2)], -w * inv[(1, 2)]);
    let [[nrr, _], [_, nzz]] = smooth_negative_part(crr, czz, crz, SPLIT_SCALE * w);
    let (drr, dzz) = (crr - nrr, czz - nzz);
    Ok(Node { w, g00: inv[(0, 0)], g01: inv[(0, 1)], g02: inv[(0, 2)], crr, czz, crz, drr, dzz, nrr, nzz })
}

/// Smooth negative part `N = (G - sqrt(G^2 + delta^2))/2` of the symmetric
/// 2x2 matrix `G = [[a, c], [c, b]]`. `G - N` is positive definite, `N` is
/// negative definite and both are analytic in the entries of `G`.
fn smooth_negative_part(a: f64, b: f64, c: f64, delta: f64) -> [[f64; 2]; 2] {
    let f = |l: f64| {
        let r = l.hypot(delta);
        if l > 0.0 {
            -0.5 * delta * delta / (l + r)
        } else {
            0.5 * (l - r)
        }
    };
    let mean = 0.5 * (a + b);
    let rad = (0.25 * (a - b) * (a - b) + c * c).sqrt();
    let (l1, l2) = (mean + rad, mean - rad);
    // f(G) = alpha I + beta G
    let beta = if rad > 1e-8 * delta {
        (f(l1) - f(l2)) / (l1 - l2)
    } else {
        0.5 * (1.0 - mean / mean.hypot(delta))
    };
    let alpha = f(l1) - beta * l1;
    [[alpha + beta * a, beta * c], [beta * c, alpha + beta * b]]
}

fn max_speed(n: &Node) -> f64 {
    let (g11, g22, g12) = (-n.crr / n.w, -n.czz / n.w, -n.crz / n.w);
    let mut best: f64 = 0.0;
    for k in 0..CFL_DIRECTIONS {
        let th = std::f64::consts::PI * k as f64 / CFL_DIRECTIONS as f64;
        let (c, s) = (th.cos(), th.sin());
        let b = n.g01 * c + n.g02 * s;
        let q = g11 * c * c + 2.0 * g12 * c * s + g22 * s * s;
        let disc = (b * b - n.g00 * q).max(0.0).sqrt();
        best = best.max((b.abs() + disc) / n.g00);
    }
    best
}

impl Simulation {
    pub fn new(g: &StationaryMetric, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if g.coords() != Coords::Meridian {
            return Err(Error::InvalidParams("the solver needs a meridian-plane metric".into()));
        }
        let grid = Grid2D::new(cfg.grid, cfg.excision.clone(), cfg.excision_depth)?;
        let spec = cfg.grid;
        let (nr, nz) = (spec.n_rho as isize, spec.n_z as isize);
        let (hr, hz) = spec.h();
        let s = spec.stride() as isize;
        let len = spec.padded_len();

        let mut active = Vec::new();
        let mut real = Vec::new();
        for j in 0..nz {
            for i in 0..nr {
                if grid.is_active(i, j) {
                    active.push(spec.at(i, j));
                    real.push((j * nr + i) as usize);
                }
            }
        }

        // node coefficients on active nodes and their neighbours
        let mut node = vec![Node { w: f64::NAN, ..Default::default() }; len];
        let mut evaluated = vec![false; len];
        let mut lambda_max: f64 = 0.0;
        for (&k, &r) in active.iter().zip(&real) {
            let (i, j) = ((r as isize) % nr, (r as isize) / nr);
            let n = node_coefficients(g, spec.node(i, j))?;
            if !(n.g00 > 0.0) || !(n.w > 0.0) {
                return Err(Error::Hyperbolicity(format!(
                    "g^00 = {} at {:?}",
                    n.g00,
                    spec.node(i, j)
                )));
            }
            lambda_max = lambda_max.max(max_speed(&n));
            node[k] = n;
            evaluated[k] = true;
        }
        for &k in &active {
            for d in [1, -1, s, -s] {
                let q = (k as isize + d) as usize;
                if !evaluated[q] {
                    evaluated[q] = true;
                    let (i, j) = ((q as isize % s) - 2, (q as isize / s) - 2);
                    if let Ok(n) = node_coefficients(g, spec.node(i, j)) {
                        if n.drr.is_finite() && n.dzz.is_finite() {
                            node[q] = n;
                        }
                    }
                }
            }
        }
        let avg = |a: f64, b: f64| match (a.is_finite(), b.is_finite()) {
            (true, true) => 0.5 * (a + b),
            (true, false) => a,
            (false, true) => b,
            _ => 0.0,
        };
        let mut fr = vec![0.0; len];
        let mut fz = vec![0.0; len];
        for &k in &active {
            for (q, dir) in [(k, 1isize), (k - 1, 1)] {
                fr[q] = avg(node[q].drr, node[(q as isize + dir) as usize].drr);
            }
            for q in [k, k - s as usize] {
                fz[q] = avg(node[q].dzz, node[q + s as usize].dzz);
            }
        }

        let mut sponge = vec![0.0; len];
        if let OuterLayer::Sponge { fraction, strength } = cfg.outer {
            let wr = fraction * spec.rho_max;
            let wz = fraction * (spec.z_max - spec.z_min);
            for &k in &active {
                let (i, j) = ((k as isize % s) - 2, (k as isize / s) - 2);
                let p = spec.node(i, j);
                let mut depth = ((p[0] - (spec.rho_max - wr)) / wr).max(0.0);
                depth = depth.max((p[1] - (spec.z_max - wz)) / wz);
                if cfg.boundary_data.is_none() {
                    depth = depth.max((spec.z_min + wz - p[1]) / wz);
                }
                sponge[k] = strength * depth.clamp(0.0, 1.0).powi(3);
            }
        }

        // extrapolation stencils for excised neighbours of active nodes
        let mut ghosts = Vec::new();
        let mut ko = Vec::new();
        if grid.excision.is_some() {
            let mut done = vec![false; len];
            for &k in &active {
                let (i, j) = ((k as isize % s) - 2, (k as isize / s) - 2);
                for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (a, b) = (i + di, j + dj);
                    let in_grid = a >= 0 && b >= 0 && a < nr && b < nz;
                    if !in_grid || grid.is_active(a, b) {
                        continue;
                    }
                    let e = spec.at(a, b);
                    if done[e] {
                        continue;
                    }
                    done[e] = true;
                    let mut terms: Vec<(usize, f64)> = Vec::new();
                    let mut dirs = 0.0;
                    for (ei, ej) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                        let act = |m: isize| grid.is_active(a + m * ei, b + m * ej);
                        let idx = |m: isize| spec.at(a + m * ei, b + m * ej);
                        let st: Vec<(usize, f64)> = if act(1) && act(2) && act(3) {
                            vec![(idx(1), 3.0), (idx(2), -3.0), (idx(3), 1.0)]
                        } else if act(1) && act(2) {
                            vec![(idx(1), 2.0), (idx(2), -1.0)]
                        } else if act(1) {
                            vec![(idx(1), 1.0)]
                        } else {
                            continue;
                        };
                        dirs += 1.0;
                        terms.extend(st);
                    }
                    for t in &mut terms {
                        t.1 /= dirs;
                    }
                    ghosts.push((e, terms));
                }
            }
            for (&k, &r) in active.iter().zip(&real) {
                if grid.distance[r] < cfg.dissipation_band * hr.max(hz) && cfg.dissipation > 0.0 {
                    let (i, j) = ((r as isize) % nr, (r as isize) / nr);
                    // the axis ghosts mirror real nodes
                    let usable = |a: isize, b: isize| grid.is_active(if a < 0 { -1 - a } else { a }, b);
                    let along = |di: isize, dj: isize| {
                        if (-2..=2).all(|m: isize| usable(i + m * di, j + m * dj)) {
                            Damping::Fourth
                        } else {
                            Damping::Second
                        }
                    };
                    ko.push((k, along(1, 0), along(0, 1)));
                }
            }
        }

        let mut horizon_residual = None;
        let mut flux_points = Vec::new();
        if let Some(surf) = &grid.excision {
            let (pts, nus) = surf.samples(cfg.flux_samples.max(16));
            let lifted: Vec<Vec<f64>> = nus.iter().map(|n| vec![n[0], n[1], 0.0]).collect();
            if let Ok(rep) = characteristic_report(g, &pts, &lifted) {
                horizon_residual = Some(rep.residual);
            }
            let n = pts.len();
            for k in 0..n {
                let (prev, next) = (&pts[(k + n - 1) % n], &pts[(k + 1) % n]);
                let ds = 0.5
                    * ((pts[k][0] - prev[0]).hypot(pts[k][1] - prev[1])
                        + (next[0] - pts[k][0]).hypot(next[1] - pts[k][1]));
                let p = [pts[k][0], pts[k][1]];
                let inv = g.inverse(&p)?;
                let w = g.volume_weight(&p)?;
                let gn = inv[(0, 1)] * nus[k][0] + inv[(0, 2)] * nus[k][1];
                // the loop covers rho < 0 as well; the grid only half of it
                flux_points.push(([p[0].abs(), p[1]], 0.5 * gn * w * ds));
            }
        }

        let dt_max = cfg.cfl * hr.min(hz) / lambda_max.max(f64::MIN_POSITIVE);
        Ok(Self {
            grid,
            cfg,
            active,
            real,
            node,
            fr,
            fz,
            sponge,
            ko,
            ghosts,
            flux_points,
            scratch: std::array::from_fn(|_| vec![0.0; len]),
            lambda_max,
            dt_max,
            horizon_residual,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// State sampled from the configured initial profiles.
    pub fn initial_state(&self) -> WaveState {
        let spec = self.grid.spec;
        let len = spec.padded_len();
        let (mut u, mut ut) = (vec![0.0; len], vec![0.0; len]);
        let nr = spec.n_rho as isize;
        for (&k, &r) in self.active.iter().zip(&self.real) {
            let p = spec.node(r as isize % nr, r as isize / nr);
            u[k] = self.cfg.u0.eval(p);
            ut[k] = self.cfg.u1.eval(p);
        }
        let mut s = WaveState { u, ut, t: 0.0 };
        self.fill_state_ghosts(&mut s);
        s
    }

    /// Step size for a run to `t_final`: the requested or CFL step, shrunk
    /// so that a whole number of steps lands on `t_final`.
    pub fn plan(&self, t_final: f64) -> Result<(f64, usize)> {
        let dt = match self.cfg.dt {
            Some(dt) if dt > self.dt_max * (1.0 + 1e-12) => {
                return Err(Error::Cfl { dt, suggested: self.dt_max });
            }
            Some(dt) if dt > 0.0 => dt,
            Some(dt) => return Err(Error::InvalidParams(format!("dt {dt} must be positive"))),
            None => self.dt_max,
        };
        if t_final == 0.0 {
            return Ok((dt, 0));
        }
        let n = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
        Ok((t_final / n as f64, n))
    }

    fn fill_ghosts(&self, v: &mut [f64], parity: Parity, t: f64, data: fn(f64, f64) -> Data, bd: Option<&BoundaryData>) {
        let spec = self.grid.spec;
        let (nr, nz) = (spec.n_rho as isize, spec.n_z as isize);
        for (e, st) in &self.ghosts {
            v[*e] = st.iter().map(|(q, c)| c * v[*q]).sum();
        }
        let sign = if parity == Parity::Field { 1.0 } else { -1.0 };
        for j in 0..nz {
            for m in 0..2 {
                v[spec.at(-1 - m, j)] = sign * v[spec.at(m, j)];
                v[spec.at(nr + m, j)] = sign * v[spec.at(nr - 1 - m, j)];
            }
        }
        for (wall, lower) in [(self.cfg.z_walls.0, true), (self.cfg.z_walls.1, false)] {
            for i in -2..nr + 2 {
                let d = if lower && wall == Wall::Dirichlet && parity == Parity::Field {
                    match bd {
                        Some(f) => {
                            let (val, rate) = f(t, spec.node(i, 0)[0].abs());
                            data(val, rate)
                        }
                        None => Data::None,
                    }
                } else {
                    Data::None
                };
                let x = match d {
                    Data::None => 0.0,
                    Data::Value(x) | Data::Rate(x) => x,
                };
                let at = |m: isize| if lower { spec.at(i, m) } else { spec.at(i, nz - 1 - m) };
                let ghost = |m: isize| if lower { spec.at(i, -1 - m) } else { spec.at(i, nz + m) };
                match (wall, parity) {
                    (Wall::Neumann, p) => {
                        let s = if p == Parity::Field { 1.0 } else { -1.0 };
                        for m in 0..2 {
                            v[ghost(m)] = s * v[at(m)];
                        }
                    }
                    // quadratic through the wall value and the first two nodes
                    (Wall::Dirichlet, Parity::Field) => {
                        let (u0, u1) = (v[at(0)], v[at(1)]);
                        v[ghost(0)] = (8.0 * x - 6.0 * u0 + u1) / 3.0;
                        v[ghost(1)] = 8.0 * x - 9.0 * u0 + 2.0 * u1;
                    }
                    (Wall::Dirichlet, Parity::Transposed) => {
                        let (q0, q1, q2) = (v[at(0)], v[at(1)], v[at(2)]);
                        v[ghost(0)] = 3.0 * q0 - 3.0 * q1 + q2;
                        v[ghost(1)] = 6.0 * q0 - 8.0 * q1 + 3.0 * q2;
                    }
                }
            }
        }
    }

    fn fill_u(&self, v: &mut [f64], t: f64) {
        self.fill_ghosts(v, Parity::Field, t, |f, _| Data::Value(f), self.cfg.boundary_data.as_ref());
    }

    fn fill_p(&self, v: &mut [f64], t: f64) {
        self.fill_ghosts(v, Parity::Field, t, |_, r| Data::Rate(r), self.cfg.boundary_data.as_ref());
    }

    fn fill_state_ghosts(&self, s: &mut WaveState) {
        self.fill_u(&mut s.u, s.t);
        self.fill_p(&mut s.ut, s.t);
    }

    /// Right-hand side of the first-order system; fills ghosts of `u`, `p`.
    fn rhs(&mut self, t: f64, u: &mut [f64], p: &mut [f64], du: &mut [f64], dp: &mut [f64]) {
        self.fill_u(u, t);
        self.fill_p(p, t);
        let spec = self.grid.spec;
        let (hr, hz) = spec.h();
        let s = spec.stride();
        let (ir2, iz2) = (0.5 / hr, 0.5 / hz);
        let (ihr2, ihz2) = (1.0 / (hr * hr), 1.0 / (hz * hz));
        let [mut q1, mut q2, mut rr, mut rz] = std::mem::take(&mut self.scratch);
        for &k in &self.active {
            let n = &self.node[k];
            let dru = (u[k + 1] - u[k - 1]) * ir2;
            let dzu = (u[k + s] - u[k - s]) * iz2;
            q1[k] = n.nrr * dru + n.crz * dzu;
            q2[k] = n.crz * dru + n.nzz * dzu;
            rr[k] = n.w * n.g01 * p[k];
            rz[k] = n.w * n.g02 * p[k];
        }
        for v in [&mut q1, &mut q2, &mut rr, &mut rz] {
            self.fill_ghosts(v, Parity::Transposed, t, |_, _| Data::None, None);
        }
        for &k in &self.active {
            let n = &self.node[k];
            let uk = u[k];
            let kface = (self.fr[k] * (uk - u[k + 1]) + self.fr[k - 1] * (uk - u[k - 1])) * ihr2
                + (self.fz[k] * (uk - u[k + s]) + self.fz[k - s] * (uk - u[k - s])) * ihz2;
            let kmix = -((q1[k + 1] - q1[k - 1]) * ir2 + (q2[k + s] - q2[k - s]) * iz2);
            let sp = n.w * (n.g01 * (p[k + 1] - p[k - 1]) * ir2 + n.g02 * (p[k + s] - p[k - s]) * iz2)
                + (rr[k + 1] - rr[k - 1]) * ir2
                + (rz[k + s] - rz[k - s]) * iz2;
            dp[k] = -(sp + kface + kmix) / (n.w * n.g00) - self.sponge[k] * p[k];
            du[k] = p[k];
        }
        let eps = self.cfg.dissipation;
        for &(k, alongr, alongz) in &self.ko {
            // both forms damp the sawtooth mode at the rate eps / h
            for (mode, st, h) in [(alongr, 1isize, hr), (alongz, s as isize, hz)] {
                let at = |v: &[f64], m: isize| v[(k as isize + m * st) as usize];
                match mode {
                    Damping::Fourth => {
                        let d4 = |v: &[f64]| at(v, -2) - 4.0 * at(v, -1) + 6.0 * at(v, 0) - 4.0 * at(v, 1) + at(v, 2);
                        du[k] -= eps / (16.0 * h) * d4(u);
                        dp[k] -= eps / (16.0 * h) * d4(p);
                    }
                    Damping::Second => {
                        let d2 = |v: &[f64]| at(v, -1) - 2.0 * at(v, 0) + at(v, 1);
                        du[k] += eps / (4.0 * h) * d2(u);
                        dp[k] += eps / (4.0 * h) * d2(p);
                    }
                }
            }
        }
        self.scratch = [q1, q2, rr, rz];
    }

    /// One RK4 step.
    pub fn step(&mut self, state: &mut WaveState, dt: f64) -> Result<()> {
        if dt > self.dt_max * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, suggested: self.dt_max });
        }
        let len = state.u.len();
        let t = state.t;
        let mut ku = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        let mut kp = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        let mut yu = state.u.clone();
        let mut yp = state.ut.clone();
        let stages = [(0.0, 0usize), (0.5, 0), (0.5, 1), (1.0, 2)];
        for (st, &(c, prev)) in stages.iter().enumerate() {
            if st > 0 {
                for &k in &self.active {
                    yu[k] = state.u[k] + c * dt * ku[prev][k];
                    yp[k] = state.ut[k] + c * dt * kp[prev][k];
                }
            }
            let (a, b) = (&mut ku[st], &mut kp[st]);
            let (mut da, mut db) = (std::mem::take(a), std::mem::take(b));
            self.rhs(t + c * dt, &mut yu, &mut yp, &mut da, &mut db);
            ku[st] = da;
            kp[st] = db;
        }
        let mut sum = 0.0;
        for &k in &self.active {
            state.u[k] += dt / 6.0 * (ku[0][k] + 2.0 * ku[1][k] + 2.0 * ku[2][k] + ku[3][k]);
            state.ut[k] += dt / 6.0 * (kp[0][k] + 2.0 * kp[1][k] + 2.0 * kp[2][k] + kp[3][k]);
            sum += state.u[k] + state.ut[k];
        }
        state.t = t + dt;
        if !sum.is_finite() {
            return Err(Error::BlowUp { t: state.t });
        }
        self.fill_state_ghosts(state);
        Ok(())
    }

    /// `E`, `E1`, `E2` over the exterior of the excision surface.
    pub fn energies(&self, s: &WaveState) -> Energies {
        let spec = self.grid.spec;
        let (hr, hz) = spec.h();
        let area = hr * hz;
        let st = spec.stride();
        let (ir2, iz2) = (0.5 / hr, 0.5 / hz);
        let (u, p) = (&s.u, &s.ut);
        let mut hu = vec![0.0; u.len()];
        for &k in &self.active {
            let n = &self.node[k];
            hu[k] = n.g01 * (u[k + 1] - u[k - 1]) * ir2 + n.g02 * (u[k + st] - u[k - st]) * iz2;
        }
        self.fill_ghosts(&mut hu, Parity::Field, s.t, |_, _| Data::None, None);
        let (mut e, mut e1x, mut e2) = (0.0, 0.0, 0.0);
        for (&k, &r) in self.active.iter().zip(&self.real) {
            let frac = self.grid.exterior_fraction[r];
            if frac == 0.0 {
                continue;
            }
            let n = &self.node[k];
            let dru = (u[k + 1] - u[k - 1]) * ir2;
            let dzu = (u[k + st] - u[k - st]) * iz2;
            let sq = |a: f64| a * a;
            let faces = self.fr[k] * sq(u[k + 1] - u[k]) / (hr * hr)
                + self.fr[k - 1] * sq(u[k] - u[k - 1]) / (hr * hr)
                + self.fz[k] * sq(u[k + st] - u[k]) / (hz * hz)
                + self.fz[k - st] * sq(u[k] - u[k - st]) / (hz * hz);
            let wide = 0.5 * (n.nrr * dru * dru + n.nzz * dzu * dzu) + n.crz * dru * dzu;
            let dens = 0.5 * n.w * n.g00 * p[k] * p[k] + 0.25 * faces + wide;
            e += frac * area * dens;
            let h = hu[k];
            e1x += frac * area * 0.5 * n.w * (sq(n.g00 * p[k] + h) + h * h - n.g00 * p[k] * p[k]);
            let hp = n.g01 * (p[k + 1] - p[k - 1]) * ir2 + n.g02 * (p[k + st] - p[k - st]) * iz2;
            let (dwr, dwz) = ((hu[k + 1] - hu[k - 1]) * ir2, (hu[k + st] - hu[k - st]) * iz2);
            let hw = n.g01 * dwr + n.g02 * dwz;
            let spatial = (n.crr * dwr * dwr + 2.0 * n.crz * dwr * dwz + n.czz * dwz * dwz) / n.w;
            e2 += frac * area * 0.5 * n.w * (sq(n.g00 * hp + hw) + hw * hw + spatial);
        }
        Energies { e, e1: e + e1x, e2 }
    }

    /// Bilinear interpolation of a padded field with filled ghosts.
    pub fn interpolate(&self, v: &[f64], p: [f64; 2]) -> f64 {
        let spec = self.grid.spec;
        let (hr, hz) = spec.h();
        let fi = p[0].abs() / hr - 0.5;
        let fj = (p[1] - spec.z_min) / hz - 0.5;
        let i0 = (fi.floor() as isize).clamp(-1, spec.n_rho as isize - 1);
        let j0 = (fj.floor() as isize).clamp(-1, spec.n_z as isize - 1);
        let (a, b) = (fi - i0 as f64, fj - j0 as f64);
        let at = |i, j| v[spec.at(i, j)];
        (1.0 - a) * (1.0 - b) * at(i0, j0)
            + a * (1.0 - b) * at(i0 + 1, j0)
            + (1.0 - a) * b * at(i0, j0 + 1)
            + a * b * at(i0 + 1, j0 + 1)
    }

    /// `sum (g^{0j} nu_j) u_t^2 |rho| sqrt|g| ds` over the excision surface.
    pub fn horizon_flux(&self, s: &WaveState) -> f64 {
        self.flux_points
            .iter()
            .map(|(p, c)| {
                let v = self.interpolate(&s.ut, *p);
                c * v * v
            })
            .sum()
    }

    /// `max |u|` over cells with exterior area.
    pub fn sup_u(&self, s: &WaveState) -> f64 {
        self.active
            .iter()
            .zip(&self.real)
            .filter(|(_, r)| self.grid.exterior_fraction[**r] > 0.0)
            .map(|(k, _)| s.u[*k].abs())
            .fold(0.0, f64::max)
    }

    /// Advances `n` steps of size `dt`, appending samples to `report` every
    /// `sample_stride` steps and at the end.
    pub fn advance(&mut self, state: &mut WaveState, n: usize, dt: f64, report: &mut EnergyReport) -> Result<()> {
        let stride = self.cfg.sample_stride;
        let mut flux = self.horizon_flux(state);
        let mut integral = report.flux_integral.last().copied().unwrap_or(0.0);
        if report.times.is_empty() {
            report.push(state.t, self.energies(state), flux, integral, self.sup_u(state));
        }
        for step in 1..=n {
            self.step(state, dt)?;
            let next = self.horizon_flux(state);
            integral += 0.5 * dt * (flux + next);
            flux = next;
            if step % stride == 0 || step == n {
                report.push(state.t, self.energies(state), flux, integral, self.sup_u(state));
            }
        }
        report.dt = dt;
        report.steps += n;
        Ok(())
    }

    /// Runs from the initial profiles to `t_final`.
    pub fn run(&mut self) -> Result<(EnergyReport, WaveState)> {
        let (dt, n) = self.plan(self.cfg.t_final)?;
        let mut state = self.initial_state();
        let mut report = EnergyReport::default();
        self.advance(&mut state, n, dt, &mut report)?;
        report.dt = dt;
        Ok((report, state))
    }

    /// `(rho, z, u)` at every active node.
    pub fn snapshot(&self, s: &WaveState) -> Vec<[f64; 3]> {
        let spec = self.grid.spec;
        let nr = spec.n_rho as isize;
        self.active
            .iter()
            .zip(&self.real)
            .map(|(&k, &r)| {
                let p = spec.node(r as isize % nr, r as isize / nr);
                [p[0], p[1], s.u[k]]
            })
            .collect()
    }

    /// Node coordinates and values on the `z_min` wall row, for traces.
    pub(crate) fn wall_row(&self) -> Vec<(usize, [f64; 2])> {
        let spec = self.grid.spec;
        (0..spec.n_rho as isize)
            .filter(|&i| self.grid.is_active(i, 0))
            .map(|i| (spec.at(i, 0), spec.node(i, 0)))
            .collect()
    }
}

/// Builds the solver and runs it to `cfg.t_final`.
pub fn run_simulation(g: &StationaryMetric, cfg: SimConfig) -> Result<EnergyReport> {
    Ok(Simulation::new(g, cfg)?.run()?.0)
}
