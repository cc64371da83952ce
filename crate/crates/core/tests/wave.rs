use std::sync::Arc;

use sonichole::curve::Ellipse;
use sonichole::horizon_design::{build_horizon_metric, ParametricCurve, Surface};
use sonichole::metric::StationaryMetric;
use sonichole::wave::*;

/// Spherically symmetric free wave from `u(0) = u0(R)`, `u_t(0) = 0`.
fn spherical(u0: impl Fn(f64) -> f64, t: f64, r: f64) -> f64 {
    ((r - t) * u0((r - t).abs()) + (r + t) * u0(r + t)) / (2.0 * r)
}

/// Relative sup-norm error at `t = 1` of a centred pulse. The data are even
/// in `z`, so the plane `z = 0` is a reflecting wall.
fn pulse_error(n: usize, sigma: f64) -> f64 {
    let grid = GridSpec { rho_max: 3.0, z_min: 0.0, z_max: 3.0, n_rho: n, n_z: n };
    let mut cfg = SimConfig::new(grid, 1.0);
    cfg.outer = OuterLayer::Reflecting;
    cfg.u0 = Profile::Gaussian { center: [0.0, 0.0], sigma, amplitude: 1.0 };
    let mut sim = Simulation::new(&StationaryMetric::minkowski_meridian(), cfg).unwrap();
    let (_, st) = sim.run().unwrap();
    let u0 = |r: f64| (-(r / sigma).powi(2)).exp();
    let (mut err, mut peak): (f64, f64) = (0.0, 0.0);
    for [rho, z, u] in sim.snapshot(&st) {
        let exact = spherical(u0, 1.0, rho.hypot(z));
        err = err.max((u - exact).abs());
        peak = peak.max(exact.abs());
    }
    err / peak
}

#[test]
fn flat_pulse_converges_at_second_order() {
    let (a, b) = (pulse_error(50, 0.5), pulse_error(100, 0.5));
    let order = (a / b).log2();
    assert!(order > 1.8, "{a:e} {b:e} order {order}");
}


fn designed_hole() -> (StationaryMetric, Arc<dyn Surface>) {
    let circle = ParametricCurve::new(Arc::new(Ellipse::circle([0.0, 0.0], 1.0).unwrap())).unwrap();
    let surface: Arc<dyn Surface> = Arc::new(circle);
    (build_horizon_metric(surface.clone(), true).unwrap().metric, surface)
}

fn hole_config(n: usize) -> SimConfig {
    let (_, surface) = designed_hole();
    let grid = GridSpec { rho_max: 3.0, z_min: -3.0, z_max: 3.0, n_rho: n, n_z: 2 * n };
    let mut cfg = SimConfig::new(grid, 1.0);
    cfg.excision = Some(surface);
    cfg.u0 = Profile::Gaussian { center: [0.0, 1.6], sigma: 0.4, amplitude: 1.0 };
    cfg.u1 = Profile::Gaussian { center: [0.0, 1.2], sigma: 0.4, amplitude: 1.0 };
    cfg
}

#[test]
fn stepping_is_a_semigroup() {
    let (g, _) = designed_hole();
    let mut sim = Simulation::new(&g, hole_config(40)).unwrap();
    let (dt, _) = sim.plan(1.0).unwrap();
    let mut once = sim.initial_state();
    let mut split = once.clone();
    sim.advance(&mut once, 30, dt, &mut EnergyReport::default()).unwrap();
    let mut report = EnergyReport::default();
    sim.advance(&mut split, 12, dt, &mut report).unwrap();
    sim.advance(&mut split, 18, dt, &mut report).unwrap();
    assert!((once.t - split.t).abs() < 1e-12);
    let diff = once.u.iter().zip(&split.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff:e}");
    assert_eq!(report.steps, 30);
}

#[test]
fn horizon_flux_sign_follows_time_orientation() {
    let (g, _) = designed_hole();
    let sim = Simulation::new(&g, hole_config(40)).unwrap();
    let flux = sim.horizon_flux(&sim.initial_state());
    assert!(flux < 0.0, "{flux}");
    let rev = Simulation::new(&g.time_reversed(), hole_config(40)).unwrap();
    let flux = rev.horizon_flux(&rev.initial_state());
    assert!(flux > 0.0, "{flux}");
}

#[test]
fn energy_never_increases_outside_a_black_hole() {
    let (g, _) = designed_hole();
    let mut cfg = hole_config(40);
    cfg.t_final = 3.0;
    let (report, _) = Simulation::new(&g, cfg).unwrap().run().unwrap();
    let rise = report.e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    assert!(rise <= 1e-12 * report.e[0], "{rise:e}");
    assert!(report.e.last().unwrap() < &report.e[0]);
}
