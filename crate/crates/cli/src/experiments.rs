//! One function per command. Each reads its keys, runs, and records
//! artifacts and checks on the [`Run`].

use std::sync::Arc;

use serde::Serialize;
use serde_json::json;
use sonichole::characteristics::{
    characteristic_report, find_closed_characteristic, CharReport, Classification, IntegrateOptions, SearchOptions,
};
use sonichole::curve::{kerr_horizon_ellipse, Ellipse, PlaneCurve, SmoothCurve};
use sonichole::ergosphere::{containment_check, delta, delta1, kerr_horizon_radii, Containment};
use sonichole::horizon_design::{build_horizon_metric, family_with_horizons, perturb_metric_bump, BumpSpec, Surface};
use sonichole::levelset::{trace_level_set, Window};
use sonichole::metric::build_flow_metric;
use sonichole::stats::fit_line;
use sonichole::wave::{
    bump_data, dn_operator, echo_experiment, lambda_pm, travel_time, DnSetup, EchoSetup, GridSpec, LinePath,
    OuterLayer, Profile, SimConfig, Simulation, Wall,
};

use crate::config::Config;
use crate::output::{Run, Table};
use crate::specs::{self, invalid, runtime, BuiltMetric};
use crate::CliError;

fn window(cfg: &Config) -> Result<Window, CliError> {
    let rho = (cfg.f64_or("window.rho_min", 0.0)?, cfg.f64("window.rho_max")?);
    let z = (cfg.f64("window.z_min")?, cfg.f64("window.z_max")?);
    Window::new(rho, z).map_err(|e| invalid("window.rho_max", e.to_string()))
}

fn point(cfg: &Config, key: &str) -> Result<Vec<f64>, CliError> {
    let v = cfg.list(key)?;
    if v.len() < 2 {
        return Err(invalid(key, "expected at least two coordinates"));
    }
    Ok(v)
}

/// Samples of a closed curve with the scalar fields the `ergo` table reports.
fn curve_table(bm: &BuiltMetric, c: &PlaneCurve) -> Result<Table, CliError> {
    let mut t = Table::new(&["s", "rho", "z", "delta", "delta1"]);
    for (s, p) in c.arc_fractions().iter().zip(&c.points) {
        let d = delta(&bm.metric, p).map_err(runtime("delta"))?;
        let d1 = delta1(&bm.metric, p).map_err(runtime("delta1"))?;
        t.push(&[*s, p[0], p[1], d, d1]);
    }
    Ok(t)
}

#[derive(Serialize)]
struct Component {
    samples: usize,
    residual_max: f64,
    bbox: [[f64; 2]; 2],
}

pub fn ergo(cfg: &Config, run: &mut Run, seed: u64) -> Result<(), CliError> {
    let bm = specs::metric(cfg, seed)?;
    bm.require_meridian("ergo")?;
    let w = window(cfg)?;
    let n = cfg.usize_or("trace.resolution", 301)?;
    let is_kerr = bm.kerr.is_some();
    let identity = cfg.bool_or("check.identity", is_kerr)?;
    let identity_tol = cfg.f64_or("check.identity_tol", 1e-9)?;
    let want_containment = cfg.bool_or("check.containment", true)?;
    let tangency = cfg.bool_or("check.axis_tangency", is_kerr)?;
    if (identity || tangency) && !is_kerr {
        return Err(invalid("check.identity", "the horizon identity and axis tangency checks need metric.family = kerr"));
    }
    cfg.finish()?;
    let g = &bm.metric;
    let d = trace_level_set(|q| delta(g, &q), w, n).map_err(runtime("tracing delta = 0"))?;
    let d1 = trace_level_set(|q| delta1(g, &q), w, n).map_err(runtime("tracing delta1 = 0"))?;
    let mut report = serde_json::Map::new();
    for (name, comps) in [("delta", &d), ("delta1", &d1)] {
        let mut list = Vec::new();
        for (k, c) in comps.iter().enumerate() {
            run.csv(&format!("{name}_zero_{k}.csv"), &curve_table(&bm, &c.curve)?)?;
            list.push(Component {
                samples: c.curve.len(),
                residual_max: c.residual_max,
                bbox: [c.bbox.min, c.bbox.max],
            });
        }
        let worst = comps.iter().map(|c| c.residual_max).fold(0.0, f64::max);
        run.below(&format!("{name}_trace_residual"), worst, 1e-8);
        report.insert(name.into(), json!(list));
    }
    if identity {
        let p = bm.kerr.unwrap();
        let (rp, rm) = kerr_horizon_radii(p);
        let mut worst: f64 = 0.0;
        for r in [rp, rm] {
            let e = kerr_horizon_ellipse(p.m, r);
            for k in 0..400 {
                worst = worst.max(delta1(g, &e.point((k as f64 + 0.25) / 400.0)).map_err(runtime("delta1"))?.abs());
            }
        }
        run.below("delta1_on_horizon_ellipses", worst, identity_tol);
    }
    if want_containment || tangency {
        let (Some(inner), Some(outer)) = (d1.first(), d.first()) else {
            return Err(CliError::Runtime("no closed ergosphere component inside the window".into()));
        };
        let status = containment_check(&inner.curve, &outer.curve);
        report.insert("containment".into(), json!(status));
        if want_containment {
            run.holds("restricted_inside_ergosphere", !matches!(status, Containment::Violated(_)), "no sample outside");
        }
        if tangency {
            let (rp, _) = kerr_horizon_radii(bm.kerr.unwrap());
            let ok = match &status {
                Containment::Touching(pts) => {
                    pts.iter().all(|q| q[0].abs() < 0.05 * rp) && pts.iter().any(|q| (q[1].abs() - rp).abs() < 0.05 * rp)
                }
                _ => false,
            };
            run.holds("tangency_on_axis_at_poles", ok, "touching only near rho = 0, z = +-r_plus");
        }
    }
    run.json("report.json", &report)
}

fn search_options(cfg: &Config) -> Result<(SearchOptions, usize), CliError> {
    let d = SearchOptions::default();
    let opts = SearchOptions {
        integrate: IntegrateOptions {
            h: cfg.f64_or("search.h", 1e-3)?,
            max_len: cfg.f64_or("search.max_len", 50.0)?,
            closure_tol: cfg.f64_or("search.closure_tol", d.integrate.closure_tol)?,
            ..d.integrate
        },
        trace_resolution: cfg.usize_or("trace.resolution", d.trace_resolution)?,
        near_fraction: cfg.f64_or("search.near_fraction", d.near_fraction)?,
        outermost_only: cfg.bool_or("search.outermost_only", true)?,
    };
    Ok((opts, cfg.usize_or("search.seeds", 16)?))
}

fn exits(search: &sonichole::characteristics::ClosureSearch) -> serde_json::Value {
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    for o in &search.outcomes {
        let v = serde_json::to_value(&o.exit).unwrap_or_default();
        let key = v.get("event").and_then(|e| e.as_str()).unwrap_or("unknown").to_string();
        *counts.entry(key).or_default() += 1;
    }
    json!(counts)
}

pub fn horizon(cfg: &Config, run: &mut Run, seed: u64) -> Result<(), CliError> {
    let bm = specs::metric(cfg, seed)?;
    bm.require_meridian("horizon")?;
    let w = window(cfg)?;
    let (opts, n_seeds) = search_options(cfg)?;
    let expect = cfg.choice("check.expect", &["closed", "none"], Some("closed"))?;
    let tol = cfg.f64_or("check.hausdorff_rel", 1e-4)?;
    cfg.finish()?;
    let search = find_closed_characteristic(&bm.metric, w, n_seeds, &opts).map_err(runtime("closure search"))?;
    run.json(
        "certificate.json",
        &json!({
            "closed": search.closed.is_some(),
            "closing_seed": search.closing_seed,
            "components": search.components,
            "exit_counts": exits(&search),
            "outcomes": search.outcomes,
        }),
    )?;
    if let Some(c) = &search.closed {
        let mut t = Table::new(&["s", "rho", "z"]);
        for (s, p) in c.arc_fractions().iter().zip(&c.points) {
            t.push(&[*s, p[0], p[1]]);
        }
        run.csv("horizon.csv", &t)?;
    }
    run.holds(
        "closure_outcome",
        search.closed.is_some() == (expect == "closed"),
        if expect == "closed" { "a closed characteristic is found" } else { "no seed closes" },
    );
    if let (Some(c), Some(p)) = (&search.closed, bm.kerr) {
        let (rp, _) = kerr_horizon_radii(p);
        let h = c.hausdorff(&kerr_horizon_ellipse(p.m, rp).sample(4000));
        run.below("hausdorff_to_outer_horizon_over_r_plus", h / rp, tol);
    }
    Ok(())
}

fn lift(bm_meridian: bool, n: &[f64]) -> Vec<f64> {
    let mut v = n.to_vec();
    if bm_meridian && v.len() == 2 {
        v.push(0.0);
    }
    v
}

fn surface_report(bm: &BuiltMetric, s: &Arc<dyn Surface>, samples: usize) -> Result<(CharReport, Vec<Vec<f64>>), CliError> {
    let (pts, nus) = s.samples(samples);
    let normals: Vec<Vec<f64>> = nus.iter().map(|n| lift(bm.is_meridian(), n)).collect();
    let r = characteristic_report(&bm.metric, &pts, &normals).map_err(runtime("characteristic report"))?;
    Ok((r, pts))
}

const CLASSES: [&str; 4] = ["black_hole", "white_hole", "mixed", "not_characteristic"];

fn class_name(c: Classification) -> &'static str {
    match c {
        Classification::BlackHole => "black_hole",
        Classification::WhiteHole => "white_hole",
        Classification::Mixed => "mixed",
        Classification::NotCharacteristic => "not_characteristic",
    }
}

pub fn check_surface(cfg: &Config, run: &mut Run, seed: u64) -> Result<(), CliError> {
    let bm = specs::metric(cfg, seed)?;
    let c = specs::curve(cfg, seed)?;
    let samples = cfg.usize_or("curve.samples", 256)?;
    let tol = cfg.f64_or("check.residual_tol", 1e-8)?;
    let expect = if cfg.contains("check.expect_class") {
        Some(cfg.choice("check.expect_class", &CLASSES, None)?)
    } else {
        None
    };
    cfg.finish()?;
    if c.surface.dim() + usize::from(bm.is_meridian()) != bm.metric.dim() {
        return Err(invalid("curve.kind", format!("a {}-dimensional surface does not fit metric `{}`", c.surface.dim(), bm.family)));
    }
    let (r, pts) = surface_report(&bm, &c.surface, samples)?;
    let mut t = Table::new(if pts[0].len() == 2 { &["rho", "z", "flux"] } else { &["x", "y", "z", "flux"] });
    for (p, f) in pts.iter().zip(&r.flux) {
        let mut row = p.clone();
        row.push(*f);
        t.push(&row);
    }
    run.csv("surface.csv", &t)?;
    run.json("char_report.json", &r)?;
    run.below("characteristic_residual", r.residual, tol);
    if let Some(e) = expect {
        run.holds("classification", class_name(r.classification) == e, &format!("classified {e}"));
    }
    Ok(())
}

pub fn design(cfg: &Config, run: &mut Run, seed: u64) -> Result<(), CliError> {
    match cfg.choice("design.mode", &["surface", "family"], Some("surface"))?.as_str() {
        "surface" => design_surface(cfg, run, seed),
        _ => design_family(cfg, run),
    }
}

fn design_surface(cfg: &Config, run: &mut Run, seed: u64) -> Result<(), CliError> {
    let c = specs::curve(cfg, seed)?;
    let samples = cfg.usize_or("curve.samples", 256)?;
    let tol = cfg.f64_or("check.tol", 1e-8)?;
    cfg.finish()?;
    let hm = build_horizon_metric(c.surface.clone(), c.meridian).map_err(runtime("design"))?;
    let bm = BuiltMetric {
        family: "designed".into(),
        metric: hm.metric.clone(),
        flow: Some(hm.flow.clone()),
        kerr: None,
        surface: Some(c.surface.clone()),
    };
    let (r, pts) = surface_report(&bm, &c.surface, samples)?;
    let (_, nus) = c.surface.samples(samples);
    let mut on_surface: f64 = 0.0;
    let mut eikonal: f64 = 0.0;
    let mut t = Table::new(if pts[0].len() == 2 { &["rho", "z", "delta", "flux"] } else { &["x", "y", "z", "delta", "flux"] });
    for ((p, n), f) in pts.iter().zip(&nus).zip(&r.flux) {
        let d = delta(&hm.metric, p).map_err(runtime("delta"))?;
        on_surface = on_surface.max(d.abs());
        for frac in [-0.5, -0.25, 0.0, 0.25, 0.5] {
            let q: Vec<f64> = p.iter().zip(n).map(|(x, m)| x + frac * hm.tube_width * m).collect();
            let (a, grad) = hm.eikonal.eval(&q).map_err(runtime("eikonal"))?;
            eikonal = eikonal.max((grad.iter().map(|v| v * v).sum::<f64>() - a).abs());
        }
        let mut row = p.clone();
        row.extend([d, *f]);
        t.push(&row);
    }
    run.csv("surface.csv", &t)?;
    run.json("verification.json", &json!({ "char_report": r, "max_abs_delta": on_surface, "eikonal_defect": eikonal }))?;
    // a spec that rebuilds the same metric
    let mut spec = String::from("metric.family = designed\n");
    for (k, v) in cfg.echo() {
        if k.starts_with("curve.") && k != "curve.samples" {
            spec.push_str(&format!("{k} = {v}\n"));
        }
    }
    run.text("metric.cfg", &spec)?;
    run.below("characteristic_residual", r.residual, tol);
    run.below("max_abs_delta_on_surface", on_surface, tol);
    run.below("eikonal_defect", eikonal, tol);
    run.holds("black_hole", r.classification == Classification::BlackHole, "classified black_hole");
    Ok(())
}

fn design_family(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let p = sonichole::metric::KerrParams::new(cfg.f64_or("metric.m", 1.0)?, cfg.f64_or("metric.a", 0.0)?)
        .map_err(|e| invalid("metric.a", e.to_string()))?;
    let (rp, rm) = kerr_horizon_radii(p);
    let r = match cfg.choice("family.branch", &["outer", "inner"], Some("outer"))?.as_str() {
        "outer" => rp,
        _ => rm,
    };
    let eps_list = cfg.list("family.epsilons")?;
    let tol = cfg.f64_or("check.tol", 1e-7)?;
    cfg.finish()?;
    let base = sonichole::horizon_design::kerr_flow_form(p);
    let m = p.m;
    let psi = move |eps: f64| -> Arc<dyn SmoothCurve> {
        let e = kerr_horizon_ellipse(m, r);
        Arc::new(Ellipse { center: e.center, semi_rho: e.semi_rho * (1.0 + eps), semi_z: e.semi_z * (1.0 + eps) })
    };
    let fam = family_with_horizons(psi, base.clone());
    // at eps = 0 the family is the Kerr metric near the horizon
    let g0 = fam(0.0).map_err(runtime("family"))?;
    let kerr = build_flow_metric(&base);
    let e0 = kerr_horizon_ellipse(m, r);
    let mut agree: f64 = 0.0;
    for k in 0..40 {
        let t = (k as f64 + 0.3) / 40.0;
        let (q, n) = (e0.point(t), e0.outward_normal(t));
        let q = [q[0] + 0.01 * r * n[0], q[1] + 0.01 * r * n[1]];
        let d = (g0.inverse(&q).map_err(runtime("family"))? - kerr.inverse(&q).map_err(runtime("kerr"))?).amax();
        agree = agree.max(d);
    }
    run.below("eps0_agrees_with_kerr", agree, 1e-9);
    let mut t = Table::new(&["epsilon", "max_abs_delta1", "characteristic_residual"]);
    for eps in eps_list {
        let g = fam(eps).map_err(runtime("family"))?;
        let c = psi(eps).sample(400);
        let rep = sonichole::characteristics::characteristic_residual(&g, &c).map_err(runtime("residual"))?;
        let mut worst: f64 = 0.0;
        for q in &c.points {
            worst = worst.max(delta1(&g, q).map_err(runtime("delta1"))?.abs());
        }
        t.push(&[eps, worst, rep.residual]);
        run.below(&format!("delta1_on_curve_eps_{eps}"), worst, tol);
        run.below(&format!("residual_on_curve_eps_{eps}"), rep.residual, tol);
    }
    run.csv("family.csv", &t)
}

pub fn perturb(cfg: &Config, run: &mut Run, seed: u64) -> Result<(), CliError> {
    let bm = specs::metric(cfg, seed)?;
    bm.require_meridian("perturb")?;
    let Some(base) = bm.flow.clone() else {
        return Err(invalid("metric.family", format!("`{}` has no flow form to perturb", bm.family)));
    };
    let spec = BumpSpec {
        center: [cfg.f64("bump.center_rho")?, cfg.f64("bump.center_z")?],
        radius: cfg.f64("bump.radius")?,
        epsilon: cfg.f64("bump.epsilon")?,
    };
    let w = window(cfg)?;
    let (opts, n_seeds) = search_options(cfg)?;
    let min_residual = cfg.f64_or("check.residual_min", 1e-3)?;
    cfg.finish()?;
    let pert = perturb_metric_bump(&base, spec).map_err(|e| invalid("bump.radius", e.to_string()))?;
    let gp = build_flow_metric(&pert);
    let g = &bm.metric;
    let mut change: f64 = 0.0;
    let k = 40;
    for i in 0..k {
        for j in 0..k {
            let q = [
                w.rho.0 + (w.rho.1 - w.rho.0) * i as f64 / (k - 1) as f64,
                w.z.0 + (w.z.1 - w.z.0) * j as f64 / (k - 1) as f64,
            ];
            let (a, b) = (delta1(g, &q), delta1(&gp, &q));
            if let (Ok(a), Ok(b)) = (a, b) {
                change = change.max((a - b).abs());
            }
        }
    }
    run.below("delta1_change", change, 1e-12);
    let zero = trace_level_set(|q| delta1(&gp, &q), w, opts.trace_resolution).map_err(runtime("tracing delta1 = 0"))?;
    let outer = zero.first().ok_or_else(|| CliError::Runtime("no delta1 = 0 curve in the window".into()))?;
    let curve = outer.curve.resample(2000).map_err(runtime("resample"))?;
    let normals = curve.outward_normals().map_err(runtime("normals"))?;
    let (mut inside, mut outside): (f64, f64) = (0.0, 0.0);
    let mut t = Table::new(&["s", "rho", "z", "residual"]);
    for ((s, p), n) in curve.arc_fractions().iter().zip(&curve.points).zip(&normals) {
        let r = characteristic_report(&gp, &[p.to_vec()], &[vec![n[0], n[1], 0.0]]).map_err(runtime("residual"))?;
        t.push(&[*s, p[0], p[1], r.residual]);
        if (p[0] - spec.center[0]).hypot(p[1] - spec.center[1]) < spec.radius {
            inside = inside.max(r.residual);
        } else {
            outside = outside.max(r.residual);
        }
    }
    run.csv("residual_on_delta1_zero.csv", &t)?;
    run.above("residual_inside_bump", inside, min_residual);
    let search = find_closed_characteristic(&gp, w, n_seeds, &opts).map_err(runtime("closure search"))?;
    run.json(
        "certificate.json",
        &json!({
            "closed": search.closed.is_some(),
            "trajectories": search.outcomes.len(),
            "exit_counts": exits(&search),
            "residual_inside_bump": inside,
            "residual_outside_bump": outside,
            "outcomes": search.outcomes,
        }),
    )?;
    run.holds("no_closed_characteristic", search.closed.is_none(), "no seed closes");
    let mut spec_text = String::new();
    for (k, v) in cfg.echo() {
        if k.starts_with("metric.") || k.starts_with("curve.") || k.starts_with("bump.") {
            spec_text.push_str(&format!("{k} = {v}\n"));
        }
    }
    run.text("perturbed_metric.cfg", &spec_text)
}

pub fn wave(cfg: &Config, run: &mut Run, seed: u64) -> Result<(), CliError> {
    let bm = specs::metric(cfg, seed)?;
    bm.require_meridian("wave")?;
    let grid = GridSpec {
        rho_max: cfg.f64("grid.rho_max")?,
        z_min: cfg.f64("grid.z_min")?,
        z_max: cfg.f64("grid.z_max")?,
        n_rho: cfg.usize_or("grid.n_rho", 100)?,
        n_z: cfg.usize_or("grid.n_z", 200)?,
    };
    let mut sc = SimConfig::new(grid, cfg.f64("time.t_final")?);
    sc.cfl = cfg.f64_or("time.cfl", sc.cfl)?;
    if cfg.contains("time.dt") {
        sc.dt = Some(cfg.f64("time.dt")?);
    }
    sc.sample_stride = cfg.usize_or("time.sample_stride", sc.sample_stride)?;
    sc.outer = match cfg.choice("wave.outer", &["sponge", "reflecting"], Some("sponge"))?.as_str() {
        "sponge" => {
            let OuterLayer::Sponge { fraction, strength } = OuterLayer::default_sponge() else { unreachable!() };
            OuterLayer::Sponge {
                fraction: cfg.f64_or("wave.sponge_fraction", fraction)?,
                strength: cfg.f64_or("wave.sponge_strength", strength)?,
            }
        }
        _ => OuterLayer::Reflecting,
    };
    sc.dissipation = cfg.f64_or("wave.dissipation", sc.dissipation)?;
    sc.excision_depth = cfg.f64_or("wave.excision_depth", sc.excision_depth)?;
    if cfg.choice("wave.excise", &["horizon", "none"], Some("horizon"))? == "horizon" {
        sc.excision = bm.horizon()?;
    }
    let profile = |prefix: &str| -> Result<Profile, CliError> {
        match cfg.choice(&format!("{prefix}.kind"), &["zero", "constant", "gaussian"], Some("zero"))?.as_str() {
            "zero" => Ok(Profile::Zero),
            "constant" => Ok(Profile::Constant(cfg.f64(&format!("{prefix}.value"))?)),
            _ => Ok(Profile::Gaussian {
                center: [cfg.f64(&format!("{prefix}.center_rho"))?, cfg.f64(&format!("{prefix}.center_z"))?],
                sigma: cfg.f64(&format!("{prefix}.sigma"))?,
                amplitude: cfg.f64_or(&format!("{prefix}.amplitude"), 1.0)?,
            }),
        }
    };
    sc.u0 = profile("initial.u")?;
    sc.u1 = profile("initial.ut")?;
    let snapshot = cfg.bool_or("output.snapshot", false)?;
    let rise_tol = cfg.f64_or("check.energy_rise", 0.01)?;
    let balance_tol = if cfg.contains("check.balance_tol") { Some(cfg.f64("check.balance_tol")?) } else { None };
    let no_growth = cfg.bool_or("check.no_growth", false)?;
    let transient = cfg.f64_or("check.transient", 20.0)?;
    let horizons = cfg.list_or("check.horizons", &[25.0, 50.0, 100.0])?;
    if no_growth && horizons.iter().any(|h| *h > sc.t_final + 1e-9 || *h <= transient) {
        return Err(invalid("check.horizons", "horizons must lie in (transient, t_final]"));
    }
    cfg.finish()?;
    let mut sim = Simulation::new(&bm.metric, sc).map_err(runtime("wave setup"))?;
    let (rep, state) = sim.run().map_err(runtime("wave run"))?;
    let mut t = Table::new(&["t", "E", "E1", "E2", "flux", "sup_u"]);
    for k in 0..rep.times.len() {
        t.push(&[rep.times[k], rep.e[k], rep.e1[k], rep.e2[k], rep.flux[k], rep.sup_u[k]]);
    }
    run.csv("energy.csv", &t)?;
    if snapshot {
        let mut s = Table::new(&["rho", "z", "u"]);
        for row in sim.snapshot(&state) {
            s.push(&row);
        }
        run.csv("snapshot.csv", &s)?;
    }
    let e0 = rep.e[0];
    let mut low = e0;
    let mut rise: f64 = 0.0;
    for e in &rep.e {
        low = low.min(*e);
        rise = rise.max((e - low) / e0.max(f64::MIN_POSITIVE));
    }
    run.checks.push(crate::output::Check {
        name: "energy_rise_over_e0".into(),
        value: rise,
        rule: format!("<= {rise_tol:e}"),
        pass: rise <= rise_tol,
    });
    // sponge losses are not in the balance, so it is only checked on request
    if let Some(tol) = balance_tol {
        let balance = rep.balance_residual().iter().map(|b| b.abs()).fold(0.0, f64::max) / e0.max(f64::MIN_POSITIVE);
        run.below("balance_residual_over_e0", balance, tol);
    }
    if no_growth {
        let max_until = |h: f64| {
            rep.times
                .iter()
                .zip(&rep.sup_u)
                .filter(|(t, _)| **t >= transient - 1e-9 && **t <= h + 1e-9)
                .map(|(_, s)| *s)
                .fold(0.0, f64::max)
        };
        let maxima: Vec<f64> = horizons.iter().map(|h| max_until(*h)).collect();
        let spread = maxima.iter().map(|m| (m - maxima[0]).abs()).fold(0.0, f64::max);
        run.checks.push(crate::output::Check {
            name: "sup_u_max_spread_across_horizons".into(),
            value: spread,
            rule: "<= 1e-6".into(),
            pass: spread <= 1e-6,
        });
        let fit = fit_line(&horizons, &maxima, 0.95).map_err(runtime("fit"))?;
        run.holds("sup_u_max_slope_ci_contains_zero", fit.slope_indistinguishable_from_zero(), "95% interval contains 0");
        let (tt, ss): (Vec<f64>, Vec<f64>) =
            rep.times.iter().zip(&rep.sup_u).filter(|(t, _)| **t >= transient).map(|(t, s)| (*t, *s)).unzip();
        let tail = fit_line(&tt, &ss, 0.95).map_err(runtime("fit"))?;
        run.checks.push(crate::output::Check {
            name: "sup_u_tail_slope_ci_lower".into(),
            value: tail.slope_ci.0,
            rule: "<= 0".into(),
            pass: tail.slope_ci.0 <= 0.0,
        });
    }
    Ok(())
}

pub fn travel(cfg: &Config, run: &mut Run, seed: u64) -> Result<(), CliError> {
    let bm = specs::metric(cfg, seed)?;
    let path = LinePath { start: point(cfg, "path.start")?, end: point(cfg, "path.end")? };
    if path.start.len() != path.end.len() {
        return Err(invalid("path.end", "start and end need the same number of coordinates"));
    }
    let samples = cfg.usize_or("path.samples", 200)?.max(2);
    let dists = cfg.list_or("travel.distances", &[1e-2, 1e-3, 1e-4])?;
    let vieta_tol = cfg.f64_or("check.vieta_tol", 1e-12)?;
    let slope_tol = cfg.f64_or("check.slope_change", 0.05)?;
    cfg.finish()?;
    let length = path.start.iter().zip(&path.end).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let minus = |s: f64| lambda_pm(&bm.metric, &path, s).map(|l| l.minus).map_err(runtime("lambda"));
    // first sigma where the slower root reaches zero
    let edge = if minus(1.0)? < 0.0 {
        None
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        if minus(lo)? >= 0.0 {
            return Err(CliError::Runtime("path starts inside the ergosphere".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if minus(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    };
    let top = edge.map_or(1.0, |e| e * (1.0 - 1e-6));
    let mut t = Table::new(&["sigma", "lambda_plus", "lambda_minus", "T"]);
    let mut vieta: f64 = 0.0;
    for k in 0..samples {
        let s = top * k as f64 / (samples - 1) as f64;
        let l = lambda_pm(&bm.metric, &path, s).map_err(runtime("lambda"))?;
        vieta = vieta.max(l.vieta_defect());
        let tt = if s == 0.0 { 0.0 } else { travel_time(&bm.metric, &path, s).map_err(runtime("travel time"))? };
        t.push(&[s, l.plus, l.minus, tt]);
    }
    run.csv("travel_time.csv", &t)?;
    run.below("vieta_defect", vieta, vieta_tol);
    if let Some(e) = edge {
        let mut d = Table::new(&["distance", "minus_log_distance", "T"]);
        let mut xs = Vec::new();
        let mut ts = Vec::new();
        for dist in &dists {
            let s = e - dist / length;
            if s <= 0.0 {
                return Err(invalid("travel.distances", format!("{dist} exceeds the distance to the ergosphere")));
            }
            let tt = travel_time(&bm.metric, &path, s).map_err(runtime("travel time"))?;
            d.push(&[*dist, -dist.ln(), tt]);
            xs.push(-dist.ln());
            ts.push(tt);
        }
        run.csv("divergence.csv", &d)?;
        if xs.len() >= 3 {
            let n = xs.len();
            let slope = |i: usize| (ts[i + 1] - ts[i]) / (xs[i + 1] - xs[i]);
            let change = ((slope(n - 3) - slope(n - 2)) / slope(n - 2)).abs();
            run.below("log_slope_change", change, slope_tol);
        }
    }
    Ok(())
}

pub fn dn(cfg: &Config, run: &mut Run, seed: u64) -> Result<(), CliError> {
    let bm = specs::metric(cfg, seed)?;
    bm.require_meridian("dn")?;
    let grid = GridSpec {
        rho_max: cfg.f64("grid.rho_max")?,
        z_min: cfg.f64_or("grid.z_min", 0.0)?,
        z_max: cfg.f64("grid.z_max")?,
        n_rho: cfg.usize_or("grid.n_rho", 4)?,
        n_z: cfg.usize_or("grid.n_z", 400)?,
    };
    let pulse_center = cfg.f64("pulse.t_center")?;
    let pulse_width = cfg.f64("pulse.half_width")?;
    let amplitude = cfg.f64_or("pulse.amplitude", 1.0)?;
    let rho_width = if cfg.contains("pulse.rho_half_width") { Some(cfg.f64("pulse.rho_half_width")?) } else { None };
    let far_wall = match cfg.choice("dn.far_wall", &["neumann", "dirichlet"], Some("neumann"))?.as_str() {
        "neumann" => Wall::Neumann,
        _ => Wall::Dirichlet,
    };
    let setup = DnSetup {
        grid,
        t_final: cfg.f64("time.t_final")?,
        data: bump_data(pulse_center, pulse_width, amplitude, rho_width),
        far_wall,
        outer: OuterLayer::Reflecting,
        cfl: cfg.f64_or("time.cfl", 0.4)?,
        sample_stride: cfg.usize_or("time.sample_stride", 1)?,
    };
    let echo = if cfg.contains("echo.depths") {
        Some(EchoSetup {
            depths: cfg.list("echo.depths")?,
            cells_per_unit: cfg.usize_or("echo.cells_per_unit", 400)?,
            pulse_center,
            pulse_half_width: pulse_width,
            rho: cfg.f64_or("echo.rho", 0.0)?,
        })
    } else {
        None
    };
    let echo_tol = cfg.f64_or("check.echo_tol", 0.05)?;
    cfg.finish()?;
    let tr = dn_operator(&bm.metric, &setup).map_err(runtime("dn operator"))?;
    let mut t = Table::new(&["t", "s", "value"]);
    for (time, row) in tr.times.iter().zip(&tr.values) {
        for (s, v) in tr.rho.iter().zip(row) {
            t.push(&[*time, *s, *v]);
        }
    }
    run.csv("trace.csv", &t)?;
    if let Some(e) = echo {
        let pts = echo_experiment(&bm.metric, &e).map_err(runtime("echo experiment"))?;
        let mut t = Table::new(&["depth", "delay", "predicted"]);
        for p in &pts {
            t.push(&[p.depth, p.delay, p.predicted]);
            run.below(&format!("echo_delay_rel_error_depth_{}", p.depth), ((p.delay - p.predicted) / p.predicted).abs(), echo_tol);
        }
        run.csv("echo.csv", &t)?;
    }
    Ok(())
}
