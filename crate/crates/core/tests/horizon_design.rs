use std::sync::Arc;

use sonichole::characteristics::*;
use sonichole::curve::{kerr_horizon_ellipse, Ellipse, PerturbedCircle, SmoothCurve};
use sonichole::ergosphere::{delta, delta1, kerr_horizon_radii};
use sonichole::horizon_design::*;
use sonichole::levelset::Window;
use sonichole::metric::{build_flow_metric, build_kerr, KerrParams};

fn kerr() -> KerrParams {
    KerrParams::new(1.0, 0.5).unwrap()
}

#[test]
fn designed_horizons_pass_all_checks() {
    let curves: Vec<(Arc<dyn SmoothCurve>, bool)> = vec![
        (Arc::new(Ellipse::new([0.0, 0.0], 2.0, 1.2).unwrap()), true),
        (Arc::new(Ellipse::new([0.0, 0.5], 1.0, 1.5).unwrap()), true),
        (Arc::new(PerturbedCircle { center: [0.0, 0.0], r0: 1.5, modes: vec![(2, 0.08, 0.0)] }), true),
        (Arc::new(PerturbedCircle { center: [0.3, -0.2], r0: 1.0, modes: vec![(3, 0.05, 0.4)] }), false),
        (Arc::new(Ellipse::new([1.0, 1.0], 0.8, 0.6).unwrap()), false),
    ];
    for (c, meridian) in curves {
        let s: Arc<dyn Surface> = Arc::new(ParametricCurve::new(c.clone()).unwrap());
        let hm = build_horizon_metric(s.clone(), meridian).unwrap();
        let (pts, nus) = s.samples(256);
        let lift = |v: &Vec<f64>| {
            let mut v = v.clone();
            if meridian {
                v.push(0.0);
            }
            v
        };
        let nus3: Vec<Vec<f64>> = nus.iter().map(lift).collect();
        let r = characteristic_report(&hm.metric, &pts, &nus3).unwrap();
        assert!(r.residual < 1e-8, "{c:?}: {}", r.residual);
        assert_eq!(r.classification, Classification::BlackHole);
        for (p, n) in pts.iter().zip(&nus) {
            assert!(delta(&hm.metric, p).unwrap().abs() < 1e-8);
            let out = [p[0] + 0.05 * n[0], p[1] + 0.05 * n[1]];
            assert!(delta(&hm.metric, &out).unwrap() > 0.0);
            let (a, g) = hm.eikonal.eval(&out).unwrap();
            assert!((g[0] * g[0] + g[1] * g[1] - a).abs() < 1e-8);
        }
    }
}

#[test]
fn designed_sphere_is_black_hole() {
    let s: Arc<dyn Surface> = Arc::new(Sphere { center: [0.0; 3], radius: 2.0 });
    let hm = build_horizon_metric(s.clone(), false).unwrap();
    let (pts, nus) = s.samples(300);
    let r = characteristic_report(&hm.metric, &pts, &nus).unwrap();
    assert!(r.residual < 1e-8);
    assert_eq!(r.classification, Classification::BlackHole);
    // v = -x_hat (1 + d/2) inside the tube
    let v = hm.flow.velocity_at(&[1.8, 0.0, 0.0]).unwrap();
    assert!((v[0] + 1.1).abs() < 1e-12);
}

#[test]
fn kerr_flow_form_reproduces_kerr() {
    let f = kerr_flow_form(kerr());
    let g = build_flow_metric(&f);
    let k = build_kerr(kerr());
    for p in [[1.0, 0.3], [2.5, -1.0], [0.0, 3.0], [0.7, 0.05]] {
        let d = (g.inverse(&p).unwrap() - k.inverse(&p).unwrap()).amax();
        assert!(d < 1e-12, "{p:?}: {d}");
    }
}

#[test]
fn kerr_family_moves_the_horizon() {
    let (rp, rm) = kerr_horizon_radii(kerr());
    for r in [rp, rm] {
        let base = kerr_flow_form(kerr());
        let psi = move |eps: f64| -> Arc<dyn SmoothCurve> {
            let e = kerr_horizon_ellipse(1.0, r);
            Arc::new(Ellipse::new(e.center, e.semi_rho * (1.0 + eps), e.semi_z * (1.0 + eps)).unwrap())
        };
        let fam = family_with_horizons(psi, base.clone());
        let g0 = fam(0.0).unwrap();
        let k = build_flow_metric(&base);
        let e0 = kerr_horizon_ellipse(1.0, r);
        for k_ in 0..40 {
            let t = (k_ as f64 + 0.3) / 40.0;
            let p = e0.point(t);
            let n = e0.outward_normal(t);
            let q = [p[0] + 0.01 * r * n[0], p[1] + 0.01 * r * n[1]];
            let d = (g0.inverse(&q).unwrap() - k.inverse(&q).unwrap()).amax();
            assert!(d < 1e-9);
        }
        for eps in [0.02, 0.05, 0.1] {
            let g = fam(eps).unwrap();
            let c = psi(eps).sample(400);
            let rep = characteristic_residual(&g, &c).unwrap();
            let worst = c.points.iter().map(|p| delta1(&g, p).unwrap().abs()).fold(0.0, f64::max);
            assert!(worst < 1e-7, "r={r} eps={eps}: delta1 {worst}");
            assert!(rep.residual < 1e-7, "r={r} eps={eps}: residual {}", rep.residual);
        }
    }
}

#[test]
fn bump_keeps_delta1_and_breaks_characteristic() {
    let (rp, _) = kerr_horizon_radii(kerr());
    let base = kerr_flow_form(kerr());
    let eq = [(rp * rp + 0.25f64).sqrt(), 0.0];
    let spec = BumpSpec { center: eq, radius: 0.3, epsilon: 0.05 };
    let pert = perturb_metric_bump(&base, spec).unwrap();
    let (g, gp) = (build_flow_metric(&base), build_flow_metric(&pert));
    for i in 0..30 {
        for j in 0..30 {
            let q = [eq[0] - 0.4 + 0.8 * i as f64 / 29.0, -0.4 + 0.8 * j as f64 / 29.0];
            assert!((delta1(&g, &q).unwrap() - delta1(&gp, &q).unwrap()).abs() < 1e-12);
        }
    }
    let hor = kerr_horizon_ellipse(1.0, rp).sample(2000);
    let normals = hor.outward_normals().unwrap();
    let (mut inside, mut outside): (f64, f64) = (0.0, 0.0);
    for (p, n) in hor.points.iter().zip(&normals) {
        let r = characteristic_report(&gp, &[p.to_vec()], &[vec![n[0], n[1], 0.0]]).unwrap().residual;
        if (p[0] - eq[0]).hypot(p[1]) < spec.radius {
            inside = inside.max(r);
        } else {
            outside = outside.max(r);
        }
    }
    assert!(inside > 1e-3, "{inside}");
    assert!(outside < 1e-10, "{outside}");
}

#[test]
fn search_finds_kerr_horizon_but_not_perturbed_one() {
    let (rp, _) = kerr_horizon_radii(kerr());
    let w = Window::new((0.0, 2.5), (-2.5, 2.5)).unwrap();
    let opts = SearchOptions {
        integrate: IntegrateOptions { h: 1e-3, max_len: 16.0, ..Default::default() },
        outermost_only: true,
        ..Default::default()
    };
    let t = std::time::Instant::now();
    let found = find_closed_characteristic(&build_kerr(kerr()), w, 16, &opts).unwrap();
    let c = found.closed.expect("closure");
    let h = c.hausdorff(&kerr_horizon_ellipse(1.0, rp).sample(4000));
    assert!(h < 1e-4 * rp, "{h}");
    eprintln!("kerr search {:?}", t.elapsed());

    let base = kerr_flow_form(kerr());
    let eq = [(rp * rp + 0.25f64).sqrt(), 0.0];
    let pert = perturb_metric_bump(&base, BumpSpec { center: eq, radius: 0.3, epsilon: 0.05 }).unwrap();
    let t = std::time::Instant::now();
    let s = find_closed_characteristic(&build_flow_metric(&pert), w, 64, &opts).unwrap();
    eprintln!("perturbed search {:?}", t.elapsed());
    assert!(s.closed.is_none());
    assert!(s.outcomes.len() >= 128);
    let mut counts = std::collections::BTreeMap::new();
    for o in &s.outcomes {
        *counts.entry(format!("{:?}", o.exit).split(['{', '(']).next().unwrap().to_string()).or_insert(0) += 1;
    }
    eprintln!("{counts:?}");
}
