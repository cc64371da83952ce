//! Metrics and curves described by `metric.*` and `curve.*` keys.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sonichole::curve::{kerr_horizon_ellipse, Ellipse, PerturbedCircle, PlaneCurve, SmoothCurve};
use sonichole::ergosphere::kerr_horizon_radii;
use sonichole::horizon_design::{build_horizon_metric, kerr_flow_form, ParametricCurve, SampledCurve, Sphere, Surface};
use sonichole::metric::{build_acoustic, build_flow_metric, build_kerr, FlowForm, KerrParams, StationaryMetric, SwirlDrain};

use crate::config::Config;
use crate::CliError;

pub fn runtime(context: &str) -> impl Fn(sonichole::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

pub fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Validation { key: key.into(), message: message.into() }
}

pub struct BuiltMetric {
    pub family: String,
    pub metric: StationaryMetric,
    /// Flow form, when the family has one.
    pub flow: Option<FlowForm>,
    pub kerr: Option<KerrParams>,
    /// Prescribed horizon of a designed metric.
    pub surface: Option<Arc<dyn Surface>>,
}

impl BuiltMetric {
    pub fn is_meridian(&self) -> bool {
        self.metric.coords() == sonichole::metric::Coords::Meridian
    }

    pub fn require_meridian(&self, what: &str) -> Result<(), CliError> {
        if self.is_meridian() {
            Ok(())
        } else {
            Err(invalid("metric.family", format!("{what} needs an axisymmetric metric, got `{}`", self.family)))
        }
    }

    /// Outer horizon of the Kerr family or the prescribed surface.
    pub fn horizon(&self) -> Result<Option<Arc<dyn Surface>>, CliError> {
        if let Some(s) = &self.surface {
            return Ok(Some(s.clone()));
        }
        match self.kerr {
            Some(p) => {
                let (rp, _) = kerr_horizon_radii(p);
                let c = ParametricCurve::new(Arc::new(kerr_horizon_ellipse(p.m, rp))).map_err(runtime("horizon"))?;
                Ok(Some(Arc::new(c)))
            }
            None => Ok(None),
        }
    }
}

pub const METRIC_FAMILIES: [&str; 6] = ["kerr", "minkowski", "swirl_drain", "acoustic_drain", "slab_flow", "designed"];

pub fn metric(cfg: &Config, seed: u64) -> Result<BuiltMetric, CliError> {
    let family = cfg.choice("metric.family", &METRIC_FAMILIES, None)?;
    let mut out = BuiltMetric {
        family: family.clone(),
        metric: StationaryMetric::minkowski_meridian(),
        flow: None,
        kerr: None,
        surface: None,
    };
    match family.as_str() {
        "kerr" => {
            let p = KerrParams::new(cfg.f64_or("metric.m", 1.0)?, cfg.f64_or("metric.a", 0.0)?)
                .map_err(|e| invalid("metric.a", e.to_string()))?;
            out.metric = build_kerr(p);
            out.flow = Some(kerr_flow_form(p));
            out.kerr = Some(p);
        }
        "minkowski" => {
            let dim = cfg.usize_or("metric.dim", 0)?;
            out.metric = match dim {
                0 => StationaryMetric::minkowski_meridian(),
                2 | 3 => StationaryMetric::minkowski(dim),
                _ => return Err(invalid("metric.dim", "expected 2 or 3 (omit for the meridian plane)")),
            };
        }
        "swirl_drain" => {
            let d = if cfg.bool_or("metric.random", false)? {
                SwirlDrain::random(seed)
            } else {
                SwirlDrain {
                    strength: cfg.f64("metric.strength")?,
                    a: cfg.f64_or("metric.a_axis", 1.0)?,
                    b: cfg.f64_or("metric.b_axis", 1.0)?,
                    swirl: cfg.f64_or("metric.swirl", 0.0)?,
                    core: cfg.f64_or("metric.core", 0.3)?,
                }
            };
            if !(d.a > 0.0 && d.b > 0.0 && d.core > 0.0) {
                return Err(invalid("metric.a_axis", "axes and core must be positive"));
            }
            let f = d.flow();
            out.metric = build_flow_metric(&f);
            out.flow = Some(f);
        }
        "acoustic_drain" => {
            let a = cfg.f64_or("metric.strength", 1.0)?;
            if !(a > 0.0) {
                return Err(invalid("metric.strength", "must be positive"));
            }
            out.metric = build_acoustic(
                2,
                Arc::new(|_| 1.0),
                Arc::new(|_| 1.0),
                Arc::new(move |p: &[f64]| {
                    let r2 = p[0] * p[0] + p[1] * p[1];
                    vec![-a * p[0] / r2, -a * p[1] / r2]
                }),
            );
        }
        "slab_flow" => {
            let k = cfg.f64_or("metric.gradient", 1.0)?;
            let f = FlowForm::meridian(format!("slab_flow({k})"), move |p: &[f64]| Ok(vec![0.0, k * p[1], 0.0]));
            out.metric = build_flow_metric(&f);
            out.flow = Some(f);
        }
        "designed" => {
            let c = curve(cfg, seed)?;
            let hm = build_horizon_metric(c.surface.clone(), c.meridian).map_err(runtime("design"))?;
            out.metric = hm.metric;
            out.flow = Some(hm.flow);
            out.surface = Some(c.surface);
        }
        _ => unreachable!(),
    }
    Ok(out)
}

pub struct BuiltCurve {
    pub kind: String,
    pub surface: Arc<dyn Surface>,
    /// Smooth parametrisation, when there is one.
    pub smooth: Option<Arc<dyn SmoothCurve>>,
    /// The curve lies in the meridian plane and is even in `rho`.
    pub meridian: bool,
}

pub const CURVE_KINDS: [&str; 7] = ["ellipse", "circle", "perturbed_circle", "kerr_horizon", "random", "sphere", "csv"];

/// `k:amplitude:phase` triples separated by `;`.
fn modes(cfg: &Config) -> Result<Vec<(u32, f64, f64)>, CliError> {
    let raw = cfg.str("curve.modes")?;
    raw.split(';')
        .map(|m| {
            let parts: Vec<&str> = m.split(':').map(str::trim).collect();
            let bad = || invalid("curve.modes", format!("expected `k:amplitude:phase`, got `{m}`"));
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok((parts[0].parse().map_err(|_| bad())?, parts[1].parse().map_err(|_| bad())?, parts[2].parse().map_err(|_| bad())?))
        })
        .collect()
}

fn read_curve_csv(path: &str) -> Result<PlaneCurve, CliError> {
    let bad = |m: String| invalid("curve.path", format!("{path}: {m}"));
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| bad(format!("no `{name}` column")));
    let (ir, iz) = (col("rho")?, col("z")?);
    let mut pts = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let get = |i: usize| -> Result<f64, CliError> {
            rec.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| bad(format!("row {}: bad number", k + 2)))
        };
        pts.push([get(ir)?, get(iz)?]);
    }
    PlaneCurve::new(pts, true).map_err(|e| bad(e.to_string()))
}

pub fn curve(cfg: &Config, seed: u64) -> Result<BuiltCurve, CliError> {
    let kind = cfg.choice("curve.kind", &CURVE_KINDS, None)?;
    let center = [cfg.f64_or("curve.center_rho", 0.0)?, cfg.f64_or("curve.center_z", 0.0)?];
    let smooth: Option<Arc<dyn SmoothCurve>> = match kind.as_str() {
        "ellipse" => Some(Arc::new(
            Ellipse::new(center, cfg.f64("curve.semi_rho")?, cfg.f64("curve.semi_z")?)
                .map_err(|e| invalid("curve.semi_rho", e.to_string()))?,
        )),
        "circle" => Some(Arc::new(
            Ellipse::circle(center, cfg.f64("curve.radius")?).map_err(|e| invalid("curve.radius", e.to_string()))?,
        )),
        "perturbed_circle" => Some(Arc::new(PerturbedCircle { center, r0: cfg.f64("curve.radius")?, modes: modes(cfg)? })),
        "kerr_horizon" => {
            let p = KerrParams::new(cfg.f64_or("curve.m", 1.0)?, cfg.f64_or("curve.a", 0.0)?)
                .map_err(|e| invalid("curve.a", e.to_string()))?;
            let (rp, rm) = kerr_horizon_radii(p);
            let r = match cfg.choice("curve.branch", &["outer", "inner"], Some("outer"))?.as_str() {
                "outer" => rp,
                _ => rm,
            };
            Some(Arc::new(kerr_horizon_ellipse(p.m, r)))
        }
        "random" => {
            // a seeded smooth star-shaped curve: two small modes on a circle
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut next = || rng.random_range(0.0..1.0);
            let m = vec![(2, 0.04 + 0.06 * next(), 2.0 * PI * next()), (3, 0.02 + 0.03 * next(), 2.0 * PI * next())];
            Some(Arc::new(PerturbedCircle { center, r0: cfg.f64_or("curve.radius", 1.5)?, modes: m }))
        }
        _ => None,
    };
    let meridian_default = matches!(kind.as_str(), "ellipse" | "circle" | "perturbed_circle" | "kerr_horizon" | "csv")
        && center[0] == 0.0;
    let (surface, meridian): (Arc<dyn Surface>, bool) = match (&smooth, kind.as_str()) {
        (Some(c), _) => (
            Arc::new(ParametricCurve::new(c.clone()).map_err(|e| invalid("curve.kind", e.to_string()))?),
            cfg.bool_or("curve.meridian", meridian_default)?,
        ),
        (None, "sphere") => {
            let c = [cfg.f64_or("curve.center_x", 0.0)?, cfg.f64_or("curve.center_y", 0.0)?, cfg.f64_or("curve.center_z3", 0.0)?];
            let r = cfg.f64("curve.radius")?;
            if !(r > 0.0) {
                return Err(invalid("curve.radius", "must be positive"));
            }
            (Arc::new(Sphere { center: c, radius: r }), false)
        }
        _ => {
            let pc = read_curve_csv(&cfg.str("curve.path")?)?;
            (Arc::new(SampledCurve::new(pc).map_err(|e| invalid("curve.path", e.to_string()))?), cfg.bool_or("curve.meridian", meridian_default)?)
        }
    };
    Ok(BuiltCurve { kind, surface, smooth, meridian })
}
