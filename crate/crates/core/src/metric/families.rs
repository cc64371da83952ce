//! Concrete metric families: Kerr (Kerr-Schild form), Schwarzschild, the
//! Gordon optical metric and the acoustic metric of a moving fluid.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{invert_metric, Coords, StationaryMetric};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrParams {
    pub m: f64,
    pub a: f64,
}

impl KerrParams {
    /// Subextremal Kerr parameters, `m > 0` and `0 <= a < m`.
    pub fn new(m: f64, a: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidParams(format!("mass m = {m} must be positive")));
        }
        if !(a >= 0.0) || a >= m {
            return Err(Error::InvalidParams(format!(
                "spin a = {a} must satisfy 0 <= a < m = {m}"
            )));
        }
        Ok(Self { m, a })
    }

    /// `2 m r^3 / (r^4 + a^2 z^2)`, the Kerr-Schild profile.
    pub fn profile(&self, r: f64, z: f64) -> f64 {
        2.0 * self.m * r.powi(3) / (r.powi(4) + self.a * self.a * z * z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrRadius {
    pub r: f64,
    /// Set when the point sits on the ring `z = 0, R = a`, where `r = 0`.
    pub on_ring: bool,
}

/// Solves `r^4 - (R^2 - a^2) r^2 - a^2 z^2 = 0` for `r >= 0`.
pub fn kerr_radius(x: f64, y: f64, z: f64, a: f64) -> KerrRadius {
    let big_r2 = x * x + y * y + z * z;
    let b = big_r2 - a * a;
    let c = a * a * z * z;
    let disc = (b * b + 4.0 * c).sqrt();
    // Avoid cancellation when b < 0.
    let r2 = if b >= 0.0 {
        0.5 * (b + disc)
    } else if disc - b > 0.0 {
        2.0 * c / (disc - b)
    } else {
        0.0
    };
    let r = r2.max(0.0).sqrt();
    KerrRadius {
        r,
        on_ring: r == 0.0 && a > 0.0 && z == 0.0,
    }
}

fn kerr_r(params: &KerrParams, point: &[f64], x: f64, y: f64, z: f64) -> Result<f64> {
    let kr = kerr_radius(x, y, z, params.a);
    if kr.r <= 0.0 {
        return Err(Error::Domain {
            point: point.to_vec(),
            reason: if kr.on_ring {
                "ring singularity (r = 0)".into()
            } else {
                "r = 0".into()
            },
        });
    }
    Ok(kr.r)
}

/// Kerr inverse metric in the meridian frame `(t, rho, z, phi_hat)`.
///
/// `g^{jk} = xi^{jk} + f m^j m^k` with
/// `m = (-1, r rho/(r^2+a^2), z/r, -a rho/(r^2+a^2))` (the azimuthal entry is the
/// coordinate one multiplied by `rho`).
pub fn build_kerr(params: KerrParams) -> StationaryMetric {
    StationaryMetric::new(
        format!("kerr(m={},a={})", params.m, params.a),
        3,
        Coords::Meridian,
        move |p: &[f64]| {
            let (rho, z) = (p[0], p[1]);
            let r = kerr_r(&params, p, rho, 0.0, z)?;
            let a = params.a;
            let s = r * r + a * a;
            let f = params.profile(r, z);
            let mv = [-1.0, r * rho / s, z / r, -a * rho / s];
            let mut g = super::eta(3);
            for j in 0..4 {
                for k in 0..4 {
                    g[(j, k)] += f * mv[j] * mv[k];
                }
            }
            Ok(g)
        },
    )
}

/// Kerr inverse metric in the coordinate basis `(t, rho, z, phi)`, with
/// `xi^{33} = -1/rho^2`. Only used to check the displayed component formulas.
pub fn kerr_inverse_coordinate_basis(params: KerrParams, rho: f64, z: f64) -> Result<DMatrix<f64>> {
    let r = kerr_r(&params, &[rho, z], rho, 0.0, z)?;
    if rho == 0.0 {
        return Err(Error::Domain {
            point: vec![rho, z],
            reason: "coordinate basis is singular on the axis".into(),
        });
    }
    let a = params.a;
    let s = r * r + a * a;
    let f = params.profile(r, z);
    let mv = [-1.0, r * rho / s, z / r, -a / s];
    let mut g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, -1.0, -1.0 / (rho * rho)]));
    for j in 0..4 {
        for k in 0..4 {
            g[(j, k)] += f * mv[j] * mv[k];
        }
    }
    Ok(g)
}

/// Kerr inverse metric in Cartesian Kerr-Schild coordinates:
/// `eta^{jk} + f l^j l^k`, `l = (-1, (rx+ay)/(r^2+a^2), (ry-ax)/(r^2+a^2), z/r)`.
pub fn build_kerr_cartesian(params: KerrParams) -> StationaryMetric {
    StationaryMetric::new(
        format!("kerr-cartesian(m={},a={})", params.m, params.a),
        3,
        Coords::Cartesian,
        move |p: &[f64]| {
            let (x, y, z) = (p[0], p[1], p[2]);
            let r = kerr_r(&params, p, x, y, z)?;
            let a = params.a;
            let s = r * r + a * a;
            let f = params.profile(r, z);
            let l = [-1.0, (r * x + a * y) / s, (r * y - a * x) / s, z / r];
            let mut g = super::eta(3);
            for j in 0..4 {
                for k in 0..4 {
                    g[(j, k)] += f * l[j] * l[k];
                }
            }
            Ok(g)
        },
    )
}

/// The covariant Kerr-Schild line element written out directly:
/// `g_{jk} = eta_{jk} - f k_j k_k` with
/// `k = (1, (rx+ay)/(r^2+a^2), (ry-ax)/(r^2+a^2), z/r)`.
pub fn kerr_covariant_cartesian(params: KerrParams, p: &[f64]) -> Result<DMatrix<f64>> {
    let (x, y, z) = (p[0], p[1], p[2]);
    let r = kerr_r(&params, p, x, y, z)?;
    let a = params.a;
    let s = r * r + a * a;
    let f = params.profile(r, z);
    let kv = [1.0, (r * x + a * y) / s, (r * y - a * x) / s, z / r];
    let mut g = super::eta(3);
    for j in 0..4 {
        for k in 0..4 {
            g[(j, k)] -= f * kv[j] * kv[k];
        }
    }
    Ok(g)
}

/// Schwarzschild line element in Cartesian coordinates,
/// `(1-2m/R)dt^2 - dx^2 - 4m/R dt dR - 2m/R dR^2`.
pub fn schwarzschild_covariant(m: f64, p: &[f64]) -> Result<DMatrix<f64>> {
    let big_r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if big_r == 0.0 {
        return Err(Error::Domain {
            point: p.to_vec(),
            reason: "R = 0".into(),
        });
    }
    let h = 2.0 * m / big_r;
    let mut g = super::eta(3);
    g[(0, 0)] = 1.0 - h;
    for j in 0..3 {
        let dj = p[j] / big_r;
        g[(0, j + 1)] = -h * dj;
        g[(j + 1, 0)] = -h * dj;
        for k in 0..3 {
            g[(j + 1, k + 1)] -= h * dj * p[k] / big_r;
        }
    }
    Ok(g)
}

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Gordon's optical metric of a moving dielectric, Cartesian `n = 3`, `c = 1`:
/// `g_{jk} = eta_{jk} + (n^{-2} - 1) v_j v_k` with the four-velocity
/// `v_0 = gamma`, `v_j = -gamma w_j`.
pub fn build_gordon(index: ScalarField, flow: VectorField) -> StationaryMetric {
    StationaryMetric::new("gordon", 3, Coords::Cartesian, move |p: &[f64]| {
        invert_metric(&gordon_covariant(index(p), &flow(p), p)?)
    })
}

pub(crate) fn gordon_covariant(n: f64, w: &[f64], p: &[f64]) -> Result<DMatrix<f64>> {
    if !(n >= 1.0) {
        return Err(Error::Domain {
            point: p.to_vec(),
            reason: format!("refraction index {n} < 1"),
        });
    }
    let w2: f64 = w.iter().map(|x| x * x).sum();
    if w2 >= 1.0 {
        return Err(Error::Hyperbolicity(format!(
            "flow speed |w| = {} >= c at {:?}",
            w2.sqrt(),
            p
        )));
    }
    let gamma = 1.0 / (1.0 - w2).sqrt();
    let mut v = vec![gamma];
    v.extend(w.iter().map(|wj| -gamma * wj));
    let k = 1.0 / (n * n) - 1.0;
    let mut g = super::eta(3);
    for j in 0..4 {
        for l in 0..4 {
            g[(j, l)] += k * v[j] * v[l];
        }
    }
    Ok(g)
}

/// Acoustic metric of a moving fluid:
/// `g_00 = (rho/c)(c^2 - v^2)`, `g_0j = (rho/c) v^j`, `g_jk = -(rho/c) delta_jk`.
/// The spatial dimension is the length of the velocity vector.
pub fn build_acoustic(
    dim: usize,
    density: ScalarField,
    sound_speed: ScalarField,
    flow: VectorField,
) -> StationaryMetric {
    StationaryMetric::new("acoustic", dim, Coords::Cartesian, move |p: &[f64]| {
        let g = acoustic_covariant(density(p), sound_speed(p), &flow(p), p)?;
        invert_metric(&g)
    })
}

pub(crate) fn acoustic_covariant(rho: f64, c: f64, v: &[f64], p: &[f64]) -> Result<DMatrix<f64>> {
    if !(rho > 0.0) || !(c > 0.0) {
        return Err(Error::Domain {
            point: p.to_vec(),
            reason: format!("density {rho} and sound speed {c} must be positive"),
        });
    }
    let n = v.len();
    let k = rho / c;
    let v2: f64 = v.iter().map(|x| x * x).sum();
    let mut g = DMatrix::zeros(n + 1, n + 1);
    g[(0, 0)] = k * (c * c - v2);
    for j in 0..n {
        g[(0, j + 1)] = k * v[j];
        g[(j + 1, 0)] = k * v[j];
        g[(j + 1, j + 1)] = -k;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{classify_signature, signature_check, spatial_block, Signature};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn kerr_radius_examples() {
        assert!(close(kerr_radius(3.0, 0.0, 0.0, 0.0).r, 3.0, 1e-15));
        assert!(close(kerr_radius(2.0, 0.0, 0.0, 1.0).r, 3f64.sqrt(), 1e-14));
        assert!(close(kerr_radius(0.0, 0.0, 1.5, 0.5).r, 1.5, 1e-14));
        let ring = kerr_radius(1.0, 0.0, 0.0, 1.0);
        assert_eq!(ring.r, 0.0);
        assert!(ring.on_ring);
    }

    #[test]
    fn kerr_radius_solves_quartic() {
        let a = 0.7;
        for &(x, y, z) in &[(0.1, 0.2, 0.05), (3.0, -1.0, 2.0), (0.3, 0.0, -4.0), (1e-3, 0.0, 1e-3)] {
            let r = kerr_radius(x, y, z, a).r;
            let big_r2: f64 = x * x + y * y + z * z;
            let res = r.powi(4) - (big_r2 - a * a) * r * r - a * a * z * z;
            assert!(res.abs() < 1e-10 * big_r2.powi(2).max(1.0), "res {res}");
        }
    }

    #[test]
    fn kerr_params_validation() {
        assert!(KerrParams::new(1.0, 1.0).is_err());
        assert!(KerrParams::new(-1.0, 0.0).is_err());
        assert!(KerrParams::new(1.0, 0.5).is_ok());
    }

    #[test]
    fn kerr_g11_schwarzschild_value() {
        let g = build_kerr(KerrParams::new(1.0, 0.0).unwrap());
        let inv = g.inverse(&[3.0, 0.0]).unwrap();
        assert!(close(inv[(1, 1)], -1.0 + 2.0 / 3.0, 1e-14));
        assert_eq!(inv[(1, 2)], inv[(2, 1)]);
    }

    #[test]
    fn kerr_displayed_components() {
        let p = KerrParams::new(1.0, 0.5).unwrap();
        let (rho, z) = (2.0, 1.0);
        let r = kerr_radius(rho, 0.0, z, p.a).r;
        let (m, a) = (p.m, p.a);
        let q = r.powi(4) + a * a * z * z;
        let s = r * r + a * a;
        let g11 = -1.0 + 2.0 * m * r.powi(5) * rho * rho / (q * s * s);
        let g22 = -1.0 + 2.0 * m * r * z * z / q;
        let g12 = 2.0 * m * r.powi(3) * z * rho / (q * s);
        for inv in [
            build_kerr(p).inverse(&[rho, z]).unwrap(),
            kerr_inverse_coordinate_basis(p, rho, z).unwrap(),
        ] {
            assert!(close(inv[(1, 1)], g11, 1e-14));
            assert!(close(inv[(2, 2)], g22, 1e-14));
            assert!(close(inv[(1, 2)], g12, 1e-14));
        }
    }

    #[test]
    fn kerr_covariant_matches_inverse() {
        let p = KerrParams::new(1.0, 0.5).unwrap();
        let cov = kerr_covariant_cartesian(p, &[3.0, 0.0, 1.0]).unwrap();
        let inv = build_kerr_cartesian(p).inverse(&[3.0, 0.0, 1.0]).unwrap();
        let prod = &cov * &inv;
        for j in 0..4 {
            for k in 0..4 {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!(close(prod[(j, k)], want, 1e-10));
            }
        }
        // the meridian frame at (rho, z) is the Cartesian (x, z, y) frame at y = 0
        let mer = build_kerr(p).inverse(&[3.0, 1.0]).unwrap();
        let perm = [0, 1, 3, 2];
        for j in 0..4 {
            for k in 0..4 {
                assert!(close(mer[(j, k)], inv[(perm[j], perm[k])], 1e-14));
            }
        }
    }

    #[test]
    fn kerr_axis_and_ring_domain() {
        let g = build_kerr(KerrParams::new(1.0, 0.5).unwrap());
        assert!(g.inverse(&[0.0, 1.2]).is_ok());
        assert!(g.inverse(&[0.5, 0.0]).is_err());
    }

    #[test]
    fn kerr_spatial_block_degenerate_on_horizon() {
        let p = KerrParams::new(1.0, 0.5).unwrap();
        let rp = p.m + (p.m * p.m - p.a * p.a).sqrt();
        let rho = (rp * rp + p.a * p.a).sqrt();
        let g = build_kerr(p).inverse(&[rho, 0.0]).unwrap();
        let block = g.view((1, 1), (2, 2)).into_owned();
        assert_eq!(classify_signature(&block), Signature::Degenerate);
        assert_eq!(classify_signature(&g), Signature::Lorentzian);
    }

    #[test]
    fn kerr_lorentzian_on_ergosphere() {
        // outer ergosphere at z = 0 is r = 2m, rho^2 = r^2 + a^2
        let p = KerrParams::new(1.0, 0.5).unwrap();
        let rho = (4.0f64 + 0.25).sqrt();
        let g = build_kerr(p);
        assert_eq!(signature_check(&g, &[rho, 0.0]), Signature::Lorentzian);
        let det = spatial_block(&g.inverse(&[rho, 0.0]).unwrap()).determinant();
        assert!(det.abs() < 1e-12);
    }

    #[test]
    fn gordon_examples() {
        let g = gordon_covariant(2.0, &[0.0, 0.0, 0.0], &[0.0; 3]).unwrap();
        assert!(close(g[(0, 0)], 0.25, 1e-15));
        for j in 1..4 {
            assert_eq!(g[(j, j)], -1.0);
        }
        let flat = gordon_covariant(1.0, &[0.3, -0.4, 0.1], &[0.0; 3]).unwrap();
        assert_eq!(flat, crate::metric::eta(3));
        let moving = gordon_covariant(2.0, &[0.5, 0.0, 0.0], &[0.0; 3]).unwrap();
        let v0 = 1.0 / (1.0f64 - 0.25).sqrt();
        let v1 = -v0 * 0.5;
        assert!(close(moving[(0, 1)], (0.25 - 1.0) * v0 * v1, 1e-15));
        assert!(moving.determinant() < 0.0);
        assert!(matches!(
            gordon_covariant(1.5, &[1.0, 0.0, 0.0], &[0.0; 3]),
            Err(Error::Hyperbolicity(_))
        ));
        let metric = build_gordon(Arc::new(|_| 1.5), Arc::new(|_| vec![0.2, 0.1, 0.0]));
        metric.validate_at(&[1.0, 0.0, 0.0]).unwrap();
    }

    #[test]
    fn acoustic_examples() {
        let g = acoustic_covariant(1.0, 1.0, &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(g, crate::metric::eta(3));
        let edge = acoustic_covariant(1.3, 0.7, &[0.7, 0.0, 0.0], &[0.0; 3]).unwrap();
        assert!(edge[(0, 0)].abs() < 1e-15);
        // draining flow |v| = r0 / r reaches the sound speed at r0
        let r0 = 1.5;
        let drain = build_acoustic(
            3,
            Arc::new(|_| 1.0),
            Arc::new(|_| 1.0),
            Arc::new(move |p: &[f64]| {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                p.iter().map(|x| -x / r * r0 / r).collect()
            }),
        );
        let cov = drain.covariant(&[0.0, r0, 0.0]).unwrap();
        assert!(cov[(0, 0)].abs() < 1e-12);
        assert!(acoustic_covariant(-1.0, 1.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn schwarzschild_matches_kerr_a0_at_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let p = KerrParams::new(1.0, 0.0).unwrap();
        let kerr = build_kerr_cartesian(p);
        let mut checked = 0;
        while checked < 100 {
            let x: [f64; 3] = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let big_r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if big_r <= 0.1 {
                continue;
            }
            let cov = kerr.covariant(&x).unwrap();
            let want = schwarzschild_covariant(1.0, &x).unwrap();
            for (a, b) in cov.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b} at {x:?}");
            }
            checked += 1;
        }
    }
}
