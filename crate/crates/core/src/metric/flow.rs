//! Flow-form metrics: inverse metrics assembled from a velocity field.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Coords, StationaryMetric};
use crate::error::Result;

pub type VelocityFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;
pub type TimeComponentFn = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;

/// How the time component of the flow enters the inverse metric.
#[derive(Clone)]
pub enum V0Mode {
    /// `g^{00} = 1`, `g^{j0} = v^j`, `g^{jk} = -delta^{jk} + v^j v^k`.
    Unit,
    /// `g^{jk} = xi^{jk} + v^j v^k` for `0 <= j, k <= n` with the given `v^0`.
    Explicit(Arc<TimeComponentFn>),
}

/// A velocity field `v(x)` together with the rule for its time component.
#[derive(Clone)]
pub struct FlowForm {
    pub name: String,
    pub dim: usize,
    pub coords: Coords,
    pub velocity: Arc<VelocityFn>,
    pub v0: V0Mode,
}

impl fmt::Debug for FlowForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowForm")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("coords", &self.coords)
            .field("explicit_v0", &matches!(self.v0, V0Mode::Explicit(_)))
            .finish()
    }
}

impl FlowForm {
    pub fn cartesian<F>(name: impl Into<String>, dim: usize, v: F) -> Self
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim,
            coords: Coords::Cartesian,
            velocity: Arc::new(v),
            v0: V0Mode::Unit,
        }
    }

    /// Axisymmetric flow in the meridian frame; `v` returns
    /// `(v^rho, v^z, v^phi_hat)`.
    pub fn meridian<F>(name: impl Into<String>, v: F) -> Self
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim: 3,
            coords: Coords::Meridian,
            velocity: Arc::new(v),
            v0: V0Mode::Unit,
        }
    }

    pub fn with_v0(mut self, v0: V0Mode) -> Self {
        self.v0 = v0;
        self
    }

    pub fn velocity_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        (self.velocity)(p)
    }

    /// Inverse metric at `p`.
    pub fn inverse_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let v = (self.velocity)(p)?;
        debug_assert_eq!(v.len(), self.dim);
        let n = self.dim;
        let mut g = super::eta(n);
        match &self.v0 {
            V0Mode::Unit => {
                for j in 0..n {
                    g[(0, j + 1)] = v[j];
                    g[(j + 1, 0)] = v[j];
                    for k in 0..n {
                        g[(j + 1, k + 1)] += v[j] * v[k];
                    }
                }
            }
            V0Mode::Explicit(v0f) => {
                let mut full = Vec::with_capacity(n + 1);
                full.push(v0f(p)?);
                full.extend_from_slice(&v);
                for j in 0..=n {
                    for k in 0..=n {
                        g[(j, k)] += full[j] * full[k];
                    }
                }
            }
        }
        Ok(g)
    }
}

/// Assembles the stationary metric of a flow form.
pub fn build_flow_metric(f: &FlowForm) -> StationaryMetric {
    let flow = f.clone();
    StationaryMetric::new(f.name.clone(), f.dim, f.coords, move |p: &[f64]| {
        flow.inverse_at(p)
    })
}

/// Axisymmetric swirling drain with elliptic level sets `q = rho^2/a^2 + z^2/b^2`:
///
/// `v_pol = -(strength / (1 + q)) w / sqrt(|w|^2 + core^2)`, `w = (rho/a^2, z/b^2)`,
/// `v_phi = swirl rho / (1 + q)`.
///
/// With `strength > 1` the flow is supersonic on an annulus around the
/// ellipse `q = strength - 1`, so both ergosphere sets are closed curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwirlDrain {
    pub strength: f64,
    pub a: f64,
    pub b: f64,
    pub swirl: f64,
    pub core: f64,
}

impl SwirlDrain {
    /// Parameters drawn uniformly from `strength in [1.5, 3]`,
    /// `a, b in [0.8, 1.5]`, `swirl in [0, 0.8]`, with `core = 0.3`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            strength: rng.random_range(1.5..3.0),
            a: rng.random_range(0.8..1.5),
            b: rng.random_range(0.8..1.5),
            swirl: rng.random_range(0.0..0.8),
            core: 0.3,
        }
    }

    pub fn flow(&self) -> FlowForm {
        let d = *self;
        FlowForm::meridian(format!("swirl-drain({:.3},{:.3},{:.3},{:.3})", d.strength, d.a, d.b, d.swirl), move |p: &[f64]| {
            let (rho, z) = (p[0], p[1]);
            let q = rho * rho / (d.a * d.a) + z * z / (d.b * d.b);
            let w = [rho / (d.a * d.a), z / (d.b * d.b)];
            let norm = (w[0] * w[0] + w[1] * w[1] + d.core * d.core).sqrt();
            let mu = d.strength / (1.0 + q);
            Ok(vec![-mu * w[0] / norm, -mu * w[1] / norm, d.swirl * rho / (1.0 + q)])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{classify_signature, spatial_block, Signature};
    use nalgebra::SymmetricEigen;

    #[test]
    fn zero_flow_is_minkowski() {
        let g = build_flow_metric(&FlowForm::cartesian("still", 3, |_| Ok(vec![0.0; 3])));
        assert_eq!(g.inverse(&[1.0, 2.0, 3.0]).unwrap(), crate::metric::eta(3));
    }

    #[test]
    fn unit_speed_degenerates_spatial_block() {
        let g = build_flow_metric(&FlowForm::cartesian("unit", 2, |_| Ok(vec![0.6, 0.8])));
        let inv = g.inverse(&[0.0, 0.0]).unwrap();
        let block = spatial_block(&inv);
        let d1 = block[(0, 0)] * block[(1, 1)] - block[(0, 1)].powi(2);
        assert!(d1.abs() < 1e-15);
        let mut eig: Vec<f64> = SymmetricEigen::new(block).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((eig[0] + 1.0).abs() < 1e-14 && eig[1].abs() < 1e-14);
        assert_eq!(classify_signature(&inv), Signature::Lorentzian);
        // g_00 = 1 - |v|^2 vanishes with the spatial determinant
        let cov = g.covariant(&[0.0, 0.0]).unwrap();
        assert!(cov[(0, 0)].abs() < 1e-14);
    }

    #[test]
    fn unit_mode_is_always_lorentzian() {
        for v in [[0.1, 0.0], [1.5, -2.0], [0.0, 3.0]] {
            let g = build_flow_metric(&FlowForm::cartesian("v", 2, move |_| Ok(v.to_vec())));
            g.validate_at(&[0.0, 0.0]).unwrap();
        }
    }

    #[test]
    fn explicit_mode_matches_outer_product() {
        let f = FlowForm::meridian("e", |_| Ok(vec![0.2, 0.3, -0.1]))
            .with_v0(V0Mode::Explicit(Arc::new(|_| Ok(-0.5))));
        let g = f.inverse_at(&[1.0, 0.0]).unwrap();
        assert!((g[(0, 0)] - 1.25).abs() < 1e-15);
        assert!((g[(0, 1)] + 0.1).abs() < 1e-15);
        assert!((g[(2, 2)] - (-1.0 + 0.09)).abs() < 1e-15);
    }

    #[test]
    fn swirl_drain_is_seeded_and_in_range() {
        let (a, b) = (SwirlDrain::random(3), SwirlDrain::random(3));
        assert_eq!(a, b);
        assert_ne!(a, SwirlDrain::random(4));
        assert!((1.5..3.0).contains(&a.strength) && (0.0..0.8).contains(&a.swirl));
        // on the axis far from the core the radial flow speed is strength / (1 + q)
        let v = a.flow().velocity_at(&[0.0, 10.0 * a.b]).unwrap();
        assert!(v[0] == 0.0 && v[2] == 0.0);
        assert!((v[1].abs() * 101.0 / a.strength - 1.0).abs() < 1e-3);
    }
}
