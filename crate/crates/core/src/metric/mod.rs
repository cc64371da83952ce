//! Stationary inverse metrics `g^{jk}(x)` and the concrete families built on them.
//!
//! A metric is a closure over its parameters, evaluated lazily at arbitrary
//! spatial points. Two coordinate layouts are supported:
//!
//! * [`Coords::Cartesian`]: points are `n` Cartesian coordinates, tensors are
//!   indexed `(t, x_1, .., x_n)`.
//! * [`Coords::Meridian`]: axisymmetric metrics in `n = 3`, points are
//!   `(rho, z)` in the meridian plane and tensors are indexed
//!   `(t, rho, z, phi_hat)`, where `phi_hat` is the unit (orthonormal) azimuthal
//!   direction. Negative `rho` is the continuation through the axis, i.e. the
//!   meridian plane is the Cartesian `(x, z)` plane at `y = 0` with
//!   `phi_hat = y_hat`. In this frame determinants and signatures agree with the
//!   Cartesian ones; the cylindrical volume element carries the extra `|rho|`.

mod families;
mod flow;

pub use families::{
    build_acoustic, build_gordon, build_kerr, build_kerr_cartesian, kerr_covariant_cartesian,
    kerr_inverse_coordinate_basis, kerr_radius, schwarzschild_covariant, KerrParams, KerrRadius,
};
pub use flow::{build_flow_metric, FlowForm, SwirlDrain, V0Mode};

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

/// Symmetry tolerance for evaluated inverse metrics.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Inversion residual tolerance (per entry).
pub const INVERSION_TOL: f64 = 1e-10;
/// Eigenvalues below this magnitude count as zero in signature checks.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Smallest determinant magnitude accepted by [`invert_metric`].
pub const MIN_DET: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coords {
    Cartesian,
    Meridian,
}

pub type InverseFn = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync;

/// A time-independent inverse metric field. Immutable and cheap to clone.
#[derive(Clone)]
pub struct StationaryMetric {
    name: String,
    dim: usize,
    coords: Coords,
    inv: Arc<InverseFn>,
}

impl fmt::Debug for StationaryMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StationaryMetric")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("coords", &self.coords)
            .finish()
    }
}

impl StationaryMetric {
    /// Wraps an inverse-metric closure. `dim` is the spatial dimension `n`;
    /// the closure must return `(n+1) x (n+1)` matrices.
    pub fn new<F>(name: impl Into<String>, dim: usize, coords: Coords, inv: F) -> Self
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        assert!(
            coords == Coords::Cartesian || dim == 3,
            "meridian metrics are three dimensional"
        );
        Self {
            name: name.into(),
            dim,
            coords,
            inv: Arc::new(inv),
        }
    }

    pub fn minkowski(dim: usize) -> Self {
        Self::new("minkowski", dim, Coords::Cartesian, move |_| {
            Ok(eta(dim))
        })
    }

    pub fn minkowski_meridian() -> Self {
        Self::new("minkowski", 3, Coords::Meridian, |_| Ok(eta(3)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> Coords {
        self.coords
    }

    /// Number of coordinates in a spatial point.
    pub fn point_len(&self) -> usize {
        match self.coords {
            Coords::Cartesian => self.dim,
            Coords::Meridian => 2,
        }
    }

    /// `g^{jk}(p)`, indices `0..=n`.
    pub fn inverse(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        if p.len() != self.point_len() {
            return Err(Error::Domain {
                point: p.to_vec(),
                reason: format!("expected {} coordinates", self.point_len()),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain {
                point: p.to_vec(),
                reason: "non-finite coordinate".into(),
            });
        }
        (self.inv)(p)
    }

    /// Covariant tensor `g_{jk}(p)`.
    pub fn covariant(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        invert_metric(&self.inverse(p)?)
    }

    /// `sqrt(|det g_{jk}|)` in the metric's own frame.
    pub fn sqrt_abs_det(&self, p: &[f64]) -> Result<f64> {
        let det = self.inverse(p)?.determinant();
        if det.abs() < MIN_DET {
            return Err(Error::Singular { det });
        }
        Ok(1.0 / det.abs().sqrt())
    }

    /// Density of the invariant volume element in the point coordinates:
    /// `sqrt|g|` for Cartesian, `|rho| sqrt|g|` in the meridian plane.
    pub fn volume_weight(&self, p: &[f64]) -> Result<f64> {
        let s = self.sqrt_abs_det(p)?;
        Ok(match self.coords {
            Coords::Cartesian => s,
            Coords::Meridian => p[0].abs() * s,
        })
    }

    /// The same metric with the time orientation flipped (`g^{0j} -> -g^{0j}`).
    pub fn time_reversed(&self) -> Self {
        let inner = self.inv.clone();
        Self {
            name: format!("{}-reversed", self.name),
            dim: self.dim,
            coords: self.coords,
            inv: Arc::new(move |p: &[f64]| {
                let mut g = inner(p)?;
                for j in 1..g.nrows() {
                    g[(0, j)] = -g[(0, j)];
                    g[(j, 0)] = -g[(j, 0)];
                }
                Ok(g)
            }),
        }
    }

    /// Checks the structural invariants at `p`: symmetry, `g^{00} > 0` and
    /// Lorentz signature.
    pub fn validate_at(&self, p: &[f64]) -> Result<()> {
        let g = self.inverse(p)?;
        let n = g.nrows();
        for j in 0..n {
            for k in (j + 1)..n {
                let scale = g[(j, k)].abs().max(g[(k, j)].abs()).max(1.0);
                if (g[(j, k)] - g[(k, j)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Domain {
                        point: p.to_vec(),
                        reason: format!("inverse metric not symmetric at ({j},{k})"),
                    });
                }
            }
        }
        if g[(0, 0)] <= 0.0 {
            return Err(Error::Hyperbolicity(format!(
                "g^00 = {} <= 0 at {:?}",
                g[(0, 0)],
                p
            )));
        }
        match classify_signature(&g) {
            Signature::Lorentzian => Ok(()),
            other => Err(Error::Hyperbolicity(format!(
                "signature {other:?} at {p:?}"
            ))),
        }
    }
}

/// `diag(1, -1, .., -1)` of size `n + 1`.
pub fn eta(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_element(n + 1, n + 1, 0.0);
    m[(0, 0)] = 1.0;
    for j in 1..=n {
        m[(j, j)] = -1.0;
    }
    m
}

/// Inverts a symmetric metric matrix. The result is symmetrized.
pub fn invert_metric(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let det = m.determinant();
    if !det.is_finite() || det.abs() <= MIN_DET {
        return Err(Error::Singular { det });
    }
    let inv = m.clone().try_inverse().ok_or(Error::Singular { det })?;
    Ok((&inv + inv.transpose()) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    /// One positive eigenvalue, the rest negative.
    Lorentzian,
    /// Some eigenvalue has magnitude below [`DEGENERACY_TOL`].
    Degenerate,
    Invalid,
}

/// Classifies the eigenvalue signs of a symmetric matrix.
pub fn classify_signature(m: &DMatrix<f64>) -> Signature {
    if m.iter().any(|x| !x.is_finite()) {
        return Signature::Invalid;
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    if eig.iter().any(|l| l.abs() < DEGENERACY_TOL) {
        return Signature::Degenerate;
    }
    let positive = eig.iter().filter(|&&l| l > 0.0).count();
    if positive == 1 {
        Signature::Lorentzian
    } else {
        Signature::Invalid
    }
}

pub fn signature_check(g: &StationaryMetric, p: &[f64]) -> Signature {
    match g.inverse(p) {
        Ok(m) => classify_signature(&m),
        Err(_) => Signature::Invalid,
    }
}

/// The spatial block `[g^{jk}]_{j,k=1..n}`.
pub fn spatial_block(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows() - 1;
    g.view((1, 1), (n, n)).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn invert_identity_and_eta() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(invert_metric(&id).unwrap(), id);
        let e = eta(3);
        assert_eq!(invert_metric(&e).unwrap(), e);
    }

    #[test]
    fn invert_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(invert_metric(&m), Err(Error::Singular { .. })));
    }

    #[test]
    fn minkowski_is_lorentzian() {
        let g = StationaryMetric::minkowski(3);
        assert_eq!(signature_check(&g, &[0.3, -1.0, 2.0]), Signature::Lorentzian);
        g.validate_at(&[1.0, 2.0, 3.0]).unwrap();
        let m = StationaryMetric::minkowski_meridian();
        assert_eq!(signature_check(&m, &[0.0, 0.0]), Signature::Lorentzian);
    }

    #[test]
    fn signature_classes() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0, -1.0]));
        assert_eq!(classify_signature(&d), Signature::Degenerate);
        let r = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, -1.0]));
        assert_eq!(classify_signature(&r), Signature::Invalid);
    }

    #[test]
    fn wrong_point_length_is_domain_error() {
        let g = StationaryMetric::minkowski(2);
        assert!(g.inverse(&[1.0]).is_err());
    }

    #[test]
    fn time_reversal_flips_mixed_components_only() {
        let g = build_flow_metric(&FlowForm::cartesian("test", 2, |p: &[f64]| {
            Ok(vec![0.3 * p[0], -0.2])
        }));
        let r = g.time_reversed();
        let p = [0.7, 0.1];
        let a = g.inverse(&p).unwrap();
        let b = r.inverse(&p).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let sign = if (j == 0) != (k == 0) { -1.0 } else { 1.0 };
                assert_eq!(b[(j, k)], sign * a[(j, k)]);
            }
        }
    }

    fn lorentzian_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        // Q diag(l0, -l1, -l2, -l3) Q^T with a random rotation built from a
        // symmetric seed matrix.
        (
            prop::array::uniform4(0.2f64..3.0),
            prop::array::uniform16(-1.0f64..1.0),
        )
            .prop_map(|(l, s)| {
                let seed = DMatrix::from_row_slice(4, 4, &s);
                let sym = &seed + seed.transpose();
                let q = SymmetricEigen::new(sym).eigenvectors;
                let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                    l[0], -l[1], -l[2], -l[3],
                ]));
                &q * d * q.transpose()
            })
    }

    proptest! {
        #[test]
        fn double_inversion_is_identity(m in lorentzian_matrix()) {
            let back = invert_metric(&invert_metric(&m).unwrap()).unwrap();
            for (a, b) in m.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let prod = &m * invert_metric(&m).unwrap();
            for j in 0..4 {
                for k in 0..4 {
                    let want = if j == k { 1.0 } else { 0.0 };
                    prop_assert!((prod[(j, k)] - want).abs() < INVERSION_TOL);
                }
            }
            prop_assert_eq!(classify_signature(&m), Signature::Lorentzian);
        }
    }
}
