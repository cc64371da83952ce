//! Least-squares line fits with Student-t confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    /// Two-sided confidence interval of the slope.
    pub slope_ci: (f64, f64),
    pub n: usize,
}

impl LineFit {
    /// The interval contains zero.
    pub fn slope_indistinguishable_from_zero(&self) -> bool {
        self.slope_ci.0 <= 0.0 && self.slope_ci.1 >= 0.0
    }
}

/// Ordinary least squares `y = intercept + slope x` with a `level` (e.g.
/// 0.95) interval on the slope.
pub fn fit_line(x: &[f64], y: &[f64], level: f64) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::InvalidParams("line fit needs at least 3 paired samples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParams(format!("confidence level {level}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = (sse / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::InvalidParams(e.to_string()))?
        .inverse_cdf(0.5 + 0.5 * level);
    Ok(LineFit { slope, intercept, slope_se, slope_ci: (slope - t * slope_se, slope + t * slope_se), n })
}

/// Observed order of convergence `log(e_coarse / e_fine) / log(ratio)`.
pub fn observed_order(e_coarse: f64, e_fine: f64, ratio: f64) -> f64 {
    (e_coarse / e_fine).ln() / ratio.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_zero_width_interval() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&x, &y, 0.95).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_se < 1e-14);
    }

    #[test]
    fn interval_matches_tabulated_quantile() {
        // residuals +-1 alternate: sse = 4, sxx = 5, n = 4
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, -1.0, 1.0, -1.0];
        let f = fit_line(&x, &y, 0.95).unwrap();
        let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - f.intercept - f.slope * a).powi(2)).sum();
        let se = (sse / 2.0 / 5.0).sqrt();
        // t_{0.975, 2} = 4.302653
        assert!((f.slope_ci.1 - f.slope - 4.302653 * se).abs() < 1e-5);
    }
}
