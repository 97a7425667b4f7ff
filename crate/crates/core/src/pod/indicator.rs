//! Error indicator: log-log regression of true error against Gappy residual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorIndicator {
    pub slope: f64,
    pub intercept: f64,
    /// Smallest training error; returned for zero residuals and as a lower bound.
    pub floor: f64,
}

/// Least-squares line through `(ln residual, ln error)` over the points where
/// both are positive. A negative fitted slope is clamped to zero (and the
/// intercept refitted) so the prediction stays monotone in the residual.
pub fn fit_error_indicator(residuals: &[f64], errors: &[f64]) -> Result<ErrorIndicator> {
    if residuals.len() != errors.len() {
        return Err(Error::DimensionMismatch {
            context: "error indicator data",
            expected: residuals.len(),
            got: errors.len(),
        });
    }
    let kept: Vec<(f64, f64)> = residuals
        .iter()
        .zip(errors)
        .filter(|(r, e)| **r > 0.0 && **e > 0.0 && r.is_finite() && e.is_finite())
        .map(|(&r, &e)| (r, e))
        .collect();
    let pts: Vec<(f64, f64)> = kept.iter().map(|(r, e)| (r.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(
            "error indicator needs at least 2 points with positive residual and error".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-24 * n * (1.0 + mx * mx) {
        return Err(Error::InvalidArgument("error indicator residuals are all equal".into()));
    }
    let mut slope = sxy / sxx;
    if slope < 0.0 {
        log::warn!("error indicator slope {slope:.3e} clamped to 0");
        slope = 0.0;
    }
    let intercept = my - slope * mx;
    let floor = kept.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(ErrorIndicator { slope, intercept, floor })
}

impl ErrorIndicator {
    pub fn predict(&self, residual: f64) -> f64 {
        if !(residual > 0.0) {
            return self.floor;
        }
        (self.slope * residual.ln() + self.intercept).exp().max(self.floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let r = [1e-3, 1e-2, 0.5, 2.0];
        let ind = fit_error_indicator(&r, &r).unwrap();
        assert!((ind.slope - 1.0).abs() < 1e-10);
        assert!(ind.intercept.abs() < 1e-10);
        assert_eq!(ind.predict(0.0), 1e-3);
        assert!((ind.predict(0.7) - 0.7).abs() < 1e-10);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_error_indicator(&[1.0, 1.0, 1.0], &[0.1, 0.2, 0.3]).is_err());
        assert!(fit_error_indicator(&[1.0, 0.0], &[0.1, 0.2]).is_err());
        assert!(fit_error_indicator(&[1.0], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn negative_trend_is_flattened() {
        let ind = fit_error_indicator(&[1.0, 2.0, 4.0], &[4.0, 2.0, 1.0]).unwrap();
        assert_eq!(ind.slope, 0.0);
        assert!(ind.predict(10.0) >= ind.predict(1.0));
    }
}
