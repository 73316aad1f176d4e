//! Ordinary least squares for log-log scaling fits.

use serde::Serialize;

use crate::error::{Error, Result};

/// Outcome of a power-law fit `ln y = slope * ln x + intercept`, reported as
/// the exponent derived from the slope.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub stderr: f64,
    /// Every `(ln L, ln observable)` point that was computed.
    pub points: Vec<(f64, f64)>,
    /// Half-open index range of `points` used in the regression.
    pub window: (usize, usize),
    pub slope: f64,
    pub slope_stderr: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Unweighted least-squares line through `points`.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "a fit window needs at least 3 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || !sxx.is_finite() {
        return Err(Error::InsufficientData("fit abscissae are degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let slope_stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let f = linear_fit(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-13);
        assert!(f.slope_stderr < 1e-12);
    }

    #[test]
    fn noisy_line_has_positive_stderr() {
        let pts = [(0.0, 0.1), (1.0, 0.9), (2.0, 2.1), (3.0, 2.9)];
        let f = linear_fit(&pts).unwrap();
        assert!((f.slope - 0.96).abs() < 1e-12);
        assert!(f.slope_stderr > 0.0 && f.slope_stderr.is_finite());
    }

    #[test]
    fn too_few_points() {
        assert!(linear_fit(&[(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(linear_fit(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }
}
