//! Least-squares convergence rates on log-log data.

use serde::{Deserialize, Serialize};

use crate::error::{CgoError, Result};

/// Errors at or below this level are treated as exact.
pub const EXACT_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Fits `log e = slope·log h + intercept` over at least four pairs.
pub fn fit_rate(h: &[f64], err: &[f64]) -> Result<RateFit> {
    if h.len() != err.len() {
        return Err(CgoError::DegenerateFit {
            detail: format!("{} abscissae but {} errors", h.len(), err.len()),
        });
    }
    if h.len() < 4 {
        return Err(CgoError::DegenerateFit {
            detail: format!("need at least 4 pairs, got {}", h.len()),
        });
    }
    if let Some(e) = err.iter().find(|e| !(**e > EXACT_THRESHOLD)) {
        return Err(CgoError::DegenerateFit {
            detail: format!("error {e:.3e} is at the exactness level"),
        });
    }
    if h.iter().any(|v| !(*v > 0.0)) {
        return Err(CgoError::DegenerateFit {
            detail: "abscissae must be positive".into(),
        });
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(CgoError::DegenerateFit {
            detail: "all abscissae coincide".into(),
        });
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(RateFit { slope, intercept, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const EPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

    #[test]
    fn square_root_rate() {
        let e: Vec<f64> = EPS.iter().map(|x| 3.0 * x.sqrt()).collect();
        let f = fit_rate(&EPS, &e).unwrap();
        assert_abs_diff_eq!(f.slope, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, 3f64.ln(), epsilon = 1e-12);
        assert!(f.stderr < 1e-12);
    }

    #[test]
    fn linear_rate() {
        let e: Vec<f64> = EPS.iter().map(|x| 0.7 * x).collect();
        assert_abs_diff_eq!(fit_rate(&EPS, &e).unwrap().slope, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_errors_are_degenerate() {
        let e = [1e-3, 1e-4, 1e-15, 1e-5];
        assert!(matches!(fit_rate(&EPS, &e), Err(CgoError::DegenerateFit { .. })));
        assert!(fit_rate(&EPS[..3], &e[..3]).is_err());
    }

    #[test]
    fn noisy_rate_has_positive_stderr() {
        let e = [0.31, 0.23, 0.15, 0.11];
        let f = fit_rate(&EPS, &e).unwrap();
        assert!(f.stderr > 0.0 && f.stderr < 0.1);
    }
}
