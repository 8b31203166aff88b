//! Least-squares slope fits used by the convergence studies.

use crate::error::{Error, Result};

/// Ordinary least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("a linear fit needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("abscissae are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Slope of `log|y|` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| *v == 0.0 || !v.is_finite()) || x.iter().any(|v| *v < 0.0) {
        return Err(Error::domain("log-log fit needs positive abscissae and nonzero ordinates"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    linear_fit(&lx, &ly).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let x: Vec<f64> = (1..=10).map(|i| 1e-3 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| -3.5 * v.powi(4)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 4.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
    }
}
