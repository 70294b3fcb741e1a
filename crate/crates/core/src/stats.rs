//! Ordinary least squares on log-log data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of a point from the fitted line.
    pub max_residual: f64,
}

/// Unweighted least-squares line through `(x_i, y_i)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("x and y lengths differ".into()));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    Ok(LineFit { slope, intercept, max_residual })
}

/// Fit of `ln y` against `ln x`; every value must be positive.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    for (x, y) in xs.iter().zip(ys) {
        if !(*y > 0.0) {
            return Err(Error::NonPositiveSample { t: *x, value: *y });
        }
        if !(*x > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("abscissa {x} must be positive")));
        }
    }
    let lx: alloc::vec::Vec<f64> = xs.iter().map(|x| libm::log(*x)).collect();
    let ly: alloc::vec::Vec<f64> = ys.iter().map(|y| libm::log(*y)).collect();
    fit_line(&lx, &ly)
}
