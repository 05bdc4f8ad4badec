//! Least-squares line fits and the log-log rate fit of sweep results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn line_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::InsufficientData(format!(
            "{} abscissae vs {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!("line fit needs 2 points, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LineFit { slope, intercept, r2 })
}

/// Log-log fit of `sup_t D` against `alpha + epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `(alpha + epsilon, sup_t D)`, sorted, positive entries only.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl RateFit {
    /// Pairs with `D <= 0` (or non-finite) are dropped; at least 3 must remain.
    /// Points are sorted first so the fit does not depend on input order.
    pub fn fit(points: &[(f64, f64)]) -> Result<RateFit> {
        let mut pts: Vec<(f64, f64)> = points
            .iter()
            .copied()
            .filter(|&(x, d)| x > 0.0 && d > 0.0 && x.is_finite() && d.is_finite())
            .collect();
        if pts.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "rate fit needs at least 3 points with D > 0, got {}",
                pts.len()
            )));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let LineFit { slope, intercept, r2 } = line_fit(&xs, &ys)?;
        Ok(RateFit {
            points: pts,
            slope,
            intercept,
            r2,
        })
    }
}
