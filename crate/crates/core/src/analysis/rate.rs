//! Ordinary least squares on log2 RMSE data.

use crate::error::{CoreError, Result};

/// OLS fit of log2 RMSE against the dyadic exponent q = -log2(delta).
///
/// The slope follows the convergence-plot convention: a method of strong
/// order p shows slope about -p against q. Points are stored as
/// `(log2_delta, log2_rmse)` pairs; the intercept is the fitted value at
/// delta = 1 (q = 0), which is the same in either parametrisation.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `log2_rmse ~ intercept + slope * q` with q = -log2_delta.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(CoreError::InvalidParameter {
            name: "points",
            reason: format!("need at least 3 points, got {}", points.len()),
        });
    }
    let n = points.len() as f64;
    let qs: Vec<f64> = points.iter().map(|&(log2_delta, _)| -log2_delta).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let q_mean = qs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sqq: f64 = qs.iter().map(|q| (q - q_mean) * (q - q_mean)).sum();
    if sqq <= 1e-24 {
        return Err(CoreError::InvalidParameter {
            name: "points",
            reason: "degenerate abscissae: all step sizes equal".into(),
        });
    }
    let sqy: f64 = qs
        .iter()
        .zip(&ys)
        .map(|(q, y)| (q - q_mean) * (y - y_mean))
        .sum();
    let slope = sqy / sqq;
    let intercept = y_mean - slope * q_mean;
    let ss_res: f64 = qs
        .iter()
        .zip(&ys)
        .map(|(q, y)| {
            let e = y - (intercept + slope * q);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let r_squared = if ss_tot <= 1e-24 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}
