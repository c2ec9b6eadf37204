//! Gaussian kernel density estimation on a uniform 1-d grid.

use crate::error::{CoreError, Result};
use crate::numeric::normal_pdf;

/// Density values on a uniform grid.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    pub xs: Vec<f64>,
    pub densities: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    /// Trapezoid-rule mass of the curve; close to 1 when the grid spans
    /// the sample range plus a few bandwidths.
    pub fn mass(&self) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.xs.len() {
            acc += 0.5 * (self.densities[i - 1] + self.densities[i]) * (self.xs[i] - self.xs[i - 1]);
        }
        acc
    }
}

/// Silverman's rule of thumb: 1.06 sigma n^(-1/5), with the sample
/// standard deviation (n - 1 denominator).
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(CoreError::InvalidParameter {
            name: "samples",
            reason: format!("need at least 2 samples, got {n}"),
        });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    if var <= 0.0 {
        return Err(CoreError::DegenerateSample(
            "zero variance, no automatic bandwidth".into(),
        ));
    }
    Ok(1.06 * var.sqrt() * (n as f64).powf(-0.2))
}

/// Gaussian-kernel density on `n_points` evenly spaced values of
/// `[lo, hi]`. With `bandwidth = None`, Silverman's rule is applied.
pub fn kde_1d(
    samples: &[f64],
    bandwidth: Option<f64>,
    grid: (f64, f64, usize),
) -> Result<DensityCurve> {
    let (lo, hi, n_points) = grid;
    if samples.len() < 2 {
        return Err(CoreError::InvalidParameter {
            name: "samples",
            reason: format!("need at least 2 samples, got {}", samples.len()),
        });
    }
    if !(hi > lo) || n_points < 2 {
        return Err(CoreError::InvalidParameter {
            name: "grid",
            reason: format!("need lo < hi and at least 2 points, got ({lo}, {hi}, {n_points})"),
        });
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 => h,
        Some(h) => {
            return Err(CoreError::InvalidParameter {
                name: "bandwidth",
                reason: format!("must be positive, got {h}"),
            })
        }
        None => silverman_bandwidth(samples)?,
    };
    let n = samples.len() as f64;
    let step = (hi - lo) / (n_points - 1) as f64;
    let xs: Vec<f64> = (0..n_points).map(|i| lo + i as f64 * step).collect();
    let densities: Vec<f64> = xs
        .iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| normal_pdf((x - s) / h))
                .sum::<f64>()
                / (n * h)
        })
        .collect();
    Ok(DensityCurve {
        xs,
        densities,
        bandwidth: h,
    })
}

/// KDE on an automatic grid spanning the sample range plus five
/// bandwidths on each side.
pub fn kde_1d_auto(
    samples: &[f64],
    bandwidth: Option<f64>,
    n_points: usize,
) -> Result<DensityCurve> {
    let h = match bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(samples)?,
    };
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min) - 5.0 * h;
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 5.0 * h;
    kde_1d(samples, Some(h), (lo, hi, n_points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::inv_normal_cdf;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_kernel_at_origin() {
        // Two coincident samples with bandwidth 1: one unit kernel.
        let curve = kde_1d(&[0.0, 0.0], Some(1.0), (-6.0, 6.0, 241)).unwrap();
        let mid = curve.xs.len() / 2;
        assert_abs_diff_eq!(curve.xs[mid], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(curve.densities[mid], 0.3989422804014327, epsilon = 1e-12);
        assert!((curve.mass() - 1.0).abs() <= 0.01);
    }

    #[test]
    fn symmetric_sample_gives_symmetric_curve() {
        let a = 1.5;
        let curve = kde_1d(&[-a, a], Some(0.7), (-5.0, 5.0, 201)).unwrap();
        let n = curve.xs.len();
        for i in 0..n {
            assert_abs_diff_eq!(
                curve.densities[i],
                curve.densities[n - 1 - i],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn gaussian_sample_matches_true_density() {
        // Deterministic stratified sample of N(0, 4/9).
        let sd = 2.0 / 3.0;
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|i| sd * inv_normal_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        let curve = kde_1d_auto(&samples, None, 401).unwrap();
        let max_err = curve
            .xs
            .iter()
            .zip(&curve.densities)
            .map(|(&x, &d)| (d - normal_pdf(x / sd) / sd).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 0.05, "max KDE error {max_err}");
        assert!((curve.mass() - 1.0).abs() <= 0.01);
    }

    #[test]
    fn input_validation() {
        assert!(kde_1d(&[1.0], Some(1.0), (-1.0, 1.0, 11)).is_err());
        assert!(kde_1d(&[0.0, 1.0], Some(-1.0), (-1.0, 1.0, 11)).is_err());
        assert!(kde_1d(&[0.0, 1.0], Some(1.0), (1.0, -1.0, 11)).is_err());
        assert!(matches!(
            kde_1d(&[2.0, 2.0], None, (-1.0, 1.0, 11)),
            Err(CoreError::DegenerateSample(_))
        ));
    }
}
