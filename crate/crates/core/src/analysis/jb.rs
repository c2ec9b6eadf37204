//! Jarque-Bera normality test.

use crate::error::{CoreError, Result};
use crate::numeric::chi2_sf_2df;

/// Jarque-Bera test outcome.
#[derive(Debug, Clone, Copy)]
pub struct JarqueBera {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Sample skewness (population moments).
    pub skewness: f64,
    /// Raw sample kurtosis; 3 for a normal law.
    pub kurtosis: f64,
    pub n: usize,
}

/// Sample skewness and raw kurtosis from population (1/n) central moments.
pub fn sample_skewness_kurtosis(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(CoreError::InvalidParameter {
            name: "samples",
            reason: format!("need at least 2 samples, got {}", samples.len()),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        return Err(CoreError::DegenerateSample(
            "zero sample variance".into(),
        ));
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2)))
}

/// JB = n/6 (S^2 + (K - 3)^2 / 4) with the p-value from the chi-squared(2)
/// asymptotic upper tail; `reject` compares it to `alpha`.
///
/// The asymptotic p-value is meaningful from a few dozen samples up; the
/// experiments here use thousands.
pub fn jarque_bera(samples: &[f64], alpha: f64) -> Result<JarqueBera> {
    if samples.len() < 3 {
        return Err(CoreError::InvalidParameter {
            name: "samples",
            reason: format!("need at least 3 samples, got {}", samples.len()),
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoreError::InvalidParameter {
            name: "alpha",
            reason: format!("significance level must lie in (0, 1), got {alpha}"),
        });
    }
    let n = samples.len();
    let (skewness, kurtosis) = sample_skewness_kurtosis(samples)?;
    let statistic =
        n as f64 / 6.0 * (skewness * skewness + (kurtosis - 3.0) * (kurtosis - 3.0) / 4.0);
    let p_value = chi2_sf_2df(statistic);
    Ok(JarqueBera {
        statistic,
        p_value,
        reject: p_value < alpha,
        skewness,
        kurtosis,
        n,
    })
}
