//! The computational-cost model of the two empirical approximations and
//! the error-driven parameter prescriptions.
//!
//! Simulating a self-interacting step inside block k costs k + 1
//! coefficient-atom touches (the frozen measure holds k + 1 anchors), so
//! the exact single-path count over t/tau blocks of M inner steps is
//! `M * K (K + 1) / 2` with `K = t / tau`. For the N-particle system each
//! particle-step touches `(k + 1) N` atoms, giving `N^2 * M * K (K+1) / 2`.

use crate::error::{CoreError, Result};
use crate::model::RateParams;
use crate::numeric::as_integer;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Wea,
    Awea,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Wea => write!(f, "wea"),
            Scheme::Awea => write!(f, "awea"),
        }
    }
}

/// Exact and order-of-magnitude step counts for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub scheme: Scheme,
    pub t: f64,
    pub tau: f64,
    pub delta: f64,
    pub n_particles: u64,
    /// Exact coefficient-evaluation count from the block sums.
    pub exact_coeff_evals: u128,
    /// The headline approximation `(t/delta)(t/tau)`, times N^2 for the
    /// particle system.
    pub paper_order: f64,
}

/// Exact coefficient-evaluation counts with the matching order formula.
pub fn cost_exact(scheme: Scheme, t: f64, tau: f64, delta: f64, n_particles: u64) -> Result<CostReport> {
    let blocks = as_integer(t / tau, 1e-9).filter(|&k| k >= 1).ok_or_else(|| {
        CoreError::InvalidParameter {
            name: "t",
            reason: format!("t = {t} must be a positive integer multiple of tau = {tau}"),
        }
    })? as u128;
    let m_steps = as_integer(tau / delta, 1e-9).filter(|&m| m >= 1).ok_or_else(|| {
        CoreError::InvalidParameter {
            name: "delta",
            reason: format!("delta = {delta} must divide tau = {tau}"),
        }
    })? as u128;
    let n = match scheme {
        Scheme::Wea => {
            if n_particles > 1 {
                return Err(CoreError::InvalidParameter {
                    name: "n_particles",
                    reason: "single-path scheme has N = 1".into(),
                });
            }
            1u128
        }
        Scheme::Awea => {
            if n_particles == 0 {
                return Err(CoreError::InvalidParameter {
                    name: "n_particles",
                    reason: "need at least one particle".into(),
                });
            }
            n_particles as u128
        }
    };
    let exact = n * n * m_steps * blocks * (blocks + 1) / 2;
    let paper_order = (n as f64).powi(2) * (t / delta) * (t / tau);
    Ok(CostReport {
        scheme,
        t,
        tau,
        delta,
        n_particles: n as u64,
        exact_coeff_evals: exact,
        paper_order,
    })
}

/// The cost exponent v(r) = 4(d+2)(1-r) + 4r/(eta AND delta) + 2 of the
/// particle system; r = 1 recovers the single-path exponent 4/(eta AND
/// delta) + 2.
pub fn cost_exponent_awea(rate: &RateParams, r: f64) -> f64 {
    4.0 * (rate.dim() as f64 + 2.0) * (1.0 - r) + 4.0 * r / rate.rate_exponent() + 2.0
}

pub fn cost_exponent_wea(rate: &RateParams) -> f64 {
    4.0 / rate.rate_exponent() + 2.0
}

/// Error-driven parameter prescription for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ChosenParams {
    pub scheme: Scheme,
    pub epsilon: f64,
    pub tau: f64,
    pub delta: f64,
    /// Horizon, ceil(eps^(-2 r / (eta AND delta))) blocks of tau (r = 1
    /// for the single path).
    pub t: f64,
    /// Particle count for the averaged scheme.
    pub n_particles: Option<f64>,
    pub r: Option<f64>,
    /// Predicted cost is eps^(-cost_exponent).
    pub cost_exponent: f64,
    /// Minimiser of v over [0, 1]; v' >= 0 for admissible parameters, so
    /// this is 0.
    pub argmin_r: f64,
}

/// Chooses `(tau, delta, t[, N])` to push the predicted W2 error below
/// `epsilon`, and reports the resulting cost exponent.
pub fn choose_params(
    scheme: Scheme,
    epsilon: f64,
    rate: &RateParams,
    r: Option<f64>,
) -> Result<ChosenParams> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CoreError::InvalidParameter {
            name: "epsilon",
            reason: format!("target error must lie in (0, 1), got {epsilon}"),
        });
    }
    let tau = 1.0;
    let delta = epsilon * epsilon;
    let exponent = rate.rate_exponent();
    // v is affine in r with v'(r) = -4(d+2) + 4/(eta AND delta) >= 0.
    let argmin_r = if cost_exponent_awea(rate, 0.0) <= cost_exponent_awea(rate, 1.0) {
        0.0
    } else {
        1.0
    };
    match scheme {
        Scheme::Wea => {
            if r.is_some() {
                return Err(CoreError::InvalidParameter {
                    name: "r",
                    reason: "the single-path scheme takes no blend parameter".into(),
                });
            }
            let t = epsilon.powf(-2.0 / exponent).ceil() * tau;
            Ok(ChosenParams {
                scheme,
                epsilon,
                tau,
                delta,
                t,
                n_particles: None,
                r: None,
                cost_exponent: cost_exponent_wea(rate),
                argmin_r,
            })
        }
        Scheme::Awea => {
            let r = r.unwrap_or(0.0);
            if !(0.0..=1.0).contains(&r) {
                return Err(CoreError::InvalidParameter {
                    name: "r",
                    reason: format!("must lie in [0, 1], got {r}"),
                });
            }
            let t = epsilon.powf(-2.0 * r / exponent).ceil() * tau;
            let n = epsilon
                .powf(-2.0 * (rate.dim() as f64 + 2.0) * (1.0 - r))
                .ceil();
            Ok(ChosenParams {
                scheme,
                epsilon,
                tau,
                delta,
                t,
                n_particles: Some(n),
                r: Some(r),
                cost_exponent: cost_exponent_awea(rate, r),
                argmin_r,
            })
        }
    }
}
