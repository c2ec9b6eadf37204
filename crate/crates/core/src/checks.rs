//! Numeric audits of the dissipativity, monotonicity and linear-growth
//! assumptions.
//!
//! The checks are sampled, not symbolic: a positive maximum is evidence
//! of a violation (with the witness attached), a nonpositive maximum is
//! sampled satisfaction only, never a proof. Reports say so explicitly.

use crate::error::{CoreError, Result};
use crate::measures::EmpiricalMeasure;
use crate::model::{DissipativityConstants, MeasureView, ModelSpec};
use crate::wasserstein::{w2_1d, w2_exact_small, DEFAULT_ASSIGNMENT_LIMIT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// LHS minus RHS of the dissipativity inequality
///
/// `2 x^T f(x, mu) + (1 + rho) |g(x, mu)|^2 <= -kappa1 |x|^2 + kappa2 mu(|.|^2) + C`
///
/// at a single `(x, mu)`. Nonpositive means satisfied there.
pub fn check_dissipativity_pointwise(
    model: &ModelSpec,
    constants: &DissipativityConstants,
    x: &[f64],
    mu: &dyn MeasureView,
) -> f64 {
    let f = model.drift(x, mu);
    let g = model.diffusion(x, mu);
    let lhs = 2.0 * dot(x, &f) + (1.0 + constants.rho) * sq_norm(&g);
    let rhs = -constants.kappa1 * sq_norm(x) + constants.kappa2 * mu.second_raw_moment()
        + constants.c;
    lhs - rhs
}

/// LHS minus RHS of the monotonicity inequality
///
/// `2 (x1-x2)^T (f(x1,mu1) - f(x2,mu2)) + |g(x1,mu1) - g(x2,mu2)|^2
///  <= -kappa_bar1 |x1-x2|^2 + kappa_bar2 W2^2(mu1, mu2)`
///
/// with the W2 distance computed exactly (quantile coupling in 1-d,
/// assignment otherwise).
pub fn check_monotonicity_pointwise(
    model: &ModelSpec,
    constants: &DissipativityConstants,
    x1: &[f64],
    x2: &[f64],
    mu1: &EmpiricalMeasure,
    mu2: &EmpiricalMeasure,
) -> Result<f64> {
    let w2 = if mu1.dim() == 1 {
        w2_1d(mu1, mu2)?
    } else {
        w2_exact_small(mu1, mu2, DEFAULT_ASSIGNMENT_LIMIT)?
    };
    let f1 = model.drift(x1, mu1);
    let f2 = model.drift(x2, mu2);
    let g1 = model.diffusion(x1, mu1);
    let g2 = model.diffusion(x2, mu2);
    let dx: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| a - b).collect();
    let df: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a - b).collect();
    let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
    let lhs = 2.0 * dot(&dx, &df) + sq_norm(&dg);
    let rhs = -constants.kappa_bar1 * sq_norm(&dx) + constants.kappa_bar2 * w2 * w2;
    Ok(lhs - rhs)
}

/// Box radius for state draws and size/radius for the random small
/// measures used by [`check_assumptions_sampled`].
#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    pub state_radius: f64,
    pub measure_max_points: usize,
    pub measure_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            state_radius: 5.0,
            measure_max_points: 6,
            measure_radius: 3.0,
        }
    }
}

/// Maximum observed violation of one inequality plus its witness.
#[derive(Debug, Clone)]
pub struct ViolationStat {
    pub max_violation: f64,
    pub witness: String,
}

impl ViolationStat {
    fn start() -> Self {
        Self {
            max_violation: f64::NEG_INFINITY,
            witness: String::new(),
        }
    }

    fn observe(&mut self, violation: f64, witness: impl FnOnce() -> String) {
        if violation > self.max_violation {
            self.max_violation = violation;
            self.witness = witness();
        }
    }

    pub fn satisfied(&self) -> bool {
        self.max_violation <= 0.0
    }
}

/// Sampled maxima of the five inequality violations.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub model: String,
    pub n_samples: usize,
    pub seed: u64,
    /// Dissipativity inequality.
    pub dissipativity: ViolationStat,
    /// Monotonicity inequality.
    pub monotonicity: ViolationStat,
    /// `|f(x,mu) - f(y,mu)| <= L |x-y|`.
    pub lipschitz_drift: ViolationStat,
    /// `|g(x,mu) - g(y,mu)| <= L |x-y|`.
    pub lipschitz_diffusion: ViolationStat,
    /// `|g(x,mu)|^2 <= L (1 + |x|^2 + mu(|.|^2))`.
    pub growth: ViolationStat,
}

impl AssumptionReport {
    pub fn all_satisfied(&self) -> bool {
        self.iter().all(|(_, s)| s.satisfied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &ViolationStat)> {
        [
            ("dissipativity", &self.dissipativity),
            ("monotonicity", &self.monotonicity),
            ("lipschitz_drift", &self.lipschitz_drift),
            ("lipschitz_diffusion", &self.lipschitz_diffusion),
            ("growth", &self.growth),
        ]
        .into_iter()
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "assumption audit for `{}` ({} samples, seed {})",
            self.model, self.n_samples, self.seed
        )?;
        for (name, stat) in self.iter() {
            writeln!(
                f,
                "  {:<20} max violation {:+.6e}  {}  [{}]",
                name,
                stat.max_violation,
                if stat.satisfied() { "ok" } else { "VIOLATED" },
                stat.witness
            )?;
        }
        writeln!(
            f,
            "  note: sampled evidence only; a nonpositive maximum is not a proof"
        )
    }
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect()
}

fn random_measure(
    rng: &mut ChaCha8Rng,
    dim: usize,
    cfg: &SamplerConfig,
    n_points: usize,
) -> EmpiricalMeasure {
    let pts: Vec<Vec<f64>> = (0..n_points)
        .map(|_| random_state(rng, dim, cfg.measure_radius))
        .collect();
    EmpiricalMeasure::from_anchors(&pts).expect("nonempty uniform measure")
}

/// Draws `n_samples` random `(x, mu)` configurations and reports the
/// maximum violation of each inequality. Deterministic given `seed`.
pub fn check_assumptions_sampled(
    model: &ModelSpec,
    constants: &DissipativityConstants,
    sampler: &SamplerConfig,
    n_samples: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    if n_samples == 0 {
        return Err(CoreError::InvalidParameter {
            name: "n_samples",
            reason: "need at least one sample".into(),
        });
    }
    let dim = model.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AssumptionReport {
        model: model.name().to_string(),
        n_samples,
        seed,
        dissipativity: ViolationStat::start(),
        monotonicity: ViolationStat::start(),
        lipschitz_drift: ViolationStat::start(),
        lipschitz_diffusion: ViolationStat::start(),
        growth: ViolationStat::start(),
    };

    for _ in 0..n_samples {
        let x1 = random_state(&mut rng, dim, sampler.state_radius);
        let x2 = random_state(&mut rng, dim, sampler.state_radius);
        let n_points = rng.gen_range(1..=sampler.measure_max_points);
        let mu1 = random_measure(&mut rng, dim, sampler, n_points);
        // Equal point counts keep the exact assignment route applicable in d > 1.
        let mu2 = random_measure(&mut rng, dim, sampler, n_points);

        let v = check_dissipativity_pointwise(model, constants, &x1, &mu1);
        report
            .dissipativity
            .observe(v, || format!("x={x1:?}, mu n={n_points}"));

        let v = check_monotonicity_pointwise(model, constants, &x1, &x2, &mu1, &mu2)?;
        report
            .monotonicity
            .observe(v, || format!("x1={x1:?}, x2={x2:?}, mu n={n_points}"));

        let f1 = model.drift(&x1, &mu1);
        let f2 = model.drift(&x2, &mu1);
        let g1 = model.diffusion(&x1, &mu1);
        let g2 = model.diffusion(&x2, &mu1);
        let dist = sq_norm(
            &x1.iter().zip(&x2).map(|(a, b)| a - b).collect::<Vec<_>>(),
        )
        .sqrt();
        let df = sq_norm(&f1.iter().zip(&f2).map(|(a, b)| a - b).collect::<Vec<_>>()).sqrt();
        let dg = sq_norm(&g1.iter().zip(&g2).map(|(a, b)| a - b).collect::<Vec<_>>()).sqrt();
        report
            .lipschitz_drift
            .observe(df - constants.lipschitz * dist, || {
                format!("x={x1:?}, y={x2:?}")
            });
        report
            .lipschitz_diffusion
            .observe(dg - constants.lipschitz * dist, || {
                format!("x={x1:?}, y={x2:?}")
            });

        let growth_violation = sq_norm(&g1)
            - constants.lipschitz * (1.0 + sq_norm(&x1) + mu1.second_raw_moment());
        report
            .growth
            .observe(growth_violation, || format!("x={x1:?}, mu n={n_points}"));
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn delta0() -> EmpiricalMeasure {
        EmpiricalMeasure::from_scalars(&[0.0]).unwrap()
    }

    /// f = -x, g = 0 with kappa1 = 2, kappa2 = 0.5, rho = 1, C = 0 at
    /// x = 1, mu = delta_0 sits exactly on the boundary.
    #[test]
    fn dissipativity_equality_case() {
        let model = ModelSpec::new(
            "contraction",
            1,
            1,
            |x, _mu, out| out[0] = -x[0],
            |_x, _mu, out| out[0] = 0.0,
        );
        let constants = DissipativityConstants::new(2.0, 0.5, 2.0, 0.5, 1.0, 0.0, 1.0).unwrap();
        let v = check_dissipativity_pointwise(&model, &constants, &[1.0], &delta0());
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn anti_dissipative_drift_violates() {
        let model = ModelSpec::new(
            "expansion",
            1,
            1,
            |x, _mu, out| out[0] = x[0],
            |_x, _mu, out| out[0] = 0.0,
        );
        let constants = DissipativityConstants::new(2.0, 0.5, 2.0, 0.5, 1.0, 0.0, 1.0).unwrap();
        let v = check_dissipativity_pointwise(&model, &constants, &[10.0], &delta0());
        assert!(v > 0.0, "expected violation, got {v}");
    }

    #[test]
    fn monotonicity_identical_arguments() {
        let model = ModelSpec::builtin("example2").unwrap();
        let constants = *model.constants().unwrap();
        let mu = EmpiricalMeasure::from_scalars(&[0.5, -0.5]).unwrap();
        let v =
            check_monotonicity_pointwise(&model, &constants, &[1.0], &[1.0], &mu, &mu).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
    }

    /// With zero coefficients the inequality reduces to
    /// 0 <= -kappa_bar1 |dx|^2 + kappa_bar2 W2^2, whose sign genuinely
    /// depends on the arguments; the checker must report it as-is.
    #[test]
    fn monotonicity_zero_model_sign_is_honest() {
        let model = ModelSpec::new(
            "zero",
            1,
            1,
            |_x, _mu, out| out[0] = 0.0,
            |_x, _mu, out| out[0] = 0.0,
        );
        let constants = DissipativityConstants::new(2.0, 1.0, 2.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let far = EmpiricalMeasure::from_scalars(&[0.0]).unwrap();
        let near = EmpiricalMeasure::from_scalars(&[0.1]).unwrap();
        // kappa_bar1 |dx|^2 = 2 > kappa_bar2 W2^2 = 0.01: violation positive.
        let v = check_monotonicity_pointwise(&model, &constants, &[1.0], &[0.0], &far, &near)
            .unwrap();
        assert!(v > 0.0);
        // |dx| = 0: violation is -kappa_bar2 W2^2 <= 0.
        let v = check_monotonicity_pointwise(&model, &constants, &[1.0], &[1.0], &far, &near)
            .unwrap();
        assert!(v <= 0.0);
    }

    #[test]
    fn example2_sampled_assumptions_hold() {
        let model = ModelSpec::builtin("example2").unwrap();
        let constants = *model.constants().unwrap();
        let report = check_assumptions_sampled(
            &model,
            &constants,
            &SamplerConfig::default(),
            10_000,
            42,
        )
        .unwrap();
        assert!(
            report.all_satisfied(),
            "expected sampled satisfaction:\n{report}"
        );
        for (_, stat) in report.iter() {
            assert!(stat.max_violation <= 1e-9);
        }
    }

    #[test]
    fn example1_sampled_assumptions_hold() {
        let model = ModelSpec::builtin("example1").unwrap();
        let constants = *model.constants().unwrap();
        let report = check_assumptions_sampled(
            &model,
            &constants,
            &SamplerConfig::default(),
            10_000,
            42,
        )
        .unwrap();
        assert!(
            report.all_satisfied(),
            "expected sampled satisfaction:\n{report}"
        );
    }

    #[test]
    fn zero_model_sampled_maxima_nonpositive() {
        let model = ModelSpec::new(
            "zero",
            1,
            1,
            |_x, _mu, out| out[0] = 0.0,
            |_x, _mu, out| out[0] = 0.0,
        );
        // With f = g = 0 the dissipativity LHS is 0, so the inequality
        // needs C >= kappa1 |x|^2 over the sampling box (radius 5 here).
        let constants = DissipativityConstants::new(2.0, 1.0, 2.0, 1.0, 1.0, 60.0, 1.0).unwrap();
        let report =
            check_assumptions_sampled(&model, &constants, &SamplerConfig::default(), 2_000, 7)
                .unwrap();
        assert!(report.dissipativity.max_violation <= 0.0);
        assert!(report.lipschitz_drift.max_violation <= 0.0);
        assert!(report.lipschitz_diffusion.max_violation <= 0.0);
        assert!(report.growth.max_violation <= 0.0);
        // Monotonicity with kappa_bar1 > 0 cannot hold for the zero model
        // whenever |x1 - x2| dominates W2(mu1, mu2); the report must say so.
        assert!(report.monotonicity.max_violation > 0.0);
    }

    #[test]
    fn quadratic_diffusion_breaks_growth_bound() {
        let model = ModelSpec::new(
            "quadratic",
            1,
            1,
            |_x, _mu, out| out[0] = 0.0,
            |x, _mu, out| out[0] = x[0] * x[0],
        );
        let constants = DissipativityConstants::new(2.0, 1.0, 2.0, 1.0, 1.0, 0.0, 10.0).unwrap();
        let sampler = SamplerConfig {
            state_radius: 10.0,
            ..SamplerConfig::default()
        };
        let report = check_assumptions_sampled(&model, &constants, &sampler, 5_000, 1).unwrap();
        assert!(report.growth.max_violation > 0.0);
        assert!(!report.all_satisfied());
        // The worst violation sits near the box edge.
        assert!(report.growth.witness.contains("x="));
    }

    #[test]
    fn report_is_deterministic_and_labelled() {
        let model = ModelSpec::builtin("example2").unwrap();
        let constants = *model.constants().unwrap();
        let a = check_assumptions_sampled(&model, &constants, &SamplerConfig::default(), 500, 3)
            .unwrap();
        let b = check_assumptions_sampled(&model, &constants, &SamplerConfig::default(), 500, 3)
            .unwrap();
        assert_eq!(a.dissipativity.max_violation, b.dissipativity.max_violation);
        assert_eq!(a.monotonicity.max_violation, b.monotonicity.max_violation);
        let text = a.to_string();
        assert!(text.contains("not a proof"));
    }
}
