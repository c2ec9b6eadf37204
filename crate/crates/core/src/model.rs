//! Coefficient specifications for measure-dependent SDEs.
//!
//! A [`ModelSpec`] pairs a drift `f(x, mu)` with a diffusion `g(x, mu)`,
//! where `mu` is presented through the read-only [`MeasureView`] trait.
//! The built-in example models only read the mean and the raw second
//! moment, but general coefficients may scan the underlying atoms.

use crate::error::{CoreError, Result};
use crate::measures::{EmpiricalMeasure, GaussianTarget};
use std::fmt;
use std::sync::Arc;

/// Read-only access to an equal-weight measure: moments plus iteration
/// over the atoms.
pub trait MeasureView: Sync {
    fn dim(&self) -> usize;
    /// Number of atoms behind the view (0 for moment-only views).
    fn len(&self) -> usize;
    fn mean(&self) -> &[f64];
    /// The measure applied to |.|^2.
    fn second_raw_moment(&self) -> f64;
    fn points(&self) -> Box<dyn Iterator<Item = &[f64]> + '_>;

    /// sqrt of the raw second moment, clamped at zero to absorb
    /// -1e-16-scale cache noise.
    fn second_moment_sqrt(&self) -> f64 {
        self.second_raw_moment().max(0.0).sqrt()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl MeasureView for EmpiricalMeasure {
    fn dim(&self) -> usize {
        EmpiricalMeasure::dim(self)
    }

    fn len(&self) -> usize {
        EmpiricalMeasure::len(self)
    }

    fn mean(&self) -> &[f64] {
        EmpiricalMeasure::mean(self)
    }

    fn second_raw_moment(&self) -> f64 {
        EmpiricalMeasure::second_raw_moment(self)
    }

    fn points(&self) -> Box<dyn Iterator<Item = &[f64]> + '_> {
        Box::new(self.iter_points())
    }
}

/// Moment-only measure view, for coefficients frozen at known moments
/// (e.g. the exact invariant moments). Exposes no atoms.
#[derive(Debug, Clone)]
pub struct MomentView {
    mean: Vec<f64>,
    second_raw_moment: f64,
}

impl MomentView {
    pub fn new(mean: Vec<f64>, second_raw_moment: f64) -> Self {
        Self {
            mean,
            second_raw_moment,
        }
    }

    pub fn scalar(mean: f64, second_raw_moment: f64) -> Self {
        Self::new(vec![mean], second_raw_moment)
    }
}

impl From<&GaussianTarget> for MomentView {
    fn from(g: &GaussianTarget) -> Self {
        Self::scalar(g.mean(), g.second_raw_moment())
    }
}

impl MeasureView for MomentView {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn len(&self) -> usize {
        0
    }

    fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn second_raw_moment(&self) -> f64 {
        self.second_raw_moment
    }

    fn points(&self) -> Box<dyn Iterator<Item = &[f64]> + '_> {
        Box::new(std::iter::empty())
    }
}

/// Constants of the dissipativity and monotonicity inequalities, plus the
/// Lipschitz/growth constant of the linear-growth condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativityConstants {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_bar1: f64,
    pub kappa_bar2: f64,
    pub rho: f64,
    pub c: f64,
    pub lipschitz: f64,
}

impl DissipativityConstants {
    pub fn new(
        kappa1: f64,
        kappa2: f64,
        kappa_bar1: f64,
        kappa_bar2: f64,
        rho: f64,
        c: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(kappa1 > kappa2 && kappa2 > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "kappa1/kappa2",
                reason: format!("need kappa1 > kappa2 > 0, got {kappa1}, {kappa2}"),
            });
        }
        if !(kappa_bar1 > kappa_bar2 && kappa_bar2 > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "kappa_bar1/kappa_bar2",
                reason: format!("need kappa_bar1 > kappa_bar2 > 0, got {kappa_bar1}, {kappa_bar2}"),
            });
        }
        if !(rho > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "rho",
                reason: format!("must be positive, got {rho}"),
            });
        }
        if !(lipschitz > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "lipschitz",
                reason: format!("must be positive, got {lipschitz}"),
            });
        }
        Ok(Self {
            kappa1,
            kappa2,
            kappa_bar1,
            kappa_bar2,
            rho,
            c,
            lipschitz,
        })
    }

    /// Upper end of the admissible delta range: 1 - kappa_bar2/kappa_bar1.
    pub fn delta_upper(&self) -> f64 {
        1.0 - self.kappa_bar2 / self.kappa_bar1
    }
}

/// Rate parameters driving the convergence exponent eta AND delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    rho: f64,
    dim: usize,
    delta: f64,
}

impl RateParams {
    /// `delta_upper` is the open upper bound 1 - kappa_bar2/kappa_bar1.
    pub fn new(rho: f64, dim: usize, delta: f64, delta_upper: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "rho",
                reason: format!("must be positive, got {rho}"),
            });
        }
        if dim == 0 {
            return Err(CoreError::InvalidParameter {
                name: "dim",
                reason: "must be positive".into(),
            });
        }
        if !(delta > 0.0 && delta < delta_upper) {
            return Err(CoreError::InvalidParameter {
                name: "delta",
                reason: format!("must lie in (0, {delta_upper}), got {delta}"),
            });
        }
        Ok(Self { rho, dim, delta })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// eta = rho / [(d + 2)(rho + 2)].
    pub fn eta(&self) -> f64 {
        self.rho / ((self.dim as f64 + 2.0) * (self.rho + 2.0))
    }

    /// The decay exponent eta AND delta (elementwise minimum).
    pub fn rate_exponent(&self) -> f64 {
        self.eta().min(self.delta)
    }
}

/// Known invariant-law metadata attached to a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InvariantOracle {
    /// The invariant law itself is Gaussian.
    Gaussian(GaussianTarget),
    /// Only the stationary moments are known (1-d).
    Moments { mean: f64, second_raw_moment: f64 },
}

impl InvariantOracle {
    pub fn mean(&self) -> f64 {
        match self {
            Self::Gaussian(g) => g.mean(),
            Self::Moments { mean, .. } => *mean,
        }
    }

    pub fn second_raw_moment(&self) -> f64 {
        match self {
            Self::Gaussian(g) => g.second_raw_moment(),
            Self::Moments {
                second_raw_moment, ..
            } => *second_raw_moment,
        }
    }

    pub fn gaussian(&self) -> Option<GaussianTarget> {
        match self {
            Self::Gaussian(g) => Some(*g),
            Self::Moments { .. } => None,
        }
    }
}

/// Affine coefficient descriptor for the stationary-moment solver:
/// drift `a*x + b*mean + c`, diffusion `p*x + q*sigma + r` with
/// `sigma = sqrt(second raw moment)`. 1-d only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCoefficients {
    pub drift_x: f64,
    pub drift_mean: f64,
    pub drift_const: f64,
    pub diff_x: f64,
    pub diff_sigma: f64,
    pub diff_const: f64,
}

type CoefficientFn = dyn Fn(&[f64], &dyn MeasureView, &mut [f64]) + Send + Sync;

/// Drift/diffusion pair with dimensions and optional analytic metadata.
///
/// Coefficient evaluation is reentrant: the closures receive everything
/// they need and must hold no mutable state.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    state_dim: usize,
    noise_dim: usize,
    drift: Arc<CoefficientFn>,
    diffusion: Arc<CoefficientFn>,
    invariant_oracle: Option<InvariantOracle>,
    constants: Option<DissipativityConstants>,
    linear: Option<LinearCoefficients>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .field("invariant_oracle", &self.invariant_oracle)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        noise_dim: usize,
        drift: impl Fn(&[f64], &dyn MeasureView, &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(&[f64], &dyn MeasureView, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            state_dim,
            noise_dim,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            invariant_oracle: None,
            constants: None,
            linear: None,
        }
    }

    pub fn with_oracle(mut self, oracle: InvariantOracle) -> Self {
        self.invariant_oracle = Some(oracle);
        self
    }

    pub fn with_constants(mut self, constants: DissipativityConstants) -> Self {
        self.constants = Some(constants);
        self
    }

    pub fn with_linear(mut self, linear: LinearCoefficients) -> Self {
        self.linear = Some(linear);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn invariant_oracle(&self) -> Option<&InvariantOracle> {
        self.invariant_oracle.as_ref()
    }

    pub fn constants(&self) -> Option<&DissipativityConstants> {
        self.constants.as_ref()
    }

    pub fn linear(&self) -> Option<&LinearCoefficients> {
        self.linear.as_ref()
    }

    /// Evaluates the drift into `out` (length `state_dim`).
    #[inline]
    pub fn drift_into(&self, x: &[f64], mu: &dyn MeasureView, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.state_dim);
        debug_assert_eq!(out.len(), self.state_dim);
        (self.drift)(x, mu, out);
    }

    /// Evaluates the diffusion into `out`, row-major `state_dim x noise_dim`.
    #[inline]
    pub fn diffusion_into(&self, x: &[f64], mu: &dyn MeasureView, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.state_dim);
        debug_assert_eq!(out.len(), self.state_dim * self.noise_dim);
        (self.diffusion)(x, mu, out);
    }

    pub fn drift(&self, x: &[f64], mu: &dyn MeasureView) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.drift_into(x, mu, &mut out);
        out
    }

    pub fn diffusion(&self, x: &[f64], mu: &dyn MeasureView) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim * self.noise_dim];
        self.diffusion_into(x, mu, &mut out);
        out
    }

    /// Built-in 1-d example models.
    ///
    /// * `example1`: f(x, mu) = -(5x + mean), g(x, mu) = x - sigma - 2
    /// * `example2`: f(x, mu) = -2x - mean, g(x, mu) = 2 - sigma,
    ///   with invariant law N(0, 4/9)
    ///
    /// where sigma = sqrt of the raw second moment of mu. Shipped
    /// dissipativity constants are derived in the module tests; users may
    /// override by rebuilding the spec.
    pub fn builtin(name: &str) -> Result<ModelSpec> {
        match name {
            "example1" => Ok(ModelSpec::new(
                "example1",
                1,
                1,
                |x, mu, out| out[0] = -(5.0 * x[0] + mu.mean()[0]),
                |x, mu, out| out[0] = x[0] - mu.second_moment_sqrt() - 2.0,
            )
            .with_oracle(InvariantOracle::Moments {
                mean: 0.0,
                second_raw_moment: 1.0,
            })
            .with_constants(
                DissipativityConstants::new(5.4, 4.6, 7.0, 3.0, 0.2, 14.4, 12.0)
                    .expect("valid builtin constants"),
            )
            .with_linear(LinearCoefficients {
                drift_x: -5.0,
                drift_mean: -1.0,
                drift_const: 0.0,
                diff_x: 1.0,
                diff_sigma: -1.0,
                diff_const: -2.0,
            })),
            "example2" => Ok(ModelSpec::new(
                "example2",
                1,
                1,
                |x, mu, out| out[0] = -2.0 * x[0] - mu.mean()[0],
                |_x, mu, out| out[0] = 2.0 - mu.second_moment_sqrt(),
            )
            .with_oracle(InvariantOracle::Gaussian(
                GaussianTarget::new(0.0, 4.0 / 9.0).expect("valid builtin target"),
            ))
            .with_constants(
                DissipativityConstants::new(3.0, 2.4, 3.0, 2.0, 0.4, 5.6, 4.0)
                    .expect("valid builtin constants"),
            )
            .with_linear(LinearCoefficients {
                drift_x: -2.0,
                drift_mean: -1.0,
                drift_const: 0.0,
                diff_x: 0.0,
                diff_sigma: -1.0,
                diff_const: 2.0,
            })),
            other => Err(CoreError::UnknownModel(other.into())),
        }
    }
}

/// Solves the stationary moment balance for an affine 1-d model:
/// the mean equation `(a + b) m + c = 0` and the second-moment equation
/// `2 E[x f] + E[g^2] = 0`, selecting the root with `sigma >= 0` and
/// `sigma^2 >= m^2`. Returns `(mean, second raw moment)`.
pub fn stationary_moments_linear(coeffs: &LinearCoefficients) -> Result<(f64, f64)> {
    let LinearCoefficients {
        drift_x: a,
        drift_mean: b,
        drift_const: c,
        diff_x: p,
        diff_sigma: q,
        diff_const: r,
    } = *coeffs;

    let mean_slope = a + b;
    if mean_slope == 0.0 {
        return Err(CoreError::NoStationaryRoot(
            "mean equation is degenerate (a + b = 0)".into(),
        ));
    }
    let m = -c / mean_slope;

    // 2[a s2 + (b m + c) m] + p^2 s2 + 2 p m (q sigma + r) + (q sigma + r)^2 = 0
    // as a quadratic in sigma = sqrt(s2):
    let quad_a = 2.0 * a + p * p + q * q;
    let quad_b = 2.0 * q * (p * m + r);
    let quad_c = 2.0 * m * (b * m + c) + 2.0 * p * m * r + r * r;

    let mut roots: Vec<f64> = Vec::new();
    if quad_a == 0.0 {
        if quad_b == 0.0 {
            return Err(CoreError::NoStationaryRoot(
                "second-moment equation is degenerate".into(),
            ));
        }
        roots.push(-quad_c / quad_b);
    } else {
        let disc = quad_b * quad_b - 4.0 * quad_a * quad_c;
        if disc < 0.0 {
            return Err(CoreError::NoStationaryRoot(
                "second-moment equation has no real root".into(),
            ));
        }
        let sq = disc.sqrt();
        roots.push((-quad_b + sq) / (2.0 * quad_a));
        roots.push((-quad_b - sq) / (2.0 * quad_a));
    }

    let tol = 1e-12 * (1.0 + m * m);
    let mut admissible: Vec<f64> = roots
        .into_iter()
        .map(|s| if s.abs() < 1e-300 { 0.0 } else { s })
        .filter(|&s| s >= 0.0 && s * s + tol >= m * m)
        .collect();
    admissible.dedup_by(|x, y| (*x - *y).abs() <= tol);

    match admissible.len() {
        0 => Err(CoreError::NoStationaryRoot(
            "no root with sigma >= 0 and sigma^2 >= mean^2".into(),
        )),
        1 => Ok((m, admissible[0] * admissible[0])),
        _ => Err(CoreError::NoStationaryRoot(format!(
            "ambiguous roots sigma = {admissible:?}; model outside the oracle's scope"
        ))),
    }
}
