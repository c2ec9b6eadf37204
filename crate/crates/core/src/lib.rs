//! Invariant-measure approximation for dissipative McKean-Vlasov SDEs.
//!
//! The drift and diffusion of a McKean-Vlasov SDE depend on the law of
//! the solution. Its invariant measure can be approximated without ever
//! representing that law: a self-interacting process replaces the law by
//! the weighted empirical measure of its own anchor states, and an
//! Euler-Maruyama discretisation of that process is simulated on a
//! two-scale grid (anchors every `tau`, inner steps of `delta = tau/M`).
//! The running empirical measure of a single path (WEA), or the pooled
//! measure of N interacting particles (AWEA), converges to the invariant
//! law; longer horizons and more particles buy accuracy.
//!
//! The crate provides:
//!
//! * [`measures`] — equal-weight empirical measures with cached moments;
//! * [`wasserstein`] — exact and estimated W2 distances plus the
//!   distance-to-Gaussian quadrature used to score runs;
//! * [`model`] — coefficient specifications, the built-in example models
//!   and their assumption constants;
//! * [`checks`] — sampled audits of the dissipativity, monotonicity and
//!   linear-growth assumptions;
//! * [`noise`] — counter-based Gaussian noise addressed by
//!   `(particle, block, step, component)`;
//! * [`schemes`] — the WEA, AWEA and frozen-measure integrators;
//! * [`analysis`] — strong-error tables, rate regression, Jarque-Bera
//!   testing, kernel density estimation and the computational-cost model;
//! * [`io`] — fixed CSV schemas for all artifacts.

pub mod analysis;
pub mod checks;
pub mod error;
pub mod io;
pub mod measures;
pub mod model;
pub mod noise;
pub mod numeric;
pub mod schemes;
pub mod wasserstein;

pub use error::{CoreError, Result};
pub use measures::{EmpiricalMeasure, GaussianTarget};
pub use model::{
    stationary_moments_linear, DissipativityConstants, InvariantOracle, LinearCoefficients,
    MeasureView, ModelSpec, MomentView, RateParams,
};
pub use schemes::{
    em_inner_step, run_awea, run_frozen_measure_em, run_wea, AnchorGrid, FrozenMeasure,
    InitialSampler, SimConfig, SimOutput,
};
pub use wasserstein::{w2_1d, w2_exact_small, w2_sliced, w2_to_gaussian_1d};
