//! Euler-Maruyama integrators on the two-scale anchor grid.
//!
//! Time is organised in blocks of length `tau`. At the start of block `k`
//! the empirical measure over the anchors collected so far (including the
//! initial state) is frozen; `M` inner steps of size `delta = tau / M`
//! are taken against that frozen measure; the state at the block end
//! becomes anchor `k + 1` and is pushed into the running measure.
//!
//! Three drivers share one step kernel:
//!
//! * [`run_wea`]   — single self-interacting path (N = 1);
//! * [`run_awea`]  — N particles sharing the pooled anchor measure, with
//!   optional in-block parallelism whose output is independent of the
//!   worker count;
//! * [`run_frozen_measure_em`] — classical EM with the measure argument
//!   frozen for all time, the reference dynamics used by moment oracles.
//!
//! With the same seed, `run_awea` with N = 1 reproduces `run_wea` anchor
//! for anchor, bit for bit: both use the same counter-based noise
//! addresses and the same pooled-moment arithmetic.

use crate::error::{CoreError, Result};
use crate::measures::{EmpiricalMeasure, GaussianTarget, MomentAccumulator};
use crate::model::{MeasureView, ModelSpec, MomentView};
use crate::noise::NoiseStream;
use crate::numeric::{as_integer, KahanSum};
use crate::wasserstein::w2_to_gaussian_1d;
use rayon::prelude::*;
use std::time::{Duration, Instant};

/// Quadrature nodes used for snapshot W2-to-oracle diagnostics.
pub const ORACLE_QUAD_NODES: usize = 10_000;

/// The two-scale time structure: anchor period `tau`, `M` inner steps of
/// size `delta = tau / M <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorGrid {
    tau: f64,
    m_steps: usize,
    delta: f64,
}

impl AnchorGrid {
    pub fn from_tau_m(tau: f64, m_steps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CoreError::InvalidParameter {
                name: "tau",
                reason: format!("must be positive and finite, got {tau}"),
            });
        }
        if m_steps == 0 {
            return Err(CoreError::InvalidParameter {
                name: "m_steps",
                reason: "must be at least 1".into(),
            });
        }
        let delta = tau / m_steps as f64;
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(CoreError::InvalidParameter {
                name: "delta",
                reason: format!("step size must lie in (0, 1], got {delta}"),
            });
        }
        Ok(Self {
            tau,
            m_steps,
            delta,
        })
    }

    /// Builds the grid from `(tau, delta)`; `delta` must divide `tau`.
    pub fn from_tau_delta(tau: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(CoreError::InvalidParameter {
                name: "delta",
                reason: format!("step size must lie in (0, 1], got {delta}"),
            });
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CoreError::InvalidParameter {
                name: "tau",
                reason: format!("must be positive and finite, got {tau}"),
            });
        }
        let ratio = tau / delta;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > 4.0 * f64::EPSILON * ratio.max(1.0) {
            return Err(CoreError::InvalidParameter {
                name: "delta",
                reason: format!("delta = {delta} does not divide tau = {tau}"),
            });
        }
        let m_steps = m as usize;
        // Keep the exact user-specified delta; consistency is checked to
        // a few ulps.
        if ((m_steps as f64) * delta - tau).abs() > 4.0 * f64::EPSILON * tau {
            return Err(CoreError::InvalidParameter {
                name: "delta",
                reason: format!("m * delta = {} differs from tau = {tau}", m_steps as f64 * delta),
            });
        }
        Ok(Self {
            tau,
            m_steps,
            delta,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn m_steps(&self) -> usize {
        self.m_steps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// How the initial states are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSampler {
    /// Point mass at the origin (the default).
    Origin,
    /// Point mass at a given state.
    PointMass(Vec<f64>),
    /// Independent Gaussians with common scalar variance per coordinate.
    Gaussian { mean: Vec<f64>, variance: f64 },
    /// One explicit state per particle.
    Explicit(Vec<Vec<f64>>),
}

impl Default for InitialSampler {
    fn default() -> Self {
        Self::Origin
    }
}

impl InitialSampler {
    pub(crate) fn validate(&self, dim: usize, n_particles: usize) -> Result<()> {
        match self {
            Self::Origin => Ok(()),
            Self::PointMass(x) => {
                if x.len() != dim {
                    return Err(CoreError::DimensionMismatch {
                        expected: dim,
                        got: x.len(),
                    });
                }
                Ok(())
            }
            Self::Gaussian { mean, variance } => {
                if mean.len() != dim {
                    return Err(CoreError::DimensionMismatch {
                        expected: dim,
                        got: mean.len(),
                    });
                }
                if !(*variance >= 0.0) {
                    return Err(CoreError::InvalidParameter {
                        name: "initial variance",
                        reason: format!("must be nonnegative, got {variance}"),
                    });
                }
                Ok(())
            }
            Self::Explicit(states) => {
                if states.len() != n_particles {
                    return Err(CoreError::InvalidParameter {
                        name: "initial states",
                        reason: format!(
                            "expected {n_particles} explicit states, got {}",
                            states.len()
                        ),
                    });
                }
                for s in states {
                    if s.len() != dim {
                        return Err(CoreError::DimensionMismatch {
                            expected: dim,
                            got: s.len(),
                        });
                    }
                }
                Ok(())
            }
        }
    }

    pub(crate) fn sample(&self, particle: usize, dim: usize, noise: &NoiseStream) -> Vec<f64> {
        match self {
            Self::Origin => vec![0.0; dim],
            Self::PointMass(x) => x.clone(),
            Self::Gaussian { mean, variance } => {
                let sd = variance.sqrt();
                (0..dim)
                    .map(|c| mean[c] + sd * noise.initial(particle, c))
                    .collect()
            }
            Self::Explicit(states) => states[particle].clone(),
        }
    }
}

/// Simulation request: grid, horizon, particle count, initial law, seed,
/// snapshot schedule, worker count.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: AnchorGrid,
    pub horizon_t: f64,
    pub n_particles: usize,
    pub initial: InitialSampler,
    pub seed: u64,
    /// Anchor times (multiples of tau, up to the horizon) at which pooled
    /// snapshots are recorded.
    pub snapshot_times: Vec<f64>,
    /// Worker threads for the in-block particle updates; results are
    /// identical for any value.
    pub workers: usize,
    /// When true and the model carries a 1-d Gaussian oracle, snapshots
    /// record the W2 distance to it.
    pub oracle_w2: bool,
}

impl SimConfig {
    pub fn new(grid: AnchorGrid, horizon_t: f64) -> Self {
        Self {
            grid,
            horizon_t,
            n_particles: 1,
            initial: InitialSampler::Origin,
            seed: 0,
            snapshot_times: vec![horizon_t],
            workers: 1,
            oracle_w2: false,
        }
    }

    /// Number of tau-blocks in the horizon.
    pub fn n_blocks(&self) -> Result<usize> {
        let ratio = self.horizon_t / self.grid.tau();
        match as_integer(ratio, 1e-9) {
            Some(k) if k >= 1 => Ok(k as usize),
            _ => Err(CoreError::InvalidParameter {
                name: "horizon_t",
                reason: format!(
                    "horizon {} must be a positive integer multiple of tau = {}",
                    self.horizon_t,
                    self.grid.tau()
                ),
            }),
        }
    }

    /// Snapshot times as block indices, sorted and deduplicated.
    fn snapshot_blocks(&self) -> Result<Vec<usize>> {
        let n_blocks = self.n_blocks()?;
        let mut blocks = Vec::with_capacity(self.snapshot_times.len());
        for &t in &self.snapshot_times {
            let k = as_integer(t / self.grid.tau(), 1e-9).ok_or_else(|| {
                CoreError::InvalidParameter {
                    name: "snapshot_times",
                    reason: format!("snapshot time {t} is not a multiple of tau"),
                }
            })?;
            if k < 0 || k as usize > n_blocks {
                return Err(CoreError::InvalidParameter {
                    name: "snapshot_times",
                    reason: format!("snapshot time {t} outside [0, horizon]"),
                });
            }
            blocks.push(k as usize);
        }
        blocks.sort_unstable();
        blocks.dedup();
        Ok(blocks)
    }

    fn validate(&self, model: &ModelSpec) -> Result<()> {
        if self.n_particles == 0 {
            return Err(CoreError::InvalidParameter {
                name: "n_particles",
                reason: "need at least one particle".into(),
            });
        }
        self.initial.validate(model.state_dim(), self.n_particles)?;
        self.n_blocks()?;
        self.snapshot_blocks()?;
        Ok(())
    }
}

/// Pooled diagnostics recorded at one snapshot time.
#[derive(Debug, Clone)]
pub struct SnapshotRecord {
    pub t: f64,
    /// Pooled empirical measure over all particles' anchors up to `t`.
    pub measure: EmpiricalMeasure,
    pub mean: Vec<f64>,
    pub second_raw_moment: f64,
    pub w2_to_oracle: Option<f64>,
    /// Filled by the analysis layer when requested.
    pub jb_stat: Option<f64>,
    pub jb_reject: Option<bool>,
    /// Cumulative measure-weighted coefficient evaluations up to `t`.
    pub coeff_evals: u64,
    pub elapsed: Duration,
}

/// Anchor trajectories plus snapshot diagnostics.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub state_dim: usize,
    pub grid: AnchorGrid,
    pub seed: u64,
    /// `anchors[j]` holds particle j's anchor states, flat,
    /// `(n_blocks + 1) * state_dim` values.
    pub anchors: Vec<Vec<f64>>,
    pub snapshots: Vec<SnapshotRecord>,
    /// Total measure-weighted coefficient evaluations (raw particle-steps
    /// for frozen-measure runs).
    pub coeff_evals: u64,
    pub wall_clock: Duration,
}

impl SimOutput {
    pub fn n_particles(&self) -> usize {
        self.anchors.len()
    }

    pub fn n_anchors(&self) -> usize {
        self.anchors[0].len() / self.state_dim
    }

    pub fn anchor(&self, particle: usize, k: usize) -> &[f64] {
        &self.anchors[particle][k * self.state_dim..(k + 1) * self.state_dim]
    }

    /// Pooled measure over all particles' full anchor trajectories.
    pub fn final_pooled_measure(&self) -> EmpiricalMeasure {
        pooled_measure(&self.anchors, self.state_dim, self.n_anchors())
    }

    pub fn final_snapshot(&self) -> Option<&SnapshotRecord> {
        self.snapshots.last()
    }
}

/// A fixed measure argument for the reference integrator.
#[derive(Debug, Clone)]
pub enum FrozenMeasure {
    /// Exact moments only (no atoms); suited to moment-driven coefficients.
    Moments(MomentView),
    /// A full empirical measure.
    Empirical(EmpiricalMeasure),
}

impl FrozenMeasure {
    pub fn from_gaussian(target: &GaussianTarget) -> Self {
        Self::Moments(MomentView::from(target))
    }

    fn view(&self) -> &dyn MeasureView {
        match self {
            Self::Moments(v) => v,
            Self::Empirical(m) => m,
        }
    }
}

/// One EM inner step: `z + f(z, mu) delta + g(z, mu) sqrt(delta) xi`.
///
/// Errors on a non-finite result; the location fields of the error are
/// zero here (the drivers raise located errors themselves).
pub fn em_inner_step(
    model: &ModelSpec,
    z: &[f64],
    mu: &dyn MeasureView,
    delta: f64,
    xi: &[f64],
) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "delta",
            reason: format!("must be positive, got {delta}"),
        });
    }
    let mut state = z.to_vec();
    let mut drift = vec![0.0; model.state_dim()];
    let mut diffusion = vec![0.0; model.state_dim() * model.noise_dim()];
    let finite = step_into(
        model,
        &mut state,
        mu,
        delta,
        delta.sqrt(),
        xi,
        &mut drift,
        &mut diffusion,
    );
    if finite {
        Ok(state)
    } else {
        Err(CoreError::Divergence {
            particle: 0,
            block: 0,
            inner_step: 0,
            magnitude: norm(z),
        })
    }
}

#[inline]
fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Shared step kernel; returns whether the new state is finite.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn step_into(
    model: &ModelSpec,
    state: &mut [f64],
    mu: &dyn MeasureView,
    delta: f64,
    sqrt_delta: f64,
    xi: &[f64],
    drift_buf: &mut [f64],
    diffusion_buf: &mut [f64],
) -> bool {
    model.drift_into(state, mu, drift_buf);
    model.diffusion_into(state, mu, diffusion_buf);
    let m = xi.len();
    let mut finite = true;
    for (i, s) in state.iter_mut().enumerate() {
        let mut noise_term = 0.0;
        for (c, &x) in xi.iter().enumerate() {
            noise_term += diffusion_buf[i * m + c] * x;
        }
        let v = *s + drift_buf[i] * delta + sqrt_delta * noise_term;
        finite &= v.is_finite();
        *s = v;
    }
    finite
}

/// Frozen view over the pooled anchors of one block: per-particle anchor
/// lists read-only, pooled moments precomputed once.
pub(crate) struct FrozenPoolView<'a> {
    anchor_lists: &'a [Vec<f64>],
    dim: usize,
    anchors_per_particle: usize,
    mean: Vec<f64>,
    second_raw_moment: f64,
}

impl<'a> FrozenPoolView<'a> {
    pub(crate) fn new(anchor_lists: &'a [Vec<f64>], accs: &[MomentAccumulator], dim: usize) -> Self {
        let count = accs[0].count();
        let total = (anchor_lists.len() * count) as f64;
        let mean = (0..dim)
            .map(|c| {
                let mut s = KahanSum::new();
                for acc in accs {
                    s.add(acc.coord_sum(c));
                }
                s.value() / total
            })
            .collect();
        let second_raw_moment = {
            let mut s = KahanSum::new();
            for acc in accs {
                s.add(acc.sq_norm_total());
            }
            s.value() / total
        };
        Self {
            anchor_lists,
            dim,
            anchors_per_particle: count,
            mean,
            second_raw_moment,
        }
    }
}

impl MeasureView for FrozenPoolView<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.anchor_lists.len() * self.anchors_per_particle
    }

    fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn second_raw_moment(&self) -> f64 {
        self.second_raw_moment
    }

    fn points(&self) -> Box<dyn Iterator<Item = &[f64]> + '_> {
        let upto = self.anchors_per_particle * self.dim;
        Box::new(
            self.anchor_lists
                .iter()
                .flat_map(move |list| list[..upto].chunks_exact(self.dim)),
        )
    }
}

fn pooled_measure(anchor_lists: &[Vec<f64>], dim: usize, anchors_per_particle: usize) -> EmpiricalMeasure {
    let mut flat = Vec::with_capacity(anchor_lists.len() * anchors_per_particle * dim);
    let mut acc = MomentAccumulator::new(dim);
    for list in anchor_lists {
        for p in list[..anchors_per_particle * dim].chunks_exact(dim) {
            flat.extend_from_slice(p);
            acc.push(p);
        }
    }
    EmpiricalMeasure::from_parts(dim, flat, acc)
}

/// What the inner loop of one particle-block needs.
struct BlockTask<'a> {
    model: &'a ModelSpec,
    noise: &'a NoiseStream,
    delta: f64,
    sqrt_delta: f64,
    m_steps: usize,
    block: usize,
}

impl BlockTask<'_> {
    /// Advances one particle through the block against `mu`.
    fn run(&self, particle: usize, state: &mut [f64], mu: &dyn MeasureView) -> Result<()> {
        let d = state.len();
        let m_noise = self.model.noise_dim();
        let mut drift = vec![0.0; d];
        let mut diffusion = vec![0.0; d * m_noise];
        let mut xi = vec![0.0; m_noise];
        let mut prev = vec![0.0; d];
        for m in 0..self.m_steps {
            for (c, slot) in xi.iter_mut().enumerate() {
                *slot = self.noise.increment(particle, self.block, m, c);
            }
            prev.copy_from_slice(state);
            let finite = step_into(
                self.model,
                state,
                mu,
                self.delta,
                self.sqrt_delta,
                &xi,
                &mut drift,
                &mut diffusion,
            );
            if !finite {
                return Err(CoreError::Divergence {
                    particle,
                    block: self.block,
                    inner_step: m,
                    magnitude: norm(&prev),
                });
            }
        }
        Ok(())
    }
}

struct Driver<'a> {
    model: &'a ModelSpec,
    config: &'a SimConfig,
    noise: NoiseStream,
    n_blocks: usize,
    snapshot_blocks: Vec<usize>,
    start: Instant,
    /// Per-particle flat anchor storage.
    anchors: Vec<Vec<f64>>,
    accs: Vec<MomentAccumulator>,
    states: Vec<f64>,
    snapshots: Vec<SnapshotRecord>,
    coeff_evals: u64,
}

impl<'a> Driver<'a> {
    fn new(model: &'a ModelSpec, config: &'a SimConfig) -> Result<Self> {
        config.validate(model)?;
        let d = model.state_dim();
        let n = config.n_particles;
        let n_blocks = config.n_blocks()?;
        let noise = NoiseStream::new(config.seed);
        let mut anchors = Vec::with_capacity(n);
        let mut accs = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n * d);
        for j in 0..n {
            let x0 = config.initial.sample(j, d, &noise);
            let mut list = Vec::with_capacity((n_blocks + 1) * d);
            list.extend_from_slice(&x0);
            let mut acc = MomentAccumulator::new(d);
            acc.push(&x0);
            anchors.push(list);
            accs.push(acc);
            states.extend_from_slice(&x0);
        }
        Ok(Self {
            model,
            config,
            noise,
            n_blocks,
            snapshot_blocks: config.snapshot_blocks()?,
            start: Instant::now(),
            anchors,
            accs,
            states,
            snapshots: Vec::new(),
            coeff_evals: 0,
        })
    }

    fn record_snapshot_if_due(&mut self, block: usize) {
        if !self.snapshot_blocks.contains(&block) {
            return;
        }
        let d = self.model.state_dim();
        let measure = pooled_measure(&self.anchors, d, block + 1);
        let mean = measure.mean().to_vec();
        let second_raw_moment = measure.second_raw_moment();
        let w2_to_oracle = if self.config.oracle_w2 && d == 1 {
            self.model
                .invariant_oracle()
                .and_then(|o| o.gaussian())
                .and_then(|g| w2_to_gaussian_1d(&measure, &g, ORACLE_QUAD_NODES).ok())
        } else {
            None
        };
        self.snapshots.push(SnapshotRecord {
            t: block as f64 * self.config.grid.tau(),
            measure,
            mean,
            second_raw_moment,
            w2_to_oracle,
            jb_stat: None,
            jb_reject: None,
            coeff_evals: self.coeff_evals,
            elapsed: self.start.elapsed(),
        });
    }

    /// Runs all blocks; `frozen` overrides the self-interacting measure.
    fn run(mut self, frozen: Option<&FrozenMeasure>) -> Result<SimOutput> {
        let d = self.model.state_dim();
        let n = self.config.n_particles;
        let grid = self.config.grid;
        self.record_snapshot_if_due(0);
        for k in 0..self.n_blocks {
            let task = BlockTask {
                model: self.model,
                noise: &self.noise,
                delta: grid.delta(),
                sqrt_delta: grid.delta().sqrt(),
                m_steps: grid.m_steps(),
                block: k,
            };
            {
                let pool_view;
                let view: &dyn MeasureView = match frozen {
                    Some(f) => f.view(),
                    None => {
                        pool_view = FrozenPoolView::new(&self.anchors, &self.accs, d);
                        &pool_view
                    }
                };
                let workers = self.config.workers.max(1);
                if workers == 1 || n == 1 {
                    for (j, state) in self.states.chunks_mut(d).enumerate() {
                        task.run(j, state, view)?;
                    }
                } else {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(workers.min(n))
                        .build()
                        .map_err(|e| CoreError::InvalidParameter {
                            name: "workers",
                            reason: e.to_string(),
                        })?;
                    let results: Vec<Result<()>> = pool.install(|| {
                        self.states
                            .par_chunks_mut(d)
                            .enumerate()
                            .map(|(j, state)| task.run(j, state, view))
                            .collect()
                    });
                    for r in results {
                        r?;
                    }
                }
            }
            // Weighted evaluation units: measure size per step and particle.
            let measure_atoms = match frozen {
                Some(_) => 1,
                None => n as u64 * (k as u64 + 1),
            };
            self.coeff_evals += n as u64 * grid.m_steps() as u64 * measure_atoms;
            for (j, state) in self.states.chunks(d).enumerate() {
                self.anchors[j].extend_from_slice(state);
                self.accs[j].push(state);
            }
            self.record_snapshot_if_due(k + 1);
        }
        Ok(SimOutput {
            state_dim: d,
            grid,
            seed: self.config.seed,
            anchors: self.anchors,
            snapshots: self.snapshots,
            coeff_evals: self.coeff_evals,
            wall_clock: self.start.elapsed(),
        })
    }
}

/// Single-path weighted empirical approximation: freeze the running
/// anchor measure, run `M` inner steps, push the block-end state as the
/// next anchor. Requires `n_particles == 1`.
pub fn run_wea(model: &ModelSpec, config: &SimConfig) -> Result<SimOutput> {
    if config.n_particles != 1 {
        return Err(CoreError::InvalidParameter {
            name: "n_particles",
            reason: format!(
                "single-path driver needs exactly one particle, got {}",
                config.n_particles
            ),
        });
    }
    // Sequential by nature: each block depends on the previous anchor.
    let mut single = config.clone();
    single.workers = 1;
    Driver::new(model, &single)?.run(None)
}

/// N-particle averaged weighted empirical approximation: all particles
/// share the pooled anchor measure frozen per block, each with its own
/// noise sub-stream. Output does not depend on the particle-update order.
pub fn run_awea(model: &ModelSpec, config: &SimConfig) -> Result<SimOutput> {
    Driver::new(model, config)?.run(None)
}

/// Classical EM with the measure argument fixed for all time; the
/// reference dynamics for moment and mixing oracles.
pub fn run_frozen_measure_em(
    model: &ModelSpec,
    frozen: &FrozenMeasure,
    config: &SimConfig,
) -> Result<SimOutput> {
    let view_dim = frozen.view().dim();
    if view_dim != model.state_dim() {
        return Err(CoreError::DimensionMismatch {
            expected: model.state_dim(),
            got: view_dim,
        });
    }
    Driver::new(model, config)?.run(Some(frozen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::sync::Mutex;

    fn zero_model() -> ModelSpec {
        ModelSpec::new(
            "zero",
            1,
            1,
            |_x, _mu, out| out[0] = 0.0,
            |_x, _mu, out| out[0] = 0.0,
        )
    }

    fn grid(tau: f64, m: usize) -> AnchorGrid {
        AnchorGrid::from_tau_m(tau, m).unwrap()
    }

    #[test]
    fn anchor_grid_construction() {
        let g = AnchorGrid::from_tau_delta(0.5, 2f64.powi(-8)).unwrap();
        assert_eq!(g.m_steps(), 128);
        assert_eq!(g.delta(), 0.00390625);
        assert!(AnchorGrid::from_tau_delta(1.0, 0.3).is_err());
        assert!(AnchorGrid::from_tau_delta(0.5, 0.75).is_err()); // delta > tau
        assert!(AnchorGrid::from_tau_m(1.0, 0).is_err());
        assert!(AnchorGrid::from_tau_m(3.0, 2).is_err()); // delta = 1.5 > 1
        let g = AnchorGrid::from_tau_m(1.0, 3).unwrap();
        assert_abs_diff_eq!(g.delta() * 3.0, 1.0, epsilon = 4.0 * f64::EPSILON);
    }

    #[test]
    fn inner_step_examples() {
        let mu = EmpiricalMeasure::from_scalars(&[0.0]).unwrap();
        let z = em_inner_step(&zero_model(), &[1.5], &mu, 0.25, &[0.7]).unwrap();
        assert_eq!(z, vec![1.5]);

        let e2 = ModelSpec::builtin("example2").unwrap();
        let z = em_inner_step(&e2, &[1.0], &mu, 0.25, &[0.0]).unwrap();
        assert_abs_diff_eq!(z[0], 0.5);
        let z = em_inner_step(&e2, &[1.0], &mu, 0.25, &[0.5]).unwrap();
        assert_abs_diff_eq!(z[0], 1.0);
    }

    #[test]
    fn wea_zero_model_keeps_point_mass() {
        let model = zero_model();
        let mut config = SimConfig::new(grid(1.0, 4), 5.0);
        config.initial = InitialSampler::PointMass(vec![2.5]);
        let out = run_wea(&model, &config).unwrap();
        assert_eq!(out.n_anchors(), 6);
        for k in 0..6 {
            assert_eq!(out.anchor(0, k), &[2.5]);
        }
        let m = out.final_pooled_measure();
        assert_eq!(m.mean(), &[2.5]);
        assert_relative_eq!(m.second_raw_moment(), 6.25, max_relative = 1e-12);
    }

    #[test]
    fn wea_deterministic_contraction_closed_form() {
        // f = -x, g = 0, tau = 1, M = 2: each block multiplies the state
        // by (1 - 1/2)^2 = 1/4, so anchor_k = 0.25^k exactly (dyadic).
        let model = ModelSpec::new(
            "contraction",
            1,
            1,
            |x, _mu, out| out[0] = -x[0],
            |_x, _mu, out| out[0] = 0.0,
        );
        let mut config = SimConfig::new(grid(1.0, 2), 4.0);
        config.initial = InitialSampler::PointMass(vec![1.0]);
        let out = run_wea(&model, &config).unwrap();
        for k in 0..=4 {
            assert_eq!(out.anchor(0, k)[0], 0.25f64.powi(k as i32));
        }
    }

    #[test]
    fn measure_is_frozen_within_blocks_and_excludes_own_anchor() {
        // Record the measure size seen by every drift evaluation.
        let seen = std::sync::Arc::new(Mutex::new(Vec::new()));
        let seen_in = seen.clone();
        let model = ModelSpec::new(
            "probe",
            1,
            1,
            move |_x, mu, out| {
                seen_in.lock().unwrap().push(mu.len());
                out[0] = 0.0;
            },
            |_x, _mu, out| out[0] = 0.0,
        );
        let config = SimConfig::new(grid(1.0, 2), 3.0);
        run_wea(&model, &config).unwrap();
        let log = seen.lock().unwrap();
        assert_eq!(&*log, &[1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn awea_matches_wea_bit_for_bit_at_n1() {
        for (name, tau, m) in [("example2", 0.5, 8), ("example1", 1.0, 4)] {
            let model = ModelSpec::builtin(name).unwrap();
            for seed in [0u64, 7, 42] {
                let mut config = SimConfig::new(grid(tau, m), 4.0 * tau);
                config.seed = seed;
                config.initial = InitialSampler::Gaussian {
                    mean: vec![0.0],
                    variance: 0.25,
                };
                let wea = run_wea(&model, &config).unwrap();
                let awea = run_awea(&model, &config).unwrap();
                assert_eq!(wea.n_anchors(), awea.n_anchors());
                for k in 0..wea.n_anchors() {
                    assert_eq!(
                        wea.anchor(0, k)[0].to_bits(),
                        awea.anchor(0, k)[0].to_bits(),
                        "anchor {k} differs for {name} seed {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn awea_is_worker_count_independent() {
        let model = ModelSpec::builtin("example2").unwrap();
        let mut config = SimConfig::new(grid(0.5, 16), 8.0);
        config.n_particles = 8;
        config.seed = 3;
        config.snapshot_times = vec![4.0, 8.0];
        config.oracle_w2 = true;
        let run = |workers: usize| {
            let mut c = config.clone();
            c.workers = workers;
            run_awea(&model, &c).unwrap()
        };
        let serial = run(1);
        let parallel = run(4);
        for j in 0..8 {
            assert_eq!(serial.anchors[j], parallel.anchors[j]);
        }
        for (a, b) in serial.snapshots.iter().zip(&parallel.snapshots) {
            assert_eq!(a.mean[0].to_bits(), b.mean[0].to_bits());
            assert_eq!(
                a.second_raw_moment.to_bits(),
                b.second_raw_moment.to_bits()
            );
            assert_eq!(a.w2_to_oracle.map(f64::to_bits), b.w2_to_oracle.map(f64::to_bits));
        }
    }

    #[test]
    fn awea_zero_model_pools_initials() {
        let model = zero_model();
        let mut config = SimConfig::new(grid(1.0, 2), 3.0);
        config.n_particles = 3;
        config.initial = InitialSampler::Explicit(vec![vec![0.0], vec![1.0], vec![2.0]]);
        config.snapshot_times = vec![0.0, 1.0, 2.0, 3.0];
        let out = run_awea(&model, &config).unwrap();
        assert_eq!(out.snapshots.len(), 4);
        for snap in &out.snapshots {
            assert_relative_eq!(snap.mean[0], 1.0, max_relative = 1e-12);
            assert_relative_eq!(snap.second_raw_moment, 5.0 / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn frozen_run_zero_model_is_constant() {
        let model = zero_model();
        let mut config = SimConfig::new(grid(1.0, 4), 3.0);
        config.initial = InitialSampler::PointMass(vec![-1.0]);
        let frozen = FrozenMeasure::Moments(MomentView::scalar(0.0, 0.0));
        let out = run_frozen_measure_em(&model, &frozen, &config).unwrap();
        for k in 0..out.n_anchors() {
            assert_eq!(out.anchor(0, k), &[-1.0]);
        }
    }

    #[test]
    fn frozen_example2_at_delta0_reaches_ou_variance() {
        // Frozen at delta_0 the dynamics reduce to dX = -2X dt + 2 dB with
        // stationary second moment 1.
        let model = ModelSpec::builtin("example2").unwrap();
        let frozen = FrozenMeasure::Moments(MomentView::scalar(0.0, 0.0));
        let mut config = SimConfig::new(AnchorGrid::from_tau_delta(0.5, 2f64.powi(-8)).unwrap(), 400.0);
        config.n_particles = 8;
        config.seed = 11;
        let out = run_frozen_measure_em(&model, &frozen, &config).unwrap();
        // Discard a burn-in prefix, then average |X|^2 over anchors.
        let burn = 40;
        let mut acc = 0.0;
        let mut count = 0;
        for j in 0..out.n_particles() {
            for k in burn..out.n_anchors() {
                acc += out.anchor(j, k)[0].powi(2);
                count += 1;
            }
        }
        let second = acc / count as f64;
        assert_abs_diff_eq!(second, 1.0, epsilon = 0.05);
    }

    #[test]
    fn divergence_is_located() {
        let model = ModelSpec::new(
            "cubic-blowup",
            1,
            1,
            |x, _mu, out| out[0] = x[0] * x[0] * x[0],
            |_x, _mu, out| out[0] = 0.0,
        );
        let mut config = SimConfig::new(grid(1.0, 2), 4.0);
        config.initial = InitialSampler::PointMass(vec![10.0]);
        let err = run_wea(&model, &config).unwrap_err();
        match err {
            CoreError::Divergence {
                particle,
                magnitude,
                ..
            } => {
                assert_eq!(particle, 0);
                assert!(magnitude > 10.0);
            }
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn config_validation_errors() {
        let model = ModelSpec::builtin("example2").unwrap();
        let mut config = SimConfig::new(grid(1.0, 2), 10.0);
        config.grid = AnchorGrid::from_tau_m(3.0, 3).unwrap();
        assert!(matches!(
            run_wea(&model, &config),
            Err(CoreError::InvalidParameter { name: "horizon_t", .. })
        ));

        let mut config = SimConfig::new(grid(1.0, 2), 4.0);
        config.snapshot_times = vec![2.5];
        assert!(run_wea(&model, &config).is_err());

        let mut config = SimConfig::new(grid(1.0, 2), 4.0);
        config.snapshot_times = vec![5.0];
        assert!(run_wea(&model, &config).is_err());

        let mut config = SimConfig::new(grid(1.0, 2), 4.0);
        config.n_particles = 2;
        assert!(run_wea(&model, &config).is_err());

        let mut config = SimConfig::new(grid(1.0, 2), 4.0);
        config.initial = InitialSampler::Explicit(vec![vec![0.0], vec![1.0]]);
        assert!(matches!(
            run_wea(&model, &config),
            Err(CoreError::InvalidParameter { name: "initial states", .. })
        ));
    }

    #[test]
    fn weighted_eval_count_matches_block_sums() {
        // WEA: M * sum_{k=0}^{K-1} (k+1); AWEA: N^2 * that.
        let model = ModelSpec::builtin("example2").unwrap();
        let mut config = SimConfig::new(grid(1.0, 2), 4.0);
        let out = run_wea(&model, &config).unwrap();
        assert_eq!(out.coeff_evals, 2 * (1 + 2 + 3 + 4));

        config.n_particles = 3;
        let out = run_awea(&model, &config).unwrap();
        assert_eq!(out.coeff_evals, 9 * 2 * (1 + 2 + 3 + 4));
    }

    #[test]
    fn running_second_moment_stays_bounded() {
        // Desk-scale surrogate for the uniform numerical moment bound:
        // across 20 seeds, the per-anchor mean square after burn-in never
        // exceeds 5x the oracle second moment.
        let model = ModelSpec::builtin("example2").unwrap();
        let oracle_second = 4.0 / 9.0;
        let g = AnchorGrid::from_tau_delta(0.5, 2f64.powi(-8)).unwrap();
        let n_seeds = 20;
        let horizon = 50.0;
        let mut per_anchor_sq = vec![0.0; (horizon / 0.5) as usize + 1];
        for seed in 0..n_seeds {
            let mut config = SimConfig::new(g, horizon);
            config.seed = seed;
            let out = run_wea(&model, &config).unwrap();
            for k in 0..out.n_anchors() {
                per_anchor_sq[k] += out.anchor(0, k)[0].powi(2) / n_seeds as f64;
            }
        }
        for (k, &ms) in per_anchor_sq.iter().enumerate() {
            let t = k as f64 * 0.5;
            if t >= 10.0 {
                assert!(
                    ms <= 5.0 * oracle_second,
                    "mean square {ms} at t = {t} exceeds bound"
                );
            }
        }
    }
}
