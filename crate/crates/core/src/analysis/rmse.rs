//! Coupled-refinement strong-error study.
//!
//! A reference path at the finest step size and one path per coarse step
//! size are driven by the same Brownian motion: every coarse increment is
//! the sum of the fine increments it covers, rescaled to a standard
//! normal. Each resolution maintains its own anchor measure, so every
//! path is a genuine self-interacting EM run at that resolution.
//!
//! `RMSE(t, delta) = sqrt( mean over paths of |Z^fine_t - Z^delta_t|^2 )`.

use crate::analysis::rate::{fit_rate, RateFit};
use crate::error::{CoreError, Result};
use crate::measures::MomentAccumulator;
use crate::model::{MeasureView, ModelSpec};
use crate::noise::NoiseStream;
use crate::numeric::{as_integer, KahanSum};
use crate::schemes::{step_into, AnchorGrid, FrozenPoolView, InitialSampler};
use rayon::prelude::*;

/// RMSE per coarse resolution and evaluation time.
#[derive(Debug, Clone)]
pub struct RmseTable {
    pub eval_times: Vec<f64>,
    pub reference: AnchorGrid,
    pub rows: Vec<RmseRow>,
    pub n_paths: usize,
}

#[derive(Debug, Clone)]
pub struct RmseRow {
    pub grid: AnchorGrid,
    /// RMSE at each entry of `eval_times`.
    pub rmse: Vec<f64>,
}

impl RmseTable {
    /// `(log2_delta, log2_rmse)` points at one evaluation time.
    pub fn fit_points(&self, time_index: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|row| (row.grid.delta().log2(), row.rmse[time_index].log2()))
            .collect()
    }

    /// One OLS fit per evaluation time.
    pub fn fits(&self) -> Result<Vec<(f64, RateFit)>> {
        self.eval_times
            .iter()
            .enumerate()
            .map(|(i, &t)| Ok((t, fit_rate(&self.fit_points(i))?)))
            .collect()
    }
}

struct Level {
    m_steps: usize,
    /// Fine steps per step of this level (1 for the reference).
    ratio: usize,
    delta: f64,
    sqrt_delta: f64,
    inv_sqrt_ratio: f64,
    /// Global step index at which each eval time is reached.
    eval_steps: Vec<u64>,
}

fn build_level(grid: &AnchorGrid, fine_m: usize, t_eval: &[f64]) -> Result<Level> {
    let m = grid.m_steps();
    if fine_m % m != 0 || !(fine_m / m).is_power_of_two() {
        return Err(CoreError::InvalidParameter {
            name: "grids_coarse",
            reason: format!(
                "coarse delta must be the reference delta times a power of two \
                 (reference M = {fine_m}, coarse M = {m})"
            ),
        });
    }
    let ratio = fine_m / m;
    let mut eval_steps = Vec::with_capacity(t_eval.len());
    for &t in t_eval {
        let steps = as_integer(t / grid.delta(), 1e-9).filter(|&s| s > 0).ok_or_else(|| {
            CoreError::InvalidParameter {
                name: "t_eval",
                reason: format!(
                    "evaluation time {t} is not on the grid with delta = {}",
                    grid.delta()
                ),
            }
        })?;
        eval_steps.push(steps as u64);
    }
    Ok(Level {
        m_steps: m,
        ratio,
        delta: grid.delta(),
        sqrt_delta: grid.delta().sqrt(),
        inv_sqrt_ratio: 1.0 / (ratio as f64).sqrt(),
        eval_steps,
    })
}

struct PathLevelState {
    state: Vec<f64>,
    anchors: Vec<f64>,
    acc: MomentAccumulator,
    /// Captured state per eval time.
    captured: Vec<Option<Vec<f64>>>,
}

impl PathLevelState {
    fn new(x0: &[f64], dim: usize, n_eval: usize) -> Self {
        let mut acc = MomentAccumulator::new(dim);
        acc.push(x0);
        Self {
            state: x0.to_vec(),
            anchors: x0.to_vec(),
            acc,
            captured: vec![None; n_eval],
        }
    }

}

fn capture_if_due(
    level: &Level,
    global_step: u64,
    state: &[f64],
    captured: &mut [Option<Vec<f64>>],
) {
    for (i, &s) in level.eval_steps.iter().enumerate() {
        if s == global_step && captured[i].is_none() {
            captured[i] = Some(state.to_vec());
        }
    }
}

/// Simulates coupled fine/coarse self-interacting paths and tabulates the
/// strong error at `t_eval`. `n_paths` are distributed across `workers`;
/// results are independent of the worker count.
#[allow(clippy::too_many_arguments)]
pub fn rmse_paths(
    model: &ModelSpec,
    grid_fine: AnchorGrid,
    grids_coarse: &[AnchorGrid],
    t_eval: &[f64],
    n_paths: usize,
    seed: u64,
    initial: &InitialSampler,
    workers: usize,
) -> Result<RmseTable> {
    if grids_coarse.is_empty() {
        return Err(CoreError::InvalidParameter {
            name: "grids_coarse",
            reason: "need at least one coarse grid".into(),
        });
    }
    if t_eval.is_empty() {
        return Err(CoreError::InvalidParameter {
            name: "t_eval",
            reason: "need at least one evaluation time".into(),
        });
    }
    if n_paths == 0 {
        return Err(CoreError::InvalidParameter {
            name: "n_paths",
            reason: "need at least one path".into(),
        });
    }
    let tau = grid_fine.tau();
    for g in grids_coarse {
        if (g.tau() - tau).abs() > 1e-12 * tau.max(1.0) {
            return Err(CoreError::InvalidParameter {
                name: "grids_coarse",
                reason: "all grids must share the anchor period tau".into(),
            });
        }
    }
    initial.validate(model.state_dim(), n_paths)?;

    let fine = build_level(&grid_fine, grid_fine.m_steps(), t_eval)?;
    let coarse: Vec<Level> = grids_coarse
        .iter()
        .map(|g| build_level(g, grid_fine.m_steps(), t_eval))
        .collect::<Result<_>>()?;

    // Enough full blocks to pass every evaluation time.
    let max_fine_step = fine.eval_steps.iter().copied().max().unwrap();
    let n_blocks = max_fine_step.div_ceil(fine.m_steps as u64) as usize;

    let noise = NoiseStream::new(seed);
    let run_path = |j: usize| -> Result<Vec<Vec<f64>>> {
        simulate_coupled_path(model, &fine, &coarse, n_blocks, j, &noise, initial)
    };

    let per_path: Vec<Result<Vec<Vec<f64>>>> = if workers > 1 && n_paths > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.min(n_paths))
            .build()
            .map_err(|e| CoreError::InvalidParameter {
                name: "workers",
                reason: e.to_string(),
            })?;
        pool.install(|| (0..n_paths).into_par_iter().map(run_path).collect())
    } else {
        (0..n_paths).map(run_path).collect()
    };

    // Reduce in path order.
    let n_eval = t_eval.len();
    let mut sums = vec![vec![KahanSum::new(); n_eval]; coarse.len()];
    for result in per_path {
        let sq_errors = result?;
        for (level_sums, level_errs) in sums.iter_mut().zip(&sq_errors) {
            for (slot, &e) in level_sums.iter_mut().zip(level_errs) {
                slot.add(e);
            }
        }
    }
    let rows = grids_coarse
        .iter()
        .zip(&sums)
        .map(|(grid, level_sums)| RmseRow {
            grid: *grid,
            rmse: level_sums
                .iter()
                .map(|s| (s.value() / n_paths as f64).max(0.0).sqrt())
                .collect(),
        })
        .collect();
    Ok(RmseTable {
        eval_times: t_eval.to_vec(),
        reference: grid_fine,
        rows,
        n_paths,
    })
}

fn simulate_coupled_path(
    model: &ModelSpec,
    fine: &Level,
    coarse: &[Level],
    n_blocks: usize,
    path: usize,
    noise: &NoiseStream,
    initial: &InitialSampler,
) -> Result<Vec<Vec<f64>>> {
    let d = model.state_dim();
    let m_noise = model.noise_dim();
    let n_eval = fine.eval_steps.len();
    let x0 = initial.sample(path, d, noise);

    let mut fine_state = PathLevelState::new(&x0, d, n_eval);
    let mut coarse_states: Vec<PathLevelState> = coarse
        .iter()
        .map(|_| PathLevelState::new(&x0, d, n_eval))
        .collect();

    let mut xi_block = vec![0.0; fine.m_steps * m_noise];
    let mut xi_step = vec![0.0; m_noise];
    let mut drift_buf = vec![0.0; d];
    let mut diffusion_buf = vec![0.0; d * m_noise];
    let mut prev = vec![0.0; d];

    for k in 0..n_blocks {
        for m in 0..fine.m_steps {
            for c in 0..m_noise {
                xi_block[m * m_noise + c] = noise.increment(path, k, m, c);
            }
        }

        // Reference path.
        {
            let lists = std::slice::from_ref(&fine_state.anchors);
            let accs = std::slice::from_ref(&fine_state.acc);
            let view = FrozenPoolView::new(lists, accs, d);
            for m in 0..fine.m_steps {
                xi_step.copy_from_slice(&xi_block[m * m_noise..(m + 1) * m_noise]);
                prev.copy_from_slice(&fine_state.state);
                let finite = step_into(
                    model,
                    &mut fine_state.state,
                    &view as &dyn MeasureView,
                    fine.delta,
                    fine.sqrt_delta,
                    &xi_step,
                    &mut drift_buf,
                    &mut diffusion_buf,
                );
                if !finite {
                    return Err(CoreError::Divergence {
                        particle: path,
                        block: k,
                        inner_step: m,
                        magnitude: prev.iter().map(|x| x * x).sum::<f64>().sqrt(),
                    });
                }
                capture_if_due(
                    fine,
                    k as u64 * fine.m_steps as u64 + m as u64 + 1,
                    &fine_state.state,
                    &mut fine_state.captured,
                );
            }
        }
        let new_anchor = fine_state.state.clone();
        fine_state.anchors.extend_from_slice(&new_anchor);
        fine_state.acc.push(&new_anchor);

        // Coarse paths, each against its own anchor measure, driven by
        // aggregated fine increments.
        for (level, ls) in coarse.iter().zip(coarse_states.iter_mut()) {
            let lists = std::slice::from_ref(&ls.anchors);
            let accs = std::slice::from_ref(&ls.acc);
            let view = FrozenPoolView::new(lists, accs, d);
            for mc in 0..level.m_steps {
                for (c, slot) in xi_step.iter_mut().enumerate() {
                    let mut sum = 0.0;
                    for i in 0..level.ratio {
                        sum += xi_block[(mc * level.ratio + i) * m_noise + c];
                    }
                    *slot = sum * level.inv_sqrt_ratio;
                }
                prev.copy_from_slice(&ls.state);
                let finite = step_into(
                    model,
                    &mut ls.state,
                    &view as &dyn MeasureView,
                    level.delta,
                    level.sqrt_delta,
                    &xi_step,
                    &mut drift_buf,
                    &mut diffusion_buf,
                );
                if !finite {
                    return Err(CoreError::Divergence {
                        particle: path,
                        block: k,
                        inner_step: mc,
                        magnitude: prev.iter().map(|x| x * x).sum::<f64>().sqrt(),
                    });
                }
                capture_if_due(
                    level,
                    k as u64 * level.m_steps as u64 + mc as u64 + 1,
                    &ls.state,
                    &mut ls.captured,
                );
            }
            let new_anchor = ls.state.clone();
            ls.anchors.extend_from_slice(&new_anchor);
            ls.acc.push(&new_anchor);
        }
    }

    // Squared errors per coarse level and eval time.
    let mut out = Vec::with_capacity(coarse.len());
    for ls in &coarse_states {
        let mut level_errs = Vec::with_capacity(n_eval);
        for i in 0..n_eval {
            let zf = fine_state.captured[i].as_ref().ok_or_else(|| {
                CoreError::InvalidParameter {
                    name: "t_eval",
                    reason: "internal: reference state not captured".into(),
                }
            })?;
            let zc = ls.captured[i].as_ref().ok_or_else(|| {
                CoreError::InvalidParameter {
                    name: "t_eval",
                    reason: "internal: coarse state not captured".into(),
                }
            })?;
            let sq: f64 = zf
                .iter()
                .zip(zc)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            level_errs.push(sq);
        }
        out.push(level_errs);
    }
    Ok(out)
}
