//! Approximate DP with a 12-parameter quadratic value function, trained by
//! projected value iteration on a simulated chain.
//!
//! Outer iteration: freeze `r_old`, act greedily with respect to
//! `J(., r_old)`, and run the chain while updating `C_k`, `d_k`, `G_k` and
//! `r_k` after every transition. The chain stops once at least `k_min`
//! transitions were seen and the weights moved less than `eps_inner`. The
//! outer loop stops when the approximate value function moved less than
//! `tau_outer` in sup norm over the full grid.
//!
//! Every outer iteration replays the same random stream, so successive
//! iterations differ only through the policy and the outer stopping test
//! is not swamped by sampling noise.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::{features_scaled, FeatureScaling, WeightVector, N_FEATURES};
use super::kernel::Kernel;
use super::pvi::{Block, Estimates, Vec12};
use super::{SolveReport, SolverKind, TableMeta, ValueTable};
use crate::model::{Direction, ModelParams};
use crate::policy::PolicyTable;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AdpConfig {
    /// Minimum number of transitions per inner loop.
    pub k_min: usize,
    /// Inner stopping threshold on `||r_{k+1} - r_k||_2`.
    pub eps_inner: f64,
    /// Outer stopping threshold on the sup-norm change of the value function.
    pub tau_outer: f64,
    pub max_outer: usize,
    /// Hard cap on transitions per inner loop.
    pub max_inner: usize,
    pub seed: u64,
}

impl Default for AdpConfig {
    fn default() -> Self {
        AdpConfig {
            k_min: 2_000_000,
            eps_inner: 1e-3,
            tau_outer: 10.0,
            max_outer: 50,
            max_inner: 20_000_000,
            seed: 0,
        }
    }
}

/// Precomputed rescaled coordinates of every grid state.
struct Coords {
    i: Vec<f64>,
    y: Vec<f64>,
    dir: Vec<Direction>,
}

impl Coords {
    fn new(params: &ModelParams) -> Self {
        let sc = FeatureScaling::for_params(params);
        let grid = params.grid();
        let mut c = Coords {
            i: Vec::with_capacity(grid.len()),
            y: Vec::with_capacity(grid.len()),
            dir: Vec::with_capacity(grid.len()),
        };
        for s in grid.states() {
            c.i.push(sc.rescale(f64::from(s.i)));
            c.y.push(params.y_of(s.k));
            c.dir.push(s.dir);
        }
        c
    }

    #[inline]
    fn phi(&self, idx: usize) -> Vec12 {
        Vec12::from(features_scaled(self.i[idx], self.y[idx], self.dir[idx]))
    }

    #[inline]
    fn block(&self, idx: usize) -> Block {
        let (i, y) = (self.i[idx], self.y[idx]);
        Block {
            off: match self.dir[idx] {
                Direction::Up => 0,
                Direction::Down => N_FEATURES / 2,
            },
            f: [i * i, i, y * y, y, i * y, 1.0],
        }
    }

    fn values(&self, r: &Vec12) -> Vec<f64> {
        (0..self.i.len()).map(|idx| self.phi(idx).dot(r)).collect()
    }
}

/// Greedy closed-form policy with respect to the approximation `J(., r)`.
pub fn greedy_policy_from_weights(params: &ModelParams, w: &WeightVector) -> Result<PolicyTable> {
    let kernel = Kernel::new(params);
    let grid = params.grid();
    let j: Vec<f64> = grid.states().map(|s| w.value(params, &s)).collect();
    let u = (0..grid.len()).map(|idx| kernel.threshold(kernel.delta(&j, idx))).collect();
    let mut meta = TableMeta::synthetic(params.params_hash());
    meta.solver = SolverKind::Adp.to_string();
    PolicyTable::new(grid, u, meta)
}

/// Outcome of one simulated chain.
pub struct ChainRun {
    pub r: Vec12,
    pub estimates: Estimates,
    pub steps: usize,
    pub stopped: bool,
}

/// Runs the chain under the fixed threshold table `u` from `start`, updating
/// the weights after every transition. Stops early once `k >= k_min` and the
/// update is shorter than `eps_inner`; pass `eps_inner = 0` to run exactly
/// `max_steps` transitions.
fn run_chain(
    kernel: &Kernel,
    coords: &Coords,
    u: &[f64],
    r0: Vec12,
    start: usize,
    rng: &mut ChaCha8Rng,
    k_min: usize,
    eps_inner: f64,
    max_steps: usize,
) -> ChainRun {
    let mut est = Estimates::new(kernel.alpha);
    let mut r = r0;
    let mut idx = start;
    let mut phi = coords.block(idx);
    for k in 0..max_steps {
        let (cost, arrival) = kernel.cost_and_arrival(idx, kernel.tail(idx, u[idx]));
        let next = kernel.step(idx, arrival, rng.random::<f64>());
        let phi_next = coords.block(next);
        est.push_block(&phi, &phi_next, cost);
        let r_next = est.step(&r);
        let moved = (r_next - r).norm();
        r = r_next;
        idx = next;
        phi = phi_next;
        if k + 1 >= k_min && moved < eps_inner {
            return ChainRun {
                r,
                estimates: est,
                steps: k + 1,
                stopped: true,
            };
        }
    }
    ChainRun {
        r,
        estimates: est,
        steps: max_steps,
        stopped: false,
    }
}

/// Projected value iteration under a fixed policy for exactly `steps`
/// transitions, starting from `r = 0` at a uniformly drawn state.
pub fn evaluate_fixed_policy(params: &ModelParams, policy: &PolicyTable, steps: usize, seed: u64) -> Result<ChainRun> {
    policy.check_against(params)?;
    if steps == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let kernel = Kernel::new(params);
    let coords = Coords::new(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..params.grid().len());
    Ok(run_chain(
        &kernel,
        &coords,
        policy.values(),
        Vec12::zeros(),
        start,
        &mut rng,
        steps,
        0.0,
        steps,
    ))
}

pub fn adp_solve(params: &ModelParams, k_min: usize, eps_inner: f64, tau_outer: f64, seed: u64) -> Result<SolveReport> {
    adp_solve_with(
        params,
        &AdpConfig {
            k_min,
            eps_inner,
            tau_outer,
            seed,
            ..AdpConfig::default()
        },
    )
}

pub fn adp_solve_with(params: &ModelParams, cfg: &AdpConfig) -> Result<SolveReport> {
    if !(cfg.eps_inner > 0.0 && cfg.tau_outer > 0.0) {
        return Err(Error::Domain("ADP tolerances must be positive".into()));
    }
    if cfg.k_min == 0 || cfg.max_outer == 0 || cfg.max_inner < cfg.k_min {
        return Err(Error::Domain("need k_min >= 1, max_outer >= 1 and max_inner >= k_min".into()));
    }
    let started = Instant::now();
    let kernel = Kernel::new(params);
    let coords = Coords::new(params);
    let grid = params.grid();
    let scaling = FeatureScaling::for_params(params);

    let mut r = Vec12::zeros();
    let mut j_old = vec![0.0; grid.len()];
    let mut history = Vec::new();
    let mut transitions = 0;
    let mut converged = false;

    for _ in 0..cfg.max_outer {
        let u: Vec<f64> = (0..grid.len()).map(|idx| kernel.threshold(kernel.delta(&j_old, idx))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let start = rng.random_range(0..grid.len());
        let run = run_chain(&kernel, &coords, &u, r, start, &mut rng, cfg.k_min, cfg.eps_inner, cfg.max_inner);
        transitions += run.steps;
        if !run.stopped {
            return Err(Error::NotConverged {
                solver: "adp inner loop".into(),
                iterations: run.steps,
                last_change: f64::NAN,
                report: None,
            });
        }
        r = run.r;
        let j_new = coords.values(&r);
        let change = j_new
            .iter()
            .zip(&j_old)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(change);
        j_old = j_new;
        if !change.is_finite() {
            break;
        }
        if change < cfg.tau_outer {
            converged = true;
            break;
        }
    }

    let mut weights = [0.0; N_FEATURES];
    weights.copy_from_slice(r.as_slice());
    let w = WeightVector::new(weights, scaling)?;
    let iterations = history.len();
    let final_change = history.last().copied().unwrap_or(f64::INFINITY);
    let meta = TableMeta {
        solver: SolverKind::Adp.to_string(),
        iterations,
        tol: cfg.tau_outer,
        final_change,
        params_hash: params.params_hash(),
        resolution: 0.0,
    };
    let u = (0..grid.len()).map(|idx| kernel.threshold(kernel.delta(&j_old, idx))).collect();
    let report = SolveReport {
        solver: SolverKind::Adp,
        value: Some(ValueTable::new(grid, j_old, meta.clone())?),
        weights: Some(w),
        policy: PolicyTable::new(grid, u, meta)?,
        iterations,
        transitions,
        seconds: started.elapsed().as_secs_f64(),
        history,
        converged,
        seed: Some(cfg.seed),
    };
    if converged {
        Ok(report)
    } else {
        Err(Error::NotConverged {
            solver: SolverKind::Adp.to_string(),
            iterations,
            last_change: final_change,
            report: Some(Box::new(report)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamSpec;

    #[test]
    fn zero_weights_give_lowest_price() {
        let p = ParamSpec::reference().build().unwrap();
        let w = WeightVector::zeros(FeatureScaling::for_params(&p));
        let pol = greedy_policy_from_weights(&p, &w).unwrap();
        assert!(pol.values().iter().all(|&u| u == p.t_min()));
    }

    #[test]
    fn convex_weights_give_policy_increasing_in_i() {
        let p = ParamSpec::reference().build().unwrap();
        let mut r = [0.0; N_FEATURES];
        r[0] = 40.0;
        r[1] = 5.0;
        r[6] = 30.0;
        r[7] = -3.0;
        r[4] = 2.0;
        let w = WeightVector::new(r, FeatureScaling::for_params(&p)).unwrap();
        let pol = greedy_policy_from_weights(&p, &w).unwrap();
        let g = p.grid();
        for s in g.states().filter(|s| s.i < p.n2()) {
            let next = crate::model::State::new(s.i + 1, s.k, s.dir);
            assert!(pol.get(&next).unwrap() >= pol.get(&s).unwrap());
        }
    }
}
