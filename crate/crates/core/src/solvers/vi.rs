//! Synchronous value iteration, with either an exhaustive search over a price
//! grid (CVI) or the closed-form threshold (AVI) at every state.

use std::time::Instant;

use rayon::prelude::*;

use super::kernel::Kernel;
use super::{SolveReport, SolverKind, TableMeta, ValueTable};
use crate::model::{self, ModelParams, State};
use crate::policy::PolicyTable;
use crate::{Error, Result};

/// Number of states handed to one rayon task.
const CHUNK: usize = 2048;

/// `c(s, u) + alpha E[J(s') | s, u]` from the explicit transition list.
pub fn bellman_backup(params: &ModelParams, j: &ValueTable, s: &State, u: f64) -> Result<f64> {
    let cost = model::period_cost(params, s, u)?;
    let next = model::transitions(params, s, u)?;
    let mut acc = 0.0;
    for (t, p) in next.iter() {
        acc += p * j.get(&t)?;
    }
    Ok(cost + params.alpha() * acc)
}

/// Evenly spaced prices including both ends of the comfort band.
pub fn price_grid(params: &ModelParams, size: usize) -> Vec<f64> {
    let step = (params.t_max() - params.t_min()) / (size - 1) as f64;
    (0..size)
        .map(|g| {
            if g + 1 == size {
                params.t_max()
            } else {
                params.t_min() + g as f64 * step
            }
        })
        .collect()
}

/// Sweep rule: the new value at a state and the threshold that attains it.
trait Rule: Sync {
    fn best(&self, kernel: &Kernel, j: &[f64], idx: usize) -> (f64, f64);
}

struct Closed;

impl Rule for Closed {
    #[inline]
    fn best(&self, kernel: &Kernel, j: &[f64], idx: usize) -> (f64, f64) {
        let u = kernel.threshold(kernel.delta(j, idx));
        (kernel.backup(j, idx, kernel.tail(idx, u)), u)
    }
}

struct Exhaustive {
    prices: Vec<f64>,
    /// Tail pairs per signal level, then per price.
    tails: Vec<Vec<(f64, f64)>>,
}

impl Rule for Exhaustive {
    #[inline]
    fn best(&self, kernel: &Kernel, j: &[f64], idx: usize) -> (f64, f64) {
        let tails = &self.tails[kernel.nodes[idx].level as usize];
        let mut best = (f64::INFINITY, self.prices[0]);
        for (tail, &u) in tails.iter().zip(&self.prices) {
            let v = kernel.backup(j, idx, *tail);
            if v < best.0 {
                best = (v, u);
            }
        }
        best
    }
}

struct Outcome {
    j: Vec<f64>,
    u: Vec<f64>,
    history: Vec<f64>,
    converged: bool,
}

fn iterate<R: Rule>(kernel: &Kernel, rule: &R, tol: f64, max_iter: usize) -> Outcome {
    let len = kernel.nodes.len();
    let mut old = vec![0.0; len];
    let mut new = vec![0.0; len];
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let change = new
            .par_iter_mut()
            .enumerate()
            .with_min_len(CHUNK)
            .map(|(idx, out)| {
                let v = rule.best(kernel, &old, idx).0;
                let c = (v - old[idx]).abs();
                *out = v;
                if c.is_nan() {
                    f64::INFINITY
                } else {
                    c
                }
            })
            .reduce(|| 0.0, f64::max);
        std::mem::swap(&mut old, &mut new);
        history.push(change);
        if change < tol {
            converged = true;
            break;
        }
        if !change.is_finite() {
            break;
        }
    }
    let u = (0..len)
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|idx| rule.best(kernel, &old, idx).1)
        .collect();
    Outcome {
        j: old,
        u,
        history,
        converged,
    }
}

fn finish(
    params: &ModelParams,
    kind: SolverKind,
    out: Outcome,
    tol: f64,
    resolution: f64,
    started: Instant,
) -> Result<SolveReport> {
    let iterations = out.history.len();
    let final_change = out.history.last().copied().unwrap_or(f64::INFINITY);
    let meta = TableMeta {
        solver: kind.to_string(),
        iterations,
        tol,
        final_change,
        params_hash: params.params_hash(),
        resolution,
    };
    let grid = params.grid();
    let finite = out.j.iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::NotConverged {
            solver: kind.to_string(),
            iterations,
            last_change: final_change,
            report: None,
        });
    }
    let report = SolveReport {
        solver: kind,
        value: Some(ValueTable::new(grid, out.j, meta.clone())?),
        weights: None,
        policy: PolicyTable::new(grid, out.u, meta)?,
        iterations,
        transitions: 0,
        seconds: started.elapsed().as_secs_f64(),
        history: out.history,
        converged: out.converged,
        seed: None,
    };
    if report.converged {
        Ok(report)
    } else {
        Err(Error::NotConverged {
            solver: kind.to_string(),
            iterations,
            last_change: final_change,
            report: Some(Box::new(report)),
        })
    }
}

fn check_tol(tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::Domain("max_iter must be at least 1".into()));
    }
    Ok(())
}

/// Value iteration minimising over `price_grid_size` evenly spaced
/// thresholds.
pub fn cvi_solve(params: &ModelParams, price_grid_size: usize, tol: f64, max_iter: usize) -> Result<SolveReport> {
    check_tol(tol, max_iter)?;
    if price_grid_size < 2 {
        return Err(Error::Domain("price grid needs at least 2 points".into()));
    }
    let started = Instant::now();
    let kernel = Kernel::new(params);
    let prices = price_grid(params, price_grid_size);
    let tails = kernel
        .pdfs
        .iter()
        .map(|pdf| prices.iter().map(|&u| pdf.tail(u)).collect())
        .collect();
    let rule = Exhaustive { prices, tails };
    let out = iterate(&kernel, &rule, tol, max_iter);
    let step = (params.t_max() - params.t_min()) / (price_grid_size - 1) as f64;
    finish(params, SolverKind::Cvi, out, tol, step, started)
}

/// Value iteration with the closed-form threshold at every state.
pub fn avi_solve(params: &ModelParams, tol: f64, max_iter: usize) -> Result<SolveReport> {
    check_tol(tol, max_iter)?;
    let started = Instant::now();
    let kernel = Kernel::new(params);
    let out = iterate(&kernel, &Closed, tol, max_iter);
    let resolution = if params.b() > 0.0 {
        10.0 * tol * params.alpha() / params.b()
    } else {
        0.0
    };
    finish(params, SolverKind::Avi, out, tol, resolution, started)
}

/// Greedy closed-form policy with respect to an arbitrary value table.
pub fn greedy_policy(params: &ModelParams, j: &ValueTable) -> Result<PolicyTable> {
    if j.grid() != params.grid() {
        return Err(Error::Domain("value table grid does not match the model".into()));
    }
    let kernel = Kernel::new(params);
    let u = (0..j.grid().len())
        .map(|idx| kernel.threshold(kernel.delta(j.values(), idx)))
        .collect();
    PolicyTable::new(j.grid(), u, j.meta.clone())
}
