use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::ModelParams;
use crate::policy::PolicyTable;
use crate::solvers::kernel::Kernel;
use crate::{Error, Result};

/// Episode averages with their standard errors.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PolicyStats {
    pub episodes: usize,
    pub horizon: usize,
    pub mean_cost: f64,
    pub se_cost: f64,
    pub rms_error: f64,
    pub se_rms_error: f64,
    /// Expected utility per period along the realized path.
    pub mean_utility: f64,
    pub se_utility: f64,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Runs the uniformized chain under `policy`. Episode `e` draws its start
/// state uniformly from the grid and uses stream `e` of the master seed, so
/// two policies evaluated with the same seed see the same random numbers.
pub fn evaluate_policy(params: &ModelParams, policy: &PolicyTable, episodes: usize, horizon: usize, seed: u64) -> Result<PolicyStats> {
    policy.check_against(params)?;
    if episodes == 0 || horizon == 0 {
        return Err(Error::Domain("need at least one episode of at least one step".into()));
    }
    let kernel = Kernel::new(params);
    let len = params.grid().len();
    let per: Vec<(f64, f64, f64)> = (0..episodes)
        .into_par_iter()
        .map(|e| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(e as u64);
            let mut idx = rng.random_range(0..len);
            let mut disc = 1.0;
            let (mut cost, mut err2, mut util) = (0.0, 0.0, 0.0);
            for _ in 0..horizon {
                let node = &kernel.nodes[idx];
                let tail = kernel.tail(idx, policy.at(idx));
                let (c, a) = kernel.cost_and_arrival(idx, tail);
                cost += disc * c;
                disc *= kernel.alpha;
                // The penalty is kappa dt e^2; recover e^2 without a second
                // pass over the state.
                err2 += node.penalty;
                util += node.idle * kernel.b * tail.1;
                idx = kernel.step(idx, a, rng.random::<f64>());
            }
            let h = horizon as f64;
            (cost, err2 / h, util / h)
        })
        .collect();
    let scale = params.kappa_dt();
    let costs: Vec<f64> = per.iter().map(|p| p.0).collect();
    let rms: Vec<f64> = per
        .iter()
        .map(|p| if scale > 0.0 { (p.1 / scale).sqrt() } else { 0.0 })
        .collect();
    let utils: Vec<f64> = per.iter().map(|p| p.2).collect();
    let (mean_cost, se_cost) = mean_se(&costs);
    let (rms_error, se_rms_error) = mean_se(&rms);
    let (mean_utility, se_utility) = mean_se(&utils);
    Ok(PolicyStats {
        episodes,
        horizon,
        mean_cost,
        se_cost,
        rms_error,
        se_rms_error,
        mean_utility,
        se_utility,
    })
}
