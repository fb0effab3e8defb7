//! Exhaustive value iteration (CVI), value iteration with the closed-form
//! threshold (AVI) and the feature-based approximate DP (ADP).

mod adp;
mod features;
pub(crate) mod kernel;
mod pvi;
mod table;
mod vi;

use std::fmt;
use std::str::FromStr;

pub use adp::{adp_solve, adp_solve_with, evaluate_fixed_policy, greedy_policy_from_weights, AdpConfig, ChainRun};
pub use features::{feature_vector, features_scaled, FeatureScaling, WeightVector, FEATURE_NAMES, N_FEATURES};
pub use pvi::{accumulate_estimates, pvi_step, Estimates, Mat12, Step, Vec12, MOMENT_RIDGE};
pub use table::{TableMeta, ValueTable};
pub use vi::{avi_solve, bellman_backup, cvi_solve, greedy_policy, price_grid};

use crate::policy::PolicyTable;
use crate::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Cvi,
    Avi,
    Adp,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Cvi => "cvi",
            SolverKind::Avi => "avi",
            SolverKind::Adp => "adp",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cvi" => Ok(SolverKind::Cvi),
            "avi" => Ok(SolverKind::Avi),
            "adp" => Ok(SolverKind::Adp),
            other => Err(Error::Config(format!("unknown solver `{other}` (expected cvi, avi or adp)"))),
        }
    }
}

/// Everything a solve produces.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub solver: SolverKind,
    /// Exact table for CVI / AVI, the approximation evaluated on the grid
    /// for ADP.
    pub value: Option<ValueTable>,
    pub weights: Option<WeightVector>,
    pub policy: PolicyTable,
    /// Sweeps for CVI / AVI, outer iterations for ADP.
    pub iterations: usize,
    /// Simulated transitions (ADP only).
    pub transitions: usize,
    pub seconds: f64,
    /// Sup-norm change per iteration.
    pub history: Vec<f64>,
    pub converged: bool,
    pub seed: Option<u64>,
}

impl SolveReport {
    /// Equality on everything except wall-clock time.
    pub fn same_outcome(&self, other: &SolveReport) -> bool {
        let mut a = self.clone();
        a.seconds = other.seconds;
        a == *other
    }
}
