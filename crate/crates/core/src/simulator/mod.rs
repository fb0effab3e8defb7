//! Monte Carlo tools: the regulation signal, a zone-level thermal building
//! driven by a policy table, trapezoid fitting of idle-zone temperatures,
//! and policy evaluation on the uniformized chain itself.

mod building;
mod evaluate;
mod fit;
mod signal;

pub use building::{simulate_building, GroupFit, SimOptions, SimTrace, Snapshot, ThermalParams, TraceRow};
pub use evaluate::{evaluate_policy, PolicyStats};
pub use fit::{fit_trapezoid, ks_distance, regress_t_hat_on_y, trapezoid_log_likelihood, RegressionFit, MIN_FIT_SAMPLES};
pub use signal::{generate_rsr_signal, signal_stats, SignalPoint, SignalStats, PERSISTENCE};
