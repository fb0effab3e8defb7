//! Dynamic programming for smart buildings that track a regulation service
//! reserve signal by broadcasting a single price to their cooling zones.
//!
//! The crate is organised the way the problem is:
//!
//! * [`model`]: parameters, states, the trapezoid preference density and the
//!   uniformized transition kernel.
//! * [`policy`]: the per-state price objective and its closed-form maximiser.
//! * [`solvers`]: exhaustive value iteration (CVI), value iteration with the
//!   analytic price (AVI) and a 12-feature approximate DP (ADP).
//! * [`analysis`]: the second-difference bounds on the value function and
//!   numerical checks of the monotonicity structure.
//! * [`simulator`]: a zone-level thermal Monte Carlo, signal generator,
//!   trapezoid fitting and policy evaluation on the uniformized chain.
//! * [`io`]: run configuration and CSV / manifest artifacts.

pub mod analysis;
pub mod error;
pub mod io;
pub mod model;
pub mod policy;
pub mod simulator;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{Direction, Grid, ModelParams, ParamSpec, State, TransitionList, TrapezoidPdf};
pub use policy::PolicyTable;
pub use solvers::{SolveReport, SolverKind, ValueTable, WeightVector};
