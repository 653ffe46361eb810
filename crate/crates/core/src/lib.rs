//! Dynamic economic dispatch with prohibited operating zones.
//!
//! Instances are turned into mixed-integer linear programs whose quadratic
//! costs are under-approximated by perspective tangent cuts, then solved by
//! the bundled simplex and branch-and-bound. Network losses are handled by
//! repeatedly linearizing the Kron loss around averaged previous solutions.

pub mod bnb;
pub mod dispatch;
pub mod error;
pub mod instance;
pub mod io;
pub mod model;
pub mod oracle;
pub mod simplex;

pub use bnb::{solve_milp, MilpConfig, MilpSolution, MilpStatus};
pub use dispatch::{solve_ded_no_loss, solve_ded_with_loss, DispatchReport, IaConfig, SolveConfig, Termination};
pub use error::{Error, Result};
pub use instance::{
    derive_segments, evaluate_cost, evaluate_loss_mw, evaluate_violations, FeasibilityReport, GeneratingUnit,
    LossModel, ProhibitedZone, Schedule, SystemInstance,
};
pub use model::{build_milp1, build_milp2, MilpModel};
pub use simplex::{solve_lp, LpSolution, LpStatus};
