//! Independent certification of the structural solvers: a barrier-method
//! convex solver, KKT residuals, grid search and ε = 0 water-filling.

mod barrier;
mod brute;
mod convex;
mod kkt;
mod linalg;
mod waterfill;

pub use brute::{brute_force_small, BruteForceResult};
pub use convex::{solve_convex, ConvexSolution, SNAP_DURATION};
pub use kkt::{kkt_residuals, KktCertificate};
pub use waterfill::{directional_waterfill, WaterfillSolution};
