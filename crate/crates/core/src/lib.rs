//! Transmission scheduling for an energy-harvesting transmitter on `K`
//! parallel fading sub-channels with a constant per-sub-channel processing
//! cost.
//!
//! The crate is `no_std` (it needs `alloc`) and purely computational:
//!
//! * [`model`] holds the scenario and policy types and the constraint audit.
//! * [`gluekernel`] solves the single-epoch problem: the bursty threshold
//!   power [`gluekernel::v_star`] and glue pouring across sub-channels.
//! * [`offline_throughput`], [`offline_energy`] and [`tct`] compute optimal
//!   offline policies for the three objectives.
//! * [`oracle`] certifies those solvers with an independent barrier-method
//!   convex solver, a grid search and KKT residuals.
//! * [`online`] contains the causal policies, a quantized dynamic program
//!   and the event-driven simulator.
//!
//! Units are fixed throughout: energy in μJ, power in μW, time in seconds,
//! data in nats. Channel gains are per μW, so `gain * power` is dimensionless.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
mod math;

pub mod gluekernel;
pub mod model;
pub mod offline_energy;
pub mod offline_throughput;
pub mod online;
pub mod oracle;
pub mod tct;

pub use error::{Error, Result, ValidationError};
pub use gluekernel::{epoch_glue_pour, min_energy_for_data, two_level_reference, v_star, GlueAllocation};
pub use model::{
    audit_policy, rate, validate_scenario, Capacity, Clause, Constraint, Epoch, LedgerReport, Matrix,
    Policy, ProblemKind, Scenario, StructureReport, Violation,
};
pub use offline_energy::{
    check_feasibility, solve_offline_energy, verify_energy_structure, EnergySolution, FeasibilityReport,
};
pub use offline_throughput::{solve_offline_throughput, verify_throughput_structure, ThroughputSolution};
pub use online::{
    dp_solve, online_energy_step, online_throughput_step, replay, simulate, Allocation, ArrivalLaw, DpConfig,
    DpPolicy, EnergyStep, OnlineState, Trace, TraceEvent,
};
pub use oracle::{
    brute_force_small, directional_waterfill, kkt_residuals, solve_convex, BruteForceResult, ConvexSolution,
    KktCertificate, WaterfillSolution,
};
pub use tct::{find_bracket_epoch, solve_tct, TctResult};

/// Absolute tolerance (μJ or nats) used by policy audits.
pub const AUDIT_TOL: f64 = 1e-9;
