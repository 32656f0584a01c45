//! File formats, random realizations, experiment sweeps and the
//! command-line front end for [`gluepour_core`].

pub mod cli;
pub mod error;
pub mod experiment;
pub mod format;
pub mod golden;
pub mod io;
pub mod montecarlo;

pub use error::{HarnessError, Result};
pub use experiment::{run_sweep, ExperimentConfig, OnlineKind, SweepRow, SweepVariable};
pub use golden::{GoldenCheck, GoldenOutcome, Metric, Registry};
pub use io::{read_policy, read_scenario, PolicyFile, ScenarioFile};
pub use montecarlo::{gen_fading_scenario, FadingParams};
