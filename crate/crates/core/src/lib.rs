//! Kernel log-rank tests for right-censored two-sample survival data.
//!
//! The test statistic `Z_n` is the largest squared weighted log-rank statistic
//! over the unit ball of a reproducing kernel Hilbert space of weight
//! functions. It reduces to a quadratic form in the observed data and is
//! calibrated with a Wild Bootstrap.
//!
//! ```
//! use rkhs_logrank::{run_test, BootstrapConfig, KernelSpec, SurvivalDataset};
//!
//! let ds = SurvivalDataset::from_groups(
//!     &[(1.0, true), (2.0, true)],
//!     &[(3.0, true)],
//! ).unwrap();
//! let cfg = BootstrapConfig { replicates: 99, seed: 1, ..Default::default() };
//! let res = run_test(&ds, &KernelSpec::lrp(), &cfg).unwrap();
//! assert!((res.z.z - 1.5625).abs() < 1e-12);
//! ```

pub mod bootstrap;
pub mod cli;
pub mod engine;
pub mod kernels;
pub mod numerics;
pub mod simulation;
pub mod survival;

pub use bootstrap::{bootstrap_replicate, run_test, run_test_prepared, BootstrapConfig, BootstrapError, Multiplier, TestResult};
pub use engine::{
    optimal_weight, weighted_logrank, z_statistic, z_statistic_bruteforce, EngineError, EventForm, LogRankResult, OptimalWeight, ZStatistic,
};
pub use kernels::{prepare, Bandwidth, KernelError, KernelSpec, PreparedKernel, WeightFunction};
pub use numerics::NumericsError;
pub use simulation::{
    asymptotic_mean_oracle, calibrate_censoring, run_scenario, ExperimentReport, FamilyKind, HazardFamily, NullSetup, ScenarioConfig,
    SimulationError,
};
pub use survival::{
    kaplan_meier, nelson_aalen, DataError, Group, Observation, RawObservation, RiskTable, Scope, StatVector, SurvivalDataset,
};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
