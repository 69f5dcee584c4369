//! Wild Bootstrap calibration of `Z_n`.
//!
//! Each replicate multiplies every observation's contribution by an
//! independent mean-zero, unit-variance weight while the kernel matrix stays
//! fixed. Replicate `r` draws its multipliers from the counter-based stream
//! `(seed, r)`, so the replicate list is the same for any thread count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EventForm, ZStatistic};
use crate::kernels::{self, KernelSpec, PreparedKernel};
use crate::numerics;
use crate::survival::{RiskTable, SurvivalDataset};
use crate::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BootstrapError {
    #[error("at least one bootstrap replicate is required")]
    ZeroReplicates,
    #[error("significance level must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("expected {expected} multipliers (one per observation), got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    /// `±1` with probability 1/2 each.
    Rademacher,
    StandardNormal,
}

impl std::fmt::Display for Multiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Multiplier::Rademacher => "rademacher",
            Multiplier::StandardNormal => "standard_normal",
        })
    }
}

impl std::str::FromStr for Multiplier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rademacher" => Ok(Multiplier::Rademacher),
            "normal" | "gaussian" | "standard_normal" => Ok(Multiplier::StandardNormal),
            other => Err(format!("unknown multiplier `{other}` (expected rademacher or normal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub multiplier: Multiplier,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            multiplier: Multiplier::Rademacher,
            seed: 0,
            alpha: 0.05,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), BootstrapError> {
        if self.replicates == 0 {
            return Err(BootstrapError::ZeroReplicates);
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BootstrapError::BadAlpha(self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub z: ZStatistic,
    /// `Z_n^W` for each replicate, in replicate order.
    pub bootstrap_values: Vec<f64>,
    /// Empirical `(1 − α)`-quantile of the replicates.
    pub quantile: f64,
    /// `(1 + #{Z_n^W ≥ Z_n}) / (N + 1)`
    pub p_value: f64,
    /// `Z_n > quantile`
    pub reject: bool,
    pub config: BootstrapConfig,
}

/// Multipliers for replicate `replicate`, one per observation.
pub fn draw_multipliers(multiplier: Multiplier, seed: u64, replicate: u64, n: usize) -> Vec<f64> {
    let mut rng = numerics::stream(seed, replicate);
    match multiplier {
        Multiplier::Rademacher => {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let bits: u64 = rng.random();
                let take = (n - out.len()).min(64);
                out.extend((0..take).map(|b| if (bits >> b) & 1 == 1 { 1.0 } else { -1.0 }));
            }
            out
        }
        Multiplier::StandardNormal => (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    }
}

/// One Wild Bootstrap statistic `Z_n^W` for explicit multipliers.
pub fn bootstrap_replicate(ds: &SurvivalDataset, rt: &RiskTable, pk: &PreparedKernel, weights: &[f64]) -> Result<f64, BootstrapError> {
    if weights.len() != ds.len() {
        return Err(BootstrapError::LengthMismatch {
            expected: ds.len(),
            got: weights.len(),
        });
    }
    Ok(EventForm::new(ds, rt, pk).replicate(weights))
}

/// Full test with a kernel that is already prepared on `ds`.
pub fn run_test_prepared(
    ds: &SurvivalDataset,
    rt: &RiskTable,
    pk: &PreparedKernel,
    cfg: &BootstrapConfig,
) -> Result<TestResult, BootstrapError> {
    cfg.validate()?;
    let form = EventForm::new(ds, rt, pk);
    let z = form.statistic();
    let n = ds.len();
    let bootstrap_values: Vec<f64> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| form.replicate(&draw_multipliers(cfg.multiplier, cfg.seed, r, n)))
        .collect();
    Ok(summarize(ds, z, bootstrap_values, cfg))
}

fn summarize(ds: &SurvivalDataset, z: f64, bootstrap_values: Vec<f64>, cfg: &BootstrapConfig) -> TestResult {
    let quantile = numerics::quantile(&bootstrap_values, 1.0 - cfg.alpha).expect("replicates >= 1 and alpha validated");
    let exceed = bootstrap_values.iter().filter(|&&b| b >= z).count();
    let p_value = (1 + exceed) as f64 / (bootstrap_values.len() + 1) as f64;
    TestResult {
        z: ZStatistic {
            z,
            scaled: z / ds.scale(),
            n: ds.len(),
            n0: ds.n0(),
            n1: ds.n1(),
        },
        bootstrap_values,
        quantile,
        p_value,
        reject: z > quantile,
        config: *cfg,
    }
}

/// Prepares the kernel, computes `Z_n`, and calibrates it with the Wild Bootstrap.
pub fn run_test(ds: &SurvivalDataset, spec: &KernelSpec, cfg: &BootstrapConfig) -> Result<TestResult, Error> {
    cfg.validate()?;
    let rt = RiskTable::build(ds);
    let pk = kernels::prepare(spec, ds, &rt)?;
    Ok(run_test_prepared(ds, &rt, &pk, cfg)?)
}
