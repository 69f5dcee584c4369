//! The kernel log-rank statistic `Z_n` and classical weighted log-rank statistics.
//!
//! `Z_n` is the supremum of `LR_n(ω)²` over the unit ball of the RKHS of the
//! kernel, and equals the quadratic form
//!
//! ```text
//! Z_n = (n / (n0 n1))² · Vᵀ K̂ V,    K̂_ij = K(F̂(X_i−), F̂(X_j−))
//! ```
//!
//! Censored rows have `V_j = 0`, so [`EventForm`] keeps only event rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{PreparedKernel, WeightFunction};
use crate::numerics::CompensatedSum;
use crate::survival::{guarded_div, RiskTable, StatVector, SurvivalDataset};

/// Default number of grid points for [`OptimalWeight::tabulate`].
pub const OPTIMAL_WEIGHT_GRID: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("Z_n = 0: no direction achieves the supremum")]
    DegenerateStatistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZStatistic {
    /// `Z_n`
    pub z: f64,
    /// `(n0 n1 / n) · Z_n`, the scale on which `Z_n` has a null limit.
    pub scaled: f64,
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
}

impl ZStatistic {
    fn new(ds: &SurvivalDataset, z: f64) -> Self {
        Self {
            z,
            scaled: z / ds.scale(),
            n: ds.len(),
            n0: ds.n0(),
            n1: ds.n1(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRankResult {
    /// `LR_n(ω)`
    pub statistic: f64,
    /// `σ̂²`
    pub variance_estimate: f64,
    /// `sqrt(n0 n1 / n) · LR_n(ω) / σ̂`, asymptotically standard normal under the null.
    pub standardized: f64,
}

#[derive(Debug, Clone)]
enum Representation {
    /// `features[i * rank + k] = φ_k(F̂(X_i−))` for event `i`.
    Features { rank: usize, features: Vec<f64> },
    /// Dense row-major `K̂` restricted to event rows.
    Gram { matrix: Vec<f64> },
}

/// Event-restricted quadratic form, reusable across bootstrap replicates.
#[derive(Debug, Clone)]
pub struct EventForm {
    /// canonical positions of the event rows
    event_rows: Vec<usize>,
    /// `V` on event rows
    v: Vec<f64>,
    scale: f64,
    n: usize,
    repr: Representation,
}

impl EventForm {
    pub fn new(ds: &SurvivalDataset, rt: &RiskTable, pk: &PreparedKernel) -> Self {
        let full_v = StatVector::build(ds, rt);
        let event_rows: Vec<usize> = ds
            .observations()
            .iter()
            .enumerate()
            .filter(|(_, o)| o.event)
            .map(|(i, _)| i)
            .collect();
        let v: Vec<f64> = event_rows.iter().map(|&i| full_v.0[i]).collect();
        let points: Vec<f64> = event_rows.iter().map(|&i| rt.f_left[i]).collect();
        let d = points.len();

        let repr = match pk.feature_dim() {
            Some(rank) if rank <= d.max(1) => {
                let mut features = vec![0.0; d * rank];
                for (i, &u) in points.iter().enumerate() {
                    pk.features_into(u, &mut features[i * rank..(i + 1) * rank]);
                }
                Representation::Features { rank, features }
            }
            _ => {
                let mut matrix = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..=i {
                        let k = pk.eval(points[i], points[j]);
                        matrix[i * d + j] = k;
                        matrix[j * d + i] = k;
                    }
                }
                Representation::Gram { matrix }
            }
        };

        Self {
            event_rows,
            v,
            scale: ds.scale(),
            n: ds.len(),
            repr,
        }
    }

    pub fn event_count(&self) -> usize {
        self.v.len()
    }

    /// Positions (in canonical order) of the rows that carry an event.
    pub fn event_rows(&self) -> &[usize] {
        &self.event_rows
    }

    /// `Z_n`.
    pub fn statistic(&self) -> f64 {
        self.scaled_quadratic(&self.v)
    }

    /// `Z_n^W` for one multiplier per observation (canonical order).
    pub fn replicate(&self, multipliers: &[f64]) -> f64 {
        assert_eq!(multipliers.len(), self.n, "one multiplier per observation");
        let a: Vec<f64> = self.event_rows.iter().zip(&self.v).map(|(&row, &v)| multipliers[row] * v).collect();
        self.scaled_quadratic(&a)
    }

    /// `(n/(n0 n1))² aᵀ K̂ a` over event rows.
    fn scaled_quadratic(&self, a: &[f64]) -> f64 {
        match &self.repr {
            Representation::Features { rank, features } => {
                let mut total = CompensatedSum::new();
                for k in 0..*rank {
                    let mut s = CompensatedSum::new();
                    for (i, &ai) in a.iter().enumerate() {
                        s.add(ai * features[i * rank + k]);
                    }
                    let s = self.scale * s.total();
                    total.add(s * s);
                }
                total.total()
            }
            Representation::Gram { matrix } => {
                let d = a.len();
                let mut total = CompensatedSum::new();
                for (i, &ai) in a.iter().enumerate() {
                    if ai == 0.0 {
                        continue;
                    }
                    let row = &matrix[i * d..(i + 1) * d];
                    let mut inner = CompensatedSum::new();
                    for (&k, &aj) in row.iter().zip(a) {
                        inner.add(k * aj);
                    }
                    total.add(ai * inner.total());
                }
                self.scale * self.scale * total.total()
            }
        }
    }
}

/// `Z_n` via the event-restricted quadratic form.
pub fn z_statistic(ds: &SurvivalDataset, rt: &RiskTable, pk: &PreparedKernel) -> ZStatistic {
    ZStatistic::new(ds, EventForm::new(ds, rt, pk).statistic())
}

/// `Z_n` via the literal double sum over all observation pairs.
///
/// Quadratic in `n` and deliberately naive; it exists to cross-check
/// [`z_statistic`].
pub fn z_statistic_bruteforce(ds: &SurvivalDataset, rt: &RiskTable, pk: &PreparedKernel) -> ZStatistic {
    let obs = ds.observations();
    let n = obs.len();
    let factor = |i: usize| -> f64 {
        let delta = if obs[i].event { 1.0 } else { 0.0 };
        let sign = if obs[i].group.index() == 0 { 1.0 } else { -1.0 };
        rt.l[i] * sign * guarded_div(delta, rt.at_risk_own_group[i] as f64)
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += pk.eval(rt.f_left[i], rt.f_left[j]) * factor(i) * factor(j);
        }
    }
    let s = n as f64 / (ds.n0() as f64 * ds.n1() as f64);
    ZStatistic::new(ds, s * s * total)
}

/// Weighted log-rank statistic `LR_n(ω)` with its variance estimate.
pub fn weighted_logrank(ds: &SurvivalDataset, rt: &RiskTable, weight: &WeightFunction) -> LogRankResult {
    let v = StatVector::build(ds, rt);
    let mut stat = CompensatedSum::new();
    let mut var = CompensatedSum::new();
    for (i, o) in ds.observations().iter().enumerate() {
        if !o.event {
            continue;
        }
        let w = weight.eval(rt.f_left[i]);
        stat.add(v.0[i] * w);
        var.add(w * w * guarded_div(rt.l[i], rt.at_risk[i] as f64));
    }
    let scale = ds.scale();
    let statistic = scale * stat.total();
    let variance_estimate = scale * var.total();
    let standardized = guarded_div(statistic, (scale * variance_estimate).sqrt());
    LogRankResult {
        statistic,
        variance_estimate,
        standardized,
    }
}

/// The unit-norm RKHS weight `ω*` at which `LR_n(ω*)² = Z_n`.
#[derive(Debug, Clone)]
pub struct OptimalWeight {
    kernel: PreparedKernel,
    points: Vec<f64>,
    coefficients: Vec<f64>,
}

impl OptimalWeight {
    /// `ω*(u) = c Σ_i V_i K(F̂(X_i−), u)`.
    pub fn eval(&self, u: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (&p, &c) in self.points.iter().zip(&self.coefficients) {
            acc.add(c * self.kernel.eval(p, u));
        }
        acc.total()
    }

    /// `(u_k, ω*(u_k))` for `u_k = k / size`, `k = 0..size`.
    pub fn tabulate(&self, size: usize) -> Vec<(f64, f64)> {
        (0..size)
            .map(|k| {
                let u = k as f64 / size as f64;
                (u, self.eval(u))
            })
            .collect()
    }

    /// `ω*` as a weight function usable with [`weighted_logrank`].
    pub fn to_weight_function(&self) -> WeightFunction {
        let this = self.clone();
        WeightFunction::custom("optimal", move |u| this.eval(u))
    }
}

/// Builds `ω*` for the given kernel.
pub fn optimal_weight(ds: &SurvivalDataset, rt: &RiskTable, pk: &PreparedKernel) -> Result<OptimalWeight, EngineError> {
    let z = z_statistic(ds, rt, pk).z;
    if z.is_nan() || z <= 0.0 {
        return Err(EngineError::DegenerateStatistic);
    }
    let c = ds.scale() / z.sqrt();
    let v = StatVector::build(ds, rt);
    let (points, coefficients) = ds
        .observations()
        .iter()
        .enumerate()
        .filter(|(_, o)| o.event)
        .map(|(i, _)| (rt.f_left[i], c * v.0[i]))
        .unzip();
    Ok(OptimalWeight {
        kernel: pk.clone(),
        points,
        coefficients,
    })
}
