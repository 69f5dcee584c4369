//! Synthetic two-sample survival data and Monte-Carlo experiment harnesses.
//!
//! Group 0 always follows the unit exponential (`Λ₀(t) = t`); group 1 follows
//! one of three hazard families indexed by `θ`. Censoring times are
//! exponential with a rate calibrated per group so that a target fraction of
//! observations is censored.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bootstrap::{run_test_prepared, BootstrapConfig};
use crate::kernels::{self, KernelSpec, PreparedKernel};
use crate::numerics::{self, NumericsError};
use crate::survival::{guarded_div, RiskTable, SurvivalDataset};
use crate::Error;

/// Absolute tolerance of the periodic inverse.
pub const PERIODIC_INVERSE_TOL: f64 = 1e-12;
/// Largest admissible periodic `θ`.
pub const PERIODIC_THETA_MAX: f64 = 15.0;

const DATA_STREAM: u64 = 0xda7a;
const BOOTSTRAP_STREAM: u64 = 0xb007;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("theta = {theta} is outside the admissible range of the {family} family")]
    BadTheta { family: FamilyKind, theta: f64 },
    #[error("target censoring fraction must lie in [0, 1), got {0}")]
    BadCensoring(f64),
    #[error("censoring calibration did not converge for target {0}")]
    NoConvergence(f64),
    #[error("at least one repetition is required")]
    ZeroRepetitions,
    #[error("at least one kernel is required")]
    NoKernels,
    #[error("both groups need at least one observation")]
    EmptyGroup,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// `Λ(t) = θ t`
    Proportional,
    /// `Λ(t) = t^θ`
    Weibull,
    /// `Λ(t) = t − sin(πθt)/(πθ)`
    Periodic,
}

impl FamilyKind {
    /// θ at which group 1 has the same law as group 0, if any.
    pub fn null_theta(self) -> Option<f64> {
        match self {
            FamilyKind::Proportional | FamilyKind::Weibull => Some(1.0),
            FamilyKind::Periodic => None,
        }
    }

    /// Nine evenly spaced θ values spanning the family's range.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            FamilyKind::Proportional | FamilyKind::Weibull => (0..9).map(|k| (4 + 2 * k) as f64 / 10.0).collect(),
            FamilyKind::Periodic => (0..9).map(|k| 1.0 + 1.75 * k as f64).collect(),
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Proportional => "proportional",
            FamilyKind::Weibull => "weibull",
            FamilyKind::Periodic => "periodic",
        })
    }
}

impl FromStr for FamilyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proportional" => Ok(FamilyKind::Proportional),
            "weibull" => Ok(FamilyKind::Weibull),
            "periodic" => Ok(FamilyKind::Periodic),
            other => Err(format!("unknown family `{other}` (expected proportional, weibull or periodic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardFamily {
    kind: FamilyKind,
    theta: f64,
}

impl HazardFamily {
    pub fn new(kind: FamilyKind, theta: f64) -> Result<Self, SimulationError> {
        let ok = match kind {
            FamilyKind::Proportional | FamilyKind::Weibull => theta > 0.0 && theta <= 2.0,
            FamilyKind::Periodic => theta > 0.0 && theta <= PERIODIC_THETA_MAX,
        };
        if !ok {
            return Err(SimulationError::BadTheta { family: kind, theta });
        }
        Ok(Self { kind, theta })
    }

    /// Unit exponential, `Λ(t) = t`.
    pub fn null() -> Self {
        Self {
            kind: FamilyKind::Proportional,
            theta: 1.0,
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        let th = self.theta;
        match self.kind {
            FamilyKind::Proportional => th * t,
            FamilyKind::Weibull => t.powf(th),
            FamilyKind::Periodic => {
                let (anchor, offset) = self.periodic_split(t);
                anchor + offset
            }
        }
    }

    /// Splits the periodic `Λ(t)` as `t_k + (y − sin y)/(πθ)` around the
    /// nearest flat point `t_k = 2k/θ`, with `y = πθ(t − t_k)`.
    fn periodic_split(&self, t: f64) -> (f64, f64) {
        let w = std::f64::consts::PI * self.theta;
        let anchor = 2.0 * (0.5 * self.theta * t).round() / self.theta;
        (anchor, numerics::x_minus_sin(w * (t - anchor)) / w)
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t)).exp()
    }

    /// `Λ⁻¹(e)`.
    pub fn inverse_cumulative_hazard(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        if e.is_infinite() {
            return f64::INFINITY;
        }
        let th = self.theta;
        match self.kind {
            FamilyKind::Proportional => e / th,
            FamilyKind::Weibull => e.powf(1.0 / th),
            FamilyKind::Periodic => {
                let w = std::f64::consts::PI * th;
                // Λ(t) ≥ t − 1/(πθ), so the upper end overshoots e
                let hi = e + 2.0 / w;
                numerics::bisect(
                    |t| {
                        let (anchor, offset) = self.periodic_split(t);
                        (anchor - e) + offset
                    },
                    0.0,
                    hi,
                    PERIODIC_INVERSE_TOL,
                )
                .expect("periodic cumulative hazard brackets its inverse")
            }
        }
    }

    /// Inverse-transform draws `Λ⁻¹(E)` with `E ~ Exp(1)`.
    pub fn sample_survival<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count)
            .map(|_| self.inverse_cumulative_hazard(rng.sample::<f64, _>(Exp1)))
            .collect()
    }
}

/// `P(C < T)` for `T` from `family` and `C ~ Exp(rate)`.
pub fn censoring_fraction(family: &HazardFamily, rate: f64) -> Result<f64, SimulationError> {
    if rate <= 0.0 {
        return Ok(0.0);
    }
    // the integrand ρ e^{−ρt} S(t) is below e^{−40} beyond this point
    let upper = (40.0 / rate).min(family.inverse_cumulative_hazard(40.0));
    const PANELS: usize = 64;
    let mut acc = numerics::CompensatedSum::new();
    for p in 0..PANELS {
        let a = upper * p as f64 / PANELS as f64;
        let b = upper * (p + 1) as f64 / PANELS as f64;
        acc.add(numerics::integrate(|t| rate * (-rate * t).exp() * family.survival(t), a, b, 1e-12)?);
    }
    Ok(acc.total().clamp(0.0, 1.0))
}

/// Exponential censoring rate `ρ` with `P(C < T) = target`.
pub fn calibrate_censoring(family: &HazardFamily, target: f64) -> Result<f64, SimulationError> {
    if !(0.0..1.0).contains(&target) {
        return Err(SimulationError::BadCensoring(target));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut widenings = 0;
    while censoring_fraction(family, hi)? < target {
        hi *= 2.0;
        widenings += 1;
        if widenings > 200 {
            return Err(SimulationError::NoConvergence(target));
        }
    }
    let mut failure = None;
    let rho = numerics::bisect(
        |rate| match censoring_fraction(family, rate) {
            Ok(p) => p - target,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        hi,
        1e-10,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    rho.map_err(|_| SimulationError::NoConvergence(target))
}

/// Draws `count` right-censored observations `(min(T, C), T ≤ C)`.
///
/// Survival and censoring draws alternate, so a fixed stream gives coupled
/// samples across families and censoring rates.
pub fn sample_censored<R: Rng + ?Sized>(family: &HazardFamily, censoring_rate: f64, count: usize, rng: &mut R) -> Vec<(f64, bool)> {
    (0..count)
        .map(|_| {
            let t = family.inverse_cumulative_hazard(rng.sample::<f64, _>(Exp1));
            let e: f64 = rng.sample(Exp1);
            let c = if censoring_rate > 0.0 { e / censoring_rate } else { f64::INFINITY };
            if t <= c {
                (t, true)
            } else {
                (c, false)
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n0: usize,
    pub n1: usize,
    pub family: FamilyKind,
    pub thetas: Vec<f64>,
    pub censoring0: f64,
    pub censoring1: f64,
    pub repetitions: usize,
    pub bootstrap: BootstrapConfig,
    pub kernels: Vec<KernelSpec>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.repetitions == 0 {
            return Err(SimulationError::ZeroRepetitions.into());
        }
        if self.kernels.is_empty() {
            return Err(SimulationError::NoKernels.into());
        }
        if self.n0 == 0 || self.n1 == 0 {
            return Err(SimulationError::EmptyGroup.into());
        }
        for &c in [self.censoring0, self.censoring1].iter() {
            if !(0.0..1.0).contains(&c) {
                return Err(SimulationError::BadCensoring(c).into());
            }
        }
        for &theta in &self.thetas {
            HazardFamily::new(self.family, theta)?;
        }
        for k in &self.kernels {
            k.validate()?;
        }
        self.bootstrap.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub kernel: String,
    pub theta: f64,
    pub censoring_rate0: f64,
    pub censoring_rate1: f64,
    pub rejections: usize,
    pub repetitions: usize,
    pub rate: f64,
    /// binomial Monte-Carlo standard error `sqrt(p(1−p)/reps)`
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub family: FamilyKind,
    pub n0: usize,
    pub n1: usize,
    pub censoring0: f64,
    pub censoring1: f64,
    pub repetitions: usize,
    pub bootstrap: BootstrapConfig,
    pub master_seed: u64,
    pub cells: Vec<ReportCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl ExperimentReport {
    pub fn cell(&self, kernel: &str, theta: f64) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.kernel == kernel && c.theta == theta)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kernel", "theta", "n0", "n1", "cens0", "cens1", "reps", "rejections", "rate", "se"])?;
        for c in &self.cells {
            w.write_record([
                c.kernel.clone(),
                c.theta.to_string(),
                self.n0.to_string(),
                self.n1.to_string(),
                self.censoring0.to_string(),
                self.censoring1.to_string(),
                c.repetitions.to_string(),
                c.rejections.to_string(),
                c.rate.to_string(),
                c.se.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Data stream for repetition `rep`. It does not depend on θ, so every grid
/// point sees the same underlying exponential draws.
pub fn repetition_stream(master_seed: u64, rep: u64) -> ChaCha8Rng {
    numerics::stream(numerics::derive_seed(master_seed, &[DATA_STREAM]), rep)
}

/// One simulated dataset for repetition `rep`.
pub fn simulate_dataset(
    n0: usize,
    n1: usize,
    group1: &HazardFamily,
    rates: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<SurvivalDataset, Error> {
    let g0 = sample_censored(&HazardFamily::null(), rates.0, n0, rng);
    let g1 = sample_censored(group1, rates.1, n1, rng);
    Ok(SurvivalDataset::from_groups(&g0, &g1)?)
}

/// Rejection rates of every kernel at every θ of the grid.
pub fn run_scenario(cfg: &ScenarioConfig, master_seed: u64) -> Result<ExperimentReport, Error> {
    cfg.validate()?;
    let started = Instant::now();
    let rate0 = calibrate_censoring(&HazardFamily::null(), cfg.censoring0)?;
    let mut cells = Vec::with_capacity(cfg.thetas.len() * cfg.kernels.len());

    for &theta in &cfg.thetas {
        let family = HazardFamily::new(cfg.family, theta)?;
        let rate1 = calibrate_censoring(&family, cfg.censoring1)?;

        let outcomes: Vec<Vec<bool>> = (0..cfg.repetitions as u64)
            .into_par_iter()
            .map(|rep| -> Result<Vec<bool>, Error> {
                let mut rng = repetition_stream(master_seed, rep);
                let ds = simulate_dataset(cfg.n0, cfg.n1, &family, (rate0, rate1), &mut rng)?;
                let rt = RiskTable::build(&ds);
                let boot = BootstrapConfig {
                    seed: numerics::derive_seed(master_seed, &[BOOTSTRAP_STREAM, rep]),
                    ..cfg.bootstrap
                };
                cfg.kernels
                    .iter()
                    .map(|spec| {
                        let pk = kernels::prepare(spec, &ds, &rt)?;
                        Ok(run_test_prepared(&ds, &rt, &pk, &boot)?.reject)
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;

        for (k, spec) in cfg.kernels.iter().enumerate() {
            let rejections = outcomes.iter().filter(|o| o[k]).count();
            let rate = rejections as f64 / cfg.repetitions as f64;
            cells.push(ReportCell {
                kernel: spec.to_string(),
                theta,
                censoring_rate0: rate0,
                censoring_rate1: rate1,
                rejections,
                repetitions: cfg.repetitions,
                rate,
                se: (rate * (1.0 - rate) / cfg.repetitions as f64).sqrt(),
            });
        }
    }

    Ok(ExperimentReport {
        family: cfg.family,
        n0: cfg.n0,
        n1: cfg.n1,
        censoring0: cfg.censoring0,
        censoring1: cfg.censoring1,
        repetitions: cfg.repetitions,
        bootstrap: cfg.bootstrap,
        master_seed,
        cells,
        runtime_seconds: Some(started.elapsed().as_secs_f64()),
    })
}

/// A null configuration with known survival and exponential censoring laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullSetup {
    /// common survival law of both groups
    pub survival: HazardFamily,
    pub censoring_rate0: f64,
    pub censoring_rate1: f64,
    /// `n0 / n`
    pub eta: f64,
}

impl NullSetup {
    /// `ψ(x) = s0 s1 / (η s0 + (1 − η) s1)` with `s_c = P(C_c > x)`.
    pub fn psi(&self, x: f64) -> f64 {
        let s = |rate: f64| if rate > 0.0 { (-rate * x).exp() } else { 1.0 };
        let (s0, s1) = (s(self.censoring_rate0), s(self.censoring_rate1));
        guarded_div(s0 * s1, self.eta * s0 + (1.0 - self.eta) * s1)
    }
}

/// Limit of `E[(n0 n1 / n) Z_n]` under the null: `∫₀¹ K(u, u) ψ(F₀⁻¹(u)) du`.
pub fn asymptotic_mean_oracle(setup: &NullSetup, pk: &PreparedKernel) -> Result<f64, SimulationError> {
    // panel edges at multiples of 1/120 include every Pearson cell boundary for k ≤ 6
    const PANELS: usize = 120;
    let f = |u: f64| {
        let x = setup.survival.inverse_cumulative_hazard(-(-u).ln_1p());
        pk.eval(u, u) * setup.psi(x)
    };
    let mut acc = numerics::CompensatedSum::new();
    for p in 0..PANELS {
        let a = p as f64 / PANELS as f64;
        let b = ((p + 1) as f64 / PANELS as f64).min(1.0 - 1e-15);
        acc.add(numerics::integrate(f, a, b, 1e-11)?);
    }
    Ok(acc.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{prepare, KernelSpec};

    #[test]
    fn closed_form_inverses() {
        let p = HazardFamily::new(FamilyKind::Proportional, 1.0).unwrap();
        assert_eq!(p.inverse_cumulative_hazard(0.7), 0.7);
        let w = HazardFamily::new(FamilyKind::Weibull, 2.0).unwrap();
        assert_eq!(w.inverse_cumulative_hazard(4.0), 2.0);
        let q = HazardFamily::new(FamilyKind::Proportional, 2.0).unwrap();
        assert_eq!(q.inverse_cumulative_hazard(3.0), 1.5);
    }

    #[test]
    fn periodic_inverse() {
        let f = HazardFamily::new(FamilyKind::Periodic, 2.0).unwrap();
        assert!((f.inverse_cumulative_hazard(1.0) - 1.0).abs() <= 1e-10);
        for theta in [0.3, 1.0, 4.5, 15.0] {
            let f = HazardFamily::new(FamilyKind::Periodic, theta).unwrap();
            for e in [1e-6, 0.01, 0.5, 1.0, 3.7, 25.0] {
                let t = f.inverse_cumulative_hazard(e);
                assert!((f.cumulative_hazard(t) - e).abs() <= 1e-10, "theta {theta} e {e}");
            }
        }
    }

    #[test]
    fn theta_ranges() {
        assert!(HazardFamily::new(FamilyKind::Periodic, 20.0).is_err());
        assert!(HazardFamily::new(FamilyKind::Periodic, 15.0).is_ok());
        assert!(HazardFamily::new(FamilyKind::Proportional, 0.0).is_err());
        assert!(HazardFamily::new(FamilyKind::Weibull, 2.5).is_err());
        assert_eq!(FamilyKind::Periodic.default_grid().len(), 9);
        assert_eq!(*FamilyKind::Weibull.default_grid().last().unwrap(), 2.0);
    }

    #[test]
    fn null_calibration() {
        let null = HazardFamily::null();
        assert_eq!(calibrate_censoring(&null, 0.0).unwrap(), 0.0);
        assert!((calibrate_censoring(&null, 0.5).unwrap() - 1.0).abs() < 1e-6);
        assert!((calibrate_censoring(&null, 0.1).unwrap() - 1.0 / 9.0).abs() < 1e-6);
        assert!(calibrate_censoring(&null, 1.0).is_err());
    }

    #[test]
    fn censoring_fraction_closed_forms() {
        // proportional: P(C < T) = ρ / (ρ + θ)
        let f = HazardFamily::new(FamilyKind::Proportional, 0.4).unwrap();
        assert!((censoring_fraction(&f, 0.3).unwrap() - 0.3 / 0.7).abs() < 1e-9);
        let f = HazardFamily::new(FamilyKind::Weibull, 0.4).unwrap();
        let rho = calibrate_censoring(&f, 0.3).unwrap();
        assert!((censoring_fraction(&f, rho).unwrap() - 0.3).abs() < 1e-6);
    }

    #[test]
    fn empirical_censoring_fraction() {
        for (kind, theta) in [(FamilyKind::Weibull, 0.6), (FamilyKind::Periodic, 7.0)] {
            let f = HazardFamily::new(kind, theta).unwrap();
            let rho = calibrate_censoring(&f, 0.3).unwrap();
            let mut rng = numerics::stream(4, 0);
            let draws = sample_censored(&f, rho, 100_000, &mut rng);
            let frac = draws.iter().filter(|d| !d.1).count() as f64 / draws.len() as f64;
            assert!((frac - 0.3).abs() <= 0.01, "{kind} {theta}: {frac}");
        }
    }

    #[test]
    fn oracle_closed_forms() {
        let ds = SurvivalDataset::from_groups(&[(1.0, true), (2.0, true)], &[(3.0, true)]).unwrap();
        let rt = RiskTable::build(&ds);
        let lrp = prepare(&KernelSpec::lrp(), &ds, &rt).unwrap();
        let sek = prepare(&KernelSpec::sek(), &ds, &rt).unwrap();
        let none = NullSetup {
            survival: HazardFamily::null(),
            censoring_rate0: 0.0,
            censoring_rate1: 0.0,
            eta: 0.5,
        };
        assert!((asymptotic_mean_oracle(&none, &lrp).unwrap() - 1.0).abs() < 1e-9);
        assert!((asymptotic_mean_oracle(&none, &sek).unwrap() - 1.0).abs() < 1e-9);
        let censored = NullSetup {
            censoring_rate0: 1.0 / 9.0,
            censoring_rate1: 1.0 / 9.0,
            ..none
        };
        assert!((asymptotic_mean_oracle(&censored, &lrp).unwrap() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn single_repetition_report() {
        let cfg = ScenarioConfig {
            n0: 10,
            n1: 10,
            family: FamilyKind::Proportional,
            thetas: vec![1.0, 2.0],
            censoring0: 0.1,
            censoring1: 0.1,
            repetitions: 1,
            bootstrap: BootstrapConfig {
                replicates: 50,
                ..Default::default()
            },
            kernels: vec![KernelSpec::lrp(), KernelSpec::sek()],
        };
        let report = run_scenario(&cfg, 7).unwrap();
        assert_eq!(report.cells.len(), 4);
        for c in &report.cells {
            assert!(c.rate == 0.0 || c.rate == 1.0);
            assert_eq!(c.repetitions, 1);
        }
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("kernel,theta,n0,n1,cens0,cens1,reps,rejections,rate,se\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn scenario_validation() {
        let mut cfg = ScenarioConfig {
            n0: 5,
            n1: 5,
            family: FamilyKind::Periodic,
            thetas: vec![20.0],
            censoring0: 0.0,
            censoring1: 0.0,
            repetitions: 3,
            bootstrap: BootstrapConfig::default(),
            kernels: vec![KernelSpec::lrp()],
        };
        assert!(matches!(
            run_scenario(&cfg, 0),
            Err(Error::Simulation(SimulationError::BadTheta { .. }))
        ));
        cfg.thetas = vec![1.0];
        cfg.repetitions = 0;
        assert!(matches!(
            run_scenario(&cfg, 0),
            Err(Error::Simulation(SimulationError::ZeroRepetitions))
        ));
    }
}
