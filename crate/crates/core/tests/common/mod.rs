#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rkhs_logrank::{RawObservation, SurvivalDataset};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random two-group data: `n ≤ max_n`, censoring fraction up to `max_cens`,
/// some tied times, balanced or unbalanced groups.
pub fn random_rows(r: &mut ChaCha8Rng, max_n: usize, max_cens: f64) -> Vec<RawObservation> {
    let n = r.random_range(4..=max_n);
    let n0 = if r.random_bool(0.5) { n / 2 } else { r.random_range(1..n) };
    let cens = r.random_range(0.0..=max_cens);
    let tie_grid = r.random_bool(0.3);
    (0..n)
        .map(|i| {
            let group = if i < n0 { 0 } else { 1 };
            let rate = if group == 0 { 1.0 } else { r.random_range(0.5..2.0) };
            let mut time = -(1.0 - r.random::<f64>()).ln() / rate + 1e-3;
            if tie_grid {
                time = (time * 4.0).ceil() / 4.0;
            }
            RawObservation {
                time,
                event: !r.random_bool(cens),
                group,
            }
        })
        .collect()
}

pub fn random_dataset(r: &mut ChaCha8Rng, max_n: usize, max_cens: f64) -> SurvivalDataset {
    loop {
        if let Ok(ds) = SurvivalDataset::validate_and_sort(&random_rows(r, max_n, max_cens)) {
            return ds;
        }
    }
}

/// Per-observation quantities computed directly from the definitions, in input order.
pub struct Naive {
    /// `F̂(X_i−)`
    pub f_left: Vec<f64>,
    /// `V_i`
    pub v: Vec<f64>,
    /// `L(X_i)/Y(X_i)`
    pub l_over_y: Vec<f64>,
    pub scale: f64,
}

/// O(n²) evaluation of the pooled left-limit KM CDF and the vector `V`.
pub fn naive(rows: &[RawObservation]) -> Naive {
    let n = rows.len();
    let n1 = rows.iter().filter(|r| r.group == 1).count();
    let n0 = n - n1;
    let at_risk = |t: f64, g: Option<i64>| rows.iter().filter(|r| r.time >= t && g.is_none_or(|g| r.group == g)).count() as f64;

    let mut event_times: Vec<f64> = rows.iter().filter(|r| r.event).map(|r| r.time).collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();

    let mut f_left = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut l_over_y = Vec::with_capacity(n);
    for r in rows {
        let mut surv = 1.0;
        for &s in event_times.iter().filter(|&&s| s < r.time) {
            let d = rows.iter().filter(|q| q.event && q.time == s).count() as f64;
            surv *= 1.0 - d / at_risk(s, None);
        }
        f_left.push(1.0 - surv);
        let y = at_risk(r.time, None);
        let y0 = at_risk(r.time, Some(0));
        let y1 = at_risk(r.time, Some(1));
        let l = y0 * y1 / y;
        l_over_y.push(l / y);
        let vi = if !r.event || l == 0.0 {
            0.0
        } else if r.group == 0 {
            l / y0
        } else {
            -l / y1
        };
        v.push(vi);
    }
    Naive {
        f_left,
        v,
        l_over_y,
        scale: n as f64 / (n0 as f64 * n1 as f64),
    }
}

/// `LR_n(ω) = n/(n0 n1) Σ ω(F̂(X_i−)) V_i`.
pub fn naive_lrt(nv: &Naive, w: impl Fn(f64) -> f64) -> f64 {
    nv.scale * nv.f_left.iter().zip(&nv.v).map(|(&f, &v)| w(f) * v).sum::<f64>()
}

/// `(n/(n0 n1))² Σ_ij V_i V_j K(F̂_i, F̂_j)`.
pub fn naive_z(nv: &Naive, k: impl Fn(f64, f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for (i, &vi) in nv.v.iter().enumerate() {
        for (j, &vj) in nv.v.iter().enumerate() {
            acc += vi * vj * k(nv.f_left[i], nv.f_left[j]);
        }
    }
    nv.scale * nv.scale * acc
}

/// `Σ_ij |V_i V_j K(F̂_i, F̂_j)|`, the scale of the terms summed in `Z_n`.
pub fn abs_quadratic(nv: &Naive, k: impl Fn(f64, f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for (i, &vi) in nv.v.iter().enumerate() {
        for (j, &vj) in nv.v.iter().enumerate() {
            acc += (vi * vj * k(nv.f_left[i], nv.f_left[j])).abs();
        }
    }
    acc
}

pub fn rows_of(ds: &SurvivalDataset) -> Vec<RawObservation> {
    ds.observations().iter().map(|&o| o.into()).collect()
}

/// Kolmogorov-Smirnov p-value of `sample` against the unit exponential,
/// asymptotic distribution with Stephens' small-sample correction.
pub fn ks_exp1_pvalue(sample: &[f64]) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = 1.0 - (-v).exp();
            (cdf - i as f64 / n).max((i + 1) as f64 / n - cdf)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
