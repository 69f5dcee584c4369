//! Small numerical building blocks shared by the rest of the crate.
//!
//! Everything here is deliberately dimension-limited: the symmetric matrices
//! handled are projection Gram matrices (a handful of basis functions) and the
//! eigen-solver is a cyclic Jacobi sweep, which is exact enough and simple for
//! matrices of that size. Larger matrices (used only by diagnostics and tests)
//! still work, just slowly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("eigendecomposition did not converge after {sweeps} Jacobi sweeps")]
    EigenFailure { sweeps: usize },
    #[error("bisection: f(lo) = {f_lo} and f(hi) = {f_hi} do not bracket a root")]
    NoBracket { f_lo: f64, f_hi: f64 },
    #[error("bisection: no convergence after {0} iterations")]
    MaxIterations(usize),
    #[error("quadrature did not reach tolerance {tol} (estimate {estimate})")]
    QuadratureFailure { tol: f64, estimate: f64 },
    #[error("quantile of an empty list")]
    EmptyList,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Symmetric matrix stored as its packed lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    packed: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            packed: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds the matrix from `f(i, j)` evaluated on the lower triangle only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut packed = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                packed.push(f(i, j));
            }
        }
        Self { dim, packed }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Symmetrizes a dense row-major matrix by averaging `a[i][j]` and `a[j][i]`.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| 0.5 * (rows[i][j] + rows[j][i]))
    }

    #[inline]
    fn offset(i: usize, j: usize) -> usize {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        hi * (hi + 1) / 2 + lo
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[Self::offset(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.packed[Self::offset(i, j)] = value;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let mut acc = CompensatedSum::new();
                for (j, &xj) in x.iter().enumerate() {
                    acc.add(self.get(i, j) * xj);
                }
                acc.total()
            })
            .collect()
    }

    /// `xᵀ M y` with compensated accumulation.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.mul_vec(y);
        let mut acc = CompensatedSum::new();
        for (a, b) in x.iter().zip(&my) {
            acc.add(a * b);
        }
        acc.total()
    }

    /// Dense product of two symmetric matrices (not symmetric in general).
    pub fn matmul(&self, other: &SymmetricMatrix) -> Vec<Vec<f64>> {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum();
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigen-solver.
#[allow(clippy::needless_range_loop)]
pub fn symmetric_eigen(m: &SymmetricMatrix) -> Result<SymmetricEigen> {
    let n = m.dim();
    let mut a = m.to_dense();
    // v holds eigenvectors as columns
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let scale: f64 = a.iter().flat_map(|r| r.iter()).map(|x| x * x).sum::<f64>().sqrt();
    if n <= 1 || scale == 0.0 {
        return Ok(finish_eigen(&a, &v));
    }

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-3 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let akp = row[p];
                    let akq = row[q];
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        // one last check: the final sweep may have finished the job
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off > 1e-12 * scale {
            return Err(NumericsError::EigenFailure { sweeps: JACOBI_MAX_SWEEPS });
        }
    }
    Ok(finish_eigen(&a, &v))
}

fn finish_eigen(a: &[Vec<f64>], v: &[Vec<f64>]) -> SymmetricEigen {
    let n = a.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    SymmetricEigen {
        values: order.iter().map(|&k| a[k][k]).collect(),
        vectors: order.iter().map(|&k| (0..n).map(|r| v[r][k]).collect()).collect(),
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix.
///
/// Eigenvalues with `|λ| < rel_tol · max|λ|` are treated as zero.
pub fn pseudo_inverse(m: &SymmetricMatrix, rel_tol: f64) -> Result<SymmetricMatrix> {
    if rel_tol.is_nan() || rel_tol <= 0.0 {
        return Err(NumericsError::InvalidArgument("rel_tol must be positive"));
    }
    let eig = symmetric_eigen(m)?;
    let max_abs = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let cutoff = rel_tol * max_abs;
    let n = m.dim();
    let mut out = SymmetricMatrix::zeros(n);
    for (lambda, vec) in eig.values.iter().zip(&eig.vectors) {
        if lambda.abs() <= cutoff || *lambda == 0.0 {
            continue;
        }
        let inv = 1.0 / lambda;
        for i in 0..n {
            for j in 0..=i {
                let cur = out.get(i, j);
                out.set(i, j, cur + inv * vec[i] * vec[j]);
            }
        }
    }
    Ok(out)
}

/// Number of eigenvalues above `rel_tol · max|λ|`.
pub fn numerical_rank(m: &SymmetricMatrix, rel_tol: f64) -> Result<usize> {
    let eig = symmetric_eigen(m)?;
    let max_abs = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    Ok(eig.values.iter().filter(|v| v.abs() > rel_tol * max_abs && **v != 0.0).count())
}

const BISECT_MAX_ITER: usize = 200;

/// Root of a monotone function on a bracketing interval.
///
/// Stops when the bracket is narrower than `tol` or `f` vanishes exactly.
/// Flat roots (e.g. where `f'` also vanishes) are still located to `tol`.
pub fn bisect(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 || lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(NumericsError::InvalidArgument("bisect needs lo <= hi and tol > 0"));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(NumericsError::NoBracket { f_lo, f_hi });
    }
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 || hi - lo < tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(NumericsError::MaxIterations(BISECT_MAX_ITER))
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_DEPTH: u32 = 48;
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut failed = false;
    // absolute floor keeps deep recursion from chasing roundoff
    let floor = 1e-15 * whole.abs();
    let value = simpson_step(&f, a, b, fa, fm, fb, whole, tol, floor, MAX_DEPTH, &mut failed);
    if failed || !value.is_finite() {
        return Err(NumericsError::QuadratureFailure { tol, estimate: value });
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    floor: f64,
    depth: u32,
    failed: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let tol = tol.max(floor);
    if depth == 0 || delta.abs() <= 15.0 * tol {
        if depth == 0 && delta.abs() > 15.0 * tol {
            *failed = true;
        }
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, floor, depth - 1, failed)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, floor, depth - 1, failed)
}

/// `x − sin(x)` without cancellation for small `|x|`.
pub fn x_minus_sin(x: f64) -> f64 {
    if x.abs() >= 0.5 {
        return x - x.sin();
    }
    // Taylor series x³/3! − x⁵/5! + …, truncated where terms fall below roundoff
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut acc = 0.0;
    let mut k = 3.0;
    while term.abs() > 1e-18 * (x * x2).abs() {
        acc += term;
        term *= -x2 / ((k + 1.0) * (k + 2.0));
        k += 2.0;
    }
    acc
}

/// Empirical quantile: the order statistic at 1-based index `ceil(q·N)`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(NumericsError::EmptyList);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(NumericsError::InvalidArgument("quantile level must be in (0, 1)"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[quantile_rank(values.len(), q) - 1])
}

/// 1-based rank `ceil(q·N)` clamped to `[1, N]`.
///
/// The product is nudged down by a few ulps so that e.g. `0.95 · 1000`
/// maps to rank 950 even when it rounds to `950.0000000000001`.
pub fn quantile_rank(len: usize, q: f64) -> usize {
    let x = q * len as f64;
    let rank = (x - x.abs() * 4.0 * f64::EPSILON).ceil() as usize;
    rank.clamp(1, len)
}

/// Median with the usual midpoint convention for even lengths; `None` on empty input.
pub fn median(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Some(upper)
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(0.5 * (lower + upper))
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// SplitMix64 finalizer, used to derive child seeds.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `seed` and a path of labels.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed), |acc, &label| mix64(acc ^ mix64(label)))
}

/// Counter-based random stream: ChaCha keyed by `seed`, stream selected by `counter`.
///
/// The sequence depends only on `(seed, counter)`, so replicate `r` draws the
/// same numbers no matter which thread runs it or in what order.
pub fn stream(seed: u64, counter: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&mix64(seed ^ (k as u64).wrapping_mul(0xa076_1d64_78bd_642f)).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(counter);
    rng
}
