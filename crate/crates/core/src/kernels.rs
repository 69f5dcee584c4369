//! Reproducing kernels on `[0,1)²`.
//!
//! A kernel is described by a [`KernelSpec`] and turned into a
//! [`PreparedKernel`] by [`prepare`]. Preparation is where data-dependent
//! kernels fit their state against the pooled sample (projection Gram matrix,
//! Pearson cell variances, median-heuristic bandwidth); afterwards evaluation
//! is a pure symmetric function.
//!
//! Every kernel except the squared exponential has finite rank, and exposes
//! an explicit feature map `φ` with `K(u, v) = φ(u)·φ(v)`. The test engine
//! uses it to evaluate quadratic forms as sums of squares.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::numerics::{self, NumericsError, SymmetricMatrix};
use crate::survival::{guarded_div, RiskTable, SurvivalDataset};

/// Eigenvalues below this fraction of the largest are dropped by the
/// projection pseudo-inverse.
pub const PINV_REL_TOL: f64 = 1e-10;
/// Bandwidth used when the median heuristic yields zero.
pub const MEDIAN_FALLBACK_BANDWIDTH: f64 = 0.1;
/// Bandwidth of the SEK preset.
pub const SEK_DEFAULT_BANDWIDTH: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("bandwidth must be positive and finite, got {0}")]
    ZeroBandwidth(f64),
    #[error("projection kernel needs at least one basis function")]
    EmptyBasis,
    #[error("Pearson kernel needs at least one cell")]
    ZeroCells,
    #[error("point {index} = {value} lies outside [0, 1)")]
    PointOutOfRange { index: usize, value: f64 },
    #[error("tabulated weight needs a strictly increasing grid with matching values")]
    BadTable,
    #[error("cannot parse kernel spec `{0}`")]
    Parse(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Piecewise-linear weight through `(grid[k], values[k])`, constant outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedWeight {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedWeight {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, KernelError> {
        if grid.is_empty()
            || grid.len() != values.len()
            || grid.windows(2).any(|w| w[0].is_nan() || w[0] >= w[1])
            || grid.iter().chain(&values).any(|x| !x.is_finite())
        {
            return Err(KernelError::BadTable);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, u: f64) -> f64 {
        let k = self.grid.partition_point(|&g| g <= u);
        if k == 0 {
            return self.values[0];
        }
        if k == self.grid.len() {
            return self.values[k - 1];
        }
        let (x0, x1) = (self.grid[k - 1], self.grid[k]);
        let (y0, y1) = (self.values[k - 1], self.values[k]);
        y0 + (y1 - y0) * (u - x0) / (x1 - x0)
    }
}

/// Arbitrary weight given as a closure.
#[derive(Clone)]
pub struct CustomWeight {
    label: String,
    func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CustomWeight {
    pub fn new(label: impl Into<String>, func: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            func: Arc::new(func),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for CustomWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomWeight").field("label", &self.label).finish()
    }
}

/// Weight functions `ω: [0,1) → ℝ`.
#[derive(Debug, Clone)]
pub enum WeightFunction {
    /// `ω(x) = 1`
    Constant1,
    /// `ω(x) = x − 1/2`
    CenteredLinear,
    /// `ω(x) = x^d`
    Monomial(u32),
    /// `ω(x) = x^p (1 − x)^q`
    BetaShape {
        p: f64,
        q: f64,
    },
    Tabulated(TabulatedWeight),
    Custom(CustomWeight),
}

impl WeightFunction {
    pub fn custom(label: impl Into<String>, func: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        WeightFunction::Custom(CustomWeight::new(label, func))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            WeightFunction::Constant1 => 1.0,
            WeightFunction::CenteredLinear => x - 0.5,
            WeightFunction::Monomial(d) => x.powi(*d as i32),
            WeightFunction::BetaShape { p, q } => x.powf(*p) * (1.0 - x).powf(*q),
            WeightFunction::Tabulated(t) => t.eval(x),
            WeightFunction::Custom(c) => (c.func)(x),
        }
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::Constant1 => write!(f, "one"),
            WeightFunction::CenteredLinear => write!(f, "centered"),
            WeightFunction::Monomial(d) => write!(f, "x^{d}"),
            WeightFunction::BetaShape { p, q } => write!(f, "beta({p},{q})"),
            WeightFunction::Tabulated(t) => write!(f, "table[{} points]", t.grid.len()),
            WeightFunction::Custom(c) => write!(f, "custom[{}]", c.label),
        }
    }
}

impl FromStr for WeightFunction {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || KernelError::Parse(s.to_string());
        let t = s.trim();
        match t {
            "one" | "1" => return Ok(WeightFunction::Constant1),
            "centered" | "x-1/2" => return Ok(WeightFunction::CenteredLinear),
            "x" => return Ok(WeightFunction::Monomial(1)),
            _ => {}
        }
        if let Some(deg) = t.strip_prefix("x^") {
            return deg.trim().parse().map(WeightFunction::Monomial).map_err(|_| err());
        }
        if let Some(args) = call_args(t, "beta") {
            let parts = split_top_level(args);
            if parts.len() != 2 {
                return Err(err());
            }
            let p: f64 = parts[0].trim().parse().map_err(|_| err())?;
            let q: f64 = parts[1].trim().parse().map_err(|_| err())?;
            if !(p >= 0.0 && q >= 0.0) {
                return Err(err());
            }
            return Ok(WeightFunction::BetaShape { p, q });
        }
        Err(err())
    }
}

/// Bandwidth of the squared exponential kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median of pairwise distances between the transformed times `F̂(X_i−)`.
    MedianHeuristic,
}

/// Kernel families.
#[derive(Debug, Clone)]
pub enum KernelSpec {
    /// `K(u, v) = ω(u)ω(v)`; recovers the weighted log-rank test.
    WeightedLogRank(WeightFunction),
    /// `K(u, v) = Σ_j ω(u)ω(v) 1{u, v ∈ I_j}` over `cells` equal-width intervals.
    Pearson { cells: usize, weight: WeightFunction },
    /// Pearson kernel with each cell divided by its estimated variance.
    NormalizedPearson { cells: usize, weight: WeightFunction },
    /// Projection onto the span of the basis, orthonormalized under the
    /// estimated null covariance.
    Projection(Vec<WeightFunction>),
    /// `K(u, v) = exp(−(u − v)²/σ²)`
    SquaredExponential(Bandwidth),
}

impl KernelSpec {
    /// Classical log-rank (`ω ≡ 1`).
    pub fn lrp() -> Self {
        KernelSpec::WeightedLogRank(WeightFunction::Constant1)
    }

    /// Crossing-hazards log-rank (`ω(x) = x − 1/2`).
    pub fn lrc() -> Self {
        KernelSpec::WeightedLogRank(WeightFunction::CenteredLinear)
    }

    /// Projection on `{1, x}`.
    pub fn p2w() -> Self {
        KernelSpec::Projection(vec![WeightFunction::Monomial(0), WeightFunction::Monomial(1)])
    }

    /// Projection on `{1, x, x², x³}`.
    pub fn p4w() -> Self {
        KernelSpec::Projection((0..4).map(WeightFunction::Monomial).collect())
    }

    pub fn per4() -> Self {
        KernelSpec::Pearson {
            cells: 4,
            weight: WeightFunction::Constant1,
        }
    }

    pub fn per5() -> Self {
        KernelSpec::Pearson {
            cells: 5,
            weight: WeightFunction::Constant1,
        }
    }

    /// Squared exponential with `σ = 0.1`.
    pub fn sek() -> Self {
        KernelSpec::SquaredExponential(Bandwidth::Fixed(SEK_DEFAULT_BANDWIDTH))
    }

    pub const PRESET_NAMES: [&'static str; 7] = ["lrp", "lrc", "p2w", "p4w", "per4", "per5", "sek"];

    pub fn preset(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "lrp" => Some(Self::lrp()),
            "lrc" => Some(Self::lrc()),
            "p2w" => Some(Self::p2w()),
            "p4w" => Some(Self::p4w()),
            "per4" => Some(Self::per4()),
            "per5" => Some(Self::per5()),
            "sek" => Some(Self::sek()),
            _ => None,
        }
    }

    /// Checks the parameters that do not need data.
    pub fn validate(&self) -> Result<(), KernelError> {
        match self {
            KernelSpec::Pearson { cells, .. } | KernelSpec::NormalizedPearson { cells, .. } if *cells == 0 => Err(KernelError::ZeroCells),
            KernelSpec::Projection(basis) if basis.is_empty() => Err(KernelError::EmptyBasis),
            KernelSpec::SquaredExponential(Bandwidth::Fixed(s)) if !(s.is_finite() && *s > 0.0) => Err(KernelError::ZeroBandwidth(*s)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::WeightedLogRank(w) => write!(f, "logrank({w})"),
            KernelSpec::Pearson { cells, weight } => write!(f, "pearson({cells},{weight})"),
            KernelSpec::NormalizedPearson { cells, weight } => write!(f, "npearson({cells},{weight})"),
            KernelSpec::Projection(basis) => {
                write!(f, "projection(")?;
                for (i, w) in basis.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{w}")?;
                }
                write!(f, ")")
            }
            KernelSpec::SquaredExponential(Bandwidth::Fixed(s)) => write!(f, "sek({s})"),
            KernelSpec::SquaredExponential(Bandwidth::MedianHeuristic) => write!(f, "sek(median)"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = KernelError;

    /// Accepts a preset name (`lrp`, `sek`, ...) or the long form printed by
    /// `Display`, e.g. `pearson(3,centered)`, `projection(one,x,beta(1,1))`,
    /// `sek(median)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || KernelError::Parse(s.to_string());
        let t = s.trim();
        if let Some(spec) = KernelSpec::preset(t) {
            return Ok(spec);
        }
        let spec = if let Some(args) = call_args(t, "logrank") {
            KernelSpec::WeightedLogRank(args.parse()?)
        } else if let Some(args) = call_args(t, "pearson").or_else(|| call_args(t, "npearson")) {
            let parts = split_top_level(args);
            let cells: usize = parts.first().ok_or_else(err)?.trim().parse().map_err(|_| err())?;
            let weight = match parts.len() {
                1 => WeightFunction::Constant1,
                2 => parts[1].parse()?,
                _ => return Err(err()),
            };
            if t.starts_with("npearson") {
                KernelSpec::NormalizedPearson { cells, weight }
            } else {
                KernelSpec::Pearson { cells, weight }
            }
        } else if let Some(args) = call_args(t, "projection") {
            let basis = split_top_level(args)
                .into_iter()
                .map(str::parse)
                .collect::<Result<Vec<WeightFunction>, _>>()?;
            KernelSpec::Projection(basis)
        } else if let Some(args) = call_args(t, "sek") {
            match args.trim() {
                "median" => KernelSpec::SquaredExponential(Bandwidth::MedianHeuristic),
                v => KernelSpec::SquaredExponential(Bandwidth::Fixed(v.parse().map_err(|_| err())?)),
            }
        } else {
            return Err(err());
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `name(args)` → `Some(args)`.
fn call_args<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?.trim_start().strip_prefix('(')?.strip_suffix(')')
}

/// Parses a comma-separated list of kernel specs such as `lrp,sek(median),pearson(3,x)`.
pub fn parse_kernel_list(s: &str) -> Result<Vec<KernelSpec>, KernelError> {
    split_top_level(s)
        .into_iter()
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Splits on commas that are not nested inside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Cell index of `u` for a `cells`-way partition of `[0, 1)`: `I_0 = [0, 1/k]`,
/// `I_j = (j/k, (j+1)/k]` for `j ≥ 1`.
#[inline]
pub fn pearson_cell(u: f64, cells: usize) -> usize {
    let scaled = u * cells as f64;
    if scaled <= 1.0 {
        0
    } else {
        ((scaled.ceil() as usize).saturating_sub(1)).min(cells - 1)
    }
}

#[derive(Debug, Clone)]
enum Form {
    Rank1(WeightFunction),
    Cells {
        cells: usize,
        weight: WeightFunction,
        /// multiplier per cell: 1 for plain Pearson, `1/σ_j²` (or 0) when normalized
        cell_scale: Vec<f64>,
        /// `sqrt(cell_scale)` used by the feature map
        cell_root: Vec<f64>,
    },
    Projection {
        basis: Vec<WeightFunction>,
        gram: SymmetricMatrix,
        pinv: SymmetricMatrix,
        /// rows map `w(u)` to orthonormal features: `φ_k(u) = Σ_a t[k][a] w_a(u)`
        transform: Vec<Vec<f64>>,
    },
    Gaussian {
        bandwidth: f64,
    },
}

/// A kernel ready for evaluation.
#[derive(Debug, Clone)]
pub struct PreparedKernel {
    spec: KernelSpec,
    form: Form,
    factor: f64,
}

/// Fits data-dependent state and returns the evaluable kernel.
pub fn prepare(spec: &KernelSpec, ds: &SurvivalDataset, rt: &RiskTable) -> Result<PreparedKernel, KernelError> {
    spec.validate()?;
    let form = match spec {
        KernelSpec::WeightedLogRank(w) => Form::Rank1(w.clone()),
        KernelSpec::Pearson { cells, weight } => Form::Cells {
            cells: *cells,
            weight: weight.clone(),
            cell_scale: vec![1.0; *cells],
            cell_root: vec![1.0; *cells],
        },
        KernelSpec::NormalizedPearson { cells, weight } => {
            let variances = pearson_cell_variances(*cells, weight, ds, rt);
            let cell_scale: Vec<f64> = variances.iter().map(|&v| guarded_div(1.0, v)).collect();
            let cell_root = cell_scale.iter().map(|s| s.sqrt()).collect();
            Form::Cells {
                cells: *cells,
                weight: weight.clone(),
                cell_scale,
                cell_root,
            }
        }
        KernelSpec::Projection(basis) => {
            let gram = projection_gram(basis, ds, rt);
            let eig = numerics::symmetric_eigen(&gram)?;
            let max_abs = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let k = basis.len();
            let mut pinv = SymmetricMatrix::zeros(k);
            let mut transform = Vec::new();
            for (lambda, vec) in eig.values.iter().zip(&eig.vectors) {
                if *lambda == 0.0 || lambda.abs() <= PINV_REL_TOL * max_abs {
                    continue;
                }
                for i in 0..k {
                    for j in 0..=i {
                        let cur = pinv.get(i, j);
                        pinv.set(i, j, cur + vec[i] * vec[j] / lambda);
                    }
                }
                // P̂ is PSD; a negative eigenvalue here is roundoff of a zero one
                if *lambda > 0.0 {
                    let root = lambda.sqrt();
                    transform.push(vec.iter().map(|x| x / root).collect());
                }
            }
            Form::Projection {
                basis: basis.clone(),
                gram,
                pinv,
                transform,
            }
        }
        KernelSpec::SquaredExponential(bw) => Form::Gaussian {
            bandwidth: match *bw {
                Bandwidth::Fixed(s) => s,
                Bandwidth::MedianHeuristic => median_heuristic(&rt.f_left),
            },
        },
    };
    Ok(PreparedKernel {
        spec: spec.clone(),
        form,
        factor: 1.0,
    })
}

/// `σ_j(ω)² = n/(n0 n1) Σ_{events, F̂(X_i−) ∈ I_j} ω(F̂(X_i−))² L(X_i)/Y(X_i)`.
pub fn pearson_cell_variances(cells: usize, weight: &WeightFunction, ds: &SurvivalDataset, rt: &RiskTable) -> Vec<f64> {
    let mut var = vec![0.0; cells];
    for (i, o) in ds.observations().iter().enumerate() {
        if !o.event {
            continue;
        }
        let u = rt.f_left[i];
        let w = weight.eval(u);
        var[pearson_cell(u, cells)] += w * w * guarded_div(rt.l[i], rt.at_risk[i] as f64);
    }
    let scale = ds.scale();
    var.iter_mut().for_each(|v| *v *= scale);
    var
}

/// `P̂_ab = n/(n0 n1) Σ_events w_a(F̂(X−)) w_b(F̂(X−)) L(X)/Y(X)`.
pub fn projection_gram(basis: &[WeightFunction], ds: &SurvivalDataset, rt: &RiskTable) -> SymmetricMatrix {
    let k = basis.len();
    let mut gram = SymmetricMatrix::zeros(k);
    let mut w = vec![0.0; k];
    for (i, o) in ds.observations().iter().enumerate() {
        if !o.event {
            continue;
        }
        let u = rt.f_left[i];
        for (slot, b) in w.iter_mut().zip(basis) {
            *slot = b.eval(u);
        }
        let mass = guarded_div(rt.l[i], rt.at_risk[i] as f64);
        for a in 0..k {
            for b in 0..=a {
                let cur = gram.get(a, b);
                gram.set(a, b, cur + w[a] * w[b] * mass);
            }
        }
    }
    let scale = ds.scale();
    SymmetricMatrix::from_fn(k, |a, b| gram.get(a, b) * scale)
}

/// Median of `|u_i − u_j|` over `i < j`, falling back to 0.1 when it is zero.
pub fn median_heuristic(points: &[f64]) -> f64 {
    let mut diffs = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for (i, &a) in points.iter().enumerate() {
        for &b in &points[..i] {
            diffs.push((a - b).abs());
        }
    }
    match numerics::median(&mut diffs) {
        Some(m) if m > 0.0 => m,
        _ => MEDIAN_FALLBACK_BANDWIDTH,
    }
}

impl PreparedKernel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// The same kernel multiplied by `factor ≥ 0`.
    pub fn scaled(mut self, factor: f64) -> Self {
        assert!(
            factor >= 0.0 && factor.is_finite(),
            "kernel scale must be a nonnegative finite number"
        );
        self.factor *= factor;
        self
    }

    /// Resolved bandwidth of a squared exponential kernel.
    pub fn bandwidth(&self) -> Option<f64> {
        match self.form {
            Form::Gaussian { bandwidth } => Some(bandwidth),
            _ => None,
        }
    }

    /// Estimated `P̂` and its pseudo-inverse, for projection kernels.
    pub fn projection_matrices(&self) -> Option<(&SymmetricMatrix, &SymmetricMatrix)> {
        match &self.form {
            Form::Projection { gram, pinv, .. } => Some((gram, pinv)),
            _ => None,
        }
    }

    /// Per-cell multipliers of Pearson-type kernels (`1/σ_j²` when normalized).
    pub fn cell_scales(&self) -> Option<&[f64]> {
        match &self.form {
            Form::Cells { cell_scale, .. } => Some(cell_scale),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let raw = match &self.form {
            Form::Rank1(w) => w.eval(u) * w.eval(v),
            Form::Cells {
                cells, weight, cell_scale, ..
            } => {
                let cu = pearson_cell(u, *cells);
                if cu == pearson_cell(v, *cells) {
                    weight.eval(u) * weight.eval(v) * cell_scale[cu]
                } else {
                    0.0
                }
            }
            Form::Projection { basis, transform, .. } => {
                let mut acc = 0.0;
                for row in transform {
                    acc += project(row, basis, u) * project(row, basis, v);
                }
                acc
            }
            Form::Gaussian { bandwidth } => {
                let d = u - v;
                (-(d * d) / (bandwidth * bandwidth)).exp()
            }
        };
        self.factor * raw
    }

    /// Dimension of the explicit feature map, or `None` for infinite rank.
    pub fn feature_dim(&self) -> Option<usize> {
        match &self.form {
            Form::Rank1(_) => Some(1),
            Form::Cells { cells, .. } => Some(*cells),
            Form::Projection { transform, .. } => Some(transform.len()),
            Form::Gaussian { .. } => None,
        }
    }

    /// Writes `φ(u)` into `out` (length [`feature_dim`](Self::feature_dim)).
    ///
    /// `eval(u, v)` equals `φ(u)·φ(v)` up to roundoff.
    pub fn features_into(&self, u: f64, out: &mut [f64]) {
        let root = self.factor.sqrt();
        match &self.form {
            Form::Rank1(w) => out[0] = root * w.eval(u),
            Form::Cells {
                cells, weight, cell_root, ..
            } => {
                out.iter_mut().for_each(|x| *x = 0.0);
                let c = pearson_cell(u, *cells);
                out[c] = root * weight.eval(u) * cell_root[c];
            }
            Form::Projection { basis, transform, .. } => {
                for (slot, row) in out.iter_mut().zip(transform) {
                    *slot = root * project(row, basis, u);
                }
            }
            Form::Gaussian { .. } => panic!("squared exponential kernel has no finite feature map"),
        }
    }

    /// Symmetric matrix `[K(u_i, u_j)]`.
    pub fn gram_matrix(&self, points: &[f64]) -> Result<SymmetricMatrix, KernelError> {
        if let Some((index, &value)) = points.iter().enumerate().find(|(_, &p)| !(0.0..1.0).contains(&p)) {
            return Err(KernelError::PointOutOfRange { index, value });
        }
        Ok(SymmetricMatrix::from_fn(points.len(), |i, j| self.eval(points[i], points[j])))
    }
}

#[inline]
fn project(row: &[f64], basis: &[WeightFunction], u: f64) -> f64 {
    row.iter().zip(basis).map(|(c, w)| c * w.eval(u)).sum()
}

/// Free-function form of [`PreparedKernel::gram_matrix`].
pub fn gram_matrix(pk: &PreparedKernel, points: &[f64]) -> Result<SymmetricMatrix, KernelError> {
    pk.gram_matrix(points)
}
