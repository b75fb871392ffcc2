//! Long-run covariance estimation and functional principal components.
//!
//! Curves are stored as rows of a `T x p` matrix together with the
//! quadrature weights of their grid. Covariance surfaces act on functions
//! through the weighted inner product, so the eigenproblem solved is the
//! symmetric `W^{1/2} C W^{1/2}` and eigenfunctions are normalized to unit
//! quadrature norm.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::coda::ClrCurve;
use crate::error::{Error, Result};
use crate::numeric::{orient, sorted_symmetric_eigen};

/// Spectra whose largest eigenvalue is below this are treated as zero: the
/// curves do not vary and no component is retained.
const NEGLIGIBLE_EIGENVALUE: f64 = 1e-20;

/// A time-ordered sequence of discretized curves sharing one quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    data: DMatrix<f64>,
    weights: Vec<f64>,
}

impl CurveSeries {
    /// `data` has one row per time point and one column per grid point.
    pub fn new(data: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if data.ncols() != weights.len() {
            return Err(Error::Shape(format!(
                "{} columns for {} quadrature weights",
                data.ncols(),
                weights.len()
            )));
        }
        if data.nrows() == 0 || weights.is_empty() {
            return Err(Error::NotEnoughData("empty curve series".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::domain("quadrature weights must be positive"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("curve series contains non-finite values"));
        }
        Ok(Self { data, weights })
    }

    pub fn from_curves(curves: &[ClrCurve]) -> Result<Self> {
        let first = curves
            .first()
            .ok_or_else(|| Error::NotEnoughData("empty curve series".into()))?;
        let p = first.values().len();
        let data = DMatrix::from_fn(curves.len(), p, |t, u| curves[t].values()[u]);
        Self::new(data, first.grid().weights().to_vec())
    }

    /// Female and male curves side by side on a doubled grid.
    pub fn stack(female: &CurveSeries, male: &CurveSeries) -> Result<Self> {
        if female.len() != male.len() {
            return Err(Error::Shape(format!(
                "female series has {} curves, male series {}",
                female.len(),
                male.len()
            )));
        }
        if female.weights != male.weights {
            return Err(Error::Shape("female and male series use different grids".into()));
        }
        let (t, p) = (female.len(), female.dim());
        let data = DMatrix::from_fn(t, 2 * p, |i, j| {
            if j < p {
                female.data[(i, j)]
            } else {
                male.data[(i, j - p)]
            }
        });
        let mut weights = female.weights.clone();
        weights.extend_from_slice(&male.weights);
        Ok(Self { data, weights })
    }

    /// Number of curves.
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    /// Number of grid points per curve.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> Vec<f64> {
        let t = self.len() as f64;
        self.data.column_iter().map(|c| c.sum() / t).collect()
    }

    fn centered(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut c = self.data.clone();
        for (j, mut col) in c.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mean[j]);
        }
        c
    }
}

/// Lag weight function of the kernel sandwich estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `(1 - |x|)` on `|x| <= 1`.
    Bartlett,
    /// One on `|x| <= 1/2`, decaying linearly to zero at `|x| = 1`.
    FlatTop,
}

impl Kernel {
    pub fn weight(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Kernel::Bartlett => (1.0 - a).max(0.0),
            Kernel::FlatTop => {
                if a <= 0.5 {
                    1.0
                } else if a <= 1.0 {
                    2.0 * (1.0 - a)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::Bartlett => "bartlett",
            Kernel::FlatTop => "flat_top",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Plugin,
    Fixed(f64),
}

/// Kernel and bandwidth of a long-run covariance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LongRunOptions {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
}

impl Default for LongRunOptions {
    fn default() -> Self {
        Self {
            kernel: Kernel::Bartlett,
            bandwidth: Bandwidth::Plugin,
        }
    }
}

/// A covariance kernel `C(u, v)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CovSurface {
    values: DMatrix<f64>,
    weights: Vec<f64>,
    kernel: Option<Kernel>,
    bandwidth: Option<f64>,
}

impl CovSurface {
    pub fn new(values: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if !values.is_square() || values.nrows() != weights.len() {
            return Err(Error::Shape(format!(
                "surface is {}x{} for {} grid points",
                values.nrows(),
                values.ncols(),
                weights.len()
            )));
        }
        Ok(Self {
            values,
            weights,
            kernel: None,
            bandwidth: None,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kernel(&self) -> Option<Kernel> {
        self.kernel
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Hilbert-Schmidt norm under the quadrature weights.
    pub fn norm(&self) -> f64 {
        weighted_hs_norm(&self.values, &self.weights)
    }
}

fn weighted_hs_norm(m: &DMatrix<f64>, w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += w[i] * w[j] * m[(i, j)] * m[(i, j)];
        }
    }
    acc.sqrt()
}

/// `(1/T) sum_t c_t c_{t+lag}^T` for centered rows `c`, `lag >= 0`.
fn lagged_product(centered: &DMatrix<f64>, lag: usize) -> DMatrix<f64> {
    let t = centered.nrows();
    let p = centered.ncols();
    let head = centered.rows(0, t - lag);
    let tail = centered.rows(lag, t - lag);
    let mut out = DMatrix::zeros(p, p);
    out.gemm_tr(1.0 / t as f64, &head, &tail, 0.0);
    out
}

/// Sample autocovariance surface at `lag`: divisor `T`, centered at the
/// sample mean. Negative lags give the transpose of the positive lag.
pub fn autocov(series: &CurveSeries, lag: isize) -> Result<CovSurface> {
    let t = series.len();
    if lag.unsigned_abs() >= t {
        return Err(Error::domain(format!("lag {lag} needs more than {t} curves")));
    }
    let gamma = lagged_product(&series.centered(), lag.unsigned_abs());
    let values = if lag >= 0 { gamma } else { gamma.transpose() };
    CovSurface::new(values, series.weights.clone())
}

fn kernel_sum(centered: &DMatrix<f64>, kernel: Kernel, b: f64, moment: bool) -> DMatrix<f64> {
    let t = centered.nrows();
    let mut acc = if moment {
        DMatrix::zeros(centered.ncols(), centered.ncols())
    } else {
        lagged_product(centered, 0)
    };
    for lag in 1..t {
        let w = kernel.weight(lag as f64 / b);
        if w == 0.0 {
            if lag as f64 >= b {
                break;
            }
            continue;
        }
        let scale = if moment { w * lag as f64 } else { w };
        let gamma = lagged_product(centered, lag);
        acc += (&gamma + gamma.transpose()) * scale;
    }
    acc
}

/// Plug-in bandwidth.
///
/// A Bartlett pilot with `b = max(2, floor(T^{1/5}))` gives `C` and its
/// first generalized derivative `C1 = sum |l| W(l/b) gamma_l`; the
/// bandwidth is `(3/2)^{1/3} (|C1| / |C|)^{2/3} T^{1/3}`, clamped to
/// `[1, T/4]`.
pub fn plugin_bandwidth(series: &CurveSeries) -> f64 {
    let t = series.len();
    let centered = series.centered();
    let pilot = ((t as f64).powf(0.2).floor()).max(2.0);
    let c0 = kernel_sum(&centered, Kernel::Bartlett, pilot, false);
    let c1 = kernel_sum(&centered, Kernel::Bartlett, pilot, true);
    let n0 = weighted_hs_norm(&c0, &series.weights);
    let n1 = weighted_hs_norm(&c1, &series.weights);
    let upper = (t as f64 / 4.0).max(1.0);
    if !(n0 > 0.0) {
        return 1.0;
    }
    let b = 1.5f64.cbrt() * (n1 / n0).powf(2.0 / 3.0) * (t as f64).cbrt();
    b.clamp(1.0, upper)
}

/// Kernel sandwich estimate `sum_l W(l/b) gamma_l`, symmetrized.
pub fn longrun_cov(series: &CurveSeries, options: &LongRunOptions) -> Result<CovSurface> {
    let t = series.len();
    if t < 4 {
        return Err(Error::NotEnoughData(format!(
            "long-run covariance needs at least 4 curves, got {t}"
        )));
    }
    let b = match options.bandwidth {
        Bandwidth::Plugin => plugin_bandwidth(series),
        Bandwidth::Fixed(b) if b > 0.0 && b.is_finite() => b,
        Bandwidth::Fixed(b) => {
            return Err(Error::domain(format!("bandwidth must be positive, got {b}")))
        }
    };
    let sum = kernel_sum(&series.centered(), options.kernel, b, false);
    let values = (&sum + sum.transpose()) * 0.5;
    Ok(CovSurface {
        values,
        weights: series.weights.clone(),
        kernel: Some(options.kernel),
        bandwidth: Some(b),
    })
}

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KRule {
    /// Eigenvalue-ratio criterion.
    Evr,
    Fixed(usize),
}

/// Eigenvalue-ratio choice of the number of components.
///
/// With `delta = 1 / ln(max(theta_1, T))` and `kappa_max` the number of
/// eigenvalues at or above the mean of the leading `min(T, n)` eigenvalues,
/// returns the `kappa` in `1..=kappa_max` minimizing
/// `r * 1(r >= delta) + 1(r <= delta)` where `r = theta_{kappa+1} / theta_kappa`.
/// Ties go to the smaller `kappa`; eigenvalues past the end count as zero.
pub fn select_k_evr(eigenvalues: &[f64], t: usize) -> Result<usize> {
    if t < 2 {
        return Err(Error::domain("EVR needs at least two time points"));
    }
    let mut theta: Vec<f64> = eigenvalues.iter().map(|v| v.max(0.0)).collect();
    theta.sort_by(|a, b| b.total_cmp(a));
    let top = theta.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::domain("EVR on an all-zero spectrum"));
    }
    let delta = 1.0 / top.max(t as f64).ln();
    let n_mean = t.min(theta.len());
    let mean = theta[..n_mean].iter().sum::<f64>() / n_mean as f64;
    let kappa_max = theta.iter().take_while(|v| **v >= mean).count().max(1);

    let mut best = (f64::INFINITY, 1);
    for kappa in 1..=kappa_max {
        let next = theta.get(kappa).copied().unwrap_or(0.0);
        let ratio = next / theta[kappa - 1];
        let mut score = 0.0;
        if ratio >= delta {
            score += ratio;
        }
        if ratio <= delta {
            score += 1.0;
        }
        if score < best.0 {
            best = (score, kappa);
        }
    }
    Ok(best.1)
}

/// Eigenstructure of a covariance surface plus the scores of a series on it.
#[derive(Debug, Clone)]
pub struct FpcaModel {
    mean: Vec<f64>,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenfunctions: DMatrix<f64>,
    k: usize,
    blocks: usize,
    scores: DMatrix<f64>,
    bandwidth: Option<f64>,
}

impl FpcaModel {
    /// Retained number of components.
    pub fn k(&self) -> usize {
        self.k
    }

    /// 1 for an ordinary fit, 2 for a female/male stacked fit.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_len(&self) -> usize {
        self.weights.len() / self.blocks
    }

    /// All eigenvalues, nonincreasing, negatives clipped to zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// All eigenfunctions as columns, orthonormal under the quadrature.
    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.eigenfunctions
    }

    pub fn eigenfunction(&self, j: usize) -> Vec<f64> {
        self.eigenfunctions.column(j).iter().copied().collect()
    }

    /// Sample mean curve (stacked for a two-block fit).
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `T x K` scores, or `T x 2K` for a stacked fit with the female
    /// scores first.
    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    /// Curve implied by one row of scores.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        assert_eq!(scores.len(), self.k * self.blocks, "score vector length");
        let p = self.block_len();
        let mut out = self.mean.clone();
        for (i, v) in out.iter_mut().enumerate() {
            let block = i / p;
            for j in 0..self.k {
                *v += scores[block * self.k + j] * self.eigenfunctions[(i, j)];
            }
        }
        out
    }

    /// Reconstruction of every training curve from its scores.
    pub fn fitted(&self) -> DMatrix<f64> {
        let n = self.weights.len();
        let mut out = DMatrix::zeros(self.scores.nrows(), n);
        for t in 0..self.scores.nrows() {
            let row: Vec<f64> = self.scores.row(t).iter().copied().collect();
            let curve = self.reconstruct(&row);
            out.row_mut(t).copy_from_slice(&curve);
        }
        out
    }
}

struct Eigen {
    values: Vec<f64>,
    functions: DMatrix<f64>,
}

fn weighted_eigen(cov: &CovSurface) -> Result<Eigen> {
    let n = cov.dim();
    let root: Vec<f64> = cov.weights.iter().map(|w| w.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| {
        let v = root[i] * cov.values[(i, j)] * root[j];
        let vt = root[j] * cov.values[(j, i)] * root[i];
        0.5 * (v + vt)
    });
    let (values, vectors) = sorted_symmetric_eigen(sym).map_err(|e| match e {
        Error::Numerical(msg) => Error::Numerical(format!(
            "{msg}; surface norm {:.3e}, grid size {n}",
            cov.norm()
        )),
        other => other,
    })?;
    let mut functions = vectors;
    for mut col in functions.column_iter_mut() {
        for (i, v) in col.iter_mut().enumerate() {
            *v /= root[i];
        }
        orient(col.as_mut_slice());
    }
    Ok(Eigen {
        values: values.into_iter().map(|v| v.max(0.0)).collect(),
        functions,
    })
}

fn choose_k(rule: KRule, eigenvalues: &[f64], t: usize) -> Result<usize> {
    let n = eigenvalues.len();
    match rule {
        KRule::Fixed(k) => Ok(k.min(n)),
        KRule::Evr => {
            if eigenvalues[0] <= NEGLIGIBLE_EIGENVALUE {
                Ok(0)
            } else {
                select_k_evr(eigenvalues, t)
            }
        }
    }
}

/// Eigendecomposition of `cov` and quadrature scores of `series` on the
/// retained eigenfunctions.
pub fn fpca(cov: &CovSurface, series: &CurveSeries, rule: KRule) -> Result<FpcaModel> {
    if cov.weights != series.weights {
        return Err(Error::Shape("surface and series use different grids".into()));
    }
    let eig = weighted_eigen(cov)?;
    let k = choose_k(rule, &eig.values, series.len())?;
    let centered = series.centered();
    let mut scores = DMatrix::zeros(series.len(), k);
    for j in 0..k {
        let phi = eig.functions.column(j);
        for t in 0..series.len() {
            let mut acc = 0.0;
            for (i, w) in series.weights.iter().enumerate() {
                acc += w * centered[(t, i)] * phi[i];
            }
            scores[(t, j)] = acc;
        }
    }
    Ok(FpcaModel {
        mean: series.mean(),
        weights: series.weights.clone(),
        eigenvalues: eig.values,
        eigenfunctions: eig.functions,
        k,
        blocks: 1,
        scores,
        bandwidth: cov.bandwidth,
    })
}

/// Share of a stacked component's energy below which a gender block is too
/// weak to identify the component from that gender alone.
const BLOCK_ENERGY_CUTOFF: f64 = 0.05;

/// Joint FPCA of female and male curves treated as one function on a
/// doubled grid.
///
/// Each retained stacked eigenfunction splits into a female and a male
/// block, giving the `2 x 2K` block basis. A gender's `K` scores start from
/// the stacked inner products and are then refit by least squares on its
/// blocks, restricted to the directions of the block Gram matrix holding at
/// least [`BLOCK_ENERGY_CUTOFF`] of the energy. The female and male Grams of
/// orthonormal stacked functions sum to the identity, so the weak directions
/// are the ones a single gender barely sees; keeping the stacked score there
/// avoids amplifying noise. Each refit can only lower that gender's
/// residual, so the reconstruction is never worse than stacked `K`-term
/// truncation.
pub fn mfpca_stack(
    female: &CurveSeries,
    male: &CurveSeries,
    rule: KRule,
    options: &LongRunOptions,
) -> Result<FpcaModel> {
    let stacked = CurveSeries::stack(female, male)?;
    let cov = longrun_cov(&stacked, options)?;
    let eig = weighted_eigen(&cov)?;
    let k = choose_k(rule, &eig.values, stacked.len())?;
    let p = female.dim();
    let t = stacked.len();
    let centered = stacked.centered();
    let w = &stacked.weights;
    let basis = eig.functions.columns(0, k);
    let weighted = DMatrix::from_fn(2 * p, k, |i, j| w[i] * basis[(i, j)]);
    // stacked inner products, T x K
    let joint = &centered * &weighted;
    let mut scores = DMatrix::zeros(t, 2 * k);
    for block in (0..2).filter(|_| k > 0) {
        let rows = block * p..(block + 1) * p;
        let phi = basis.rows(rows.start, p);
        let wphi = weighted.rows(rows.start, p);
        let gram = phi.transpose() * wphi;
        let (values, vectors) = sorted_symmetric_eigen(gram.clone())?;
        let mut correction = DMatrix::zeros(k, k);
        for (j, &v) in values.iter().enumerate() {
            if v >= BLOCK_ENERGY_CUTOFF {
                let col = vectors.column(j);
                correction += col * col.transpose() / v;
            }
        }
        // block inner products, T x K
        let inner = centered.columns(rows.start, p) * wphi;
        for row in 0..t {
            let start = joint.row(row).transpose();
            let gradient = inner.row(row).transpose() - &gram * &start;
            let coef = start + &correction * gradient;
            for j in 0..k {
                scores[(row, block * k + j)] = coef[j];
            }
        }
    }
    Ok(FpcaModel {
        mean: stacked.mean(),
        weights: stacked.weights.clone(),
        eigenvalues: eig.values,
        eigenfunctions: eig.functions,
        k,
        blocks: 2,
        scores,
        bandwidth: cov.bandwidth,
    })
}
