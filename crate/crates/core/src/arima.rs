//! Automatic ARIMA for score series.
//!
//! The differencing order comes from repeated KPSS level tests. Each
//! `(p, q)` candidate is estimated by conditional sum of squares, and the
//! candidate with the smallest AICc is kept. AR and MA polynomials are
//! parametrized through partial autocorrelations, so every estimate is
//! stationary and invertible.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// 5% critical value of the KPSS level-stationarity test.
pub const KPSS_CRITICAL_5PCT: f64 = 0.463;

const MIN_KPSS_LEN: usize = 10;
/// Partial autocorrelations are kept strictly inside the unit interval.
const PACF_BOUND: f64 = 1.0 - 1e-6;
/// Candidates with an AR or MA root closer to the unit circle than this are
/// not eligible for selection. Near-unit roots let the zero start-up
/// innovations of the CSS recursion absorb deterministic cycles, which
/// lowers the sum of squares without improving forecasts.
const MIN_ROOT_MODULUS: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArimaOptions {
    pub max_p: usize,
    pub max_q: usize,
    pub max_d: usize,
}

impl Default for ArimaOptions {
    fn default() -> Self {
        Self {
            max_p: 3,
            max_q: 3,
            max_d: 2,
        }
    }
}

/// A fitted (or hand-specified) ARIMA model for one series.
///
/// The differenced series `w` follows
/// `w_t = psi + sum tau_i w_{t-i} + e_t + sum nu_j e_{t-j}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    /// `psi`; zero when no intercept is included.
    pub intercept: f64,
    pub include_intercept: bool,
    /// Mean of the differenced process, `psi / (1 - sum tau)`. For `d = 1`
    /// this is the drift.
    pub mean: f64,
    pub sigma2: f64,
    pub aicc: f64,
    pub loglik: f64,
    /// First index of the differenced series whose residual enters the sum
    /// of squares; earlier innovations are taken as zero.
    pub cond_start: usize,
    /// Length of the series the model was fitted on.
    pub n_obs: Option<usize>,
    /// Set when every candidate failed and a random walk with drift was
    /// substituted.
    pub fallback: bool,
}

impl ArimaFit {
    /// A model with given coefficients, for forecasting without estimation.
    pub fn from_parts(order: ArimaOrder, ar: Vec<f64>, ma: Vec<f64>, intercept: Option<f64>) -> Result<Self> {
        if ar.len() != order.p || ma.len() != order.q {
            return Err(Error::Shape(format!(
                "order {order} with {} AR and {} MA coefficients",
                ar.len(),
                ma.len()
            )));
        }
        if ar.iter().chain(&ma).chain(intercept.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite ARIMA coefficient"));
        }
        let psi = intercept.unwrap_or(0.0);
        let denom = 1.0 - ar.iter().sum::<f64>();
        Ok(Self {
            order,
            mean: if denom != 0.0 { psi / denom } else { f64::NAN },
            ar,
            ma,
            intercept: psi,
            include_intercept: intercept.is_some(),
            sigma2: 0.0,
            aicc: f64::NAN,
            loglik: f64::NAN,
            cond_start: order.p,
            n_obs: None,
            fallback: false,
        })
    }

    /// Lag-1 coefficient of the model's pure AR form, `tau_1 + nu_1`.
    pub fn implied_ar1(&self) -> f64 {
        self.ar.first().copied().unwrap_or(0.0) + self.ma.first().copied().unwrap_or(0.0)
    }

    /// Number of estimated parameters counted by AICc.
    pub fn n_params(&self) -> usize {
        self.order.p + self.order.q + 1 + usize::from(self.include_intercept)
    }
}

/// Point forecasts for horizons `1..=H` and the model that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreForecast {
    pub points: Vec<f64>,
    pub fit: ArimaFit,
}

/// KPSS level-stationarity statistic with a Bartlett long-run variance.
pub fn kpss_statistic(series: &[f64]) -> Result<f64> {
    let t = series.len();
    if t < MIN_KPSS_LEN {
        return Err(Error::NotEnoughData(format!(
            "KPSS needs at least {MIN_KPSS_LEN} observations, got {t}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("KPSS on a non-finite series"));
    }
    let n = t as f64;
    let mean = series.iter().sum::<f64>() / n;
    let e: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let scale = series.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if e.iter().all(|v| v.abs() <= 1e-12 * scale) {
        return Ok(0.0);
    }
    let lags = (4.0 * (n / 100.0).powf(0.25)).floor() as usize;
    let mut s2 = e.iter().map(|v| v * v).sum::<f64>();
    for j in 1..=lags.min(t - 1) {
        let w = 1.0 - j as f64 / (lags as f64 + 1.0);
        let g: f64 = (j..t).map(|i| e[i] * e[i - j]).sum();
        s2 += 2.0 * w * g;
    }
    s2 /= n;
    if !(s2 > 0.0) {
        return Ok(0.0);
    }
    let mut partial = 0.0;
    let mut eta = 0.0;
    for v in &e {
        partial += v;
        eta += partial * partial;
    }
    Ok(eta / (n * n) / s2)
}

fn difference(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

fn difference_n(series: &[f64], d: usize) -> Vec<f64> {
    (0..d).fold(series.to_vec(), |s, _| difference(&s))
}

fn is_constant(series: &[f64]) -> bool {
    let scale = series.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    series.iter().all(|v| (v - series[0]).abs() <= 1e-12 * scale)
}

/// Differencing order chosen by KPSS, capped at `max_d`. Series too short
/// to test are not differenced further.
pub fn select_d(series: &[f64], max_d: usize) -> usize {
    let mut w = series.to_vec();
    for d in 0..max_d {
        if w.len() < MIN_KPSS_LEN {
            return d;
        }
        match kpss_statistic(&w) {
            Ok(stat) if stat > KPSS_CRITICAL_5PCT => w = difference(&w),
            _ => return d,
        }
    }
    max_d
}

/// Durbin-Levinson step-up: partial autocorrelations to AR coefficients.
fn pacf_to_coefs(r: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(r.len());
    for (k, &rk) in r.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - rk * prev[k - 1 - j];
        }
        phi.push(rk);
    }
    phi
}

/// Inverse of [`pacf_to_coefs`]; `None` when the polynomial is not stationary.
fn coefs_to_pacf(phi: &[f64]) -> Option<Vec<f64>> {
    let mut cur = phi.to_vec();
    let mut r = vec![0.0; phi.len()];
    for k in (0..phi.len()).rev() {
        let rk = cur[k];
        if !(rk.abs() < 1.0) {
            return None;
        }
        r[k] = rk;
        let denom = 1.0 - rk * rk;
        let prev: Vec<f64> = (0..k).map(|j| (cur[j] + rk * cur[k - 1 - j]) / denom).collect();
        cur = prev;
    }
    Some(r)
}

/// Smallest root modulus of `1 - sum phi_j z^j`; infinite for a constant.
fn min_root_modulus(phi: &[f64]) -> f64 {
    let p = phi.len();
    if phi.iter().all(|v| *v == 0.0) {
        return f64::INFINITY;
    }
    // the companion eigenvalues are the reciprocals of the roots
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            phi[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let largest = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    if largest > 0.0 {
        1.0 / largest
    } else {
        f64::INFINITY
    }
}

fn roots_well_inside(fit: &ArimaFit) -> bool {
    let neg_ma: Vec<f64> = fit.ma.iter().map(|v| -v).collect();
    min_root_modulus(&fit.ar) >= MIN_ROOT_MODULUS && min_root_modulus(&neg_ma) >= MIN_ROOT_MODULUS
}

fn to_unconstrained(r: f64) -> f64 {
    r.clamp(-0.95, 0.95).atanh()
}

fn to_pacf(x: f64) -> f64 {
    x.tanh().clamp(-PACF_BOUND, PACF_BOUND)
}

/// Model coefficients decoded from an unconstrained parameter vector laid
/// out as `[ar pacf.., ma pacf.., mean?]`.
struct Coefs {
    ar: Vec<f64>,
    ma: Vec<f64>,
    mean: f64,
}

fn decode(x: &[f64], p: usize, q: usize, with_mean: bool) -> Coefs {
    let ar = pacf_to_coefs(&x[..p].iter().map(|v| to_pacf(*v)).collect::<Vec<_>>());
    let ma = pacf_to_coefs(&x[p..p + q].iter().map(|v| to_pacf(*v)).collect::<Vec<_>>())
        .into_iter()
        .map(|a| -a)
        .collect();
    let mean = if with_mean { x[p + q] } else { 0.0 };
    Coefs { ar, ma, mean }
}

/// Conditional residuals `e_t` for `t >= start`; earlier entries are zero.
fn css_residuals(w: &[f64], ar: &[f64], ma: &[f64], psi: f64, start: usize) -> Vec<f64> {
    let mut e = vec![0.0; w.len()];
    for t in start..w.len() {
        let mut pred = psi;
        for (i, tau) in ar.iter().enumerate() {
            pred += tau * w[t - 1 - i];
        }
        for (j, nu) in ma.iter().enumerate() {
            if t > j {
                pred += nu * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
    }
    e
}

fn css_sse(w: &[f64], c: &Coefs, start: usize) -> f64 {
    let psi = c.mean * (1.0 - c.ar.iter().sum::<f64>());
    let e = css_residuals(w, &c.ar, &c.ma, psi, start);
    let sse: f64 = e[start..].iter().map(|v| v * v).sum();
    if sse.is_finite() {
        sse
    } else {
        f64::INFINITY
    }
}

/// Ordinary least squares via SVD; `None` if the solve fails.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = x.clone().svd(true, true);
    let sol = svd.solve(y, 1e-10).ok()?;
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Hannan-Rissanen starting values: a long autoregression supplies
/// innovation estimates, then one regression on lagged values and lagged
/// innovations.
fn hannan_rissanen(w: &[f64], p: usize, q: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = w.len();
    let mean = w.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = w.iter().map(|v| v - mean).collect();
    let mut innov = vec![0.0; n];
    let mut start = p;
    if q > 0 {
        let m = (p.max(q) + 3).min(n / 3);
        if m == 0 || n <= 2 * m + 1 {
            return None;
        }
        let rows = n - m;
        let x = DMatrix::from_fn(rows, m, |r, c| z[m + r - 1 - c]);
        let y = DVector::from_fn(rows, |r, _| z[m + r]);
        let a = least_squares(&x, &y)?;
        for t in m..n {
            innov[t] = z[t] - (0..m).map(|c| a[c] * z[t - 1 - c]).sum::<f64>();
        }
        start = (m + q).max(p);
    }
    let k = p + q;
    if k == 0 {
        return Some((vec![], vec![]));
    }
    if n <= start + k {
        return None;
    }
    let rows = n - start;
    let x = DMatrix::from_fn(rows, k, |r, c| {
        let t = start + r;
        if c < p {
            z[t - 1 - c]
        } else {
            innov[t - 1 - (c - p)]
        }
    });
    let y = DVector::from_fn(rows, |r, _| z[start + r]);
    let b = least_squares(&x, &y)?;
    Some((b.iter().take(p).copied().collect(), b.iter().skip(p).copied().collect()))
}

/// Derivative-free minimization with the Nelder-Mead simplex.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], steps: &[f64], max_evals: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    while evals < max_evals {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();
        let (best, worst) = (values[0], values[n]);
        if (worst - best).abs() <= 1e-10 * (best.abs() + 1e-12) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + coef * (simplex[n][j] - centroid[j]))
                .collect()
        };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            evals += 1;
            if fc < fr.min(values[n]) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = (0..n)
                        .map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]))
                        .collect();
                    values[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    (simplex[best].clone(), values[best])
}

fn start_vectors(w: &[f64], p: usize, q: usize, with_mean: bool) -> Vec<Vec<f64>> {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let tail = |v: &mut Vec<f64>| {
        if with_mean {
            v.push(mean);
        }
    };
    let mut starts = Vec::new();
    if let Some((ar, ma)) = hannan_rissanen(w, p, q) {
        let neg_ma: Vec<f64> = ma.iter().map(|v| -v).collect();
        if let (Some(ra), Some(rm)) = (coefs_to_pacf(&ar), coefs_to_pacf(&neg_ma)) {
            let mut v: Vec<f64> = ra.into_iter().chain(rm).map(to_unconstrained).collect();
            tail(&mut v);
            starts.push(v);
        }
    }
    let mut zero = vec![0.0; p + q];
    tail(&mut zero);
    starts.push(zero);
    starts
}

/// CSS estimate of one order on the (already differenced) series `w`, with
/// residuals summed from index `start`.
fn fit_differenced(w: &[f64], order: ArimaOrder, with_mean: bool, start: usize) -> Option<ArimaFit> {
    let (p, q) = (order.p, order.q);
    let n = w.len();
    if start < p || start >= n {
        return None;
    }
    let n_eff = n - start;
    let m = p + q + 1 + usize::from(with_mean);
    if n_eff <= m + 1 {
        return None;
    }
    let dim = p + q + usize::from(with_mean);
    let objective = |x: &[f64]| css_sse(w, &decode(x, p, q, with_mean), start);
    let (x, sse) = if dim == 0 {
        (vec![], objective(&[]))
    } else {
        let sd = {
            let mean = w.iter().sum::<f64>() / n as f64;
            (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
        };
        let mut steps = vec![0.3; p + q];
        if with_mean {
            steps.push(0.25 * sd.max(1e-8));
        }
        let budget = 300 * (dim + 1);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for x0 in start_vectors(w, p, q, with_mean) {
            let (mut x, mut fx) = nelder_mead(&objective, &x0, &steps, budget);
            // a restart from the optimum guards against a collapsed simplex
            let (x2, f2) = nelder_mead(&objective, &x, &steps, budget);
            if f2 < fx {
                x = x2;
                fx = f2;
            }
            if best.as_ref().map_or(true, |(_, b)| fx < *b) {
                best = Some((x, fx));
            }
        }
        best?
    };
    if !sse.is_finite() {
        return None;
    }
    let c = decode(&x, p, q, with_mean);
    let sigma2 = sse / n_eff as f64;
    let ne = n_eff as f64;
    let loglik = -0.5 * ne * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let mf = m as f64;
    let aicc = -2.0 * loglik + 2.0 * mf + 2.0 * mf * (mf + 1.0) / (ne - mf - 1.0);
    if aicc.is_nan() {
        return None;
    }
    let psi = c.mean * (1.0 - c.ar.iter().sum::<f64>());
    Some(ArimaFit {
        order,
        ar: c.ar,
        ma: c.ma,
        intercept: psi,
        include_intercept: with_mean,
        mean: c.mean,
        sigma2,
        aicc,
        loglik,
        cond_start: start,
        n_obs: None,
        fallback: false,
    })
}

/// CSS fit of a single order, using the same conditioning start as
/// [`auto_arima`] with these options, so AICc values are comparable.
pub fn fit_order(series: &[f64], order: ArimaOrder, options: &ArimaOptions) -> Result<ArimaFit> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("ARIMA on a non-finite series"));
    }
    if series.len() <= order.d {
        return Err(Error::NotEnoughData(format!(
            "{} observations cannot be differenced {} times",
            series.len(),
            order.d
        )));
    }
    let w = difference_n(series, order.d);
    let start = options.max_p.max(order.p);
    let mut fit = fit_differenced(&w, order, order.d <= 1, start).ok_or_else(|| {
        Error::Numerical(format!(
            "ARIMA{order} could not be estimated from {} observations",
            series.len()
        ))
    })?;
    fit.n_obs = Some(series.len());
    Ok(fit)
}

fn random_walk_with_drift(series: &[f64]) -> ArimaFit {
    let diffs = difference(series);
    let drift = if diffs.is_empty() {
        0.0
    } else {
        diffs.iter().sum::<f64>() / diffs.len() as f64
    };
    let sigma2 = if diffs.is_empty() {
        0.0
    } else {
        diffs.iter().map(|v| (v - drift).powi(2)).sum::<f64>() / diffs.len() as f64
    };
    ArimaFit {
        order: ArimaOrder::new(0, 1, 0),
        ar: vec![],
        ma: vec![],
        intercept: drift,
        include_intercept: true,
        mean: drift,
        sigma2,
        aicc: f64::NAN,
        loglik: f64::NAN,
        cond_start: 0,
        n_obs: Some(series.len()),
        fallback: true,
    }
}

/// Automatic order selection: KPSS differencing, then the AICc-best CSS fit
/// over all `p <= max_p`, `q <= max_q`.
///
/// If no candidate can be estimated (typically a series too short for any
/// model) the result is a random walk with drift with `fallback` set.
pub fn auto_arima(series: &[f64], options: &ArimaOptions) -> Result<ArimaFit> {
    if series.is_empty() {
        return Err(Error::NotEnoughData("ARIMA on an empty series".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("ARIMA on a non-finite series"));
    }
    let d = select_d(series, options.max_d);
    if series.len() <= d + 1 {
        return Ok(random_walk_with_drift(series));
    }
    let w = difference_n(series, d);
    let with_mean = d <= 1;
    if is_constant(&w) {
        // a deterministic series is reproduced exactly by its mean
        let mean = if with_mean { w[0] } else { 0.0 };
        return Ok(ArimaFit {
            order: ArimaOrder::new(0, d, 0),
            ar: vec![],
            ma: vec![],
            intercept: mean,
            include_intercept: with_mean,
            mean,
            sigma2: 0.0,
            aicc: f64::NEG_INFINITY,
            loglik: f64::INFINITY,
            cond_start: 0,
            n_obs: Some(series.len()),
            fallback: false,
        });
    }
    let start = options.max_p;
    let mut best: Option<ArimaFit> = None;
    for p in 0..=options.max_p {
        for q in 0..=options.max_q {
            let Some(fit) = fit_differenced(&w, ArimaOrder::new(p, d, q), with_mean, start) else {
                continue;
            };
            if !roots_well_inside(&fit) {
                continue;
            }
            if best.as_ref().map_or(true, |b| fit.aicc < b.aicc) {
                best = Some(fit);
            }
        }
    }
    Ok(match best {
        Some(mut fit) => {
            fit.n_obs = Some(series.len());
            fit
        }
        None => random_walk_with_drift(series),
    })
}

/// Conditional-mean forecasts for horizons `1..=horizon`.
///
/// Past innovations are the in-sample CSS residuals, future innovations are
/// zero, and the differenced forecasts are integrated back to levels.
pub fn forecast_scores(fit: &ArimaFit, series: &[f64], horizon: usize) -> Result<ScoreForecast> {
    if horizon == 0 {
        return Err(Error::domain("forecast horizon must be at least 1"));
    }
    if let Some(n) = fit.n_obs {
        if n != series.len() {
            return Err(Error::Shape(format!(
                "model fitted on {n} observations, series has {}",
                series.len()
            )));
        }
    }
    let d = fit.order.d;
    if series.len() <= d {
        return Err(Error::NotEnoughData(format!(
            "{} observations cannot be differenced {d} times",
            series.len()
        )));
    }
    let mut levels = vec![series.to_vec()];
    for _ in 0..d {
        let next = difference(levels.last().expect("nonempty"));
        levels.push(next);
    }
    let w = &levels[d];
    let n = w.len();
    let start = fit.cond_start.max(fit.order.p).min(n);
    let mut e = css_residuals(w, &fit.ar, &fit.ma, fit.intercept, start);
    let mut ext = w.clone();
    for _ in 0..horizon {
        let t = ext.len();
        let mut pred = fit.intercept;
        for (i, tau) in fit.ar.iter().enumerate() {
            if t > i {
                pred += tau * ext[t - 1 - i];
            }
        }
        for (j, nu) in fit.ma.iter().enumerate() {
            if t > j {
                pred += nu * e[t - 1 - j];
            }
        }
        ext.push(pred);
        e.push(0.0);
    }
    let mut future: Vec<f64> = ext[n..].to_vec();
    for level in levels[..d].iter().rev() {
        let mut acc = *level.last().expect("nonempty");
        for v in future.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    if future.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("ARIMA{} forecast diverged", fit.order)));
    }
    Ok(ScoreForecast {
        points: future,
        fit: fit.clone(),
    })
}
