//! Two-way functional ANOVA of a clr panel.
//!
//! Every curve is split as `Y = mu + alpha_s + beta_g + X`, where the first
//! three terms form the deterministic surface and `X` is the time-varying
//! residual. Effects are estimated pointwise in age, either by means (FM) or
//! by Tukey median polish (FMP). Residuals are always the exact remainder,
//! so reconstruction is exact for both estimators.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::coda::{ClrCurve, ClrPanel};
use crate::error::{Error, Result};
use crate::numeric::median_in_place;
use crate::panel::{Gender, Panel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnovaMethod {
    Fm,
    Fmp,
}

impl AnovaMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AnovaMethod::Fm => "fm",
            AnovaMethod::Fmp => "fmp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FmpOptions {
    /// Convergence threshold on the largest sweep adjustment. `None` uses
    /// `1e-8` times the range of the panel values.
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl Default for FmpOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnovaFit {
    pub mu: ClrCurve,
    pub alpha: Vec<ClrCurve>,
    /// Indexed by [`Gender::index`].
    pub beta: [ClrCurve; 2],
    pub residuals: ClrPanel,
    pub method: AnovaMethod,
    /// Median polish sweeps used (largest over ages); 0 for FM.
    pub iterations: usize,
    /// False when median polish hit `max_iter` at some age.
    pub converged: bool,
    /// Tolerance median polish ran with; 0 for FM.
    pub tol: f64,
}

impl AnovaFit {
    /// The deterministic surface `mu + alpha_s + beta_g`.
    pub fn deterministic(&self, state: usize, gender: Gender) -> ClrCurve {
        let values = self
            .mu
            .values()
            .iter()
            .zip(self.alpha[state].values())
            .zip(self.beta[gender.index()].values())
            .map(|((m, a), b)| m + a + b)
            .collect();
        ClrCurve::new(Arc::clone(self.mu.grid()), values).expect("shared grid")
    }
}

fn check_panel(panel: &ClrPanel) -> Result<()> {
    if panel.n_states() < 2 {
        return Err(Error::domain("two-way ANOVA needs at least two states"));
    }
    Ok(())
}

/// Values of every cell at grid point `u`, laid out state, gender, year.
fn column_at(panel: &ClrPanel, u: usize) -> Vec<f64> {
    panel.cells().iter().map(|c| c.values()[u]).collect()
}

struct PointFit {
    mu: f64,
    alpha: Vec<f64>,
    beta: [f64; 2],
    iterations: usize,
    converged: bool,
}

fn assemble(
    panel: &ClrPanel,
    points: Vec<PointFit>,
    method: AnovaMethod,
    tol: f64,
) -> Result<AnovaFit> {
    let grid = Arc::clone(panel.grid());
    let p = grid.len();
    let n_s = panel.n_states();
    let mut mu = vec![0.0; p];
    let mut alpha = vec![vec![0.0; p]; n_s];
    let mut beta = [vec![0.0; p], vec![0.0; p]];
    let (mut iterations, mut converged) = (0, true);
    for (u, pt) in points.into_iter().enumerate() {
        mu[u] = pt.mu;
        for s in 0..n_s {
            alpha[s][u] = pt.alpha[s];
        }
        beta[0][u] = pt.beta[0];
        beta[1][u] = pt.beta[1];
        iterations = iterations.max(pt.iterations);
        converged &= pt.converged;
    }
    let residuals = Panel::from_fn(
        Arc::clone(&grid),
        panel.states().to_vec(),
        panel.years().to_vec(),
        |s, g, t| {
            let y = panel.cell(s, g, t).values();
            let b = &beta[g.index()];
            let values = (0..p).map(|u| y[u] - mu[u] - alpha[s][u] - b[u]).collect();
            ClrCurve::new(Arc::clone(&grid), values)
        },
    )?;
    let curve = |v: Vec<f64>| ClrCurve::new(Arc::clone(&grid), v).expect("grid length");
    let [beta_f, beta_m] = beta;
    Ok(AnovaFit {
        mu: curve(mu),
        alpha: alpha.into_iter().map(curve).collect(),
        beta: [curve(beta_f), curve(beta_m)],
        residuals,
        method,
        iterations,
        converged,
        tol,
    })
}

/// Functional ANOVA by means.
pub fn fm_anova(panel: &ClrPanel) -> Result<AnovaFit> {
    check_panel(panel)?;
    let (n_s, n_t) = (panel.n_states(), panel.n_years());
    let points = (0..panel.grid().len())
        .map(|u| {
            let y = column_at(panel, u);
            let mu = crate::numeric::mean(&y);
            let alpha = (0..n_s)
                .map(|s| crate::numeric::mean(&y[s * 2 * n_t..(s + 1) * 2 * n_t]) - mu)
                .collect();
            let mut beta = [0.0; 2];
            for g in Gender::ALL {
                let total: f64 = (0..n_s)
                    .map(|s| {
                        let start = (s * 2 + g.index()) * n_t;
                        y[start..start + n_t].iter().sum::<f64>()
                    })
                    .sum();
                beta[g.index()] = total / (n_s * n_t) as f64 - mu;
            }
            PointFit {
                mu,
                alpha,
                beta,
                iterations: 0,
                converged: true,
            }
        })
        .collect();
    assemble(panel, points, AnovaMethod::Fm, 0.0)
}

/// Functional ANOVA by median polish.
///
/// Starting from the grand median, sweeps alternately remove pointwise
/// medians of each state (pooling genders and years) and of each gender
/// (pooling states and years), moving the medians of the effects into the
/// grand effect after each half-sweep. Stops once the largest adjustment of
/// a sweep is at most `tol`. A final recentering makes the state and gender
/// effects have zero median.
pub fn fmp_anova(panel: &ClrPanel, options: &FmpOptions) -> Result<AnovaFit> {
    check_panel(panel)?;
    let tol = match options.tol {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::domain(format!("median polish tolerance must be positive, got {t}"))),
        None => default_tolerance(panel),
    };
    if options.max_iter == 0 {
        return Err(Error::domain("median polish needs max_iter >= 1"));
    }
    let (n_s, n_t) = (panel.n_states(), panel.n_years());
    let points = (0..panel.grid().len())
        .into_par_iter()
        .map(|u| polish_point(column_at(panel, u), n_s, n_t, tol, options.max_iter))
        .collect();
    assemble(panel, points, AnovaMethod::Fmp, tol)
}

fn default_tolerance(panel: &ClrPanel) -> f64 {
    let (lo, hi) = panel
        .cells()
        .iter()
        .flat_map(|c| c.values().iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range > 0.0 {
        1e-8 * range
    } else {
        1e-8
    }
}

fn polish_point(mut r: Vec<f64>, n_s: usize, n_t: usize, tol: f64, max_iter: usize) -> PointFit {
    let mut scratch = Vec::with_capacity(r.len());
    scratch.extend_from_slice(&r);
    let mut mu = median_in_place(&mut scratch);
    r.iter_mut().for_each(|v| *v -= mu);
    let mut alpha = vec![0.0; n_s];
    let mut beta = [0.0; 2];
    let row_len = 2 * n_t;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut largest = 0.0f64;

        for (s, a) in alpha.iter_mut().enumerate() {
            let row = &mut r[s * row_len..(s + 1) * row_len];
            scratch.clear();
            scratch.extend_from_slice(row);
            let m = median_in_place(&mut scratch);
            row.iter_mut().for_each(|v| *v -= m);
            *a += m;
            largest = largest.max(m.abs());
        }
        let mb = 0.5 * (beta[0] + beta[1]);
        beta.iter_mut().for_each(|b| *b -= mb);
        mu += mb;
        largest = largest.max(mb.abs());

        for g in 0..2 {
            scratch.clear();
            for s in 0..n_s {
                let start = (s * 2 + g) * n_t;
                scratch.extend_from_slice(&r[start..start + n_t]);
            }
            let m = median_in_place(&mut scratch);
            for s in 0..n_s {
                let start = (s * 2 + g) * n_t;
                r[start..start + n_t].iter_mut().for_each(|v| *v -= m);
            }
            beta[g] += m;
            largest = largest.max(m.abs());
        }
        scratch.clear();
        scratch.extend_from_slice(&alpha);
        let ma = median_in_place(&mut scratch);
        alpha.iter_mut().for_each(|a| *a -= ma);
        mu += ma;
        largest = largest.max(ma.abs());

        if largest <= tol {
            converged = true;
            break;
        }
    }

    scratch.clear();
    scratch.extend_from_slice(&alpha);
    let ma = median_in_place(&mut scratch);
    alpha.iter_mut().for_each(|a| *a -= ma);
    let mb = 0.5 * (beta[0] + beta[1]);
    beta.iter_mut().for_each(|b| *b -= mb);
    mu += ma + mb;

    PointFit {
        mu,
        alpha,
        beta,
        iterations,
        converged,
    }
}

pub fn decompose(panel: &ClrPanel, method: AnovaMethod, fmp: &FmpOptions) -> Result<AnovaFit> {
    match method {
        AnovaMethod::Fm => fm_anova(panel),
        AnovaMethod::Fmp => fmp_anova(panel, fmp),
    }
}

/// `mu + alpha_s + beta_g + X` for every cell.
pub fn reconstruct(fit: &AnovaFit) -> ClrPanel {
    let res = &fit.residuals;
    let mut out = res.clone();
    for s in 0..res.n_states() {
        for g in Gender::ALL {
            let det = fit.deterministic(s, g);
            for t in 0..res.n_years() {
                let cell = out.cell_mut(s, g, t);
                for (v, d) in cell.values_mut().iter_mut().zip(det.values()) {
                    *v += d;
                }
            }
        }
    }
    out
}
