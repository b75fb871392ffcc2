//! End-to-end forecasters: the ANOVA + stacked FPCA pipeline, the GSY
//! two-stage factor competitor and the no-change benchmark.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::anova::{decompose, AnovaMethod, FmpOptions};
use crate::arima::{auto_arima, forecast_scores, ArimaOptions, ArimaOrder};
use crate::coda::{clr, clr_panel, inv_clr, ClrCurve, ClrPanel};
use crate::error::{Error, Result};
use crate::ftsa::{autocov, fpca, mfpca_stack, select_k_evr, CurveSeries, KRule, LongRunOptions};
use crate::numeric::sorted_symmetric_eigen;
use crate::panel::{repair_zero_counts, DensityCurve, DensityPanel, Gender, Panel};

#[derive(Debug, Clone, Serialize)]
pub struct ForecastConfig {
    pub decomposition: AnovaMethod,
    pub fmp: FmpOptions,
    pub k_rule: KRule,
    pub longrun: LongRunOptions,
    pub arima: ArimaOptions,
    pub horizon: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            decomposition: AnovaMethod::Fm,
            fmp: FmpOptions::default(),
            k_rule: KRule::Evr,
            longrun: LongRunOptions::default(),
            arima: ArimaOptions::default(),
            horizon: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GsyConfig {
    /// Scores retained per (state, gender) series in the first stage.
    pub p0: usize,
    /// Factors retained per score index in the second stage.
    pub r_rule: KRule,
    /// Model clr curves (true) or raw densities (false).
    pub clr: bool,
    pub arima: ArimaOptions,
    pub horizon: usize,
}

impl Default for GsyConfig {
    fn default() -> Self {
        Self {
            p0: 6,
            r_rule: KRule::Evr,
            clr: true,
            arima: ArimaOptions::default(),
            horizon: 10,
        }
    }
}

/// ARIMA order chosen for one modelled series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesOrder {
    pub label: String,
    pub order: ArimaOrder,
    pub fallback: bool,
}

/// What a forecaster chose for one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateDiagnostics {
    pub state: String,
    pub k: usize,
    pub bandwidth: Option<f64>,
    pub orders: Vec<SeriesOrder>,
}

/// Forecasts for the `horizon` years after the last training year.
#[derive(Debug, Clone)]
pub struct ForecastSet {
    pub method: String,
    pub horizon: usize,
    /// Forecast clr curves; absent for methods that do not work in clr space
    /// and cannot represent their output there.
    pub clr: Option<ClrPanel>,
    pub density: DensityPanel,
    pub states: Vec<StateDiagnostics>,
    /// Second-stage factor models of the GSY method.
    pub factors: Vec<SeriesOrder>,
}

fn future_years(panel_years: &[i32], horizon: usize) -> Result<Vec<i32>> {
    if horizon == 0 {
        return Err(Error::domain("forecast horizon must be at least 1"));
    }
    let last = *panel_years.last().expect("panels have years");
    Ok((1..=horizon as i32).map(|h| last + h).collect())
}

fn panel_radix(panel: &DensityPanel) -> f64 {
    panel.cells()[0].radix()
}

fn forecast_series(series: &[f64], options: &ArimaOptions, horizon: usize, label: String) -> Result<(Vec<f64>, SeriesOrder)> {
    let fit = auto_arima(series, options).map_err(|e| e.context(label.clone()))?;
    let fc = forecast_scores(&fit, series, horizon).map_err(|e| e.context(label.clone()))?;
    Ok((
        fc.points,
        SeriesOrder {
            label,
            order: fit.order,
            fallback: fit.fallback,
        },
    ))
}

struct StateForecast {
    /// `[gender][h]` residual forecasts.
    residuals: [Vec<Vec<f64>>; 2],
    diag: StateDiagnostics,
}

fn forecast_state_residuals(res: &ClrPanel, s: usize, config: &ForecastConfig) -> Result<StateForecast> {
    let female = CurveSeries::from_curves(res.series(s, Gender::F))?;
    let male = CurveSeries::from_curves(res.series(s, Gender::M))?;
    let model = mfpca_stack(&female, &male, config.k_rule, &config.longrun)?;
    let k = model.k();
    let h_max = config.horizon;
    let mut score_paths = Vec::with_capacity(2 * k);
    let mut orders = Vec::with_capacity(2 * k);
    for col in 0..2 * k {
        let gender = if col < k { Gender::F } else { Gender::M };
        let label = format!("{}{}", gender, col % k.max(1) + 1);
        let series: Vec<f64> = model.scores().column(col).iter().copied().collect();
        let (path, order) = forecast_series(&series, &config.arima, h_max, label)?;
        score_paths.push(path);
        orders.push(order);
    }
    let p = female.dim();
    let mut residuals = [Vec::with_capacity(h_max), Vec::with_capacity(h_max)];
    for h in 0..h_max {
        let row: Vec<f64> = score_paths.iter().map(|path| path[h]).collect();
        let stacked = model.reconstruct(&row);
        residuals[0].push(stacked[..p].to_vec());
        residuals[1].push(stacked[p..].to_vec());
    }
    Ok(StateForecast {
        residuals,
        diag: StateDiagnostics {
            state: res.states()[s].clone(),
            k,
            bandwidth: model.bandwidth(),
            orders,
        },
    })
}

/// clr, two-way ANOVA, per-state stacked FPCA of the residuals, ARIMA on
/// every score, and back through the inverse clr.
pub fn forecast_panel(panel: &DensityPanel, config: &ForecastConfig) -> Result<ForecastSet> {
    let years = future_years(panel.years(), config.horizon)?;
    let radix = panel_radix(panel);
    let y = clr_panel(panel)?;
    let fit = decompose(&y, config.decomposition, &config.fmp)?;
    let res = &fit.residuals;
    let per_state: Vec<StateForecast> = (0..panel.n_states())
        .into_par_iter()
        .map(|s| {
            forecast_state_residuals(res, s, config)
                .map_err(|e| e.context(format!("state={}", panel.states()[s])))
        })
        .collect::<Result<_>>()?;
    let grid = Arc::clone(panel.grid());
    let clr_fc = Panel::from_fn(Arc::clone(&grid), panel.states().to_vec(), years, |s, g, h| {
        let mut det = fit.deterministic(s, g);
        for (v, x) in det.values_mut().iter_mut().zip(&per_state[s].residuals[g.index()][h]) {
            *v += x;
        }
        Ok(det)
    })?;
    let density = clr_fc.try_map(|c| inv_clr(c, radix))?;
    Ok(ForecastSet {
        method: config.decomposition.as_str().to_string(),
        horizon: config.horizon,
        clr: Some(clr_fc),
        density,
        states: per_state.into_iter().map(|f| f.diag).collect(),
        factors: Vec::new(),
    })
}

/// No-change forecast: the last observed density at every horizon.
pub fn naive_benchmark(panel: &DensityPanel, horizon: usize) -> Result<ForecastSet> {
    let years = future_years(panel.years(), horizon)?;
    let last = panel.n_years() - 1;
    let density = Panel::from_fn(Arc::clone(panel.grid()), panel.states().to_vec(), years, |s, g, _| {
        Ok(panel.cell(s, g, last).clone())
    })?;
    let clr_fc = density.try_map(clr).ok();
    Ok(ForecastSet {
        method: "naive".into(),
        horizon,
        clr: clr_fc,
        density,
        states: panel
            .states()
            .iter()
            .map(|s| StateDiagnostics {
                state: s.clone(),
                k: 0,
                bandwidth: None,
                orders: Vec::new(),
            })
            .collect(),
        factors: Vec::new(),
    })
}

/// Loadings and factors of one `n_s x T` score panel.
#[derive(Debug, Clone)]
pub struct FactorFit {
    /// `n_s x r` orthonormal loadings.
    pub loadings: DMatrix<f64>,
    /// `r x T` factor series, `loadings^T * scores`.
    pub factors: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Scalar factor model of a score panel via the eigendecomposition of
/// `S S^T / T`. Rows of `scores` are states.
pub fn fit_score_factors(scores: &DMatrix<f64>, rule: KRule) -> Result<FactorFit> {
    let (n, t) = scores.shape();
    if n == 1 {
        // nothing to pool: the factor is the series itself
        return match rule {
            KRule::Fixed(r) if r > 1 => Err(Error::domain(format!("{r} factors requested from 1 state"))),
            KRule::Fixed(0) => Ok(FactorFit {
                loadings: DMatrix::zeros(1, 0),
                factors: DMatrix::zeros(0, t),
                eigenvalues: vec![scores.norm_squared() / t as f64],
            }),
            _ => Ok(FactorFit {
                loadings: DMatrix::from_element(1, 1, 1.0),
                factors: scores.clone(),
                eigenvalues: vec![scores.norm_squared() / t as f64],
            }),
        };
    }
    let cov = scores * scores.transpose() / t as f64;
    let (eigenvalues, vectors) = sorted_symmetric_eigen(cov)?;
    let r = match rule {
        KRule::Fixed(r) if r > n => {
            return Err(Error::domain(format!("{r} factors requested from {n} states")))
        }
        KRule::Fixed(r) => r,
        KRule::Evr => {
            if eigenvalues[0] <= 1e-20 {
                0
            } else {
                select_k_evr(&eigenvalues, t)?
            }
        }
    };
    let loadings = vectors.columns(0, r).into_owned();
    let factors = loadings.transpose() * scores;
    Ok(FactorFit {
        loadings,
        factors,
        eigenvalues,
    })
}

fn clip_and_renormalize(values: Vec<f64>, grid: &Arc<crate::panel::AgeGrid>, radix: f64) -> Result<DensityCurve> {
    let clipped: Vec<f64> = values.into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect();
    let curve = DensityCurve::new(Arc::clone(grid), clipped, radix)?;
    let curve = if curve.integral() > 0.0 { curve.normalized()? } else { curve };
    // zero cells would make the divergences infinite
    repair_zero_counts(&curve, None)
}

/// GSY two-stage forecaster, fitted separately for each gender.
///
/// Stage one runs FPCA on every (state, gender) series and keeps `p0`
/// scores. Stage two pools score `j` across states and fits a factor model,
/// whose factors are forecast by ARIMA. Score and curve forecasts are then
/// rebuilt from the loadings and the first-stage eigenfunctions.
pub fn gsy_two_stage(panel: &DensityPanel, config: &GsyConfig) -> Result<ForecastSet> {
    let years = future_years(panel.years(), config.horizon)?;
    if config.p0 == 0 {
        return Err(Error::domain("GSY needs at least one first-stage score"));
    }
    let radix = panel_radix(panel);
    let grid = Arc::clone(panel.grid());
    let curves: ClrPanel = if config.clr {
        clr_panel(panel)?
    } else {
        panel.try_map(|d| ClrCurve::new(Arc::clone(d.grid()), d.values().to_vec()))?
    };
    let n_s = panel.n_states();
    let t_len = panel.n_years();
    let h_max = config.horizon;

    let mut curve_fc: Vec<[Vec<Vec<f64>>; 2]> = vec![[Vec::new(), Vec::new()]; n_s];
    let mut factor_orders = Vec::new();
    let mut state_k = vec![0usize; n_s];
    for g in Gender::ALL {
        let models = (0..n_s)
            .into_par_iter()
            .map(|s| {
                let series = CurveSeries::from_curves(curves.series(s, g))?;
                let cov = autocov(&series, 0)?;
                fpca(&cov, &series, KRule::Fixed(config.p0))
                    .map_err(|e| e.context(format!("state={} gender={g}", panel.states()[s])))
            })
            .collect::<Result<Vec<_>>>()?;
        let p0 = models[0].k();
        // score forecasts [state][j][h]
        let mut score_fc = vec![vec![vec![0.0; h_max]; p0]; n_s];
        let stage_two = (0..p0)
            .into_par_iter()
            .map(|j| {
                let scores = DMatrix::from_fn(n_s, t_len, |s, t| models[s].scores()[(t, j)]);
                let ff = fit_score_factors(&scores, config.r_rule)
                    .map_err(|e| e.context(format!("gender={g} score={}", j + 1)))?;
                let mut paths = Vec::with_capacity(ff.factors.nrows());
                for r in 0..ff.factors.nrows() {
                    let series: Vec<f64> = ff.factors.row(r).iter().copied().collect();
                    let label = format!("{g} score={} factor={}", j + 1, r + 1);
                    paths.push(forecast_series(&series, &config.arima, h_max, label)?);
                }
                Ok((ff, paths))
            })
            .collect::<Result<Vec<_>>>()?;
        for (j, (ff, paths)) in stage_two.into_iter().enumerate() {
            for (r, (path, order)) in paths.into_iter().enumerate() {
                factor_orders.push(order);
                for s in 0..n_s {
                    for h in 0..h_max {
                        score_fc[s][j][h] += ff.loadings[(s, r)] * path[h];
                    }
                }
            }
        }
        for s in 0..n_s {
            state_k[s] = p0;
            curve_fc[s][g.index()] = (0..h_max)
                .map(|h| {
                    let row: Vec<f64> = (0..p0).map(|j| score_fc[s][j][h]).collect();
                    models[s].reconstruct(&row)
                })
                .collect();
        }
    }

    let clr_out = if config.clr {
        Some(Panel::from_fn(Arc::clone(&grid), panel.states().to_vec(), years.clone(), |s, g, h| {
            ClrCurve::new(Arc::clone(&grid), curve_fc[s][g.index()][h].clone())
        })?)
    } else {
        None
    };
    let density = match &clr_out {
        Some(c) => c.try_map(|c| inv_clr(c, radix))?,
        None => Panel::from_fn(Arc::clone(&grid), panel.states().to_vec(), years, |s, g, h| {
            clip_and_renormalize(curve_fc[s][g.index()][h].clone(), &grid, radix)
        })?,
    };
    Ok(ForecastSet {
        method: if config.clr { "gsy" } else { "gsy_noclr" }.into(),
        horizon: h_max,
        clr: clr_out,
        density,
        states: panel
            .states()
            .iter()
            .zip(state_k)
            .map(|(s, k)| StateDiagnostics {
                state: s.clone(),
                k,
                bandwidth: None,
                orders: Vec::new(),
            })
            .collect(),
        factors: factor_orders,
    })
}
