//! Forecasting panels of density-valued functional time series.
//!
//! The pipeline maps each age-at-death density onto an unconstrained
//! function with the centered log-ratio transform, splits the resulting
//! panel into grand, state and gender effects plus a time-varying residual,
//! models the residual with long-run-covariance FPCA and ARIMA score
//! forecasts, and maps the forecasts back onto the density simplex.
//!
//! Module map:
//!
//! - [`panel`]: age grids, density curves, panel loading and zero-count repair
//! - [`coda`]: clr and inverse clr
//! - [`anova`]: two-way functional ANOVA by means or median polish
//! - [`ftsa`]: autocovariance, long-run covariance, FPCA, EVR order selection
//! - [`arima`]: KPSS, automatic ARIMA and score forecasts
//! - [`pipeline`]: end-to-end forecasts, the two-stage competitor and the naive benchmark
//! - [`eval`]: divergences, rolling-window backtest, error tables
//! - [`synthetic`]: seeded generators for simulated panels

pub mod anova;
pub mod arima;
pub mod coda;
mod error;
pub mod eval;
pub mod ftsa;
mod numeric;
pub mod panel;
pub mod pipeline;
pub mod synthetic;

pub use anova::{decompose, fm_anova, fmp_anova, reconstruct, AnovaFit, AnovaMethod, FmpOptions};
pub use arima::{
    auto_arima, fit_order, forecast_scores, kpss_statistic, ArimaFit, ArimaOptions, ArimaOrder,
    ScoreForecast,
};
pub use coda::{clr, clr_panel, inv_clr, inv_clr_panel, ClrCurve, ClrPanel};
pub use error::{Error, Result};
pub use eval::{
    jsd, kld, rolling_backtest, BacktestConfig, BacktestReport, ErrorRow, ErrorTable, HorizonKey,
    Method, WindowScheme,
};
pub use ftsa::{
    autocov, fpca, longrun_cov, mfpca_stack, plugin_bandwidth, select_k_evr, Bandwidth, CovSurface,
    CurveSeries, FpcaModel, KRule, Kernel, LongRunOptions,
};
pub use panel::{
    gini_coefficient, gini_summary, load_panel, repair_zero_counts, AgeGrid, DensityCurve,
    DensityPanel, Gender, LoadOptions, Panel, PanelKey, DEFAULT_RADIX,
};
pub use pipeline::{
    fit_score_factors, forecast_panel, gsy_two_stage, naive_benchmark, ForecastConfig, ForecastSet,
    GsyConfig, StateDiagnostics,
};
pub use synthetic::{simulate_panel, SyntheticConfig, SyntheticTruth};
