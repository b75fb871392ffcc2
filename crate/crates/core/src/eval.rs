//! Divergences between densities and the rolling-window backtest.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{repair_zero_counts, DensityCurve, DensityPanel, Gender};
use crate::pipeline::{
    forecast_panel, gsy_two_stage, naive_benchmark, ForecastConfig, ForecastSet, GsyConfig, SeriesOrder,
    StateDiagnostics,
};
use crate::anova::AnovaMethod;

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("{} vs {} cells", p.len(), q.len())));
    }
    if let Some(v) = p.iter().chain(q).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!(
            "divergence needs strictly positive cells, found {v}; repair zero counts first"
        )));
    }
    Ok(())
}

/// Symmetric Kullback-Leibler divergence `KL(p||q) + KL(q||p)` of two
/// positive vectors.
pub fn kld_probs(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let forward: f64 = p.iter().zip(q).map(|(a, b)| a * (a.ln() - b.ln())).sum();
    let backward: f64 = p.iter().zip(q).map(|(a, b)| b * (b.ln() - a.ln())).sum();
    Ok(forward + backward)
}

/// Jensen-Shannon type divergence with the geometric-mean midpoint
/// `sqrt(p q)`, left unnormalized.
pub fn jsd_probs(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let mut total = 0.0;
    for (a, b) in p.iter().zip(q) {
        let mid = (a * b).sqrt();
        total += 0.5 * a * (a / mid).ln() + 0.5 * b * (b / mid).ln();
    }
    Ok(total)
}

fn probabilities(p: &DensityCurve, q: &DensityCurve) -> Result<(Vec<f64>, Vec<f64>)> {
    if p.grid().ages() != q.grid().ages() {
        return Err(Error::Shape("densities live on different age grids".into()));
    }
    let scale = |d: &DensityCurve| {
        let total: f64 = d.values().iter().sum();
        d.values().iter().map(|v| v / total).collect::<Vec<_>>()
    };
    Ok((scale(p), scale(q)))
}

/// [`kld_probs`] on densities rescaled to unit total over the grid cells.
pub fn kld(p: &DensityCurve, q: &DensityCurve) -> Result<f64> {
    let (a, b) = probabilities(p, q)?;
    kld_probs(&a, &b)
}

/// [`jsd_probs`] on densities rescaled to unit total over the grid cells.
pub fn jsd(p: &DensityCurve, q: &DensityCurve) -> Result<f64> {
    let (a, b) = probabilities(p, q)?;
    jsd_probs(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fm,
    Fmp,
    Gsy,
    Naive,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fm => "fm",
            Method::Fmp => "fmp",
            Method::Gsy => "gsy",
            Method::Naive => "naive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fm" => Ok(Method::Fm),
            "fmp" => Ok(Method::Fmp),
            "gsy" => Ok(Method::Gsy),
            "naive" => Ok(Method::Naive),
            other => Err(Error::domain(format!("unknown method `{other}`"))),
        }
    }
}

/// A forecast horizon or the average over horizons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonKey {
    Step(usize),
    Mean,
}

impl fmt::Display for HorizonKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HorizonKey::Step(h) => write!(f, "{h}"),
            HorizonKey::Mean => f.write_str("mean"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub method: String,
    pub gender: Gender,
    pub horizon: HorizonKey,
    pub kld_x100: f64,
    pub jsd_x100: f64,
}

/// Divergences by method, gender and horizon, scaled by 100.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn get(&self, method: &str, gender: Gender, horizon: HorizonKey) -> Option<&ErrorRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.gender == gender && r.horizon == horizon)
    }

    pub fn mean(&self, method: &str, gender: Gender) -> Option<&ErrorRow> {
        self.get(method, gender, HorizonKey::Mean)
    }

    /// `method,gender,horizon,kld_x100,jsd_x100`, one line per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "gender", "horizon", "kld_x100", "jsd_x100"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.gender.to_string(),
                r.horizon.to_string(),
                r.kld_x100.to_string(),
                r.jsd_x100.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which training windows enter the backtest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowScheme {
    /// Only windows followed by all `H` holdout years; every window scores
    /// every horizon.
    Complete,
    /// Every window with at least one holdout year; horizon `h` is scored by
    /// the `N - train - h + 1` windows that reach it.
    Rolling,
}

#[derive(Debug, Clone, Serialize)]
pub struct BacktestConfig {
    pub train_window: usize,
    pub horizon: usize,
    pub methods: Vec<Method>,
    /// Settings of the FM and FMP pipelines; `decomposition` is taken from
    /// the method and `horizon` from this config.
    pub forecast: ForecastConfig,
    pub gsy: GsyConfig,
    pub scheme: WindowScheme,
    /// Divide each state's divergence by the number of ages before
    /// averaging over states.
    pub per_age: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            train_window: 52,
            horizon: 10,
            methods: vec![Method::Fm, Method::Fmp, Method::Gsy, Method::Naive],
            forecast: ForecastConfig::default(),
            gsy: GsyConfig::default(),
            scheme: WindowScheme::Complete,
            per_age: true,
        }
    }
}

/// Choices made by one method in one window.
#[derive(Debug, Clone, Serialize)]
pub struct WindowRecord {
    pub origin_year: i32,
    pub method: String,
    pub states: Vec<StateDiagnostics>,
    pub factors: Vec<SeriesOrder>,
}

/// Observed and forecast density at one age, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub method: String,
    pub state: String,
    pub gender: Gender,
    pub year: i32,
    pub horizon: usize,
    pub age: f64,
    pub observed: f64,
    pub forecast: f64,
}

#[derive(Debug, Clone)]
pub struct BacktestReport {
    pub table: ErrorTable,
    pub windows: Vec<WindowRecord>,
    /// Forecasts of the first window against the holdout densities.
    pub plot: Vec<PlotRow>,
}

impl BacktestReport {
    pub fn write_plot_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.plot {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn method_tag(method: Method, config: &BacktestConfig) -> String {
    match method {
        Method::Gsy if !config.gsy.clr => "gsy_noclr".into(),
        m => m.as_str().into(),
    }
}

/// Run one method on a training panel.
pub fn run_method(train: &DensityPanel, method: Method, horizon: usize, config: &BacktestConfig) -> Result<ForecastSet> {
    match method {
        Method::Fm | Method::Fmp => {
            let fc = ForecastConfig {
                decomposition: if method == Method::Fm { AnovaMethod::Fm } else { AnovaMethod::Fmp },
                horizon,
                ..config.forecast.clone()
            };
            forecast_panel(train, &fc)
        }
        Method::Gsy => gsy_two_stage(train, &GsyConfig { horizon, ..config.gsy.clone() }),
        Method::Naive => naive_benchmark(train, horizon),
    }
}

fn positive(d: &DensityCurve) -> Result<DensityCurve> {
    if d.is_strictly_positive() {
        Ok(d.clone())
    } else {
        repair_zero_counts(d, None)
    }
}

/// Per-window scores: `[gender][h] -> (kld, jsd)` already averaged over states.
type WindowScores = [Vec<(f64, f64)>; 2];

struct WindowResult {
    per_method: Vec<(ForecastSet, WindowScores)>,
    origin_year: i32,
}

fn score_window(
    panel: &DensityPanel,
    start: usize,
    config: &BacktestConfig,
) -> Result<WindowResult> {
    let n = panel.n_years();
    let train_end = start + config.train_window;
    let horizon = config.horizon.min(n - train_end);
    let train = panel.select_years(start..train_end)?;
    let origin_year = panel.years()[train_end - 1];
    let n_s = panel.n_states();
    let denom = if config.per_age {
        (n_s * panel.grid().len()) as f64
    } else {
        n_s as f64
    };
    let mut per_method = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let tag = method_tag(method, config);
        let fc = run_method(&train, method, horizon, config)
            .map_err(|e| e.context(format!("method={tag} origin={origin_year}")))?;
        let mut scores: WindowScores = [Vec::with_capacity(horizon), Vec::with_capacity(horizon)];
        for g in Gender::ALL {
            for h in 0..horizon {
                let (mut k_sum, mut j_sum) = (0.0, 0.0);
                for s in 0..n_s {
                    let observed = positive(panel.cell(s, g, train_end + h))?;
                    let forecast = fc.density.cell(s, g, h);
                    k_sum += kld(&observed, forecast)?;
                    j_sum += jsd(&observed, forecast)?;
                }
                scores[g.index()].push((k_sum / denom, j_sum / denom));
            }
        }
        per_method.push((fc, scores));
    }
    Ok(WindowResult {
        per_method,
        origin_year,
    })
}

/// Refit every method on each training window and score its forecasts
/// against the holdout years.
///
/// Per window, gender and horizon the divergence is averaged over states
/// (and ages when `per_age` is set); windows are then averaged per horizon,
/// and horizons into the `mean` row. All values are multiplied by 100.
pub fn rolling_backtest(panel: &DensityPanel, config: &BacktestConfig) -> Result<BacktestReport> {
    let n = panel.n_years();
    if config.train_window < 2 || config.horizon == 0 {
        return Err(Error::domain("backtest needs a training window of at least 2 years and H >= 1"));
    }
    if config.methods.is_empty() {
        return Err(Error::domain("backtest needs at least one method"));
    }
    if n < config.train_window + config.horizon {
        return Err(Error::NotEnoughData(format!(
            "{n} years cannot hold a {}-year training window and {} holdout years",
            config.train_window, config.horizon
        )));
    }
    let last_start = match config.scheme {
        WindowScheme::Complete => n - config.train_window - config.horizon,
        WindowScheme::Rolling => n - config.train_window - 1,
    };
    let results: Vec<WindowResult> = (0..=last_start)
        .into_par_iter()
        .map(|start| score_window(panel, start, config))
        .collect::<Result<_>>()?;

    let mut table = ErrorTable::default();
    for (m, &method) in config.methods.iter().enumerate() {
        let tag = method_tag(method, config);
        for g in Gender::ALL {
            let mut means = (0.0, 0.0);
            for h in 0..config.horizon {
                let vals: Vec<(f64, f64)> = results
                    .iter()
                    .filter_map(|w| w.per_method[m].1[g.index()].get(h).copied())
                    .collect();
                let count = vals.len() as f64;
                let kld_x100 = 100.0 * vals.iter().map(|v| v.0).sum::<f64>() / count;
                let jsd_x100 = 100.0 * vals.iter().map(|v| v.1).sum::<f64>() / count;
                means.0 += kld_x100;
                means.1 += jsd_x100;
                table.rows.push(ErrorRow {
                    method: tag.clone(),
                    gender: g,
                    horizon: HorizonKey::Step(h + 1),
                    kld_x100,
                    jsd_x100,
                });
            }
            table.rows.push(ErrorRow {
                method: tag.clone(),
                gender: g,
                horizon: HorizonKey::Mean,
                kld_x100: means.0 / config.horizon as f64,
                jsd_x100: means.1 / config.horizon as f64,
            });
        }
    }

    let mut windows = Vec::new();
    for w in &results {
        for (fc, _) in &w.per_method {
            windows.push(WindowRecord {
                origin_year: w.origin_year,
                method: fc.method.clone(),
                states: fc.states.clone(),
                factors: fc.factors.clone(),
            });
        }
    }

    let mut plot = Vec::new();
    let first = &results[0];
    let train_end = config.train_window;
    for (m, (fc, _)) in first.per_method.iter().enumerate() {
        let tag = method_tag(config.methods[m], config);
        for (s, g, h, d) in fc.density.iter_indexed() {
            let observed = panel.cell(s, g, train_end + h);
            for (i, age) in d.grid().ages().iter().enumerate() {
                plot.push(PlotRow {
                    method: tag.clone(),
                    state: panel.states()[s].clone(),
                    gender: g,
                    year: panel.years()[train_end + h],
                    horizon: h + 1,
                    age: *age,
                    observed: observed.values()[i],
                    forecast: d.values()[i],
                });
            }
        }
    }

    Ok(BacktestReport { table, windows, plot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_case() {
        let k = kld_probs(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        // direct summation of both directed divergences
        let oracle = 0.5 * (0.5f64 / 0.25).ln()
            + 0.5 * (0.5f64 / 0.75).ln()
            + 0.25 * (0.25f64 / 0.5).ln()
            + 0.75 * (0.75f64 / 0.5).ln();
        assert!((k - oracle).abs() < 1e-15);
        assert!((k - 0.2746).abs() < 1e-4);
        let j = jsd_probs(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((j - k / 4.0).abs() < 1e-15);
    }

    #[test]
    fn curves_compared_on_a_common_mass() {
        use crate::panel::AgeGrid;
        use std::sync::Arc;
        let grid = Arc::new(AgeGrid::unit(0, 1).unwrap());
        let p = DensityCurve::new(Arc::clone(&grid), vec![3.0, 3.0], 1e5).unwrap();
        let q = DensityCurve::new(Arc::clone(&grid), vec![250.0, 750.0], 1e5).unwrap();
        let direct = kld_probs(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((kld(&p, &q).unwrap() - direct).abs() < 1e-15);
        assert!((jsd(&p, &q).unwrap() - direct / 4.0).abs() < 1e-15);
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(matches!(kld_probs(&[0.0, 1.0], &[0.5, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(jsd_probs(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(kld_probs(&[1.0], &[0.5, 0.5]), Err(Error::Shape(_))));
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Fm, Method::Fmp, Method::Gsy, Method::Naive] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("tnh".parse::<Method>().is_err());
    }

    proptest! {
        #[test]
        fn divergence_axioms(
            p in prop::collection::vec(1e-6f64..1.0, 2..30),
            noise in prop::collection::vec(-2.0f64..2.0, 30),
        ) {
            let q: Vec<f64> = p.iter().zip(&noise).map(|(a, e)| a * e.exp()).collect();
            let k = kld_probs(&p, &q).unwrap();
            let j = jsd_probs(&p, &q).unwrap();
            prop_assert!(k >= 0.0 && j >= 0.0);
            prop_assert_eq!(k, kld_probs(&q, &p).unwrap());
            prop_assert!((j - jsd_probs(&q, &p).unwrap()).abs() <= 1e-15 * (1.0 + j));
            prop_assert!((j - k / 4.0).abs() <= 1e-12 * (1.0 + k));
            prop_assert_eq!(kld_probs(&p, &p).unwrap(), 0.0);
            prop_assert_eq!(jsd_probs(&p, &p).unwrap(), 0.0);
            if p.iter().zip(&q).any(|(a, b)| a != b) {
                prop_assert!(k > 0.0);
            }
        }
    }
}
