use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use densfts::{
    clr_panel, decompose, gini_summary, load_panel, mfpca_stack, rolling_backtest, simulate_panel,
    ClrCurve, CurveSeries, DensityPanel, ForecastSet, Gender, LoadOptions, Panel, SyntheticConfig,
};
use densfts::eval::{run_method, WindowRecord};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub struct Context {
    pub config: RunConfig,
    pub config_path: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub outdir: Option<PathBuf>,
}

impl Context {
    fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::usage("--input", "this command needs --input <csv>"))
    }

    fn load(&self) -> Result<DensityPanel> {
        let path = self.input()?;
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        load_panel(file, &LoadOptions::default()).map_err(|source| CliError::Data {
            path: path.to_path_buf(),
            source,
        })
    }

    fn outdir(&self) -> Result<PathBuf> {
        let dir = self.outdir.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.outdir()?.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        Ok((path, BufWriter::new(file)))
    }

    fn csv(&self, name: &str) -> Result<(PathBuf, csv::Writer<BufWriter<File>>)> {
        let (path, w) = self.create(name)?;
        Ok((path, csv::Writer::from_writer(w)))
    }
}

fn finish(path: PathBuf, mut w: csv::Writer<BufWriter<File>>) -> Result<PathBuf> {
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn age_header(prefix: &[&str], ages: &[f64]) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain(ages.iter().map(|a| a.to_string()))
        .collect()
}

fn curve_row(prefix: Vec<String>, values: &[f64]) -> Vec<String> {
    prefix.into_iter().chain(values.iter().map(|v| v.to_string())).collect()
}

fn summary_line(panel: &DensityPanel) -> String {
    let years = panel.years();
    format!(
        "states={} years={} ages={} first_year={} last_year={}",
        panel.n_states(),
        panel.n_years(),
        panel.grid().len(),
        years[0],
        years[years.len() - 1]
    )
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn validate(ctx: &Context) -> Result<()> {
    let panel = ctx.load()?;
    println!("ok {}", summary_line(&panel));
    if ctx.outdir.is_some() {
        let (path, mut w) = ctx.csv("gini.csv")?;
        w.write_record(["state", "gender", "year", "gini"])?;
        for (key, g) in gini_summary(&panel)? {
            w.write_record([key.state, key.gender.to_string(), key.year.to_string(), g.to_string()])?;
        }
        report_written(&[finish(path, w)?]);
    }
    Ok(())
}

fn write_curve_panel(ctx: &Context, name: &str, panel: &Panel<ClrCurve>) -> Result<PathBuf> {
    let (path, mut w) = ctx.csv(name)?;
    w.write_record(age_header(&["state", "gender", "year"], panel.grid().ages()))?;
    for (s, g, t, c) in panel.iter_indexed() {
        let prefix = vec![panel.states()[s].clone(), g.to_string(), panel.years()[t].to_string()];
        w.write_record(curve_row(prefix, c.values()))?;
    }
    finish(path, w)
}

pub fn transform(ctx: &Context) -> Result<()> {
    let panel = ctx.load()?;
    let clr = clr_panel(&panel)?;
    report_written(&[write_curve_panel(ctx, "clr.csv", &clr)?]);
    Ok(())
}

pub fn decompose_cmd(ctx: &Context) -> Result<()> {
    let panel = ctx.load()?;
    let fc = ctx.config.forecast();
    let fit = decompose(&clr_panel(&panel)?, fc.decomposition, &fc.fmp)?;
    let ages = panel.grid().ages();
    let mut written = Vec::new();

    let (path, mut w) = ctx.csv("mu.csv")?;
    w.write_record(age_header(&[], ages))?;
    w.write_record(curve_row(Vec::new(), fit.mu.values()))?;
    written.push(finish(path, w)?);

    let (path, mut w) = ctx.csv("alpha.csv")?;
    w.write_record(age_header(&["state"], ages))?;
    for (s, a) in fit.alpha.iter().enumerate() {
        w.write_record(curve_row(vec![panel.states()[s].clone()], a.values()))?;
    }
    written.push(finish(path, w)?);

    let (path, mut w) = ctx.csv("beta.csv")?;
    w.write_record(age_header(&["gender"], ages))?;
    for g in Gender::ALL {
        w.write_record(curve_row(vec![g.to_string()], fit.beta[g.index()].values()))?;
    }
    written.push(finish(path, w)?);

    written.push(write_curve_panel(ctx, "residuals.csv", &fit.residuals)?);
    report_written(&written);
    Ok(())
}

pub fn fpca_cmd(ctx: &Context) -> Result<()> {
    let panel = ctx.load()?;
    let fc = ctx.config.forecast();
    let fit = decompose(&clr_panel(&panel)?, fc.decomposition, &fc.fmp)?;
    let ages = panel.grid().ages();
    let p = ages.len();
    let (p_sum, mut summary) = ctx.csv("fpca_summary.csv")?;
    let (p_val, mut values) = ctx.csv("fpca_eigenvalues.csv")?;
    let (p_fun, mut functions) = ctx.csv("fpca_eigenfunctions.csv")?;
    summary.write_record(["state", "k", "bandwidth"])?;
    values.write_record(["state", "component", "eigenvalue"])?;
    functions.write_record(age_header(&["state", "component", "gender"], ages))?;
    for (s, state) in panel.states().iter().enumerate() {
        let series = |g: Gender| CurveSeries::from_curves(fit.residuals.series(s, g));
        let model = mfpca_stack(&series(Gender::F)?, &series(Gender::M)?, fc.k_rule, &fc.longrun)
            .map_err(|e| e.context(format!("state={state}")))?;
        let bandwidth = model.bandwidth().map(|b| b.to_string()).unwrap_or_default();
        summary.write_record([state.clone(), model.k().to_string(), bandwidth])?;
        for (j, v) in model.eigenvalues().iter().enumerate() {
            values.write_record([state.clone(), (j + 1).to_string(), v.to_string()])?;
        }
        for j in 0..model.k() {
            let phi = model.eigenfunction(j);
            for g in Gender::ALL {
                let block = &phi[g.index() * p..(g.index() + 1) * p];
                let prefix = vec![state.clone(), (j + 1).to_string(), g.to_string()];
                functions.write_record(curve_row(prefix, block))?;
            }
        }
    }
    report_written(&[finish(p_sum, summary)?, finish(p_val, values)?, finish(p_fun, functions)?]);
    Ok(())
}

#[derive(Serialize)]
struct InputSummary {
    path: String,
    states: usize,
    first_year: i32,
    last_year: i32,
    ages: usize,
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    input: InputSummary,
    config_file: Option<String>,
    /// Canonical config text; feeding it back via `--config` reruns the command.
    config_text: String,
    config: &'a RunConfig,
    resolved: densfts::BacktestConfig,
    fits: T,
}

fn input_summary(ctx: &Context, panel: &DensityPanel) -> Result<InputSummary> {
    let years = panel.years();
    Ok(InputSummary {
        path: ctx.input()?.display().to_string(),
        states: panel.n_states(),
        first_year: years[0],
        last_year: years[years.len() - 1],
        ages: panel.grid().len(),
    })
}

fn write_manifest<T: Serialize>(ctx: &Context, command: &'static str, panel: &DensityPanel, fits: T) -> Result<PathBuf> {
    let manifest = Manifest {
        tool: "densfts",
        version: env!("CARGO_PKG_VERSION"),
        command,
        input: input_summary(ctx, panel)?,
        config_file: ctx.config_path.as_ref().map(|p| p.display().to_string()),
        config_text: ctx.config.to_text(),
        config: &ctx.config,
        resolved: ctx.config.backtest(),
        fits,
    };
    let (path, mut w) = ctx.create("manifest.json")?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n").map_err(|e| CliError::io(&path, e))?;
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

pub fn forecast(ctx: &Context) -> Result<()> {
    let panel = ctx.load()?;
    let cfg = ctx.config.backtest();
    let mut sets: Vec<ForecastSet> = Vec::new();
    for &method in &cfg.methods {
        let set = run_method(&panel, method, cfg.horizon, &cfg).map_err(|e| e.context(format!("method={method}")))?;
        sets.push(set);
    }
    let (path, mut w) = ctx.csv("forecast.csv")?;
    w.write_record(age_header(&["method", "state", "gender", "year", "horizon"], panel.grid().ages()))?;
    for set in &sets {
        for (s, g, h, d) in set.density.iter_indexed() {
            let prefix = vec![
                set.method.clone(),
                set.density.states()[s].clone(),
                g.to_string(),
                set.density.years()[h].to_string(),
                (h + 1).to_string(),
            ];
            w.write_record(curve_row(prefix, d.values()))?;
        }
    }
    let forecast_path = finish(path, w)?;
    let origin_year = *panel.years().last().expect("panel has years");
    let fits: Vec<WindowRecord> = sets
        .into_iter()
        .map(|s| WindowRecord {
            origin_year,
            method: s.method,
            states: s.states,
            factors: s.factors,
        })
        .collect();
    let manifest = write_manifest(ctx, "forecast", &panel, fits)?;
    report_written(&[forecast_path, manifest]);
    Ok(())
}

pub fn backtest(ctx: &Context) -> Result<()> {
    let panel = ctx.load()?;
    let report = rolling_backtest(&panel, &ctx.config.backtest())?;
    let (errors_path, w) = ctx.create("errors.csv")?;
    report.table.write_csv(w)?;
    let (plot_path, w) = ctx.create("plot.csv")?;
    report.write_plot_csv(w)?;
    let manifest = write_manifest(ctx, "backtest", &panel, &report.windows)?;
    report_written(&[errors_path, plot_path, manifest]);
    Ok(())
}

/// Print an errors CSV as a table: one row per horizon, KLD and JSD per
/// method and gender.
pub fn report(ctx: &Context) -> Result<()> {
    let path = ctx.input()?;
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let expected = ["method", "gender", "horizon", "kld_x100", "jsd_x100"];
    if headers.iter().ne(expected) {
        return Err(CliError::Data {
            path: path.to_path_buf(),
            source: densfts::Error::Parse {
                row: 1,
                message: format!("expected header {}", expected.join(",")),
            },
        });
    }
    let mut columns: Vec<(String, String)> = Vec::new();
    let mut horizons: Vec<String> = Vec::new();
    let mut cells = std::collections::HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let column = (record[0].to_string(), record[1].to_string());
        if !columns.contains(&column) {
            columns.push(column.clone());
        }
        if !horizons.iter().any(|h| h == &record[2]) {
            horizons.push(record[2].to_string());
        }
        let parse = |v: &str| {
            v.parse::<f64>().map_err(|_| CliError::Data {
                path: path.to_path_buf(),
                source: densfts::Error::Parse {
                    row: i + 2,
                    message: format!("not a number: {v:?}"),
                },
            })
        };
        cells.insert((column, record[2].to_string()), (parse(&record[3])?, parse(&record[4])?));
    }
    let mut header = format!("{:>8}", "h");
    for (m, g) in &columns {
        header.push_str(&format!(" {:>14} {:>14}", format!("{m}.{g}.kld"), format!("{m}.{g}.jsd")));
    }
    println!("{header}");
    for h in &horizons {
        let mut line = format!("{h:>8}");
        for col in &columns {
            match cells.get(&(col.clone(), h.clone())) {
                Some((k, j)) => line.push_str(&format!(" {k:>14.3} {j:>14.3}")),
                None => line.push_str(&format!(" {:>14} {:>14}", "-", "-")),
            }
        }
        println!("{line}");
    }
    Ok(())
}

pub fn simulate(ctx: &Context, states: usize, years: usize) -> Result<()> {
    let synth = SyntheticConfig {
        n_states: states,
        n_years: years,
        ..SyntheticConfig::default()
    };
    let (panel, _) = simulate_panel(&synth, ctx.config.seed)?;
    let (path, mut w) = ctx.csv("panel.csv")?;
    w.write_record(["state", "gender", "year", "age", "dx"])?;
    for (s, g, t, d) in panel.iter_indexed() {
        for (age, v) in panel.grid().ages().iter().zip(d.values()) {
            w.write_record([
                panel.states()[s].clone(),
                g.to_string(),
                panel.years()[t].to_string(),
                age.to_string(),
                v.to_string(),
            ])?;
        }
    }
    let path = finish(path, w)?;
    println!("ok {}", summary_line(&panel));
    report_written(&[path]);
    Ok(())
}
