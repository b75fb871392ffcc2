//! `key = value` run configuration.

use std::collections::BTreeSet;

use densfts::{
    AnovaMethod, BacktestConfig, Bandwidth, ForecastConfig, GsyConfig, KRule, Kernel, LongRunOptions, Method,
    WindowScheme,
};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const KEYS: [&str; 10] = [
    "train_window",
    "horizon",
    "decomposition",
    "k_rule",
    "kernel",
    "bandwidth",
    "clr",
    "methods",
    "seed",
    "scheme",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub train_window: usize,
    pub horizon: usize,
    pub decomposition: AnovaMethod,
    pub k_rule: KRule,
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
    pub clr: bool,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub scheme: WindowScheme,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train_window: 52,
            horizon: 10,
            decomposition: AnovaMethod::Fm,
            k_rule: KRule::Evr,
            kernel: Kernel::Bartlett,
            bandwidth: Bandwidth::Plugin,
            clr: true,
            methods: vec![Method::Fm, Method::Fmp, Method::Gsy, Method::Naive],
            seed: 0,
            scheme: WindowScheme::Complete,
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> CliError {
    CliError::usage(key, format!("invalid value {value:?} for `{key}`, expected {expected}"))
}

fn parse_count(key: &str, value: &str, min: usize) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(n) if n >= min => Ok(n),
        _ => Err(bad(key, value, &format!("an integer >= {min}"))),
    }
}

fn parse_k_rule(value: &str) -> Result<KRule> {
    if value == "evr" {
        return Ok(KRule::Evr);
    }
    value
        .strip_prefix("fixed:")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .map(KRule::Fixed)
        .ok_or_else(|| bad("k_rule", value, "evr or fixed:<K> with K >= 1"))
}

fn parse_bandwidth(value: &str) -> Result<Bandwidth> {
    if value == "plugin" {
        return Ok(Bandwidth::Plugin);
    }
    value
        .strip_prefix("fixed:")
        .and_then(|b| b.parse::<f64>().ok())
        .filter(|b| *b > 0.0 && b.is_finite())
        .map(Bandwidth::Fixed)
        .ok_or_else(|| bad("bandwidth", value, "plugin or fixed:<b> with b > 0"))
}

fn parse_methods(value: &str) -> Result<Vec<Method>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim) {
        let method: Method = part
            .parse()
            .map_err(|_| bad("methods", value, "a comma-separated subset of fm,fmp,gsy,naive"))?;
        if seen.insert(method.as_str()) {
            out.push(method);
        }
    }
    if out.is_empty() {
        return Err(bad("methods", value, "at least one method"));
    }
    Ok(out)
}

impl RunConfig {
    /// Parse `key = value` lines. Blank lines and `#` comments are skipped,
    /// unknown or repeated keys are rejected, absent keys keep defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Usage {
                key: None,
                message: format!("line {}: expected `key = value`, found {line:?}", n + 1),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(CliError::usage(
                    key,
                    format!("unknown config key `{key}` (known: {})", KEYS.join(", ")),
                ));
            }
            if !seen.insert(key.to_string()) {
                return Err(CliError::usage(key, format!("config key `{key}` given twice")));
            }
            config.set(key, value)?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "train_window" => self.train_window = parse_count(key, value, 10)?,
            "horizon" => self.horizon = parse_count(key, value, 1)?,
            "decomposition" => {
                self.decomposition = match value {
                    "fm" => AnovaMethod::Fm,
                    "fmp" => AnovaMethod::Fmp,
                    _ => return Err(bad(key, value, "fm or fmp")),
                }
            }
            "k_rule" => self.k_rule = parse_k_rule(value)?,
            "kernel" => {
                self.kernel = match value {
                    "bartlett" => Kernel::Bartlett,
                    "flat_top" => Kernel::FlatTop,
                    _ => return Err(bad(key, value, "bartlett or flat_top")),
                }
            }
            "bandwidth" => self.bandwidth = parse_bandwidth(value)?,
            "clr" => {
                self.clr = match value {
                    "on" => true,
                    "off" => false,
                    _ => return Err(bad(key, value, "on or off")),
                }
            }
            "methods" => self.methods = parse_methods(value)?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key, value, "a nonnegative integer"))?,
            "scheme" => {
                self.scheme = match value {
                    "complete" => WindowScheme::Complete,
                    "rolling" => WindowScheme::Rolling,
                    _ => return Err(bad(key, value, "complete or rolling")),
                }
            }
            _ => unreachable!("key checked against KEYS"),
        }
        Ok(())
    }

    /// Canonical `key = value` text; parsing it gives back `self`.
    pub fn to_text(&self) -> String {
        let k_rule = match self.k_rule {
            KRule::Evr => "evr".to_string(),
            KRule::Fixed(k) => format!("fixed:{k}"),
        };
        let bandwidth = match self.bandwidth {
            Bandwidth::Plugin => "plugin".to_string(),
            Bandwidth::Fixed(b) => format!("fixed:{b}"),
        };
        let methods: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        let scheme = match self.scheme {
            WindowScheme::Complete => "complete",
            WindowScheme::Rolling => "rolling",
        };
        let decomposition = match self.decomposition {
            AnovaMethod::Fm => "fm",
            AnovaMethod::Fmp => "fmp",
        };
        format!(
            "train_window = {}\nhorizon = {}\ndecomposition = {decomposition}\nk_rule = {k_rule}\nkernel = {}\n\
             bandwidth = {bandwidth}\nclr = {}\nmethods = {}\nseed = {}\nscheme = {scheme}\n",
            self.train_window,
            self.horizon,
            self.kernel.as_str(),
            if self.clr { "on" } else { "off" },
            methods.join(","),
            self.seed,
        )
    }

    pub fn forecast(&self) -> ForecastConfig {
        ForecastConfig {
            decomposition: self.decomposition,
            k_rule: self.k_rule,
            longrun: LongRunOptions {
                kernel: self.kernel,
                bandwidth: self.bandwidth,
            },
            horizon: self.horizon,
            ..ForecastConfig::default()
        }
    }

    pub fn gsy(&self) -> GsyConfig {
        GsyConfig {
            clr: self.clr,
            horizon: self.horizon,
            ..GsyConfig::default()
        }
    }

    pub fn backtest(&self) -> BacktestConfig {
        BacktestConfig {
            train_window: self.train_window,
            horizon: self.horizon,
            methods: self.methods.clone(),
            forecast: self.forecast(),
            gsy: self.gsy(),
            scheme: self.scheme,
            ..BacktestConfig::default()
        }
    }
}
