use std::sync::Arc;

use densfts::{
    rolling_backtest, simulate_panel, AgeGrid, BacktestConfig, DensityCurve, DensityPanel, Error, Gender,
    HorizonKey, Method, Panel, SyntheticConfig, WindowScheme, DEFAULT_RADIX,
};

fn small_panel(seed: u64, n_years: usize) -> DensityPanel {
    let config = SyntheticConfig {
        n_states: 3,
        n_years,
        ..SyntheticConfig::default()
    };
    simulate_panel(&config, seed).unwrap().0
}

fn config(train_window: usize, horizon: usize) -> BacktestConfig {
    BacktestConfig {
        train_window,
        horizon,
        ..BacktestConfig::default()
    }
}

#[test]
fn holdout_years_do_not_leak_into_forecasts() {
    let panel = small_panel(3, 26);
    let cfg = config(20, 3);
    let base = rolling_backtest(&panel, &cfg).unwrap();

    let mut perturbed = panel.clone();
    for s in 0..perturbed.n_states() {
        for g in Gender::ALL {
            for t in 20..26 {
                let cell = perturbed.cell(s, g, t).clone();
                let values: Vec<f64> = cell
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * (1.0 + 0.5 * ((i + t) % 3) as f64))
                    .collect();
                *perturbed.cell_mut(s, g, t) =
                    DensityCurve::new(Arc::clone(cell.grid()), values, DEFAULT_RADIX).unwrap();
            }
        }
    }
    let other = rolling_backtest(&perturbed, &cfg).unwrap();
    assert_eq!(base.plot.len(), other.plot.len());
    let mut observed_changed = false;
    for (a, b) in base.plot.iter().zip(&other.plot) {
        assert_eq!(a.forecast.to_bits(), b.forecast.to_bits(), "{} {} {}", a.method, a.state, a.year);
        observed_changed |= a.observed != b.observed;
    }
    assert!(observed_changed);
    assert_ne!(base.table, other.table);
}

#[test]
fn backtest_is_deterministic() {
    let panel = small_panel(8, 25);
    let cfg = config(18, 4);
    let render = || {
        let report = rolling_backtest(&panel, &cfg).unwrap();
        let (mut table, mut plot) = (Vec::new(), Vec::new());
        report.table.write_csv(&mut table).unwrap();
        report.write_plot_csv(&mut plot).unwrap();
        (table, plot)
    };
    assert_eq!(render(), render());
}

#[test]
fn constant_panel_scores_zero() {
    let grid = Arc::new(AgeGrid::unit(0, 20).unwrap());
    let values: Vec<f64> = (0..21).map(|i| 1.0 + (i as f64 / 4.0).sin().abs()).collect();
    let curve = DensityCurve::new(Arc::clone(&grid), values, DEFAULT_RADIX).unwrap();
    let states = vec!["A".to_string(), "B".to_string()];
    let years: Vec<i32> = (2000..2016).collect();
    let panel: DensityPanel = Panel::from_fn(grid, states, years, |_, _, _| Ok(curve.clone())).unwrap();
    let cfg = BacktestConfig {
        methods: vec![Method::Fm, Method::Fmp, Method::Naive],
        ..config(12, 2)
    };
    let report = rolling_backtest(&panel, &cfg).unwrap();
    for row in &report.table.rows {
        assert!(row.kld_x100.abs() < 1e-12, "{row:?}");
        assert!(row.jsd_x100.abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn exact_length_gives_one_window() {
    let panel = small_panel(1, 22);
    for scheme in [WindowScheme::Complete, WindowScheme::Rolling] {
        let cfg = BacktestConfig {
            scheme,
            ..config(20, 2)
        };
        let report = rolling_backtest(&panel, &cfg).unwrap();
        let origins: std::collections::BTreeSet<i32> = report.windows.iter().map(|w| w.origin_year).collect();
        match scheme {
            WindowScheme::Complete => assert_eq!(origins.len(), 1),
            WindowScheme::Rolling => assert_eq!(origins.len(), 2),
        }
        assert_eq!(report.windows.len(), origins.len() * cfg.methods.len());
    }
}

#[test]
fn too_few_years_is_rejected() {
    let panel = small_panel(1, 21);
    let err = rolling_backtest(&panel, &config(20, 2)).unwrap_err();
    assert!(matches!(err, Error::NotEnoughData(_)), "{err}");
}

#[test]
fn mean_rows_average_the_horizon_rows() {
    let panel = small_panel(5, 27);
    let cfg = BacktestConfig {
        scheme: WindowScheme::Rolling,
        ..config(20, 4)
    };
    let report = rolling_backtest(&panel, &cfg).unwrap();
    for method in ["fm", "fmp", "gsy", "naive"] {
        for g in Gender::ALL {
            let steps: Vec<_> = (1..=4)
                .map(|h| report.table.get(method, g, HorizonKey::Step(h)).unwrap())
                .collect();
            let mean = report.table.mean(method, g).unwrap();
            let k = steps.iter().map(|r| r.kld_x100).sum::<f64>() / 4.0;
            let j = steps.iter().map(|r| r.jsd_x100).sum::<f64>() / 4.0;
            assert!((mean.kld_x100 - k).abs() <= 1e-12 * k.abs().max(1.0));
            assert!((mean.jsd_x100 - j).abs() <= 1e-12 * j.abs().max(1.0));
            // the geometric-mean midpoint makes jsd a quarter of kld
            assert!((mean.jsd_x100 - mean.kld_x100 / 4.0).abs() < 1e-10);
        }
    }
}
