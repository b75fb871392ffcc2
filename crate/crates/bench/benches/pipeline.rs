use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use densfts::{
    auto_arima, fm_anova, fmp_anova, forecast_panel, longrun_cov, mfpca_stack, rolling_backtest, ArimaOptions,
    BacktestConfig, CurveSeries, FmpOptions, ForecastConfig, KRule, LongRunOptions, Method,
};
use densfts_bench::{ar1_path, clr, gender_series, panel};

fn anova(c: &mut Criterion) {
    let y = clr(&panel(51, 52));
    let mut group = c.benchmark_group("anova");
    group.bench_function("fm_51x52", |b| b.iter(|| fm_anova(&y).unwrap()));
    group.bench_function("fmp_51x52", |b| b.iter(|| fmp_anova(&y, &FmpOptions::default()).unwrap()));
    group.finish();
}

fn ftsa(c: &mut Criterion) {
    let y = clr(&panel(1, 52));
    let (f, m) = gender_series(&y, 0);
    let stacked = CurveSeries::stack(&f, &m).unwrap();
    let options = LongRunOptions::default();
    let mut group = c.benchmark_group("ftsa");
    group.bench_function("longrun_cov_stacked", |b| b.iter(|| longrun_cov(&stacked, &options).unwrap()));
    group.bench_function("mfpca_stack_evr", |b| {
        b.iter(|| mfpca_stack(&f, &m, KRule::Evr, &options).unwrap())
    });
    group.finish();
}

fn arima(c: &mut Criterion) {
    let mut group = c.benchmark_group("auto_arima");
    for len in [52, 200] {
        let series = ar1_path(len);
        group.bench_with_input(BenchmarkId::from_parameter(len), &series, |b, s| {
            b.iter(|| auto_arima(s, &ArimaOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let p = panel(10, 52);
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("forecast_fm_10_states", |b| {
        b.iter(|| forecast_panel(&p, &ForecastConfig::default()).unwrap())
    });
    let q = panel(4, 30);
    let config = BacktestConfig {
        train_window: 25,
        horizon: 3,
        methods: vec![Method::Fm, Method::Naive],
        ..BacktestConfig::default()
    };
    group.bench_function("backtest_4_states_3_windows", |b| {
        b.iter(|| rolling_backtest(&q, &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, anova, ftsa, arima, pipeline);
criterion_main!(benches);
