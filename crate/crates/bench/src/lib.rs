//! Fixtures shared by the benchmarks.

use densfts::{clr_panel, simulate_panel, ClrPanel, CurveSeries, DensityPanel, Gender, SyntheticConfig};

/// Synthetic life-table panel of the size used in the evaluation studies.
pub fn panel(n_states: usize, n_years: usize) -> DensityPanel {
    let config = SyntheticConfig {
        n_states,
        n_years,
        ..SyntheticConfig::default()
    };
    simulate_panel(&config, 7).expect("valid synthetic config").0
}

pub fn clr(panel: &DensityPanel) -> ClrPanel {
    clr_panel(panel).expect("positive densities")
}

/// Female and male clr series of one state.
pub fn gender_series(panel: &ClrPanel, state: usize) -> (CurveSeries, CurveSeries) {
    let series = |g| CurveSeries::from_curves(panel.series(state, g)).expect("nonempty series");
    (series(Gender::F), series(Gender::M))
}

/// AR(1) path with coefficient 0.7 and unit innovations, deterministic.
pub fn ar1_path(len: usize) -> Vec<f64> {
    let mut state = 0x9e37_79b9_7f4a_7c15_u64;
    let mut uniform = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut x = 0.0;
    (0..len)
        .map(|_| {
            let e: f64 = (0..12).map(|_| uniform()).sum::<f64>() - 6.0;
            x = 0.7 * x + e;
            x
        })
        .collect()
}
