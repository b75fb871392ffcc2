//! Centered log-ratio transform between densities and unconstrained curves.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::panel::{AgeGrid, DensityCurve, DensityPanel, Panel};

/// A curve in clr space. Images of densities integrate to zero over the grid;
/// ANOVA effects and residuals derived from them do too.
#[derive(Debug, Clone, PartialEq)]
pub struct ClrCurve {
    grid: Arc<AgeGrid>,
    values: Vec<f64>,
}

pub type ClrPanel = Panel<ClrCurve>;

impl ClrCurve {
    pub fn new(grid: Arc<AgeGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "clr curve has {} values for a grid of {} ages",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<AgeGrid>) -> Self {
        let p = grid.len();
        Self {
            grid,
            values: vec![0.0; p],
        }
    }

    pub fn grid(&self) -> &Arc<AgeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }
}

/// `ln d(u) - (1/eta) * integral of ln d`, with trapezoid quadrature.
pub fn clr(curve: &DensityCurve) -> Result<ClrCurve> {
    if let Some((i, v)) = curve.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::domain(format!(
            "clr needs strictly positive values, found {v} at age {}; repair zero counts first",
            curve.grid().ages()[i]
        )));
    }
    let grid = curve.grid();
    let logs: Vec<f64> = curve.values().iter().map(|v| v.ln()).collect();
    let centre = grid.integrate(&logs) / grid.span();
    Ok(ClrCurve {
        grid: Arc::clone(grid),
        values: logs.into_iter().map(|l| l - centre).collect(),
    })
}

/// `exp(y) / integral of exp(y) * radix`. The maximum is subtracted before
/// exponentiating, which leaves the result unchanged.
pub fn inv_clr(curve: &ClrCurve, radix: f64) -> Result<DensityCurve> {
    if curve.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("inverse clr of a non-finite curve"));
    }
    if !(radix > 0.0 && radix.is_finite()) {
        return Err(Error::domain("radix must be positive"));
    }
    let top = curve.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = curve.values.iter().map(|v| (v - top).exp()).collect();
    let mass = curve.grid.integrate(&exps);
    let scale = radix / mass;
    let mut values: Vec<f64> = exps.into_iter().map(|e| e * scale).collect();
    // far tails can underflow; the floor keeps the output strictly positive
    for v in values.iter_mut() {
        if *v <= 0.0 {
            *v = f64::MIN_POSITIVE;
        }
    }
    Ok(DensityCurve::from_parts_unchecked(
        Arc::clone(&curve.grid),
        values,
        radix,
    ))
}

pub fn clr_panel(panel: &DensityPanel) -> Result<ClrPanel> {
    panel.try_map(clr)
}

pub fn inv_clr_panel(panel: &ClrPanel, radix: f64) -> Result<DensityPanel> {
    panel.try_map(|c| inv_clr(c, radix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::DEFAULT_RADIX;
    use proptest::prelude::*;

    fn grid(p: u32) -> Arc<AgeGrid> {
        Arc::new(AgeGrid::unit(0, p - 1).unwrap())
    }

    #[test]
    fn uniform_density_maps_to_zero() {
        let g = grid(11);
        let level = DEFAULT_RADIX / g.span();
        let d = DensityCurve::new(Arc::clone(&g), vec![level; 11], DEFAULT_RADIX).unwrap();
        let y = clr(&d).unwrap();
        assert!(y.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn three_point_hand_case() {
        let e2 = 2f64.exp();
        let d = DensityCurve::new(grid(3), vec![7.0 * e2, 7.0, 7.0 * e2], DEFAULT_RADIX).unwrap();
        let y = clr(&d).unwrap();
        for (a, b) in y.values().iter().zip([1.0, -1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_function_inverts_to_uniform() {
        let g = grid(111);
        let d = inv_clr(&ClrCurve::zeros(Arc::clone(&g)), DEFAULT_RADIX).unwrap();
        let level = DEFAULT_RADIX / 110.0;
        assert!(d.values().iter().all(|v| (v - level).abs() < 1e-9));
        assert!((d.integral() - DEFAULT_RADIX).abs() < 1e-8 * DEFAULT_RADIX);
    }

    #[test]
    fn nonpositive_input_rejected() {
        let d = DensityCurve::new(grid(3), vec![1.0, 0.0, 1.0], DEFAULT_RADIX).unwrap();
        let err = clr(&d).unwrap_err();
        assert!(err.to_string().contains("repair"));
    }

    #[test]
    fn large_magnitudes_do_not_overflow() {
        let y = ClrCurve::new(grid(4), vec![800.0, 700.0, -800.0, 750.0]).unwrap();
        let d = inv_clr(&y, DEFAULT_RADIX).unwrap();
        assert!(d.values().iter().all(|v| v.is_finite() && *v > 0.0));
        assert!((d.integral() - DEFAULT_RADIX).abs() < 1e-8 * DEFAULT_RADIX);
    }

    proptest! {
        #[test]
        fn round_trip_and_invariances(
            logs in prop::collection::vec(-15.0f64..5.0, 2..40),
            shift in -50.0f64..50.0,
            scale in 1e-3f64..1e3,
        ) {
            let p = logs.len() as u32;
            let g = grid(p);
            let raw: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
            let d = DensityCurve::new(Arc::clone(&g), raw, DEFAULT_RADIX).unwrap().normalized().unwrap();
            let y = clr(&d).unwrap();
            prop_assert!(y.integral().abs() < 1e-8);
            let back = inv_clr(&y, DEFAULT_RADIX).unwrap();
            for (a, b) in back.values().iter().zip(d.values()) {
                prop_assert!((a - b).abs() <= 1e-8 * b);
            }
            // additive constants vanish under inv_clr
            let shifted = ClrCurve::new(Arc::clone(&g), y.values().iter().map(|v| v + shift).collect()).unwrap();
            let back2 = inv_clr(&shifted, DEFAULT_RADIX).unwrap();
            for (a, b) in back2.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-10 * b);
            }
            // positive rescaling vanishes under clr
            let scaled = DensityCurve::new(Arc::clone(&g), d.values().iter().map(|v| v * scale).collect(), DEFAULT_RADIX).unwrap();
            for (a, b) in clr(&scaled).unwrap().values().iter().zip(y.values()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn clr_of_inverse_recovers_zero_integral_input(
            raw in prop::collection::vec(-5.0f64..5.0, 3..30),
        ) {
            let g = grid(raw.len() as u32);
            let centre = g.integrate(&raw) / g.span();
            let y = ClrCurve::new(Arc::clone(&g), raw.iter().map(|v| v - centre).collect()).unwrap();
            let again = clr(&inv_clr(&y, DEFAULT_RADIX).unwrap()).unwrap();
            for (a, b) in again.values().iter().zip(y.values()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
