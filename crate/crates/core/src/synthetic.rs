//! Seeded synthetic panels with a known data-generating process.
//!
//! Each clr curve is `mu + alpha_s + beta_g + xi_1 phi_1 + xi_2 phi_2 + e`,
//! with AR(1) scores (optionally trending, female and male innovations
//! correlated within a state), a fixed orthonormal basis and
//! small centered noise. All components integrate to zero, so the simulated
//! densities have exactly these clr curves.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::coda::{clr, inv_clr, ClrCurve};
use crate::error::{Error, Result};
use crate::panel::{AgeGrid, DensityPanel, Gender, Panel, DEFAULT_RADIX};

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_states: usize,
    pub n_years: usize,
    pub first_year: i32,
    pub grid: AgeGrid,
    /// AR(1) coefficients of the two scores.
    pub ar: [f64; 2],
    /// Stationary standard deviations of the two scores.
    pub score_sd: [f64; 2],
    /// Correlation of the female and male score innovations of a state.
    pub gender_corr: f64,
    /// Linear trend per year added to the first score.
    pub drift: f64,
    /// Pointwise standard deviation of the iid noise.
    pub noise_sd: f64,
    pub radix: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_states: 10,
            n_years: 62,
            first_year: 1959,
            grid: AgeGrid::life_table(),
            ar: [0.8, 0.5],
            score_sd: [2.0, 1.0],
            gender_corr: 0.8,
            drift: 0.0,
            noise_sd: 0.01,
            radix: DEFAULT_RADIX,
        }
    }
}

/// Components used to generate a synthetic panel.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub grid: Arc<AgeGrid>,
    pub mu: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: [Vec<f64>; 2],
    pub basis: [Vec<f64>; 2],
    /// Stationary AR parts of the scores, laid out like panel cells.
    pub ar_scores: Vec<[f64; 2]>,
    pub ar: [f64; 2],
    pub drift: f64,
    pub n_years: usize,
}

impl SyntheticTruth {
    fn index(&self, s: usize, g: Gender, t: usize) -> usize {
        (s * 2 + g.index()) * self.n_years + t
    }

    pub fn deterministic(&self, s: usize, g: Gender) -> Vec<f64> {
        (0..self.mu.len())
            .map(|i| self.mu[i] + self.alpha[s][i] + self.beta[g.index()][i])
            .collect()
    }

    /// Scores of cell `(s, g, t)`, trend included.
    pub fn scores(&self, s: usize, g: Gender, t: usize) -> [f64; 2] {
        let z = self.ar_scores[self.index(s, g, t)];
        [z[0] + self.drift * t as f64, z[1]]
    }

    /// `E[Y_{origin+h} | Y_0..Y_origin]` as a clr curve.
    pub fn conditional_mean(&self, s: usize, g: Gender, origin: usize, h: usize) -> ClrCurve {
        let z = self.ar_scores[self.index(s, g, origin)];
        let xi = [
            self.drift * (origin + h) as f64 + self.ar[0].powi(h as i32) * z[0],
            self.ar[1].powi(h as i32) * z[1],
        ];
        let mut y = self.deterministic(s, g);
        for (i, v) in y.iter_mut().enumerate() {
            *v += xi[0] * self.basis[0][i] + xi[1] * self.basis[1][i];
        }
        ClrCurve::new(Arc::clone(&self.grid), y).expect("grid length")
    }
}

fn centered(grid: &AgeGrid, values: Vec<f64>) -> Vec<f64> {
    let c = grid.integrate(&values) / grid.span();
    values.into_iter().map(|v| v - c).collect()
}

fn unit_norm(grid: &AgeGrid, values: Vec<f64>) -> Vec<f64> {
    let n = grid.inner(&values, &values).sqrt();
    values.into_iter().map(|v| v / n).collect()
}

/// clr curve of a stylized age-at-death distribution: an infant component
/// plus a Gumbel-shaped adult mode near 80.
fn mortality_shape(grid: &Arc<AgeGrid>) -> Result<Vec<f64>> {
    let values: Vec<f64> = grid
        .ages()
        .iter()
        .map(|&u| {
            let z = (u - 80.0) / 10.0;
            0.02 * (-u / 1.5).exp() + (z - z.exp()).exp() / 10.0 + 1e-4
        })
        .collect();
    let d = crate::panel::DensityCurve::new(Arc::clone(grid), values, DEFAULT_RADIX)?;
    Ok(clr(&d)?.into_values())
}

/// Simulate a density panel and return it with its generating components.
pub fn simulate_panel(config: &SyntheticConfig, seed: u64) -> Result<(DensityPanel, SyntheticTruth)> {
    if config.n_states == 0 || config.n_years == 0 {
        return Err(Error::domain("synthetic panel needs states and years"));
    }
    if config.ar.iter().any(|a| !(a.abs() < 1.0)) {
        return Err(Error::domain("AR coefficients must lie in (-1, 1)"));
    }
    if !(config.gender_corr.abs() <= 1.0) {
        return Err(Error::domain("gender correlation must lie in [-1, 1]"));
    }
    if config.score_sd.iter().chain([&config.noise_sd]).any(|v| !(*v >= 0.0)) {
        return Err(Error::domain("standard deviations must be nonnegative"));
    }
    let grid = Arc::new(config.grid.clone());
    let ages = grid.ages().to_vec();
    let (lo, hi) = (ages[0], ages[ages.len() - 1]);
    let x: Vec<f64> = ages.iter().map(|u| (u - lo) / (hi - lo)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mu = mortality_shape(&grid)?;
    let tilt = centered(&grid, x.iter().map(|v| 2.0 * v - 1.0).collect());
    let mut levels: Vec<f64> = (0..config.n_states)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.5 * z
        })
        .collect();
    let mean_level = levels.iter().sum::<f64>() / levels.len() as f64;
    levels.iter_mut().for_each(|l| *l -= mean_level);
    let alpha: Vec<Vec<f64>> = levels
        .iter()
        .map(|a| tilt.iter().map(|v| a * v).collect())
        .collect();
    let bend = centered(&grid, x.iter().map(|v| (std::f64::consts::PI * v).cos()).collect());
    let beta = [
        bend.iter().map(|v| -0.3 * v).collect(),
        bend.iter().map(|v| 0.3 * v).collect(),
    ];

    let phi1 = unit_norm(
        &grid,
        centered(&grid, x.iter().map(|v| (2.0 * std::f64::consts::PI * v).sin()).collect()),
    );
    let raw2 = centered(&grid, x.iter().map(|v| (3.0 * std::f64::consts::PI * v).cos()).collect());
    let overlap = grid.inner(&raw2, &phi1);
    let phi2 = unit_norm(&grid, raw2.iter().zip(&phi1).map(|(a, b)| a - overlap * b).collect());

    let t_len = config.n_years;
    let (r, r_c) = (config.gender_corr, (1.0 - config.gender_corr * config.gender_corr).sqrt());
    let mut pair = || -> [f64; 2] {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        [a, r * a + r_c * b]
    };
    let mut ar_scores = vec![[0.0; 2]; config.n_states * 2 * t_len];
    for s in 0..config.n_states {
        let mut z = [[0.0; 2]; 2];
        for t in 0..t_len {
            for k in 0..2 {
                let e = pair();
                let sd = config.score_sd[k];
                for g in 0..2 {
                    z[g][k] = if t == 0 {
                        sd * e[g]
                    } else {
                        config.ar[k] * z[g][k] + sd * (1.0 - config.ar[k] * config.ar[k]).sqrt() * e[g]
                    };
                }
            }
            for g in 0..2 {
                ar_scores[(s * 2 + g) * t_len + t] = z[g];
            }
        }
    }

    let truth = SyntheticTruth {
        grid: Arc::clone(&grid),
        mu,
        alpha,
        beta,
        basis: [phi1, phi2],
        ar_scores,
        ar: config.ar,
        drift: config.drift,
        n_years: t_len,
    };
    let noise = Normal::new(0.0, config.noise_sd).map_err(|e| Error::domain(e.to_string()))?;
    let states: Vec<String> = (0..config.n_states).map(|s| format!("S{:02}", s + 1)).collect();
    let years: Vec<i32> = (0..t_len as i32).map(|t| config.first_year + t).collect();
    let panel = Panel::from_fn(Arc::clone(&grid), states, years, |s, g, t| {
        let xi = truth.scores(s, g, t);
        let e = centered(&grid, (0..grid.len()).map(|_| noise.sample(&mut rng)).collect());
        let y: Vec<f64> = truth
            .deterministic(s, g)
            .into_iter()
            .enumerate()
            .map(|(i, d)| d + xi[0] * truth.basis[0][i] + xi[1] * truth.basis[1][i] + e[i])
            .collect();
        inv_clr(&ClrCurve::new(Arc::clone(&grid), y)?, config.radix)
    })?;
    Ok((panel, truth))
}
