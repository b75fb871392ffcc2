//! Test oracles independent of the library's linear algebra.

#![allow(dead_code)]

use std::sync::Arc;

use densfts::{AgeGrid, ClrCurve, ClrPanel, Panel};
use rand::Rng;

/// Cyclic Jacobi eigensolver for a small dense symmetric matrix given as
/// rows. Returns eigenvalues in decreasing order with eigenvectors as
/// columns of the second result (`vecs[i][k]` is entry `i` of vector `k`).
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&k| a[k][k]).collect();
    let vecs = (0..n).map(|i| order.iter().map(|&k| v[i][k]).collect()).collect();
    (values, vecs)
}

/// A clr panel of iid uniform values on a unit-spaced grid.
pub fn random_clr_panel<R: Rng>(rng: &mut R, n_states: usize, n_years: usize, p: usize) -> ClrPanel {
    let grid = Arc::new(AgeGrid::unit(0, p as u32 - 1).unwrap());
    let states = (0..n_states).map(|s| format!("S{s}")).collect();
    let years = (0..n_years as i32).map(|t| 2000 + t).collect();
    Panel::from_fn(Arc::clone(&grid), states, years, |_, _, _| {
        let values = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
        ClrCurve::new(Arc::clone(&grid), values)
    })
    .unwrap()
}

pub fn max_abs_diff(a: &ClrPanel, b: &ClrPanel) -> f64 {
    a.cells()
        .iter()
        .zip(b.cells())
        .flat_map(|(x, y)| x.values().iter().zip(y.values()).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}
