//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Rows of `[1, x_1, .., x_p]`.
pub fn with_intercept(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = columns[0].len();
    (0..n)
        .map(|i| std::iter::once(1.0).chain(columns.iter().map(|c| c[i])).collect())
        .collect()
}

/// Weighted logistic MLE by plain Newton-Raphson from zero.
pub fn newton_logistic(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    for _ in 0..200 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = sigmoid(eta);
            for j in 0..p {
                grad[j] += wi * (yi - mu) * row[j];
                for k in 0..p {
                    hess[j][k] += wi * mu * (1.0 - mu) * row[j] * row[k];
                }
            }
        }
        let step = solve(hess, grad);
        let size = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if size < 1e-14 {
            break;
        }
    }
    beta
}

/// Score `X' W (y - p)` at `beta`.
pub fn logistic_score(x: &[Vec<f64>], y: &[f64], w: &[f64], beta: &[f64]) -> Vec<f64> {
    let mut score = vec![0.0; beta.len()];
    for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
        let mu = sigmoid(row.iter().zip(beta).map(|(a, b)| a * b).sum());
        for (s, xj) in score.iter_mut().zip(row) {
            *s += wi * (yi - mu) * xj;
        }
    }
    score
}

/// OLS through `X'X b = X'y`; returns coefficients and R².
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let p = x[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        for j in 0..p {
            xty[j] += row[j] * yi;
            for k in 0..p {
                xtx[j][k] += row[j] * row[k];
            }
        }
    }
    let b = solve(xtx, xty);
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(row, yi)| (yi - row.iter().zip(&b).map(|(a, c)| a * c).sum::<f64>()).powi(2))
        .sum();
    (b, 1.0 - sse / sst)
}

/// Weighted mean, and variance with weights rescaled to the group count.
pub fn group_moments(x: &[f64], w: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let total: f64 = w.iter().sum();
    let mean = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
    let var = x.iter().zip(w).map(|(a, b)| b * m / total * (a - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var)
}

pub fn smd_oracle(x: &[f64], group: &[bool], w: &[f64]) -> f64 {
    let pick = |g: bool| -> (Vec<f64>, Vec<f64>) {
        x.iter()
            .zip(w)
            .zip(group)
            .filter(|(_, &gi)| gi == g)
            .map(|((a, b), _)| (*a, *b))
            .unzip()
    };
    let (x1, w1) = pick(true);
    let (x0, w0) = pick(false);
    let (m1, v1) = group_moments(&x1, &w1);
    let (m0, v0) = group_moments(&x0, &w0);
    (m1 - m0).abs() / ((v1 + v0) / 2.0).sqrt()
}

/// Columns centred and made mutually orthogonal within each group under the
/// weighted inner product, so both group covariance matrices are diagonal.
pub fn orthogonalize_within_groups(columns: &mut [Vec<f64>], group: &[bool], w: &[f64]) {
    for g in [true, false] {
        let idx: Vec<usize> = (0..group.len()).filter(|&i| group[i] == g).collect();
        let total: f64 = idx.iter().map(|&i| w[i]).sum();
        let dot = |a: &[f64], b: &[f64]| idx.iter().map(|&i| w[i] * a[i] * b[i]).sum::<f64>();
        for j in 0..columns.len() {
            let mean = idx.iter().map(|&i| w[i] * columns[j][i]).sum::<f64>() / total;
            for &i in &idx {
                columns[j][i] -= mean;
            }
            for prev in 0..j {
                let (head, tail) = columns.split_at_mut(j);
                let proj = dot(&tail[0], &head[prev]) / dot(&head[prev], &head[prev]);
                for &i in &idx {
                    tail[0][i] -= proj * head[prev][i];
                }
            }
        }
    }
}
