use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::Groups;
use crate::error::Result;
use crate::glm::{build_design, fit_weighted_logistic, predict_proba, DesignSpec};
use crate::panel::{Column, CovariateBlock};

const PINV_TOLERANCE: f64 = 1e-10;

/// Weighted group moments of a covariate block.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledMoments {
    pub names: Vec<String>,
    pub mean1: Vec<f64>,
    pub mean0: Vec<f64>,
    pub var1: Vec<f64>,
    pub var0: Vec<f64>,
    /// `(S_1 + S_0) / 2` of the weighted within-group covariance matrices.
    pub sigma: DMatrix<f64>,
}

impl PooledMoments {
    pub fn compute(columns: &[Column], group: &[bool], w: &[f64]) -> Result<Self> {
        let g = Groups::split(group, w)?;
        let p = columns.len();
        let mut sigma = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let (x, y) = (&columns[a].values, &columns[b].values);
                let s = 0.5 * (g.covariance(1, x, y) + g.covariance(0, x, y));
                sigma[(a, b)] = s;
                sigma[(b, a)] = s;
            }
        }
        Ok(Self {
            names: columns.iter().map(|c| c.name.clone()).collect(),
            mean1: columns.iter().map(|c| g.mean(1, &c.values)).collect(),
            mean0: columns.iter().map(|c| g.mean(0, &c.values)).collect(),
            var1: columns.iter().map(|c| g.variance(1, &c.values)).collect(),
            var0: columns.iter().map(|c| g.variance(0, &c.values)).collect(),
            sigma,
        })
    }
}

/// `(x̄_1 - x̄_0)' Σ⁻¹ (x̄_1 - x̄_0)` with Σ the pooled within-group
/// covariance. Computed on the correlation scale; eigenvalues below
/// `1e-10` of the largest are dropped (pseudo-inverse) with a warning.
pub fn mahalanobis_values(columns: &[Column], group: &[bool], w: &[f64]) -> Result<f64> {
    let m = PooledMoments::compute(columns, group, w)?;
    let keep: Vec<usize> = (0..columns.len()).filter(|&j| m.sigma[(j, j)] > 0.0).collect();
    for j in (0..columns.len()).filter(|j| !keep.contains(j)) {
        if m.mean1[j] != m.mean0[j] {
            log::warn!("column `{}` has zero pooled variance but differs in mean; excluded from MHB", m.names[j]);
        }
    }
    if keep.is_empty() {
        return Ok(0.0);
    }
    let sd: Vec<f64> = keep.iter().map(|&j| m.sigma[(j, j)].sqrt()).collect();
    let corr = DMatrix::from_fn(keep.len(), keep.len(), |a, b| m.sigma[(keep[a], keep[b])] / (sd[a] * sd[b]));
    let z = DVector::from_iterator(keep.len(), keep.iter().zip(&sd).map(|(&j, s)| (m.mean1[j] - m.mean0[j]) / s));
    let eig = SymmetricEigen::new(corr);
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut value = 0.0;
    let mut dependent = Vec::new();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(i);
        if lambda > PINV_TOLERANCE * lmax {
            let proj = u.dot(&z);
            value += proj * proj / lambda;
        } else {
            dependent.extend(
                u.iter()
                    .enumerate()
                    .filter(|(_, c)| c.abs() > 0.1)
                    .map(|(a, _)| m.names[keep[a]].clone()),
            );
        }
    }
    if !dependent.is_empty() {
        dependent.sort();
        dependent.dedup();
        log::warn!(
            "pooled covariance is singular; using pseudo-inverse (dependent columns: {})",
            dependent.join(", ")
        );
    }
    Ok(value.max(0.0))
}

pub fn mahalanobis_balance(block: &CovariateBlock, w: &[f64]) -> Result<f64> {
    mahalanobis_values(&block.columns, &block.group, w)
}

/// Weighted concordance of `scores` with group membership; tied pairs count 1/2.
pub fn weighted_auc(scores: &[f64], group: &[bool], w: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut below0, mut concordant) = (0.0, 0.0);
    let (mut total1, mut total0) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut tie1, mut tie0) = (0.0, 0.0);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            let r = order[j];
            if group[r] {
                tie1 += w[r];
            } else {
                tie0 += w[r];
            }
            j += 1;
        }
        concordant += tie1 * (below0 + 0.5 * tie0);
        below0 += tie0;
        total1 += tie1;
        total0 += tie0;
        i = j;
    }
    concordant / (total1 * total0)
}

/// Raw C-statistic of a propensity model refitted in the weighted sample.
pub fn cstat_raw(block: &CovariateBlock, w: &[f64], spec: &DesignSpec) -> Result<f64> {
    Groups::split(&block.group, w)?;
    let design = build_design(&block.columns, spec)?;
    let y: Vec<f64> = block.group.iter().map(|&a| f64::from(u8::from(a))).collect();
    let fit = fit_weighted_logistic(&design, &y, w)?;
    let p = predict_proba(&fit, &design)?;
    Ok(weighted_auc(&p, &block.group, w))
}

/// `2 (max(C, 1 - C) - 0.5)`.
pub fn post_weighting_cstat(block: &CovariateBlock, w: &[f64], spec: &DesignSpec) -> Result<f64> {
    let c = cstat_raw(block, w, spec)?;
    Ok((2.0 * (c.max(1.0 - c) - 0.5)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GwdMode {
    Sum,
    /// Sum divided by the number of non-degenerate terms.
    #[default]
    MeanPerTerm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GwdResult {
    pub value: f64,
    pub terms: usize,
    pub degenerate_terms: usize,
}

/// Weighted absolute mean differences of every covariate (weight `1/s`) and
/// every product `X_a X_b`, `a <= b` (weight `0.5/s`), with `s` the pooled
/// standard deviation of the term. Terms with `s = 0` contribute nothing.
pub fn gwd_values(columns: &[Column], group: &[bool], w: &[f64], mode: GwdMode) -> Result<GwdResult> {
    let g = Groups::split(group, w)?;
    let p = columns.len();
    // the (0, 0) term is the constant and is always degenerate
    let mut degenerate = 1;
    let mut terms = 0;
    let mut sum = 0.0;
    let mut add = |x: &[f64], coef: f64| {
        let s = g.pooled_sd(x);
        if s > 0.0 {
            sum += coef * (g.mean(1, x) - g.mean(0, x)).abs() / s;
            terms += 1;
        } else {
            degenerate += 1;
        }
    };
    for c in columns {
        add(&c.values, 1.0);
    }
    let mut product = vec![0.0; group.len()];
    for a in 0..p {
        for b in a..p {
            for (i, v) in product.iter_mut().enumerate() {
                *v = columns[a].values[i] * columns[b].values[i];
            }
            add(&product, 0.5);
        }
    }
    if terms == 0 {
        log::warn!("every GWD term is degenerate; reporting 0");
    }
    let value = match mode {
        GwdMode::Sum => sum,
        GwdMode::MeanPerTerm if terms > 0 => sum / terms as f64,
        GwdMode::MeanPerTerm => 0.0,
    };
    Ok(GwdResult {
        value,
        terms,
        degenerate_terms: degenerate,
    })
}

pub fn gwd(block: &CovariateBlock, w: &[f64], mode: GwdMode) -> Result<GwdResult> {
    gwd_values(&block.columns, &block.group, w, mode)
}
