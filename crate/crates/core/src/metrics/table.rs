use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ecdf::WeightedEcdf;
use super::kde::density_overlap;
use super::multivariate::{gwd, mahalanobis_balance, post_weighting_cstat, GwdMode};
use super::univariate::{ks_distance, levy_distance, overlap_coefficient, smd, weighted_mean_diff};
use super::{block_weights, Groups, Metric, MHB_THRESHOLD_PER_COVARIATE, SMD_THRESHOLD};
use crate::error::{Error, Result};
use crate::glm::DesignSpec;
use crate::panel::{CovariateBlock, PanelDataset, Scale};
use crate::weights::{WeightFamily, WeightSet};

/// Covariate label of cells that summarize a whole block.
pub const GLOBAL: &str = "GLOBAL";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// Every `(t, k)` with `0 <= k <= t <= T`, including baseline `(0, 0)`.
    #[default]
    Full,
    /// Follow-up times only, `1 <= t <= T`.
    FollowUp,
}

/// `(t, k)` pairs ordered by `t`, then `k`.
pub fn schedule(last_time: usize, kind: ScheduleKind) -> Vec<(usize, usize)> {
    let first = match kind {
        ScheduleKind::Full => 0,
        ScheduleKind::FollowUp => 1,
    };
    (first..=last_time).flat_map(|t| (0..=t).map(move |k| (t, k))).collect()
}

/// `A{t}~X{t-k}`, e.g. `A1~X0` for `(1, 1)`.
pub fn aggregate_label(t: usize, k: usize) -> String {
    format!("A{t}~X{}", t - k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceOptions {
    pub metrics: Vec<Metric>,
    /// Empty means the full schedule of the dataset.
    pub schedule: Vec<(usize, usize)>,
    pub gwd_mode: GwdMode,
    /// Design used by the refitted propensity model of the C-statistic.
    pub cs_spec: DesignSpec,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        Self {
            metrics: Metric::ALL.to_vec(),
            schedule: Vec::new(),
            gwd_mode: GwdMode::default(),
            cs_spec: DesignSpec::simple(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub t: usize,
    pub k: usize,
    pub metric: Metric,
    pub covariate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceCell {
    pub t: usize,
    pub k: usize,
    pub metric: Metric,
    pub covariate: String,
    /// `None` when the metric could not be computed for this cell.
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub flag: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub t: usize,
    pub k: usize,
    pub metric: Metric,
    /// Mean over covariates for univariate metrics, the global value otherwise.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub family: WeightFamily,
    pub cells: Vec<BalanceCell>,
    pub aggregates: Vec<AggregateCell>,
    /// Subjects in scope whose weight was unavailable and were left out.
    pub rows_without_weight: usize,
}

impl BalanceReport {
    pub fn aggregate(&self, t: usize, k: usize, metric: Metric) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.t == t && a.k == k && a.metric == metric)
            .and_then(|a| a.value)
    }

    pub fn cell(&self, t: usize, k: usize, metric: Metric, covariate: &str) -> Option<&BalanceCell> {
        self.cells
            .iter()
            .find(|c| c.t == t && c.k == k && c.metric == metric && c.covariate == covariate)
    }

    /// Distinct `(t, k)` pairs covered.
    pub fn comparisons(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self.aggregates.iter().map(|a| (a.t, a.k)).collect();
        pairs.dedup();
        pairs
    }

    /// Nested `t -> k -> metric -> covariate -> value` object.
    pub fn to_nested_json(&self) -> serde_json::Value {
        let mut tree: BTreeMap<String, BTreeMap<String, BTreeMap<String, BTreeMap<String, serde_json::Value>>>> =
            BTreeMap::new();
        for c in &self.cells {
            tree.entry(c.t.to_string())
                .or_default()
                .entry(c.k.to_string())
                .or_default()
                .entry(c.metric.to_string())
                .or_default()
                .insert(
                    c.covariate.clone(),
                    serde_json::json!({
                        "value": c.value,
                        "threshold": c.threshold,
                        "flag": c.flag,
                        "note": c.note,
                    }),
                );
        }
        serde_json::json!({
            "family": self.family,
            "rows_without_weight": self.rows_without_weight,
            "cells": tree,
            "aggregates": self.aggregates,
        })
    }

    /// Flat `t,k,metric,covariate,value,threshold,flag` CSV.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(sink);
        out.write_record(["t", "k", "metric", "covariate", "value", "threshold", "flag"])?;
        for c in &self.cells {
            out.write_record([
                c.t.to_string(),
                c.k.to_string(),
                c.metric.to_string(),
                c.covariate.clone(),
                c.value.map(|v| v.to_string()).unwrap_or_default(),
                c.threshold.map(|v| v.to_string()).unwrap_or_default(),
                if c.value.is_none() {
                    "unavailable".to_string()
                } else if c.flag {
                    "imbalanced".to_string()
                } else {
                    String::new()
                },
            ])?;
        }
        out.flush().map_err(|e| Error::io("<balance report>", e))?;
        Ok(())
    }
}

fn cell(t: usize, k: usize, metric: Metric, covariate: &str, result: Result<f64>, threshold: Option<f64>) -> BalanceCell {
    let (value, note) = match result {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    BalanceCell {
        t,
        k,
        metric,
        covariate: covariate.to_string(),
        flag: matches!((value, threshold), (Some(v), Some(th)) if v > th),
        value,
        threshold,
        note,
    }
}

fn block_cells(block: &CovariateBlock, w: &[f64], options: &BalanceOptions) -> Vec<BalanceCell> {
    let (t, k) = (block.target_time, block.lag);
    let mut cells = Vec::new();
    for &metric in &options.metrics {
        if metric.is_univariate() {
            for col in &block.columns {
                let name = col.name.as_str();
                let (result, threshold) = match metric {
                    Metric::D => (weighted_mean_diff(block, w, name), None),
                    Metric::Smd => (smd(block, w, name), Some(SMD_THRESHOLD)),
                    Metric::Ovl => (overlap_coefficient(block, w, name), None),
                    Metric::Ks => (ks_distance(block, w, name), None),
                    Metric::Levy => (levy_distance(block, w, name), None),
                    _ => unreachable!("univariate metric"),
                };
                cells.push(cell(t, k, metric, name, result, threshold));
            }
        } else {
            let (result, threshold) = match metric {
                Metric::Mhb => (
                    mahalanobis_balance(block, w),
                    Some(MHB_THRESHOLD_PER_COVARIATE * block.columns.len() as f64),
                ),
                Metric::Cs => (post_weighting_cstat(block, w, &options.cs_spec), None),
                Metric::Gwd => (gwd(block, w, options.gwd_mode).map(|r| r.value), None),
                _ => unreachable!("global metric"),
            };
            cells.push(cell(t, k, metric, GLOBAL, result, threshold));
        }
    }
    cells
}

/// Computes every requested metric over the schedule. Each block holds the
/// subjects uncensored at `t` that also carry a weight; cells whose metric
/// fails are kept with no value and the error as note.
pub fn balance_table(data: &PanelDataset, w: &WeightSet, options: &BalanceOptions) -> Result<BalanceReport> {
    if w.len() != data.n() {
        return Err(Error::Domain(format!(
            "weight set covers {} subjects but panel has {}",
            w.len(),
            data.n()
        )));
    }
    if w.family == WeightFamily::Stabilized {
        log::warn!(
            "stabilized weights conditional on prior treatment are not recommended for checking balance; \
             use marginal stabilized weights instead"
        );
    }
    let pairs = if options.schedule.is_empty() {
        schedule(data.last_time(), ScheduleKind::Full)
    } else {
        options.schedule.clone()
    };
    let mut cells = Vec::new();
    let mut aggregates = Vec::new();
    let mut missing = std::collections::BTreeSet::new();
    for (t, k) in pairs {
        let full = data.covariate_block(t, k)?;
        let keep: Vec<bool> = full.subjects.iter().map(|&i| w.values[i].is_some()).collect();
        missing.extend(full.subjects.iter().zip(&keep).filter(|(_, k)| !**k).map(|(i, _)| *i));
        let block = full.select(&keep);
        let wv = block_weights(&block, w)?;
        let block_cells = block_cells(&block, &wv, options);
        for &metric in &options.metrics {
            let values: Vec<f64> = block_cells
                .iter()
                .filter(|c| c.metric == metric)
                .filter_map(|c| c.value)
                .collect();
            aggregates.push(AggregateCell {
                t,
                k,
                metric,
                value: (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64),
            });
        }
        cells.extend(block_cells);
    }
    if !missing.is_empty() {
        log::warn!("{} subjects without an available weight were left out of balance checks", missing.len());
    }
    Ok(BalanceReport {
        family: w.family,
        cells,
        aggregates,
        rows_without_weight: missing.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub covariate: String,
    /// `ecdf` or `density`.
    pub kind: String,
    /// 1 for treated, 0 for untreated.
    pub group: u8,
    pub x: f64,
    pub y: f64,
}

/// Weighted ECDF points for each group and, for continuous covariates, the
/// kernel density curves used by the overlap metric.
pub fn block_plot_curves(block: &CovariateBlock, w: &[f64], covariate: &str) -> Result<Vec<CurvePoint>> {
    let col = block
        .column(covariate)
        .ok_or_else(|| Error::Domain(format!("covariate `{covariate}` not in block")))?;
    let g = Groups::split(&block.group, w)?;
    let mut out = Vec::new();
    let point = |kind: &str, group: u8, x: f64, y: f64| CurvePoint {
        covariate: covariate.to_string(),
        kind: kind.to_string(),
        group,
        x,
        y,
    };
    for group in [1u8, 0] {
        let ecdf = WeightedEcdf::new(&g.values(group.into(), &col.values), &g.weights[usize::from(group)]);
        out.extend(ecdf.support().iter().zip(ecdf.cumulative()).map(|(&x, &y)| point("ecdf", group, x, y)));
    }
    if col.scale == Scale::Continuous {
        let (_, f1, f0) = density_overlap(&g.values(1, &col.values), &g.weights[1], &g.values(0, &col.values), &g.weights[0]);
        for (group, grid) in [(1u8, f1), (0, f0)] {
            out.extend(grid.x.iter().zip(&grid.density).map(|(&x, &y)| point("density", group, x, y)));
        }
    }
    Ok(out)
}
