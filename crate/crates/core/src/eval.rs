//! How well each metric's imbalance explains estimation bias: bias is
//! regressed on the three aggregate balance variables and their squares.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{fit_ols, Complexity, Design};
use crate::metrics::Metric;
use crate::sim::{ArchiveRow, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub rep: usize,
    pub regime: Regime,
    pub bias: f64,
    /// `A0~X0`, `A1~X0`, `A1~X1`.
    pub balance: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub metric: Metric,
    pub ps_spec: Complexity,
    pub rows: Vec<EvalRow>,
    /// Archive lines skipped because a balance value was missing.
    pub dropped: usize,
}

/// One row per (replicate, regime) with complete balance values.
pub fn assemble_eval_table(archive: &[ArchiveRow], metric: Metric, ps_spec: Complexity) -> EvalTable {
    let mut rows = Vec::new();
    let mut dropped = 0;
    for r in archive.iter().filter(|r| r.metric == metric && r.ps_spec == ps_spec) {
        match r.balance {
            [Some(a), Some(b), Some(c)] if r.bias.is_finite() => rows.push(EvalRow {
                rep: r.rep,
                regime: r.regime,
                bias: r.bias,
                balance: [a, b, c],
            }),
            _ => dropped += 1,
        }
    }
    EvalTable {
        metric,
        ps_spec,
        rows,
        dropped,
    }
}

/// `(rep, regime)` pairs absent for this metric and spec, relative to every
/// replicate and regime appearing anywhere in the archive.
pub fn missing_cells(archive: &[ArchiveRow], metric: Metric, ps_spec: Complexity) -> Vec<(usize, Regime)> {
    let reps: BTreeSet<usize> = archive.iter().map(|r| r.rep).collect();
    let regimes: BTreeSet<Regime> = archive.iter().map(|r| r.regime).collect();
    let present: BTreeSet<(usize, Regime)> = archive
        .iter()
        .filter(|r| r.metric == metric && r.ps_spec == ps_spec && r.balance.iter().all(Option::is_some))
        .map(|r| (r.rep, r.regime))
        .collect();
    reps.iter()
        .flat_map(|&rep| regimes.iter().map(move |&g| (rep, g)))
        .filter(|cell| !present.contains(cell))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub metric: Metric,
    pub ps_spec: Complexity,
    pub r_squared: f64,
    /// Expected bias at zero imbalance.
    pub intercept: f64,
    pub rows: usize,
}

/// OLS of bias on `b1, b2, b3, b1^2, b2^2, b3^2` (raw squares).
///
/// Rows drawn from a single weighting regime carry no designed variation in
/// imbalance, so that case is reported as rank deficient.
pub fn fit_bias_regression(table: &EvalTable) -> Result<EvalResult> {
    let ctx = |e: Error| e.context(format!("metric {}", table.metric));
    let rows = &table.rows;
    if rows.len() < 8 {
        return Err(ctx(Error::Domain(format!(
            "{} rows cannot identify 7 coefficients",
            rows.len()
        ))));
    }
    let regimes: BTreeSet<Regime> = rows.iter().map(|r| r.regime).collect();
    if regimes.len() < 2 {
        return Err(ctx(Error::RankDeficient(
            ["bal_A0X0", "bal_A1X0", "bal_A1X1"].map(String::from).to_vec(),
        )));
    }
    let col = |j: usize, square: bool| -> Vec<f64> {
        rows.iter()
            .map(|r| if square { r.balance[j] * r.balance[j] } else { r.balance[j] })
            .collect()
    };
    let cols = [col(0, false), col(1, false), col(2, false), col(0, true), col(1, true), col(2, true)];
    let names = ["bal_A0X0", "bal_A1X0", "bal_A1X1", "bal_A0X0^2", "bal_A1X0^2", "bal_A1X1^2"];
    let named: Vec<(&str, &[f64])> = names.iter().copied().zip(cols.iter().map(Vec::as_slice)).collect();
    let design = Design::with_intercept(&named).map_err(ctx)?;
    let y: Vec<f64> = rows.iter().map(|r| r.bias).collect();
    let fit = fit_ols(&design, &y).map_err(ctx)?;
    Ok(EvalResult {
        metric: table.metric,
        ps_spec: table.ps_spec,
        r_squared: fit.r_squared,
        intercept: fit.intercept,
        rows: rows.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub ordered: Vec<EvalResult>,
    /// Metrics whose |intercept| exceeds the alert level.
    pub alerts: Vec<Metric>,
}

/// Sorts by R² descending, then |intercept| ascending.
pub fn rank_metrics(results: &[EvalResult], intercept_alert: f64) -> Ranking {
    let mut ordered = results.to_vec();
    ordered.sort_by(|a, b| {
        b.r_squared
            .total_cmp(&a.r_squared)
            .then(a.intercept.abs().total_cmp(&b.intercept.abs()))
    });
    let alerts = ordered
        .iter()
        .filter(|r| r.intercept.abs() > intercept_alert)
        .map(|r| r.metric)
        .collect();
    Ranking { ordered, alerts }
}

/// Evaluates every metric present in the archive, per PS spec.
pub fn evaluate_archive(archive: &[ArchiveRow]) -> Vec<(Complexity, Metric, Result<EvalResult>)> {
    let specs: BTreeSet<Complexity> = archive.iter().map(|r| r.ps_spec).collect();
    let metrics: BTreeSet<Metric> = archive.iter().map(|r| r.metric).collect();
    let mut out = Vec::new();
    for &spec in &specs {
        for &metric in &metrics {
            let table = assemble_eval_table(archive, metric, spec);
            if table.dropped > 0 {
                log::warn!("{metric} ({}): {} archive rows dropped for missing values", spec.as_str(), table.dropped);
            }
            out.push((spec, metric, fit_bias_regression(&table)));
        }
    }
    out
}

/// Writes `scenario,ps_spec,metric,r2,intercept`.
pub fn write_eval_csv<W: Write>(blocks: &[(String, Vec<EvalResult>)], sink: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(sink);
    out.write_record(["scenario", "ps_spec", "metric", "r2", "intercept"])?;
    for (scenario, results) in blocks {
        for r in results {
            out.write_record([
                scenario.clone(),
                r.ps_spec.as_str().to_string(),
                r.metric.to_string(),
                r.r_squared.to_string(),
                r.intercept.to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("<evaluation>", e))?;
    Ok(())
}
