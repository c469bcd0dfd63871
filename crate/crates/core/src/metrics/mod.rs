//! Balance metrics comparing covariate distributions between treatment groups
//! in a weighted sample. Every metric is on a scale where 0 is perfect balance.

mod ecdf;
mod kde;
mod multivariate;
mod table;
mod univariate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::CovariateBlock;
use crate::weights::WeightSet;

pub use ecdf::WeightedEcdf;
pub use kde::{silverman_bandwidth, KdeGrid, GRID_POINTS};
pub use multivariate::{
    cstat_raw, gwd, gwd_values, mahalanobis_balance, mahalanobis_values, post_weighting_cstat, weighted_auc,
    GwdMode, GwdResult, PooledMoments,
};
pub use table::{
    aggregate_label, balance_table, block_plot_curves, schedule, BalanceCell, BalanceOptions, BalanceReport,
    CellKey, CurvePoint, ScheduleKind, GLOBAL,
};
pub use univariate::{
    ks_distance, ks_values, levy_distance, levy_values, mean_diff_values, overlap_coefficient, overlap_values,
    smd, smd_values, weighted_mean_diff,
};

pub const SMD_THRESHOLD: f64 = 0.1;
/// Per-covariate contribution to the Mahalanobis threshold.
pub const MHB_THRESHOLD_PER_COVARIATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "D")]
    D,
    #[serde(rename = "SMD")]
    Smd,
    #[serde(rename = "OVL")]
    Ovl,
    #[serde(rename = "KS")]
    Ks,
    #[serde(rename = "LD")]
    Levy,
    #[serde(rename = "MHB")]
    Mhb,
    #[serde(rename = "CS")]
    Cs,
    #[serde(rename = "GWD")]
    Gwd,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::D,
        Metric::Smd,
        Metric::Ovl,
        Metric::Ks,
        Metric::Levy,
        Metric::Mhb,
        Metric::Cs,
        Metric::Gwd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::D => "D",
            Metric::Smd => "SMD",
            Metric::Ovl => "OVL",
            Metric::Ks => "KS",
            Metric::Levy => "LD",
            Metric::Mhb => "MHB",
            Metric::Cs => "CS",
            Metric::Gwd => "GWD",
        }
    }

    /// Univariate metrics give one value per covariate; the rest one per block.
    pub fn is_univariate(self) -> bool {
        matches!(self, Metric::D | Metric::Smd | Metric::Ovl | Metric::Ks | Metric::Levy)
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "d" => Metric::D,
            "smd" => Metric::Smd,
            "ovl" => Metric::Ovl,
            "ks" => Metric::Ks,
            "ld" | "lv" | "levy" => Metric::Levy,
            "mhb" => Metric::Mhb,
            "cs" => Metric::Cs,
            "gwd" => Metric::Gwd,
            other => return Err(Error::Domain(format!("unknown metric `{other}`"))),
        })
    }
}

/// Weights of the block's rows, taken from a weight set over the full panel.
pub fn block_weights(block: &CovariateBlock, w: &WeightSet) -> Result<Vec<f64>> {
    block
        .subjects
        .iter()
        .map(|&i| {
            w.values
                .get(i)
                .copied()
                .flatten()
                .ok_or_else(|| Error::Domain(format!("no weight available for row subject {i}")))
        })
        .collect()
}

/// Row indices and within-group weights rescaled to sum to the group size.
#[derive(Debug, Clone)]
pub(crate) struct Groups {
    pub rows: [Vec<usize>; 2],
    pub weights: [Vec<f64>; 2],
}

impl Groups {
    /// Index 1 holds the treated group and index 0 the untreated group.
    pub fn split(group: &[bool], w: &[f64]) -> Result<Self> {
        if group.len() != w.len() {
            return Err(Error::Domain(format!(
                "{} rows but {} weights",
                group.len(),
                w.len()
            )));
        }
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!("invalid weight {bad}")));
        }
        let mut rows = [Vec::new(), Vec::new()];
        for (i, &g) in group.iter().enumerate() {
            rows[usize::from(g)].push(i);
        }
        let mut weights = [Vec::new(), Vec::new()];
        for g in 0..2 {
            let total: f64 = rows[g].iter().map(|&i| w[i]).sum();
            if rows[g].is_empty() || total <= 0.0 {
                return Err(Error::DegenerateGroup(format!(
                    "{} group has no positive weight",
                    if g == 1 { "treated" } else { "untreated" }
                )));
            }
            let m = rows[g].len() as f64;
            weights[g] = rows[g].iter().map(|&i| w[i] * m / total).collect();
        }
        Ok(Self { rows, weights })
    }

    pub fn values(&self, g: usize, x: &[f64]) -> Vec<f64> {
        self.rows[g].iter().map(|&i| x[i]).collect()
    }

    pub fn mean(&self, g: usize, x: &[f64]) -> f64 {
        let m = self.rows[g].len() as f64;
        self.rows[g].iter().zip(&self.weights[g]).map(|(&i, w)| w * x[i]).sum::<f64>() / m
    }

    /// Weighted variance with weights summing to the group size `m`, divided by `m - 1`.
    pub fn variance(&self, g: usize, x: &[f64]) -> f64 {
        self.covariance(g, x, x)
    }

    pub fn covariance(&self, g: usize, x: &[f64], y: &[f64]) -> f64 {
        let m = self.rows[g].len();
        if m < 2 {
            return 0.0;
        }
        let (mx, my) = (self.mean(g, x), self.mean(g, y));
        self.rows[g]
            .iter()
            .zip(&self.weights[g])
            .map(|(&i, w)| w * (x[i] - mx) * (y[i] - my))
            .sum::<f64>()
            / (m - 1) as f64
    }

    /// Pooled standard deviation `sqrt((s1^2 + s0^2) / 2)`.
    pub fn pooled_sd(&self, x: &[f64]) -> f64 {
        ((self.variance(1, x) + self.variance(0, x)) / 2.0).max(0.0).sqrt()
    }
}
