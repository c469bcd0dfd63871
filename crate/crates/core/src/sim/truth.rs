use serde::{Deserialize, Serialize};

use super::generate::{counterfactual_path, stream_rng, Stage, SubjectNoise};
use super::scenario::ScenarioConfig;
use crate::error::{Error, Result};
use crate::glm::{fit_weighted_logistic, Design};
use crate::panel::PanelDataset;
use crate::weights::WeightSet;

/// Parameters of `logit E[Y^(a0, a1)] = b0 + b1 a0 + b2 a1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsmTruth {
    pub beta: [f64; 3],
    pub odds_ratios: [f64; 2],
    pub oracle_size: usize,
    pub seed: u64,
}

/// How counterfactual outcomes enter the truth fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthOutcome {
    /// Each counterfactual outcome is replaced by its generating probability.
    #[default]
    ExpectedProbability,
    /// Each counterfactual outcome is a Bernoulli draw.
    Sampled,
}

/// Simulates `size` subjects, derives their outcomes under all four
/// treatment regimes with censoring switched off, and fits the marginal
/// model to the stacked `4 * size` rows with unit weights.
///
/// Rows within a regime share the design row, so the stacked fit is computed
/// from the four regime totals; the estimate is identical.
pub fn truth_oracle(config: &ScenarioConfig, size: usize, seed: u64) -> Result<MsmTruth> {
    truth_oracle_with(config, size, seed, TruthOutcome::default())
}

pub fn truth_oracle_with(config: &ScenarioConfig, size: usize, seed: u64, outcome: TruthOutcome) -> Result<MsmTruth> {
    config.validate()?;
    if size == 0 {
        return Err(Error::Domain("oracle size must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0, Stage::Truth);
    let mut sums = [0.0f64; 4];
    for _ in 0..size {
        let noise = SubjectNoise::draw(&mut rng);
        for (cell, sum) in sums.iter_mut().enumerate() {
            let (a0, a1) = ((cell >> 1) as f64, (cell & 1) as f64);
            let path = counterfactual_path(config, &noise, a0, a1);
            *sum += match outcome {
                TruthOutcome::ExpectedProbability => path.p_y,
                TruthOutcome::Sampled => path.y,
            };
        }
    }
    let a0 = [0.0, 0.0, 1.0, 1.0];
    let a1 = [0.0, 1.0, 0.0, 1.0];
    let design = Design::with_intercept(&[("A_0", &a0), ("A_1", &a1)])?;
    let y: Vec<f64> = sums.iter().map(|s| s / size as f64).collect();
    let fit = fit_weighted_logistic(&design, &y, &[size as f64; 4])?;
    let beta = [fit.coefficients[0], fit.coefficients[1], fit.coefficients[2]];
    Ok(MsmTruth {
        beta,
        odds_ratios: [beta[1].exp(), beta[2].exp()],
        oracle_size: size,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsmEstimate {
    /// Intercept, then one coefficient per treatment time.
    pub beta: Vec<f64>,
    pub odds_ratios: Vec<f64>,
    pub rows: usize,
}

/// Weighted logistic regression of `Y` on `A_0..A_T` among subjects with an
/// observed outcome and an available weight.
pub fn estimate_msm(data: &PanelDataset, w: &WeightSet) -> Result<MsmEstimate> {
    let outcome = data
        .outcome()
        .ok_or_else(|| Error::Validation("panel has no outcome".into()))?;
    if w.len() != data.n() {
        return Err(Error::Domain("weight set does not match panel".into()));
    }
    let rows: Vec<usize> = (0..data.n())
        .filter(|&i| outcome[i].is_some() && w.values[i].is_some())
        .collect();
    if rows.is_empty() {
        return Err(Error::Domain("no subject has both an outcome and a weight".into()));
    }
    let treatments: Vec<Vec<f64>> = (0..data.n_times()).map(|t| data.treatment_column(t, &rows).values).collect();
    let names: Vec<String> = (0..data.n_times()).map(|t| format!("A_{t}")).collect();
    let cols: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(treatments.iter().map(Vec::as_slice)).collect();
    let design = Design::with_intercept(&cols)?;
    let y: Vec<f64> = rows.iter().map(|&i| f64::from(outcome[i].expect("filtered"))).collect();
    let wv: Vec<f64> = rows.iter().map(|&i| w.values[i].expect("filtered")).collect();
    let fit = fit_weighted_logistic(&design, &y, &wv)?;
    Ok(MsmEstimate {
        odds_ratios: fit.coefficients[1..].iter().map(|b| b.exp()).collect(),
        beta: fit.coefficients,
        rows: rows.len(),
    })
}

/// Reduction of the per-parameter odds-ratio errors to one number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasAggregation {
    /// Mean of the absolute errors.
    MeanAbsolute,
    /// Mean of the signed errors.
    #[default]
    MeanSigned,
    /// Absolute value of the mean signed error.
    AbsMeanSigned,
}

impl BiasAggregation {
    pub fn apply(self, per_parameter: &[f64]) -> f64 {
        let n = per_parameter.len() as f64;
        match self {
            BiasAggregation::MeanAbsolute => per_parameter.iter().map(|b| b.abs()).sum::<f64>() / n,
            BiasAggregation::MeanSigned => per_parameter.iter().sum::<f64>() / n,
            BiasAggregation::AbsMeanSigned => (per_parameter.iter().sum::<f64>() / n).abs(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BiasAggregation::MeanAbsolute => "mean_absolute",
            BiasAggregation::MeanSigned => "mean_signed",
            BiasAggregation::AbsMeanSigned => "abs_mean_signed",
        }
    }
}

impl std::str::FromStr for BiasAggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "mean_absolute" => Ok(BiasAggregation::MeanAbsolute),
            "mean_signed" => Ok(BiasAggregation::MeanSigned),
            "abs_mean_signed" => Ok(BiasAggregation::AbsMeanSigned),
            other => Err(Error::Domain(format!("unknown bias aggregation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bias {
    /// `exp(b_hat_j) - exp(b_j)` for each treatment coefficient.
    pub per_parameter: Vec<f64>,
    pub value: f64,
}

pub fn bias(estimate: &[f64], truth: &[f64], aggregation: BiasAggregation) -> Result<Bias> {
    if estimate.len() != truth.len() || estimate.is_empty() {
        return Err(Error::Domain("estimate and truth odds ratios differ in length".into()));
    }
    let per_parameter: Vec<f64> = estimate.iter().zip(truth).map(|(e, t)| e - t).collect();
    Ok(Bias {
        value: aggregation.apply(&per_parameter),
        per_parameter,
    })
}
