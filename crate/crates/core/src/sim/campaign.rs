use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{simulate, stream_rng, Stage};
use super::scenario::ScenarioConfig;
use super::truth::{bias, estimate_msm, BiasAggregation, MsmTruth};
use crate::error::{Error, Result};
use crate::glm::{Complexity, DesignSpec};
use crate::metrics::{balance_table, BalanceOptions, GwdMode, Metric};
use crate::panel::PanelDataset;
use crate::weights::{
    combine_weights, compute_censoring_weights, compute_weights, fit_censoring_models, fit_treatment_models,
    product, truncate_weights, WeightFamily, WeightSet,
};

/// Weighting regimes of the simulation. In censored scenarios the time-1
/// factor includes the censoring weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "unweighted")]
    Unweighted,
    #[serde(rename = "W0xW1")]
    W0xW1,
    #[serde(rename = "W1")]
    W1,
    #[serde(rename = "W0")]
    W0,
    #[serde(rename = "W0tr90xW1")]
    W0trxW1,
    #[serde(rename = "W0xW1tr90")]
    W0xW1tr,
}

impl Regime {
    pub const ALL: [Regime; 6] = [
        Regime::Unweighted,
        Regime::W0xW1,
        Regime::W1,
        Regime::W0,
        Regime::W0trxW1,
        Regime::W0xW1tr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Unweighted => "unweighted",
            Regime::W0xW1 => "W0xW1",
            Regime::W1 => "W1",
            Regime::W0 => "W0",
            Regime::W0trxW1 => "W0tr90xW1",
            Regime::W0xW1tr => "W0xW1tr90",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown regime `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignOptions {
    pub reps: usize,
    pub seed: u64,
    pub ps_specs: Vec<Complexity>,
    pub regimes: Vec<Regime>,
    pub metrics: Vec<Metric>,
    pub gwd_mode: GwdMode,
    pub aggregation: BiasAggregation,
    pub truncation_percentile: f64,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self {
            reps: 1,
            seed: 0,
            ps_specs: vec![Complexity::Simple, Complexity::Complex],
            regimes: Regime::ALL.to_vec(),
            metrics: Metric::ALL.to_vec(),
            gwd_mode: GwdMode::default(),
            aggregation: BiasAggregation::default(),
            truncation_percentile: 0.9,
        }
    }
}

/// Aggregate balance of one metric for `A0~X0`, `A1~X0`, `A1~X1`.
pub type BalanceTriple = [Option<f64>; 3];

/// The `(t, k)` cells behind each entry of a [`BalanceTriple`].
pub const TRIPLE_CELLS: [(usize, usize); 3] = [(0, 0), (1, 1), (1, 0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub ps_spec: Complexity,
    pub regime: Regime,
    pub beta: Vec<f64>,
    pub odds_ratios: Vec<f64>,
    pub per_parameter_bias: Vec<f64>,
    pub bias: f64,
    pub balance: BTreeMap<Metric, BalanceTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub rep: usize,
    pub ps_spec: Option<Complexity>,
    pub regime: Option<Regime>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub rep: usize,
    pub treated_fraction: Vec<f64>,
    pub censored_fraction: f64,
    pub outcome_prevalence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub scenario: String,
    pub truth: MsmTruth,
    pub aggregation: BiasAggregation,
    pub records: Vec<ReplicateRecord>,
    pub failures: Vec<ReplicateFailure>,
    pub summaries: Vec<ReplicateSummary>,
}

impl Archive {
    pub fn records_for(&self, ps_spec: Complexity, regime: Regime) -> impl Iterator<Item = &ReplicateRecord> {
        self.records
            .iter()
            .filter(move |r| r.ps_spec == ps_spec && r.regime == regime)
    }

    /// Mean over replicates of one column of the archive.
    pub fn mean_of(&self, ps_spec: Complexity, regime: Regime, f: impl Fn(&ReplicateRecord) -> Option<f64>) -> f64 {
        let vals: Vec<f64> = self.records_for(ps_spec, regime).filter_map(f).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

fn summarize(rep: usize, data: &PanelDataset) -> ReplicateSummary {
    let treated_fraction = (0..data.n_times())
        .map(|t| {
            let rows = data.uncensored_at(t);
            let a = data.treatment_column(t, &rows).values;
            a.iter().sum::<f64>() / a.len() as f64
        })
        .collect();
    let outcome: Vec<f64> = data
        .outcome()
        .map(|o| o.iter().flatten().map(|&y| f64::from(y)).collect())
        .unwrap_or_default();
    ReplicateSummary {
        rep,
        treated_fraction,
        censored_fraction: data.censored_fraction(data.last_time()),
        outcome_prevalence: outcome.iter().sum::<f64>() / outcome.len() as f64,
    }
}

/// Per-time weight factors `W_0` and `W_1` (times censoring weights at 1).
fn weight_factors(data: &PanelDataset, spec: Complexity) -> Result<(WeightSet, WeightSet)> {
    let design = DesignSpec::with_complexity(spec);
    if data.has_censoring() {
        let models = fit_treatment_models(data, &design, WeightFamily::Treatment)?;
        let w0 = compute_weights(data, &models, &[0])?;
        let wa1 = compute_weights(data, &models, &[1])?;
        let wc1 = compute_censoring_weights(data, &fit_censoring_models(data, &design)?, &[1])?;
        Ok((w0, combine_weights(&wa1, &wc1)?))
    } else {
        let models = fit_treatment_models(data, &design, WeightFamily::Marginal)?;
        Ok((compute_weights(data, &models, &[0])?, compute_weights(data, &models, &[1])?))
    }
}

fn regime_weights(regime: Regime, w0: &WeightSet, w1: &WeightSet, percentile: f64) -> Result<WeightSet> {
    match regime {
        Regime::Unweighted => Ok(WeightSet::ones(w0.len())),
        Regime::W0xW1 => product(w0, w1),
        Regime::W1 => Ok(w1.clone()),
        Regime::W0 => Ok(w0.clone()),
        Regime::W0trxW1 => product(&truncate_weights(w0, percentile)?, w1),
        Regime::W0xW1tr => product(w0, &truncate_weights(w1, percentile)?),
    }
}

fn evaluate_regime(
    data: &PanelDataset,
    weights: WeightSet,
    truth: &MsmTruth,
    options: &CampaignOptions,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, f64, BTreeMap<Metric, BalanceTriple>)> {
    // balance is checked in the analysis sample: subjects followed to the end
    let last = data.last_time();
    let mut w = weights;
    for (i, v) in w.values.iter_mut().enumerate() {
        if data.is_censored(last, i) {
            *v = None;
        }
    }
    let balance_options = BalanceOptions {
        metrics: options.metrics.clone(),
        schedule: TRIPLE_CELLS.to_vec(),
        gwd_mode: options.gwd_mode,
        cs_spec: DesignSpec::simple(),
    };
    let report = balance_table(data, &w, &balance_options)?;
    let balance = options
        .metrics
        .iter()
        .map(|&m| (m, TRIPLE_CELLS.map(|(t, k)| report.aggregate(t, k, m))))
        .collect();
    let est = estimate_msm(data, &w)?;
    let b = bias(&est.odds_ratios, &truth.odds_ratios, options.aggregation)?;
    Ok((est.beta, est.odds_ratios, b.per_parameter, b.value, balance))
}

type ReplicateOutput = (Vec<ReplicateRecord>, Vec<ReplicateFailure>, Option<ReplicateSummary>);

fn run_one(config: &ScenarioConfig, truth: &MsmTruth, options: &CampaignOptions, rep: usize) -> ReplicateOutput {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let fail = |ps_spec, regime, e: Error| ReplicateFailure {
        rep,
        ps_spec,
        regime,
        message: e.to_string(),
    };
    let sim = match simulate(config, &mut stream_rng(options.seed, rep as u64, Stage::Data)) {
        Ok(s) => s,
        Err(e) => return (records, vec![fail(None, None, e)], None),
    };
    let data = &sim.data;
    for &spec in &options.ps_specs {
        let (w0, w1) = match weight_factors(data, spec) {
            Ok(f) => f,
            Err(e) => {
                failures.push(fail(Some(spec), None, e));
                continue;
            }
        };
        for &regime in &options.regimes {
            let outcome = regime_weights(regime, &w0, &w1, options.truncation_percentile)
                .and_then(|w| evaluate_regime(data, w, truth, options));
            match outcome {
                Ok((beta, odds_ratios, per_parameter_bias, bias, balance)) => records.push(ReplicateRecord {
                    rep,
                    ps_spec: spec,
                    regime,
                    beta,
                    odds_ratios,
                    per_parameter_bias,
                    bias,
                    balance,
                }),
                Err(e) => failures.push(fail(Some(spec), Some(regime), e)),
            }
        }
    }
    (records, failures, Some(summarize(rep, data)))
}

/// Runs `options.reps` independent replicates in parallel on the current
/// rayon pool. Replicate `r` draws from its own stream, so the archive is
/// the same for any thread count. Failed replicates are recorded, not fatal.
pub fn run_replicates(config: &ScenarioConfig, truth: &MsmTruth, options: &CampaignOptions) -> Result<Archive> {
    config.validate()?;
    if options.reps == 0 {
        return Err(Error::Domain("reps must be at least 1".into()));
    }
    if options.ps_specs.is_empty() || options.regimes.is_empty() || options.metrics.is_empty() {
        return Err(Error::Domain("campaign needs at least one PS spec, regime and metric".into()));
    }
    let outputs: Vec<ReplicateOutput> = (0..options.reps)
        .into_par_iter()
        .map(|rep| run_one(config, truth, options, rep))
        .collect();
    let mut archive = Archive {
        scenario: config.id.clone(),
        truth: *truth,
        aggregation: options.aggregation,
        records: Vec::new(),
        failures: Vec::new(),
        summaries: Vec::new(),
    };
    for (records, failures, summary) in outputs {
        for f in &failures {
            log::warn!("replicate {} failed: {}", f.rep, f.message);
        }
        archive.records.extend(records);
        archive.failures.extend(failures);
        archive.summaries.extend(summary);
    }
    Ok(archive)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Paths of the files written for one scenario.
pub fn archive_paths(dir: &Path, scenario: &str) -> [PathBuf; 3] {
    [
        dir.join(format!("archive_{scenario}.csv")),
        dir.join(format!("archive_{scenario}_msm.csv")),
        dir.join(format!("archive_{scenario}_replicates.csv")),
    ]
}

/// Writes `rep,ps_spec,regime,metric,bal_A0X0,bal_A1X0,bal_A1X1,bias`.
pub fn write_archive_csv<W: Write>(archive: &Archive, sink: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(sink);
    out.write_record(["rep", "ps_spec", "regime", "metric", "bal_A0X0", "bal_A1X0", "bal_A1X1", "bias"])?;
    for r in &archive.records {
        for (metric, triple) in &r.balance {
            out.write_record([
                r.rep.to_string(),
                r.ps_spec.as_str().to_string(),
                r.regime.to_string(),
                metric.to_string(),
                opt(triple[0]),
                opt(triple[1]),
                opt(triple[2]),
                r.bias.to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("<archive>", e))?;
    Ok(())
}

/// Per-record MSM estimates and per-parameter biases.
pub fn write_msm_csv<W: Write>(archive: &Archive, sink: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(sink);
    let k = archive.records.first().map_or(2, |r| r.odds_ratios.len());
    let mut header = vec!["rep".to_string(), "ps_spec".into(), "regime".into()];
    header.extend((0..=k).map(|j| format!("beta{j}")));
    header.extend((1..=k).map(|j| format!("or{j}")));
    header.extend((1..=k).map(|j| format!("bias{j}")));
    out.write_record(&header)?;
    for r in &archive.records {
        let mut row = vec![r.rep.to_string(), r.ps_spec.as_str().to_string(), r.regime.to_string()];
        row.extend(r.beta.iter().chain(&r.odds_ratios).chain(&r.per_parameter_bias).map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::io("<archive>", e))?;
    Ok(())
}

pub fn write_replicates_csv<W: Write>(archive: &Archive, sink: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(sink);
    out.write_record(["rep", "treated_t0", "treated_t1", "censored", "outcome_prevalence", "failures"])?;
    for s in &archive.summaries {
        let failures = archive.failures.iter().filter(|f| f.rep == s.rep).count();
        let treated = |t: usize| s.treated_fraction.get(t).map(f64::to_string).unwrap_or_default();
        out.write_record([
            s.rep.to_string(),
            treated(0),
            treated(1),
            s.censored_fraction.to_string(),
            s.outcome_prevalence.to_string(),
            failures.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<archive>", e))?;
    Ok(())
}

/// Writes the three archive files into `dir`, returning their paths.
pub fn write_archive(archive: &Archive, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = archive_paths(dir, &archive.scenario);
    let create = |p: &Path| std::fs::File::create(p).map_err(|e| Error::io(p, e));
    write_archive_csv(archive, create(&paths[0])?)?;
    write_msm_csv(archive, create(&paths[1])?)?;
    write_replicates_csv(archive, create(&paths[2])?)?;
    Ok(paths.to_vec())
}

/// One line of an archive CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveRow {
    pub rep: usize,
    pub ps_spec: Complexity,
    pub regime: Regime,
    pub metric: Metric,
    pub balance: BalanceTriple,
    pub bias: f64,
}

impl Archive {
    pub fn rows(&self) -> Vec<ArchiveRow> {
        self.records
            .iter()
            .flat_map(|r| {
                r.balance.iter().map(move |(&metric, &balance)| ArchiveRow {
                    rep: r.rep,
                    ps_spec: r.ps_spec,
                    regime: r.regime,
                    metric,
                    balance,
                    bias: r.bias,
                })
            })
            .collect()
    }
}

pub fn read_archive_csv<R: Read>(source: R) -> Result<Vec<ArchiveRow>> {
    let mut reader = csv::Reader::from_reader(source);
    let expected = ["rep", "ps_spec", "regime", "metric", "bal_A0X0", "bal_A1X0", "bal_A1X1", "bias"];
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Schema(format!(
            "archive header must be `{}`",
            expected.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let bad = |what: &str| Error::Schema(format!("line {line}: invalid {what}"));
        let num = |j: usize| -> Result<Option<f64>> {
            let s = record.get(j).unwrap_or_default().trim();
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(expected[j]))
            }
        };
        rows.push(ArchiveRow {
            rep: record[0].parse().map_err(|_| bad("rep"))?,
            ps_spec: record[1].parse().map_err(|_| bad("ps_spec"))?,
            regime: record[2].parse().map_err(|_| bad("regime"))?,
            metric: record[3].parse().map_err(|_| bad("metric"))?,
            balance: [num(4)?, num(5)?, num(6)?],
            bias: num(7)?.ok_or_else(|| bad("bias"))?,
        });
    }
    Ok(rows)
}
