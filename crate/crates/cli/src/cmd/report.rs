use std::collections::BTreeMap;
use std::path::PathBuf;

use balancegauge::glm::Complexity;
use balancegauge::metrics::Metric;
use balancegauge::sim::{ArchiveRow, Regime};
use balancegauge::Result;
use serde::Serialize;
use serde_json::json;

use super::{find_archives, read_archive};
use crate::manifest::{create, write_json, Run};
use crate::{Format, GlobalArgs};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory holding `archive_<scenario>.csv` files.
    pub archive_dir: PathBuf,
}

/// Mean bias and mean aggregate balance of one metric under one regime.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub ps_spec: Complexity,
    pub regime: Regime,
    pub metric: Metric,
    pub bal_a0x0: Option<f64>,
    pub bal_a1x0: Option<f64>,
    pub bal_a1x1: Option<f64>,
    pub bias: f64,
    pub reps: usize,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(scenario: &str, rows: &[ArchiveRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Complexity, Regime, Metric), Vec<&ArchiveRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.ps_spec, r.regime, r.metric)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((ps_spec, regime, metric), g)| SummaryRow {
            scenario: scenario.to_string(),
            ps_spec,
            regime,
            metric,
            bal_a0x0: mean(g.iter().map(|r| r.balance[0])),
            bal_a1x0: mean(g.iter().map(|r| r.balance[1])),
            bal_a1x1: mean(g.iter().map(|r| r.balance[2])),
            bias: mean(g.iter().map(|r| Some(r.bias))).unwrap_or(f64::NAN),
            reps: g.len(),
        })
        .collect()
}

pub fn write_summary(run: &mut Run, scenario: &str, rows: &[SummaryRow], format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(&run.path(format!("summary_{scenario}.json")), &rows),
        Format::Csv => {
            let mut out = csv::Writer::from_writer(create(&run.path(format!("summary_{scenario}.csv")))?);
            out.write_record(["scenario", "ps_spec", "regime", "metric", "bal_A0X0", "bal_A1X0", "bal_A1X1", "bias", "reps"])?;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in rows {
                out.write_record([
                    r.scenario.clone(),
                    r.ps_spec.as_str().to_string(),
                    r.regime.to_string(),
                    r.metric.to_string(),
                    opt(r.bal_a0x0),
                    opt(r.bal_a1x0),
                    opt(r.bal_a1x1),
                    r.bias.to_string(),
                    r.reps.to_string(),
                ])?;
            }
            out.flush().map_err(|e| balancegauge::Error::io(run.out(), e))
        }
    }
}

/// One line per regime: mean bias, then the balance triple of each metric.
pub fn print_summary(rows: &[SummaryRow]) {
    let mut current = None;
    for r in rows {
        let key = (r.scenario.as_str(), r.ps_spec, r.regime);
        if current != Some(key) {
            if current.is_some() {
                println!();
            }
            print!("{:<8} {:<8} {:<10} bias {:>7.3} |", r.scenario, r.ps_spec.as_str(), r.regime.as_str(), r.bias);
            current = Some(key);
        }
        let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.2}"));
        print!(" {} {}/{}/{}", r.metric, f(r.bal_a0x0), f(r.bal_a1x0), f(r.bal_a1x1));
    }
    if current.is_some() {
        println!();
    }
}

pub fn run(global: &GlobalArgs, args: Args) -> Result<()> {
    let mut run = Run::start("report", global)?;
    let mut scenarios = Vec::new();
    for (scenario, path) in find_archives(&args.archive_dir)? {
        run.input(&path);
        let rows = summarize(&scenario, &read_archive(&path)?);
        write_summary(&mut run, &scenario, &rows, global.format)?;
        print_summary(&rows);
        scenarios.push(scenario);
    }
    run.finish(json!({ "archive_dir": args.archive_dir, "scenarios": scenarios, "format": global.format }))
}
