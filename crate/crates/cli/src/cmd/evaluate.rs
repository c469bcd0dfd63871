use std::collections::BTreeSet;
use std::path::PathBuf;

use balancegauge::eval::{evaluate_archive, missing_cells, rank_metrics, write_eval_csv, EvalResult};
use balancegauge::{Error, Result};
use serde_json::json;

use super::{find_archives, read_archive};
use crate::manifest::{create, write_json, Run};
use crate::{Format, GlobalArgs};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory holding `archive_<scenario>.csv` files.
    pub archive_dir: PathBuf,
    /// Evaluate even if some (replicate, regime) cells are missing.
    #[arg(long)]
    pub allow_incomplete: bool,
    /// Flag metrics whose |intercept| exceeds this value.
    #[arg(long, default_value_t = 0.05)]
    pub intercept_alert: f64,
}

const SHOWN_MISSING: usize = 20;

fn check_complete(scenario: &str, rows: &[balancegauge::sim::ArchiveRow], allow: bool) -> Result<()> {
    let keys: BTreeSet<_> = rows.iter().map(|r| (r.ps_spec, r.metric)).collect();
    let mut missing = Vec::new();
    for (spec, metric) in keys {
        for (rep, regime) in missing_cells(rows, metric, spec) {
            missing.push(format!("rep {rep} {} {regime} {metric}", spec.as_str()));
        }
    }
    if missing.is_empty() {
        return Ok(());
    }
    let shown = missing.iter().take(SHOWN_MISSING).cloned().collect::<Vec<_>>().join("; ");
    let more = missing.len().saturating_sub(SHOWN_MISSING);
    let message = format!(
        "archive for scenario {scenario} is incomplete, {} missing cells: {shown}{}",
        missing.len(),
        if more > 0 { format!("; and {more} more") } else { String::new() }
    );
    if allow {
        log::warn!("{message}");
        Ok(())
    } else {
        Err(Error::Validation(message))
    }
}

pub fn run(global: &GlobalArgs, args: Args) -> Result<()> {
    let mut run = Run::start("evaluate", global)?;
    let mut blocks: Vec<(String, Vec<EvalResult>)> = Vec::new();
    for (scenario, path) in find_archives(&args.archive_dir)? {
        run.input(&path);
        let rows = read_archive(&path)?;
        check_complete(&scenario, &rows, args.allow_incomplete)?;
        let mut results = Vec::new();
        for (_, _, result) in evaluate_archive(&rows) {
            results.push(result.map_err(|e| e.context(format!("scenario {scenario}")))?);
        }
        blocks.push((scenario, results));
    }
    match global.format {
        Format::Csv => write_eval_csv(&blocks, create(&run.path("evaluation.csv"))?)?,
        Format::Json => {
            let value: Vec<_> = blocks
                .iter()
                .map(|(scenario, results)| json!({ "scenario": scenario, "results": results }))
                .collect();
            write_json(&run.path("evaluation.json"), &value)?;
        }
    }
    for (scenario, results) in &blocks {
        let specs: BTreeSet<_> = results.iter().map(|r| r.ps_spec).collect();
        for spec in specs {
            let subset: Vec<EvalResult> = results.iter().filter(|r| r.ps_spec == spec).cloned().collect();
            let ranking = rank_metrics(&subset, args.intercept_alert);
            println!("scenario {scenario}, {} PS spec", spec.as_str());
            for r in &ranking.ordered {
                let alert = if ranking.alerts.contains(&r.metric) { "  intercept alert" } else { "" };
                println!("  {:<4} R2 {:.3}  intercept {:+.4}{alert}", r.metric.as_str(), r.r_squared, r.intercept);
            }
        }
    }
    run.finish(json!({
        "archive_dir": args.archive_dir,
        "allow_incomplete": args.allow_incomplete,
        "intercept_alert": args.intercept_alert,
        "format": global.format,
    }))
}
