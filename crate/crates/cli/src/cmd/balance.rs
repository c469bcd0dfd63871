use std::path::PathBuf;

use balancegauge::metrics::{
    balance_table, block_plot_curves, block_weights, schedule, BalanceOptions, BalanceReport, GwdMode, Metric,
    ScheduleKind, GLOBAL,
};
use balancegauge::panel::PanelDataset;
use balancegauge::weights::{read_weights, WeightSet};
use balancegauge::{Error, Result};
use serde::Serialize;
use serde_json::json;

use super::weights::WeightSpecArgs;
use super::{parse_gwd_mode, parse_metric, PanelArgs};
use crate::manifest::{create, write_json, Run};
use crate::GlobalArgs;

fn parse_cell(s: &str) -> std::result::Result<(usize, usize), String> {
    let (t, k) = s.split_once(',').ok_or_else(|| format!("`{s}` is not `t,k`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("`{v}` is not a time index"));
    let (t, k) = (parse(t)?, parse(k)?);
    if k > t {
        return Err(format!("lag {k} exceeds time {t}"));
    }
    Ok((t, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ScheduleArg {
    /// Every `(t, k)` with `k <= t`, baseline included.
    Full,
    /// Follow-up times `t >= 1` only.
    FollowUp,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    pub panel: PanelArgs,
    /// Weight CSV `id,family,value,truncated_at`; weights are fitted when absent.
    #[arg(long, conflicts_with = "unweighted")]
    pub weights: Option<PathBuf>,
    /// Check balance in the raw data.
    #[arg(long)]
    pub unweighted: bool,
    #[command(flatten)]
    pub fit: WeightSpecArgs,
    /// Comma-separated subset of D,SMD,OVL,KS,LD,MHB,CS,GWD.
    #[arg(long, value_delimiter = ',', value_parser = parse_metric)]
    pub metrics: Vec<Metric>,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Full)]
    pub schedule: ScheduleArg,
    #[arg(long, default_value = "mean-per-term", value_parser = parse_gwd_mode)]
    pub gwd_mode: GwdMode,
    /// Write ECDF and density curves for block `t,k`; repeatable.
    #[arg(long = "plot", value_parser = parse_cell)]
    pub plots: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize)]
struct FlaggedCovariate {
    covariate: String,
    smd: f64,
}

/// One `(t, k)` comparison of the MHB-first review.
#[derive(Debug, Serialize)]
struct ComparisonSummary {
    t: usize,
    k: usize,
    mhb: Option<f64>,
    mhb_threshold: Option<f64>,
    imbalanced: bool,
    /// Covariates with SMD above 0.1, listed for imbalanced comparisons.
    smd_drilldown: Vec<FlaggedCovariate>,
}

fn summarize(report: &BalanceReport) -> Vec<ComparisonSummary> {
    report
        .comparisons()
        .into_iter()
        .map(|(t, k)| {
            let mhb = report.cell(t, k, Metric::Mhb, GLOBAL);
            let smd_flags: Vec<FlaggedCovariate> = report
                .cells
                .iter()
                .filter(|c| c.t == t && c.k == k && c.metric == Metric::Smd && c.flag)
                .map(|c| FlaggedCovariate {
                    covariate: c.covariate.clone(),
                    smd: c.value.unwrap_or(f64::NAN),
                })
                .collect();
            let imbalanced = match mhb {
                Some(c) => c.flag,
                None => !smd_flags.is_empty(),
            };
            ComparisonSummary {
                t,
                k,
                mhb: mhb.and_then(|c| c.value),
                mhb_threshold: mhb.and_then(|c| c.threshold),
                imbalanced,
                smd_drilldown: if imbalanced { smd_flags } else { Vec::new() },
            }
        })
        .collect()
}

fn print_summary(summary: &[ComparisonSummary], report: &BalanceReport) {
    let flagged = summary.iter().filter(|s| s.imbalanced).count();
    println!(
        "{} weights: {} comparisons, {flagged} imbalanced",
        report.family,
        summary.len()
    );
    for s in summary {
        let mhb = match (s.mhb, s.mhb_threshold) {
            (Some(v), Some(th)) => format!("MHB {v:.4} (threshold {th:.2})"),
            _ => "MHB n/a".to_string(),
        };
        let mark = if s.imbalanced { "IMBALANCED" } else { "ok" };
        println!("  t={} k={}  {mhb}  {mark}", s.t, s.k);
        for f in &s.smd_drilldown {
            println!("      SMD {:<12} {:.4}", f.covariate, f.smd);
        }
    }
}

fn weight_set(args: &Args, data: &PanelDataset, run: &mut Run) -> Result<WeightSet> {
    if args.unweighted {
        return Ok(WeightSet::ones(data.n()));
    }
    match &args.weights {
        Some(path) => {
            run.input(path);
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_weights(data.ids(), file).map_err(|e| e.context(path.display().to_string()))
        }
        None => args.fit.fit(data),
    }
}

fn write_plot(data: &PanelDataset, w: &WeightSet, (t, k): (usize, usize), run: &mut Run) -> Result<()> {
    if t > data.last_time() {
        return Err(Error::Domain(format!("plot block t={t} beyond last time {}", data.last_time())));
    }
    let full = data.covariate_block(t, k)?;
    let keep: Vec<bool> = full.subjects.iter().map(|&i| w.values[i].is_some()).collect();
    let block = full.select(&keep);
    let wv = block_weights(&block, w)?;
    let mut out = csv::Writer::from_writer(create(&run.path(format!("plot_t{t}_k{k}.csv")))?);
    out.write_record(["covariate", "kind", "group", "x", "y"])?;
    for col in &block.columns {
        for p in block_plot_curves(&block, &wv, &col.name)? {
            out.write_record([p.covariate, p.kind, p.group.to_string(), p.x.to_string(), p.y.to_string()])?;
        }
    }
    out.flush().map_err(|e| Error::io(run.out(), e))
}

pub fn run(global: &GlobalArgs, args: Args) -> Result<()> {
    let mut run = Run::start("balance", global)?;
    let data = args.panel.load(&mut run)?;
    let w = weight_set(&args, &data, &mut run)?;
    let kind = match args.schedule {
        ScheduleArg::Full => ScheduleKind::Full,
        ScheduleArg::FollowUp => ScheduleKind::FollowUp,
    };
    let options = BalanceOptions {
        metrics: if args.metrics.is_empty() {
            Metric::ALL.to_vec()
        } else {
            args.metrics.clone()
        },
        schedule: schedule(data.last_time(), kind),
        gwd_mode: args.gwd_mode,
        ..BalanceOptions::default()
    };
    if options.schedule.is_empty() {
        return Err(Error::Domain("the follow-up schedule is empty for a single time-point".into()));
    }
    let report = balance_table(&data, &w, &options)?;
    report.write_csv(create(&run.path("balance.csv"))?)?;
    write_json(&run.path("balance.json"), &report.to_nested_json())?;
    let summary = summarize(&report);
    write_json(&run.path("summary.json"), &summary)?;
    print_summary(&summary, &report);
    for &cell in &args.plots {
        write_plot(&data, &w, cell, &mut run)?;
    }
    run.finish(json!({
        "panel": args.panel.panel,
        "outcome": args.panel.outcome,
        "schema": args.panel.schema,
        "weights": if args.unweighted {
            json!("unweighted")
        } else if let Some(p) = &args.weights {
            json!({ "file": p })
        } else {
            json!({
                "family": args.fit.family,
                "ps_spec": args.fit.ps_spec.as_str(),
                "times": args.fit.times,
                "truncate": args.fit.truncate,
            })
        },
        "metrics": options.metrics,
        "schedule": kind,
        "gwd_mode": format!("{:?}", args.gwd_mode),
        "plots": args.plots,
    }))
}
