use std::path::PathBuf;

use balancegauge::glm::Complexity;
use balancegauge::metrics::{GwdMode, Metric};
use balancegauge::panel::write_panel;
use balancegauge::sim::{
    builtin_scenario, run_replicates, simulate, stream_rng, truth_oracle, write_archive, BiasAggregation,
    CampaignOptions, ScenarioConfig, Stage,
};
use balancegauge::{Error, Result};
use serde_json::json;

use super::{parse_gwd_mode, parse_metric, parse_percentile, report};
use crate::manifest::{write_json, Run};
use crate::GlobalArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SpecChoice {
    Simple,
    Complex,
    Both,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Built-in scenario: 1..10 or censored-base.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub scenario: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the scenario's sample size.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    /// Subjects simulated by the counterfactual truth oracle.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub truth_size: u64,
    #[arg(long, value_enum, default_value_t = SpecChoice::Both)]
    pub ps_spec: SpecChoice,
    /// Comma-separated subset of D,SMD,OVL,KS,LD,MHB,CS,GWD.
    #[arg(long, value_delimiter = ',', value_parser = parse_metric)]
    pub metrics: Vec<Metric>,
    /// How the two odds-ratio errors are reduced to one bias value.
    #[arg(long, default_value = "mean-signed", value_parser = ["mean-signed", "mean-absolute", "abs-mean-signed"])]
    pub aggregation: String,
    #[arg(long, default_value = "mean-per-term", value_parser = parse_gwd_mode)]
    pub gwd_mode: GwdMode,
    #[arg(long, default_value = "0.9", value_parser = parse_percentile)]
    pub truncation: f64,
    /// Also write replicate 0 as `panel.csv` and `outcome.csv`.
    #[arg(long)]
    pub write_panel: bool,
}

fn resolve_config(args: &Args, run: &mut Run) -> Result<ScenarioConfig> {
    let mut config = match (&args.scenario, &args.config) {
        (Some(id), _) => builtin_scenario(id)?,
        (None, Some(path)) => {
            run.input(path);
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            ScenarioConfig::from_json(&text)?
        }
        (None, None) => return Err(Error::Domain("one of --scenario or --config is required".into())),
    };
    if let Some(n) = args.n {
        config.n = n;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(global: &GlobalArgs, args: Args) -> Result<()> {
    let mut run = Run::start("simulate", global)?;
    let config = resolve_config(&args, &mut run)?;
    let options = CampaignOptions {
        reps: args.reps as usize,
        seed: global.seed,
        ps_specs: match args.ps_spec {
            SpecChoice::Simple => vec![Complexity::Simple],
            SpecChoice::Complex => vec![Complexity::Complex],
            SpecChoice::Both => vec![Complexity::Simple, Complexity::Complex],
        },
        metrics: if args.metrics.is_empty() {
            Metric::ALL.to_vec()
        } else {
            args.metrics.clone()
        },
        gwd_mode: args.gwd_mode,
        aggregation: args.aggregation.parse::<BiasAggregation>()?,
        truncation_percentile: args.truncation,
        ..CampaignOptions::default()
    };
    let truth = truth_oracle(&config, args.truth_size as usize, global.seed)?;
    log::info!(
        "truth for scenario {}: odds ratios {:.4}, {:.4}",
        config.id,
        truth.odds_ratios[0],
        truth.odds_ratios[1]
    );
    let archive = run_replicates(&config, &truth, &options)?;
    if archive.records.is_empty() {
        return Err(Error::Domain(format!(
            "every replicate failed; first failure: {}",
            archive.failures.first().map_or("none", |f| f.message.as_str())
        )));
    }
    for p in write_archive(&archive, run.out())? {
        run.outputs.push(p);
    }
    let truth_path = run.path(format!("truth_{}.json", config.id));
    write_json(&truth_path, &truth)?;

    let summary = report::summarize(&config.id, &archive.rows());
    report::write_summary(&mut run, &config.id, &summary, global.format)?;
    report::print_summary(&summary);

    if args.write_panel {
        let sim = simulate(&config, &mut stream_rng(global.seed, 0, Stage::Data))?;
        let panel = run.path("panel.csv");
        let outcome = run.path("outcome.csv");
        write_panel(&sim.data, &panel, Some(&outcome))?;
    }
    run.finish(json!({
        "scenario": config,
        "campaign": options,
        "truth_size": args.truth_size,
        "truth": truth,
        "failures": archive.failures.len(),
    }))
}
