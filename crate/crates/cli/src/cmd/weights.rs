use balancegauge::glm::{Complexity, DesignSpec};
use balancegauge::panel::PanelDataset;
use balancegauge::weights::{
    combine_weights, compute_censoring_weights, compute_weights, fit_censoring_models, fit_treatment_models,
    truncate_weights, write_weights, WeightFamily, WeightSet,
};
use balancegauge::{Error, Result};
use serde_json::json;

use super::{parse_complexity, parse_percentile, PanelArgs};
use crate::manifest::{create, write_json, Run};
use crate::{Format, GlobalArgs};

fn parse_family(s: &str) -> std::result::Result<WeightFamily, String> {
    match s.parse::<WeightFamily>() {
        Ok(WeightFamily::Partial | WeightFamily::Custom) => Err(format!("`{s}` weights cannot be fitted")),
        Ok(f) => Ok(f),
        Err(e) => Err(e.to_string()),
    }
}

/// How to fit a weight set from a panel.
#[derive(Debug, Clone, clap::Args)]
pub struct WeightSpecArgs {
    /// U, SW, W, WA, WC or WAC.
    #[arg(long, default_value = "W", value_parser = parse_family)]
    pub family: WeightFamily,
    #[arg(long, default_value = "simple", value_parser = parse_complexity)]
    pub ps_spec: Complexity,
    /// Time-points multiplied into the weight; all by default.
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<usize>,
    /// Cap weights at this empirical percentile, e.g. 0.9.
    #[arg(long, value_parser = parse_percentile)]
    pub truncate: Option<f64>,
}

impl WeightSpecArgs {
    pub fn fit(&self, data: &PanelDataset) -> Result<WeightSet> {
        let times: Vec<usize> = if self.times.is_empty() {
            (0..data.n_times()).collect()
        } else {
            self.times.clone()
        };
        let spec = DesignSpec::with_complexity(self.ps_spec);
        let w = match self.family {
            WeightFamily::Censoring => compute_censoring_weights(data, &fit_censoring_models(data, &spec)?, &times)?,
            WeightFamily::Combined => {
                let wa = compute_weights(data, &fit_treatment_models(data, &spec, WeightFamily::Treatment)?, &times)?;
                let wc = compute_censoring_weights(data, &fit_censoring_models(data, &spec)?, &times)?;
                combine_weights(&wa, &wc)?
            }
            WeightFamily::Partial | WeightFamily::Custom => {
                return Err(Error::Domain(format!("`{}` weights cannot be fitted", self.family)))
            }
            family => compute_weights(data, &fit_treatment_models(data, &spec, family)?, &times)?,
        };
        match self.truncate {
            Some(p) => truncate_weights(&w, p),
            None => Ok(w),
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    pub panel: PanelArgs,
    #[command(flatten)]
    pub weights: WeightSpecArgs,
}

pub fn run(global: &GlobalArgs, args: Args) -> Result<()> {
    let mut run = Run::start("weights", global)?;
    let data = args.panel.load(&mut run)?;
    let w = args.weights.fit(&data)?;
    match global.format {
        Format::Csv => write_weights(data.ids(), &w, create(&run.path("weights.csv"))?)?,
        Format::Json => {
            let rows: Vec<_> = data
                .ids()
                .iter()
                .zip(&w.values)
                .map(|(id, v)| json!({ "id": id, "value": v }))
                .collect();
            write_json(
                &run.path("weights.json"),
                &json!({ "family": w.family, "time_range": w.time_range, "truncation": w.truncation, "weights": rows }),
            )?;
        }
    }
    let available = w.available().count();
    println!(
        "{} weights for {available} of {} subjects: mean {:.4} (SE {:.4})",
        w.family,
        data.n(),
        w.mean(),
        w.mean_standard_error()
    );
    run.finish(json!({
        "panel": args.panel.panel,
        "outcome": args.panel.outcome,
        "schema": args.panel.schema,
        "family": w.family,
        "ps_spec": args.weights.ps_spec.as_str(),
        "times": w.time_range,
        "truncate": args.weights.truncate,
        "format": global.format,
    }))
}
