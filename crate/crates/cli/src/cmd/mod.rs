pub mod balance;
pub mod evaluate;
pub mod report;
pub mod simulate;
pub mod weights;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use balancegauge::glm::Complexity;
use balancegauge::metrics::{GwdMode, Metric};
use balancegauge::panel::{infer_schema, load_panel, CovariateSpec, PanelDataset};
use balancegauge::{Error, Result};

use crate::manifest::Run;

fn from_str<T: FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    from_str(s)
}

pub fn parse_complexity(s: &str) -> std::result::Result<Complexity, String> {
    from_str(s)
}

pub fn parse_gwd_mode(s: &str) -> std::result::Result<GwdMode, String> {
    match s {
        "sum" => Ok(GwdMode::Sum),
        "mean" | "mean-per-term" => Ok(GwdMode::MeanPerTerm),
        other => Err(format!("unknown GWD mode `{other}` (sum, mean-per-term)")),
    }
}

pub fn parse_percentile(s: &str) -> std::result::Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if p > 0.0 && p <= 1.0 {
        Ok(p)
    } else {
        Err("percentile must lie in (0, 1]".into())
    }
}

/// Panel input shared by the commands that read user data.
#[derive(Debug, Clone, clap::Args)]
pub struct PanelArgs {
    /// Long-format panel CSV: `id,time,censored,treatment,<covariates>`.
    pub panel: PathBuf,
    /// Outcome CSV `id,outcome`.
    #[arg(long)]
    pub outcome: Option<PathBuf>,
    /// JSON list of covariate specs; inferred from the panel when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

impl PanelArgs {
    pub fn load(&self, run: &mut Run) -> Result<PanelDataset> {
        run.input(&self.panel);
        let schema = match &self.schema {
            Some(p) => {
                run.input(p);
                read_schema(p)?
            }
            None => infer_schema(&self.panel)?,
        };
        if let Some(p) = &self.outcome {
            run.input(p);
        }
        load_panel(&self.panel, self.outcome.as_deref(), &schema)
    }
}

fn read_schema(path: &Path) -> Result<Vec<CovariateSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema: Vec<CovariateSpec> = serde_json::from_str(&text)?;
    for spec in &schema {
        spec.validate()?;
    }
    Ok(schema)
}

/// `archive_<scenario>.csv` files in `dir`, sorted by scenario id.
pub fn find_archives(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(id) = name.strip_prefix("archive_").and_then(|s| s.strip_suffix(".csv")) else { continue };
        if id.ends_with("_msm") || id.ends_with("_replicates") {
            continue;
        }
        found.push((id.to_string(), path));
    }
    if found.is_empty() {
        return Err(Error::Validation(format!("no archive_<scenario>.csv files in {}", dir.display())));
    }
    found.sort();
    Ok(found)
}

pub fn read_archive(path: &Path) -> Result<Vec<balancegauge::sim::ArchiveRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    balancegauge::sim::read_archive_csv(file).map_err(|e| e.context(path.display().to_string()))
}
