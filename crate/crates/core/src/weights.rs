//! Inverse-probability weights for treatment and censoring.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{build_design, fit_weighted_logistic, predict_proba, Design, DesignSpec, GlmFit};
use crate::panel::{Column, PanelDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightFamily {
    /// `U`: numerator 1.
    #[serde(rename = "U")]
    Unstabilized,
    /// `SW`: numerator conditional on prior treatment.
    #[serde(rename = "SW")]
    Stabilized,
    /// `W`: numerator is the marginal treatment probability.
    #[serde(rename = "W")]
    Marginal,
    #[serde(rename = "WC")]
    Censoring,
    /// `W^A`: marginal numerator, fitted among the uncensored.
    #[serde(rename = "WA")]
    Treatment,
    #[serde(rename = "WAC")]
    Combined,
    #[serde(rename = "partial")]
    Partial,
    #[serde(rename = "custom")]
    Custom,
}

impl WeightFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightFamily::Unstabilized => "U",
            WeightFamily::Stabilized => "SW",
            WeightFamily::Marginal => "W",
            WeightFamily::Censoring => "WC",
            WeightFamily::Treatment => "WA",
            WeightFamily::Combined => "WAC",
            WeightFamily::Partial => "partial",
            WeightFamily::Custom => "custom",
        }
    }

    fn is_treatment_family(self) -> bool {
        matches!(
            self,
            WeightFamily::Unstabilized | WeightFamily::Stabilized | WeightFamily::Marginal | WeightFamily::Treatment
        )
    }
}

impl std::str::FromStr for WeightFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "U" | "unstabilized" => WeightFamily::Unstabilized,
            "SW" | "stabilized" => WeightFamily::Stabilized,
            "W" | "marginal" => WeightFamily::Marginal,
            "WC" | "censoring" => WeightFamily::Censoring,
            "WA" | "treatment" => WeightFamily::Treatment,
            "WAC" | "combined" => WeightFamily::Combined,
            "partial" => WeightFamily::Partial,
            "custom" => WeightFamily::Custom,
            other => return Err(Error::Domain(format!("unknown weight family `{other}`"))),
        })
    }
}

impl std::fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub percentile: f64,
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub family: WeightFamily,
    /// One entry per subject of the originating dataset; `None` where the
    /// subject was censored before the last factor.
    pub values: Vec<Option<f64>>,
    pub time_range: Vec<usize>,
    pub truncation: Option<Truncation>,
}

impl WeightSet {
    pub fn ones(n: usize) -> Self {
        Self {
            family: WeightFamily::Custom,
            values: vec![Some(1.0); n],
            time_range: Vec::new(),
            truncation: None,
        }
    }

    pub fn custom(values: Vec<Option<f64>>) -> Result<Self> {
        if let Some(bad) = values.iter().flatten().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!("weight {bad} is not a finite nonnegative number")));
        }
        Ok(Self {
            family: WeightFamily::Custom,
            values,
            time_range: Vec::new(),
            truncation: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, subject: usize) -> Option<f64> {
        self.values[subject]
    }

    pub fn available(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    /// Mean of the available weights.
    pub fn mean(&self) -> f64 {
        let (sum, count) = self.available().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        sum / count as f64
    }

    /// Standard error of [`WeightSet::mean`].
    pub fn mean_standard_error(&self) -> f64 {
        let m = self.mean();
        let vals: Vec<f64> = self.available().collect();
        let n = vals.len() as f64;
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Per-time fitted probabilities of `A_t = 1`, aligned with `rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentFit {
    pub time: usize,
    pub rows: Vec<usize>,
    pub denominator: GlmFit,
    pub numerator: Option<GlmFit>,
    pub p_denominator: Vec<f64>,
    /// `None` for unstabilized weights, where the numerator is 1.
    pub p_numerator: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentModels {
    pub family: WeightFamily,
    pub spec: DesignSpec,
    pub times: Vec<TreatmentFit>,
}

/// Per-time fitted probabilities of remaining uncensored, aligned with `rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoringFit {
    pub time: usize,
    pub rows: Vec<usize>,
    pub denominator: GlmFit,
    pub numerator: GlmFit,
    pub p_denominator: Vec<f64>,
    pub p_numerator: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensoringModels {
    pub spec: DesignSpec,
    pub times: Vec<CensoringFit>,
}

fn fit_with_predictions(design: &Design, y: &[f64]) -> Result<(GlmFit, Vec<f64>)> {
    let fit = fit_weighted_logistic(design, y, &vec![1.0; y.len()])?;
    let p = predict_proba(&fit, design)?;
    Ok((fit, p))
}

/// Fits the denominator model `A_t ~ X_0..X_t + A_0..A_{t-1}` and the
/// family's numerator model at every time-point, on subjects uncensored at `t`.
pub fn fit_treatment_models(data: &PanelDataset, spec: &DesignSpec, family: WeightFamily) -> Result<TreatmentModels> {
    if !family.is_treatment_family() {
        return Err(Error::Domain(format!("`{family}` is not a treatment weight family")));
    }
    let mut times = Vec::with_capacity(data.n_times());
    for t in 0..data.n_times() {
        let rows = data.uncensored_at(t);
        let y = data.treatment_column(t, &rows).values;
        let treated = y.iter().filter(|&&a| a == 1.0).count();
        if treated == 0 || treated == y.len() {
            return Err(Error::DegenerateTreatment {
                time: t,
                detail: format!("{treated} of {} uncensored subjects treated", y.len()),
            });
        }
        let degenerate = |e: Error| match e {
            Error::DegenerateResponse(detail) => Error::DegenerateTreatment { time: t, detail },
            other => other.context(format!("treatment model at time {t}")),
        };
        let design = build_design(&data.history_columns(t, &rows, t), spec).map_err(degenerate)?;
        let (denominator, p_denominator) = fit_with_predictions(&design, &y).map_err(degenerate)?;

        let numerator_design = match family {
            WeightFamily::Unstabilized => None,
            WeightFamily::Stabilized => {
                let history: Vec<Column> = (0..t).map(|s| data.treatment_column(s, &rows)).collect();
                Some(if history.is_empty() {
                    Design::intercept_only(rows.len())
                } else {
                    build_design(&history, &DesignSpec::with_complexity(spec.complexity)).map_err(degenerate)?
                })
            }
            _ => Some(Design::intercept_only(rows.len())),
        };
        let (numerator, p_numerator) = match numerator_design {
            None => (None, None),
            Some(d) => {
                let (fit, p) = fit_with_predictions(&d, &y).map_err(degenerate)?;
                (Some(fit), Some(p))
            }
        };
        times.push(TreatmentFit {
            time: t,
            rows,
            denominator,
            numerator,
            p_denominator,
            p_numerator,
        });
    }
    Ok(TreatmentModels {
        family,
        spec: spec.clone(),
        times,
    })
}

fn positions(n: usize, rows: &[usize]) -> Vec<Option<usize>> {
    let mut pos = vec![None; n];
    for (r, &i) in rows.iter().enumerate() {
        pos[i] = Some(r);
    }
    pos
}

fn check_range(range: &[usize], n_times: usize) -> Result<BTreeSet<usize>> {
    if range.is_empty() {
        return Err(Error::Domain("empty time range".into()));
    }
    let set: BTreeSet<usize> = range.iter().copied().collect();
    if let Some(&t) = set.iter().find(|&&t| t >= n_times) {
        return Err(Error::Domain(format!("time {t} outside the fitted models")));
    }
    Ok(set)
}

fn prob_of(p_one: f64, observed_one: bool) -> f64 {
    if observed_one {
        p_one
    } else {
        1.0 - p_one
    }
}

/// Product over `time_range` of numerator/denominator probabilities of the
/// observed treatment. Subjects censored at the last included time get `None`.
pub fn compute_weights(data: &PanelDataset, models: &TreatmentModels, time_range: &[usize]) -> Result<WeightSet> {
    let range = check_range(time_range, models.times.len())?;
    let n = data.n();
    let last = *range.iter().next_back().expect("range nonempty");
    let mut values: Vec<Option<f64>> = (0..n).map(|i| (!data.is_censored(last, i)).then_some(1.0)).collect();
    for &t in &range {
        let fit = &models.times[t];
        let pos = positions(n, &fit.rows);
        let slice = data.slice(t);
        for (i, value) in values.iter_mut().enumerate() {
            let Some(v) = value else { continue };
            let r = pos[i].ok_or_else(|| Error::Domain(format!("subject {} missing from time {t} model", data.ids()[i])))?;
            let treated = slice.treatment[i] == Some(1);
            let num = fit.p_numerator.as_ref().map_or(1.0, |p| prob_of(p[r], treated));
            *v *= num / prob_of(fit.p_denominator[r], treated);
        }
    }
    Ok(WeightSet {
        family: models.family,
        values,
        time_range: range.into_iter().collect(),
        truncation: None,
    })
}

/// Fits `P(C_t = 0 | history through t-1)` and its intercept-only numerator
/// at each `t >= 1` where censoring occurs, on subjects uncensored at `t-1`.
pub fn fit_censoring_models(data: &PanelDataset, spec: &DesignSpec) -> Result<CensoringModels> {
    let mut times = Vec::new();
    for t in 1..data.n_times() {
        let rows = data.uncensored_at(t - 1);
        let y: Vec<f64> = rows.iter().map(|&i| f64::from(u8::from(!data.is_censored(t, i)))).collect();
        if y.iter().all(|&v| v == 1.0) {
            continue;
        }
        let ctx = |e: Error| e.context(format!("censoring model at time {t}"));
        let design = build_design(&data.history_columns(t, &rows, t - 1), spec).map_err(ctx)?;
        let (denominator, p_denominator) = fit_with_predictions(&design, &y).map_err(ctx)?;
        let (numerator, p_numerator) = fit_with_predictions(&Design::intercept_only(rows.len()), &y).map_err(ctx)?;
        times.push(CensoringFit {
            time: t,
            rows,
            denominator,
            numerator,
            p_denominator,
            p_numerator,
        });
    }
    if times.is_empty() {
        return Err(Error::NoCensoring);
    }
    if data.uncensored_at(0).len() < data.n() {
        log::warn!("subjects censored at time 0 carry no weight and are excluded");
    }
    Ok(CensoringModels {
        spec: spec.clone(),
        times,
    })
}

/// Censoring weights over `time_range`; times without censoring contribute 1.
pub fn compute_censoring_weights(
    data: &PanelDataset,
    models: &CensoringModels,
    time_range: &[usize],
) -> Result<WeightSet> {
    let range = check_range(time_range, data.n_times())?;
    let n = data.n();
    let last = *range.iter().next_back().expect("range nonempty");
    let mut values: Vec<Option<f64>> = (0..n).map(|i| (!data.is_censored(last, i)).then_some(1.0)).collect();
    for fit in models.times.iter().filter(|f| range.contains(&f.time)) {
        let pos = positions(n, &fit.rows);
        for (i, value) in values.iter_mut().enumerate() {
            let Some(v) = value else { continue };
            let r = pos[i].expect("uncensored at t implies uncensored at t-1");
            *v *= fit.p_numerator[r] / fit.p_denominator[r];
        }
    }
    Ok(WeightSet {
        family: WeightFamily::Censoring,
        values,
        time_range: range.into_iter().collect(),
        truncation: None,
    })
}

fn elementwise(a: &WeightSet, b: &WeightSet) -> Result<Vec<Option<f64>>> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!(
            "weight sets cover {} and {} subjects",
            a.len(),
            b.len()
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => Some(x * y),
            _ => None,
        })
        .collect())
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().chain(b).copied().collect::<BTreeSet<_>>().into_iter().collect()
}

/// Treatment weights times censoring weights (`W^{A,C}`).
pub fn combine_weights(wa: &WeightSet, wc: &WeightSet) -> Result<WeightSet> {
    if !matches!(wa.family, WeightFamily::Treatment | WeightFamily::Marginal) {
        return Err(Error::Domain(format!(
            "combined weights need marginal treatment weights, got `{}`",
            wa.family
        )));
    }
    if wc.family != WeightFamily::Censoring {
        return Err(Error::Domain(format!("expected censoring weights, got `{}`", wc.family)));
    }
    Ok(WeightSet {
        family: WeightFamily::Combined,
        values: elementwise(wa, wc)?,
        time_range: union(&wa.time_range, &wc.time_range),
        truncation: None,
    })
}

/// Elementwise product of arbitrary weight factors. The family is kept when
/// both factors share it and the result is marked partial otherwise.
pub fn product(a: &WeightSet, b: &WeightSet) -> Result<WeightSet> {
    Ok(WeightSet {
        family: if a.family == b.family { a.family } else { WeightFamily::Partial },
        values: elementwise(a, b)?,
        time_range: union(&a.time_range, &b.time_range),
        truncation: a.truncation.or(b.truncation),
    })
}

/// Sample quantile by linear interpolation between order statistics.
pub fn quantile_type7(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Caps weights at their empirical `percentile`. A set already truncated at
/// the same percentile is returned unchanged.
pub fn truncate_weights(w: &WeightSet, percentile: f64) -> Result<WeightSet> {
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(Error::Domain(format!("percentile {percentile} outside (0, 1]")));
    }
    if w.truncation.is_some_and(|t| t.percentile == percentile) {
        return Ok(w.clone());
    }
    let available: Vec<f64> = w.available().collect();
    if available.is_empty() {
        return Err(Error::Domain("cannot truncate an empty weight set".into()));
    }
    let cutoff = quantile_type7(&available, percentile);
    let mut out = truncate_at(w, cutoff);
    out.truncation = Some(Truncation { percentile, cutoff });
    Ok(out)
}

/// Caps weights at a fixed value.
pub fn truncate_at(w: &WeightSet, cutoff: f64) -> WeightSet {
    WeightSet {
        values: w.values.iter().map(|v| v.map(|x| x.min(cutoff))).collect(),
        truncation: Some(Truncation {
            percentile: f64::NAN,
            cutoff,
        }),
        ..w.clone()
    }
}

/// Writes `id,family,value,truncated_at`; missing weights are empty fields.
pub fn write_weights<W: Write>(ids: &[String], w: &WeightSet, sink: W) -> Result<()> {
    if ids.len() != w.len() {
        return Err(Error::Domain("id list does not match weight set".into()));
    }
    let mut out = csv::Writer::from_writer(sink);
    out.write_record(["id", "family", "value", "truncated_at"])?;
    let cutoff = w.truncation.map(|t| t.cutoff.to_string()).unwrap_or_default();
    for (id, v) in ids.iter().zip(&w.values) {
        let value = v.map(|x| x.to_string()).unwrap_or_default();
        out.write_record([id.as_str(), w.family.as_str(), value.as_str(), cutoff.as_str()])?;
    }
    out.flush().map_err(|e| Error::io("<weights>", e))?;
    Ok(())
}

/// Reads a weight CSV and aligns it with `ids`. Subjects absent from the
/// file get `None`.
pub fn read_weights<R: Read>(ids: &[String], source: R) -> Result<WeightSet> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(value_col)) = (col("id"), col("value")) else {
        return Err(Error::Schema("weight file needs `id` and `value` columns".into()));
    };
    let family_col = col("family");
    let index: std::collections::HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut values = vec![None; ids.len()];
    let mut family = None;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let line = line + 2;
        let id = record.get(id_col).unwrap_or_default();
        let &i = index
            .get(id)
            .ok_or_else(|| Error::Schema(format!("line {line}: unknown subject id `{id}`")))?;
        let raw = record.get(value_col).unwrap_or_default().trim();
        if !raw.is_empty() {
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::Schema(format!("line {line}: weight `{raw}` is not a number")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Schema(format!("line {line}: weight {v} must be finite and nonnegative")));
            }
            values[i] = Some(v);
        }
        if let Some(fc) = family_col {
            if family.is_none() {
                family = record
                    .get(fc)
                    .map(str::parse::<WeightFamily>)
                    .transpose()
                    .map_err(|e| Error::Schema(format!("line {line}: {e}")))?;
            }
        }
    }
    Ok(WeightSet {
        family: family.unwrap_or(WeightFamily::Custom),
        values,
        time_range: Vec::new(),
        truncation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantile_of_one_to_ten() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((quantile_type7(&v, 0.9) - 9.1).abs() < 1e-12);
        assert_eq!(quantile_type7(&v, 1.0), 10.0);
        assert_eq!(quantile_type7(&v, 0.0), 1.0);
    }

    #[test]
    fn truncation_clips_and_records() {
        let w = WeightSet::custom((1..=10).map(|v| Some(f64::from(v))).collect()).unwrap();
        let t = truncate_weights(&w, 0.9).unwrap();
        assert_eq!(t.values[9], Some(9.1));
        assert_eq!(t.values[8], Some(9.0));
        assert_eq!(t.truncation.unwrap().percentile, 0.9);
        assert_eq!(truncate_weights(&t, 0.9).unwrap(), t);
        assert_eq!(truncate_weights(&w, 1.0).unwrap().values, w.values);
        assert!(truncate_weights(&w, 0.0).is_err());
        assert!(truncate_weights(&w, 1.5).is_err());
    }

    #[test]
    fn combine_multiplies_and_checks_families() {
        let mut wa = WeightSet::custom(vec![Some(1.2), None]).unwrap();
        wa.family = WeightFamily::Treatment;
        let mut wc = WeightSet::custom(vec![Some(0.9), Some(1.0)]).unwrap();
        wc.family = WeightFamily::Censoring;
        let c = combine_weights(&wa, &wc).unwrap();
        assert_eq!(c.family, WeightFamily::Combined);
        assert!((c.values[0].unwrap() - 1.08).abs() < 1e-12);
        assert_eq!(c.values[1], None);
        assert!(combine_weights(&wc, &wa).is_err());
        wc.values.push(Some(1.0));
        assert!(matches!(combine_weights(&wa, &wc), Err(Error::Domain(_))));
    }

    #[test]
    fn weight_csv_round_trip() {
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut w = WeightSet::custom(vec![Some(0.25), None, Some(3.5)]).unwrap();
        w.family = WeightFamily::Marginal;
        let mut buf = Vec::new();
        write_weights(&ids, &w, &mut buf).unwrap();
        let back = read_weights(&ids, buf.as_slice()).unwrap();
        assert_eq!(back.values, w.values);
        assert_eq!(back.family, WeightFamily::Marginal);
    }
}
