//! Longitudinal panel data: subjects observed at time-points `0..=T` with
//! covariates, a binary treatment, a monotone censoring indicator and a
//! single end-of-study binary outcome.
//!
//! The on-disk layout is a long CSV with one row per (subject, time):
//!
//! ```text
//! id,time,censored,treatment,<cov1>,<cov2>,...
//! ```
//!
//! plus an optional companion outcome file `id,outcome`. An empty field
//! marks a missing value and is only legal on rows with `censored=1`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Continuous,
    Binary,
    /// Ordered categories. Values on disk are the scores `1..=levels.len()`.
    Ordinal { levels: Vec<String> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Enter models as the integer score `1..=K`.
    #[default]
    NumericScore,
    /// Expand into `K-1` indicator columns against the first level.
    Dummy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub kind: CovariateKind,
    #[serde(default)]
    pub encoding: Encoding,
}

impl CovariateSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: CovariateKind::Continuous,
            encoding: Encoding::NumericScore,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: CovariateKind::Binary,
            encoding: Encoding::NumericScore,
        }
    }

    pub fn ordinal<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: CovariateKind::Ordinal {
                levels: levels.into_iter().map(Into::into).collect(),
            },
            encoding: Encoding::NumericScore,
        }
    }

    pub fn with_encoding(mut self, encoding: Encoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("covariate with empty name".into()));
        }
        if matches!(self.name.as_str(), "id" | "time" | "censored" | "treatment") {
            return Err(Error::Schema(format!("covariate name `{}` is reserved", self.name)));
        }
        if let CovariateKind::Ordinal { levels } = &self.kind {
            if levels.len() < 2 {
                return Err(Error::Schema(format!(
                    "ordinal covariate `{}` needs at least 2 levels",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn n_levels(&self) -> Option<usize> {
        match &self.kind {
            CovariateKind::Ordinal { levels } => Some(levels.len()),
            _ => None,
        }
    }

    /// Number of model columns this covariate expands into.
    pub fn encoded_width(&self) -> usize {
        match (&self.kind, self.encoding) {
            (CovariateKind::Ordinal { levels }, Encoding::Dummy) => levels.len() - 1,
            _ => 1,
        }
    }

    /// Score written to disk for the level at `index` (0-based).
    pub fn encode_level(&self, index: usize) -> Option<f64> {
        let k = self.n_levels()?;
        (index < k).then(|| (index + 1) as f64)
    }

    /// Inverse of [`encode_level`](Self::encode_level).
    pub fn decode_level(&self, score: f64) -> Option<usize> {
        let k = self.n_levels()?;
        if score.fract() != 0.0 || score < 1.0 || score > k as f64 {
            return None;
        }
        Some(score as usize - 1)
    }

    fn check_value(&self, value: f64) -> std::result::Result<(), String> {
        if !value.is_finite() {
            return Err(format!("non-finite value for `{}`", self.name));
        }
        match &self.kind {
            CovariateKind::Continuous => Ok(()),
            CovariateKind::Binary if value == 0.0 || value == 1.0 => Ok(()),
            CovariateKind::Binary => Err(format!("binary covariate `{}` has value {value}", self.name)),
            CovariateKind::Ordinal { levels } => match self.decode_level(value) {
                Some(_) => Ok(()),
                None => Err(format!(
                    "ordinal covariate `{}` has value {value}, expected an integer score in 1..={}",
                    self.name,
                    levels.len()
                )),
            },
        }
    }

    fn scale(&self) -> Scale {
        match self.kind {
            CovariateKind::Continuous => Scale::Continuous,
            _ => Scale::Discrete,
        }
    }
}

/// Whether a model column takes a continuum of values or a few discrete ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Continuous,
    Discrete,
}

/// A named numeric column ready for modelling.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub scale: Scale,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, scale: Scale, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            scale,
            values,
        }
    }

    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self::new(name, Scale::Continuous, values)
    }

    pub fn discrete(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self::new(name, Scale::Discrete, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Observations at a single time-point. Cells of censored subjects are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlice {
    pub censored: Vec<bool>,
    pub treatment: Vec<Option<u8>>,
    /// Indexed `[covariate][subject]`.
    pub covariates: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    ids: Vec<String>,
    specs: Vec<CovariateSpec>,
    slices: Vec<TimeSlice>,
    outcome: Option<Vec<Option<u8>>>,
}

impl PanelDataset {
    /// Assembles a dataset and checks every structural invariant.
    ///
    /// Values recorded on censored cells are dropped, so the missingness
    /// pattern always equals the censoring pattern afterwards.
    pub fn new(
        ids: Vec<String>,
        specs: Vec<CovariateSpec>,
        mut slices: Vec<TimeSlice>,
        outcome: Option<Vec<Option<u8>>>,
    ) -> Result<Self> {
        for spec in &specs {
            spec.validate()?;
        }
        let n = ids.len();
        if slices.is_empty() {
            return Err(Error::Validation("panel has no time-points".into()));
        }
        for (t, slice) in slices.iter_mut().enumerate() {
            if slice.censored.len() != n || slice.treatment.len() != n {
                return Err(Error::Validation(format!("time {t}: row count does not match subject count")));
            }
            if slice.covariates.len() != specs.len() {
                return Err(Error::Validation(format!("time {t}: covariate count does not match schema")));
            }
            for (i, censored) in slice.censored.iter().enumerate() {
                if *censored {
                    slice.treatment[i] = None;
                    for column in &mut slice.covariates {
                        column[i] = None;
                    }
                    continue;
                }
                match slice.treatment[i] {
                    Some(0 | 1) => {}
                    Some(a) => {
                        return Err(Error::Schema(format!(
                            "subject {}: treatment at time {t} is {a}, expected 0 or 1",
                            ids[i]
                        )))
                    }
                    None => {
                        return Err(Error::Validation(format!(
                            "subject {}: missing treatment at uncensored time {t}",
                            ids[i]
                        )))
                    }
                }
                for (spec, column) in specs.iter().zip(&slice.covariates) {
                    if column.len() != n {
                        return Err(Error::Validation(format!(
                            "time {t}: column `{}` has wrong length",
                            spec.name
                        )));
                    }
                    match column[i] {
                        Some(v) => spec
                            .check_value(v)
                            .map_err(|e| Error::Schema(format!("subject {}, time {t}: {e}", ids[i])))?,
                        None => {
                            return Err(Error::Validation(format!(
                                "subject {}: missing `{}` at uncensored time {t}",
                                ids[i], spec.name
                            )))
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for t in 1..slices.len() {
                if slices[t - 1].censored[i] && !slices[t].censored[i] {
                    return Err(Error::Validation(format!(
                        "subject {}: non-monotone censoring (censored at time {} but not at time {t})",
                        ids[i],
                        t - 1
                    )));
                }
            }
        }
        let last = slices.len() - 1;
        if let Some(outcome) = &outcome {
            if outcome.len() != n {
                return Err(Error::Validation("outcome length does not match subject count".into()));
            }
            for (i, y) in outcome.iter().enumerate() {
                match (slices[last].censored[i], y) {
                    (false, Some(0 | 1)) | (true, None) => {}
                    (false, None) => {
                        return Err(Error::Validation(format!(
                            "subject {}: missing outcome for a subject uncensored at the last time-point",
                            ids[i]
                        )))
                    }
                    (true, Some(_)) => {
                        return Err(Error::Validation(format!(
                            "subject {}: outcome recorded for a censored subject",
                            ids[i]
                        )))
                    }
                    (false, Some(y)) => {
                        return Err(Error::Schema(format!("subject {}: outcome {y} is not binary", ids[i])))
                    }
                }
            }
        }
        let mut seen = HashMap::with_capacity(n);
        for id in &ids {
            if seen.insert(id.as_str(), ()).is_some() {
                return Err(Error::Validation(format!("duplicate subject id {id}")));
            }
        }
        Ok(Self {
            ids,
            specs,
            slices,
            outcome,
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Number of treatment time-points, `T + 1`.
    pub fn n_times(&self) -> usize {
        self.slices.len()
    }

    pub fn last_time(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn specs(&self) -> &[CovariateSpec] {
        &self.specs
    }

    pub fn slice(&self, t: usize) -> &TimeSlice {
        &self.slices[t]
    }

    pub fn outcome(&self) -> Option<&[Option<u8>]> {
        self.outcome.as_deref()
    }

    pub fn is_censored(&self, t: usize, subject: usize) -> bool {
        self.slices[t].censored[subject]
    }

    pub fn has_censoring(&self) -> bool {
        self.slices.iter().any(|s| s.censored.iter().any(|&c| c))
    }

    /// Subjects with `C_t = 0`, i.e. uncensored through `t`.
    pub fn uncensored_at(&self, t: usize) -> Vec<usize> {
        let slice = &self.slices[t];
        (0..self.n()).filter(|&i| !slice.censored[i]).collect()
    }

    pub fn censored_fraction(&self, t: usize) -> f64 {
        let c = self.slices[t].censored.iter().filter(|&&c| c).count();
        c as f64 / self.n() as f64
    }

    /// Encoded covariate columns measured at `time`, restricted to `rows`.
    /// Column names carry the time as a suffix, e.g. `L_0`.
    pub fn encoded_columns(&self, time: usize, rows: &[usize]) -> Vec<Column> {
        let slice = &self.slices[time];
        let mut out = Vec::new();
        for (spec, raw) in self.specs.iter().zip(&slice.covariates) {
            let value = |i: usize| raw[i].expect("covariate present on uncensored rows");
            match (&spec.kind, spec.encoding) {
                (CovariateKind::Ordinal { levels }, Encoding::Dummy) => {
                    for (level, label) in levels.iter().enumerate().skip(1) {
                        let score = (level + 1) as f64;
                        out.push(Column::discrete(
                            format!("{}_{}[{}]", spec.name, time, label),
                            rows.iter().map(|&i| f64::from(u8::from(value(i) == score))).collect(),
                        ));
                    }
                }
                _ => out.push(Column::new(
                    format!("{}_{}", spec.name, time),
                    spec.scale(),
                    rows.iter().map(|&i| value(i)).collect(),
                )),
            }
        }
        out
    }

    /// Treatment `A_time` as a discrete column over `rows`.
    pub fn treatment_column(&self, time: usize, rows: &[usize]) -> Column {
        let slice = &self.slices[time];
        Column::discrete(
            format!("A_{time}"),
            rows.iter()
                .map(|&i| f64::from(slice.treatment[i].expect("treatment present on uncensored rows")))
                .collect(),
        )
    }

    /// Model columns for the full history up to `t`: covariates at every
    /// time `0..=t` followed by treatments `0..t`.
    pub fn history_columns(&self, t: usize, rows: &[usize], covariates_through: usize) -> Vec<Column> {
        let mut cols = Vec::new();
        for s in 0..=covariates_through {
            cols.extend(self.encoded_columns(s, rows));
        }
        for s in 0..t {
            cols.push(self.treatment_column(s, rows));
        }
        cols
    }

    /// Covariates `X_{t-k}` of the subjects uncensored at `t`, grouped by `A_t`.
    pub fn covariate_block(&self, t: usize, k: usize) -> Result<CovariateBlock> {
        if t > self.last_time() {
            return Err(Error::Domain(format!(
                "time {t} outside panel with last time-point {}",
                self.last_time()
            )));
        }
        if k > t {
            return Err(Error::Domain(format!("lag {k} exceeds target time {t}")));
        }
        let rows = self.uncensored_at(t);
        let group = self.slices[t]
            .treatment
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.slices[t].censored[*i])
            .map(|(_, a)| *a == Some(1))
            .collect();
        Ok(CovariateBlock {
            target_time: t,
            lag: k,
            columns: self.encoded_columns(t - k, &rows),
            group,
            subjects: rows,
        })
    }
}

/// Covariates of one (target time, lag) comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateBlock {
    pub target_time: usize,
    pub lag: usize,
    pub columns: Vec<Column>,
    /// `true` where `A_t = 1`.
    pub group: Vec<bool>,
    /// Subject index of each row in the originating dataset.
    pub subjects: Vec<usize>,
}

impl CovariateBlock {
    /// Builds a block directly from columns, e.g. for synthetic checks.
    pub fn from_columns(columns: Vec<Column>, group: Vec<bool>) -> Result<Self> {
        if columns.iter().any(|c| c.len() != group.len()) {
            return Err(Error::Domain("column lengths differ from group length".into()));
        }
        let subjects = (0..group.len()).collect();
        Ok(Self {
            target_time: 0,
            lag: 0,
            columns,
            group,
            subjects,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.group.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Keeps the rows whose mask entry is `true`.
    pub fn select(&self, keep: &[bool]) -> Self {
        let pick = |v: &[f64]| v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect();
        Self {
            target_time: self.target_time,
            lag: self.lag,
            columns: self
                .columns
                .iter()
                .map(|c| Column::new(c.name.clone(), c.scale, pick(&c.values)))
                .collect(),
            group: self.group.iter().zip(keep).filter(|(_, k)| **k).map(|(g, _)| *g).collect(),
            subjects: self.subjects.iter().zip(keep).filter(|(_, k)| **k).map(|(s, _)| *s).collect(),
        }
    }
}

fn parse_binary(field: &str, what: &str, line: u64) -> Result<Option<u8>> {
    match field.trim() {
        "" => Ok(None),
        "0" => Ok(Some(0)),
        "1" => Ok(Some(1)),
        other => match other.parse::<f64>() {
            Ok(v) if v == 0.0 => Ok(Some(0)),
            Ok(v) if v == 1.0 => Ok(Some(1)),
            _ => Err(Error::Schema(format!("line {line}: {what} must be 0 or 1, got `{other}`"))),
        },
    }
}

fn parse_number(field: &str, what: &str, line: u64) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Schema(format!("line {line}: `{field}` is not a number for {what}")))
}

struct SubjectRows {
    rows: HashMap<usize, (bool, Option<u8>, Vec<Option<f64>>)>,
}

/// Reads a long-format panel (and optionally its outcome file) from readers.
pub fn read_panel<R: Read, O: Read>(panel: R, outcome: Option<O>, schema: &[CovariateSpec]) -> Result<PanelDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(panel);
    let headers = reader.headers()?.clone();
    let fixed = ["id", "time", "censored", "treatment"];
    for (pos, name) in fixed.iter().enumerate() {
        if headers.get(pos) != Some(name) {
            return Err(Error::Schema(format!(
                "header column {} must be `{name}`, found `{}`",
                pos + 1,
                headers.get(pos).unwrap_or("")
            )));
        }
    }
    let mut cov_index = Vec::with_capacity(schema.len());
    for name in headers.iter().skip(fixed.len()) {
        match schema.iter().position(|s| s.name == name) {
            Some(j) => cov_index.push(j),
            None => return Err(Error::Schema(format!("unknown column `{name}`"))),
        }
    }
    for spec in schema {
        spec.validate()?;
        if !headers.iter().any(|h| h == spec.name) {
            return Err(Error::Schema(format!("schema column `{}` missing from header", spec.name)));
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut subjects: Vec<SubjectRows> = Vec::new();
    let mut max_time = 0usize;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(Error::Schema(format!("line {line}: expected {} fields", headers.len())));
        }
        let id = record[0].to_string();
        let time: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::Schema(format!("line {line}: time `{}` is not a non-negative integer", &record[1])))?;
        let censored = parse_binary(&record[2], "censored", line)?
            .ok_or_else(|| Error::Schema(format!("line {line}: censored indicator is empty")))?
            == 1;
        let treatment = parse_binary(&record[3], "treatment", line)?;
        let mut values = vec![None; schema.len()];
        for (field, &j) in record.iter().skip(fixed.len()).zip(&cov_index) {
            values[j] = parse_number(field, &schema[j].name, line)?;
        }
        if !censored {
            if treatment.is_none() {
                return Err(Error::Schema(format!("line {line}: empty treatment on an uncensored row")));
            }
            if let Some(j) = values.iter().position(Option::is_none) {
                return Err(Error::Schema(format!(
                    "line {line}: empty `{}` on an uncensored row",
                    schema[j].name
                )));
            }
            for (spec, v) in schema.iter().zip(&values) {
                spec.check_value(v.expect("checked above"))
                    .map_err(|e| Error::Schema(format!("line {line}: {e}")))?;
            }
        }
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            subjects.push(SubjectRows { rows: HashMap::new() });
            subjects.len() - 1
        });
        if subjects[slot].rows.insert(time, (censored, treatment, values)).is_some() {
            return Err(Error::Validation(format!("line {line}: duplicate row for subject {id} at time {time}")));
        }
        max_time = max_time.max(time);
    }
    if order.is_empty() {
        return Err(Error::Validation("panel has no rows".into()));
    }

    let n = order.len();
    let n_times = max_time + 1;
    let mut slices: Vec<TimeSlice> = (0..n_times)
        .map(|_| TimeSlice {
            censored: vec![false; n],
            treatment: vec![None; n],
            covariates: vec![vec![None; n]; schema.len()],
        })
        .collect();
    for (i, subject) in subjects.into_iter().enumerate() {
        for t in 0..n_times {
            let Some((censored, treatment, values)) = subject.rows.get(&t) else {
                return Err(Error::Validation(format!("subject {}: no row for time {t}", order[i])));
            };
            slices[t].censored[i] = *censored;
            slices[t].treatment[i] = *treatment;
            for (j, v) in values.iter().enumerate() {
                slices[t].covariates[j][i] = *v;
            }
        }
    }

    let outcome = match outcome {
        Some(source) => Some(read_outcome(source, &index, n)?),
        None => None,
    };
    PanelDataset::new(order, schema.to_vec(), slices, outcome)
}

fn read_outcome<O: Read>(source: O, index: &HashMap<String, usize>, n: usize) -> Result<Vec<Option<u8>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "outcome" {
        return Err(Error::Schema("outcome header must be `id,outcome`".into()));
    }
    let mut outcome = vec![None; n];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let Some(&i) = index.get(&record[0]) else {
            return Err(Error::Validation(format!("line {line}: outcome for unknown subject {}", &record[0])));
        };
        outcome[i] = parse_binary(&record[1], "outcome", line)?;
    }
    Ok(outcome)
}

/// Reads a panel CSV and, when given, its companion outcome CSV.
pub fn load_panel(path: &Path, outcome: Option<&Path>, schema: &[CovariateSpec]) -> Result<PanelDataset> {
    let open = |p: &Path| std::fs::File::open(p).map_err(|e| Error::io(p, e));
    let panel = open(path)?;
    let outcome = outcome.map(open).transpose()?;
    read_panel(panel, outcome, schema).map_err(|e| e.context(format!("loading {}", path.display())))
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the long-format panel. Floats use the shortest representation
/// that parses back to the identical value.
pub fn write_panel_to<W: Write>(data: &PanelDataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["id".to_string(), "time".into(), "censored".into(), "treatment".into()];
    header.extend(data.specs.iter().map(|s| s.name.clone()));
    w.write_record(&header)?;
    for i in 0..data.n() {
        for (t, slice) in data.slices.iter().enumerate() {
            let mut row = vec![
                data.ids[i].clone(),
                t.to_string(),
                u8::from(slice.censored[i]).to_string(),
                fmt_opt(slice.treatment[i]),
            ];
            row.extend(slice.covariates.iter().map(|c| fmt_opt(c[i])));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<panel writer>", e))?;
    Ok(())
}

pub fn write_outcome_to<W: Write>(data: &PanelDataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["id", "outcome"])?;
    if let Some(outcome) = &data.outcome {
        for (id, y) in data.ids.iter().zip(outcome) {
            w.write_record([id.clone(), fmt_opt(*y)])?;
        }
    }
    w.flush().map_err(|e| Error::io("<outcome writer>", e))?;
    Ok(())
}

pub fn write_panel(data: &PanelDataset, path: &Path, outcome: Option<&Path>) -> Result<()> {
    let create = |p: &Path| std::fs::File::create(p).map_err(|e| Error::io(p, e));
    write_panel_to(data, std::io::BufWriter::new(create(path)?))?;
    if let Some(p) = outcome {
        write_outcome_to(data, std::io::BufWriter::new(create(p)?))?;
    }
    Ok(())
}

/// Guesses a schema from a panel file: columns whose observed values are all
/// 0/1 become binary, everything else continuous. Ordinal covariates need an
/// explicit schema.
pub fn infer_schema(path: &Path) -> Result<Vec<CovariateSpec>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let names: Vec<String> = headers.iter().skip(4).map(str::to_string).collect();
    let mut binary = vec![true; names.len()];
    for record in reader.records() {
        let record = record?;
        for (j, field) in record.iter().skip(4).enumerate() {
            if !field.is_empty() && !matches!(field, "0" | "1") {
                binary[j] = false;
            }
        }
    }
    Ok(names
        .into_iter()
        .zip(binary)
        .map(|(name, b)| {
            if b {
                CovariateSpec::binary(name)
            } else {
                CovariateSpec::continuous(name)
            }
        })
        .collect())
}
