//! Design matrices, weighted logistic regression by iteratively reweighted
//! least squares, and ordinary least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Column;

pub const INTERCEPT: &str = "(intercept)";

/// Probabilities are kept inside `[PROB_FLOOR, 1 - PROB_FLOOR]` before any division.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    /// Main effects only.
    #[default]
    Simple,
    /// Main effects plus every pairwise product.
    Complex,
}

impl Complexity {
    pub fn as_str(self) -> &'static str {
        match self {
            Complexity::Simple => "simple",
            Complexity::Complex => "complex",
        }
    }
}

impl std::str::FromStr for Complexity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Complexity::Simple),
            "complex" => Ok(Complexity::Complex),
            other => Err(Error::Domain(format!("unknown design complexity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    /// Main-effect columns to use; `None` takes every supplied column.
    pub terms: Option<Vec<String>>,
    pub complexity: Complexity,
}

impl DesignSpec {
    pub fn simple() -> Self {
        Self {
            terms: None,
            complexity: Complexity::Simple,
        }
    }

    pub fn complex() -> Self {
        Self {
            terms: None,
            complexity: Complexity::Complex,
        }
    }

    pub fn with_complexity(complexity: Complexity) -> Self {
        Self { terms: None, complexity }
    }

    pub fn with_terms(mut self, terms: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.terms = Some(terms.into_iter().map(Into::into).collect());
        self
    }
}

/// A column-major model matrix with an intercept in column 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    matrix: DMatrix<f64>,
    names: Vec<String>,
    dropped: Vec<String>,
}

impl Design {
    /// Prepends an intercept to the columns as given, without any filtering.
    pub fn with_intercept(columns: &[(&str, &[f64])]) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if n == 0 {
            return Err(Error::Domain("empty design".into()));
        }
        if columns.iter().any(|c| c.1.len() != n) {
            return Err(Error::Domain("design columns differ in length".into()));
        }
        let matrix = DMatrix::from_fn(n, columns.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1].1[i] });
        let mut names = vec![INTERCEPT.to_string()];
        names.extend(columns.iter().map(|c| c.0.to_string()));
        Ok(Self {
            matrix,
            names,
            dropped: Vec::new(),
        })
    }

    /// Intercept-only design with `n` rows.
    pub fn intercept_only(n: usize) -> Self {
        Self {
            matrix: DMatrix::from_element(n, 1, 1.0),
            names: vec![INTERCEPT.to_string()],
            dropped: Vec::new(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }
}

const DUPLICATE_CORRELATION: f64 = 1.0 - 1e-12;

/// Builds an intercept-first design from named columns. Constant columns and
/// columns perfectly correlated with an earlier one are dropped and recorded.
pub fn build_design(columns: &[Column], spec: &DesignSpec) -> Result<Design> {
    let mains: Vec<&Column> = match &spec.terms {
        None => columns.iter().collect(),
        Some(terms) => terms
            .iter()
            .map(|t| {
                columns
                    .iter()
                    .find(|c| &c.name == t)
                    .ok_or_else(|| Error::Domain(format!("design term `{t}` not present")))
            })
            .collect::<Result<_>>()?,
    };
    let n = columns.first().map_or(0, Column::len);
    if n == 0 {
        return Err(Error::Domain("cannot build a design from an empty block".into()));
    }

    let mut candidates: Vec<(String, Vec<f64>)> =
        mains.iter().map(|c| (c.name.clone(), c.values.clone())).collect();
    if spec.complexity == Complexity::Complex {
        for a in 0..mains.len() {
            for b in a + 1..mains.len() {
                let values = mains[a].values.iter().zip(&mains[b].values).map(|(x, y)| x * y).collect();
                candidates.push((format!("{}:{}", mains[a].name, mains[b].name), values));
            }
        }
    }

    let mut kept: Vec<(String, Vec<f64>)> = Vec::new();
    let mut kept_unit: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for (name, values) in candidates {
        let mean = values.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || values.iter().all(|&v| v == values[0]) {
            dropped.push(name);
            continue;
        }
        let unit: Vec<f64> = centered.iter().map(|v| v / norm).collect();
        let duplicate = kept_unit
            .iter()
            .any(|u| u.iter().zip(&unit).map(|(a, b)| a * b).sum::<f64>().abs() > DUPLICATE_CORRELATION);
        if duplicate {
            dropped.push(name);
        } else {
            kept_unit.push(unit);
            kept.push((name, values));
        }
    }

    let matrix = DMatrix::from_fn(n, kept.len() + 1, |i, j| if j == 0 { 1.0 } else { kept[j - 1].1[i] });
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(kept.into_iter().map(|(name, _)| name));
    Ok(Design {
        matrix,
        names,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    /// Intercept first, aligned with `names`.
    pub coefficients: Vec<f64>,
    pub names: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
    pub dropped_columns: Vec<String>,
    /// Set when divergence forced the small ridge penalty.
    pub penalized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Standardized coefficient magnitude treated as divergence.
    pub divergence_bound: f64,
    pub ridge: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
            divergence_bound: 30.0,
            ridge: 1e-6,
        }
    }
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Column centering/scaling used internally to keep the normal equations well
/// conditioned. Coefficients are mapped back afterwards.
struct Standardizer {
    center: Vec<f64>,
    scale: Vec<f64>,
    has_intercept: bool,
}

impl Standardizer {
    fn new(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let has_intercept = x.ncols() > 0 && x.column(0).iter().all(|&v| v == 1.0);
        let mut center = vec![0.0; x.ncols()];
        let mut scale = vec![1.0; x.ncols()];
        for j in usize::from(has_intercept)..x.ncols() {
            let col = x.column(j);
            let mean = if has_intercept { col.sum() / n } else { 0.0 };
            let ss = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            center[j] = mean;
            scale[j] = if ss > 0.0 { ss.sqrt() } else { 1.0 };
        }
        Self {
            center,
            scale,
            has_intercept,
        }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for j in 0..z.ncols() {
            if self.has_intercept && j == 0 {
                continue;
            }
            let (c, s) = (self.center[j], self.scale[j]);
            z.column_mut(j).apply(|v| *v = (*v - c) / s);
        }
        z
    }

    fn restore(&self, gamma: &DVector<f64>) -> Vec<f64> {
        let mut beta: Vec<f64> = gamma.iter().zip(&self.scale).map(|(g, s)| g / s).collect();
        if self.has_intercept {
            let shift: f64 = (1..beta.len()).map(|j| beta[j] * self.center[j]).sum();
            beta[0] -= shift;
        }
        beta
    }
}

fn bernoulli_deviance(y: &[f64], w: &[f64], mu: &[f64]) -> f64 {
    let term = |a: f64, b: f64| if a > 0.0 { a * (a / b).ln() } else { 0.0 };
    2.0 * y
        .iter()
        .zip(w)
        .zip(mu)
        .map(|((&y, &w), &m)| w * (term(y, m) + term(1.0 - y, 1.0 - m)))
        .sum::<f64>()
}

struct IrlsRun {
    gamma: DVector<f64>,
    converged: bool,
    diverged: bool,
    iterations: usize,
    deviance: f64,
}

fn solve_spd(h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    match h.clone().cholesky() {
        Some(chol) => chol.solve(g),
        None => h.svd(true, true).solve(g, 1e-12).unwrap_or_else(|_| DVector::zeros(g.len())),
    }
}

fn irls(z: &DMatrix<f64>, y: &[f64], w: &[f64], has_intercept: bool, ridge: f64, opts: &IrlsOptions) -> IrlsRun {
    let (n, p) = z.shape();
    let total_w: f64 = w.iter().sum();
    let ybar = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / total_w;
    let mut gamma = DVector::zeros(p);
    if has_intercept {
        gamma[0] = logit(clamp_prob(ybar));
    }
    let penalty = |g: &DVector<f64>| -> f64 {
        ridge * (usize::from(has_intercept)..p).map(|j| g[j] * g[j]).sum::<f64>()
    };
    let eval = |g: &DVector<f64>| -> Vec<f64> { (z * g).iter().map(|&e| expit(e)).collect() };

    let mut mu = eval(&gamma);
    let mut objective = bernoulli_deviance(y, w, &mu) + penalty(&gamma);
    let mut scaled = DMatrix::zeros(n, p);
    for iter in 1..=opts.max_iterations {
        let resid = DVector::from_iterator(n, (0..n).map(|i| w[i] * (y[i] - mu[i])));
        let mut grad = z.tr_mul(&resid);
        for i in 0..n {
            let v = (w[i] * mu[i] * (1.0 - mu[i])).sqrt();
            for j in 0..p {
                scaled[(i, j)] = z[(i, j)] * v;
            }
        }
        let mut hess = scaled.tr_mul(&scaled);
        for j in usize::from(has_intercept)..p {
            hess[(j, j)] += ridge;
            grad[j] -= ridge * gamma[j];
        }
        let step = solve_spd(hess, &grad);

        let mut factor = 1.0;
        let mut candidate = &gamma + &step;
        let mut cand_mu = eval(&candidate);
        let mut cand_obj = bernoulli_deviance(y, w, &cand_mu) + penalty(&candidate);
        let mut halvings = 0;
        while !(cand_obj <= objective * (1.0 + 1e-12) + 1e-12) && halvings < 30 {
            factor *= 0.5;
            candidate = &gamma + &step * factor;
            cand_mu = eval(&candidate);
            cand_obj = bernoulli_deviance(y, w, &cand_mu) + penalty(&candidate);
            halvings += 1;
        }
        let change = (&step * factor).amax();
        gamma = candidate;
        mu = cand_mu;
        objective = cand_obj;

        let diverged = (usize::from(has_intercept)..p).any(|j| gamma[j].abs() > opts.divergence_bound);
        if diverged {
            return IrlsRun {
                gamma,
                converged: false,
                diverged: true,
                iterations: iter,
                deviance: objective,
            };
        }
        if change <= opts.tolerance * gamma.amax().max(1.0) {
            return IrlsRun {
                gamma,
                converged: true,
                diverged: false,
                iterations: iter,
                deviance: bernoulli_deviance(y, w, &mu),
            };
        }
    }
    IrlsRun {
        deviance: bernoulli_deviance(y, w, &mu),
        gamma,
        converged: false,
        diverged: false,
        iterations: opts.max_iterations,
    }
}

/// Maximizes the weighted Bernoulli log-likelihood of `y` on `design`.
pub fn fit_weighted_logistic(design: &Design, y: &[f64], w: &[f64]) -> Result<GlmFit> {
    fit_weighted_logistic_with(design, y, w, &IrlsOptions::default())
}

pub fn fit_weighted_logistic_with(design: &Design, y: &[f64], w: &[f64], opts: &IrlsOptions) -> Result<GlmFit> {
    let n = design.n_rows();
    if y.len() != n || w.len() != n {
        return Err(Error::Domain(format!(
            "design has {n} rows but response has {} and weights {}",
            y.len(),
            w.len()
        )));
    }
    if let Some(bad) = w.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Domain(format!("invalid weight {bad}")));
    }
    if let Some(bad) = y.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::Domain(format!("response value {bad} outside [0, 1]")));
    }
    let pos: f64 = y.iter().zip(w).map(|(y, w)| y * w).sum();
    let neg: f64 = y.iter().zip(w).map(|(y, w)| (1.0 - y) * w).sum();
    if pos <= 0.0 || neg <= 0.0 {
        return Err(Error::DegenerateResponse(format!(
            "need positive weight on both outcomes (weighted successes {pos}, failures {neg})"
        )));
    }

    let standardizer = Standardizer::new(design.matrix());
    let z = standardizer.apply(design.matrix());
    let mut run = irls(&z, y, w, standardizer.has_intercept, 0.0, opts);
    let mut penalized = false;
    if run.diverged {
        log::warn!("logistic fit diverged (quasi-separation); refitting with ridge penalty {}", opts.ridge);
        penalized = true;
        run = irls(&z, y, w, standardizer.has_intercept, opts.ridge, opts);
    }
    if !run.converged {
        log::warn!("logistic fit did not converge after {} iterations", run.iterations);
    }
    Ok(GlmFit {
        coefficients: standardizer.restore(&run.gamma),
        names: design.names().to_vec(),
        converged: run.converged,
        iterations: run.iterations,
        deviance: run.deviance,
        dropped_columns: design.dropped().to_vec(),
        penalized,
    })
}

/// `expit(X b)` clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub fn predict_proba(fit: &GlmFit, design: &Design) -> Result<Vec<f64>> {
    if design.n_cols() != fit.coefficients.len() {
        return Err(Error::Domain(format!(
            "design has {} columns but fit has {} coefficients",
            design.n_cols(),
            fit.coefficients.len()
        )));
    }
    let beta = DVector::from_column_slice(&fit.coefficients);
    let eta = design.matrix() * beta;
    let mut clamped = 0usize;
    let probs = eta
        .iter()
        .map(|&e| {
            let p = expit(e);
            if !(PROB_FLOOR..=1.0 - PROB_FLOOR).contains(&p) {
                clamped += 1;
            }
            clamp_prob(p)
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} predicted probabilities clamped to [{PROB_FLOOR}, 1 - {PROB_FLOOR}] (near positivity violation)");
    }
    Ok(probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub names: Vec<String>,
    pub r_squared: f64,
    pub intercept: f64,
}

const OLS_RANK_TOLERANCE: f64 = 1e-10;

/// Least squares by Householder QR on unit-norm scaled columns.
pub fn fit_ols(design: &Design, y: &[f64]) -> Result<OlsFit> {
    let (n, p) = design.matrix().shape();
    if y.len() != n {
        return Err(Error::Domain(format!("design has {n} rows but response has {}", y.len())));
    }
    if n < p {
        return Err(Error::Domain(format!("{n} rows cannot identify {p} coefficients")));
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    if sst == 0.0 {
        return Err(Error::ConstantResponse);
    }

    let mut x = design.matrix().clone();
    let norms: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    for (j, &s) in norms.iter().enumerate() {
        if s > 0.0 {
            x.column_mut(j).scale_mut(1.0 / s);
        }
    }
    let qr = x.qr();
    let r = qr.r();
    let rmax = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let collinear: Vec<String> = (0..p)
        .filter(|&j| norms[j] == 0.0 || r[(j, j)].abs() <= OLS_RANK_TOLERANCE * rmax)
        .map(|j| design.names()[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }
    let qty = qr.q().tr_mul(&DVector::from_column_slice(y));
    let scaled = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(design.names().to_vec()))?;
    let coefficients: Vec<f64> = scaled.iter().zip(&norms).map(|(b, s)| b / s).collect();

    let fitted = design.matrix() * DVector::from_column_slice(&coefficients);
    let sse: f64 = fitted.iter().zip(y).map(|(f, y)| (y - f) * (y - f)).sum();
    let intercept = if design.names().first().map(String::as_str) == Some(INTERCEPT) {
        coefficients[0]
    } else {
        0.0
    };
    Ok(OlsFit {
        coefficients,
        names: design.names().to_vec(),
        r_squared: (1.0 - sse / sst).clamp(0.0, 1.0),
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Column;

    fn cols(k: usize, n: usize) -> Vec<Column> {
        (0..k)
            .map(|j| Column::continuous(format!("x{j}"), (0..n).map(|i| ((i * (j + 2)) as f64 * 0.37).sin()).collect()))
            .collect()
    }

    #[test]
    fn design_column_counts() {
        let c = cols(6, 40);
        assert_eq!(build_design(&c, &DesignSpec::simple()).unwrap().n_cols(), 7);
        assert_eq!(build_design(&c, &DesignSpec::complex()).unwrap().n_cols(), 1 + 6 + 15);
    }

    #[test]
    fn constant_and_duplicate_columns_are_dropped() {
        let mut c = cols(2, 30);
        c.push(Column::continuous("const", vec![3.0; 30]));
        c.push(Column::continuous("twice", c[0].values.iter().map(|v| 2.0 * v + 1.0).collect()));
        let d = build_design(&c, &DesignSpec::simple()).unwrap();
        assert_eq!(d.names(), [INTERCEPT, "x0", "x1"]);
        assert_eq!(d.dropped(), ["const", "twice"]);
    }

    #[test]
    fn empty_block_is_a_domain_error() {
        let c = vec![Column::continuous("x", vec![])];
        assert!(matches!(build_design(&c, &DesignSpec::simple()), Err(Error::Domain(_))));
        assert!(matches!(build_design(&[], &DesignSpec::simple()), Err(Error::Domain(_))));
    }

    #[test]
    fn intercept_only_recovers_logit_of_weighted_mean() {
        let y = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let w = [1.0, 1.0, 1.0, 1.0, 0.0, 1.0];
        let fit = fit_weighted_logistic(&Design::intercept_only(6), &y, &w).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - logit(0.2)).abs() < 1e-10);
        let p = predict_proba(&fit, &Design::intercept_only(2)).unwrap();
        assert!((p[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_response_rejected() {
        let d = Design::intercept_only(3);
        assert!(matches!(
            fit_weighted_logistic(&d, &[1.0, 1.0, 1.0], &[1.0; 3]),
            Err(Error::DegenerateResponse(_))
        ));
        // the only zero carries zero weight
        assert!(matches!(
            fit_weighted_logistic(&d, &[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]),
            Err(Error::DegenerateResponse(_))
        ));
    }

    #[test]
    fn zero_coefficients_predict_one_half() {
        let fit = GlmFit {
            coefficients: vec![0.0, 0.0],
            names: vec![INTERCEPT.into(), "x".into()],
            converged: true,
            iterations: 0,
            deviance: 0.0,
            dropped_columns: vec![],
            penalized: false,
        };
        let d = Design::with_intercept(&[("x", &[1.0, -4.0, 9.0])]).unwrap();
        assert_eq!(predict_proba(&fit, &d).unwrap(), vec![0.5; 3]);
        assert!(matches!(predict_proba(&fit, &Design::intercept_only(3)), Err(Error::Domain(_))));
    }

    #[test]
    fn separated_data_is_penalized_and_flagged() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| f64::from(u8::from(v >= 10.0))).collect();
        let d = Design::with_intercept(&[("x", &x)]).unwrap();
        let fit = fit_weighted_logistic(&d, &y, &[1.0; 20]).unwrap();
        assert!(fit.penalized);
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn ols_exact_and_degenerate_cases() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        let d = Design::with_intercept(&[("x", &x)]).unwrap();
        let fit = fit_ols(&d, &y).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.intercept + 2.0).abs() < 1e-10);
        assert!(matches!(fit_ols(&d, &[5.0; 4]), Err(Error::ConstantResponse)));

        let twice: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let d = Design::with_intercept(&[("x", &x), ("twice", &twice)]).unwrap();
        match fit_ols(&d, &y) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, ["twice"]),
            other => panic!("expected rank error, got {other:?}"),
        }
    }
}
