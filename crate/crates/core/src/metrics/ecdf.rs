/// Weighted empirical CDF stored as distinct sorted support points.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEcdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl WeightedEcdf {
    /// Weights need not be normalized; their total must be positive.
    pub fn new(values: &[f64], weights: &[f64]) -> Self {
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut xs: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut cdf: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut running = 0.0;
        for (x, w) in pairs {
            running += w;
            if xs.last() == Some(&x) {
                *cdf.last_mut().expect("nonempty") = running / total;
            } else {
                xs.push(x);
                cdf.push(running / total);
            }
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self { xs, cdf }
    }

    pub fn support(&self) -> &[f64] {
        &self.xs
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cdf
    }

    /// `F(x)`, right-continuous.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.xs.partition_point(|&v| v <= x);
        if idx == 0 {
            0.0
        } else {
            self.cdf[idx - 1]
        }
    }

    /// Smallest support point with `F(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let idx = self.cdf.partition_point(|&c| c < p).min(self.xs.len() - 1);
        self.xs[idx]
    }
}
