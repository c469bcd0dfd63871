//! Weighted Gaussian kernel density estimates on a fixed grid. Samples are
//! linearly binned onto the grid and the kernel is applied by direct
//! convolution, so cost does not grow with sample size beyond the binning.

use super::ecdf::WeightedEcdf;

pub const GRID_POINTS: usize = 512;

/// Weighted Silverman rule `0.9 * min(sd, IQR / 1.34) * m_eff^(-1/5)`, where
/// `m_eff = (sum w)^2 / sum w^2`. Falls back to the sd when the IQR is zero.
pub fn silverman_bandwidth(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let m = values.len() as f64;
    if values.len() < 2 || total <= 0.0 {
        return 0.0;
    }
    let mean = values.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = values
        .iter()
        .zip(weights)
        .map(|(x, w)| w * m / total * (x - mean) * (x - mean))
        .sum::<f64>()
        / (m - 1.0);
    let sd = var.max(0.0).sqrt();
    let ecdf = WeightedEcdf::new(values, weights);
    let iqr = ecdf.quantile(0.75) - ecdf.quantile(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let m_eff = total * total / weights.iter().map(|w| w * w).sum::<f64>();
    0.9 * spread * m_eff.powf(-0.2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeGrid {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl KdeGrid {
    /// Grid spanning `[lo, hi]` with [`GRID_POINTS`] points.
    pub fn new(lo: f64, hi: f64) -> Self {
        let step = (hi - lo) / (GRID_POINTS - 1) as f64;
        Self {
            x: (0..GRID_POINTS).map(|j| lo + step * j as f64).collect(),
            density: vec![0.0; GRID_POINTS],
        }
    }

    fn step(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// Fills `density` from a weighted sample with bandwidth `h`, normalized
    /// to integrate to 1 under the trapezoid rule.
    pub fn fit(mut self, values: &[f64], weights: &[f64], h: f64) -> Self {
        let lo = self.x[0];
        let step = self.step();
        let mut bins = vec![0.0; GRID_POINTS];
        for (&v, &w) in values.iter().zip(weights) {
            let pos = ((v - lo) / step).clamp(0.0, (GRID_POINTS - 1) as f64);
            let j = (pos.floor() as usize).min(GRID_POINTS - 2);
            let frac = pos - j as f64;
            bins[j] += w * (1.0 - frac);
            bins[j + 1] += w * frac;
        }
        let kernel: Vec<f64> = (0..GRID_POINTS)
            .map(|d| {
                let u = d as f64 * step / h;
                (-0.5 * u * u).exp()
            })
            .collect();
        let reach = kernel.iter().position(|&k| k < 1e-300).unwrap_or(GRID_POINTS);
        let occupied: Vec<usize> = (0..GRID_POINTS).filter(|&l| bins[l] != 0.0).collect();
        for (j, d) in self.density.iter_mut().enumerate() {
            *d = occupied
                .iter()
                .filter_map(|&l| {
                    let off = j.abs_diff(l);
                    (off < reach).then(|| bins[l] * kernel[off])
                })
                .sum();
        }
        let area = trapezoid(&self.density, step);
        if area > 0.0 {
            self.density.iter_mut().for_each(|d| *d /= area);
        }
        self
    }
}

pub(crate) fn trapezoid(y: &[f64], step: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    step * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[y.len() - 1]))
}

/// `∫ min(f1, f0)` for two weighted samples, each with its own bandwidth,
/// on a grid covering the pooled range plus three bandwidths.
pub(crate) fn density_overlap(x1: &[f64], w1: &[f64], x0: &[f64], w0: &[f64]) -> (f64, KdeGrid, KdeGrid) {
    let pooled_x: Vec<f64> = x1.iter().chain(x0).copied().collect();
    let min = pooled_x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = pooled_x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let usable = |h: f64| h > 0.0 && h.is_finite();
    let (mut h1, mut h0) = (silverman_bandwidth(x1, w1), silverman_bandwidth(x0, w0));
    // a constant group borrows the other group's bandwidth
    match (usable(h1), usable(h0)) {
        (true, true) => {}
        (true, false) => h0 = h1,
        (false, true) => h1 = h0,
        (false, false) => {
            let grid = KdeGrid::new(min - 1.0, max + 1.0);
            let same = if min == max { 1.0 } else { 0.0 };
            return (same, grid.clone(), grid);
        }
    }
    let h = h1.max(h0);
    let (lo, hi) = (min - 3.0 * h, max + 3.0 * h);
    let f1 = KdeGrid::new(lo, hi).fit(x1, w1, h1);
    let f0 = KdeGrid::new(lo, hi).fit(x0, w0, h0);
    let mins: Vec<f64> = f1.density.iter().zip(&f0.density).map(|(a, b)| a.min(*b)).collect();
    let ovl = trapezoid(&mins, f1.step()).clamp(0.0, 1.0);
    (ovl, f1, f0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_quantiles_integrate_to_one_and_peak_near_zero() {
        let n = 2000;
        let x: Vec<f64> = (1..=n)
            .map(|i| {
                // logistic approximation to normal quantiles
                let p = i as f64 / (n + 1) as f64;
                (p / (1.0 - p)).ln() / 1.702
            })
            .collect();
        let w = vec![1.0; n];
        let h = silverman_bandwidth(&x, &w);
        assert!(h > 0.05 && h < 0.5);
        let g = KdeGrid::new(-6.0, 6.0).fit(&x, &w, h);
        assert!((trapezoid(&g.density, g.x[1] - g.x[0]) - 1.0).abs() < 1e-12);
        let peak = g.density.iter().copied().fold(0.0, f64::max);
        assert!((peak - 0.3989).abs() < 0.05, "peak {peak}");
    }

    #[test]
    fn disjoint_samples_do_not_overlap() {
        let (ovl, _, _) = density_overlap(&[0.0, 0.1, 0.2], &[1.0; 3], &[100.0, 100.1, 100.2], &[1.0; 3]);
        assert!(ovl < 1e-6);
        let (same, _, _) = density_overlap(&[0.0, 0.5, 2.0], &[1.0; 3], &[0.0, 0.5, 2.0], &[1.0; 3]);
        assert!((same - 1.0).abs() < 1e-12);
    }
}
