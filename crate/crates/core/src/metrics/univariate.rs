use std::collections::BTreeMap;

use super::ecdf::WeightedEcdf;
use super::kde::density_overlap;
use super::Groups;
use crate::error::{Error, Result};
use crate::panel::{Column, CovariateBlock, Scale};

const LEVY_TOLERANCE: f64 = 1e-6;

fn column<'a>(block: &'a CovariateBlock, covariate: &str) -> Result<&'a Column> {
    block
        .column(covariate)
        .ok_or_else(|| Error::Domain(format!("covariate `{covariate}` not in block")))
}

/// `|x̄_1 - x̄_0|` with weights normalized within group.
pub fn mean_diff_values(x: &[f64], group: &[bool], w: &[f64]) -> Result<f64> {
    let g = Groups::split(group, w)?;
    Ok((g.mean(1, x) - g.mean(0, x)).abs())
}

pub fn smd_values(x: &[f64], group: &[bool], w: &[f64], name: &str) -> Result<f64> {
    let g = Groups::split(group, w)?;
    let pooled = g.pooled_sd(x);
    if !(pooled > 0.0) {
        return Err(Error::DegenerateCovariate(name.to_string()));
    }
    Ok((g.mean(1, x) - g.mean(0, x)).abs() / pooled)
}

/// `1 - OVL`. Discrete columns compare probability masses, continuous ones
/// kernel density estimates.
pub fn overlap_values(x: &[f64], group: &[bool], w: &[f64], scale: Scale) -> Result<f64> {
    let g = Groups::split(group, w)?;
    let ovl = match scale {
        Scale::Discrete => {
            let mut mass: BTreeMap<u64, [f64; 2]> = BTreeMap::new();
            for k in 0..2 {
                let m = g.rows[k].len() as f64;
                for (&i, &wi) in g.rows[k].iter().zip(&g.weights[k]) {
                    mass.entry(x[i].to_bits()).or_default()[k] += wi / m;
                }
            }
            mass.values().map(|p| p[0].min(p[1])).sum::<f64>()
        }
        Scale::Continuous => {
            let (ovl, _, _) = density_overlap(&g.values(1, x), &g.weights[1], &g.values(0, x), &g.weights[0]);
            ovl
        }
    };
    Ok((1.0 - ovl).clamp(0.0, 1.0))
}

fn group_ecdfs(x: &[f64], group: &[bool], w: &[f64]) -> Result<(WeightedEcdf, WeightedEcdf)> {
    let g = Groups::split(group, w)?;
    Ok((
        WeightedEcdf::new(&g.values(1, x), &g.weights[1]),
        WeightedEcdf::new(&g.values(0, x), &g.weights[0]),
    ))
}

fn ks_of(f1: &WeightedEcdf, f0: &WeightedEcdf) -> f64 {
    f1.support()
        .iter()
        .chain(f0.support())
        .map(|&v| (f1.eval(v) - f0.eval(v)).abs())
        .fold(0.0, f64::max)
}

/// Largest vertical gap between the within-group weighted ECDFs.
pub fn ks_values(x: &[f64], group: &[bool], w: &[f64]) -> Result<f64> {
    let (f1, f0) = group_ecdfs(x, group, w)?;
    Ok(ks_of(&f1, &f0))
}

/// Whether `F0(x - e) - e <= F1(x) <= F0(x + e) + e` everywhere. Between
/// breakpoints both sides are constant, so it suffices to check the left
/// inequality just after each jump of `F0(· - e)` and the right one at each
/// jump of `F1`.
fn levy_feasible(f1: &WeightedEcdf, f0: &WeightedEcdf, eps: f64) -> bool {
    const SLACK: f64 = 1e-12;
    f0.support()
        .iter()
        .zip(f0.cumulative())
        .all(|(&b, &c)| c - eps <= f1.eval(b + eps) + SLACK)
        && f1
            .support()
            .iter()
            .zip(f1.cumulative())
            .all(|(&b, &c)| c <= f0.eval(b + eps) + eps + SLACK)
}

/// Lévy distance by bisection on `[0, KS]`.
pub fn levy_values(x: &[f64], group: &[bool], w: &[f64]) -> Result<f64> {
    let (f1, f0) = group_ecdfs(x, group, w)?;
    if levy_feasible(&f1, &f0, 0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, ks_of(&f1, &f0));
    while hi - lo > LEVY_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if levy_feasible(&f1, &f0, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn weighted_mean_diff(block: &CovariateBlock, w: &[f64], covariate: &str) -> Result<f64> {
    mean_diff_values(&column(block, covariate)?.values, &block.group, w)
}

pub fn smd(block: &CovariateBlock, w: &[f64], covariate: &str) -> Result<f64> {
    smd_values(&column(block, covariate)?.values, &block.group, w, covariate)
}

pub fn overlap_coefficient(block: &CovariateBlock, w: &[f64], covariate: &str) -> Result<f64> {
    let c = column(block, covariate)?;
    overlap_values(&c.values, &block.group, w, c.scale)
}

pub fn ks_distance(block: &CovariateBlock, w: &[f64], covariate: &str) -> Result<f64> {
    ks_values(&column(block, covariate)?.values, &block.group, w)
}

pub fn levy_distance(block: &CovariateBlock, w: &[f64], covariate: &str) -> Result<f64> {
    levy_values(&column(block, covariate)?.values, &block.group, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    // treated {0, 1}, untreated {1, 2}
    const X: [f64; 4] = [0.0, 1.0, 1.0, 2.0];
    const G: [bool; 4] = [true, true, false, false];
    const W: [f64; 4] = [1.0; 4];

    #[test]
    fn hand_fixture_values() {
        assert_eq!(mean_diff_values(&X, &G, &W).unwrap(), 1.0);
        assert!((smd_values(&X, &G, &W, "x").unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(ks_values(&X, &G, &W).unwrap(), 0.5);
        assert!((levy_values(&X, &G, &W).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn binary_overlap_is_mass_difference() {
        // weighted P(X=1) of 0.6 vs 0.4
        let x = [1.0, 0.0, 1.0, 0.0];
        let g = [true, true, false, false];
        let w = [0.6, 0.4, 0.4, 0.6];
        let v = overlap_values(&x, &g, &w, Scale::Discrete).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn far_apart_point_masses_have_no_overlap() {
        let x = [0.0, 0.0, 1e6, 1e6];
        let v = overlap_values(&x, &G, &W, Scale::Continuous).unwrap();
        assert!(v > 0.999);
        assert_eq!(ks_values(&x, &G, &W).unwrap(), 1.0);
    }

    #[test]
    fn empty_group_and_constant_covariate_errors() {
        let g = [true; 4];
        assert!(matches!(mean_diff_values(&X, &g, &W), Err(Error::DegenerateGroup(_))));
        assert!(matches!(
            mean_diff_values(&X, &G, &[1.0, 1.0, 0.0, 0.0]),
            Err(Error::DegenerateGroup(_))
        ));
        assert!(matches!(
            smd_values(&[3.0; 4], &G, &W, "c"),
            Err(Error::DegenerateCovariate(name)) if name == "c"
        ));
    }
}
