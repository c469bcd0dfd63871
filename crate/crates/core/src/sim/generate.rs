use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::scenario::{Coefficients, ScenarioConfig};
use crate::error::Result;
use crate::glm::expit;
use crate::panel::{CovariateSpec, PanelDataset, TimeSlice};

/// Independent random streams of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Data = 0,
    Truth = 1,
}

/// Stream keyed by `(master seed, replicate, stage)`, so results never
/// depend on the order in which replicates are processed.
pub fn stream_rng(master_seed: u64, replicate: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate * 8 + stage as u64);
    rng
}

pub const COVARIATES: [&str; 6] = ["L", "M", "N", "O", "P", "Q"];

/// Schema of simulated panels.
pub fn simulated_schema() -> Vec<CovariateSpec> {
    vec![
        CovariateSpec::continuous("L"),
        CovariateSpec::continuous("M"),
        CovariateSpec::continuous("N"),
        CovariateSpec::binary("O"),
        CovariateSpec::binary("P"),
        CovariateSpec::ordinal("Q", ["1", "2", "3", "4", "5"]),
    ]
}

/// Every random draw a subject needs, taken up front so that counterfactual
/// regeneration reuses exactly the same randomness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectNoise {
    pub l0: f64,
    pub m0: f64,
    pub n0: f64,
    pub u_o0: f64,
    pub u_p0: f64,
    pub u_q0: f64,
    pub u_a0: f64,
    pub u_c1: f64,
    pub e_l1: f64,
    pub e_m1: f64,
    pub e_n1: f64,
    pub u_o1: f64,
    pub u_p1: f64,
    pub u_q1: f64,
    pub u_a1: f64,
    pub u_y: f64,
}

impl SubjectNoise {
    pub fn draw<R: RngCore>(rng: &mut R) -> Self {
        let mut z = || rng.sample::<f64, _>(StandardNormal);
        let (l0, m0, n0) = (z(), z(), z());
        let (e_l1, e_m1, e_n1) = (z(), z(), z());
        let mut u = || rng.random::<f64>();
        Self {
            l0,
            m0,
            n0,
            u_o0: u(),
            u_p0: u(),
            u_q0: u(),
            u_a0: u(),
            u_c1: u(),
            e_l1,
            e_m1,
            e_n1,
            u_o1: u(),
            u_p1: u(),
            u_q1: u(),
            u_a1: u(),
            u_y: u(),
        }
    }
}

/// Covariates at one time-point: `L, M, N, O, P, Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariates(pub [f64; 6]);

impl Covariates {
    /// `phi' (L, M, N, O, P, Q, sin L, M^2, N O, O P)`.
    pub fn linear(&self, c: &Coefficients) -> f64 {
        let [l, m, n, o, p, q] = self.0;
        c.l * l + c.m * m + c.n * n + c.o * o + c.p * p + c.q * q + c.t * l.sin() + c.r * m * m + c.v * n * o + c.z * o * p
    }
}

fn bern(u: f64, p: f64) -> f64 {
    f64::from(u8::from(u < p))
}

fn ordinal(u: f64, prevalence: &[f64; 5]) -> f64 {
    let mut cum = 0.0;
    for (k, p) in prevalence.iter().enumerate() {
        cum += p;
        if u < cum {
            return (k + 1) as f64;
        }
    }
    5.0
}

pub fn covariates_0(config: &ScenarioConfig, noise: &SubjectNoise) -> Covariates {
    let l = noise.l0;
    Covariates([
        l,
        noise.m0.exp(),
        config.n_sd * noise.n0,
        bern(noise.u_o0, expit(config.delta_0 + 2.0 * l)),
        bern(noise.u_p0, config.p0_prevalence),
        ordinal(noise.u_q0, &config.q0_prevalence),
    ])
}

pub fn covariates_1(config: &ScenarioConfig, x0: &Covariates, a0: f64, noise: &SubjectNoise) -> Covariates {
    let [l0, m0, n0, o0, p0, _] = x0.0;
    let (b, g) = (config.beta, &config.gamma);
    let l1 = b * l0 + g[0] * a0 + noise.e_l1;
    Covariates([
        l1,
        (b * m0 + g[1] * a0 + noise.e_m1).exp(),
        b * n0 + g[2] * a0 + config.n_sd * noise.e_n1,
        bern(noise.u_o1, expit(config.delta_1 + b * o0 + 2.0 * l1 + g[3] * a0)),
        bern(noise.u_p1, expit(config.mu_0 + b * p0 + g[4] * a0)),
        ordinal(noise.u_q1, &config.q1_prevalence),
    ])
}

pub fn prob_a0(config: &ScenarioConfig, x0: &Covariates) -> f64 {
    expit(config.alpha_0 + x0.linear(&config.phi_0))
}

pub fn prob_a1(config: &ScenarioConfig, x1: &Covariates, a0: f64) -> f64 {
    expit(config.alpha_1 + x1.linear(&config.phi_1) + config.theta * a0)
}

/// Probability of being censored at time 1; 0 in uncensored scenarios.
pub fn prob_c1(config: &ScenarioConfig, x0: &Covariates, a0: f64) -> f64 {
    let Some(c) = &config.censoring else { return 0.0 };
    let [l, m, n, o, p, q] = x0.0;
    expit(c.mu_1 + c.mu_l0 * l + c.mu_m0 * m + c.mu_n0 * n + c.mu_o0 * o + c.mu_p0 * p + c.mu_q0 * q + c.lambda * a0)
}

pub fn prob_y(config: &ScenarioConfig, x0: &Covariates, x1: &Covariates, a0: f64, a1: f64) -> f64 {
    expit(
        config.alpha_y
            + x0.linear(&config.beta_x0)
            + x1.linear(&config.beta_x1)
            + config.beta_a0 * a0
            + config.beta_a1 * a1,
    )
}

/// A fully generated subject, including values that censoring hides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectPath {
    pub x0: Covariates,
    pub a0: f64,
    pub censored: bool,
    pub x1: Covariates,
    pub a1: f64,
    pub y: f64,
    pub p_a0: f64,
    pub p_a1: f64,
    pub p_c1: f64,
    pub p_y: f64,
}

/// Natural course: treatments follow the generating propensities.
pub fn observed_path(config: &ScenarioConfig, noise: &SubjectNoise) -> SubjectPath {
    let x0 = covariates_0(config, noise);
    let p_a0 = prob_a0(config, &x0);
    let a0 = bern(noise.u_a0, p_a0);
    let p_c1 = prob_c1(config, &x0, a0);
    let x1 = covariates_1(config, &x0, a0, noise);
    let p_a1 = prob_a1(config, &x1, a0);
    let a1 = bern(noise.u_a1, p_a1);
    let p_y = prob_y(config, &x0, &x1, a0, a1);
    SubjectPath {
        x0,
        a0,
        censored: config.is_censored() && noise.u_c1 < p_c1,
        x1,
        a1,
        y: bern(noise.u_y, p_y),
        p_a0,
        p_a1,
        p_c1,
        p_y,
    }
}

/// The same subject under forced treatments `(a0, a1)` and no censoring.
pub fn counterfactual_path(config: &ScenarioConfig, noise: &SubjectNoise, a0: f64, a1: f64) -> SubjectPath {
    let x0 = covariates_0(config, noise);
    let x1 = covariates_1(config, &x0, a0, noise);
    let p_y = prob_y(config, &x0, &x1, a0, a1);
    SubjectPath {
        x0,
        a0,
        censored: false,
        x1,
        a1,
        y: bern(noise.u_y, p_y),
        p_a0: prob_a0(config, &x0),
        p_a1: prob_a1(config, &x1, a0),
        p_c1: 0.0,
        p_y,
    }
}

/// A generated panel plus the generating probabilities of each subject.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: PanelDataset,
    pub paths: Vec<SubjectPath>,
    pub noise: Vec<SubjectNoise>,
}

pub fn simulate<R: RngCore>(config: &ScenarioConfig, rng: &mut R) -> Result<Simulated> {
    config.validate()?;
    let noise: Vec<SubjectNoise> = (0..config.n).map(|_| SubjectNoise::draw(rng)).collect();
    let paths: Vec<SubjectPath> = noise.iter().map(|z| observed_path(config, z)).collect();
    let n = config.n;
    let mut slices = Vec::with_capacity(2);
    for t in 0..2 {
        let mut covariates = vec![Vec::with_capacity(n); 6];
        let mut treatment = Vec::with_capacity(n);
        let mut censored = Vec::with_capacity(n);
        for path in &paths {
            let hidden = t == 1 && path.censored;
            let (x, a) = if t == 0 { (&path.x0, path.a0) } else { (&path.x1, path.a1) };
            censored.push(hidden);
            treatment.push((!hidden).then_some(a as u8));
            for (j, col) in covariates.iter_mut().enumerate() {
                col.push((!hidden).then_some(x.0[j]));
            }
        }
        slices.push(TimeSlice {
            censored,
            treatment,
            covariates,
        });
    }
    let outcome = paths.iter().map(|p| (!p.censored).then_some(p.y as u8)).collect();
    let ids = (1..=n).map(|i| i.to_string()).collect();
    let data = PanelDataset::new(ids, simulated_schema(), slices, Some(outcome))?;
    Ok(Simulated { data, paths, noise })
}

/// Generates one panel from `seed`.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<PanelDataset> {
    Ok(simulate(config, &mut stream_rng(seed, 0, Stage::Data))?.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::builtin_scenario;

    #[test]
    fn counterfactual_under_observed_treatment_reproduces_observation() {
        let config = builtin_scenario("censored_base").unwrap();
        let mut rng = stream_rng(9, 0, Stage::Data);
        for _ in 0..500 {
            let noise = SubjectNoise::draw(&mut rng);
            let obs = observed_path(&config, &noise);
            let cf = counterfactual_path(&config, &noise, obs.a0, obs.a1);
            assert_eq!((cf.x0, cf.x1, cf.y), (obs.x0, obs.x1, obs.y));
        }
    }

    #[test]
    fn ordinal_inverse_cdf() {
        let prev = [0.5, 0.3, 0.1, 0.05, 0.05];
        assert_eq!(ordinal(0.0, &prev), 1.0);
        assert_eq!(ordinal(0.49, &prev), 1.0);
        assert_eq!(ordinal(0.5, &prev), 2.0);
        assert_eq!(ordinal(0.97, &prev), 5.0);
        assert_eq!(ordinal(0.999_999_9, &prev), 5.0);
    }

    #[test]
    fn same_seed_same_panel() {
        let mut config = builtin_scenario("1").unwrap();
        config.n = 50;
        assert_eq!(generate_scenario(&config, 3).unwrap(), generate_scenario(&config, 3).unwrap());
        assert_ne!(generate_scenario(&config, 3).unwrap(), generate_scenario(&config, 4).unwrap());
    }
}
