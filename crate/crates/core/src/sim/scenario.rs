use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One coefficient per generating covariate. `t`, `r`, `v`, `z` are the
/// derived terms `sin L`, `M^2`, `N * O` and `O * P`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub l: f64,
    pub m: f64,
    pub n: f64,
    pub o: f64,
    pub p: f64,
    pub q: f64,
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub z: f64,
}

impl Coefficients {
    pub const fn linear(l: f64, m: f64, n: f64, o: f64, p: f64, q: f64) -> Self {
        Self {
            l,
            m,
            n,
            o,
            p,
            q,
            t: 0.0,
            r: 0.0,
            v: 0.0,
            z: 0.0,
        }
    }

    pub const fn with_nonlinear(mut self, t: f64, r: f64, v: f64, z: f64) -> Self {
        self.t = t;
        self.r = r;
        self.v = v;
        self.z = z;
        self
    }
}

/// Censoring at time 1: `P(C_1 = 1) = expit(mu_1 + mu' X_0 + lambda A_0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoringParams {
    pub mu_1: f64,
    pub mu_l0: f64,
    pub mu_m0: f64,
    pub mu_n0: f64,
    pub mu_o0: f64,
    pub mu_p0: f64,
    pub mu_q0: f64,
    pub lambda: f64,
}

/// Parameters of the two-time-point generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub name: String,
    pub n: usize,
    pub alpha_0: f64,
    pub alpha_1: f64,
    pub alpha_y: f64,
    pub phi_0: Coefficients,
    pub phi_1: Coefficients,
    pub beta_x0: Coefficients,
    pub beta_x1: Coefficients,
    /// Autoregression of time-1 covariates on their time-0 values.
    pub beta: f64,
    /// Effects of `A_0` on `L_1, M_1, N_1, O_1, P_1`.
    pub gamma: [f64; 5],
    pub delta_0: f64,
    pub delta_1: f64,
    pub mu_0: f64,
    pub theta: f64,
    pub beta_a0: f64,
    pub beta_a1: f64,
    pub censoring: Option<CensoringParams>,
    pub q0_prevalence: [f64; 5],
    pub q1_prevalence: [f64; 5],
    /// Prevalence of `P_0`.
    pub p0_prevalence: f64,
    /// Standard deviation of `N_t` noise.
    pub n_sd: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("scenario sample size must be positive".into()));
        }
        for (name, prev) in [("q0_prevalence", &self.q0_prevalence), ("q1_prevalence", &self.q1_prevalence)] {
            let total: f64 = prev.iter().sum();
            if prev.iter().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("{name} must be probabilities summing to 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.p0_prevalence) {
            return Err(Error::Domain("p0_prevalence must lie in [0, 1]".into()));
        }
        if !(self.n_sd >= 0.0) {
            return Err(Error::Domain("n_sd must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn is_censored(&self) -> bool {
        self.censoring.is_some()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }
}

pub const BUILTIN_IDS: [&str; 11] = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "censored_base"];

const BASE_PHI: Coefficients = Coefficients::linear(0.05, 0.05, 0.1, 0.75, 0.5, 0.4);
const BASE_BETA_X: Coefficients = Coefficients::linear(0.5, 0.5, 0.05, 1.0, 1.0, 0.2);
const STRONG_PHI: Coefficients = Coefficients::linear(1.0, 1.0, 0.1, 2.0, 2.0, 0.4);
const NONLINEAR_BETA_X: Coefficients =
    Coefficients::linear(0.4, 0.03, 0.03, 0.75, 0.75, 0.2).with_nonlinear(0.4, 0.02, 0.04, 0.5);

fn base_case() -> ScenarioConfig {
    ScenarioConfig {
        id: "1".into(),
        name: "Base case".into(),
        n: 10_000,
        alpha_0: -1.3,
        alpha_1: -1.7,
        alpha_y: -4.3,
        phi_0: BASE_PHI,
        phi_1: BASE_PHI,
        beta_x0: BASE_BETA_X,
        beta_x1: BASE_BETA_X,
        beta: 0.0,
        gamma: [-1.0, -0.5, -0.25, -0.5, -0.75],
        delta_0: -0.05,
        delta_1: 1.23,
        mu_0: -1.1,
        theta: 0.69,
        beta_a0: -0.69,
        beta_a1: -0.69,
        censoring: None,
        q0_prevalence: [0.5, 0.3, 0.1, 0.05, 0.05],
        q1_prevalence: [0.4, 0.3, 0.2, 0.05, 0.05],
        p0_prevalence: 0.2,
        n_sd: 10.0,
    }
}

/// The built-in parameterizations. Accepts `1`..`10` and `censored_base`
/// (also `censored-base`).
pub fn builtin_scenario(id: &str) -> Result<ScenarioConfig> {
    let base = base_case();
    let named = |id: &str, name: &str, c: ScenarioConfig| ScenarioConfig {
        id: id.into(),
        name: name.into(),
        ..c
    };
    let config = match id {
        "1" => base,
        "2" => named(
            "2",
            "Low prevalence of exposure",
            ScenarioConfig {
                alpha_0: -3.08,
                alpha_1: -3.37,
                alpha_y: -5.1,
                ..base
            },
        ),
        "3" => named("3", "Small sample", ScenarioConfig { n: 1_000, ..base }),
        "4" => named(
            "4",
            "High imbalance, no confounding",
            ScenarioConfig {
                alpha_0: -3.25,
                alpha_1: -2.93,
                alpha_y: -0.75,
                phi_0: STRONG_PHI,
                phi_1: STRONG_PHI,
                beta_x0: Coefficients::default(),
                beta_x1: Coefficients::default(),
                ..base
            },
        ),
        "5" => {
            let phi = Coefficients::linear(0.01, 0.01, 0.02, 0.02, 0.01, 0.01);
            let beta_x = Coefficients::linear(1.0, 1.0, 0.1, 2.0, 2.0, 0.4);
            named(
                "5",
                "Low imbalance, moderate confounding",
                ScenarioConfig {
                    alpha_0: -0.05,
                    alpha_1: -0.2,
                    alpha_y: -20.5,
                    phi_0: phi,
                    phi_1: phi,
                    beta_x0: beta_x,
                    beta_x1: beta_x,
                    gamma: [0.0; 5],
                    delta_1: -4.5,
                    mu_0: 0.0,
                    theta: 0.0,
                    beta_a0: 0.0,
                    beta_a1: 0.0,
                    ..base
                },
            )
        }
        "6" => named(
            "6",
            "High imbalance-high confounding",
            ScenarioConfig {
                alpha_0: -3.25,
                alpha_1: -2.95,
                alpha_y: -4.07,
                phi_0: STRONG_PHI,
                phi_1: STRONG_PHI,
                theta: 0.0,
                ..base
            },
        ),
        "7" => named(
            "7",
            "Nonlinear outcome",
            ScenarioConfig {
                alpha_y: -3.1,
                beta_x0: NONLINEAR_BETA_X,
                beta_x1: NONLINEAR_BETA_X,
                theta: 0.0,
                ..base
            },
        ),
        "8" => {
            let phi = Coefficients::linear(0.05, 0.05, 0.1, 0.5, 0.25, 0.4).with_nonlinear(0.01, 0.02, 0.01, 0.1);
            named(
                "8",
                "Nonlinear outcome and exposure",
                ScenarioConfig {
                    alpha_0: -1.14,
                    alpha_1: -1.5,
                    alpha_y: -3.1,
                    phi_0: phi,
                    phi_1: phi,
                    beta_x0: NONLINEAR_BETA_X,
                    beta_x1: NONLINEAR_BETA_X,
                    mu_0: -1.08,
                    ..base
                },
            )
        }
        "9" => {
            let phi = Coefficients::linear(0.2, 0.03, 0.02, 0.0, 1.5, 0.01).with_nonlinear(0.01, 0.02, 0.0, 0.0);
            let beta_x = Coefficients::linear(0.4, 0.03, 0.03, 0.0, 0.75, 0.2).with_nonlinear(0.4, 0.02, 0.0, 0.0);
            named(
                "9",
                "Redundant covariates",
                ScenarioConfig {
                    alpha_0: -0.37,
                    alpha_1: -0.59,
                    alpha_y: -2.0,
                    phi_0: phi,
                    phi_1: phi,
                    beta_x0: beta_x,
                    beta_x1: beta_x,
                    mu_0: -1.08,
                    ..base
                },
            )
        }
        "10" => {
            let phi = Coefficients::linear(0.2, 0.03, 0.02, 0.5, 0.25, 0.01).with_nonlinear(0.01, 0.02, 0.01, 0.1);
            let beta_x = Coefficients::linear(0.4, 0.0, 0.03, 0.75, 0.75, 0.2).with_nonlinear(0.4, 0.0, 0.04, 0.5);
            named(
                "10",
                "Instrumental variables",
                ScenarioConfig {
                    alpha_0: -0.4,
                    alpha_1: -0.6,
                    alpha_y: -2.0,
                    phi_0: phi,
                    phi_1: phi,
                    beta_x0: beta_x,
                    beta_x1: beta_x,
                    delta_1: 1.21,
                    mu_0: -1.08,
                    ..base
                },
            )
        }
        "censored_base" | "censored-base" => named(
            "censored_base",
            "Base case with censoring",
            ScenarioConfig {
                censoring: Some(CensoringParams {
                    mu_1: -2.7,
                    mu_l0: 0.04,
                    mu_m0: 0.05,
                    mu_n0: 0.02,
                    mu_o0: 1.0,
                    mu_p0: 0.02,
                    mu_q0: 0.01,
                    lambda: 1.0,
                }),
                ..base
            },
        ),
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_validate() {
        for id in BUILTIN_IDS {
            let c = builtin_scenario(id).unwrap();
            c.validate().unwrap();
            assert_eq!(c.id, id);
            let back = ScenarioConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
        assert!(matches!(builtin_scenario("11"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn selected_values() {
        assert_eq!(builtin_scenario("1").unwrap().alpha_y, -4.3);
        let s4 = builtin_scenario("4").unwrap();
        assert_eq!(s4.beta_x0, Coefficients::default());
        assert_eq!(s4.beta_x1, Coefficients::default());
        let c = builtin_scenario("censored-base").unwrap().censoring.unwrap();
        assert_eq!((c.lambda, c.mu_1), (1.0, -2.7));
        let s2 = builtin_scenario("2").unwrap();
        assert_eq!((s2.alpha_0, s2.alpha_1, s2.alpha_y), (-3.08, -3.37, -5.1));
        assert_eq!(builtin_scenario("3").unwrap().n, 1_000);
    }
}
