//! Two-time-point simulation bench: scenario parameterizations, data
//! generation, counterfactual truth and replicate campaigns.

mod campaign;
mod generate;
mod scenario;
mod truth;

pub use campaign::{
    archive_paths, read_archive_csv, run_replicates, write_archive, write_archive_csv, write_msm_csv,
    write_replicates_csv, Archive, ArchiveRow, BalanceTriple, CampaignOptions, Regime, ReplicateFailure,
    ReplicateRecord, ReplicateSummary, TRIPLE_CELLS,
};
pub use generate::{
    counterfactual_path, covariates_0, covariates_1, generate_scenario, observed_path, prob_a0, prob_a1, prob_c1,
    prob_y, simulate, simulated_schema, stream_rng, Covariates, Simulated, Stage, SubjectNoise, SubjectPath,
    COVARIATES,
};
pub use scenario::{builtin_scenario, CensoringParams, Coefficients, ScenarioConfig, BUILTIN_IDS};
pub use truth::{
    bias, estimate_msm, truth_oracle, truth_oracle_with, Bias, BiasAggregation, MsmEstimate, MsmTruth, TruthOutcome,
};
