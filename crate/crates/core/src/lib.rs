//! Membership-inference privacy (MIP) noise calibration.
//!
//! Wraps deterministic vector-valued algorithms with noise scaled to the
//! spread of their output over random half-splits of the data, and provides
//! DP baselines, exact and Monte Carlo membership attackers, and runners for
//! the noise-level and synthetic covariance studies.

pub mod algorithm;
pub mod attack;
pub mod budget;
pub mod data;
pub mod error;
pub mod experiments;
pub mod mechanisms;
pub mod moments;
pub mod noise;
pub mod rng;
pub mod subset;

#[cfg(test)]
mod testutil;

pub use algorithm::{BaseAlgorithm, ConstantAlgorithm, FnAlgorithm, MeanQuery, ReciprocalSum, SecondMoment};
pub use budget::PrivacyBudget;
pub use data::{load_dataset, DatasetTable};
pub use error::{Error, Result};
pub use experiments::{emit_results, run_fig1, run_synth, ExperimentConfig, ResultRow, RunManifest};
pub use noise::{
    mip_scale_constant, sample_gen_normal, sample_laplace, sample_mip_noise, sigma_norm, IsotropicNoise,
    MomentProfile, NoiseConstant, NoiseSpec, NoiseVariant,
};
pub use rng::{SeedStream, StreamRng};
pub use subset::{enumerate_subsets, random_half_split, SubsetMask};
