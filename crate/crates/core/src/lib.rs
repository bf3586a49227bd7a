//! Active linear regression with spatially-aware pivotal sampling.
//!
//! The pipeline: expand raw coordinates into a design matrix
//! ([`features`]), compute leverage scores and exact-size inclusion
//! probabilities ([`leverage`]), build a competition tree over the raw
//! coordinates ([`tree`]), draw a pivotal sample ([`sampler`]) and solve the
//! reweighted least-squares problem ([`matrix`]). [`verify`] holds exact
//! and Monte-Carlo diagnostics of the sampling distribution, [`continuum`]
//! the one-dimensional polynomial sampler, [`problems`] the ODE/PDE test
//! targets and [`harness`] the experiment runner.

pub mod error;
pub mod matrix;
pub mod rng;
pub mod leverage;
pub mod tree;
pub mod sampler;
pub mod features;
pub mod continuum;
pub mod quad;
pub mod ode;
pub mod problems;
pub mod verify;
pub mod harness;

pub use continuum::{
    build_partition, embedding_error, fit_legendre, sample_continuum, tau, ContinuumSampler,
    IntervalPartition, LeverageDensity,
};
pub use error::{Error, Result};
pub use features::{chebyshev_grid, expand, legendre_normalized, BoxScaling, PolynomialBasisSpec};
pub use harness::{
    run_experiment, samples_to_target, ExperimentConfig, ExperimentResult, SamplerKind, TargetTable,
};
pub use leverage::{leverage_scores, probability_ceiling, InclusionProbabilities, LeverageScores};
pub use matrix::{
    orthonormal_basis, spectral_deviation_from_identity, weighted_least_squares, DenseMatrix,
    RegressionSolution,
};
pub use problems::{
    evaluate_target, grid_domain, sample_domain, LabelOracle, ProblemKind, TargetProblem,
};
pub use rng::RngState;
pub use sampler::{bernoulli_sample, pivotal_sample, subsample_system, uniform_sample, SampleSet};
pub use tree::{build_tree, Child, CompetitionTree, Node, SplitMethod};
pub use verify::{
    d_inf, embedding_deviation, enumerate_pivotal, influence_report, matvec_error, InfluenceReport,
    SampleDistribution,
};
