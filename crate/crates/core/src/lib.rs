//! Testing the maximum in-degree of a Bayes net on `{0,1}^n` from samples.
//!
//! The pipeline is testing-by-learning:
//!
//! 1. [`learner::identify_support`] finds an effective support `S~` by
//!    discarding `(x_i, π_i)` pairs of negligible empirical mass;
//! 2. [`learner::near_proper_learn`] fits a degree-`d` net `Q` on a candidate
//!    graph with the add-K rule ([`estimators::add_k_estimate`]), accurate in
//!    chi-square on `S~`, and [`learner::mass_shift`] moves `Q`'s mass onto
//!    `S~` when Hellinger guarantees are needed;
//! 3. [`tester::tolerant_test`] checks `Q` against fresh Poissonized samples;
//!    [`tester::test_graph`] and [`tester::test_degree`] wire the stages
//!    together for one graph or for every graph of bounded in-degree.
//!
//! [`hardness`] holds the star-shaped family on which full-support chi-square
//! learning needs exponentially many samples, and [`divergence`] the exact
//! small-`n` oracles everything is checked against.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayesnet;
pub mod calibration;
pub mod divergence;
mod error;
pub mod estimators;
pub mod hardness;
pub mod instances;
pub mod learner;
pub mod numeric;
mod rng;
pub mod tester;

pub use bayesnet::{
    enumerate_dags, kl_projection, validate, Assignment, BayesNetModel, Dag, DenseDistribution, Sampler, Violation,
};
pub use error::{Error, Result};
pub use estimators::{add_k_estimate, choose_k, SampleCounts};
pub use learner::{identify_support, mass_shift, near_proper_learn, LearnerConfig, SupportMask};
pub use rng::Seed;
pub use tester::{test_degree, test_graph, tolerant_test, TestReport, TesterConfig, TesterMode, Verdict};
