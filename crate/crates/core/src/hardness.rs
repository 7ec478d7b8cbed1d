//! The star-shaped hard family: a rare parent `X_0` which, when set, pins
//! every child to a hidden string, and otherwise leaves the children
//! uniform. Learning it in full-support chi-square needs about
//! `2^(n/2) / ε` samples, because until the rare branch is seen a learner
//! cannot tell where its mass sits.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayesnet::{Assignment, BayesNetModel, Dag, DenseDistribution, Sampler, ORACLE_CAP};
use crate::divergence::{chi2, RestrictedPair};
use crate::estimators::{add_k_estimate, SampleCounts};
use crate::learner::{fit_conditionals, identify_support_from_samples, LearnerConfig};
use crate::numeric::{self, kahan_sum};
use crate::{Error, Result, Seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardInstance {
    pub net: BayesNetModel,
    /// Hidden values of `X_1, ..., X_{n-1}`.
    pub hidden: Vec<u8>,
    pub eps0: f64,
}

fn check_params(n: usize, eps0: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("hard instances need n >= 2, got {n}")));
    }
    if !(0.0..1.0).contains(&eps0) {
        return Err(Error::InvalidParameter(format!("eps0 = {eps0} not in [0, 1)")));
    }
    Ok(())
}

/// Star on `n` nodes with `Pr[X_0 = 1] = eps0`; given `X_0 = 1` child `i` equals
/// `hidden[i - 1]`, given `X_0 = 0` it is a fair bit.
pub fn hard_instance_with_hidden(n: usize, eps0: f64, hidden: &[u8]) -> Result<HardInstance> {
    check_params(n, eps0)?;
    if hidden.len() != n - 1 || hidden.iter().any(|&b| b > 1) {
        return Err(Error::InvalidParameter(format!("hidden string must be {} bits", n - 1)));
    }
    let mut cpt = vec![vec![eps0]];
    cpt.extend(hidden.iter().map(|&b| vec![0.5, b as f64]));
    Ok(HardInstance {
        net: BayesNetModel::new(Dag::star(n), cpt)?,
        hidden: hidden.to_vec(),
        eps0,
    })
}

/// Hard instance with a uniformly random hidden string.
pub fn draw_hard_instance(n: usize, eps0: f64, seed: Seed) -> Result<HardInstance> {
    check_params(n, eps0)?;
    let mut rng = seed.rng();
    let hidden: Vec<u8> = (1..n).map(|_| rng.random_range(0..=1u8)).collect();
    hard_instance_with_hidden(n, eps0, &hidden)
}

/// The star with the right parent bias and every child a fair bit.
pub fn ignorant_hypothesis(n: usize, eps0: f64) -> Result<BayesNetModel> {
    check_params(n, eps0)?;
    let mut cpt = vec![vec![eps0]];
    cpt.extend((1..n).map(|_| vec![0.5, 0.5]));
    BayesNetModel::new(Dag::star(n), cpt)
}

/// `χ²(hard instance, ignorant hypothesis) = eps0 (2^(n-1) - 1)`.
pub fn ignorant_risk(n: usize, eps0: f64) -> f64 {
    eps0 * (2f64.powi(n as i32 - 1) - 1.0)
}

/// Parent bias `2ε / 2^(n/2)`.
pub fn minimax_eps0(n: usize, epsilon: f64) -> f64 {
    2.0 * epsilon / 2f64.powf(n as f64 / 2.0)
}

/// Sample size `⌊2^(n/2) / (4ε)⌋` below which the risk stays above `ε`.
pub fn minimax_samples(n: usize, epsilon: f64) -> usize {
    (2f64.powf(n as f64 / 2.0) / (4.0 * epsilon)).floor() as usize
}

/// What a learner knows besides its samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnerContext {
    pub n: usize,
    pub eps0: f64,
    pub epsilon: f64,
}

/// A learner's output.
#[derive(Clone, Debug, PartialEq)]
pub enum Hypothesis {
    Dense(DenseDistribution),
    Net(BayesNetModel),
    /// A net together with the support it claims accuracy on.
    Restricted {
        net: BayesNetModel,
        support: Vec<bool>,
    },
}

impl Hypothesis {
    fn dense(&self) -> Result<DenseDistribution> {
        match self {
            Hypothesis::Dense(d) => Ok(d.clone()),
            Hypothesis::Net(q) | Hypothesis::Restricted { net: q, .. } => q.exact_distribution(),
        }
    }
}

/// An estimator pitted against the hard family.
pub trait MinimaxLearner: Sync {
    fn name(&self) -> &str;

    fn learn(&self, ctx: &LearnerContext, samples: &[Assignment]) -> Result<Hypothesis>;
}

/// Ignores its samples and returns [`ignorant_hypothesis`].
pub struct IgnorantLearner;

impl MinimaxLearner for IgnorantLearner {
    fn name(&self) -> &str {
        "ignorant"
    }

    fn learn(&self, ctx: &LearnerContext, _: &[Assignment]) -> Result<Hypothesis> {
        Ok(Hypothesis::Net(ignorant_hypothesis(ctx.n, ctx.eps0)?))
    }
}

/// Add-K over the full `2^n` domain.
pub struct AddKLearner {
    pub k: f64,
}

impl MinimaxLearner for AddKLearner {
    fn name(&self) -> &str {
        "addk"
    }

    fn learn(&self, ctx: &LearnerContext, samples: &[Assignment]) -> Result<Hypothesis> {
        let counts = SampleCounts::from_assignments(ctx.n, samples)?;
        Ok(Hypothesis::Dense(add_k_estimate(&counts, self.k)?))
    }
}

/// Empirical frequencies over the full domain (add-0).
pub struct EmpiricalLearner;

impl MinimaxLearner for EmpiricalLearner {
    fn name(&self) -> &str {
        "empirical"
    }

    fn learn(&self, ctx: &LearnerContext, samples: &[Assignment]) -> Result<Hypothesis> {
        let counts = SampleCounts::from_assignments(ctx.n, samples)?;
        Ok(Hypothesis::Dense(add_k_estimate(&counts, 0.0)?))
    }
}

/// Near-proper learning on the star: the first half of the samples
/// identifies the support, the second half fits add-K conditionals.
pub struct NearProperLearner {
    pub config: LearnerConfig,
}

impl MinimaxLearner for NearProperLearner {
    fn name(&self) -> &str {
        "nearproper"
    }

    fn learn(&self, ctx: &LearnerContext, samples: &[Assignment]) -> Result<Hypothesis> {
        let dag = Dag::star(ctx.n);
        let cfg = LearnerConfig {
            epsilon: ctx.epsilon,
            ..self.config.clone()
        };
        let (first, second) = samples.split_at(samples.len() / 2);
        let mask = identify_support_from_samples(first, &dag, &cfg)?;
        let d = cfg.degree(&dag)?;
        let net = fit_conditionals(&dag, second, cfg.smoothing(ctx.n, d));
        Ok(Hypothesis::Restricted {
            net,
            support: mask.indicator()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxConfig {
    pub n: usize,
    pub epsilon: f64,
    /// Defaults to [`minimax_eps0`].
    pub eps0: Option<f64>,
    /// Defaults to [`minimax_samples`].
    pub m_samples: Option<usize>,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxTrial {
    pub trial: usize,
    pub seed: Seed,
    /// Full-support chi-square risk.
    #[serde(with = "numeric::extended_f64")]
    pub chi2: f64,
    /// No sample had `X_0 = 1`.
    pub no_rare_sample: bool,
    /// Chi-square restricted to the learner's claimed support, if any.
    pub restricted_chi2: Option<f64>,
    /// Truth mass on that support.
    pub support_mass: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxReport {
    pub learner: String,
    pub n: usize,
    pub epsilon: f64,
    pub eps0: f64,
    pub m_samples: usize,
    pub seed: Seed,
    #[serde(with = "numeric::extended_f64")]
    pub mean: f64,
    #[serde(with = "numeric::extended_f64")]
    pub median: f64,
    #[serde(with = "numeric::extended_f64")]
    pub quantile_90: f64,
    pub no_rare_fraction: f64,
    /// `(1 - eps0)^m`.
    pub no_rare_expected: f64,
    /// Standard error of the no-rare frequency under its expected value.
    pub no_rare_std_error: f64,
    pub trials: Vec<MinimaxTrial>,
}

/// Per trial, draw a fresh hard instance, hand the learner `m` samples and
/// score its output against the exact truth.
pub fn minimax_experiment<L: MinimaxLearner + ?Sized>(
    learner: &L,
    cfg: &MinimaxConfig,
    seed: Seed,
) -> Result<MinimaxReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    if cfg.n > ORACLE_CAP {
        return Err(Error::CapExceeded {
            what: "exact-oracle",
            n: cfg.n,
            cap: ORACLE_CAP,
        });
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {} not in (0, 1)",
            cfg.epsilon
        )));
    }
    let eps0 = cfg.eps0.unwrap_or_else(|| minimax_eps0(cfg.n, cfg.epsilon));
    check_params(cfg.n, eps0)?;
    let m = cfg.m_samples.unwrap_or_else(|| minimax_samples(cfg.n, cfg.epsilon));
    let ctx = LearnerContext {
        n: cfg.n,
        eps0,
        epsilon: cfg.epsilon,
    };
    let trials: Vec<MinimaxTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<MinimaxTrial> {
            let s = seed.child(t as u64);
            let inst = draw_hard_instance(cfg.n, eps0, s.named("instance"))?;
            let samples = inst.net.sampler().draw_many(m, &mut s.named("samples").rng());
            let truth = inst.net.exact_distribution()?;
            let hyp = learner.learn(&ctx, &samples)?;
            let q = hyp.dense()?;
            if q.len() != truth.len() || (q.total() - 1.0).abs() > 1e-9 || q.mass().iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::InvalidDistribution(format!(
                    "learner {} returned an invalid distribution",
                    learner.name()
                )));
            }
            let (restricted_chi2, support_mass) = match &hyp {
                Hypothesis::Restricted { support, .. } => {
                    let pair = RestrictedPair::new(truth.mass(), q.mass(), support)?;
                    (Some(pair.chi2()?), Some(pair.p_mass()))
                }
                _ => (None, None),
            };
            Ok(MinimaxTrial {
                trial: t,
                seed: s,
                chi2: chi2(truth.mass(), q.mass()),
                no_rare_sample: samples.iter().all(|x| x.bit(0) == 0),
                restricted_chi2,
                support_mass,
            })
        })
        .collect::<Result<_>>()?;

    let risks: Vec<f64> = trials.iter().map(|t| t.chi2).collect();
    let t = trials.len() as f64;
    let expected = (1.0 - eps0).powi(m as i32);
    Ok(MinimaxReport {
        learner: learner.name().to_string(),
        n: cfg.n,
        epsilon: cfg.epsilon,
        eps0,
        m_samples: m,
        seed,
        mean: kahan_sum(risks.iter().copied()) / t,
        median: numeric::median(&risks),
        quantile_90: numeric::quantile(&risks, 0.9),
        no_rare_fraction: trials.iter().filter(|t| t.no_rare_sample).count() as f64 / t,
        no_rare_expected: expected,
        no_rare_std_error: (expected * (1.0 - expected) / t).sqrt(),
        trials,
    })
}

/// `Σ a_i / q_i` at a candidate `q` and at the optimum `q*_i ∝ sqrt(a_i)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagrangeCheck {
    pub value: f64,
    pub optimum: f64,
    pub holds: bool,
}

pub fn weighted_reciprocal_min_check(a: &[f64], q: &[f64]) -> Result<LagrangeCheck> {
    if a.len() != q.len() {
        return Err(Error::DimensionMismatch(a.len(), q.len()));
    }
    if a.iter().chain(q).any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidParameter("weights must be nonnegative".into()));
    }
    if kahan_sum(q.iter().copied()) > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter("candidate weights sum above 1".into()));
    }
    let value = weighted_reciprocal(a, q);
    let roots: Vec<f64> = a.iter().map(|v| v.sqrt()).collect();
    let total = kahan_sum(roots.iter().copied());
    let optimum = if total > 0.0 {
        let star: Vec<f64> = roots.iter().map(|r| r / total).collect();
        weighted_reciprocal(a, &star)
    } else {
        0.0
    };
    Ok(LagrangeCheck {
        value,
        optimum,
        holds: value >= optimum - 1e-10,
    })
}

fn weighted_reciprocal(a: &[f64], q: &[f64]) -> f64 {
    let mut s = numeric::KahanSum::new();
    for (&ai, &qi) in a.iter().zip(q) {
        if ai > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            s.add(ai / qi);
        }
    }
    s.value()
}
