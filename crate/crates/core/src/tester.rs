//! The tolerant chi-square-vs-distance tester, the fixed-graph test and the
//! all-graphs degree test.
//!
//! The statistic is the Poissonized identity statistic summed over every
//! cell of the mask `A`:
//!
//! ```text
//! Z = Σ_{x∈A} ((N_x - m q_x)² - N_x) / (m q_x) + N_out
//!   = Σ_{x∈A, N_x≥2} N_x (N_x - 1) / (m q_x) - 2 N_in + m Q(A) + N_out
//! ```
//!
//! The unobserved cells enter through `m Q(A)`, which keeps the statistic
//! unbiased under the null (`E Z = m χ²_A(P, Q)` plus the out-of-mask mass)
//! so that one threshold multiplier works across `n`. `Q(A)` is computed by
//! enumeration.

use std::collections::HashMap;

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayesnet::{enumerate_dags, Assignment, BayesNetModel, Dag, Sampler, ENUMERATION_CAP};
use crate::learner::{mass_shift, near_proper_learn, LearnerConfig, SupportMask};
use crate::numeric::{kahan_sum, KahanSum};
use crate::{calibration, Error, Result, Seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TesterMode {
    /// Mass-shift the hypothesis onto the learned support before testing.
    Hellinger,
    /// Test the unshifted hypothesis.
    Tv,
}

impl std::str::FromStr for TesterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hellinger" => Ok(TesterMode::Hellinger),
            "tv" => Ok(TesterMode::Tv),
            _ => Err(Error::InvalidParameter(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn accepted(self) -> bool {
        self == Verdict::Accept
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TesterConfig {
    /// Learner constants; `learner.epsilon` is the tester's ε as well.
    pub learner: LearnerConfig,
    /// Accept iff `Z <= gamma · m ε²`.
    pub gamma: f64,
    /// Testing-stage samples are `Poisson(m_multiplier · 2^(n/2) / ε²)`.
    pub m_multiplier: f64,
    pub mode: TesterMode,
    /// Repetitions per graph in [`test_degree`] are `c_amp ⌈ln(1/δ)⌉`, made odd.
    pub c_amp: f64,
}

impl Default for TesterConfig {
    fn default() -> Self {
        TesterConfig {
            learner: LearnerConfig::default(),
            gamma: calibration::committed().gamma.value,
            m_multiplier: 1.0,
            mode: TesterMode::Hellinger,
            c_amp: 2.0,
        }
    }
}

impl TesterConfig {
    pub fn new(epsilon: f64, mode: TesterMode) -> Self {
        TesterConfig {
            learner: LearnerConfig::with_epsilon(epsilon),
            mode,
            ..Self::default()
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.learner.epsilon
    }

    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        for (name, v) in [
            ("gamma", self.gamma),
            ("m_multiplier", self.m_multiplier),
            ("c_amp", self.c_amp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    /// Nominal testing-stage sample count `m_multiplier · 2^(n/2) / ε²`.
    pub fn nominal_m(&self, n: usize) -> f64 {
        self.m_multiplier * 2f64.powf(n as f64 / 2.0) / (self.epsilon() * self.epsilon())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub verdict: Verdict,
    pub statistic: f64,
    pub threshold: f64,
    /// Nominal (Poisson mean) sample count.
    pub m: f64,
    /// Realized number of testing-stage samples.
    pub poissonized_count: usize,
    pub seed: Option<Seed>,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub mode: TesterMode,
    pub graph: Dag,
    pub mass_shifted: bool,
    /// Samples outside the mask.
    pub n_out: usize,
    /// Hypothesis mass on the mask, `Q(A)`.
    pub q_mass_in_mask: f64,
    /// Samples used by the learning stage.
    pub learner_samples: usize,
    /// Whether `d < n/2`, the regime the sample-complexity guarantee targets.
    pub degree_regime: bool,
}

impl TestReport {
    pub fn summary(&self) -> String {
        let verdict = match self.verdict {
            Verdict::Accept => "ACCEPT",
            Verdict::Reject => "REJECT",
        };
        let mode = match self.mode {
            TesterMode::Hellinger => "hellinger",
            TesterMode::Tv => "tv",
        };
        format!(
            "{verdict} n={} d={} eps={} mode={mode} Z={:.4} threshold={:.4} m={:.1} draws={} out_of_mask={}",
            self.n, self.d, self.epsilon, self.statistic, self.threshold, self.m, self.poissonized_count, self.n_out
        )
    }
}

/// Statistic and decomposition of one tolerant test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Statistic {
    pub z: f64,
    pub n_in: usize,
    pub n_out: usize,
    pub q_mass: f64,
}

/// Compute `Z` for Poissonized samples against `q` on the mask, with nominal
/// sample count `m`.
pub fn statistic(samples: &[Assignment], q: &BayesNetModel, mask: &SupportMask, m: f64) -> Result<Statistic> {
    if q.dag != *mask.dag() {
        return Err(Error::GraphMismatch);
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "nominal sample count m = {m} must be positive"
        )));
    }
    let qd = q.exact_distribution()?;
    let inside = mask.indicator()?;
    let q_mass = kahan_sum(qd.mass().iter().zip(&inside).filter(|(_, &k)| k).map(|(&v, _)| v));

    let mut counts: HashMap<u64, u64> = HashMap::new();
    let mut n_out = 0usize;
    for x in samples {
        if !x.fits(q.n()) {
            return Err(Error::InvalidParameter(format!(
                "sample {} has more than {} bits",
                x.0,
                q.n()
            )));
        }
        if inside[x.0 as usize] {
            *counts.entry(x.0).or_default() += 1;
        } else {
            n_out += 1;
        }
    }
    let n_in = samples.len() - n_out;
    // Deterministic summation order.
    let mut cells: Vec<(u64, u64)> = counts.into_iter().collect();
    cells.sort_unstable();
    let mut z = KahanSum::new();
    for (x, c) in cells {
        let qx = qd.mass()[x as usize];
        if qx <= 0.0 {
            return Err(Error::ZeroMassInSupport(x));
        }
        if c >= 2 {
            let c = c as f64;
            z.add(c * (c - 1.0) / (m * qx));
        }
    }
    z.add(-2.0 * n_in as f64);
    z.add(m * q_mass);
    z.add(n_out as f64);
    Ok(Statistic {
        z: z.value(),
        n_in,
        n_out,
        q_mass,
    })
}

/// Accept iff the statistic is at most `gamma · m ε²`.
pub fn tolerant_test(
    samples: &[Assignment],
    q_tilde: &BayesNetModel,
    mask: &SupportMask,
    m: f64,
    cfg: &TesterConfig,
) -> Result<TestReport> {
    cfg.validate()?;
    let s = statistic(samples, q_tilde, mask, m)?;
    let eps = cfg.epsilon();
    let threshold = cfg.gamma * m * eps * eps;
    let n = q_tilde.n();
    let d = cfg.learner.degree(&q_tilde.dag)?;
    Ok(TestReport {
        verdict: if s.z <= threshold {
            Verdict::Accept
        } else {
            Verdict::Reject
        },
        statistic: s.z,
        threshold,
        m,
        poissonized_count: samples.len(),
        seed: None,
        n,
        d,
        epsilon: eps,
        mode: cfg.mode,
        graph: q_tilde.dag.clone(),
        mass_shifted: false,
        n_out: s.n_out,
        q_mass_in_mask: s.q_mass,
        learner_samples: 0,
        degree_regime: 2 * d < n,
    })
}

/// Learn on `dag`, mass-shift in Hellinger mode, and test against
/// `Poisson(m)` fresh samples.
pub fn test_graph<S: Sampler>(sampler: &S, dag: &Dag, cfg: &TesterConfig, seed: Seed) -> Result<TestReport> {
    cfg.validate()?;
    let learned = near_proper_learn(sampler, dag, &cfg.learner, seed.named("learner"))?;
    let (hypothesis, shifted) = match cfg.mode {
        TesterMode::Hellinger => (mass_shift(&learned.q, &learned.mask)?, true),
        TesterMode::Tv => (learned.q, false),
    };
    let m = cfg.nominal_m(dag.n);
    let mut rng = seed.named("tester").rng();
    let count = Poisson::new(m)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(&mut rng) as usize;
    let samples = sampler.draw_many(count, &mut rng);
    let mut report = tolerant_test(&samples, &hypothesis, &learned.mask, m, cfg)?;
    report.seed = Some(seed);
    report.mass_shifted = shifted;
    report.learner_samples = learned.support_samples + learned.learning_samples;
    Ok(report)
}

/// Majority vote of an odd number of runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Amplified {
    pub verdict: Verdict,
    pub accepts: usize,
    pub reps: usize,
}

/// Run `test(rep)` for `rep in 0..reps` (in parallel) and take the majority.
pub fn amplify<F>(reps: usize, test: F) -> Result<Amplified>
where
    F: Fn(usize) -> Result<Verdict> + Sync,
{
    if reps.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "majority vote needs an odd repetition count, got {reps}"
        )));
    }
    let verdicts: Vec<Verdict> = (0..reps).into_par_iter().map(&test).collect::<Result<_>>()?;
    let accepts = verdicts.iter().filter(|v| v.accepted()).count();
    Ok(Amplified {
        verdict: if 2 * accepts > reps {
            Verdict::Accept
        } else {
            Verdict::Reject
        },
        accepts,
        reps,
    })
}

/// `c_amp ⌈ln(1/δ)⌉` with `δ = n^(-dn)`, rounded up to an odd count.
pub fn amplification_reps(n: usize, d: usize, c_amp: f64) -> usize {
    let log_inv_delta = (d * n) as f64 * (n.max(1) as f64).ln();
    let r = (c_amp * (log_inv_delta - 1e-9).ceil().max(0.0)).ceil() as usize;
    if r.is_multiple_of(2) {
        r + 1
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphOutcome {
    pub index: usize,
    pub graph: Dag,
    pub vote: Amplified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub verdict: Verdict,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub mode: TesterMode,
    pub seed: Seed,
    pub reps: usize,
    pub accepting_graph: Option<Dag>,
    /// Graphs tested, in canonical order, up to and including the first
    /// accepting one.
    pub tested: Vec<GraphOutcome>,
    pub degree_regime: bool,
}

/// Test every graph of in-degree at most `d` in canonical order, each with a
/// majority vote, and accept at the first graph that passes.
pub fn test_degree<S: Sampler>(
    sampler: &S,
    n: usize,
    d: usize,
    cfg: &TesterConfig,
    seed: Seed,
) -> Result<DegreeReport> {
    cfg.validate()?;
    if sampler.n() != n {
        return Err(Error::DimensionMismatch(sampler.n(), n));
    }
    if n > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            what: "graph-enumeration",
            n,
            cap: ENUMERATION_CAP,
        });
    }
    let reps = amplification_reps(n, d, cfg.c_amp);
    let mut per_graph = cfg.clone();
    per_graph.learner.degree_bound = Some(d);
    let mut tested = Vec::new();
    let mut accepting = None;
    for (index, dag) in enumerate_dags(n, d)?.enumerate() {
        let graph_seed = seed.child(index as u64);
        let vote = amplify(reps, |r| {
            Ok(test_graph(sampler, &dag, &per_graph, graph_seed.child(r as u64))?.verdict)
        })?;
        let accepted = vote.verdict.accepted();
        tested.push(GraphOutcome {
            index,
            graph: dag.clone(),
            vote,
        });
        if accepted {
            accepting = Some(dag);
            break;
        }
    }
    Ok(DegreeReport {
        verdict: if accepting.is_some() {
            Verdict::Accept
        } else {
            Verdict::Reject
        },
        n,
        d,
        epsilon: cfg.epsilon(),
        mode: cfg.mode,
        seed,
        reps,
        accepting_graph: accepting,
        tested,
        degree_regime: 2 * d < n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DenseDistribution;

    fn uniform_net(n: usize) -> BayesNetModel {
        BayesNetModel::product(&vec![0.5; n]).unwrap()
    }

    #[test]
    fn statistic_by_hand() {
        let q = uniform_net(2);
        let mask = SupportMask::full(&q.dag).unwrap();
        let samples = [Assignment(0), Assignment(0), Assignment(3)];
        let m = 4.0;
        // Full sum of ((N - m q)^2 - N) / (m q) with m q = 1 in every cell:
        // x=0: (1 - 2)/1, x=3: (0 - 1)/1, x=1,2: (1 - 0)/1 each.
        let s = statistic(&samples, &q, &mask, m).unwrap();
        assert!(s.z.abs() < 1e-12, "{}", s.z);
        let s = statistic(&[Assignment(0); 3], &q, &mask, m).unwrap();
        // x=0: (4 - 3)/1, other three cells: 1 each.
        assert!((s.z - 4.0).abs() < 1e-12, "{}", s.z);
    }

    #[test]
    fn empty_sample_gives_m_times_mask_mass() {
        let q = uniform_net(3);
        let mask = SupportMask::from_excluded(&q.dag, &[(0, 1, 0)]).unwrap();
        let s = statistic(&[], &q, &mask, 10.0).unwrap();
        assert!((s.z - 5.0).abs() < 1e-12);
        assert_eq!(s.n_out, 0);
    }

    #[test]
    fn out_of_mask_samples_add_one_each() {
        let q = uniform_net(3);
        let mask = SupportMask::from_excluded(&q.dag, &[(0, 1, 0)]).unwrap();
        let base = statistic(&[Assignment(0)], &q, &mask, 10.0).unwrap().z;
        let more = statistic(&[Assignment(0), Assignment(1), Assignment(3)], &q, &mask, 10.0).unwrap();
        assert_eq!(more.n_out, 2);
        assert!((more.z - base - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_in_mask_is_an_error() {
        let q = BayesNetModel::product(&[1.0, 0.5]).unwrap();
        let mask = SupportMask::full(&q.dag).unwrap();
        assert!(matches!(
            statistic(&[Assignment(0)], &q, &mask, 4.0),
            Err(Error::ZeroMassInSupport(0))
        ));
    }

    #[test]
    fn statistic_is_deterministic() {
        let q = uniform_net(4);
        let mask = SupportMask::full(&q.dag).unwrap();
        let samples = q.sample(100, Seed(1));
        let a = statistic(&samples, &q, &mask, 100.0).unwrap();
        let mut rev = samples.clone();
        rev.reverse();
        assert_eq!(a, statistic(&rev, &q, &mask, 100.0).unwrap());
    }

    #[test]
    fn null_mean_is_near_zero() {
        let q = uniform_net(6);
        let mask = SupportMask::full(&q.dag).unwrap();
        let m = 200.0;
        let mut total = 0.0;
        let trials = 400;
        for t in 0..trials {
            let mut rng = Seed(t).rng();
            let c = Poisson::new(m).unwrap().sample(&mut rng) as usize;
            let samples = q.sampler().draw_many(c, &mut rng);
            total += statistic(&samples, &q, &mask, m).unwrap().z;
        }
        // Per-trial standard deviation is about sqrt(2 · 64).
        let mean = total / trials as f64;
        assert!(mean.abs() < 4.0 * (128f64).sqrt() / (trials as f64).sqrt(), "{mean}");
    }

    #[test]
    fn point_mass_hypothesis_against_uniform_rejects() {
        let n = 6;
        let p = uniform_net(n);
        let q = BayesNetModel::product(&vec![1.0; n]).unwrap();
        let ones = SupportMask::from_excluded(&q.dag, &(0..n).map(|i| (i, 0u8, 0usize)).collect::<Vec<_>>()).unwrap();
        for eps in [0.1, 0.25, 0.5] {
            let cfg = TesterConfig::new(eps, TesterMode::Tv);
            for s in 0..10 {
                let m = cfg.nominal_m(n);
                let mut rng = Seed(s).rng();
                let c = Poisson::new(m).unwrap().sample(&mut rng) as usize;
                let samples = p.sampler().draw_many(c, &mut rng);
                let r = tolerant_test(&samples, &q, &ones, m, &cfg).unwrap();
                assert_eq!(r.verdict, Verdict::Reject, "eps {eps} seed {s}: {r:?}");
            }
        }
    }

    #[test]
    fn amplify_votes() {
        let all = amplify(5, |_| Ok(Verdict::Accept)).unwrap();
        assert_eq!((all.verdict, all.accepts), (Verdict::Accept, 5));
        let v = [Verdict::Accept, Verdict::Reject, Verdict::Accept];
        assert_eq!(amplify(3, |r| Ok(v[r])).unwrap().verdict, Verdict::Accept);
        assert!(amplify(4, |_| Ok(Verdict::Accept)).is_err());
        assert!(amplify(0, |_| Ok(Verdict::Accept)).is_err());
    }

    #[test]
    fn amplification_rep_counts() {
        assert_eq!(amplification_reps(3, 0, 2.0), 1);
        // ln(1/δ) = 3 ln 3 ≈ 3.30, so 2 · 4 = 8, made odd.
        assert_eq!(amplification_reps(3, 1, 2.0), 9);
        assert!(amplification_reps(5, 2, 2.0) % 2 == 1);
    }

    #[test]
    fn modes_control_mass_shifting() {
        let p = uniform_net(4);
        for (mode, shifted) in [(TesterMode::Hellinger, true), (TesterMode::Tv, false)] {
            let cfg = TesterConfig::new(0.4, mode);
            let r = test_graph(&p.sampler(), &p.dag, &cfg, Seed(3)).unwrap();
            assert_eq!(r.mass_shifted, shifted);
            assert_eq!(r.seed, Some(Seed(3)));
            assert!(r.learner_samples > 0);
        }
    }

    #[test]
    fn deterministic_instance_accepts() {
        let dag = Dag::chain(4);
        let p = BayesNetModel::new(
            dag.clone(),
            vec![vec![1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let cfg = TesterConfig::new(0.3, TesterMode::Hellinger);
        for s in 0..5 {
            let r = test_graph(&p.sampler(), &dag, &cfg, Seed(s)).unwrap();
            assert_eq!(r.verdict, Verdict::Accept, "{r:?}");
        }
    }

    #[test]
    fn test_degree_on_product_accepts_empty_graph() {
        let p = BayesNetModel::product(&[0.3, 0.6, 0.5]).unwrap();
        let cfg = TesterConfig::new(0.25, TesterMode::Hellinger);
        let r = test_degree(&p.sampler(), 3, 0, &cfg, Seed(4)).unwrap();
        assert_eq!(r.verdict, Verdict::Accept);
        assert_eq!(r.accepting_graph, Some(Dag::empty(3)));
        assert_eq!(r.reps, 1);
    }

    #[test]
    fn test_degree_respects_cap() {
        let p = DenseDistribution::uniform(64).sampler().unwrap();
        let cfg = TesterConfig::new(0.25, TesterMode::Tv);
        assert!(matches!(
            test_degree(&p, 6, 1, &cfg, Seed(0)),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("tv".parse::<TesterMode>().unwrap(), TesterMode::Tv);
        assert!("l2".parse::<TesterMode>().is_err());
        assert_eq!(serde_json::to_string(&TesterMode::Hellinger).unwrap(), "\"hellinger\"");
    }
}
