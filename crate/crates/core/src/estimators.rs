//! The add-K estimator family and a Monte Carlo harness for its
//! high-probability chi-square risk.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayesnet::{Assignment, DenseDistribution};
use crate::divergence::chi2;
use crate::numeric::{self, kahan_sum};
use crate::{Error, Result, Seed};

/// Per-symbol occurrence counts over a finite alphabet `0..domain_size`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    counts: Vec<u64>,
    total: u64,
}

impl SampleCounts {
    pub fn new(domain_size: usize) -> SampleCounts {
        SampleCounts {
            counts: vec![0; domain_size],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> SampleCounts {
        let total = counts.iter().sum();
        SampleCounts { counts, total }
    }

    /// Counts of full assignments over the `2^n` domain.
    pub fn from_assignments(n: usize, samples: &[Assignment]) -> Result<SampleCounts> {
        let mut c = SampleCounts::new(1usize << n);
        for x in samples {
            c.record(x.0 as usize)?;
        }
        Ok(c)
    }

    pub fn record(&mut self, symbol: usize) -> Result<()> {
        let slot = self
            .counts
            .get_mut(symbol)
            .ok_or_else(|| Error::InvalidParameter(format!("symbol {symbol} outside the alphabet")))?;
        *slot += 1;
        self.total += 1;
        Ok(())
    }

    pub fn domain_size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Draw multinomial counts of `n` samples from `p` by a chain of
    /// conditional binomials (`O(|Σ|)` regardless of `n`).
    pub fn sample_multinomial<R: Rng + ?Sized>(p: &[f64], n: u64, rng: &mut R) -> SampleCounts {
        let mut counts = vec![0u64; p.len()];
        let mut left = n;
        let mut rest = 1.0f64;
        for (i, &pi) in p.iter().enumerate() {
            if left == 0 {
                break;
            }
            if i + 1 == p.len() || rest <= pi {
                counts[i] = left;
                break;
            }
            let prob = (pi / rest).clamp(0.0, 1.0);
            let c = Binomial::new(left, prob).expect("probability in [0, 1]").sample(rng);
            counts[i] = c;
            left -= c;
            rest -= pi;
        }
        SampleCounts { counts, total: n }
    }
}

/// `(N_i + k) / (N + k |Σ|)`.
pub fn add_k_estimate(counts: &SampleCounts, k: f64) -> Result<DenseDistribution> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "smoothing k = {k} must be finite and >= 0"
        )));
    }
    if counts.domain_size() == 0 {
        return Err(Error::InvalidParameter("empty alphabet".into()));
    }
    if k == 0.0 && counts.total == 0 {
        return Err(Error::InvalidParameter(
            "empirical estimate (k = 0) of zero samples".into(),
        ));
    }
    let denom = counts.total as f64 + k * counts.domain_size() as f64;
    let mass = counts.counts.iter().map(|&c| (c as f64 + k) / denom).collect();
    Ok(DenseDistribution::from_vec_unchecked(mass))
}

/// Default constant in [`choose_k`].
pub const DEFAULT_C_K: f64 = 1.0;

/// `max(1, ⌈c_k ln(1/δ)⌉)`. A `1e-9` slack before rounding up keeps values
/// like `δ = e^-5` from landing one above the intended integer.
pub fn choose_k(delta: f64, c_k: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} not in (0, 1]")));
    }
    if !(c_k > 0.0 && c_k.is_finite()) {
        return Err(Error::InvalidParameter(format!("c_K = {c_k} must be positive")));
    }
    Ok((c_k * (1.0 / delta).ln() - 1e-9).ceil().max(1.0))
}

/// Parameters of [`high_prob_risk_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskExperiment {
    pub n_samples: u64,
    pub k: f64,
    pub trials: usize,
    pub delta: f64,
    /// Exceedance is measured against `bound_multiple · |Σ| ln(|Σ|/δ) / N`.
    pub bound_multiple: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskTrial {
    pub trial: usize,
    pub seed: Seed,
    #[serde(with = "numeric::extended_f64")]
    pub chi2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub config: RiskExperiment,
    pub domain_size: usize,
    pub seed: Seed,
    pub bound: f64,
    /// Empirical `(1 - δ)`-quantile of the per-trial chi-square risk.
    #[serde(with = "numeric::extended_f64")]
    pub quantile: f64,
    #[serde(with = "numeric::extended_f64")]
    pub mean: f64,
    pub exceed_fraction: f64,
    pub trials: Vec<RiskTrial>,
}

/// Run independent add-K trials against target `p`: each trial draws
/// `n_samples` counts from `p` on its own substream, smooths them with `k`
/// and records `chi2(p, estimate)`.
pub fn high_prob_risk_experiment(p: &DenseDistribution, cfg: &RiskExperiment, seed: Seed) -> Result<RiskReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    if !(cfg.delta > 0.0 && cfg.delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta = {} not in (0, 1]", cfg.delta)));
    }
    let size = p.len();
    // Validate k once up front so trials cannot fail.
    add_k_estimate(&SampleCounts::new(size), cfg.k.max(f64::MIN_POSITIVE))?;
    if cfg.k == 0.0 && cfg.n_samples == 0 {
        return Err(Error::InvalidParameter(
            "empirical estimate (k = 0) of zero samples".into(),
        ));
    }
    let trials: Vec<RiskTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let s = seed.child(t as u64);
            let counts = SampleCounts::sample_multinomial(p.mass(), cfg.n_samples, &mut s.rng());
            let est = add_k_estimate(&counts, cfg.k).expect("validated above");
            RiskTrial {
                trial: t,
                seed: s,
                chi2: chi2(p.mass(), est.mass()),
            }
        })
        .collect();
    let risks: Vec<f64> = trials.iter().map(|t| t.chi2).collect();
    let bound = risk_bound(size, cfg.n_samples, cfg.delta, cfg.bound_multiple);
    let exceed = risks.iter().filter(|&&r| r > bound).count();
    Ok(RiskReport {
        config: cfg.clone(),
        domain_size: size,
        seed,
        bound,
        quantile: numeric::quantile(&risks, 1.0 - cfg.delta),
        mean: kahan_sum(risks.iter().copied()) / risks.len() as f64,
        exceed_fraction: exceed as f64 / risks.len() as f64,
        trials,
    })
}

/// `multiple · |Σ| ln(|Σ|/δ) / N`.
pub fn risk_bound(domain_size: usize, n_samples: u64, delta: f64, multiple: f64) -> f64 {
    multiple * domain_size as f64 * (domain_size as f64 / delta).ln() / n_samples as f64
}

/// Sample size `⌈c (|Σ|/ε) ln(|Σ|/δ)⌉` at which the risk bound equals `ε`.
pub fn sample_size_for(domain_size: usize, eps: f64, delta: f64, c: f64) -> u64 {
    (c * domain_size as f64 / eps * (domain_size as f64 / delta).ln()).ceil() as u64
}

/// `p_i ∝ ratio^i`.
pub fn geometric_target(size: usize, ratio: f64) -> Result<DenseDistribution> {
    DenseDistribution::from_unnormalized((0..size).map(|i| ratio.powi(i as i32)).collect())
}

/// The first half of the symbols share `heavy` of the mass, the rest share
/// `1 - heavy`.
pub fn two_level_target(size: usize, heavy: f64) -> Result<DenseDistribution> {
    if size < 2 || !(0.0..=1.0).contains(&heavy) {
        return Err(Error::InvalidParameter(
            "two-level target needs size >= 2 and heavy in [0, 1]".into(),
        ));
    }
    let h = size / 2;
    let l = size - h;
    DenseDistribution::new(
        (0..size)
            .map(|i| {
                if i < h {
                    heavy / h as f64
                } else {
                    (1.0 - heavy) / l as f64
                }
            })
            .collect(),
    )
}
