//! Instance builders shared by tests, calibration and the CLI.

use rand::Rng;

use crate::bayesnet::{BayesNetModel, Dag, DenseDistribution};
use crate::{Error, Result};

/// A random graph of in-degree `d` with CPT entries uniform in `[lo, hi]`.
pub fn random_markov<R: Rng + ?Sized>(n: usize, d: usize, lo: f64, hi: f64, rng: &mut R) -> BayesNetModel {
    let dag = Dag::random(n, d, rng);
    BayesNetModel::random_cpt(dag, lo, hi, rng)
}

/// Uniform over the even-parity strings of `k` bits.
pub fn even_parity(k: usize) -> Result<DenseDistribution> {
    if k == 0 {
        return Err(Error::InvalidParameter("parity needs at least one bit".into()));
    }
    DenseDistribution::from_unnormalized(
        (0..1u64 << k)
            .map(|x| if x.count_ones() % 2 == 0 { 1.0 } else { 0.0 })
            .collect(),
    )
}

/// `core ⊗ uniform(extra bits)`; the core occupies the low bits.
pub fn pad_uniform(core: &DenseDistribution, extra: usize) -> DenseDistribution {
    core.tensor(&DenseDistribution::uniform(1usize << extra))
}

/// Markov chain on `n` bits: `X_0 ~ Bern(1/2)`, then each bit copies its
/// predecessor with probability `stay`.
pub fn sticky_chain(n: usize, stay: f64) -> Result<BayesNetModel> {
    let mut cpt = vec![vec![0.5]];
    cpt.extend((1..n).map(|_| vec![1.0 - stay, stay]));
    BayesNetModel::new(Dag::chain(n), cpt)
}
