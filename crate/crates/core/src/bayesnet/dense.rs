use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Assignment, Sampler};
use crate::numeric::kahan_sum;
use crate::{Error, Result};

/// Exact probability vector indexed by the little-endian assignment encoding
/// (or, for generic categorical use, by symbol index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseFile", into = "DenseFile")]
pub struct DenseDistribution {
    mass: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseFile {
    mass: Vec<f64>,
}

impl TryFrom<DenseFile> for DenseDistribution {
    type Error = Error;
    fn try_from(f: DenseFile) -> Result<Self> {
        DenseDistribution::new(f.mass)
    }
}

impl From<DenseDistribution> for DenseFile {
    fn from(d: DenseDistribution) -> Self {
        DenseFile { mass: d.mass }
    }
}

/// Normalization tolerance for user-supplied vectors.
const SUM_TOL: f64 = 1e-9;

impl DenseDistribution {
    /// Validate nonnegativity and normalization (to within 1e-9).
    pub fn new(mass: Vec<f64>) -> Result<DenseDistribution> {
        if mass.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some((i, v)) = mass.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDistribution(format!("entry {i} is {v}")));
        }
        let total = kahan_sum(mass.iter().copied());
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(DenseDistribution { mass })
    }

    pub fn from_unnormalized(weights: Vec<f64>) -> Result<DenseDistribution> {
        if weights.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDistribution("negative or non-finite weight".into()));
        }
        let total = kahan_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("zero total weight".into()));
        }
        Ok(DenseDistribution {
            mass: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub(crate) fn from_vec_unchecked(mass: Vec<f64>) -> DenseDistribution {
        DenseDistribution { mass }
    }

    pub fn uniform(len: usize) -> DenseDistribution {
        DenseDistribution {
            mass: vec![1.0 / len as f64; len],
        }
    }

    pub fn point_mass(n: usize, x: Assignment) -> DenseDistribution {
        let mut mass = vec![0.0; 1 << n];
        mass[x.0 as usize] = 1.0;
        DenseDistribution { mass }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `n` such that the support is `{0,1}^n`, if the length is a power of two.
    pub fn n_bits(&self) -> Option<usize> {
        self.mass
            .len()
            .is_power_of_two()
            .then(|| self.mass.len().trailing_zeros() as usize)
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.mass.iter().copied())
    }

    /// Product distribution `self ⊗ other`; `self` occupies the low bits.
    pub fn tensor(&self, other: &DenseDistribution) -> DenseDistribution {
        let lo = self.mass.len();
        let mut mass = vec![0.0; lo * other.mass.len()];
        for (j, &b) in other.mass.iter().enumerate() {
            for (i, &a) in self.mass.iter().enumerate() {
                mass[j * lo + i] = a * b;
            }
        }
        DenseDistribution { mass }
    }

    /// Marginal of coordinate `i`: `Pr[X_i = 1]`.
    pub fn marginal_one(&self, i: usize) -> f64 {
        kahan_sum(
            self.mass
                .iter()
                .enumerate()
                .filter(|(x, _)| (x >> i) & 1 == 1)
                .map(|(_, &p)| p),
        )
    }

    pub fn sampler(&self) -> Result<DenseSampler> {
        let n = self
            .n_bits()
            .ok_or_else(|| Error::InvalidDistribution("length is not a power of two".into()))?;
        let index = WeightedIndex::new(&self.mass).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        Ok(DenseSampler { n, index })
    }
}

/// Sampler over `{0,1}^n` driven by an explicit probability vector.
#[derive(Clone, Debug)]
pub struct DenseSampler {
    n: usize,
    index: WeightedIndex<f64>,
}

impl Sampler for DenseSampler {
    fn n(&self) -> usize {
        self.n
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        Assignment(self.index.sample(rng) as u64)
    }
}
