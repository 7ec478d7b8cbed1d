use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Assignment, Dag, DenseDistribution, Sampler, Violation, ORACLE_CAP};
use crate::numeric::kahan_sum;
use crate::{Error, Result, Seed};

/// A Bayes net on `{0,1}^n`: a graph plus, for each node `i` and parent
/// configuration `a`, the probability `p_{i,a} = Pr[X_i = 1 | Π_i = a]`.
///
/// JSON form: `{"n": .., "parents": [[..], ..], "cpt": [[..], ..]}` where
/// `cpt[i][a]` uses the parent-configuration index of [`Dag::parent_config`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetFile", into = "NetFile")]
pub struct BayesNetModel {
    pub dag: Dag,
    pub cpt: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetFile {
    n: usize,
    parents: Vec<Vec<usize>>,
    cpt: Vec<Vec<f64>>,
}

impl TryFrom<NetFile> for BayesNetModel {
    type Error = Error;

    fn try_from(f: NetFile) -> Result<Self> {
        let net = BayesNetModel {
            dag: Dag {
                n: f.n,
                parents: f.parents,
            },
            cpt: f.cpt,
        };
        let mut v = net.dag.violations(None);
        v.extend(net.cpt_violations());
        if v.is_empty() {
            Ok(net)
        } else {
            Err(Error::InvalidNet(v))
        }
    }
}

impl From<BayesNetModel> for NetFile {
    fn from(m: BayesNetModel) -> Self {
        NetFile {
            n: m.dag.n,
            parents: m.dag.parents,
            cpt: m.cpt,
        }
    }
}

impl BayesNetModel {
    /// Build a net, rejecting any structural or CPT violation.
    pub fn new(dag: Dag, cpt: Vec<Vec<f64>>) -> Result<BayesNetModel> {
        NetFile {
            n: dag.n,
            parents: dag.parents,
            cpt,
        }
        .try_into()
    }

    /// Independent bits with `Pr[X_i = 1] = p[i]`.
    pub fn product(p: &[f64]) -> Result<BayesNetModel> {
        BayesNetModel::new(Dag::empty(p.len()), p.iter().map(|&v| vec![v]).collect())
    }

    /// Random CPT entries drawn uniformly from `[lo, hi]`.
    pub fn random_cpt<R: Rng + ?Sized>(dag: Dag, lo: f64, hi: f64, rng: &mut R) -> BayesNetModel {
        let cpt = (0..dag.n)
            .map(|i| (0..dag.config_count(i)).map(|_| rng.random_range(lo..=hi)).collect())
            .collect();
        BayesNetModel { dag, cpt }
    }

    pub fn n(&self) -> usize {
        self.dag.n
    }

    pub(crate) fn cpt_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.cpt.len() != self.dag.n {
            out.push(Violation::CptRowCount {
                declared: self.dag.n,
                actual: self.cpt.len(),
            });
            return out;
        }
        for (i, row) in self.cpt.iter().enumerate() {
            let expected = self
                .dag
                .parents
                .get(i)
                .map(|p| 1usize.checked_shl(p.len() as u32).unwrap_or(0))
                .unwrap_or(0);
            if row.len() != expected {
                out.push(Violation::CptLength {
                    node: i,
                    expected,
                    actual: row.len(),
                });
            }
            for (a, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    out.push(Violation::CptOutOfRange {
                        node: i,
                        config: a,
                        value: format!("{p}"),
                    });
                }
            }
        }
        out
    }

    /// `Pr[X_i = b | Π_i = a]`.
    #[inline]
    pub fn conditional(&self, i: usize, a: usize, b: u8) -> f64 {
        let p1 = self.cpt[i][a];
        if b == 1 {
            p1
        } else {
            1.0 - p1
        }
    }

    /// `∏_i Pr[x_i | π_i(x)]`.
    pub fn exact_probability(&self, x: Assignment) -> f64 {
        (0..self.dag.n)
            .map(|i| self.conditional(i, self.dag.parent_config(i, x.0), x.bit(i)))
            .product()
    }

    /// Dense vector of all `2^n` probabilities (default cap [`ORACLE_CAP`]).
    pub fn exact_distribution(&self) -> Result<DenseDistribution> {
        self.exact_distribution_with_cap(ORACLE_CAP)
    }

    pub fn exact_distribution_with_cap(&self, cap: usize) -> Result<DenseDistribution> {
        let n = self.dag.n;
        if n > cap {
            return Err(Error::CapExceeded {
                what: "exact-oracle",
                n,
                cap,
            });
        }
        // Build the joint in topological order: after step t the vector holds
        // the marginal over the first t nodes of the order, stored at the full
        // little-endian index with all later bits zero.
        let order = self.dag.topological_order()?;
        let mut mass = vec![0.0; 1usize << n];
        mass[0] = 1.0;
        let mut filled: Vec<u64> = vec![0];
        for &i in &order {
            let bit = 1u64 << i;
            let mut next = Vec::with_capacity(filled.len() * 2);
            for &x in &filled {
                let base = mass[x as usize];
                let a = self.dag.parent_config(i, x);
                let p1 = self.cpt[i][a];
                mass[x as usize] = base * (1.0 - p1);
                mass[(x | bit) as usize] = base * p1;
                next.push(x);
                next.push(x | bit);
            }
            filled = next;
        }
        Ok(DenseDistribution::from_vec_unchecked(mass))
    }

    pub fn sampler(&self) -> AncestralSampler<'_> {
        AncestralSampler {
            net: self,
            order: self.dag.topological_order().expect("BayesNetModel graphs are acyclic"),
        }
    }

    /// `m` i.i.d. ancestral samples, reproducible from `seed`.
    pub fn sample(&self, m: usize, seed: Seed) -> Vec<Assignment> {
        self.sampler().draw_many(m, &mut seed.rng())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<BayesNetModel> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Ancestral sampler with a precomputed topological order.
pub struct AncestralSampler<'a> {
    net: &'a BayesNetModel,
    order: Vec<usize>,
}

impl Sampler for AncestralSampler<'_> {
    fn n(&self) -> usize {
        self.net.dag.n
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        let mut x = 0u64;
        for &i in &self.order {
            let a = self.net.dag.parent_config(i, x);
            if rng.random::<f64>() < self.net.cpt[i][a] {
                x |= 1 << i;
            }
        }
        Assignment(x)
    }
}

/// The net on `dag` whose conditionals are the exact conditionals of `p`.
///
/// Parent configurations with zero mass under `p` get CPT entry 0.5.
pub fn kl_projection(p: &DenseDistribution, dag: &Dag) -> Result<BayesNetModel> {
    let n = p
        .n_bits()
        .ok_or_else(|| Error::InvalidDistribution("length is not a power of two".into()))?;
    if n != dag.n {
        return Err(Error::DimensionMismatch(n, dag.n));
    }
    let v = dag.violations(None);
    if !v.is_empty() {
        return Err(Error::InvalidNet(v));
    }
    let mass = p.mass();
    let cpt = (0..n)
        .map(|i| {
            let k = dag.config_count(i);
            let mut ones = vec![Vec::new(); k];
            let mut totals = vec![Vec::new(); k];
            for (x, &px) in mass.iter().enumerate() {
                let a = dag.parent_config(i, x as u64);
                totals[a].push(px);
                if (x >> i) & 1 == 1 {
                    ones[a].push(px);
                }
            }
            (0..k)
                .map(|a| {
                    let t = kahan_sum(totals[a].iter().copied());
                    if t > 0.0 {
                        (kahan_sum(ones[a].iter().copied()) / t).clamp(0.0, 1.0)
                    } else {
                        0.5
                    }
                })
                .collect()
        })
        .collect();
    Ok(BayesNetModel { dag: dag.clone(), cpt })
}
