//! Effective-support identification, near-proper learning on a fixed graph,
//! and mass shifting onto the learned support.
//!
//! Prefixes `S~_k` are taken along [`Dag::topological_order`], so callers
//! never need to relabel their graphs.

use serde::{Deserialize, Serialize};

use crate::bayesnet::{Assignment, BayesNetModel, Dag, DenseDistribution, Sampler, ORACLE_CAP};
use crate::divergence::RestrictedPair;
use crate::numeric::kahan_sum;
use crate::{Error, Result, Seed};

/// Constants of the support-identification and learning stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub epsilon: f64,
    /// Threshold constant `c`.
    pub c: f64,
    pub m1_multiplier: f64,
    pub m2_multiplier: f64,
    /// Replaces the smoothing `⌈ln(6 · 2^(d+1) n)⌉` when set.
    pub k_override: Option<f64>,
    /// Degree `d` used in the sample-size formulas. Defaults to the graph's
    /// own maximum in-degree.
    pub degree_bound: Option<usize>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            epsilon: 0.25,
            c: 1.0,
            m1_multiplier: 3.0,
            m2_multiplier: 4.0,
            k_override: None,
            degree_bound: None,
        }
    }
}

impl LearnerConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        LearnerConfig {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} not in (0, 1)",
                self.epsilon
            )));
        }
        for (name, v) in [
            ("c", self.c),
            ("m1_multiplier", self.m1_multiplier),
            ("m2_multiplier", self.m2_multiplier),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if let Some(k) = self.k_override {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!("k_override = {k} must be >= 0")));
            }
        }
        Ok(())
    }

    /// The degree `d` for `dag`, checked against the declared bound.
    pub fn degree(&self, dag: &Dag) -> Result<usize> {
        let actual = dag.max_in_degree();
        match self.degree_bound {
            Some(d) if d < actual => Err(Error::InvalidParameter(format!(
                "graph has in-degree {actual} above the declared bound {d}"
            ))),
            Some(d) => Ok(d),
            None => Ok(actual),
        }
    }

    /// `⌈m1_mult · 2^(d+1) n ln(6 · 2^(d+1) n) / (c ε²)⌉`.
    pub fn support_samples(&self, n: usize, d: usize) -> usize {
        let base = pow2(d + 1) * n as f64;
        (self.m1_multiplier * base * (6.0 * base).ln() / (self.c * self.epsilon * self.epsilon)).ceil() as usize
    }

    /// `⌈m2_mult · c · 2^d n² ln(max(2^d n, 2)) / ε²⌉`.
    pub fn learning_samples(&self, n: usize, d: usize) -> usize {
        let nf = n as f64;
        let log = (pow2(d) * nf).max(2.0).ln();
        (self.m2_multiplier * self.c * pow2(d) * nf * nf * log / (self.epsilon * self.epsilon)).ceil() as usize
    }

    /// Exclusion threshold `2 c ε² / (2^(d+1) n)` on empirical pair frequencies.
    pub fn threshold(&self, n: usize, d: usize) -> f64 {
        2.0 * self.c * self.epsilon * self.epsilon / (pow2(d + 1) * n as f64)
    }

    /// Smoothing `K`, `⌈ln(6 · 2^(d+1) n)⌉` unless overridden.
    pub fn smoothing(&self, n: usize, d: usize) -> f64 {
        self.k_override
            .unwrap_or_else(|| (6.0 * pow2(d + 1) * n as f64).ln().ceil())
    }
}

fn pow2(k: usize) -> f64 {
    2f64.powi(k as i32)
}

#[inline]
fn slot(a: usize, b: u8) -> usize {
    (a << 1) | b as usize
}

/// Keep/exclude table over `(i, x_i, π_i)` triples. An assignment belongs to
/// `S~_k` iff every one of the first `k` nodes (in topological order) has its
/// triple kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportMask {
    dag: Dag,
    order: Vec<usize>,
    keep: Vec<Vec<bool>>,
}

/// One excluded triple `(node, value, parent configuration)`.
pub type ExcludedPair = (usize, u8, usize);

impl SupportMask {
    /// The mask that keeps every pair.
    pub fn full(dag: &Dag) -> Result<SupportMask> {
        let order = dag.topological_order()?;
        let keep = (0..dag.n).map(|i| vec![true; 2 * dag.config_count(i)]).collect();
        Ok(SupportMask {
            dag: dag.clone(),
            order,
            keep,
        })
    }

    pub fn from_excluded(dag: &Dag, excluded: &[ExcludedPair]) -> Result<SupportMask> {
        let mut m = SupportMask::full(dag)?;
        for &(i, b, a) in excluded {
            if i >= dag.n || b > 1 || a >= dag.config_count(i) {
                return Err(Error::InvalidParameter(format!(
                    "mask triple ({i}, {b}, {a}) out of range"
                )));
            }
            m.exclude(i, b, a);
        }
        Ok(m)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// Topological order defining the prefixes.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn keeps(&self, i: usize, b: u8, a: usize) -> bool {
        self.keep[i][slot(a, b)]
    }

    pub fn exclude(&mut self, i: usize, b: u8, a: usize) {
        self.keep[i][slot(a, b)] = false;
    }

    /// Excluded triples in `(node, config, value)` order.
    pub fn excluded(&self) -> Vec<ExcludedPair> {
        let mut out = Vec::new();
        for (i, row) in self.keep.iter().enumerate() {
            for (s, &k) in row.iter().enumerate() {
                if !k {
                    out.push((i, (s & 1) as u8, s >> 1));
                }
            }
        }
        out
    }

    pub fn is_full(&self) -> bool {
        self.keep.iter().all(|r| r.iter().all(|&k| k))
    }

    fn node_keeps(&self, i: usize, x: u64) -> bool {
        self.keeps(i, ((x >> i) & 1) as u8, self.dag.parent_config(i, x))
    }

    /// Membership in `S~_n`.
    pub fn contains(&self, x: Assignment) -> bool {
        (0..self.dag.n).all(|i| self.node_keeps(i, x.0))
    }

    /// Membership in `S~_k`: only the first `k` nodes of the order are
    /// checked, so bits of later nodes are ignored.
    pub fn contains_prefix(&self, x: Assignment, k: usize) -> bool {
        self.order[..k.min(self.dag.n)].iter().all(|&i| self.node_keeps(i, x.0))
    }

    /// Indicator of `S~_n` over all `2^n` assignments.
    pub fn indicator(&self) -> Result<Vec<bool>> {
        let n = self.dag.n;
        if n > ORACLE_CAP {
            return Err(Error::CapExceeded {
                what: "exact-oracle",
                n,
                cap: ORACLE_CAP,
            });
        }
        Ok((0..1u64 << n).map(|x| self.contains(Assignment(x))).collect())
    }

    /// `P(S~_n)` for a dense `p`.
    pub fn mass_of(&self, p: &DenseDistribution) -> Result<f64> {
        if p.len() != 1usize << self.dag.n {
            return Err(Error::DimensionMismatch(p.len(), 1usize << self.dag.n));
        }
        let ind = self.indicator()?;
        Ok(kahan_sum(
            p.mass().iter().zip(&ind).filter(|(_, &k)| k).map(|(&v, _)| v),
        ))
    }

    /// Excluded triples as a JSON list of `[i, x_i, π_i]`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.excluded()).expect("serializable")
    }

    pub fn from_json(dag: &Dag, s: &str) -> Result<SupportMask> {
        let triples: Vec<ExcludedPair> = serde_json::from_str(s)?;
        SupportMask::from_excluded(dag, &triples)
    }
}

/// Counts `N_{x_i, π_i}` indexed as `counts[i][(π_i << 1) | x_i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairCounts {
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl PairCounts {
    pub fn from_samples(dag: &Dag, samples: &[Assignment]) -> PairCounts {
        let mut counts: Vec<Vec<u64>> = (0..dag.n).map(|i| vec![0; 2 * dag.config_count(i)]).collect();
        for x in samples {
            for (i, row) in counts.iter_mut().enumerate() {
                row[slot(dag.parent_config(i, x.0), x.bit(i))] += 1;
            }
        }
        PairCounts {
            counts,
            total: samples.len() as u64,
        }
    }

    pub fn get(&self, i: usize, b: u8, a: usize) -> u64 {
        self.counts[i][slot(a, b)]
    }
}

/// Exact pair masses `Pr_p[X_i = b, Π_i = a]`, indexed like [`PairCounts`].
pub fn pair_masses(p: &DenseDistribution, dag: &Dag) -> Result<Vec<Vec<f64>>> {
    if p.len() != 1usize << dag.n {
        return Err(Error::DimensionMismatch(p.len(), 1usize << dag.n));
    }
    let mut out: Vec<Vec<f64>> = (0..dag.n).map(|i| vec![0.0; 2 * dag.config_count(i)]).collect();
    for (x, &px) in p.mass().iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let x = x as u64;
        for (i, row) in out.iter_mut().enumerate() {
            row[slot(dag.parent_config(i, x), ((x >> i) & 1) as u8)] += px;
        }
    }
    Ok(out)
}

/// Exclude every pair whose empirical frequency is at most the threshold.
pub fn identify_support_from_samples(samples: &[Assignment], dag: &Dag, cfg: &LearnerConfig) -> Result<SupportMask> {
    cfg.validate()?;
    let d = cfg.degree(dag)?;
    let threshold = cfg.threshold(dag.n, d);
    let counts = PairCounts::from_samples(dag, samples);
    let m = samples.len().max(1) as f64;
    let mut mask = SupportMask::full(dag)?;
    for i in 0..dag.n {
        for a in 0..dag.config_count(i) {
            for b in 0..2u8 {
                if counts.get(i, b, a) as f64 / m <= threshold {
                    mask.exclude(i, b, a);
                }
            }
        }
    }
    Ok(mask)
}

/// Draw [`LearnerConfig::support_samples`] samples on the `"support"`
/// substream of `seed` and run [`identify_support_from_samples`].
pub fn identify_support<S: Sampler>(sampler: &S, dag: &Dag, cfg: &LearnerConfig, seed: Seed) -> Result<SupportMask> {
    check_dims(sampler, dag)?;
    cfg.validate()?;
    let m = cfg.support_samples(dag.n, cfg.degree(dag)?);
    let samples = sampler.draw_many(m, &mut seed.named("support").rng());
    identify_support_from_samples(&samples, dag, cfg)
}

fn check_dims<S: Sampler>(sampler: &S, dag: &Dag) -> Result<()> {
    if sampler.n() != dag.n {
        return Err(Error::DimensionMismatch(sampler.n(), dag.n));
    }
    Ok(())
}

/// Add-K conditional estimates `Q(1 | a) = (K + N_{1,a}) / (2K + N_a)`. A
/// configuration with an empty denominator (only possible for `K = 0`) gets
/// 0.5.
pub fn fit_conditionals(dag: &Dag, samples: &[Assignment], k: f64) -> BayesNetModel {
    let counts = PairCounts::from_samples(dag, samples);
    let cpt = (0..dag.n)
        .map(|i| {
            (0..dag.config_count(i))
                .map(|a| {
                    let n0 = counts.get(i, 0, a) as f64;
                    let n1 = counts.get(i, 1, a) as f64;
                    let denom = 2.0 * k + n0 + n1;
                    if denom > 0.0 {
                        (k + n1) / denom
                    } else {
                        0.5
                    }
                })
                .collect()
        })
        .collect();
    BayesNetModel { dag: dag.clone(), cpt }
}

/// Output of [`near_proper_learn`].
#[derive(Clone, Debug)]
pub struct Learned {
    pub q: BayesNetModel,
    pub mask: SupportMask,
    /// Samples consumed by support identification.
    pub support_samples: usize,
    /// Samples consumed by the conditional estimates.
    pub learning_samples: usize,
    pub k: f64,
}

impl Learned {
    pub fn total_samples(&self) -> usize {
        self.support_samples + self.learning_samples
    }
}

/// Identify the support, then fit add-K conditionals on `dag` from a fresh
/// batch drawn on the `"learn"` substream.
pub fn near_proper_learn<S: Sampler>(sampler: &S, dag: &Dag, cfg: &LearnerConfig, seed: Seed) -> Result<Learned> {
    check_dims(sampler, dag)?;
    cfg.validate()?;
    let d = cfg.degree(dag)?;
    let mask = identify_support(sampler, dag, cfg, seed)?;
    let m2 = cfg.learning_samples(dag.n, d);
    let k = cfg.smoothing(dag.n, d);
    let samples = sampler.draw_many(m2, &mut seed.named("learn").rng());
    Ok(Learned {
        q: fit_conditionals(dag, &samples, k),
        mask,
        support_samples: cfg.support_samples(dag.n, d),
        learning_samples: m2,
        k,
    })
}

/// Move each conditional's mass onto its kept child values.
///
/// A row whose two child values are both excluded is an error only if some
/// assignment in the preceding prefix set reaches that parent configuration;
/// unreachable rows never contribute to `S~_n` and are left unchanged. The
/// reachability search enumerates assignments, so above [`ORACLE_CAP`] every
/// such row is treated as reachable.
pub fn mass_shift(q: &BayesNetModel, mask: &SupportMask) -> Result<BayesNetModel> {
    if q.dag != mask.dag {
        return Err(Error::GraphMismatch);
    }
    let mut out = q.clone();
    let mut dead = Vec::new();
    for i in 0..q.n() {
        for a in 0..q.dag.config_count(i) {
            let k0 = mask.keeps(i, 0, a);
            let k1 = mask.keeps(i, 1, a);
            let p1 = q.cpt[i][a];
            out.cpt[i][a] = match (k0, k1) {
                (true, true) => p1,
                (false, true) if p1 > 0.0 => 1.0,
                (true, false) if p1 < 1.0 => 0.0,
                _ => {
                    dead.push((i, a));
                    p1
                }
            };
        }
    }
    if let Some(&(node, config)) = dead.iter().find(|&&(i, a)| reachable(mask, i, a)) {
        return Err(Error::DegenerateMask { node, config });
    }
    Ok(out)
}

// Whether some x in the prefix set before node i has π_i(x) = a.
fn reachable(mask: &SupportMask, i: usize, a: usize) -> bool {
    let n = mask.dag.n;
    if n > ORACLE_CAP {
        return true;
    }
    let k = mask.order.iter().position(|&v| v == i).expect("node in order");
    (0..1u64 << n).any(|x| mask.dag.parent_config(i, x) == a && mask.contains_prefix(Assignment(x), k))
}

/// One prefix step of [`prefix_recurrence_audit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditStep {
    /// Prefix length.
    pub k: usize,
    /// Node added at this step.
    pub node: usize,
    /// `d_χ²(P_k, Q_k, S~_k)`.
    pub divergence: f64,
    /// `d_k - (1 + 1/n) d_{k-1}`.
    pub gap: f64,
    /// `gap · n / ε²`, the smallest constant that would not flag this step.
    pub required_constant: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceAudit {
    pub epsilon: f64,
    pub c_rec: f64,
    pub steps: Vec<AuditStep>,
}

impl RecurrenceAudit {
    pub fn flagged(&self) -> Vec<usize> {
        self.steps.iter().filter(|s| s.flagged).map(|s| s.k).collect()
    }

    pub fn max_required_constant(&self) -> f64 {
        self.steps.iter().map(|s| s.required_constant).fold(0.0, f64::max)
    }
}

/// Evaluate the per-prefix restricted chi-square divergences between `p` and
/// `q` on the mask's prefix sets, flagging steps where
/// `d_k > (1 + 1/n) d_{k-1} + c_rec ε² / n`.
pub fn prefix_recurrence_audit(
    p: &DenseDistribution,
    q: &BayesNetModel,
    mask: &SupportMask,
    epsilon: f64,
    c_rec: f64,
) -> Result<RecurrenceAudit> {
    let n = q.n();
    if q.dag != mask.dag {
        return Err(Error::GraphMismatch);
    }
    let qd = q.exact_distribution()?;
    if p.len() != qd.len() {
        return Err(Error::DimensionMismatch(p.len(), qd.len()));
    }
    let order = &mask.order;

    // Reindex so that the j-th node of the order is bit j; marginalizing the
    // last prefix node is then a fold of the upper half onto the lower half.
    let permute = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (x, &val) in v.iter().enumerate() {
            let y = order
                .iter()
                .enumerate()
                .fold(0usize, |acc, (j, &node)| acc | (((x >> node) & 1) << j));
            out[y] = val;
        }
        out
    };
    let mut pk = vec![permute(p.mass())];
    let mut qk = vec![permute(qd.mass())];
    for k in (1..=n).rev() {
        let half = 1usize << (k - 1);
        let fold = |v: &[f64]| (0..half).map(|y| v[y] + v[y + half]).collect::<Vec<_>>();
        pk.push(fold(pk.last().unwrap()));
        qk.push(fold(qk.last().unwrap()));
    }
    pk.reverse();
    qk.reverse();

    let expand = |y: usize, k: usize| -> u64 {
        order[..k]
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &node)| acc | ((((y >> j) & 1) as u64) << node))
    };
    let nf = n as f64;
    let mut steps = Vec::with_capacity(n);
    let mut inside = vec![true];
    let mut prev = 0.0;
    for k in 1..=n {
        let node = order[k - 1];
        let half = 1usize << (k - 1);
        let mut next = vec![false; 2 * half];
        for y in 0..2 * half {
            next[y] = inside[y % half] && mask.node_keeps(node, expand(y, k));
        }
        inside = next;
        let d = RestrictedPair::new(&pk[k], &qk[k], &inside)?.chi2()?;
        let gap = d - (1.0 + 1.0 / nf) * prev;
        let required = gap * nf / (epsilon * epsilon);
        steps.push(AuditStep {
            k,
            node,
            divergence: d,
            gap,
            required_constant: required,
            flagged: required > c_rec,
        });
        prev = d;
    }
    Ok(RecurrenceAudit { epsilon, c_rec, steps })
}

/// Whether every pair of exact mass `>= 4cε²/(2^(d+1) n)` is kept and every
/// pair of mass `<= cε²/(2^(d+1) n)` is excluded.
pub fn sandwich_holds(mask: &SupportMask, masses: &[Vec<f64>], cfg: &LearnerConfig) -> Result<bool> {
    let dag = &mask.dag;
    let d = cfg.degree(dag)?;
    let unit = cfg.threshold(dag.n, d) / 2.0;
    for (i, row) in masses.iter().enumerate() {
        for (s, &m) in row.iter().enumerate() {
            let kept = mask.keep[i][s];
            if (m >= 4.0 * unit && !kept) || (m <= unit && kept) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kl_projection;
    use rand::Rng;

    #[test]
    fn formulas() {
        let cfg = LearnerConfig::with_epsilon(0.25);
        let (n, d) = (8, 2);
        let m1 = 3.0 * 64.0 * (6.0f64 * 64.0).ln() / 0.0625;
        assert_eq!(cfg.support_samples(n, d), m1.ceil() as usize);
        let m2 = 4.0 * 4.0 * 64.0 * 32f64.ln() / 0.0625;
        assert_eq!(cfg.learning_samples(n, d), m2.ceil() as usize);
        assert_eq!(cfg.smoothing(n, d), 6.0);
        assert!((cfg.threshold(n, d) - 2.0 * 0.0625 / 64.0).abs() < 1e-18);
        // The log guard keeps tiny instances from getting zero samples.
        assert!(cfg.learning_samples(1, 0) > 0);
    }

    #[test]
    fn config_validation() {
        assert!(LearnerConfig::with_epsilon(0.0).validate().is_err());
        assert!(LearnerConfig::with_epsilon(1.0).validate().is_err());
        assert!(LearnerConfig {
            c: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        let cfg = LearnerConfig {
            degree_bound: Some(0),
            ..Default::default()
        };
        assert!(cfg.degree(&Dag::chain(3)).is_err());
        assert_eq!(cfg.degree(&Dag::empty(3)).unwrap(), 0);
    }

    #[test]
    fn empty_mask_contains_everything() {
        let m = SupportMask::full(&Dag::chain(4)).unwrap();
        assert!((0..16).all(|x| m.contains(Assignment(x))));
        assert!(m.is_full());
    }

    #[test]
    fn single_exclusion() {
        let dag = Dag::empty(3);
        let m = SupportMask::from_excluded(&dag, &[(1, 1, 0)]).unwrap();
        for x in 0..8u64 {
            assert_eq!(m.contains(Assignment(x)), (x >> 1) & 1 == 0);
        }
        assert!(SupportMask::from_excluded(&dag, &[(3, 0, 0)]).is_err());
    }

    #[test]
    fn random_mask_matches_conjunction() {
        let mut rng = Seed(11).rng();
        for _ in 0..20 {
            let dag = Dag::random(6, 2, &mut rng);
            let mut m = SupportMask::full(&dag).unwrap();
            let mut table = vec![];
            for i in 0..6 {
                for a in 0..dag.config_count(i) {
                    for b in 0..2u8 {
                        let keep = rng.random_bool(0.8);
                        if !keep {
                            m.exclude(i, b, a);
                        }
                        table.push(((i, b, a), keep));
                    }
                }
            }
            let lookup = |i: usize, b: u8, a: usize| table.iter().find(|(t, _)| *t == (i, b, a)).unwrap().1;
            for x in 0..64u64 {
                let expect = (0..6).all(|i| lookup(i, ((x >> i) & 1) as u8, dag.parent_config(i, x)));
                assert_eq!(m.contains(Assignment(x)), expect);
            }
        }
    }

    #[test]
    fn mask_json_roundtrip() {
        let dag = Dag::chain(3);
        let m = SupportMask::from_excluded(&dag, &[(1, 0, 1), (2, 1, 0)]).unwrap();
        let s = m.to_json();
        assert_eq!(s, "[[1,0,1],[2,1,0]]");
        assert_eq!(SupportMask::from_json(&dag, &s).unwrap(), m);
    }

    #[test]
    fn exclusion_is_a_function_of_counts() {
        let dag = Dag::empty(2);
        let cfg = LearnerConfig::with_epsilon(0.5);
        // threshold = 2 * 0.25 / (2 * 2) = 0.125
        let mut samples = vec![Assignment(0b00); 7];
        samples.push(Assignment(0b01));
        let m = identify_support_from_samples(&samples, &dag, &cfg).unwrap();
        // X_0 = 1 has frequency exactly 1/8 and is excluded; X_1 = 1 never occurs.
        assert_eq!(m.excluded(), vec![(0, 1, 0), (1, 1, 0)]);
    }

    #[test]
    fn uniform_product_keeps_everything() {
        let p = BayesNetModel::product(&[0.5; 4]).unwrap();
        let cfg = LearnerConfig::with_epsilon(0.3);
        let ok = (0..30)
            .filter(|&s| identify_support(&p.sampler(), &p.dag, &cfg, Seed(s)).unwrap().is_full())
            .count();
        assert!(ok >= 25, "{ok}");
    }

    #[test]
    fn fit_conditionals_add_k() {
        let dag = Dag::chain(2);
        let samples = [Assignment(0b11), Assignment(0b11), Assignment(0b01), Assignment(0b00)];
        let q = fit_conditionals(&dag, &samples, 1.0);
        // node 0: three ones out of four.
        assert!((q.cpt[0][0] - 4.0 / 6.0).abs() < 1e-15);
        // node 1 | x0 = 0: no ones out of one; | x0 = 1: two ones of three.
        assert!((q.cpt[1][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((q.cpt[1][1] - 3.0 / 5.0).abs() < 1e-15);
        assert_eq!(fit_conditionals(&dag, &[], 0.0).cpt[1][1], 0.5);
    }

    #[test]
    fn learned_model_is_valid_and_counts_match() {
        let mut rng = Seed(3).rng();
        let dag = Dag::random(6, 2, &mut rng);
        let p = BayesNetModel::random_cpt(dag.clone(), 0.1, 0.9, &mut rng);
        let cfg = LearnerConfig::with_epsilon(0.4);
        let out = near_proper_learn(&p.sampler(), &dag, &cfg, Seed(1)).unwrap();
        assert!(crate::validate(&out.q, 2).is_empty());
        assert_eq!(out.support_samples, cfg.support_samples(6, 2));
        assert_eq!(out.learning_samples, cfg.learning_samples(6, 2));
    }

    #[test]
    fn point_mass_learning_concentrates() {
        let star = Dag::star(5);
        let p = BayesNetModel::new(
            star.clone(),
            vec![
                vec![1.0],
                vec![0.0, 1.0],
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, 1.0],
            ],
        )
        .unwrap();
        let cfg = LearnerConfig::with_epsilon(0.3);
        let out = near_proper_learn(&p.sampler(), &star, &cfg, Seed(2)).unwrap();
        let x = Assignment(0b11011);
        let bound = 1.0 - 5.0 * out.k / out.learning_samples as f64;
        assert!(out.q.exact_probability(x) >= bound);
        let shifted = mass_shift(&out.q, &out.mask).unwrap();
        assert!((shifted.exact_probability(x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_shift_rules() {
        let dag = Dag::empty(2);
        let q = BayesNetModel::product(&[0.7, 0.4]).unwrap();
        assert_eq!(mass_shift(&q, &SupportMask::full(&dag).unwrap()).unwrap(), q);
        let m = SupportMask::from_excluded(&dag, &[(0, 0, 0)]).unwrap();
        assert_eq!(mass_shift(&q, &m).unwrap().cpt[0][0], 1.0);
        let m = SupportMask::from_excluded(&dag, &[(1, 0, 0), (1, 1, 0)]).unwrap();
        assert!(matches!(
            mass_shift(&q, &m),
            Err(Error::DegenerateMask { node: 1, config: 0 })
        ));
    }

    #[test]
    fn unreachable_degenerate_row_is_tolerated() {
        // X0 = 1 is excluded, so the row of X1 under X0 = 1 is never reached.
        let dag = Dag::chain(2);
        let q = BayesNetModel::new(dag.clone(), vec![vec![0.3], vec![0.5, 0.5]]).unwrap();
        let m = SupportMask::from_excluded(&dag, &[(0, 1, 0), (1, 0, 1), (1, 1, 1)]).unwrap();
        let s = mass_shift(&q, &m).unwrap();
        assert_eq!(s.cpt[0][0], 0.0);
        let total: f64 = (0..4)
            .filter(|&x| m.contains(Assignment(x)))
            .map(|x| s.exact_probability(Assignment(x)))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn audit_of_projection_is_zero() {
        let mut rng = Seed(8).rng();
        let dag = Dag::random(6, 2, &mut rng);
        let p = BayesNetModel::random_cpt(dag.clone(), 0.1, 0.9, &mut rng);
        let pd = p.exact_distribution().unwrap();
        let q = kl_projection(&pd, &dag).unwrap();
        let mask = SupportMask::full(&dag).unwrap();
        let audit = prefix_recurrence_audit(&pd, &q, &mask, 0.25, 1.0).unwrap();
        assert_eq!(audit.steps.len(), 6);
        assert!(audit.steps.iter().all(|s| s.divergence.abs() < 1e-12 && !s.flagged));
    }

    #[test]
    fn audit_last_step_matches_restricted_chi2() {
        let mut rng = Seed(9).rng();
        let dag = Dag::random(6, 2, &mut rng);
        let p = BayesNetModel::random_cpt(dag.clone(), 0.05, 0.95, &mut rng);
        let cfg = LearnerConfig::with_epsilon(0.3);
        let out = near_proper_learn(&p.sampler(), &dag, &cfg, Seed(4)).unwrap();
        let pd = p.exact_distribution().unwrap();
        let audit = prefix_recurrence_audit(&pd, &out.q, &out.mask, 0.3, 1.0).unwrap();
        let qd = out.q.exact_distribution().unwrap();
        let ind = out.mask.indicator().unwrap();
        let direct = RestrictedPair::new(pd.mass(), qd.mass(), &ind).unwrap().chi2().unwrap();
        assert!((audit.steps[5].divergence - direct).abs() < 1e-10);
        // First step against the exact one-node marginal.
        let node = audit.steps[0].node;
        let p1 = pd.marginal_one(node);
        let q1 = qd.marginal_one(node);
        let mut first = 0.0;
        for (b, (pv, qv)) in [(0u8, (1.0 - p1, 1.0 - q1)), (1, (p1, q1))] {
            if out.mask.keeps(node, b, 0) {
                first += (pv - qv) * (pv - qv) / qv;
            }
        }
        assert!((audit.steps[0].divergence - first).abs() < 1e-12);
    }

    #[test]
    fn pair_masses_sum_to_one_per_node() {
        let mut rng = Seed(10).rng();
        let dag = Dag::random(5, 2, &mut rng);
        let p = BayesNetModel::random_cpt(dag.clone(), 0.0, 1.0, &mut rng);
        let masses = pair_masses(&p.exact_distribution().unwrap(), &dag).unwrap();
        for row in masses {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
