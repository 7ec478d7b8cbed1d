//! Exact divergences between probability vectors, over the full domain or a
//! subset of it.
//!
//! All sums use compensated summation. Chi-square and KL return
//! `f64::INFINITY` when `p` puts mass where `q` has none; the restricted
//! chi-square instead reports such a cell as an error, since a restricted
//! evaluation is only meaningful on the support of `q`.

use crate::bayesnet::{BayesNetModel, DenseDistribution};
use crate::numeric::{kahan_sum, KahanSum};
use crate::{Error, Result};

fn check_len(p: &[f64], q: &[f64]) {
    assert_eq!(p.len(), q.len(), "distributions must have the same length");
}

/// Total variation distance `(1/2) Σ |p - q|`.
pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    check_len(p, q);
    0.5 * kahan_sum(p.iter().zip(q).map(|(a, b)| (a - b).abs()))
}

/// `Σ p ln(p/q)` with `0 ln 0 = 0`; `+inf` if `q_x = 0 < p_x`.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    check_len(p, q);
    let mut s = KahanSum::new();
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            s.add(a * (a / b).ln());
        }
    }
    s.value()
}

/// Squared Hellinger distance `1 - Σ sqrt(p q)`, computed as the equivalent
/// `Σ (sqrt p - sqrt q)^2 / 2` so that it is nonnegative without cancellation.
pub fn hellinger_sq(p: &[f64], q: &[f64]) -> f64 {
    check_len(p, q);
    kahan_sum(p.iter().zip(q).map(|(a, b)| {
        let d = a.sqrt() - b.sqrt();
        0.5 * d * d
    }))
}

/// `Σ (p - q)^2 / q`; cells with `p = q = 0` contribute nothing; `+inf` if
/// `q_x = 0 < p_x`.
pub fn chi2(p: &[f64], q: &[f64]) -> f64 {
    check_len(p, q);
    let mut s = KahanSum::new();
    for (&a, &b) in p.iter().zip(q) {
        if b > 0.0 {
            let d = a - b;
            s.add(d * d / b);
        } else if a > 0.0 {
            return f64::INFINITY;
        }
    }
    s.value()
}

/// Chi-square between two Bernoulli distributions given by `Pr[1]`.
pub fn chi2_bernoulli(p1: f64, q1: f64) -> f64 {
    chi2(&[1.0 - p1, p1], &[1.0 - q1, q1])
}

/// Two (sub)probability vectors and a subset `S` of their common domain.
#[derive(Clone, Copy, Debug)]
pub struct RestrictedPair<'a> {
    p: &'a [f64],
    q: &'a [f64],
    subset: &'a [bool],
}

impl<'a> RestrictedPair<'a> {
    pub fn new(p: &'a [f64], q: &'a [f64], subset: &'a [bool]) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch(p.len(), q.len()));
        }
        if p.len() != subset.len() {
            return Err(Error::DimensionMismatch(p.len(), subset.len()));
        }
        Ok(RestrictedPair { p, q, subset })
    }

    fn members(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.subset
            .iter()
            .enumerate()
            .filter(|(_, &keep)| keep)
            .map(|(x, _)| (x, self.p[x], self.q[x]))
    }

    fn check_support(&self) -> Result<()> {
        match self.members().find(|&(_, _, b)| b <= 0.0) {
            Some((x, _, _)) => Err(Error::ZeroMassInSupport(x as u64)),
            None => Ok(()),
        }
    }

    pub fn p_mass(&self) -> f64 {
        kahan_sum(self.members().map(|(_, a, _)| a))
    }

    pub fn q_mass(&self) -> f64 {
        kahan_sum(self.members().map(|(_, _, b)| b))
    }

    /// `Σ_{x ∈ S} (p_x - q_x)^2 / q_x`. Errors if `q_x = 0` for some `x ∈ S`.
    pub fn chi2(&self) -> Result<f64> {
        self.check_support()?;
        Ok(kahan_sum(self.members().map(|(_, a, b)| (a - b) * (a - b) / b)))
    }

    /// The same quantity in expanded form, `-2 P(S) + Q(S) + Σ_{x∈S} p_x^2/q_x`.
    pub fn chi2_expanded(&self) -> Result<f64> {
        self.check_support()?;
        let mut s = KahanSum::new();
        s.add(-2.0 * self.p_mass());
        s.add(self.q_mass());
        for (_, a, b) in self.members() {
            s.add(a * a / b);
        }
        Ok(s.value())
    }

    /// `2 P(S) - Q(S) + chi2_S`, the restricted counterpart of `1 + chi2`
    /// (they coincide when `S` is the whole domain).
    pub fn one_plus_chi2_form(&self) -> Result<f64> {
        Ok(2.0 * self.p_mass() - self.q_mass() + self.chi2()?)
    }

    /// `(1/2) Σ_{x∈S} |p_x - q_x|`, the unnormalized restricted TV distance.
    pub fn tv(&self) -> f64 {
        0.5 * kahan_sum(self.members().map(|(_, a, b)| (a - b).abs()))
    }
}

/// Squared Hellinger distance split into its on-subset and off-subset parts,
/// `Σ_{x∈S} (sqrt p - sqrt q)^2 / 2` and the same over the complement. The
/// parts add up to [`hellinger_sq`].
pub fn hellinger_sq_split(p: &[f64], q: &[f64], subset: &[bool]) -> (f64, f64) {
    check_len(p, q);
    assert_eq!(p.len(), subset.len(), "subset must index the same domain");
    let mut on = KahanSum::new();
    let mut off = KahanSum::new();
    for ((&a, &b), &keep) in p.iter().zip(q).zip(subset) {
        let d = a.sqrt() - b.sqrt();
        if keep {
            on.add(0.5 * d * d);
        } else {
            off.add(0.5 * d * d);
        }
    }
    (on.value(), off.value())
}

/// Both sides of `1 + chi2(P, Q) <= ∏_i (1 + max_a chi2(P_{X_i|a}, Q_{X_i|a}))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorizationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluate the conditional chi-square factorization bound for two nets on
/// the same graph by exact enumeration.
pub fn conditional_chi2_factorization_check(p: &BayesNetModel, q: &BayesNetModel) -> Result<FactorizationCheck> {
    if p.dag != q.dag {
        return Err(Error::GraphMismatch);
    }
    let pd = p.exact_distribution()?;
    let qd = q.exact_distribution()?;
    let lhs = 1.0 + chi2(pd.mass(), qd.mass());
    let rhs: f64 = (0..p.n())
        .map(|i| {
            let worst = (0..p.dag.config_count(i))
                .map(|a| chi2_bernoulli(p.cpt[i][a], q.cpt[i][a]))
                .fold(0.0, f64::max);
            1.0 + worst
        })
        .product();
    Ok(FactorizationCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-10,
    })
}

/// Largest `n` accepted by [`certify_tv_far_from_degree0`].
pub const CERTIFY_CAP: usize = 4;

/// Certified lower bound on `min_{product R} tv(p, R)`.
///
/// Every product distribution has marginals within `step/2` of a grid point
/// (grid `{0, step, 2 step, ...} ∪ {1}`), and moving one marginal by `h`
/// moves a product distribution by at most `h` in TV. The grid minimum minus
/// `n step / 2` is therefore never above the true minimum.
pub fn certify_tv_far_from_degree0(p: &DenseDistribution, step: f64) -> Result<f64> {
    let n = p
        .n_bits()
        .ok_or_else(|| Error::InvalidDistribution("length is not a power of two".into()))?;
    if n > CERTIFY_CAP {
        return Err(Error::CapExceeded {
            what: "grid certification",
            n,
            cap: CERTIFY_CAP,
        });
    }
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::InvalidParameter(format!("grid step {step} not in (0, 0.5]")));
    }
    let mut grid: Vec<f64> = (0..).map(|k| k as f64 * step).take_while(|&v| v < 1.0).collect();
    grid.push(1.0);

    let mut best = f64::INFINITY;
    let mut partial = vec![vec![1.0]];
    grid_search(p.mass(), n, &grid, &mut partial, &mut best);
    Ok(best - n as f64 * step / 2.0)
}

// Depth-first over coordinates; `partial[j]` holds the product over the first
// `j` coordinates for every assignment of them.
fn grid_search(p: &[f64], n: usize, grid: &[f64], partial: &mut Vec<Vec<f64>>, best: &mut f64) {
    let depth = partial.len() - 1;
    if depth == n {
        let d = tv(p, &partial[n]);
        if d < *best {
            *best = d;
        }
        return;
    }
    for &g in grid {
        let prev = &partial[depth];
        let mut next = Vec::with_capacity(prev.len() * 2);
        next.extend(prev.iter().map(|v| v * (1.0 - g)));
        next.extend(prev.iter().map(|v| v * g));
        partial.push(next);
        grid_search(p, n, grid, partial, best);
        partial.pop();
    }
}

/// Check of the two-case TV soundness argument: returns `None` when the
/// premises `tv(P, Q) > 10 eps` and `P(S) > 1 - eps` do not hold, otherwise
/// whether the restricted TV is at least `eps / 2`.
pub fn tv_restriction_soundness(p: &[f64], q: &[f64], subset: &[bool], eps: f64) -> Result<Option<bool>> {
    let pair = RestrictedPair::new(p, q, subset)?;
    if tv(p, q) > 10.0 * eps && pair.p_mass() > 1.0 - eps {
        Ok(Some(pair.tv() >= eps / 2.0))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Dag, Seed};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_dist<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
        DenseDistribution::from_unnormalized((0..len).map(|_| rng.random::<f64>()).collect())
            .unwrap()
            .into_vec()
    }

    #[test]
    fn identity_gives_zero() {
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(tv(&p, &p), 0.0);
        assert_eq!(kl(&p, &p), 0.0);
        assert_eq!(hellinger_sq(&p, &p), 0.0);
        assert_eq!(chi2(&p, &p), 0.0);
    }

    #[test]
    fn disjoint_supports() {
        let (p, q) = ([1.0, 0.0], [0.0, 1.0]);
        assert_eq!(tv(&p, &q), 1.0);
        assert_eq!(hellinger_sq(&p, &q), 1.0);
        assert_eq!(kl(&p, &q), f64::INFINITY);
        assert_eq!(chi2(&p, &q), f64::INFINITY);
    }

    #[test]
    fn small_arithmetic() {
        let (p, q) = ([0.5, 0.5], [0.25, 0.75]);
        assert!((tv(&p, &q) - 0.25).abs() < 1e-15);
        assert!((chi2(&p, &q) - 1.0 / 3.0).abs() < 1e-15);
        assert!((hellinger_sq(&p, &q) - (1.0 - (0.125f64).sqrt() - (0.375f64).sqrt())).abs() < 1e-15);
        assert!((kl(&p, &q) - (0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln())).abs() < 1e-15);
    }

    #[test]
    fn zero_zero_cells_are_ignored() {
        assert_eq!(chi2(&[0.5, 0.5, 0.0], &[0.5, 0.5, 0.0]), 0.0);
    }

    #[test]
    fn restricted_full_and_empty() {
        let mut rng = Seed(1).rng();
        let p = random_dist(64, &mut rng);
        let q = random_dist(64, &mut rng);
        let all = vec![true; 64];
        let none = vec![false; 64];
        let full = RestrictedPair::new(&p, &q, &all).unwrap();
        assert!((full.chi2().unwrap() - chi2(&p, &q)).abs() < 1e-12);
        assert!((full.one_plus_chi2_form().unwrap() - 1.0 - chi2(&p, &q)).abs() < 1e-12);
        assert_eq!(RestrictedPair::new(&p, &q, &none).unwrap().chi2().unwrap(), 0.0);
    }

    #[test]
    fn restricted_matches_direct_sum() {
        let mut rng = Seed(2).rng();
        for _ in 0..50 {
            let p = random_dist(64, &mut rng);
            let q = random_dist(64, &mut rng);
            let s: Vec<bool> = (0..64).map(|_| rng.random_bool(0.5)).collect();
            let mut direct = 0.0;
            for x in 0..64 {
                if s[x] {
                    direct += (p[x] - q[x]).powi(2) / q[x];
                }
            }
            let pair = RestrictedPair::new(&p, &q, &s).unwrap();
            assert!((pair.chi2().unwrap() - direct).abs() < 1e-10);
            assert!((pair.chi2_expanded().unwrap() - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn restricted_zero_denominator_is_error() {
        let p = [0.5, 0.5];
        let q = [1.0, 0.0];
        let pair = RestrictedPair::new(&p, &q, &[true, true]).unwrap();
        assert!(matches!(pair.chi2(), Err(Error::ZeroMassInSupport(1))));
        let pair = RestrictedPair::new(&p, &q, &[true, false]).unwrap();
        assert!((pair.chi2().unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn hellinger_split_cases() {
        let mut rng = Seed(3).rng();
        let p = random_dist(64, &mut rng);
        let q = random_dist(64, &mut rng);
        let (on, off) = hellinger_sq_split(&p, &q, &[true; 64]);
        assert_eq!(off, 0.0);
        assert!((on - hellinger_sq(&p, &q)).abs() < 1e-15);
        assert_eq!(hellinger_sq_split(&p, &p, &[true; 64]), (0.0, 0.0));
        let s: Vec<bool> = (0..64).map(|_| rng.random_bool(0.3)).collect();
        let (on, off) = hellinger_sq_split(&p, &q, &s);
        let direct = 1.0 - p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum::<f64>();
        assert!((on + off - direct).abs() < 1e-12);
    }

    #[test]
    fn factorization_identity_and_perturbation() {
        let mut rng = Seed(4).rng();
        let p = BayesNetModel::random_cpt(Dag::chain(6), 0.05, 0.95, &mut rng);
        let same = conditional_chi2_factorization_check(&p, &p).unwrap();
        assert!((same.lhs - 1.0).abs() < 1e-12 && (same.rhs - 1.0).abs() < 1e-12 && same.holds);

        let mut q = p.clone();
        q.cpt[3][1] = (q.cpt[3][1] + 0.1).min(0.99);
        let c = conditional_chi2_factorization_check(&p, &q).unwrap();
        assert!(c.holds && c.lhs < c.rhs, "{c:?}");

        assert!(matches!(
            conditional_chi2_factorization_check(&p, &BayesNetModel::product(&[0.5; 6]).unwrap()),
            Err(Error::GraphMismatch)
        ));
    }

    #[test]
    fn certify_products_and_point_masses() {
        let prod = BayesNetModel::product(&[0.3, 0.8, 0.55])
            .unwrap()
            .exact_distribution()
            .unwrap();
        assert!(certify_tv_far_from_degree0(&prod, 0.05).unwrap() <= 0.0);
        let pm = DenseDistribution::point_mass(3, crate::Assignment(0b101));
        assert!(certify_tv_far_from_degree0(&pm, 0.1).unwrap() <= 0.0);
    }

    #[test]
    fn certify_two_point_mixture() {
        // Half on 00, half on 11. The minimum TV to products is sqrt(2) - 1,
        // attained at equal marginals 1 - 1/sqrt(2).
        let p = DenseDistribution::new(vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let b = certify_tv_far_from_degree0(&p, 0.01).unwrap();
        assert!(b >= 0.2, "{b}");
        assert!(b <= 2f64.sqrt() - 1.0 + 1e-12, "{b}");
        let a = 1.0 - 1.0 / 2f64.sqrt();
        let r = BayesNetModel::product(&[a, a]).unwrap().exact_distribution().unwrap();
        assert!((tv(p.mass(), r.mass()) - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn certify_errors() {
        let p = DenseDistribution::uniform(32);
        assert!(matches!(
            certify_tv_far_from_degree0(&p, 0.1),
            Err(Error::CapExceeded { .. })
        ));
        assert!(certify_tv_far_from_degree0(&DenseDistribution::uniform(4), 0.0).is_err());
        assert!(certify_tv_far_from_degree0(&DenseDistribution::uniform(4), 0.6).is_err());
    }

    #[test]
    fn soundness_split_premises() {
        let p = [0.5, 0.5, 0.0, 0.0];
        let q = [0.0, 0.0, 0.5, 0.5];
        assert_eq!(
            tv_restriction_soundness(&p, &q, &[true, true, false, false], 0.05).unwrap(),
            Some(true)
        );
        assert_eq!(
            tv_restriction_soundness(&p, &q, &[true, true, false, false], 0.2).unwrap(),
            None
        );
    }

    proptest! {
        #[test]
        fn symmetry_and_ranges(seed in any::<u64>(), len in 1usize..40) {
            let mut rng = Seed(seed).rng();
            let p = random_dist(len, &mut rng);
            let q = random_dist(len, &mut rng);
            prop_assert!((tv(&p, &q) - tv(&q, &p)).abs() < 1e-15);
            prop_assert!((hellinger_sq(&p, &q) - hellinger_sq(&q, &p)).abs() < 1e-15);
            let t = tv(&p, &q);
            let h = hellinger_sq(&p, &q);
            prop_assert!((0.0..=1.0).contains(&t));
            prop_assert!((0.0..=1.0).contains(&h));
            // Standard sandwich h^2 <= tv <= sqrt(2) h.
            prop_assert!(h <= t + 1e-12 && t <= (2.0 * h).sqrt() + 1e-12);
            prop_assert!(kl(&p, &q) >= -1e-12 && chi2(&p, &q) >= 0.0);
            prop_assert!(kl(&p, &q) <= chi2(&p, &q).ln_1p() + 1e-12);
        }
    }
}
