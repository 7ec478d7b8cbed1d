//! Degree-bounded Bayes nets on `{0,1}^n`: graphs, conditional probability
//! tables, ancestral sampling, exact evaluation and the dense oracle.

mod dag;
mod dense;
mod enumerate;
mod model;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use dag::Dag;
pub use dense::{DenseDistribution, DenseSampler};
pub use enumerate::{enumerate_dags, DagEnumerator, ENUMERATION_CAP};
pub use model::{kl_projection, AncestralSampler, BayesNetModel};

/// Largest `n` for which dense `2^n` oracles are built by default.
pub const ORACLE_CAP: usize = 20;

/// A point of `{0,1}^n`, packed little-endian: bit `i` holds `x_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub u64);

impl Assignment {
    pub fn from_bits(bits: &[u8]) -> Assignment {
        assert!(bits.len() <= 64, "at most 64 coordinates");
        Assignment(
            bits.iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | (((b & 1) as u64) << i)),
        )
    }

    #[inline]
    pub fn bit(self, i: usize) -> u8 {
        ((self.0 >> i) & 1) as u8
    }

    pub fn to_bits(self, n: usize) -> Vec<u8> {
        (0..n).map(|i| self.bit(i)).collect()
    }

    /// True iff the encoding fits in `n` bits.
    pub fn fits(self, n: usize) -> bool {
        n >= 64 || self.0 >> n == 0
    }

    /// `x_0 x_1 ... x_{n-1}` as a string of `0`/`1`.
    pub fn to_bit_string(self, n: usize) -> String {
        (0..n).map(|i| if self.bit(i) == 1 { '1' } else { '0' }).collect()
    }
}

/// Anything that can produce i.i.d. draws from a distribution on `{0,1}^n`.
pub trait Sampler: Sync {
    fn n(&self) -> usize;

    fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Assignment;

    fn draw_many<R: rand::Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<Assignment> {
        (0..m).map(|_| self.draw(rng)).collect()
    }
}

/// One reason a net fails validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    NodeCount {
        declared: usize,
        actual: usize,
    },
    ParentOutOfRange {
        node: usize,
        parent: usize,
    },
    SelfLoop {
        node: usize,
    },
    DuplicateParent {
        node: usize,
        parent: usize,
    },
    InDegree {
        node: usize,
        degree: usize,
        bound: usize,
    },
    Cycle(Vec<usize>),
    CptRowCount {
        declared: usize,
        actual: usize,
    },
    CptLength {
        node: usize,
        expected: usize,
        actual: usize,
    },
    CptOutOfRange {
        node: usize,
        config: usize,
        value: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NodeCount { declared, actual } => {
                write!(f, "n = {declared} but {actual} parent lists")
            }
            Violation::ParentOutOfRange { node, parent } => {
                write!(f, "parent {parent} of node {node} out of range")
            }
            Violation::SelfLoop { node } => write!(f, "self-loop at {node}"),
            Violation::DuplicateParent { node, parent } => {
                write!(f, "duplicate parent {parent} at node {node}")
            }
            Violation::InDegree { node, degree, bound } => {
                write!(f, "in-degree {degree} > {bound} at node {node}")
            }
            Violation::Cycle(c) => write!(f, "cycle through {c:?}"),
            Violation::CptRowCount { declared, actual } => {
                write!(f, "{actual} CPT rows for {declared} nodes")
            }
            Violation::CptLength { node, expected, actual } => {
                write!(f, "node {node} has {actual} CPT entries, expected {expected}")
            }
            Violation::CptOutOfRange { node, config, value } => {
                write!(
                    f,
                    "CPT entry {value} at node {node}, configuration {config} is outside [0, 1]"
                )
            }
        }
    }
}

/// Check every graph and CPT invariant plus the in-degree bound `d`.
///
/// Violations are returned as data; an empty list means the net is valid.
pub fn validate(net: &BayesNetModel, d: usize) -> Vec<Violation> {
    let mut out = net.dag.violations(Some(d));
    out.extend(net.cpt_violations());
    out
}
