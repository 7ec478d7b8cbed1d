use super::Dag;
use crate::{Error, Result};

/// Largest `n` accepted by [`enumerate_dags`] by default.
pub const ENUMERATION_CAP: usize = 5;

/// Every labeled DAG on `n` nodes with in-degree at most `d`, each exactly
/// once.
///
/// Canonical order: each node's candidate parent sets are listed by size and
/// then lexicographically; graphs are visited in lexicographic order of the
/// per-node choice vector with node `n-1` varying fastest. The empty graph is
/// always first. Cyclic choices are skipped.
pub fn enumerate_dags(n: usize, d: usize) -> Result<DagEnumerator> {
    enumerate_dags_with_cap(n, d, ENUMERATION_CAP)
}

pub fn enumerate_dags_with_cap(n: usize, d: usize, cap: usize) -> Result<DagEnumerator> {
    if n > cap {
        return Err(Error::CapExceeded {
            what: "DAG enumeration",
            n,
            cap,
        });
    }
    if n > 0 && d >= n {
        return Err(Error::InvalidParameter(format!(
            "degree bound {d} must be smaller than n = {n}"
        )));
    }
    let candidates = (0..n)
        .map(|i| {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut sets = Vec::new();
            for k in 0..=d.min(others.len()) {
                combinations(&others, k, &mut Vec::new(), 0, &mut sets);
            }
            sets
        })
        .collect();
    Ok(DagEnumerator {
        n,
        candidates,
        choice: vec![0; n],
        done: false,
    })
}

fn combinations(items: &[usize], k: usize, cur: &mut Vec<usize>, start: usize, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for j in start..items.len() {
        cur.push(items[j]);
        combinations(items, k, cur, j + 1, out);
        cur.pop();
    }
}

pub struct DagEnumerator {
    n: usize,
    candidates: Vec<Vec<Vec<usize>>>,
    choice: Vec<usize>,
    done: bool,
}

impl DagEnumerator {
    fn advance(&mut self) {
        for i in (0..self.n).rev() {
            self.choice[i] += 1;
            if self.choice[i] < self.candidates[i].len() {
                return;
            }
            self.choice[i] = 0;
        }
        self.done = true;
    }
}

impl Iterator for DagEnumerator {
    type Item = Dag;

    fn next(&mut self) -> Option<Dag> {
        while !self.done {
            let dag = Dag {
                n: self.n,
                parents: (0..self.n)
                    .map(|i| self.candidates[i][self.choice[i]].clone())
                    .collect(),
            };
            self.advance();
            if self.n == 0 {
                self.done = true;
            }
            if dag.topological_order().is_ok() {
                return Some(dag);
            }
        }
        None
    }
}
