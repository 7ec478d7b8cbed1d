use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Violation;
use crate::{Error, Result};

/// A directed acyclic graph on nodes `0..n`, stored as per-node parent lists.
///
/// The order of each parent list is significant: it fixes the little-endian
/// packing of parent values into a parent-configuration index (see
/// [`Dag::parent_config`]).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dag {
    pub n: usize,
    pub parents: Vec<Vec<usize>>,
}

impl Dag {
    /// Build a graph, rejecting structural violations (out-of-range or
    /// duplicate parents, self-loops, cycles). Degree is not checked here; see
    /// [`super::validate`].
    pub fn new(parents: Vec<Vec<usize>>) -> Result<Dag> {
        let dag = Dag {
            n: parents.len(),
            parents,
        };
        let v = dag.violations(None);
        if v.is_empty() {
            Ok(dag)
        } else {
            Err(Error::InvalidNet(v))
        }
    }

    pub fn empty(n: usize) -> Dag {
        Dag {
            n,
            parents: vec![Vec::new(); n],
        }
    }

    /// Chain `0 -> 1 -> ... -> n-1`.
    pub fn chain(n: usize) -> Dag {
        Dag {
            n,
            parents: (0..n).map(|i| if i == 0 { vec![] } else { vec![i - 1] }).collect(),
        }
    }

    /// Star with node 0 as the common parent of every other node.
    pub fn star(n: usize) -> Dag {
        Dag {
            n,
            parents: (0..n).map(|i| if i == 0 { vec![] } else { vec![0] }).collect(),
        }
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.parents[i].len()
    }

    pub fn max_in_degree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of parent configurations of node `i`, `2^{|Π_i|}`.
    pub fn config_count(&self, i: usize) -> usize {
        1 << self.parents[i].len()
    }

    /// Index of the parent configuration `π_i(x)`: bit `j` of the index is the
    /// value of the `j`-th declared parent.
    #[inline]
    pub fn parent_config(&self, i: usize, x: u64) -> usize {
        let mut a = 0usize;
        for (j, &p) in self.parents[i].iter().enumerate() {
            a |= (((x >> p) & 1) as usize) << j;
        }
        a
    }

    /// Topological order with lowest-index-first tie breaking.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.n;
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (i, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                if p < n {
                    children[p].push(i);
                }
            }
        }
        let mut heap: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = heap.pop() {
            order.push(i);
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    heap.push(Reverse(c));
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }
        // Every node left over has a parent that is also left over; walking
        // parent links from any of them must revisit a node.
        let left: Vec<bool> = indeg.iter().map(|&d| d > 0).collect();
        let start = (0..n).find(|&i| left[i]).expect("leftover node");
        let mut path = vec![start];
        let mut seen = vec![usize::MAX; n];
        seen[start] = 0;
        let mut cur = start;
        loop {
            let next = *self.parents[cur]
                .iter()
                .find(|&&p| p < n && left[p])
                .expect("leftover node has a leftover parent");
            if seen[next] != usize::MAX {
                let mut cycle = path[seen[next]..].to_vec();
                // Parent links walk the cycle backwards.
                cycle.reverse();
                return Err(Error::Cycle(cycle));
            }
            seen[next] = path.len();
            path.push(next);
            cur = next;
        }
    }

    pub(crate) fn violations(&self, degree_bound: Option<usize>) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.parents.len() != self.n {
            out.push(Violation::NodeCount {
                declared: self.n,
                actual: self.parents.len(),
            });
            return out;
        }
        let mut structural_ok = true;
        for (i, ps) in self.parents.iter().enumerate() {
            for (j, &p) in ps.iter().enumerate() {
                if p >= self.n {
                    out.push(Violation::ParentOutOfRange { node: i, parent: p });
                    structural_ok = false;
                } else if p == i {
                    out.push(Violation::SelfLoop { node: i });
                    structural_ok = false;
                } else if ps[..j].contains(&p) {
                    out.push(Violation::DuplicateParent { node: i, parent: p });
                }
            }
            if let Some(d) = degree_bound {
                if ps.len() > d {
                    out.push(Violation::InDegree {
                        node: i,
                        degree: ps.len(),
                        bound: d,
                    });
                }
            }
        }
        if structural_ok {
            if let Err(Error::Cycle(c)) = self.topological_order() {
                out.push(Violation::Cycle(c));
            }
        }
        out
    }

    /// A random graph with in-degree exactly `min(d, rank)` for each node,
    /// where `rank` is its position in a uniformly random node order. Node
    /// labels are therefore generally not a topological order.
    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Dag {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut parents = vec![Vec::new(); n];
        for (rank, &node) in order.iter().enumerate() {
            let k = d.min(rank);
            let mut ps: Vec<usize> = order[..rank].choose_multiple(rng, k).copied().collect();
            ps.sort_unstable();
            parents[node] = ps;
        }
        Dag { n, parents }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_order() {
        assert_eq!(Dag::chain(3).topological_order().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn empty_graph_tie_break() {
        assert_eq!(Dag::empty(3).topological_order().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn reversed_chain() {
        let dag = Dag {
            n: 3,
            parents: vec![vec![1], vec![2], vec![]],
        };
        assert_eq!(dag.topological_order().unwrap(), vec![2, 1, 0]);
    }

    #[test]
    fn two_cycle_is_reported() {
        let dag = Dag {
            n: 2,
            parents: vec![vec![1], vec![0]],
        };
        match dag.topological_order() {
            Err(Error::Cycle(c)) => {
                let mut c = c;
                c.sort();
                assert_eq!(c, vec![0, 1]);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn cycle_identified_among_acyclic_nodes() {
        // 0 -> 1 -> 2 -> 3 -> 1, plus isolated 4.
        let dag = Dag {
            n: 5,
            parents: vec![vec![], vec![0, 3], vec![1], vec![2], vec![]],
        };
        let Err(Error::Cycle(c)) = dag.topological_order() else {
            panic!("expected a cycle")
        };
        assert_eq!(c.len(), 3);
        for w in 0..c.len() {
            let (a, b) = (c[w], c[(w + 1) % c.len()]);
            assert!(dag.parents[b].contains(&a), "{a} -> {b} is not an edge");
        }
    }

    #[test]
    fn parent_config_is_little_endian() {
        let dag = Dag {
            n: 4,
            parents: vec![vec![], vec![], vec![], vec![2, 0]],
        };
        // x2 = 1, x0 = 0 -> index 1; x2 = 0, x0 = 1 -> index 2.
        assert_eq!(dag.parent_config(3, 0b0100), 1);
        assert_eq!(dag.parent_config(3, 0b0001), 2);
        assert_eq!(dag.parent_config(3, 0b0101), 3);
    }

    #[test]
    fn random_graphs_are_acyclic_and_bounded() {
        let mut rng = crate::Seed(3).rng();
        for _ in 0..200 {
            let dag = Dag::random(8, 2, &mut rng);
            assert!(dag.violations(Some(2)).is_empty());
        }
    }
}
