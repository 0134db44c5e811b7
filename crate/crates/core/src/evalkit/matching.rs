use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// One-to-one matching between two point or vector sets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub pairs: Vec<Match>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Keeps only pairs with weight strictly below `limit`.
    pub fn below(&self, limit: f64) -> MatchSet {
        MatchSet {
            pairs: self
                .pairs
                .iter()
                .copied()
                .filter(|m| m.weight < limit)
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    weight: f64,
    a: usize,
    b: usize,
}

impl PartialEq for Edge {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Edge {}

impl PartialOrd for Edge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Edge {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Greedy bipartite matching on the complete graph `0..n_a × 0..n_b`.
///
/// Edges are taken in ascending `(weight, a, b)` order and accepted when both
/// endpoints are still free. Each `a` keeps its candidate list sorted and only
/// its best still-viable edge sits in a heap, which yields the same pairs as
/// sorting every edge up front.
pub fn greedy_match_by(n_a: usize, n_b: usize, weight: impl Fn(usize, usize) -> f64) -> MatchSet {
    let target = n_a.min(n_b);
    let mut pairs = Vec::with_capacity(target);
    if target == 0 {
        return MatchSet { pairs };
    }
    let candidates: Vec<Vec<(f64, usize)>> = (0..n_a)
        .map(|a| {
            let mut row: Vec<(f64, usize)> = (0..n_b).map(|b| (weight(a, b), b)).collect();
            row.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            row
        })
        .collect();
    let mut cursor = vec![0usize; n_a];
    let mut taken_b = vec![false; n_b];
    let mut heap: BinaryHeap<Reverse<Edge>> = candidates
        .iter()
        .enumerate()
        .map(|(a, row)| {
            Reverse(Edge {
                weight: row[0].0,
                a,
                b: row[0].1,
            })
        })
        .collect();

    while let Some(Reverse(edge)) = heap.pop() {
        if !taken_b[edge.b] {
            taken_b[edge.b] = true;
            pairs.push(Match {
                a: edge.a,
                b: edge.b,
                weight: edge.weight,
            });
            if pairs.len() == target {
                break;
            }
            continue;
        }
        let row = &candidates[edge.a];
        let mut k = cursor[edge.a] + 1;
        while k < row.len() && taken_b[row[k].1] {
            k += 1;
        }
        cursor[edge.a] = k;
        if k < row.len() {
            heap.push(Reverse(Edge {
                weight: row[k].0,
                a: edge.a,
                b: row[k].1,
            }));
        }
    }
    MatchSet { pairs }
}

/// Greedy matching under the Euclidean distance between equal-length vectors.
pub fn greedy_match<P: AsRef<[f64]>>(a: &[P], b: &[P]) -> MatchSet {
    greedy_match_by(a.len(), b.len(), |i, j| {
        euclidean(a[i].as_ref(), b[j].as_ref())
    })
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
