//! Complete weighted bipartite graphs between two positioned sequences and
//! exact maximum-weight matching over them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchingError {
    #[error("cannot build a bipartite graph from an empty sequence")]
    EmptySequence,
    #[error("positions must be >= 1 and strictly increasing")]
    InvalidPositions,
}

/// Order-based edge weight `0.5^|pos_u - pos_v|`.
#[inline]
pub fn w_order(pos_u: u32, pos_v: u32) -> f64 {
    let d = pos_u.abs_diff(pos_v);
    // 0.5^d underflows to 0 past 1074; powi keeps every smaller exponent exact
    if d > 1100 {
        0.0
    } else {
        0.5f64.powi(d as i32)
    }
}

/// Complete bipartite graph with `weight = sim * w_order` on every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBipartiteGraph {
    left_pos: Vec<u32>,
    right_pos: Vec<u32>,
    sims: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedBipartiteGraph {
    /// Builds the graph for two positioned sequences. `sim` scores a
    /// left/right item pair and must return values in `[0, 1]`.
    pub fn build<A, B, F>(left: &[(A, u32)], right: &[(B, u32)], mut sim: F) -> Result<Self, MatchingError>
    where
        F: FnMut(&A, &B) -> f64,
    {
        if left.is_empty() || right.is_empty() {
            return Err(MatchingError::EmptySequence);
        }
        let increasing = |s: &[u32]| s.first().is_some_and(|&p| p >= 1) && s.windows(2).all(|w| w[0] < w[1]);
        let left_pos: Vec<u32> = left.iter().map(|(_, p)| *p).collect();
        let right_pos: Vec<u32> = right.iter().map(|(_, p)| *p).collect();
        if !increasing(&left_pos) || !increasing(&right_pos) {
            return Err(MatchingError::InvalidPositions);
        }
        let mut sims = Vec::with_capacity(left.len() * right.len());
        let mut weights = Vec::with_capacity(left.len() * right.len());
        for (a, pa) in left {
            for (b, pb) in right {
                let s = sim(a, b);
                debug_assert!((0.0..=1.0).contains(&s), "similarity out of range: {s}");
                sims.push(s);
                weights.push(s * w_order(*pa, *pb));
            }
        }
        Ok(Self {
            left_pos,
            right_pos,
            sims,
            weights,
        })
    }

    /// Graph from a raw weight matrix, positions `1..=n` on both sides and
    /// the weight doubling as the similarity.
    pub fn from_weights(rows: Vec<Vec<f64>>) -> Result<Self, MatchingError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return Err(MatchingError::EmptySequence);
        }
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged weight matrix");
        let weights: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Self {
            left_pos: (1..=n_rows as u32).collect(),
            right_pos: (1..=n_cols as u32).collect(),
            sims: weights.clone(),
            weights,
        })
    }

    pub fn left_len(&self) -> usize {
        self.left_pos.len()
    }

    pub fn right_len(&self) -> usize {
        self.right_pos.len()
    }

    pub fn left_pos(&self, i: usize) -> u32 {
        self.left_pos[i]
    }

    pub fn right_pos(&self, j: usize) -> u32 {
        self.right_pos[j]
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.right_len() + j]
    }

    pub fn sim(&self, i: usize, j: usize) -> f64 {
        self.sims[i * self.right_len() + j]
    }

    pub fn order_weight(&self, i: usize, j: usize) -> f64 {
        w_order(self.left_pos[i], self.right_pos[j])
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.right_len()).map(<[f64]>::to_vec).collect()
    }
}

/// A set of vertex-disjoint edges and their summed weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `(left, right)` index pairs sorted by left index. Zero-weight pairs
    /// are omitted.
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: f64,
}

/// Exact maximum-weight matching (Kuhn-Munkres with potentials,
/// `O(n^2 m)` for `n <= m`).
///
/// Weights are non-negative, so an optimal assignment of the smaller side
/// is also a maximum-weight matching. Rows are inserted in index order and
/// the lowest column index wins equal slack, which makes the selected
/// optimum a fixed function of the matrix.
pub fn max_weight_matching(g: &WeightedBipartiteGraph) -> Matching {
    let (rows, cols) = (g.left_len(), g.right_len());
    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| -> f64 {
        if transposed {
            -g.weight(j, i)
        } else {
            -g.weight(i, j)
        }
    };

    // 1-based arrays; column 0 is the virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut min_slack = vec![f64::INFINITY; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| {
            let (i, j) = (owner[j] - 1, j - 1);
            if transposed {
                (j, i)
            } else {
                (i, j)
            }
        })
        .filter(|&(i, j)| g.weight(i, j) > 0.0)
        .collect();
    pairs.sort_unstable();
    let total_weight = pairs.iter().map(|&(i, j)| g.weight(i, j)).fold(0.0, |acc, w| acc + w);
    Matching { pairs, total_weight }
}
