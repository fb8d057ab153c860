//! Compact per-week graph for random walks.
//!
//! Nodes are indexed by lexicographic wallet order within the week; edges
//! are CSR with per-node cumulative weights so weighted neighbor sampling
//! is a binary search.

use rand::Rng;

use crate::ingest::WeeklyNetwork;

pub struct WeekGraph {
    nodes: Vec<String>,
    offsets: Vec<usize>,
    /// Neighbor indices, ascending within each node's slice.
    targets: Vec<u32>,
    /// Cumulative edge weights within each node's slice.
    cum_weights: Vec<f64>,
}

impl WeekGraph {
    /// Build from a weekly network. Directed by default; `symmetrize` adds
    /// reverse edges, summing weights of antiparallel pairs.
    pub fn from_network(network: &WeeklyNetwork, symmetrize: bool) -> Self {
        let nodes: Vec<String> = network.node_set().iter().cloned().collect();
        let index_of = |name: &str| -> u32 {
            nodes.binary_search_by(|n| n.as_str().cmp(name)).unwrap() as u32
        };

        let n = nodes.len();
        let mut adjacency: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (src, dst, weight) in network.edges() {
            let (u, v) = (index_of(src), index_of(dst));
            adjacency[u as usize].push((v, weight));
            if symmetrize {
                adjacency[v as usize].push((u, weight));
            }
        }

        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut cum_weights = Vec::new();
        offsets.push(0);
        for list in &mut adjacency {
            list.sort_by_key(|&(v, _)| v);
            // Merge duplicates (possible after symmetrization).
            let mut acc = 0.0;
            let mut last: Option<u32> = None;
            for &(v, w) in list.iter() {
                if last == Some(v) {
                    let tail = cum_weights.last_mut().unwrap();
                    *tail += w;
                    acc += w;
                } else {
                    acc += w;
                    targets.push(v);
                    cum_weights.push(acc);
                    last = Some(v);
                }
            }
            offsets.push(targets.len());
        }

        Self {
            nodes,
            offsets,
            targets,
            cum_weights,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_name(&self, index: u32) -> &str {
        &self.nodes[index as usize]
    }

    pub fn node_names(&self) -> &[String] {
        &self.nodes
    }

    pub fn out_degree(&self, u: u32) -> usize {
        self.offsets[u as usize + 1] - self.offsets[u as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    fn span(&self, u: u32) -> (usize, usize) {
        (self.offsets[u as usize], self.offsets[u as usize + 1])
    }

    pub fn neighbors(&self, u: u32) -> &[u32] {
        let (lo, hi) = self.span(u);
        &self.targets[lo..hi]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Weighted sample of an out-neighbor, or None for a sink node.
    pub fn sample_neighbor<R: Rng>(&self, u: u32, rng: &mut R) -> Option<u32> {
        let (lo, hi) = self.span(u);
        if lo == hi {
            return None;
        }
        let base = if lo == 0 { 0.0 } else { self.cum_weights[lo - 1] };
        let total = self.cum_weights[hi - 1] - base;
        let r = base + rng.gen::<f64>() * total;
        let slice = &self.cum_weights[lo..hi];
        let k = slice.partition_point(|&c| c <= r).min(hi - lo - 1);
        Some(self.targets[lo + k])
    }

    /// Second-order biased sample: weights are scaled by 1/p when returning
    /// to `prev`, by 1 for neighbors of `prev`, and by 1/q otherwise.
    pub fn sample_biased<R: Rng>(&self, prev: u32, u: u32, p: f64, q: f64, rng: &mut R) -> Option<u32> {
        let (lo, hi) = self.span(u);
        if lo == hi {
            return None;
        }
        let mut cum = Vec::with_capacity(hi - lo);
        let mut acc = 0.0;
        for idx in lo..hi {
            let v = self.targets[idx];
            let base = if idx == lo {
                self.cum_weights[idx] - if lo == 0 { 0.0 } else { self.cum_weights[lo - 1] }
            } else {
                self.cum_weights[idx] - self.cum_weights[idx - 1]
            };
            let bias = if v == prev {
                1.0 / p
            } else if self.has_edge(prev, v) {
                1.0
            } else {
                1.0 / q
            };
            acc += base * bias;
            cum.push(acc);
        }
        let r = rng.gen::<f64>() * acc;
        let k = cum.partition_point(|&c| c <= r).min(hi - lo - 1);
        Some(self.targets[lo + k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn network(edges: &[(&str, &str, f64)]) -> WeeklyNetwork {
        let mut n = WeeklyNetwork::new(0);
        for &(s, d, w) in edges {
            n.add_amount(s, d, w);
        }
        n
    }

    #[test]
    fn csr_layout_and_lookup() {
        let g = WeekGraph::from_network(
            &network(&[("a", "b", 1.0), ("a", "c", 3.0), ("c", "a", 2.0)]),
            false,
        );
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.node_name(0), "a");
        assert_eq!(g.out_degree(0), 2);
        assert_eq!(g.out_degree(1), 0);
        assert!(g.has_edge(0, 1) && g.has_edge(0, 2) && g.has_edge(2, 0));
        assert!(!g.has_edge(1, 0));
    }

    #[test]
    fn symmetrize_merges_antiparallel_edges() {
        let g = WeekGraph::from_network(
            &network(&[("a", "b", 5.0), ("b", "a", 3.0)]),
            true,
        );
        assert_eq!(g.out_degree(0), 1);
        assert_eq!(g.out_degree(1), 1);
        // Merged weight 8 in both directions.
        let (lo, _) = (g.offsets[0], g.offsets[1]);
        assert_eq!(g.cum_weights[lo], 8.0);
    }

    #[test]
    fn weighted_sampling_tracks_weights() {
        let g = WeekGraph::from_network(
            &network(&[("a", "b", 9.0), ("a", "c", 1.0)]),
            false,
        );
        let mut rng = seeded_rng(5);
        let mut b_count = 0;
        for _ in 0..2000 {
            if g.sample_neighbor(0, &mut rng) == Some(1) {
                b_count += 1;
            }
        }
        let frac = b_count as f64 / 2000.0;
        assert!((frac - 0.9).abs() < 0.03, "sampled b fraction {frac}");
        assert_eq!(g.sample_neighbor(1, &mut rng), None);
    }
}
