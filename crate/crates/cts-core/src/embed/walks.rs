//! Random-walk corpus generation.
//!
//! Each walk draws from its own RNG seeded by (week seed, round, start
//! node), so the corpus is identical whether walks are generated serially
//! or in parallel.

use rayon::prelude::*;

use super::graph::WeekGraph;
use super::Node2VecParams;
use crate::rng::{derive_seed, derive_seed2, seeded_rng};

const DOMAIN_WALKS: u64 = 0x57;

fn single_walk(graph: &WeekGraph, params: &Node2VecParams, start: u32, seed: u64) -> Vec<u32> {
    let mut rng = seeded_rng(seed);
    let mut walk = Vec::with_capacity(params.walk_length);
    walk.push(start);
    let unbiased = params.p == 1.0 && params.q == 1.0;
    while walk.len() < params.walk_length {
        let current = *walk.last().unwrap();
        let next = if unbiased || walk.len() < 2 {
            graph.sample_neighbor(current, &mut rng)
        } else {
            let prev = walk[walk.len() - 2];
            graph.sample_biased(prev, current, params.p, params.q, &mut rng)
        };
        match next {
            Some(v) => walk.push(v),
            // Sink node: the walk terminates early.
            None => break,
        }
    }
    walk
}

/// Generate `walks_per_node` walks starting from every node, in fixed
/// (round, start-node) order.
pub fn generate_walks(graph: &WeekGraph, params: &Node2VecParams, week_seed: u64) -> Vec<Vec<u32>> {
    let n = graph.node_count();
    let walk_domain = derive_seed(week_seed, DOMAIN_WALKS);
    (0..params.walks_per_node * n)
        .into_par_iter()
        .map(|flat| {
            let round = (flat / n) as u64;
            let start = (flat % n) as u32;
            let seed = derive_seed2(walk_domain, round, start as u64);
            single_walk(graph, params, start, seed)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::WeeklyNetwork;

    fn star_graph(leaves: usize) -> WeekGraph {
        let mut n = WeeklyNetwork::new(0);
        for i in 0..leaves {
            n.add_amount(&format!("leaf{i:02}"), "zhub", 1.0);
            n.add_amount("zhub", &format!("leaf{i:02}"), 1.0);
        }
        WeekGraph::from_network(&n, false)
    }

    #[test]
    fn star_hub_appears_in_every_multistep_walk() {
        let graph = star_graph(6);
        let hub = (0..graph.node_count() as u32)
            .find(|&i| graph.node_name(i) == "zhub")
            .unwrap();
        let params = Node2VecParams {
            walks_per_node: 4,
            walk_length: 10,
            ..Node2VecParams::default()
        };
        let walks = generate_walks(&graph, &params, 99);
        assert_eq!(walks.len(), 4 * graph.node_count());
        for walk in &walks {
            if walk.len() >= 2 && walk[0] != hub {
                assert!(walk.contains(&hub));
            }
        }
    }

    #[test]
    fn sink_nodes_truncate_walks() {
        let mut n = WeeklyNetwork::new(0);
        n.add_amount("a", "b", 1.0);
        let graph = WeekGraph::from_network(&n, false);
        let params = Node2VecParams {
            walks_per_node: 1,
            walk_length: 50,
            ..Node2VecParams::default()
        };
        let walks = generate_walks(&graph, &params, 1);
        // Walk from "a" reaches the sink "b" and stops; walk from "b" stays put.
        assert_eq!(walks[0], vec![0, 1]);
        assert_eq!(walks[1], vec![1]);
    }

    #[test]
    fn walks_are_deterministic_under_seed() {
        let graph = star_graph(5);
        let params = Node2VecParams {
            walks_per_node: 3,
            walk_length: 12,
            ..Node2VecParams::default()
        };
        assert_eq!(
            generate_walks(&graph, &params, 7),
            generate_walks(&graph, &params, 7)
        );
        assert_ne!(
            generate_walks(&graph, &params, 7),
            generate_walks(&graph, &params, 8)
        );
    }

    #[test]
    fn biased_walks_respect_pq() {
        // With q -> 0 the walk prefers exploring away from prev's
        // neighborhood; on a path graph that means it keeps moving forward.
        let mut n = WeeklyNetwork::new(0);
        for i in 0..9 {
            n.add_amount(&format!("n{i}"), &format!("n{}", i + 1), 1.0);
            n.add_amount(&format!("n{}", i + 1), &format!("n{i}"), 1.0);
        }
        let graph = WeekGraph::from_network(&n, false);
        let forward = Node2VecParams {
            p: 1e6,
            q: 1e-6,
            walks_per_node: 1,
            walk_length: 8,
            ..Node2VecParams::default()
        };
        let walks = generate_walks(&graph, &forward, 3);
        // A walk starting at n0 with strong forward bias never backtracks.
        let w0 = &walks[0];
        assert!(w0.windows(2).all(|p| p[1] > p[0]), "walk {w0:?}");
    }
}
