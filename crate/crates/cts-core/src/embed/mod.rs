//! Weekly network embedding via node2vec: biased random walks feeding a
//! skip-gram model with negative sampling.
//!
//! Every week is trained independently; per-week seeds derive from the
//! master seed and the week index, so weeks can embed in parallel with
//! bit-identical results. With the deterministic flag on (the default),
//! training within a week is single-threaded in fixed walk order and the
//! output is byte-stable; switching it off enables lock-free parallel
//! updates at the cost of run-to-run variation.

mod cache;
mod graph;
mod sgns;
mod walks;

pub use cache::{read_cache, read_cache_file, write_cache, write_cache_file, CachedWeek};
pub use graph::WeekGraph;
pub use walks::generate_walks;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use ndarray::{Array3, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::ingest::{RegularNodeIndex, WeeklyNetwork};
use crate::rng::derive_seed;

/// node2vec parameters. The return/in-out parameters default to p = q = 1
/// (plain weighted walks); the remaining knobs follow the reference
/// implementation defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Node2VecParams {
    pub p: f64,
    pub q: f64,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub context_window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dim: usize,
    /// Exponent on unigram frequency for negative sampling.
    pub neg_exponent: f64,
    /// Treat weekly networks as undirected for walks.
    pub symmetrize: bool,
    /// Single-threaded training per week, byte-stable output.
    pub deterministic_training: bool,
    /// Align each week to the previous one with an orthogonal rotation.
    pub procrustes_align: bool,
    /// Initialize each week's training from the previous week's vectors
    /// (matched by wallet), giving temporally continuous embeddings.
    /// Weeks train sequentially when enabled.
    pub warm_start: bool,
}

impl Default for Node2VecParams {
    fn default() -> Self {
        Self {
            p: 1.0,
            q: 1.0,
            walks_per_node: 10,
            walk_length: 80,
            context_window: 10,
            negative_samples: 5,
            epochs: 5,
            learning_rate: 0.025,
            dim: 32,
            neg_exponent: 0.75,
            symmetrize: false,
            deterministic_training: true,
            procrustes_align: false,
            warm_start: false,
        }
    }
}

impl Node2VecParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p", self.p),
            ("q", self.q),
            ("learning_rate", self.learning_rate),
            ("neg_exponent", self.neg_exponent),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(CoreError::InvalidParam(format!("{name} must be positive")));
            }
        }
        let counts = [
            ("walks_per_node", self.walks_per_node),
            ("walk_length", self.walk_length),
            ("context_window", self.context_window),
            ("negative_samples", self.negative_samples),
            ("epochs", self.epochs),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(CoreError::InvalidParam(format!("{name} must be positive")));
            }
        }
        if self.dim < 2 {
            return Err(CoreError::InvalidParam("dim must be >= 2".into()));
        }
        Ok(())
    }

    fn sgns_config(&self) -> sgns::SgnsConfig {
        sgns::SgnsConfig {
            dim: self.dim,
            context_window: self.context_window,
            negative_samples: self.negative_samples,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            neg_exponent: self.neg_exponent,
            deterministic: self.deterministic_training,
        }
    }
}

/// Per-week embedding vectors of the regular nodes: shape (T, N, D).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSeries {
    vectors: Array3<f64>,
    pub seed: u64,
}

impl EmbeddingSeries {
    /// Wrap a (T, N, D) array, validating finiteness.
    pub fn from_array(vectors: Array3<f64>, seed: u64) -> Result<Self> {
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidParam(
                "embedding series contains non-finite values".into(),
            ));
        }
        Ok(Self { vectors, seed })
    }

    /// Assemble from per-week row-major (node x dim) blocks, as read back
    /// from the embedding cache files.
    pub fn from_flat_weeks(weeks: &[Vec<f64>], nodes: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut vectors = Array3::zeros((weeks.len(), nodes, dim));
        for (w, flat) in weeks.iter().enumerate() {
            if flat.len() != nodes * dim {
                return Err(CoreError::InvalidParam(format!(
                    "week {w}: expected {} values, got {}",
                    nodes * dim,
                    flat.len()
                )));
            }
            for i in 0..nodes {
                for a in 0..dim {
                    vectors[(w, i, a)] = flat[i * dim + a];
                }
            }
        }
        Self::from_array(vectors, seed)
    }

    pub fn num_weeks(&self) -> usize {
        self.vectors.shape()[0]
    }

    pub fn num_nodes(&self) -> usize {
        self.vectors.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.vectors.shape()[2]
    }

    pub fn vectors(&self) -> &Array3<f64> {
        &self.vectors
    }

    #[inline]
    pub fn component(&self, week: usize, node: usize, component: usize) -> f64 {
        self.vectors[(week, node, component)]
    }

    /// The N x D matrix of one week.
    pub fn week_matrix(&self, week: usize) -> ArrayView2<'_, f64> {
        self.vectors.index_axis(Axis(0), week)
    }
}

/// Derived seed for one week of one embedding run.
pub fn week_seed(master: u64, week_index: usize) -> u64 {
    derive_seed(master, week_index as u64)
}

/// One embedded week: node names in index order plus trained vectors.
struct WeekState {
    week: usize,
    names: Vec<String>,
    trained: sgns::TrainedVectors,
}

/// Embed a single weekly network. Returns one D-vector per node present
/// that week. Identical (network, params, seed) inputs give bit-identical
/// output.
pub fn embed_week(
    network: &WeeklyNetwork,
    params: &Node2VecParams,
    seed: u64,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let state = embed_week_core(network, params, seed, None)?;
    let dim = params.dim;
    Ok(state
        .names
        .into_iter()
        .enumerate()
        .map(|(i, name)| (name, state.trained.input[i * dim..(i + 1) * dim].to_vec()))
        .collect())
}

fn embed_week_core(
    network: &WeeklyNetwork,
    params: &Node2VecParams,
    seed: u64,
    warm: Option<&WeekState>,
) -> Result<WeekState> {
    params.validate()?;
    if network.edge_count() == 0 {
        return Err(CoreError::EmptyNetwork {
            week: network.week_index,
        });
    }
    let graph = WeekGraph::from_network(network, params.symmetrize);
    let corpus = generate_walks(&graph, params, seed);
    let dim = params.dim;
    // Warm start: carry last week's vectors over by wallet; nodes first
    // seen this week keep their fresh rows.
    let warm_vectors = warm.map(|prev| {
        let mut input = sgns::init_input(graph.node_count(), dim, seed);
        let mut output = vec![0.0f64; graph.node_count() * dim];
        for (i, name) in graph.node_names().iter().enumerate() {
            if let Ok(j) = prev.names.binary_search(name) {
                input[i * dim..(i + 1) * dim]
                    .copy_from_slice(&prev.trained.input[j * dim..(j + 1) * dim]);
                output[i * dim..(i + 1) * dim]
                    .copy_from_slice(&prev.trained.output[j * dim..(j + 1) * dim]);
            }
        }
        sgns::TrainedVectors { input, output }
    });
    let trained = sgns::train(
        &corpus,
        graph.node_count(),
        &params.sgns_config(),
        seed,
        warm_vectors.as_ref(),
    );
    Ok(WeekState {
        week: network.week_index,
        names: graph.node_names().to_vec(),
        trained,
    })
}

/// Embed every week and keep only regular-node rows, in index order.
/// Weeks run in parallel unless warm starting chains them sequentially.
pub fn embed_series(
    networks: &[WeeklyNetwork],
    index: &RegularNodeIndex,
    params: &Node2VecParams,
    seed: u64,
) -> Result<EmbeddingSeries> {
    params.validate()?;
    let wrap = |week: usize| {
        move |source: CoreError| CoreError::WeekEmbedding {
            week,
            source: Box::new(source),
        }
    };
    let weeks: Vec<WeekState> = if params.warm_start {
        let mut states: Vec<WeekState> = Vec::with_capacity(networks.len());
        for network in networks {
            let state = embed_week_core(
                network,
                params,
                week_seed(seed, network.week_index),
                states.last(),
            )
            .map_err(wrap(network.week_index))?;
            states.push(state);
        }
        states
    } else {
        networks
            .par_iter()
            .map(|network| {
                embed_week_core(network, params, week_seed(seed, network.week_index), None)
                    .map_err(wrap(network.week_index))
            })
            .collect::<Result<_>>()?
    };

    let (t, n, d) = (networks.len(), index.len(), params.dim);
    let mut vectors = Array3::zeros((t, n, d));
    for (w, state) in weeks.iter().enumerate() {
        for i in 0..n {
            let wallet = index.wallet(i);
            let row = state
                .names
                .binary_search_by(|name| name.as_str().cmp(wallet))
                .map_err(|_| CoreError::WeekEmbedding {
                    week: state.week,
                    source: Box::new(CoreError::InvalidParam(format!(
                        "regular node {wallet} missing from week {w}"
                    ))),
                })?;
            for a in 0..d {
                vectors[(w, i, a)] = state.trained.input[row * d + a];
            }
        }
    }
    if params.procrustes_align {
        align_series(&mut vectors);
    }
    EmbeddingSeries::from_array(vectors, seed)
}

/// Chain each week to its aligned predecessor by the orthogonal rotation
/// minimizing the Frobenius distance between consecutive regular blocks.
fn align_series(vectors: &mut Array3<f64>) {
    let (t, n, d) = (
        vectors.shape()[0],
        vectors.shape()[1],
        vectors.shape()[2],
    );
    for w in 1..t {
        let current = DMatrix::from_fn(n, d, |i, a| vectors[(w, i, a)]);
        let previous = DMatrix::from_fn(n, d, |i, a| vectors[(w - 1, i, a)]);
        let m = current.transpose() * previous;
        let svd = m.svd(true, true);
        let rotation = svd.u.unwrap() * svd.v_t.unwrap();
        let aligned = current * rotation;
        for i in 0..n {
            for a in 0..d {
                vectors[(w, i, a)] = aligned[(i, a)];
            }
        }
    }
}

/// Independent embedding runs for an ensemble of distinct master seeds.
pub fn embed_ensemble(
    networks: &[WeeklyNetwork],
    index: &RegularNodeIndex,
    params: &Node2VecParams,
    seeds: &[u64],
) -> Result<Vec<EmbeddingSeries>> {
    if seeds.is_empty() {
        return Err(CoreError::InvalidParam("ensemble needs at least one seed".into()));
    }
    let unique: BTreeSet<u64> = seeds.iter().copied().collect();
    if unique.len() != seeds.len() {
        return Err(CoreError::DuplicateSeeds);
    }
    seeds
        .iter()
        .map(|&seed| embed_series(networks, index, params, seed))
        .collect()
}
