//! Skip-gram with negative sampling over a walk corpus.
//!
//! Two training paths share the gradient math: a deterministic
//! single-threaded pass in fixed walk order (the contract for all
//! acceptance runs), and a lock-free parallel pass using relaxed atomic
//! loads/stores, enabled only when deterministic training is switched off.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::rng::{derive_seed, derive_seed2, seeded_rng};

const DOMAIN_INIT: u64 = 0x1;
const DOMAIN_NEGATIVE: u64 = 0x2;
/// Learning rate floor, as a fraction of the starting rate.
const LR_FLOOR: f64 = 1e-4;

pub struct SgnsConfig {
    pub dim: usize,
    pub context_window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub neg_exponent: f64,
    pub deterministic: bool,
}

/// Cumulative unigram^exponent table for negative sampling.
struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn build(corpus: &[Vec<u32>], n_nodes: usize, exponent: f64) -> Self {
        let mut counts = vec![0u64; n_nodes];
        for walk in corpus {
            for &node in walk {
                counts[node as usize] += 1;
            }
        }
        let mut cumulative = Vec::with_capacity(n_nodes);
        let mut acc = 0.0;
        for &c in &counts {
            if c > 0 {
                acc += (c as f64).powf(exponent);
            }
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    fn sample<R: rand::Rng>(&self, rng: &mut R) -> u32 {
        let total = *self.cumulative.last().unwrap();
        let r = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1) as u32
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One (center, target) update. Returns the gradient to accumulate on the
/// center's input vector; updates the target's output vector in place.
#[inline]
fn pair_gradient(
    input_row: &[f64],
    output_row: &mut [f64],
    label: f64,
    lr: f64,
    input_grad: &mut [f64],
) {
    let dot: f64 = input_row
        .iter()
        .zip(output_row.iter())
        .map(|(a, b)| a * b)
        .sum();
    let g = (label - sigmoid(dot)) * lr;
    for (acc, &out) in input_grad.iter_mut().zip(output_row.iter()) {
        *acc += g * out;
    }
    for (out, &inp) in output_row.iter_mut().zip(input_row.iter()) {
        *out += g * inp;
    }
}

pub(crate) fn init_input(n_nodes: usize, dim: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = seeded_rng(derive_seed(seed, DOMAIN_INIT));
    (0..n_nodes * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect()
}

/// Warm-start state: input and context vectors carried between trainings.
#[derive(Debug, Clone)]
pub struct TrainedVectors {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

/// Train and return the input and context embeddings, row-major
/// `n_nodes x dim`. `warm_start`, when given, seeds both vector tables
/// (fresh rows are used where it is shorter than the vocabulary).
pub fn train(
    corpus: &[Vec<u32>],
    n_nodes: usize,
    cfg: &SgnsConfig,
    seed: u64,
    warm_start: Option<&TrainedVectors>,
) -> TrainedVectors {
    let table = NegativeTable::build(corpus, n_nodes, cfg.neg_exponent);
    let total_tokens: usize = corpus.iter().map(Vec::len).sum::<usize>() * cfg.epochs;
    let mut input = init_input(n_nodes, cfg.dim, seed);
    let mut output = vec![0.0f64; n_nodes * cfg.dim];
    if let Some(start) = warm_start {
        let take = start.input.len().min(input.len());
        input[..take].copy_from_slice(&start.input[..take]);
        let take = start.output.len().min(output.len());
        output[..take].copy_from_slice(&start.output[..take]);
    }
    if total_tokens == 0 {
        return TrainedVectors { input, output };
    }
    if cfg.deterministic {
        train_deterministic(corpus, cfg, seed, &table, total_tokens, input, output)
    } else {
        train_hogwild(corpus, cfg, seed, &table, total_tokens, input, output)
    }
}

fn train_deterministic(
    corpus: &[Vec<u32>],
    cfg: &SgnsConfig,
    seed: u64,
    table: &NegativeTable,
    total_tokens: usize,
    mut input: Vec<f64>,
    mut output: Vec<f64>,
) -> TrainedVectors {
    let neg_domain = derive_seed(seed, DOMAIN_NEGATIVE);
    let mut input_grad = vec![0.0f64; cfg.dim];
    let mut processed = 0usize;

    for epoch in 0..cfg.epochs {
        for (walk_idx, walk) in corpus.iter().enumerate() {
            let mut rng = seeded_rng(derive_seed2(neg_domain, epoch as u64, walk_idx as u64));
            for (pos, &center) in walk.iter().enumerate() {
                let lr = cfg.learning_rate
                    * (1.0 - processed as f64 / total_tokens as f64).max(LR_FLOOR);
                processed += 1;
                let lo = pos.saturating_sub(cfg.context_window);
                let hi = (pos + cfg.context_window).min(walk.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = walk[ctx_pos];
                    train_window_pair(
                        &mut input,
                        &mut output,
                        center,
                        context,
                        cfg,
                        lr,
                        table,
                        &mut rng,
                        &mut input_grad,
                    );
                }
            }
        }
    }
    TrainedVectors { input, output }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn train_window_pair<R: rand::Rng>(
    input: &mut [f64],
    output: &mut [f64],
    center: u32,
    context: u32,
    cfg: &SgnsConfig,
    lr: f64,
    table: &NegativeTable,
    rng: &mut R,
    input_grad: &mut [f64],
) {
    let dim = cfg.dim;
    input_grad.iter_mut().for_each(|g| *g = 0.0);
    let in_off = center as usize * dim;
    {
        let (in_row, out_row) = split_rows(input, output, in_off, context as usize * dim, dim);
        pair_gradient(in_row, out_row, 1.0, lr, input_grad);
    }
    for _ in 0..cfg.negative_samples {
        let target = table.sample(rng);
        if target == context {
            continue;
        }
        let (in_row, out_row) = split_rows(input, output, in_off, target as usize * dim, dim);
        pair_gradient(in_row, out_row, 0.0, lr, input_grad);
    }
    for (x, g) in input[in_off..in_off + dim].iter_mut().zip(input_grad.iter()) {
        *x += g;
    }
}

#[inline]
fn split_rows<'a>(
    input: &'a [f64],
    output: &'a mut [f64],
    in_off: usize,
    out_off: usize,
    dim: usize,
) -> (&'a [f64], &'a mut [f64]) {
    (&input[in_off..in_off + dim], &mut output[out_off..out_off + dim])
}

// ----------------------------------------------------------------------
// Lock-free parallel path (non-deterministic mode)
// ----------------------------------------------------------------------

struct AtomicVectors {
    bits: Vec<AtomicU64>,
}

impl AtomicVectors {
    fn from_values(values: Vec<f64>) -> Self {
        Self {
            bits: values.into_iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
        }
    }

    #[inline]
    fn load(&self, idx: usize) -> f64 {
        f64::from_bits(self.bits[idx].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, idx: usize, delta: f64) {
        let cell = &self.bits[idx];
        let current = f64::from_bits(cell.load(Ordering::Relaxed));
        cell.store((current + delta).to_bits(), Ordering::Relaxed);
    }

    fn into_values(self) -> Vec<f64> {
        self.bits
            .into_iter()
            .map(|b| f64::from_bits(b.into_inner()))
            .collect()
    }
}

fn train_hogwild(
    corpus: &[Vec<u32>],
    cfg: &SgnsConfig,
    seed: u64,
    table: &NegativeTable,
    total_tokens: usize,
    input_values: Vec<f64>,
    output_values: Vec<f64>,
) -> TrainedVectors {
    let dim = cfg.dim;
    let input = AtomicVectors::from_values(input_values);
    let output = AtomicVectors::from_values(output_values);
    let neg_domain = derive_seed(seed, DOMAIN_NEGATIVE);
    let processed = AtomicUsize::new(0);

    for epoch in 0..cfg.epochs {
        corpus.par_iter().enumerate().for_each(|(walk_idx, walk)| {
            let mut rng = seeded_rng(derive_seed2(neg_domain, epoch as u64, walk_idx as u64));
            let mut in_row = vec![0.0f64; dim];
            let mut grad = vec![0.0f64; dim];
            for (pos, &center) in walk.iter().enumerate() {
                let done = processed.fetch_add(1, Ordering::Relaxed);
                let lr = cfg.learning_rate
                    * (1.0 - done as f64 / total_tokens as f64).max(LR_FLOOR);
                let in_off = center as usize * dim;
                let lo = pos.saturating_sub(cfg.context_window);
                let hi = (pos + cfg.context_window).min(walk.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    for k in 0..dim {
                        in_row[k] = input.load(in_off + k);
                        grad[k] = 0.0;
                    }
                    let mut apply = |target: u32, label: f64| {
                        let out_off = target as usize * dim;
                        let mut dot = 0.0;
                        for k in 0..dim {
                            dot += in_row[k] * output.load(out_off + k);
                        }
                        let g = (label - sigmoid(dot)) * lr;
                        for k in 0..dim {
                            grad[k] += g * output.load(out_off + k);
                            output.add(out_off + k, g * in_row[k]);
                        }
                    };
                    let context = walk[ctx_pos];
                    apply(context, 1.0);
                    for _ in 0..cfg.negative_samples {
                        let target = table.sample(&mut rng);
                        if target != context {
                            apply(target, 0.0);
                        }
                    }
                    for k in 0..dim {
                        input.add(in_off + k, grad[k]);
                    }
                }
            }
        });
    }
    TrainedVectors {
        input: input.into_values(),
        output: output.into_values(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_corpus() -> Vec<Vec<u32>> {
        // Two "communities" {0,1,2} and {3,4,5} with separate walks.
        let mut corpus = Vec::new();
        for _ in 0..30 {
            corpus.push(vec![0, 1, 2, 0, 2, 1, 0, 1]);
            corpus.push(vec![3, 4, 5, 3, 5, 4, 3, 4]);
        }
        corpus
    }

    fn cfg(deterministic: bool) -> SgnsConfig {
        SgnsConfig {
            dim: 8,
            context_window: 3,
            negative_samples: 4,
            epochs: 3,
            learning_rate: 0.05,
            neg_exponent: 0.75,
            deterministic,
        }
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn deterministic_training_is_bit_stable() {
        let corpus = toy_corpus();
        let a = train(&corpus, 6, &cfg(true), 42, None);
        let b = train(&corpus, 6, &cfg(true), 42, None);
        assert_eq!(a.input, b.input);
        assert_eq!(a.output, b.output);
        let c = train(&corpus, 6, &cfg(true), 43, None);
        assert_ne!(a.input, c.input);
    }

    #[test]
    fn warm_start_seeds_the_tables() {
        let corpus = toy_corpus();
        let first = train(&corpus, 6, &cfg(true), 42, None);
        let resumed = train(&corpus, 6, &cfg(true), 42, Some(&first));
        let fresh = train(&corpus, 6, &cfg(true), 42, None);
        assert_ne!(resumed.input, fresh.input);
        // Resumed training stays near its starting point.
        let drift: f64 = resumed
            .input
            .iter()
            .zip(first.input.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = first.input.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(drift < scale, "drift {drift} vs scale {scale}");
    }

    #[test]
    fn cooccurring_nodes_end_up_closer() {
        let corpus = toy_corpus();
        let emb = train(&corpus, 6, &cfg(true), 7, None).input;
        let row = |i: usize| &emb[i * 8..(i + 1) * 8];
        let intra = (cosine(row(0), row(1)) + cosine(row(1), row(2)) + cosine(row(3), row(4)))
            / 3.0;
        let inter = (cosine(row(0), row(3)) + cosine(row(1), row(4)) + cosine(row(2), row(5)))
            / 3.0;
        assert!(
            intra > inter,
            "intra-community similarity {intra} should exceed inter {inter}"
        );
    }

    #[test]
    fn hogwild_path_produces_finite_vectors() {
        let corpus = toy_corpus();
        let emb = train(&corpus, 6, &cfg(false), 7, None).input;
        assert!(emb.iter().all(|v| v.is_finite()));
        let norms: Vec<f64> = (0..6)
            .map(|i| emb[i * 8..(i + 1) * 8].iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        assert!(norms.iter().all(|&n| n > 0.0));
    }
}
