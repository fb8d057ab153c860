//! Calibration pilots, ignored by default. Run explicitly with
//! `cargo test --release -p cts-core --test pilot -- --ignored --nocapture`.

use std::collections::BTreeSet;

use cts_core::analysis::driver_set;
use cts_core::embed::{embed_series, Node2VecParams};
use cts_core::ingest::{load_transactions_from_reader, regular_nodes};
use cts_core::nullmodels::{
    gaussian_double_svd, quarter_circle_ks, AnalyticSpectrum, GaussianTensor, GaussianTensorSpec,
};
use cts_core::rng::derive_seed;
use cts_core::spectra::{double_svd, largest_singular_vectors};
use cts_core::synth::{generate, SynthSpec};
use cts_core::tensor::{correlation_tensor, reshuffled_tensor, WindowSpec};

fn desk_embed_params() -> Node2VecParams {
    Node2VecParams {
        dim: 8,
        walks_per_node: 24,
        walk_length: 20,
        context_window: 4,
        negative_samples: 5,
        epochs: 5,
        learning_rate: 0.05,
        ..Node2VecParams::default()
    }
}

fn recovery_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        num_nodes: 60,
        num_weeks: 20,
        base_rate: 4.0,
        driver_fraction: 0.25,
        bubble_weeks: (8..=12).collect(),
        bubble_boost: 20.0,
        seed,
        ..SynthSpec::default()
    }
}

#[test]
#[ignore]
fn null_separation_pilot() {
    let spec = WindowSpec::new(2).unwrap();
    let mut wins = 0usize;
    let mut total = 0usize;
    for seed in 0..10u64 {
        let synth = recovery_spec(seed);
        let out = generate(&synth).unwrap();
        let report = load_transactions_from_reader(
            out.transactions_csv.as_bytes(),
            synth.start_date,
            synth.num_weeks,
        )
        .unwrap();
        let index = regular_nodes(&report.networks).unwrap();
        let series = embed_series(&report.networks, &index, &desk_embed_params(), seed).unwrap();
        let mut seed_wins = 0;
        let mut seed_total = 0;
        for t in spec.valid_centers(series.num_weeks()).unwrap() {
            let empirical = double_svd(&correlation_tensor(&series, t, spec).unwrap()).largest();
            let shuffled = double_svd(
                &reshuffled_tensor(&series, t, spec, derive_seed(seed, 0xF5 + t as u64)).unwrap(),
            )
            .largest();
            seed_total += 1;
            if empirical > shuffled {
                seed_wins += 1;
            }
        }
        println!("seed {seed}: empirical above reshuffled in {seed_wins}/{seed_total} weeks");
        wins += seed_wins;
        total += seed_total;
    }
    println!(
        "overall {wins}/{total} = {:.3}",
        wins as f64 / total as f64
    );
}

#[test]
#[ignore]
fn driver_component_distribution_pilot() {
    let window = WindowSpec::new(2).unwrap();
    let params = desk_embed_params();
    for seed in 0..4u64 {
        let synth = recovery_spec(seed);
        let out = generate(&synth).unwrap();
        let report = load_transactions_from_reader(
            out.transactions_csv.as_bytes(),
            synth.start_date,
            synth.num_weeks,
        )
        .unwrap();
        let index = regular_nodes(&report.networks).unwrap();
        // Common random numbers: every week embeds with the same seed, so
        // init and walk streams are shared and only graph changes move
        // the vectors.
        let weeks: Vec<std::collections::BTreeMap<String, Vec<f64>>> = report
            .networks
            .iter()
            .map(|net| cts_core::embed_week(net, &params, seed).unwrap())
            .collect();
        let mut flat_weeks = Vec::new();
        for week_map in &weeks {
            let mut flat = Vec::with_capacity(index.len() * params.dim);
            for wallet in index.iter() {
                flat.extend_from_slice(&week_map[wallet]);
            }
            flat_weeks.push(flat);
        }
        let series = cts_core::EmbeddingSeries::from_flat_weeks(
            &flat_weeks,
            index.len(),
            params.dim,
            seed,
        )
        .unwrap();
        let truth: BTreeSet<usize> = out
            .ground_truth
            .drivers
            .iter()
            .map(|w| index.index_of(w).unwrap())
            .collect();
        let week = 10; // bubble middle
        let tensor = correlation_tensor(&series, week, window).unwrap();
        let field = largest_singular_vectors(&tensor);
        let n = index.len();
        let d = series.dim();
        let mut driver_abs = 0.0;
        let mut other_abs = 0.0;
        let (mut nd, mut no) = (0usize, 0usize);
        for i in 0..n {
            for a in 0..d {
                for b in 0..d {
                    let v = field.l1[(i, a, b)].abs();
                    if truth.contains(&i) {
                        driver_abs += v;
                        nd += 1;
                    } else {
                        other_abs += v;
                        no += 1;
                    }
                }
            }
        }
        print!(
            "seed {seed}: mean|L1| driver {:.4} vs other {:.4} |",
            driver_abs / nd as f64,
            other_abs / no as f64
        );
        for threshold in [0.05, 0.10, 0.15, 0.20] {
            for margin in [1.0, 3.0, 5.0] {
                let left = driver_set(&field.l1, threshold, margin).unwrap();
                let right = driver_set(&field.r1, threshold, margin).unwrap();
                let union: BTreeSet<usize> = left
                    .driver_set
                    .iter()
                    .chain(right.driver_set.iter())
                    .copied()
                    .collect();
                let hits = union.intersection(&truth).count();
                let recall = hits as f64 / truth.len() as f64;
                let fp_rate = if union.is_empty() {
                    0.0
                } else {
                    (union.len() - hits) as f64 / union.len() as f64
                };
                print!(" t{threshold}/m{margin}: r{recall:.2} f{fp_rate:.2}");
            }
        }
        println!();
    }
}

#[test]
#[ignore]
fn driver_recovery_pilot() {
    let window = WindowSpec::new(2).unwrap();
    let margins = [1.0, 2.0, 3.0, 5.0, 8.0, 10.0];
    let mut pass_counts = vec![0usize; margins.len()];
    for seed in 0..10u64 {
        let synth = recovery_spec(seed);
        let out = generate(&synth).unwrap();
        let report = load_transactions_from_reader(
            out.transactions_csv.as_bytes(),
            synth.start_date,
            synth.num_weeks,
        )
        .unwrap();
        let index = regular_nodes(&report.networks).unwrap();
        let series = embed_series(&report.networks, &index, &desk_embed_params(), seed).unwrap();
        // Detection week: center with the largest rho_1^1.
        let mut best = (0usize, f64::MIN);
        for t in window.valid_centers(series.num_weeks()).unwrap() {
            let rho = double_svd(&correlation_tensor(&series, t, window).unwrap()).largest();
            if rho > best.1 {
                best = (t, rho);
            }
        }
        let tensor = correlation_tensor(&series, best.0, window).unwrap();
        let field = largest_singular_vectors(&tensor);
        let truth: BTreeSet<String> = out.ground_truth.drivers.iter().cloned().collect();
        print!(
            "seed {seed}: week*={} (bubble {:?})",
            best.0, out.ground_truth.bubble_weeks
        );
        for (mi, &margin) in margins.iter().enumerate() {
            let left = driver_set(&field.l1, 0.05, margin).unwrap();
            let right = driver_set(&field.r1, 0.05, margin).unwrap();
            let union: BTreeSet<String> = left
                .driver_set
                .iter()
                .chain(right.driver_set.iter())
                .map(|&i| index.wallet(i).to_string())
                .collect();
            let hits = union.intersection(&truth).count();
            let recall = hits as f64 / truth.len() as f64;
            let fp = union.len() - hits;
            let fp_rate = if union.is_empty() {
                0.0
            } else {
                fp as f64 / union.len() as f64
            };
            if recall >= 0.6 && fp_rate <= 0.2 {
                pass_counts[mi] += 1;
            }
            print!("  m{margin}: rec {recall:.2} fp {fp_rate:.2} (|set| {})", union.len());
        }
        println!();
    }
    for (mi, &margin) in margins.iter().enumerate() {
        println!("margin {margin}: {}/10 seeds pass", pass_counts[mi]);
    }
}

#[test]
#[ignore]
fn paper_scale_null_pilot() {
    let start = std::time::Instant::now();
    for seed in 0..3u64 {
        let spec = GaussianTensorSpec {
            n: 265,
            dim: 32,
            sigma_g: 0.5,
            seed,
        };
        let tensor = GaussianTensor::lazy(spec).unwrap();
        let t0 = std::time::Instant::now();
        let spectrum = gaussian_double_svd(&tensor);
        let law = AnalyticSpectrum::from_spec(&spec);
        let values: Vec<f64> = (0..spectrum.k_max).map(|k| spectrum.rho[(k, 0)]).collect();
        let ks = quarter_circle_ks(&values, &spec).unwrap();
        let mut worst_ratio = 0.0f64;
        let mut worst_k = 0;
        for k in 0..spectrum.k_max {
            let r = spectrum.rho[(k, 1)] / spectrum.rho[(k, 0)];
            if r > worst_ratio {
                worst_ratio = r;
                worst_k = k;
            }
        }
        let over: Vec<usize> = (0..spectrum.k_max)
            .filter(|&k| spectrum.rho[(k, 1)] / spectrum.rho[(k, 0)] >= 0.2)
            .collect();
        let max_vs_top = (0..spectrum.k_max)
            .map(|k| spectrum.rho[(k, 1)] / spectrum.largest())
            .fold(0.0f64, f64::max);
        println!(
            "seed {seed}: rho11 {:.3} (edge {:.3}, rel {:.4}), ks {ks:.4}, max ratio {:.4} at k={worst_k}, ratio>=0.2 at k={over:?}, max rho_k^2/rho_1^1 {:.5}, elapsed {:?}",
            spectrum.largest(),
            law.rho_max,
            (spectrum.largest() - law.rho_max).abs() / law.rho_max,
            worst_ratio,
            max_vs_top,
            t0.elapsed()
        );
    }
    println!("total {:?}", start.elapsed());
}

#[test]
#[ignore]
fn desk_scale_null_pilot() {
    for seed in 0..10u64 {
        let spec = GaussianTensorSpec {
            n: 64,
            dim: 8,
            sigma_g: 0.5,
            seed,
        };
        let tensor = GaussianTensor::lazy(spec).unwrap();
        let t0 = std::time::Instant::now();
        let spectrum = gaussian_double_svd(&tensor);
        let law = AnalyticSpectrum::from_spec(&spec);
        let values: Vec<f64> = (0..spectrum.k_max).map(|k| spectrum.rho[(k, 0)]).collect();
        let ks = quarter_circle_ks(&values, &spec).unwrap();
        let ratios: Vec<f64> = (0..spectrum.k_max)
            .map(|k| spectrum.rho[(k, 1)] / spectrum.rho[(k, 0)])
            .collect();
        let max_all = ratios.iter().cloned().fold(0.0f64, f64::max);
        let max_half = ratios[..32].iter().cloned().fold(0.0f64, f64::max);
        println!(
            "seed {seed}: rel_edge {:.4}, ks {ks:.4}, ratio max {max_all:.4} (top half {max_half:.4}), elapsed {:?}",
            (spectrum.largest() - law.rho_max).abs() / law.rho_max,
            t0.elapsed()
        );
    }
}
