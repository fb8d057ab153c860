//! One-off diagnostics for the planted-driver pipeline. Ignored by default.

use std::collections::BTreeSet;

use cts_core::embed::Node2VecParams;
use cts_core::ingest::{load_transactions_from_reader, regular_nodes};
use cts_core::synth::{generate, SynthSpec};
use cts_core::tensor::{correlation_tensor, WindowSpec};

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

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
#[ignore]
fn chain_diagnostics() {
    let seed = 0u64;
    let synth = SynthSpec {
        num_nodes: 60,
        num_weeks: 20,
        base_rate: 4.0,
        driver_fraction: 0.25,
        bubble_weeks: (8..=12).collect(),
        bubble_boost: 20.0,
        seed,
        ..SynthSpec::default()
    };
    let out = generate(&synth).unwrap();
    let report = load_transactions_from_reader(
        out.transactions_csv.as_bytes(),
        synth.start_date,
        synth.num_weeks,
    )
    .unwrap();
    let index = regular_nodes(&report.networks).unwrap();
    let params = desk_embed_params();
    let truth: BTreeSet<usize> = out
        .ground_truth
        .drivers
        .iter()
        .map(|w| index.index_of(w).unwrap())
        .collect();
    let n = index.len();
    let d = params.dim;

    let series = cts_core::embed_series(&report.networks, &index, &params, seed).unwrap();

    // 1. Does the driver cluster form geometrically at the bubble peak?
    for week in [2usize, 8, 9, 10, 11, 12, 17] {
        let row = |i: usize| {
            (0..d)
                .map(|a| series.component(week, i, a))
                .collect::<Vec<f64>>()
        };
        let mut dd = Vec::new();
        let mut bb = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let c = cosine(&row(i), &row(j));
                match (truth.contains(&i), truth.contains(&j)) {
                    (true, true) => dd.push(c),
                    (false, false) => bb.push(c),
                    _ => {}
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "week {week}: cos(driver,driver) {:.3}, cos(back,back) {:.3}",
            mean(&dd),
            mean(&bb)
        );
    }

    // 2. Week-over-week displacement, drivers vs background.
    for week in [2usize, 9, 10, 11, 17] {
        let mut disp_d = 0.0;
        let mut disp_b = 0.0;
        let (mut cd, mut cb) = (0, 0);
        for i in 0..n {
            let mut acc = 0.0;
            for a in 0..d {
                let delta = series.component(week, i, a) - series.component(week - 1, i, a);
                acc += delta * delta;
            }
            if truth.contains(&i) {
                disp_d += acc.sqrt();
                cd += 1;
            } else {
                disp_b += acc.sqrt();
                cb += 1;
            }
        }
        println!(
            "week {week}: displacement driver {:.4}, background {:.4}",
            disp_d / cd as f64,
            disp_b / cb as f64
        );
    }

    // 3. Correlation block structure at the bubble peak, alpha = beta slices.
    let tensor = correlation_tensor(&series, 10, WindowSpec::new(2).unwrap()).unwrap();
    let mut dd = Vec::new();
    let mut bb = Vec::new();
    let mut cross = Vec::new();
    for a in 0..d {
        let slice = tensor.dense_slice(a, a);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = slice[(i, j)];
                match (truth.contains(&i), truth.contains(&j)) {
                    (true, true) => dd.push(v),
                    (false, false) => bb.push(v),
                    _ => cross.push(v),
                }
            }
        }
    }
    let stats = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let mean_abs = v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
        (mean, mean_abs)
    };
    let (md, mad) = stats(&dd);
    let (mb, mab) = stats(&bb);
    let (mc, mac) = stats(&cross);
    println!("corr dd mean {md:.3} |{mad:.3}|, bb mean {mb:.3} |{mab:.3}|, cross {mc:.3} |{mac:.3}|");
}
