//! Synthetic transaction ledger and price generator with planted regimes.
//!
//! Every node transacts at least once per week, so the whole population is
//! regular by construction. A planted driver subset trades among itself
//! with ramped intensity during the bubble weeks, and the price carries a
//! deterministic rise-and-fall component over the same span, giving the
//! analysis modules a signed signal with known ground truth.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::{derive_seed, seeded_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceModel {
    pub initial: f64,
    /// Weekly log-drift of the baseline geometric random walk.
    pub drift: f64,
    /// Weekly log-volatility of the baseline walk.
    pub volatility: f64,
    /// Peak log-amplitude of the deterministic bubble ramp.
    pub bubble_amplitude: f64,
}

impl Default for PriceModel {
    fn default() -> Self {
        Self {
            initial: 0.25,
            drift: 0.0,
            volatility: 0.02,
            bubble_amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_nodes: usize,
    pub num_weeks: usize,
    /// Expected transactions per node per week (minimum one is enforced).
    pub base_rate: f64,
    pub driver_fraction: f64,
    pub bubble_weeks: BTreeSet<usize>,
    /// Multiplier on driver-internal volume during bubble weeks; 1 plants
    /// nothing.
    pub bubble_boost: f64,
    pub price: PriceModel,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_nodes: 60,
            num_weeks: 20,
            base_rate: 4.0,
            driver_fraction: 0.2,
            bubble_weeks: (8..=12).collect(),
            bubble_boost: 20.0,
            price: PriceModel::default(),
            start_date: NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(),
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_nodes < 2 {
            return Err(CoreError::InvalidParam("num_nodes must be >= 2".into()));
        }
        if self.num_weeks == 0 {
            return Err(CoreError::InvalidParam("num_weeks must be positive".into()));
        }
        if !(self.base_rate > 0.0) {
            return Err(CoreError::InvalidParam("base_rate must be positive".into()));
        }
        if !(self.driver_fraction > 0.0 && self.driver_fraction < 1.0) {
            return Err(CoreError::InvalidParam(
                "driver_fraction must be in (0, 1)".into(),
            ));
        }
        if !(self.bubble_boost >= 1.0) {
            return Err(CoreError::InvalidParam("bubble_boost must be >= 1".into()));
        }
        if let Some(&w) = self.bubble_weeks.iter().next_back() {
            if w >= self.num_weeks {
                return Err(CoreError::InvalidParam(format!(
                    "bubble week {w} outside [0, {})",
                    self.num_weeks
                )));
            }
        }
        if !(self.price.initial > 0.0) {
            return Err(CoreError::InvalidParam("price.initial must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub drivers: Vec<String>,
    pub bubble_weeks: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub transactions_csv: String,
    pub prices_csv: String,
    pub ground_truth: GroundTruth,
}

fn wallet_name(index: usize) -> String {
    format!("N{index:05}")
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-12);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Triangular bubble intensity: 0 outside bubble weeks, rising to 1 at the
/// middle of the bubble span.
fn bubble_ramp(spec: &SynthSpec, week: usize) -> f64 {
    if !spec.bubble_weeks.contains(&week) {
        return 0.0;
    }
    let weeks: Vec<usize> = spec.bubble_weeks.iter().copied().collect();
    let pos = weeks.iter().position(|&w| w == week).unwrap() as f64;
    let len = weeks.len() as f64;
    let x = (pos + 0.5) / len;
    1.0 - (2.0 * x - 1.0).abs()
}

/// Fraction of weeks carrying one extra uniformly random transaction per
/// node, so the background topology is persistent but not sterile.
const CHURN_PROBABILITY: f64 = 0.05;

/// Generate the ledger, the daily price file, and the planted ground truth.
/// Deterministic under `spec.seed`.
///
/// Each node routes its weekly volume along a persistent set of favorite
/// edges with stable shares, so background structure is stationary up to
/// small weight noise. The plant: during bubble weeks every driver shifts
/// the fraction `ramp(week) * (1 - 1/boost)` of its volume from its
/// favorites onto persistent driver-to-driver edges, then shifts it back.
/// Volumes are conserved, so only the flow pattern carries the signal.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let n = spec.num_nodes;
    let num_drivers = ((spec.driver_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let favorites_per_node = (spec.base_rate.round() as usize).clamp(1, n - 1);

    // Planted driver subset.
    let mut setup_rng = seeded_rng(derive_seed(spec.seed, 0x0D));
    let drivers: BTreeSet<usize> = rand::seq::index::sample(&mut setup_rng, n, num_drivers)
        .into_iter()
        .collect();
    let driver_list: Vec<usize> = drivers.iter().copied().collect();

    // Persistent favorite destinations and volume shares per node.
    fn pick_distinct<R: Rng>(rng: &mut R, node: usize, pool: &[usize], count: usize) -> Vec<usize> {
        let mut picks: Vec<usize> = Vec::with_capacity(count);
        while picks.len() < count.min(pool.len() - usize::from(pool.contains(&node))) {
            let candidate = pool[rng.gen_range(0..pool.len())];
            if candidate != node && !picks.contains(&candidate) {
                picks.push(candidate);
            }
        }
        picks
    }
    let all_nodes: Vec<usize> = (0..n).collect();
    let favorites: Vec<Vec<usize>> = (0..n)
        .map(|node| pick_distinct(&mut setup_rng, node, &all_nodes, favorites_per_node))
        .collect();
    let shares: Vec<Vec<f64>> = favorites
        .iter()
        .map(|f| {
            let raw: Vec<f64> = f.iter().map(|_| setup_rng.gen::<f64>() + 0.2).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
        .collect();
    // The planted cluster is the complete digraph on the drivers, so the
    // redirected flow embeds them tightly and the structure persists
    // across bubble weeks.
    let driver_targets: Vec<Vec<usize>> = (0..n)
        .map(|node| {
            if drivers.contains(&node) && num_drivers > 1 {
                driver_list.iter().copied().filter(|&d| d != node).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    // Common anchor nodes all drivers transact with outside bubble weeks.
    // Every driver shares the same anchors, so the drivers co-embed and
    // the anchors-to-cluster flow swing moves them as one.
    let background_list: Vec<usize> = (0..n).filter(|i| !drivers.contains(i)).collect();
    let anchor_count = 3.min(background_list.len());
    let anchors = pick_distinct(&mut setup_rng, n, &background_list, anchor_count);

    let base_volume = 100.0 * spec.base_rate;
    let mut transactions = String::from("timestamp,source,destination,amount\n");
    let week_seconds = 7 * 86_400i64;
    let start_ts = spec
        .start_date
        .and_hms_opt(0, 0, 0)
        .unwrap()
        .and_utc()
        .timestamp();

    // Structural share of driver behavior; zero at boost = 1, where the
    // designated drivers are generated exactly like everyone else.
    let mix = 1.0 - 1.0 / spec.bubble_boost;

    for week in 0..spec.num_weeks {
        let mut rng = seeded_rng(derive_seed(spec.seed, 0x100 + week as u64));
        let ramp = bubble_ramp(spec, week);
        for node in 0..n {
            let mut emit = |src: usize, dst: usize, amount: f64, rng: &mut rand_chacha::ChaCha12Rng| {
                let ts = start_ts + week as i64 * week_seconds + rng.gen_range(0..week_seconds);
                writeln!(
                    transactions,
                    "{ts},{},{},{amount}",
                    wallet_name(src),
                    wallet_name(dst)
                )
                .unwrap();
            };
            // Weekly volume with small lognormal noise.
            let volume = base_volume * (0.02 * standard_normal(&mut rng)).exp();
            let is_driver = !driver_targets[node].is_empty() && !anchors.is_empty();
            let (cluster_share, anchor_share) = if is_driver {
                (mix * ramp, mix * (1.0 - ramp))
            } else {
                (0.0, 0.0)
            };
            let background_share = 1.0 - cluster_share - anchor_share;
            for (f, &dest) in favorites[node].iter().enumerate() {
                let amount = volume * shares[node][f] * background_share;
                if amount > 0.0 {
                    emit(node, dest, amount, &mut rng);
                }
            }
            if anchor_share > 0.0 {
                let k = anchors.len() as f64;
                for &dest in &anchors {
                    emit(node, dest, volume * anchor_share / k, &mut rng);
                }
            }
            if cluster_share > 0.0 {
                let k = driver_targets[node].len() as f64;
                for &dest in &driver_targets[node] {
                    emit(node, dest, volume * cluster_share / k, &mut rng);
                }
            }
            // Occasional uniformly random extra edge.
            if rng.gen::<f64>() < CHURN_PROBABILITY {
                let mut pick = rng.gen_range(0..n - 1);
                if pick >= node {
                    pick += 1;
                }
                emit(node, pick, 0.05 * volume, &mut rng);
            }
        }
    }

    // Price: geometric random walk plus a deterministic bubble ramp.
    let mut prices = String::from("date,close\n");
    let mut price_rng = seeded_rng(derive_seed(spec.seed, 0x9C));
    let mut log_base = spec.price.initial.ln();
    for week in 0..spec.num_weeks {
        let z = standard_normal(&mut price_rng);
        log_base += spec.price.drift + spec.price.volatility * z;
        let level = log_base + spec.price.bubble_amplitude * bubble_ramp(spec, week);
        for day in 0..7 {
            let date = spec.start_date + chrono::Days::new((week * 7 + day) as u64);
            let jitter = 0.2 * spec.price.volatility * (price_rng.gen::<f64>() - 0.5);
            let close = (level + jitter).exp();
            writeln!(prices, "{},{}", date.format("%Y-%m-%d"), close).unwrap();
        }
    }

    Ok(SynthOutput {
        transactions_csv: transactions,
        prices_csv: prices,
        ground_truth: GroundTruth {
            drivers: driver_list.iter().map(|&i| wallet_name(i)).collect(),
            bubble_weeks: spec.bubble_weeks.iter().copied().collect(),
        },
    })
}

/// Generate and write `transactions.csv`, `prices.csv` and
/// `ground_truth.json` into a directory.
pub fn write_to_dir(spec: &SynthSpec, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| CoreError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let output = generate(spec)?;
    let write = |name: &str, contents: &str| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    };
    let tx = write("transactions.csv", &output.transactions_csv)?;
    let px = write("prices.csv", &output.prices_csv)?;
    let gt_json = serde_json::to_string_pretty(&output.ground_truth).expect("serialize") + "\n";
    let gt = write("ground_truth.json", &gt_json)?;
    Ok((tx, px, gt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_prices_from_reader, load_transactions_from_reader, regular_nodes};

    fn small_spec() -> SynthSpec {
        SynthSpec {
            num_nodes: 20,
            num_weeks: 8,
            base_rate: 3.0,
            driver_fraction: 0.25,
            bubble_weeks: (3..=5).collect(),
            bubble_boost: 10.0,
            seed: 11,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = small_spec();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.transactions_csv, b.transactions_csv);
        assert_eq!(a.prices_csv, b.prices_csv);
        assert_eq!(a.ground_truth, b.ground_truth);
        let c = generate(&SynthSpec {
            seed: 12,
            ..small_spec()
        })
        .unwrap();
        assert_ne!(a.transactions_csv, c.transactions_csv);
    }

    #[test]
    fn round_trips_through_ingest_with_no_drops() {
        let spec = small_spec();
        let out = generate(&spec).unwrap();
        let report = load_transactions_from_reader(
            out.transactions_csv.as_bytes(),
            spec.start_date,
            spec.num_weeks,
        )
        .unwrap();
        assert_eq!(report.counters.out_of_range, 0);
        assert_eq!(report.counters.zero_amount, 0);
        assert_eq!(report.counters.self_loops, 0);
        assert_eq!(report.networks.len(), spec.num_weeks);

        // All nodes are regular by construction.
        let index = regular_nodes(&report.networks).unwrap();
        assert_eq!(index.len(), spec.num_nodes);

        let prices = load_prices_from_reader(out.prices_csv.as_bytes()).unwrap();
        assert_eq!(prices.len(), spec.num_weeks * 7);
    }

    #[test]
    fn ground_truth_names_real_wallets() {
        let spec = small_spec();
        let out = generate(&spec).unwrap();
        assert_eq!(out.ground_truth.drivers.len(), 5);
        assert_eq!(out.ground_truth.bubble_weeks, vec![3, 4, 5]);
        for wallet in &out.ground_truth.drivers {
            assert!(out.transactions_csv.contains(wallet.as_str()));
        }
    }

    #[test]
    fn price_rises_into_bubble_then_falls() {
        let spec = SynthSpec {
            bubble_weeks: (3..=5).collect(),
            ..small_spec()
        };
        let out = generate(&spec).unwrap();
        let prices = load_prices_from_reader(out.prices_csv.as_bytes()).unwrap();
        let report =
            crate::ingest::weekly_mean_price(&prices, spec.start_date, spec.num_weeks).unwrap();
        let peak = report.means[4];
        let before = report.means[1];
        let after = report.means[7];
        assert!(peak > 1.5 * before, "peak {peak} vs before {before}");
        assert!(peak > 1.5 * after, "peak {peak} vs after {after}");
    }

    #[test]
    fn unit_boost_plants_nothing_detectable() {
        use rand::seq::index::sample;

        let spec = SynthSpec {
            bubble_boost: 1.0,
            num_weeks: 30,
            bubble_weeks: (10..=20).collect(),
            ..small_spec()
        };
        let out = generate(&spec).unwrap();
        let report = load_transactions_from_reader(
            out.transactions_csv.as_bytes(),
            spec.start_date,
            spec.num_weeks,
        )
        .unwrap();
        // Randomization test: with nothing planted, the driver set's
        // per-pair induced volume must not be an outlier among random node
        // sets of the same size (the topology is persistent, so weeks are
        // not independent draws of the set assignment).
        let per_pair = |wallets: &std::collections::BTreeSet<String>| {
            let complement: std::collections::BTreeSet<String> = (0..spec.num_nodes)
                .map(wallet_name)
                .filter(|w| !wallets.contains(w))
                .collect();
            let flows =
                crate::analysis::flow_stats(&report.networks, wallets, &complement).unwrap();
            let pairs = (wallets.len() * (wallets.len() - 1)) as f64;
            flows.iter().map(|f| f.driver.induced_volume).sum::<f64>() / pairs
        };
        let drivers: std::collections::BTreeSet<String> =
            out.ground_truth.drivers.iter().cloned().collect();
        let observed = per_pair(&drivers);
        let mut rng = seeded_rng(1234);
        let draws = 200;
        let mut below = 0usize;
        for _ in 0..draws {
            let random_set: std::collections::BTreeSet<String> =
                sample(&mut rng, spec.num_nodes, drivers.len())
                    .into_iter()
                    .map(wallet_name)
                    .collect();
            if per_pair(&random_set) < observed {
                below += 1;
            }
        }
        let percentile = below as f64 / draws as f64;
        assert!(
            (0.005..=0.995).contains(&percentile),
            "boost=1 driver set is an outlier: percentile {percentile}"
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec();
        spec.bubble_weeks.insert(99);
        assert!(generate(&spec).is_err());
        let spec = SynthSpec {
            num_nodes: 1,
            ..small_spec()
        };
        assert!(generate(&spec).is_err());
        let spec = SynthSpec {
            driver_fraction: 1.5,
            ..small_spec()
        };
        assert!(generate(&spec).is_err());
    }
}
