//! Transaction and price ingestion.
//!
//! Transactions are parsed from CSV and binned into weekly weighted directed
//! networks; prices are parsed and averaged per week on the same bins.
//! Week bins are half-open `[start + 7w, start + 7(w+1))` days, anchored at
//! the configured start date. Rows are processed in file order and edge
//! weights accumulate by commutative summation in that single order, so
//! reloading a file is bit-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};

use crate::error::{CoreError, Result};

const SECONDS_PER_WEEK: i64 = 7 * 86_400;

/// One parsed ledger row.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord {
    pub timestamp: DateTime<Utc>,
    pub source: String,
    pub destination: String,
    pub amount: f64,
}

/// A weekly weighted directed network. Edge weights are the summed
/// transaction volume between an ordered wallet pair within the week.
#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyNetwork {
    pub week_index: usize,
    edges: BTreeMap<(String, String), f64>,
    node_set: BTreeSet<String>,
}

impl WeeklyNetwork {
    pub fn new(week_index: usize) -> Self {
        Self {
            week_index,
            edges: BTreeMap::new(),
            node_set: BTreeSet::new(),
        }
    }

    /// Accumulate volume on the (source, destination) edge. Weight must be
    /// positive; zero-amount records are filtered before this point.
    pub fn add_amount(&mut self, source: &str, destination: &str, amount: f64) {
        debug_assert!(amount > 0.0);
        debug_assert!(source != destination);
        *self
            .edges
            .entry((source.to_owned(), destination.to_owned()))
            .or_insert(0.0) += amount;
        if !self.node_set.contains(source) {
            self.node_set.insert(source.to_owned());
        }
        if !self.node_set.contains(destination) {
            self.node_set.insert(destination.to_owned());
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.edges
            .iter()
            .map(|((s, d), w)| (s.as_str(), d.as_str(), *w))
    }

    pub fn node_set(&self) -> &BTreeSet<String> {
        &self.node_set
    }

    pub fn contains(&self, wallet: &str) -> bool {
        self.node_set.contains(wallet)
    }

    pub fn node_count(&self) -> usize {
        self.node_set.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_volume(&self) -> f64 {
        self.edges.values().sum()
    }
}

/// Records excluded during loading, with the volume they carried.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropCounters {
    pub out_of_range: u64,
    pub zero_amount: u64,
    pub self_loops: u64,
    /// Total volume carried by dropped records (for conservation checks).
    pub dropped_volume: f64,
}

/// Result of loading a transactions file.
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub networks: Vec<WeeklyNetwork>,
    pub counters: DropCounters,
    pub usable_records: u64,
}

fn start_instant(start_date: NaiveDate) -> DateTime<Utc> {
    start_date.and_hms_opt(0, 0, 0).unwrap().and_utc()
}

#[derive(Clone, Copy, PartialEq)]
enum TimestampFormat {
    UnixSeconds,
    Iso8601,
}

fn parse_timestamp(raw: &str, format: TimestampFormat, line: u64) -> Result<DateTime<Utc>> {
    match format {
        TimestampFormat::UnixSeconds => raw
            .trim()
            .parse::<i64>()
            .ok()
            .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0))
            .ok_or_else(|| CoreError::MalformedRow {
                line,
                message: format!("bad unix timestamp {raw:?}"),
            }),
        TimestampFormat::Iso8601 => DateTime::parse_from_rfc3339(raw.trim())
            .map(|dt| dt.with_timezone(&Utc))
            .map_err(|e| CoreError::MalformedRow {
                line,
                message: format!("bad ISO-8601 timestamp {raw:?}: {e}"),
            }),
    }
}

/// Load transactions from a CSV file with header
/// `timestamp,source,destination,amount` and bin them into `num_weeks`
/// weekly networks starting at `start_date`.
///
/// The timestamp column is either ISO-8601 UTC or integer Unix seconds,
/// detected once from the first data row. Out-of-range, zero-amount and
/// self-loop records are counted, not errors.
pub fn load_transactions(
    path: impl AsRef<Path>,
    start_date: NaiveDate,
    num_weeks: usize,
) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_transactions_from_reader(file, start_date, num_weeks)
}

/// As [`load_transactions`] but over any reader (used by the tests and the
/// synthetic generator round-trips).
pub fn load_transactions_from_reader<R: Read>(
    reader: R,
    start_date: NaiveDate,
    num_weeks: usize,
) -> Result<LoadReport> {
    assert!(num_weeks > 0, "num_weeks must be positive");
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(reader);

    let start = start_instant(start_date).timestamp();
    let mut networks: Vec<WeeklyNetwork> = (0..num_weeks).map(WeeklyNetwork::new).collect();
    let mut counters = DropCounters::default();
    let mut usable: u64 = 0;
    let mut format: Option<TimestampFormat> = None;

    for row in csv_reader.records() {
        let record = row.map_err(|e| CoreError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(CoreError::MalformedRow {
                line,
                message: format!("expected 4 fields, got {}", record.len()),
            });
        }
        // Detect the timestamp format once, from the first data row.
        let fmt = *format.get_or_insert_with(|| {
            if record[0].trim().parse::<i64>().is_ok() {
                TimestampFormat::UnixSeconds
            } else {
                TimestampFormat::Iso8601
            }
        });
        let ts = parse_timestamp(&record[0], fmt, line)?;
        let source = record[1].trim();
        let destination = record[2].trim();
        let amount: f64 = record[3]
            .trim()
            .parse()
            .map_err(|e| CoreError::MalformedRow {
                line,
                message: format!("bad amount {:?}: {e}", &record[3]),
            })?;
        if !amount.is_finite() || amount < 0.0 {
            return Err(CoreError::MalformedRow {
                line,
                message: format!("amount must be a non-negative real, got {amount}"),
            });
        }
        if source.is_empty() || destination.is_empty() {
            return Err(CoreError::MalformedRow {
                line,
                message: "empty wallet identifier".into(),
            });
        }

        if amount == 0.0 {
            counters.zero_amount += 1;
            continue;
        }
        if source == destination {
            counters.self_loops += 1;
            counters.dropped_volume += amount;
            continue;
        }
        let delta = ts.timestamp() - start;
        if delta < 0 {
            counters.out_of_range += 1;
            counters.dropped_volume += amount;
            continue;
        }
        let week = (delta / SECONDS_PER_WEEK) as usize;
        if week >= num_weeks {
            counters.out_of_range += 1;
            counters.dropped_volume += amount;
            continue;
        }
        networks[week].add_amount(source, destination, amount);
        usable += 1;
    }

    if usable == 0 {
        return Err(CoreError::NoUsableRecords);
    }
    Ok(LoadReport {
        networks,
        counters,
        usable_records: usable,
    })
}

/// The ordered set of wallets present in every weekly network.
/// Position in `wallets` defines the node index used by all tensors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularNodeIndex {
    wallets: Vec<String>,
    positions: BTreeMap<String, usize>,
}

impl RegularNodeIndex {
    pub fn from_wallets(mut wallets: Vec<String>) -> Self {
        wallets.sort();
        wallets.dedup();
        let positions = wallets
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self { wallets, positions }
    }

    pub fn len(&self) -> usize {
        self.wallets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wallets.is_empty()
    }

    pub fn wallet(&self, index: usize) -> &str {
        &self.wallets[index]
    }

    pub fn index_of(&self, wallet: &str) -> Option<usize> {
        self.positions.get(wallet).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.wallets.iter().map(String::as_str)
    }
}

/// Wallets that appear in every one of the given weekly networks,
/// lexicographically ordered.
pub fn regular_nodes(networks: &[WeeklyNetwork]) -> Result<RegularNodeIndex> {
    assert!(!networks.is_empty(), "need at least one network");
    let mut regular: BTreeSet<String> = networks[0].node_set.clone();
    for network in &networks[1..] {
        regular.retain(|w| network.contains(w));
        if regular.is_empty() {
            break;
        }
    }
    if regular.is_empty() {
        return Err(CoreError::NoRegularNodes {
            weeks: networks.len(),
        });
    }
    Ok(RegularNodeIndex::from_wallets(regular.into_iter().collect()))
}

/// Per-week summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct WeekStats {
    pub week: usize,
    pub nodes: usize,
    pub links_per_node: f64,
    pub total_volume: f64,
}

/// Node count, links per node, and total volume for each weekly network.
/// A week with no nodes reports 0 links per node by convention.
pub fn network_stats(networks: &[WeeklyNetwork]) -> Vec<WeekStats> {
    assert!(!networks.is_empty(), "need at least one network");
    networks
        .iter()
        .map(|n| WeekStats {
            week: n.week_index,
            nodes: n.node_count(),
            links_per_node: if n.node_count() == 0 {
                0.0
            } else {
                n.edge_count() as f64 / n.node_count() as f64
            },
            total_volume: n.total_volume(),
        })
        .collect()
}

/// Daily closing prices, strictly increasing by date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    close: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, close: Vec<f64>) -> Result<Self> {
        assert_eq!(dates.len(), close.len());
        for pair in dates.windows(2) {
            if pair[1] <= pair[0] {
                return Err(CoreError::UnsortedPrices { line: 0 });
            }
        }
        Ok(Self { dates, close })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.dates.iter().copied().zip(self.close.iter().copied())
    }
}

/// Load a price CSV with header `date,close` (date as YYYY-MM-DD).
pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_prices_from_reader(file)
}

pub fn load_prices_from_reader<R: Read>(reader: R) -> Result<PriceSeries> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut dates = Vec::new();
    let mut close = Vec::new();
    for row in csv_reader.records() {
        let record = row.map_err(|e| CoreError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(CoreError::MalformedRow {
                line,
                message: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d").map_err(|e| {
            CoreError::MalformedRow {
                line,
                message: format!("bad date {:?}: {e}", &record[0]),
            }
        })?;
        let price: f64 = record[1]
            .trim()
            .parse()
            .map_err(|e| CoreError::MalformedRow {
                line,
                message: format!("bad close {:?}: {e}", &record[1]),
            })?;
        if !price.is_finite() || price <= 0.0 {
            return Err(CoreError::MalformedRow {
                line,
                message: format!("close must be positive, got {price}"),
            });
        }
        if let Some(&last) = dates.last() {
            if date <= last {
                return Err(CoreError::UnsortedPrices { line });
            }
        }
        dates.push(date);
        close.push(price);
    }
    Ok(PriceSeries { dates, close })
}

/// Weekly mean prices over `num_weeks` bins from `start_date`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyPriceReport {
    pub means: Vec<f64>,
    /// Days in the requested span with no price observation.
    pub missing_days: u64,
}

/// Arithmetic mean of available daily closes per 7-day bin. Missing days are
/// tolerated and counted; a week with zero observations is an error.
pub fn weekly_mean_price(
    prices: &PriceSeries,
    start_date: NaiveDate,
    num_weeks: usize,
) -> Result<WeeklyPriceReport> {
    assert!(num_weeks > 0, "num_weeks must be positive");
    let mut sums = vec![0.0f64; num_weeks];
    let mut counts = vec![0u64; num_weeks];
    for (date, price) in prices.iter() {
        let delta = (date - start_date).num_days();
        if delta < 0 {
            continue;
        }
        let week = (delta / 7) as usize;
        if week >= num_weeks {
            continue;
        }
        sums[week] += price;
        counts[week] += 1;
    }
    let mut means = Vec::with_capacity(num_weeks);
    let mut missing = 0u64;
    for week in 0..num_weeks {
        if counts[week] == 0 {
            return Err(CoreError::EmptyPriceWeek { week });
        }
        missing += 7 - counts[week].min(7);
        means.push(sums[week] / counts[week] as f64);
    }
    Ok(WeeklyPriceReport {
        means,
        missing_days: missing,
    })
}
