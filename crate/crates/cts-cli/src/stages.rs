//! Pipeline stages. Each stage reads upstream artifacts from the output
//! directory, writes its own artifacts plus a manifest, and is skipped on
//! re-runs whose config hash (config sections + input content hashes) is
//! unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use cts_core::analysis::{driver_set, flow_stats, lagged_correlation, rolling_correlation};
use cts_core::embed::{embed_series, read_cache_file, week_seed, write_cache_file};
use cts_core::ingest::{
    load_prices, load_transactions, network_stats, regular_nodes, weekly_mean_price,
    RegularNodeIndex, WeeklyNetwork,
};
use cts_core::nullmodels::{
    gaussian_double_svd, quarter_circle_ks, AnalyticSpectrum, GaussianTensor, GaussianTensorSpec,
};
use cts_core::rng::derive_seed;
use cts_core::spectra::{
    double_svd, largest_singular_vectors, spectra_timeseries, SpectraRow, TensorSpectrum,
};
use cts_core::tensor::{correlation_tensor, reshuffled_tensor, WindowSpec};
use cts_core::EmbeddingSeries;

use crate::artifacts::{
    config_hash, hash_file, read_csv_rows, require_upstream, CsvArtifact, Manifest,
};
use crate::config::RunConfig;

const DOMAIN_RESHUFFLE: u64 = 0xF5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Ingest,
    Embed,
    Spectra,
    Null,
    Analyze,
    Drivers,
    All,
}

impl Command {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "synth" => Self::Synth,
            "ingest" => Self::Ingest,
            "embed" => Self::Embed,
            "spectra" => Self::Spectra,
            "null" => Self::Null,
            "analyze" => Self::Analyze,
            "drivers" => Self::Drivers,
            "all" => Self::All,
            other => bail!("unknown subcommand `{other}`"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub cache_hit: bool,
}

/// Run one subcommand (or the whole chain for `All`).
pub fn run_command(command: Command, config: &RunConfig) -> Result<Vec<StageOutcome>> {
    config.validate()?;
    let stages: Vec<fn(&RunConfig) -> Result<StageOutcome>> = match command {
        Command::Synth => vec![stage_synth],
        Command::Ingest => vec![stage_ingest],
        Command::Embed => vec![stage_embed],
        Command::Spectra => vec![stage_spectra],
        Command::Null => vec![stage_null],
        Command::Analyze => vec![stage_analyze],
        Command::Drivers => vec![stage_drivers],
        Command::All => vec![
            stage_ingest,
            stage_embed,
            stage_spectra,
            stage_null,
            stage_analyze,
            stage_drivers,
        ],
    };
    stages.into_iter().map(|stage| stage(config)).collect()
}

/// As [`run_command`], but capping rayon workers (0 keeps the default).
pub fn run_with_threads(
    command: Command,
    config: &RunConfig,
    threads: usize,
) -> Result<Vec<StageOutcome>> {
    if threads == 0 {
        return run_command(command, config);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    pool.install(|| run_command(command, config))
}

fn outputs_present(dir: &Path, manifest: &Manifest) -> bool {
    manifest.outputs.iter().all(|name| dir.join(name).exists())
}

/// Cache check: unchanged hash and all artifacts present.
fn cache_hit(dir: &Path, hash: &str) -> Result<bool> {
    Ok(match Manifest::load(dir)? {
        Some(manifest) => manifest.config_hash == hash && outputs_present(dir, &manifest),
        None => false,
    })
}

// ----------------------------------------------------------------------
// synth
// ----------------------------------------------------------------------

fn stage_synth(config: &RunConfig) -> Result<StageOutcome> {
    let dir = config.out_dir("synth");
    let synth_config = config.synth.clone().unwrap_or_default();
    let spec = synth_config.to_spec(config.period.start_date, config.run.seed);
    let hash = config_hash(&spec, &BTreeMap::new())?;
    if cache_hit(&dir, &hash)?
        && config.paths.transactions.exists()
        && config.paths.prices.exists()
    {
        return Ok(StageOutcome {
            stage: "synth",
            cache_hit: true,
        });
    }
    let output = cts_core::synth::generate(&spec)?;
    if let Some(parent) = config.paths.transactions.parent() {
        std::fs::create_dir_all(parent).ok();
    }
    if let Some(parent) = config.paths.prices.parent() {
        std::fs::create_dir_all(parent).ok();
    }
    std::fs::write(&config.paths.transactions, &output.transactions_csv)
        .with_context(|| format!("writing {}", config.paths.transactions.display()))?;
    std::fs::write(&config.paths.prices, &output.prices_csv)
        .with_context(|| format!("writing {}", config.paths.prices.display()))?;
    std::fs::create_dir_all(&dir)?;
    let truth = serde_json::json!({
        "config_hash": hash,
        "drivers": output.ground_truth.drivers,
        "bubble_weeks": output.ground_truth.bubble_weeks,
    });
    std::fs::write(
        dir.join("ground_truth.json"),
        serde_json::to_string_pretty(&truth)? + "\n",
    )?;
    Manifest {
        stage: "synth".into(),
        config_hash: hash,
        inputs: BTreeMap::new(),
        outputs: vec!["ground_truth.json".into()],
        info: [
            ("num_nodes".to_string(), spec.num_nodes.to_string()),
            ("num_weeks".to_string(), spec.num_weeks.to_string()),
        ]
        .into(),
    }
    .store(&dir)?;
    Ok(StageOutcome {
        stage: "synth",
        cache_hit: false,
    })
}

// ----------------------------------------------------------------------
// ingest
// ----------------------------------------------------------------------

fn stage_ingest(config: &RunConfig) -> Result<StageOutcome> {
    let dir = config.out_dir("networks");
    let mut inputs = BTreeMap::new();
    inputs.insert(
        "transactions".to_string(),
        hash_file(&config.paths.transactions)?,
    );
    inputs.insert("prices".to_string(), hash_file(&config.paths.prices)?);
    let hash = config_hash(&config.period, &inputs)?;
    if cache_hit(&dir, &hash)? {
        return Ok(StageOutcome {
            stage: "ingest",
            cache_hit: true,
        });
    }

    let report = load_transactions(
        &config.paths.transactions,
        config.period.start_date,
        config.period.num_weeks,
    )?;
    let index = regular_nodes(&report.networks)?;
    let stats = network_stats(&report.networks);
    let prices = load_prices(&config.paths.prices)?;
    let weekly = weekly_mean_price(&prices, config.period.start_date, config.period.num_weeks)?;

    std::fs::create_dir_all(&dir)?;

    let mut networks_csv = CsvArtifact::new(&hash, "week,source,destination,weight");
    for network in &report.networks {
        for (src, dst, weight) in network.edges() {
            networks_csv.row(format_args!("{},{src},{dst},{weight}", network.week_index));
        }
    }
    networks_csv.write_to(&dir.join("networks.csv"))?;

    let mut wallets = format!("# config {hash}\n");
    for wallet in index.iter() {
        wallets.push_str(wallet);
        wallets.push('\n');
    }
    std::fs::write(dir.join("regular_nodes.txt"), wallets)?;

    let mut stats_csv = CsvArtifact::new(&hash, "week,nodes,links_per_node,total_volume_xrp");
    for row in &stats {
        stats_csv.row(format_args!(
            "{},{},{},{}",
            row.week, row.nodes, row.links_per_node, row.total_volume
        ));
    }
    stats_csv.write_to(&dir.join("stats.csv"))?;

    let mut price_csv = CsvArtifact::new(&hash, "week,mean_price");
    for (week, mean) in weekly.means.iter().enumerate() {
        price_csv.row(format_args!("{week},{mean}"));
    }
    price_csv.write_to(&dir.join("weekly_price.csv"))?;

    Manifest {
        stage: "ingest".into(),
        config_hash: hash,
        inputs,
        outputs: vec![
            "networks.csv".into(),
            "regular_nodes.txt".into(),
            "stats.csv".into(),
            "weekly_price.csv".into(),
        ],
        info: [
            ("usable_records".to_string(), report.usable_records.to_string()),
            ("out_of_range".to_string(), report.counters.out_of_range.to_string()),
            ("zero_amount".to_string(), report.counters.zero_amount.to_string()),
            ("self_loops".to_string(), report.counters.self_loops.to_string()),
            ("regular_nodes".to_string(), index.len().to_string()),
            ("missing_price_days".to_string(), weekly.missing_days.to_string()),
        ]
        .into(),
    }
    .store(&dir)?;
    Ok(StageOutcome {
        stage: "ingest",
        cache_hit: false,
    })
}

fn load_networks(config: &RunConfig) -> Result<Vec<WeeklyNetwork>> {
    let dir = config.out_dir("networks");
    let rows = read_csv_rows(&dir.join("networks.csv"))?;
    let mut networks: Vec<WeeklyNetwork> = (0..config.period.num_weeks)
        .map(WeeklyNetwork::new)
        .collect();
    for row in rows {
        if row.len() != 4 {
            bail!("networks.csv: expected 4 fields, got {}", row.len());
        }
        let week: usize = row[0].parse()?;
        let weight: f64 = row[3].parse()?;
        if week >= networks.len() {
            bail!("networks.csv references week {week} beyond the period");
        }
        networks[week].add_amount(&row[1], &row[2], weight);
    }
    Ok(networks)
}

fn load_regular_index(config: &RunConfig) -> Result<RegularNodeIndex> {
    let path = config.out_dir("networks").join("regular_nodes.txt");
    let raw =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let wallets: Vec<String> = raw
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(str::to_string)
        .collect();
    if wallets.is_empty() {
        bail!("regular_nodes.txt is empty");
    }
    Ok(RegularNodeIndex::from_wallets(wallets))
}

fn load_weekly_price(config: &RunConfig) -> Result<Vec<f64>> {
    let rows = read_csv_rows(&config.out_dir("networks").join("weekly_price.csv"))?;
    let mut means = vec![0.0; rows.len()];
    for row in rows {
        let week: usize = row[0].parse()?;
        means[week] = row[1].parse()?;
    }
    Ok(means)
}

// ----------------------------------------------------------------------
// embed
// ----------------------------------------------------------------------

fn run_seeds(config: &RunConfig) -> Vec<u64> {
    let mut seeds = vec![config.run.seed];
    seeds.extend(&config.run.ensemble_seeds);
    seeds
}

fn stage_embed(config: &RunConfig) -> Result<StageOutcome> {
    let dir = config.out_dir("embeddings");
    let upstream = require_upstream(&config.out_dir("networks"), "ingest")?;
    let mut inputs = BTreeMap::new();
    inputs.insert("networks".to_string(), upstream.config_hash.clone());
    let sections = serde_json::json!({
        "embedding": &config.embedding,
        "seeds": run_seeds(config),
    });
    let hash = config_hash(&sections, &inputs)?;
    if cache_hit(&dir, &hash)? {
        return Ok(StageOutcome {
            stage: "embed",
            cache_hit: true,
        });
    }

    let networks = load_networks(config)?;
    let index = load_regular_index(config)?;
    let params = config.embedding.to_params();

    std::fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    for seed in run_seeds(config) {
        let series = embed_series(&networks, &index, &params, seed)?;
        let seed_dir = dir.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&seed_dir)?;
        for week in 0..series.num_weeks() {
            let matrix = series.week_matrix(week);
            let flat: Vec<f64> = matrix.iter().copied().collect();
            let name = format!("seed_{seed}/week_{week:03}.emb");
            write_cache_file(
                dir.join(&name),
                index.len(),
                params.dim,
                week_seed(seed, week),
                &flat,
            )?;
            outputs.push(name);
        }
    }

    Manifest {
        stage: "embed".into(),
        config_hash: hash,
        inputs,
        outputs,
        info: [
            ("weeks".to_string(), networks.len().to_string()),
            ("nodes".to_string(), index.len().to_string()),
            ("dim".to_string(), params.dim.to_string()),
        ]
        .into(),
    }
    .store(&dir)?;
    Ok(StageOutcome {
        stage: "embed",
        cache_hit: false,
    })
}

fn load_series(config: &RunConfig, seed: u64) -> Result<EmbeddingSeries> {
    let dir = config.out_dir("embeddings");
    let (t, d) = (config.period.num_weeks, config.embedding.dim);
    let mut weeks = Vec::with_capacity(t);
    let mut nodes = 0usize;
    for week in 0..t {
        let path = dir.join(format!("seed_{seed}/week_{week:03}.emb"));
        let cached = read_cache_file(&path)?;
        if cached.dim != d {
            bail!(
                "embedding cache {} has dim {}, config says {d}",
                path.display(),
                cached.dim
            );
        }
        if week == 0 {
            nodes = cached.nodes;
        } else if cached.nodes != nodes {
            bail!("inconsistent node count across embedding cache files");
        }
        weeks.push(cached.data);
    }
    Ok(EmbeddingSeries::from_flat_weeks(&weeks, nodes, d, seed)?)
}

// ----------------------------------------------------------------------
// spectra
// ----------------------------------------------------------------------

fn reshuffled_rows(
    series: &EmbeddingSeries,
    spec: WindowSpec,
    shuffle_seed: u64,
) -> Result<Vec<SpectraRow>> {
    let centers: Vec<usize> = spec.valid_centers(series.num_weeks())?.collect();
    centers
        .into_par_iter()
        .map(|t| {
            let tensor = reshuffled_tensor(series, t, spec, derive_seed(shuffle_seed, t as u64))?;
            let spectrum = double_svd(&tensor);
            Ok(SpectraRow {
                week: t,
                rho11: spectrum.largest(),
                rho21: spectrum.second(),
                gap: spectrum.spectral_gap(),
            })
        })
        .collect::<cts_core::Result<Vec<SpectraRow>>>()
        .map_err(Into::into)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ssd: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ssd / (n - 1) as f64).sqrt())
}

fn stage_spectra(config: &RunConfig) -> Result<StageOutcome> {
    let dir = config.out_dir("spectra");
    let upstream = require_upstream(&config.out_dir("embeddings"), "embed")?;
    let mut inputs = BTreeMap::new();
    inputs.insert("embeddings".to_string(), upstream.config_hash.clone());
    let sections = serde_json::json!({
        "window": &config.window,
        "seed": config.run.seed,
        "ensemble_seeds": &config.run.ensemble_seeds,
        "dense": config.run.dense,
    });
    let hash = config_hash(&sections, &inputs)?;
    if cache_hit(&dir, &hash)? {
        return Ok(StageOutcome {
            stage: "spectra",
            cache_hit: true,
        });
    }

    let spec = WindowSpec::new(config.window.delta_t)?;
    let series = load_series(config, config.run.seed)?;
    let centers: Vec<usize> = spec.valid_centers(series.num_weeks())?.collect();
    let spectra: Vec<TensorSpectrum> = centers
        .par_iter()
        .map(|&t| Ok(double_svd(&correlation_tensor(&series, t, spec)?)))
        .collect::<cts_core::Result<_>>()?;

    std::fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();

    let mut full_csv = CsvArtifact::new(&hash, "week,k,gamma,rho");
    for spectrum in &spectra {
        for k in 0..spectrum.k_max {
            for g in 0..spectrum.dim {
                full_csv.row(format_args!(
                    "{},{},{},{}",
                    spectrum.center_week,
                    k + 1,
                    g + 1,
                    spectrum.rho[(k, g)]
                ));
            }
        }
    }
    full_csv.write_to(&dir.join("spectra.csv"))?;
    outputs.push("spectra.csv".to_string());

    let mut gaps_csv = CsvArtifact::new(&hash, "week,rho11,rho21,gap");
    for spectrum in &spectra {
        gaps_csv.row(format_args!(
            "{},{},{},{}",
            spectrum.center_week,
            spectrum.largest(),
            spectrum.second(),
            spectrum.spectral_gap()
        ));
    }
    gaps_csv.write_to(&dir.join("gaps.csv"))?;
    outputs.push("gaps.csv".to_string());

    let shuffle_seed = derive_seed(config.run.seed, DOMAIN_RESHUFFLE);
    let reshuffled = reshuffled_rows(&series, spec, shuffle_seed)?;
    let mut reshuffled_csv = CsvArtifact::new(&hash, "week,rho11,rho21,gap");
    for row in &reshuffled {
        reshuffled_csv.row(format_args!(
            "{},{},{},{}",
            row.week, row.rho11, row.rho21, row.gap
        ));
    }
    reshuffled_csv.write_to(&dir.join("reshuffled_gaps.csv"))?;
    outputs.push("reshuffled_gaps.csv".to_string());

    if !config.run.ensemble_seeds.is_empty() {
        let mut empirical_runs = Vec::new();
        let mut reshuffled_runs = Vec::new();
        for seed in run_seeds(config) {
            let run_series = load_series(config, seed)?;
            empirical_runs.push(spectra_timeseries(&run_series, spec)?);
            reshuffled_runs.push(reshuffled_rows(
                &run_series,
                spec,
                derive_seed(seed, DOMAIN_RESHUFFLE),
            )?);
        }
        let mut ensemble_csv = CsvArtifact::new(
            &hash,
            "week,kind,mean_rho11,std_rho11,mean_rho21,std_rho21,mean_gap,std_gap",
        );
        let weeks = empirical_runs[0].len();
        for (kind, runs) in [("empirical", &empirical_runs), ("reshuffled", &reshuffled_runs)] {
            for w in 0..weeks {
                let rho11: Vec<f64> = runs.iter().map(|r| r[w].rho11).collect();
                let rho21: Vec<f64> = runs.iter().map(|r| r[w].rho21).collect();
                let gap: Vec<f64> = runs.iter().map(|r| r[w].gap).collect();
                let (m1, s1) = mean_std(&rho11);
                let (m2, s2) = mean_std(&rho21);
                let (mg, sg) = mean_std(&gap);
                ensemble_csv.row(format_args!(
                    "{},{kind},{m1},{s1},{m2},{s2},{mg},{sg}",
                    runs[0][w].week
                ));
            }
        }
        ensemble_csv.write_to(&dir.join("ensemble.csv"))?;
        outputs.push("ensemble.csv".to_string());
    }

    // Dense debug dump of the first center's tensor, small N only.
    if config.run.dense && series.num_nodes() <= 50 {
        let t = centers[0];
        let tensor = correlation_tensor(&series, t, spec)?;
        let mut dump = CsvArtifact::new(&hash, "i,j,alpha,beta,value");
        for a in 0..tensor.dim() {
            for b in 0..tensor.dim() {
                let slice = tensor.dense_slice(a, b);
                for i in 0..tensor.num_nodes() {
                    for j in 0..tensor.num_nodes() {
                        dump.row(format_args!("{i},{j},{a},{b},{}", slice[(i, j)]));
                    }
                }
            }
        }
        dump.write_to(&dir.join("tensor_dump.csv"))?;
        outputs.push("tensor_dump.csv".to_string());
    }

    Manifest {
        stage: "spectra".into(),
        config_hash: hash,
        inputs,
        outputs,
        info: [("centers".to_string(), centers.len().to_string())].into(),
    }
    .store(&dir)?;
    Ok(StageOutcome {
        stage: "spectra",
        cache_hit: false,
    })
}

fn load_gaps(config: &RunConfig) -> Result<Vec<(usize, f64, f64, f64)>> {
    let rows = read_csv_rows(&config.out_dir("spectra").join("gaps.csv"))?;
    rows.into_iter()
        .map(|row| {
            Ok((
                row[0].parse()?,
                row[1].parse()?,
                row[2].parse()?,
                row[3].parse()?,
            ))
        })
        .collect()
}

// ----------------------------------------------------------------------
// null
// ----------------------------------------------------------------------

fn stage_null(config: &RunConfig) -> Result<StageOutcome> {
    let dir = config.out_dir("null");
    let mut inputs = BTreeMap::new();
    let (n, d) = if config.null.use_data_shape {
        let upstream = require_upstream(&config.out_dir("networks"), "ingest")?;
        inputs.insert("networks".to_string(), upstream.config_hash.clone());
        let n: usize = upstream
            .info
            .get("regular_nodes")
            .ok_or_else(|| anyhow!("ingest manifest lacks regular_nodes"))?
            .parse()?;
        (n, config.embedding.dim)
    } else {
        (config.null.n, config.null.dim)
    };
    let seed = config
        .null
        .seed
        .unwrap_or_else(|| derive_seed(config.run.seed, 0x61));
    let spec = GaussianTensorSpec {
        n,
        dim: d,
        sigma_g: config.null.sigma_g,
        seed,
    };
    let sections = serde_json::json!({ "null": &config.null, "resolved": [n, d, seed] });
    let hash = config_hash(&sections, &inputs)?;
    if cache_hit(&dir, &hash)? {
        return Ok(StageOutcome {
            stage: "null",
            cache_hit: true,
        });
    }

    let tensor = GaussianTensor::lazy(spec)?;
    let spectrum = gaussian_double_svd(&tensor);
    let law = AnalyticSpectrum::from_spec(&spec);
    let values: Vec<f64> = (0..spectrum.k_max).map(|k| spectrum.rho[(k, 0)]).collect();
    let ks = quarter_circle_ks(&values, &spec)?;

    std::fs::create_dir_all(&dir)?;
    let mut spectrum_csv = CsvArtifact::new(&hash, "k,gamma,rho");
    for k in 0..spectrum.k_max {
        for g in 0..spectrum.dim {
            spectrum_csv.row(format_args!("{},{},{}", k + 1, g + 1, spectrum.rho[(k, g)]));
        }
    }
    spectrum_csv.write_to(&dir.join("null_spectrum.csv"))?;

    let report = serde_json::json!({
        "config_hash": hash,
        "ks": ks,
        "n": values.len(),
        "rho_max": law.rho_max,
    });
    std::fs::write(
        dir.join("ks_report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;

    Manifest {
        stage: "null".into(),
        config_hash: hash,
        inputs,
        outputs: vec!["null_spectrum.csv".into(), "ks_report.json".into()],
        info: [
            ("ks".to_string(), ks.to_string()),
            ("rho_max".to_string(), law.rho_max.to_string()),
        ]
        .into(),
    }
    .store(&dir)?;
    Ok(StageOutcome {
        stage: "null",
        cache_hit: false,
    })
}

// ----------------------------------------------------------------------
// analyze
// ----------------------------------------------------------------------

fn stage_analyze(config: &RunConfig) -> Result<StageOutcome> {
    let dir = config.out_dir("analysis");
    let spectra_manifest = require_upstream(&config.out_dir("spectra"), "spectra")?;
    let networks_manifest = require_upstream(&config.out_dir("networks"), "ingest")?;
    let mut inputs = BTreeMap::new();
    inputs.insert("spectra".to_string(), spectra_manifest.config_hash.clone());
    inputs.insert("networks".to_string(), networks_manifest.config_hash.clone());
    let sections = serde_json::json!({
        "analysis": &config.analysis,
        "window": &config.window,
    });
    let hash = config_hash(&sections, &inputs)?;
    if cache_hit(&dir, &hash)? {
        return Ok(StageOutcome {
            stage: "analyze",
            cache_hit: true,
        });
    }

    let gaps = load_gaps(config)?;
    let weekly_price = load_weekly_price(config)?;
    let first_center = gaps
        .first()
        .map(|g| g.0)
        .ok_or_else(|| anyhow!("gaps.csv is empty"))?;
    // Align both series to the first spectra center week.
    let price_aligned: Vec<f64> = weekly_price[first_center..].to_vec();
    let rho11: Vec<f64> = gaps.iter().map(|g| g.1).collect();

    let lag_report = lagged_correlation(&price_aligned, &rho11, config.analysis.max_lag)?;
    let rolling = rolling_correlation(&price_aligned, &rho11, config.analysis.delta_tau)?;

    std::fs::create_dir_all(&dir)?;
    let mut lag_csv = CsvArtifact::new(&hash, "lag,r,p");
    for point in &lag_report.points {
        lag_csv.row(format_args!("{},{},{}", point.lag, point.r, point.p));
    }
    lag_csv.write_to(&dir.join("lag.csv"))?;

    let mut rolling_csv = CsvArtifact::new(&hash, "week,r,p,significant");
    for point in &rolling.points {
        match (point.r, point.p) {
            (Some(r), Some(p)) => rolling_csv.row(format_args!(
                "{},{r},{p},{}",
                first_center + point.center,
                p < 0.05
            )),
            _ => rolling_csv.row(format_args!("{},,,", first_center + point.center)),
        }
    }
    rolling_csv.write_to(&dir.join("rolling.csv"))?;

    Manifest {
        stage: "analyze".into(),
        config_hash: hash,
        inputs,
        outputs: vec!["lag.csv".into(), "rolling.csv".into()],
        info: BTreeMap::new(),
    }
    .store(&dir)?;
    Ok(StageOutcome {
        stage: "analyze",
        cache_hit: false,
    })
}

// ----------------------------------------------------------------------
// drivers
// ----------------------------------------------------------------------

fn stage_drivers(config: &RunConfig) -> Result<StageOutcome> {
    let dir = config.out_dir("drivers");
    let embed_manifest = require_upstream(&config.out_dir("embeddings"), "embed")?;
    let spectra_manifest = require_upstream(&config.out_dir("spectra"), "spectra")?;
    let networks_manifest = require_upstream(&config.out_dir("networks"), "ingest")?;
    let mut inputs = BTreeMap::new();
    inputs.insert("embeddings".to_string(), embed_manifest.config_hash.clone());
    inputs.insert("spectra".to_string(), spectra_manifest.config_hash.clone());
    inputs.insert("networks".to_string(), networks_manifest.config_hash.clone());
    let sections = serde_json::json!({
        "analysis": &config.analysis,
        "window": &config.window,
    });
    let hash = config_hash(&sections, &inputs)?;
    if cache_hit(&dir, &hash)? {
        return Ok(StageOutcome {
            stage: "drivers",
            cache_hit: true,
        });
    }

    let gaps = load_gaps(config)?;
    let week = match config.analysis.driver_week {
        Some(week) => {
            if !gaps.iter().any(|g| g.0 == week) {
                bail!("analysis.driver_week {week} is not a valid spectra center");
            }
            week
        }
        None => {
            // Center with the largest rho_1^1.
            gaps.iter()
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|g| g.0)
                .unwrap()
        }
    };

    let series = load_series(config, config.run.seed)?;
    let index = load_regular_index(config)?;
    let spec = WindowSpec::new(config.window.delta_t)?;
    let tensor = correlation_tensor(&series, week, spec)?;
    let field = largest_singular_vectors(&tensor);

    let left = driver_set(&field.l1, config.analysis.threshold, config.analysis.margin)?;
    let right = driver_set(&field.r1, config.analysis.threshold, config.analysis.margin)?;

    let union: BTreeSet<usize> = left
        .driver_set
        .iter()
        .chain(right.driver_set.iter())
        .copied()
        .collect();
    let complement: Vec<usize> = (0..index.len()).filter(|i| !union.contains(i)).collect();
    let wallets = |ids: &[usize]| -> Vec<String> {
        ids.iter().map(|&i| index.wallet(i).to_string()).collect()
    };
    let union_ids: Vec<usize> = union.iter().copied().collect();

    std::fs::create_dir_all(&dir)?;

    let mut vectors_csv = CsvArtifact::new(&hash, "alpha,beta,i,L1,R1");
    for a in 0..tensor.dim() {
        for b in 0..tensor.dim() {
            for i in 0..tensor.num_nodes() {
                vectors_csv.row(format_args!(
                    "{a},{b},{i},{},{}",
                    field.l1[(i, a, b)],
                    field.r1[(i, a, b)]
                ));
            }
        }
    }
    vectors_csv.write_to(&dir.join("vectors.csv"))?;

    let side_json = |report: &cts_core::DriverReport| {
        serde_json::json!({
            "n_c_positive": report.n_c_positive,
            "n_c_negative": report.n_c_negative,
            "positive": wallets(&report.positive_nodes),
            "negative": wallets(&report.negative_nodes),
            "drivers": wallets(&report.driver_set),
        })
    };
    let report = serde_json::json!({
        "config_hash": hash,
        "week": week,
        "threshold": config.analysis.threshold,
        "margin": config.analysis.margin,
        "left": side_json(&left),
        "right": side_json(&right),
        "union": wallets(&union_ids),
        "complement": wallets(&complement),
        "counts": {
            "left": left.driver_set.len(),
            "right": right.driver_set.len(),
            "union": union.len(),
            "complement": complement.len(),
        },
    });
    std::fs::write(
        dir.join("driver_report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;

    let networks = load_networks(config)?;
    let driver_wallets: BTreeSet<String> = wallets(&union_ids).into_iter().collect();
    let complement_wallets: BTreeSet<String> = wallets(&complement).into_iter().collect();
    let flows = flow_stats(&networks, &driver_wallets, &complement_wallets)?;
    let mut flows_csv = CsvArtifact::new(
        &hash,
        "week,set,induced_volume,mean_inflow,mean_outflow,presence",
    );
    for flow in &flows {
        for (label, set) in [("driver", &flow.driver), ("complement", &flow.complement)] {
            let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            flows_csv.row(format_args!(
                "{},{label},{},{},{},{}",
                flow.week,
                set.induced_volume,
                fmt_opt(set.mean_inflow),
                fmt_opt(set.mean_outflow),
                set.presence
            ));
        }
    }
    flows_csv.write_to(&dir.join("flow_stats.csv"))?;

    Manifest {
        stage: "drivers".into(),
        config_hash: hash,
        inputs,
        outputs: vec![
            "vectors.csv".into(),
            "driver_report.json".into(),
            "flow_stats.csv".into(),
        ],
        info: [
            ("week".to_string(), week.to_string()),
            ("union".to_string(), union.len().to_string()),
        ]
        .into(),
    }
    .store(&dir)?;
    Ok(StageOutcome {
        stage: "drivers",
        cache_hit: false,
    })
}
