use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Args;
use ecomod::sim::{percentile, run_baseline, run_scenario, MetricsReport, Scenario, ScenarioFile, SimConfig, METRICS_SCHEMA};
use serde::Serialize;

/// Network seed of the built-in scenario.
const STANDARD_NETWORK_SEED: u64 = 7;

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Scenario TOML; the built-in 20 x 20 grid scenario when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fleet configuration 1-8, or 9 for the personal-vehicle baseline. Repeat to sweep.
    #[arg(long = "configuration", required = true)]
    pub configurations: Vec<u8>,
    #[arg(long = "fleet-size", required = true)]
    pub fleet_sizes: Vec<usize>,
    #[arg(long = "seed", required = true)]
    pub seeds: Vec<u64>,
    /// Output directory for runs.csv and summary.csv.
    #[arg(long)]
    pub output: PathBuf,
    /// Assignment interval, s.
    #[arg(long)]
    pub interval: Option<f64>,
    /// Demand horizon, s; the warmup becomes a third of it.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Also write one JSON-lines event log per run under `events/`.
    #[arg(long)]
    pub events: bool,
}

fn load(args: &RunArgs) -> anyhow::Result<(Scenario, SimConfig)> {
    let (scenario, mut sim) = match &args.config {
        Some(path) => {
            let file = ScenarioFile::read(path)?;
            (file.load()?, file.sim)
        }
        None => (Scenario::standard(STANDARD_NETWORK_SEED)?, SimConfig::default()),
    };
    if let Some(i) = args.interval {
        sim.interval = i;
        sim.rebalance.interval = i;
    }
    if let Some(h) = args.horizon {
        sim.horizon = h;
        sim.warmup = h / 3.0;
    }
    Ok((scenario, sim))
}

fn metrics_writer(path: &Path) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(File::create(path).with_context(|| path.display().to_string())?);
    writeln!(f, "{METRICS_SCHEMA}")?;
    Ok(csv::Writer::from_writer(f))
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    configuration: u8,
    fleet_size: usize,
    runs: usize,
    metric: &'a str,
    mean: f64,
    p25: f64,
    p75: f64,
}

const SUMMARY_METRICS: [&str; 10] = [
    "served_ratio",
    "wait_mean",
    "delay_mean",
    "fleet_fuel",
    "fuel_per_customer",
    "empty_ratio",
    "assigned_per_vehicle",
    "onboard_per_vehicle",
    "baseline_fuel_delta",
    "violations",
];

fn metric(r: &MetricsReport, name: &str) -> Option<f64> {
    Some(match name {
        "served_ratio" => r.served_ratio,
        "wait_mean" => r.wait_mean,
        "delay_mean" => r.delay_mean,
        "fleet_fuel" => r.fleet_fuel,
        "fuel_per_customer" => r.fuel_per_customer,
        "empty_ratio" => r.empty_ratio,
        "assigned_per_vehicle" => r.assigned_per_vehicle,
        "onboard_per_vehicle" => r.onboard_per_vehicle,
        "baseline_fuel_delta" => r.baseline_fuel_delta?,
        "violations" => r.violations as f64,
        _ => unreachable!("unknown metric {name}"),
    })
}

pub fn run(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let (scenario, base) = load(args)?;
    super::create_dir(&args.output)?;
    if args.events {
        super::create_dir(&args.output.join("events"))?;
    }
    let mut baselines: BTreeMap<u64, MetricsReport> = BTreeMap::new();
    let mut runs = metrics_writer(&args.output.join("runs.csv"))?;
    let mut cells: BTreeMap<(u8, usize), Vec<MetricsReport>> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut row = 0;
    for &configuration in &args.configurations {
        for &fleet_size in &args.fleet_sizes {
            for &seed in &args.seeds {
                row += 1;
                let config = SimConfig { configuration, fleet_size, ..base.clone() };
                let result = (|| -> anyhow::Result<MetricsReport> {
                    config.validate()?;
                    if !baselines.contains_key(&seed) {
                        baselines.insert(seed, run_baseline(&scenario, &SimConfig { configuration: 9, ..base.clone() }, seed)?);
                    }
                    let baseline = &baselines[&seed];
                    if config.is_baseline() {
                        return Ok(MetricsReport { fleet_size, ..baseline.clone() });
                    }
                    let out = run_scenario(&scenario, &config, seed)?;
                    if args.events {
                        let p = args.output.join("events").join(format!("c{configuration}_f{fleet_size}_s{seed}.jsonl"));
                        let f = File::create(&p).with_context(|| p.display().to_string())?;
                        out.log.write_jsonl(BufWriter::new(f))?;
                    }
                    Ok(out.report.with_baseline(baseline))
                })();
                match result {
                    Ok(report) => {
                        runs.serialize(&report)?;
                        cells.entry((configuration, fleet_size)).or_default().push(report);
                    }
                    Err(e) => {
                        eprintln!("row {row} (configuration {configuration}, fleet {fleet_size}, seed {seed}): {e:#}");
                        failures.push(row);
                    }
                }
            }
        }
    }
    runs.flush()?;

    let mut summary = metrics_writer(&args.output.join("summary.csv"))?;
    for ((configuration, fleet_size), reports) in &cells {
        for name in SUMMARY_METRICS {
            let mut xs: Vec<f64> = reports.iter().filter_map(|r| metric(r, name)).collect();
            if xs.is_empty() {
                continue;
            }
            xs.sort_by(f64::total_cmp);
            summary.serialize(SummaryRow {
                configuration: *configuration,
                fleet_size: *fleet_size,
                runs: xs.len(),
                metric: name,
                mean: xs.iter().sum::<f64>() / xs.len() as f64,
                p25: percentile(&xs, 0.25),
                p75: percentile(&xs, 0.75),
            })?;
        }
    }
    summary.flush()?;
    println!("{} runs, {} failed -> {}", row, failures.len(), args.output.display());
    Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
