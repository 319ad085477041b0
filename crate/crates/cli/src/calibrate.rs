use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Args;
use ecomod::calibration::{calibrate_od_flows, target_link_flows, LinkMeasurement, OdFlowProblem, DEFAULT_PSI};
use ecomod::flow::SpeedDensityModel;
use ecomod::network::{io, EdgeId, NodeId};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Network `.json` or `nodes.csv` (with a sibling `edges.csv`).
    #[arg(long)]
    pub network: PathBuf,
    /// CSV `edge,normalized_speed`, one row per sample. Omit for a prior-only run.
    #[arg(long)]
    pub speeds: Option<PathBuf>,
    /// CSV `origin,destination,flow` (veh/s).
    #[arg(long)]
    pub prior: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Weight of the prior term.
    #[arg(long, default_value_t = DEFAULT_PSI)]
    pub psi: f64,
    /// Links with fewer samples are left out of the fit.
    #[arg(long, default_value_t = 1)]
    pub min_samples: usize,
}

#[derive(Deserialize)]
struct SpeedRow {
    edge: u32,
    normalized_speed: f64,
}

#[derive(Deserialize)]
struct PriorRow {
    origin: u32,
    destination: u32,
    flow: f64,
}

#[derive(Serialize)]
struct OdRow {
    origin: u32,
    destination: u32,
    prior: f64,
    distance_route: f64,
    time_route: f64,
    total: f64,
}

/// Reads every record, reporting the file and line of the first bad one.
fn read_rows<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let f = File::open(path).with_context(|| path.display().to_string())?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(f);
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        match rec {
            Ok(r) => rows.push(r),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                bail!("{} line {line}: {e}", path.display());
            }
        }
    }
    Ok(rows)
}

pub fn calibrate(args: &CalibrateArgs) -> anyhow::Result<ExitCode> {
    let network = io::load(&args.network)?;
    let priors: Vec<PriorRow> = read_rows(&args.prior)?;
    if priors.is_empty() {
        bail!("{}: no OD pairs", args.prior.display());
    }
    let mut samples: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    if let Some(path) = &args.speeds {
        for r in read_rows::<SpeedRow>(path)? {
            if r.edge as usize >= network.edge_count() {
                bail!("{}: edge {} does not exist", path.display(), r.edge);
            }
            samples.entry(r.edge).or_default().push(r.normalized_speed);
        }
    }
    let measurements: Vec<LinkMeasurement> =
        samples.into_iter().map(|(e, s)| LinkMeasurement { edge: EdgeId(e), samples: s }).collect();
    let model = SpeedDensityModel::default();
    let (targets, excluded) = target_link_flows(&network, &measurements, &model, args.min_samples);
    for (edge, why) in &excluded {
        eprintln!("edge {}: left out ({why})", edge.0);
    }
    let measured_speed: BTreeMap<EdgeId, f64> = measurements
        .iter()
        .filter_map(|m| Some((m.edge, m.mean()? * network.edge(m.edge).speed)))
        .collect();
    let pairs: Vec<(NodeId, NodeId)> = priors.iter().map(|p| (NodeId(p.origin), NodeId(p.destination))).collect();
    let prior: Vec<f64> = priors.iter().map(|p| p.flow).collect();
    let problem = OdFlowProblem::from_network(&network, &pairs, &measured_speed, targets, prior, args.psi)?;
    let flows = calibrate_od_flows(&problem)?;

    let f = File::create(&args.output).with_context(|| args.output.display().to_string())?;
    let mut w = csv::Writer::from_writer(f);
    for (i, p) in priors.iter().enumerate() {
        w.serialize(OdRow {
            origin: p.origin,
            destination: p.destination,
            prior: p.flow,
            distance_route: flows.distance[i],
            time_route: flows.time[i],
            total: flows.distance[i] + flows.time[i],
        })?;
    }
    w.flush()?;
    println!("{} OD pairs, {} measured links, objective {:.6e} -> {}", pairs.len(), problem.targets.len(), flows.objective, args.output.display());
    Ok(ExitCode::SUCCESS)
}
