use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Args;
use ecomod::demand::{generate_requests, write_requests_csv, DemandModel};
use ecomod::network::{generate_grid, io, partition_network, GridSpec};
use ecomod::sim::{ScenarioFile, SimConfig};

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub cols: usize,
    #[arg(long, default_value_t = 10)]
    pub rows: usize,
    /// Block length, m.
    #[arg(long, default_value_t = 200.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 2)]
    pub partitions_x: usize,
    #[arg(long, default_value_t = 2)]
    pub partitions_y: usize,
    /// Total demand, spread evenly over partitions.
    #[arg(long, default_value_t = 600.0)]
    pub requests_per_hour: f64,
    /// Demand horizon, s.
    #[arg(long, default_value_t = 7200.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub fn gen(args: &GenArgs) -> anyhow::Result<ExitCode> {
    let spec = GridSpec { cols: args.cols, rows: args.rows, spacing: args.spacing, ..Default::default() };
    let network = generate_grid(&spec, args.seed)?;
    let k = args.partitions_x * args.partitions_y;
    let partitions = partition_network(&network, k)?;
    let demand = DemandModel::with_uniform_destinations(vec![args.requests_per_hour / 3600.0 / k as f64; k]);
    let requests = generate_requests(&demand, &partitions, args.horizon, 1.0, args.seed)?;

    super::create_dir(&args.out)?;
    let create = |name: &str| {
        let p = args.out.join(name);
        File::create(&p).map(BufWriter::new).with_context(|| p.display().to_string())
    };
    io::write_csv(&network, create("nodes.csv")?, create("edges.csv")?)?;
    write_requests_csv(&requests, create("requests.csv")?)?;
    let scenario = ScenarioFile {
        network: "nodes.csv".into(),
        partitions: k,
        requests: Some("requests.csv".into()),
        demand,
        sim: SimConfig { horizon: args.horizon, warmup: args.horizon / 3.0, ..Default::default() },
    };
    let path = args.out.join("scenario.toml");
    std::fs::write(&path, scenario.to_toml()).with_context(|| path.display().to_string())?;
    println!(
        "{} nodes, {} edges, {} partitions, {} requests -> {}",
        network.node_count(),
        network.edge_count(),
        partitions.len(),
        requests.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
