use std::fs::File;

use ecomod::demand::{generate_requests, write_requests_csv, DemandModel};
use ecomod::network::{generate_grid, io, partition_network, GridSpec};
use ecomod::sim::{run_scenario, EventLog, ScenarioFile, SimConfig, SimError};

#[test]
fn scenario_written_to_disk_runs_like_the_in_memory_one() {
    let dir = tempfile::tempdir().unwrap();
    let net = generate_grid(&GridSpec { cols: 6, rows: 6, ..Default::default() }, 4).unwrap();
    let parts = partition_network(&net, 4).unwrap();
    let demand = DemandModel::with_uniform_destinations(vec![0.03; 4]);
    let requests = generate_requests(&demand, &parts, 900.0, 1.0, 2).unwrap();
    io::write_json(&net, File::create(dir.path().join("net.json")).unwrap()).unwrap();
    write_requests_csv(&requests, File::create(dir.path().join("requests.csv")).unwrap()).unwrap();
    let sim = SimConfig { configuration: 6, fleet_size: 8, horizon: 900.0, warmup: 300.0, ..Default::default() };
    let file = ScenarioFile { network: "net.json".into(), partitions: 4, requests: Some("requests.csv".into()), demand, sim };
    let path = dir.path().join("scenario.toml");
    std::fs::write(&path, file.to_toml()).unwrap();

    let read = ScenarioFile::read(&path).unwrap();
    assert_eq!(read.sim, file.sim);
    let scenario = read.load().unwrap();
    assert_eq!(scenario.requests.as_deref(), Some(&requests[..]));

    let out = run_scenario(&scenario, &read.sim, 5).unwrap();
    assert_eq!(out.report.total_requests, requests.len());

    // The event log survives a JSON-lines round trip.
    let log_path = dir.path().join("events.jsonl");
    out.log.write_jsonl(File::create(&log_path).unwrap()).unwrap();
    let back = EventLog::read_jsonl(std::io::BufReader::new(File::open(&log_path).unwrap())).unwrap();
    assert_eq!(back, out.log);
}

#[test]
fn missing_network_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.toml");
    let file = ScenarioFile {
        network: "absent.json".into(),
        partitions: 1,
        requests: None,
        demand: DemandModel::with_uniform_destinations(vec![0.01]),
        sim: SimConfig::default(),
    };
    std::fs::write(&path, file.to_toml()).unwrap();
    let err = ScenarioFile::read(&path).unwrap().load().unwrap_err();
    assert!(matches!(err, SimError::Network(_) | SimError::Io(_)), "{err:?}");
}
