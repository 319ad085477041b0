//! Network files: CSV node/edge lists or a single JSON document.
//!
//! ```text
//! nodes.csv: id,x,y
//! edges.csv: id,from,to,length_m,speed_mps,lanes
//! ```
//!
//! Node and edge ids must be dense (`0..n`, any order).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, NetworkError, Node, NodeId, RoadNetwork};

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: u32,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    id: u32,
    from: u32,
    to: u32,
    length_m: f64,
    speed_mps: f64,
    lanes: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkDocument {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

fn csv_error(e: csv::Error) -> NetworkError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    NetworkError::Parse { line, message: e.to_string() }
}

fn io_error(e: std::io::Error) -> NetworkError {
    NetworkError::Io(e.to_string())
}

fn dense<T>(items: Vec<(u32, T)>, what: &'static str) -> Result<Vec<T>, NetworkError> {
    let n = items.len();
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (position, (id, item)) in items.into_iter().enumerate() {
        let slot = slots.get_mut(id as usize).filter(|s| s.is_none());
        match slot {
            Some(s) => *s = Some(item),
            None => {
                return Err(NetworkError::Parse {
                    line: position + 2,
                    message: format!("{what} id {id} is duplicated or not in 0..{n}"),
                })
            }
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("all slots filled")).collect())
}

fn assemble(nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<RoadNetwork, NetworkError> {
    let nodes = dense(nodes.into_iter().map(|r| (r.id, Node { x: r.x, y: r.y })).collect(), "node")?;
    let edges = dense(
        edges
            .into_iter()
            .map(|r| {
                (
                    r.id,
                    Edge { from: NodeId(r.from), to: NodeId(r.to), length: r.length_m, speed: r.speed_mps, lanes: r.lanes },
                )
            })
            .collect(),
        "edge",
    )?;
    RoadNetwork::new(nodes, edges)
}

fn records(network: &RoadNetwork) -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
    let nodes = network.nodes().iter().enumerate().map(|(i, n)| NodeRecord { id: i as u32, x: n.x, y: n.y }).collect();
    let edges = network
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| EdgeRecord {
            id: i as u32,
            from: e.from.0,
            to: e.to.0,
            length_m: e.length,
            speed_mps: e.speed,
            lanes: e.lanes,
        })
        .collect();
    (nodes, edges)
}

pub fn read_csv<R1: Read, R2: Read>(nodes: R1, edges: R2) -> Result<RoadNetwork, NetworkError> {
    let nodes = csv::Reader::from_reader(nodes)
        .deserialize()
        .collect::<Result<Vec<NodeRecord>, _>>()
        .map_err(csv_error)?;
    let edges = csv::Reader::from_reader(edges)
        .deserialize()
        .collect::<Result<Vec<EdgeRecord>, _>>()
        .map_err(csv_error)?;
    assemble(nodes, edges)
}

pub fn write_csv<W1: Write, W2: Write>(network: &RoadNetwork, nodes: W1, edges: W2) -> Result<(), NetworkError> {
    let (n, e) = records(network);
    let mut w = csv::Writer::from_writer(nodes);
    for r in n {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush().map_err(io_error)?;
    let mut w = csv::Writer::from_writer(edges);
    for r in e {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush().map_err(io_error)?;
    Ok(())
}

pub fn read_json<R: Read>(reader: R) -> Result<RoadNetwork, NetworkError> {
    let doc: NetworkDocument = serde_json::from_reader(reader)
        .map_err(|e| NetworkError::Parse { line: e.line(), message: e.to_string() })?;
    assemble(doc.nodes, doc.edges)
}

pub fn write_json<W: Write>(network: &RoadNetwork, writer: W) -> Result<(), NetworkError> {
    let (nodes, edges) = records(network);
    serde_json::to_writer_pretty(writer, &NetworkDocument { nodes, edges }).map_err(|e| NetworkError::Io(e.to_string()))
}

/// Loads a network from a `.json` document or from a `nodes.csv` path whose
/// sibling `edges.csv` holds the edges.
pub fn load(path: &Path) -> Result<RoadNetwork, NetworkError> {
    let open = |p: &Path| std::fs::File::open(p).map_err(|e| NetworkError::Io(format!("{}: {e}", p.display())));
    if path.extension().is_some_and(|e| e == "json") {
        return read_json(std::io::BufReader::new(open(path)?));
    }
    let edges = path.with_file_name("edges.csv");
    read_csv(std::io::BufReader::new(open(path)?), std::io::BufReader::new(open(&edges)?))
}
