use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::demand::RequestId;
use crate::network::{EdgeId, NodeId};
use crate::scheduler::VehicleId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Request,
    Assign,
    Pickup,
    Dropoff,
    Reject,
    /// A vehicle finished traversing an edge.
    Edge,
    PassiveRebalance,
    ActiveRebalance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(rename = "type")]
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<VehicleId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<RequestId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<EdgeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    /// Edge driven with no customer on board.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empty: Option<bool>,
}

impl Event {
    pub fn new(t: f64, kind: EventKind) -> Self {
        Self { t, kind, vehicle: None, request: None, node: None, edge: None, fuel: None, distance: None, empty: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Sum of the fuel of every traversed edge.
    pub fn edge_fuel(&self) -> f64 {
        self.of_kind(EventKind::Edge).filter_map(|e| e.fuel).sum()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), SimError> {
        for e in &self.events {
            let line = serde_json::to_string(e).map_err(|e| SimError::Io(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| SimError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, SimError> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| SimError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line).map_err(|e| SimError::Parse(format!("line {}: {e}", i + 1)))?);
        }
        Ok(Self { events })
    }
}
