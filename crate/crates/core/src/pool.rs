//! Live customer pool and its request state machine.
//!
//! ```text
//! waiting --assign--> assigned --pickup--> onboard --complete--> completed
//!    |                   |
//!    +-----pickup--------+------------> (onboard)
//!    +-----reject--------+------------> rejected
//! ```
//!
//! A request is *pending* while waiting or assigned; it leaves the pending set
//! exactly when picked up or rejected.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{RequestId, TravelRequest};
use crate::scheduler::VehicleId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestState {
    Waiting,
    Assigned,
    Onboard,
    Completed,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolEvent {
    Assign(VehicleId),
    Pickup,
    Reject,
    Complete,
}

#[derive(Debug, Error, PartialEq)]
pub enum PoolError {
    #[error("unknown request {0}")]
    UnknownRequest(RequestId),
    #[error("request {0} already in pool")]
    Duplicate(RequestId),
    #[error("illegal transition for {id}: {from:?} on {event:?}")]
    IllegalTransition { id: RequestId, from: RequestState, event: PoolEvent },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub request: TravelRequest,
    pub state: RequestState,
    pub vehicle: Option<VehicleId>,
    pub pickup_time: Option<f64>,
    pub dropoff_time: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct CustomerPool {
    entries: BTreeMap<RequestId, PoolEntry>,
    pending: BTreeSet<RequestId>,
}

impl CustomerPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, request: TravelRequest) -> Result<(), PoolError> {
        let id = request.id;
        if self.entries.contains_key(&id) {
            return Err(PoolError::Duplicate(id));
        }
        self.entries.insert(id, PoolEntry { request, state: RequestState::Waiting, vehicle: None, pickup_time: None, dropoff_time: None });
        self.pending.insert(id);
        Ok(())
    }

    /// Advances one request's state; `time` stamps pickups and completions.
    pub fn apply(&mut self, id: RequestId, event: PoolEvent, time: f64) -> Result<RequestState, PoolError> {
        use RequestState::*;
        let entry = self.entries.get_mut(&id).ok_or(PoolError::UnknownRequest(id))?;
        let next = match (entry.state, event) {
            (Waiting, PoolEvent::Assign(_)) => Assigned,
            (Waiting | Assigned, PoolEvent::Pickup) => Onboard,
            (Waiting | Assigned, PoolEvent::Reject) => Rejected,
            (Onboard, PoolEvent::Complete) => Completed,
            (from, event) => return Err(PoolError::IllegalTransition { id, from, event }),
        };
        match event {
            PoolEvent::Assign(v) => entry.vehicle = Some(v),
            PoolEvent::Pickup => {
                entry.pickup_time = Some(time);
                self.pending.remove(&id);
            }
            PoolEvent::Reject => {
                entry.vehicle = None;
                self.pending.remove(&id);
            }
            PoolEvent::Complete => entry.dropoff_time = Some(time),
        }
        entry.state = next;
        Ok(next)
    }

    pub fn get(&self, id: RequestId) -> Option<&PoolEntry> {
        self.entries.get(&id)
    }

    pub fn state(&self, id: RequestId) -> Option<RequestState> {
        self.entries.get(&id).map(|e| e.state)
    }

    /// Waiting or assigned requests, by id.
    pub fn pending(&self) -> impl Iterator<Item = &PoolEntry> {
        self.pending.iter().map(|id| &self.entries[id])
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = &PoolEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, state: RequestState) -> usize {
        self.entries.values().filter(|e| e.state == state).count()
    }
}
