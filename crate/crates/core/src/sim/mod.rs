//! Exact discrete-event simulation of the `N`-th system.
//!
//! Arrivals form a renewal process, each customer carries a deadline
//! (arrival time plus patience), the single server is non-idling and
//! non-preemptive, and when it frees up it takes the queued customer with the
//! earliest deadline. Queued customers renege at their deadline; customers in
//! service never do.

mod engine;
mod source;

use alloc::vec::Vec;

pub use engine::{
    build_initial_state, run, snapshot_queue_measure, RunConfig, SimState, DEFAULT_EVENT_CAP, DEFAULT_OUTPUT_POINTS,
    DEFAULT_SNAPSHOTS,
};
pub use source::{PrimitiveSource, RandomSource, ScriptedSource};

use crate::error::Result;
use crate::measure::{FiniteMeasure, MeasurePath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CustomerStatus {
    InQueue,
    InService,
    Reneged,
    Departed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Customer {
    /// Initial customers get ids `<= 0`, arrivals `1, 2, ...`.
    pub id: i64,
    pub arrival_time: f64,
    pub initial_lead: f64,
    pub deadline: f64,
    pub status: CustomerStatus,
    /// `None` until service starts, and forever for reneging customers.
    pub service_start: Option<f64>,
}

impl Customer {
    pub fn lead_time(&self, t: f64) -> f64 {
        self.deadline - t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    ServiceStart,
    ServiceEnd,
    Renege,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "Arrival",
            EventKind::ServiceStart => "ServiceStart",
            EventKind::ServiceEnd => "ServiceEnd",
            EventKind::Renege => "Renege",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub id: i64,
}

/// Paths sampled on the output grid. Counts are divided by `N`; `frontier`,
/// `current` and `head` are lead times and stay unscaled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimPaths {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub x: Vec<f64>,
    pub frontier: Vec<f64>,
    pub current: Vec<f64>,
    pub head: Vec<f64>,
}

/// Measures recorded at one snapshot time, scaled by `1/N`.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub queue: FiniteMeasure,
    pub potential: FiniteMeasure,
    /// Queue mass with lead time in `[C(t), F(t)]`.
    pub cf_mass: f64,
}

/// `(arrival time, deadline)` for every initial queued customer and every
/// arrival, regardless of what the server did with them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PotentialLog {
    pub entries: Vec<(f64, f64)>,
}

impl PotentialLog {
    /// Unscaled potential queue measure at `t`: a unit atom at the lead time
    /// of every customer that has arrived by `t` and whose deadline is later.
    pub fn measure_at(&self, t: f64) -> FiniteMeasure {
        snapshot_potential_measure(self, t)
    }
}

/// See [`PotentialLog::measure_at`].
pub fn snapshot_potential_measure(log: &PotentialLog, t: f64) -> FiniteMeasure {
    let leads = log
        .entries
        .iter()
        .filter(|(arrival, deadline)| *arrival <= t && *deadline > t)
        .map(|(_, deadline)| deadline - t);
    FiniteMeasure::from_locations(leads, 1.0).unwrap_or_else(|_| FiniteMeasure::zero())
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    pub scale: f64,
    pub horizon: f64,
    pub events: Vec<EventRecord>,
    pub paths: SimPaths,
    pub snapshots: Vec<Snapshot>,
    /// `(time, running maximum of head-of-line deadlines)` at every increase,
    /// starting with the value at time 0.
    pub frontier_jumps: Vec<(f64, f64)>,
    pub customers: Vec<Customer>,
    pub potential_log: PotentialLog,
    /// First time the queue (excluding the server) is empty.
    pub first_queue_empty: Option<f64>,
    pub initial_in_system: u64,
    pub arrivals: u64,
    pub departures: u64,
    pub reneged: u64,
    pub in_system: u64,
    pub busy_time: f64,
    pub event_count: u64,
}

impl SimTrace {
    /// `F(t)`: the largest head-of-line deadline seen up to `t`, minus `t`.
    pub fn frontier_at(&self, t: f64) -> f64 {
        let i = self.frontier_jumps.partition_point(|(s, _)| *s <= t);
        let sup = if i == 0 { self.frontier_jumps[0].1 } else { self.frontier_jumps[i - 1].1 };
        sup - t
    }

    /// The frontier on the output grid.
    pub fn frontier_path(&self) -> Vec<(f64, f64)> {
        self.paths.t.iter().map(|&t| (t, self.frontier_at(t))).collect()
    }

    pub fn queue_measure_path(&self) -> Result<MeasurePath> {
        MeasurePath::new(
            self.snapshots.iter().map(|s| s.t).collect(),
            self.snapshots.iter().map(|s| s.queue.clone()).collect(),
        )
    }

    pub fn potential_measure_path(&self) -> Result<MeasurePath> {
        MeasurePath::new(
            self.snapshots.iter().map(|s| s.t).collect(),
            self.snapshots.iter().map(|s| s.potential.clone()).collect(),
        )
    }
}
