use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{
    Customer, CustomerStatus, EventKind, EventRecord, PotentialLog, PrimitiveSource, SimPaths, SimTrace, Snapshot,
};
use crate::error::{Error, Result};
use crate::math;
use crate::measure::FiniteMeasure;
use crate::model::{InitialCondition, Regime, SystemParams};

/// Queue order: deadline, then id.
#[derive(Debug, Clone, Copy)]
struct QueueKey {
    deadline: f64,
    id: i64,
    idx: usize,
}

impl PartialEq for QueueKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueKey {}

impl PartialOrd for QueueKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.deadline.total_cmp(&other.deadline).then(self.id.cmp(&other.id))
    }
}

#[derive(Debug, Clone, Copy)]
struct InService {
    idx: usize,
    completion: f64,
}

/// Full system state between events.
#[derive(Debug, Clone)]
pub struct SimState {
    clock: f64,
    customers: Vec<Customer>,
    queue: BTreeSet<QueueKey>,
    server: Option<InService>,
    initial_in_system: u64,
    arrivals: u64,
    departures: u64,
    reneged: u64,
    frontier_sup: f64,
    frontier_jumps: Vec<(f64, f64)>,
    busy_time: f64,
    potential: PotentialLog,
    first_queue_empty: Option<f64>,
    events: Vec<EventRecord>,
}

impl SimState {
    /// Empty system at time 0 with the given initial frontier.
    pub fn empty(frontier0: f64) -> Self {
        SimState {
            clock: 0.0,
            customers: Vec::new(),
            queue: BTreeSet::new(),
            server: None,
            initial_in_system: 0,
            arrivals: 0,
            departures: 0,
            reneged: 0,
            frontier_sup: frontier0,
            frontier_jumps: alloc::vec![(0.0, frontier0)],
            busy_time: 0.0,
            potential: PotentialLog::default(),
            first_queue_empty: Some(0.0),
            events: Vec::new(),
        }
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn queue_len(&self) -> u64 {
        self.queue.len() as u64
    }

    /// Customers in the system (queue plus server).
    pub fn in_system(&self) -> u64 {
        self.queue.len() as u64 + u64::from(self.server.is_some())
    }

    pub fn server_busy(&self) -> bool {
        self.server.is_some()
    }

    pub fn customers(&self) -> &[Customer] {
        &self.customers
    }

    /// `F(t)` at the current clock.
    pub fn frontier(&self) -> f64 {
        self.frontier_sup - self.clock
    }

    /// Lead time of the head of the queue, `0` when the queue is empty.
    pub fn head_lead(&self) -> f64 {
        self.head_lead_at(self.clock)
    }

    fn head_lead_at(&self, t: f64) -> f64 {
        self.queue.first().map_or(0.0, |k| k.deadline - t)
    }

    /// Unit atoms at the lead times of queued customers.
    pub fn queue_measure(&self) -> FiniteMeasure {
        self.queue_measure_at(self.clock)
    }

    fn queue_measure_at(&self, t: f64) -> FiniteMeasure {
        FiniteMeasure::from_locations(self.queue.iter().map(|k| k.deadline - t), 1.0)
            .unwrap_or_else(|_| FiniteMeasure::zero())
    }

    fn note_head(&mut self) {
        if let Some(head) = self.queue.first() {
            self.raise_frontier(head.deadline);
        }
    }

    fn raise_frontier(&mut self, deadline: f64) {
        if deadline > self.frontier_sup {
            self.frontier_sup = deadline;
            self.frontier_jumps.push((self.clock, deadline));
        }
    }

    fn enqueue(&mut self, idx: usize) {
        let c = &mut self.customers[idx];
        c.status = CustomerStatus::InQueue;
        self.queue.insert(QueueKey {
            deadline: c.deadline,
            id: c.id,
            idx,
        });
    }

    fn start_service<S: PrimitiveSource + ?Sized>(&mut self, idx: usize, source: &mut S, record: bool) -> Result<()> {
        let service = source
            .service()
            .ok_or_else(|| Error::invalid("service stream exhausted"))?;
        let c = &mut self.customers[idx];
        c.status = CustomerStatus::InService;
        c.service_start = Some(self.clock);
        let id = c.id;
        self.server = Some(InService {
            idx,
            completion: self.clock + service,
        });
        if record {
            self.events.push(EventRecord {
                time: self.clock,
                kind: EventKind::ServiceStart,
                id,
            });
        }
        Ok(())
    }

    fn check_queue_empty(&mut self) {
        if self.first_queue_empty.is_none() && self.queue.is_empty() {
            self.first_queue_empty = Some(self.clock);
        }
    }
}

/// `(1/N) Q`-scale snapshot of the queue: unit atoms at queued lead times.
pub fn snapshot_queue_measure(state: &SimState) -> FiniteMeasure {
    state.queue_measure()
}

const MAX_RESAMPLES: u32 = 1_000_000;

/// Initial state of the `N`-th system: `floor(N · Q(0))` customers with
/// i.i.d. lead times from the normalized initial measure, redrawn when they
/// land in `[0, frontier0]`. The earliest-deadline one starts service at
/// time 0 on a fresh service draw.
pub fn build_initial_state<S: PrimitiveSource + ?Sized>(
    ic: &InitialCondition,
    params: &SystemParams,
    source: &mut S,
) -> Result<SimState> {
    ic.validate()?;
    params.validate()?;
    let count = math::floor(params.n as f64 * ic.mass) as u64;
    if ic.mass == 0.0 && params.regime() != Regime::Subcritical {
        return Err(Error::EmptyInitialMeasure);
    }
    let mut state = SimState::empty(ic.frontier0);
    if count == 0 {
        return Ok(state);
    }
    let mut leads: Vec<f64> = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut attempts = 0;
        let lead = loop {
            let u = source
                .initial_lead(&ic.law)
                .ok_or_else(|| Error::invalid("initial lead stream exhausted"))?;
            if u > ic.frontier0 {
                break u;
            }
            attempts += 1;
            if attempts > MAX_RESAMPLES {
                return Err(Error::invalid(format!(
                    "initial lead times keep falling in [0, {}]",
                    ic.frontier0
                )));
            }
        };
        leads.push(lead);
    }
    leads.sort_by(f64::total_cmp);
    let first_id = 1 - count as i64;
    for (k, lead) in leads.iter().enumerate() {
        state.customers.push(Customer {
            id: first_id + k as i64,
            arrival_time: 0.0,
            initial_lead: *lead,
            deadline: *lead,
            status: CustomerStatus::InQueue,
            service_start: None,
        });
    }
    state.initial_in_system = count;
    // earliest deadline goes to the server, the rest wait
    state.start_service(0, source, true)?;
    for idx in 1..state.customers.len() {
        state.enqueue(idx);
        let d = state.customers[idx].deadline;
        state.potential.entries.push((0.0, d));
    }
    state.first_queue_empty = if state.queue.is_empty() { Some(0.0) } else { None };
    state.note_head();
    if let Some(first) = state.frontier_jumps.first_mut() {
        first.1 = state.frontier_sup;
    }
    state.frontier_jumps.truncate(1);
    Ok(state)
}

/// Settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub horizon: f64,
    /// Scale factor `N`; counts and measures are divided by it.
    pub scale: f64,
    /// Sampling times of the paths, increasing, within `[0, horizon]`.
    pub output_times: Vec<f64>,
    /// Indices into `output_times` where measures are recorded.
    pub snapshot_indices: Vec<usize>,
    pub event_cap: u64,
    /// Count a customer that enters service on arrival as a head-of-line
    /// customer for the frontier.
    pub frontier_on_bypass: bool,
    pub record_events: bool,
}

pub const DEFAULT_OUTPUT_POINTS: usize = 512;
pub const DEFAULT_SNAPSHOTS: usize = 32;
pub const DEFAULT_EVENT_CAP: u64 = 50_000_000;

impl RunConfig {
    /// `points` uniform samples on `[0, horizon]` (endpoints included) with
    /// `snapshots` of them, evenly spread, carrying measures.
    pub fn uniform(horizon: f64, scale: f64, points: usize, snapshots: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::invalid("need at least 2 output points"));
        }
        if snapshots > points {
            return Err(Error::invalid("more snapshots than output points"));
        }
        let output_times = (0..points)
            .map(|k| horizon * k as f64 / (points - 1) as f64)
            .collect();
        let snapshot_indices = match snapshots {
            0 => Vec::new(),
            1 => alloc::vec![points - 1],
            s => {
                let mut idx: Vec<usize> = (0..s)
                    .map(|j| libm::round(j as f64 * (points - 1) as f64 / (s - 1) as f64) as usize)
                    .collect();
                idx.dedup();
                idx
            }
        };
        Ok(RunConfig {
            horizon,
            scale,
            output_times,
            snapshot_indices,
            event_cap: DEFAULT_EVENT_CAP,
            frontier_on_bypass: true,
            record_events: true,
        })
    }

    pub fn with_params(params: &SystemParams) -> Result<Self> {
        Self::uniform(params.horizon, params.n as f64, DEFAULT_OUTPUT_POINTS, DEFAULT_SNAPSHOTS)
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if !(self.scale > 0.0) {
            return Err(Error::invalid("scale must be > 0"));
        }
        if self.output_times.windows(2).any(|w| w[1] <= w[0])
            || self.output_times.iter().any(|t| *t < 0.0 || *t > self.horizon)
        {
            return Err(Error::invalid("output times must increase within [0, horizon]"));
        }
        if self.snapshot_indices.windows(2).any(|w| w[1] <= w[0])
            || self.snapshot_indices.iter().any(|i| *i >= self.output_times.len())
        {
            return Err(Error::invalid("snapshot indices must increase and index output times"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Next {
    // declaration order is the tie-break order at equal times
    Renege,
    ServiceEnd,
    Arrival,
}

struct Recorder<'a> {
    config: &'a RunConfig,
    inv_scale: f64,
    next_point: usize,
    next_snapshot: usize,
    paths: SimPaths,
    snapshots: Vec<Snapshot>,
}

impl<'a> Recorder<'a> {
    fn new(config: &'a RunConfig) -> Self {
        Recorder {
            config,
            inv_scale: 1.0 / config.scale,
            next_point: 0,
            next_snapshot: 0,
            paths: SimPaths::default(),
            snapshots: Vec::new(),
        }
    }

    /// Record every output time strictly before `until`, using the state as
    /// it stands (no event happens in between).
    fn record_until(&mut self, state: &SimState, until: f64, inclusive: bool) {
        while let Some(&t) = self.config.output_times.get(self.next_point) {
            if t > until || (!inclusive && t == until) {
                break;
            }
            self.record(state, t);
        }
    }

    fn record(&mut self, state: &SimState, t: f64) {
        let q = state.queue.len() as f64;
        let frontier = state.frontier_sup - t;
        let head = state.head_lead_at(t);
        let current = if state.queue.is_empty() { frontier } else { head };
        let p = &mut self.paths;
        p.t.push(t);
        p.q.push(q * self.inv_scale);
        p.r.push(state.reneged as f64 * self.inv_scale);
        p.x.push(state.in_system() as f64 * self.inv_scale);
        p.frontier.push(frontier);
        p.current.push(current);
        p.head.push(head);

        if self.config.snapshot_indices.get(self.next_snapshot) == Some(&self.next_point) {
            let queue = state.queue_measure_at(t);
            let cf_mass = queue.mass_closed(current, frontier) * self.inv_scale;
            self.snapshots.push(Snapshot {
                t,
                queue: queue.scaled(self.inv_scale),
                potential: state.potential.measure_at(t).scaled(self.inv_scale),
                cf_mass,
            });
            self.next_snapshot += 1;
        }
        self.next_point += 1;
    }
}

/// Runs the event loop from `state` up to `config.horizon`.
///
/// Three event sources compete: the next arrival, the end of the current
/// service and the earliest deadline in the queue (reneging). At equal times
/// reneging goes first, then service completion, then arrival.
pub fn run<S: PrimitiveSource + ?Sized>(mut state: SimState, source: &mut S, config: &RunConfig) -> Result<SimTrace> {
    config.validate()?;
    let horizon = config.horizon;
    let record = config.record_events;
    let mut recorder = Recorder::new(config);
    let mut next_arrival = source.next_interarrival().map(|dt| state.clock + dt);
    let mut next_id: i64 = 1;
    let mut event_count: u64 = 0;

    loop {
        let candidates = [
            (state.queue.first().map(|k| k.deadline), Next::Renege),
            (state.server.map(|s| s.completion), Next::ServiceEnd),
            (next_arrival, Next::Arrival),
        ];
        let next = candidates
            .iter()
            .filter_map(|(t, kind)| t.map(|t| (t, *kind)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((t, kind)) = next else { break };
        if t > horizon {
            break;
        }
        event_count += 1;
        if event_count > config.event_cap {
            return Err(Error::EventOverflow { cap: config.event_cap });
        }
        recorder.record_until(&state, t, false);
        if state.server.is_some() {
            state.busy_time += t - state.clock;
        }
        state.clock = t;

        match kind {
            Next::Renege => {
                let key = state.queue.pop_first().expect("renege from nonempty queue");
                let c = &mut state.customers[key.idx];
                c.status = CustomerStatus::Reneged;
                state.reneged += 1;
                if record {
                    state.events.push(EventRecord { time: t, kind: EventKind::Renege, id: key.id });
                }
            }
            Next::ServiceEnd => {
                let done = state.server.take().expect("service end with busy server");
                state.customers[done.idx].status = CustomerStatus::Departed;
                state.departures += 1;
                if record {
                    let id = state.customers[done.idx].id;
                    state.events.push(EventRecord { time: t, kind: EventKind::ServiceEnd, id });
                }
                if let Some(key) = state.queue.pop_first() {
                    state.start_service(key.idx, source, record)?;
                }
            }
            Next::Arrival => {
                let patience = source
                    .patience()
                    .ok_or_else(|| Error::invalid("patience stream exhausted"))?;
                let idx = state.customers.len();
                let id = next_id;
                next_id += 1;
                state.customers.push(Customer {
                    id,
                    arrival_time: t,
                    initial_lead: patience,
                    deadline: t + patience,
                    status: CustomerStatus::InQueue,
                    service_start: None,
                });
                state.arrivals += 1;
                state.potential.entries.push((t, t + patience));
                if record {
                    state.events.push(EventRecord { time: t, kind: EventKind::Arrival, id });
                }
                if state.server.is_none() {
                    // an arrival to an idle server is momentarily the head of the line
                    if config.frontier_on_bypass {
                        state.raise_frontier(t + patience);
                    }
                    state.start_service(idx, source, record)?;
                } else {
                    state.enqueue(idx);
                }
                next_arrival = source.next_interarrival().map(|dt| t + dt);
            }
        }
        state.note_head();
        state.check_queue_empty();
    }

    recorder.record_until(&state, horizon, true);
    if state.server.is_some() && horizon > state.clock {
        state.busy_time += horizon - state.clock;
    }

    let in_system = state.in_system();
    Ok(SimTrace {
        scale: config.scale,
        horizon,
        events: state.events,
        paths: recorder.paths,
        snapshots: recorder.snapshots,
        frontier_jumps: state.frontier_jumps,
        customers: state.customers,
        potential_log: state.potential,
        first_queue_empty: state.first_queue_empty,
        initial_in_system: state.initial_in_system,
        arrivals: state.arrivals,
        departures: state.departures,
        reneged: state.reneged,
        in_system,
        busy_time: state.busy_time,
        event_count,
    })
}
