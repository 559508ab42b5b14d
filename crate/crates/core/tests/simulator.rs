use edfluid_core::distribution::DistributionSpec;
use edfluid_core::measure::kolmogorov_distance;
use edfluid_core::model::{InitialCondition, SystemParams};
use edfluid_core::sim::{
    build_initial_state, run, CustomerStatus, EventKind, EventRecord, RandomSource, RunConfig, ScriptedSource,
    SimState, SimTrace,
};
use edfluid_core::FiniteMeasure;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ev(time: f64, kind: EventKind, id: i64) -> EventRecord {
    EventRecord { time, kind, id }
}

fn scripted(horizon: f64, src: &mut ScriptedSource) -> SimTrace {
    let cfg = RunConfig::uniform(horizon, 1.0, 101, 5).unwrap();
    run(SimState::empty(0.0), src, &cfg).unwrap()
}

#[test]
fn single_customer_trace() {
    let mut src = ScriptedSource::new(vec![1.0], vec![5.0], vec![0.5]);
    let trace = scripted(3.0, &mut src);
    assert_eq!(
        trace.events,
        vec![
            ev(1.0, EventKind::Arrival, 1),
            ev(1.0, EventKind::ServiceStart, 1),
            ev(1.5, EventKind::ServiceEnd, 1),
        ]
    );
    assert_eq!(trace.reneged, 0);
    assert!(trace.paths.q.iter().all(|q| *q == 0.0));
}

#[test]
fn non_preemption_lets_earlier_deadline_renege() {
    // deadline-3 customer arrives first to an idle server, then a deadline-2
    // customer queues behind it and runs out of patience
    let mut src = ScriptedSource::new(vec![0.1, 0.1], vec![2.9, 1.8], vec![10.0, 10.0]);
    let trace = scripted(12.0, &mut src);
    assert_eq!(
        trace.events,
        vec![
            ev(0.1, EventKind::Arrival, 1),
            ev(0.1, EventKind::ServiceStart, 1),
            ev(0.2, EventKind::Arrival, 2),
            ev(2.0, EventKind::Renege, 2),
            ev(10.1, EventKind::ServiceEnd, 1),
        ]
    );
    assert_eq!(trace.reneged, 1);
    assert_eq!(trace.customers[1].status, CustomerStatus::Reneged);
    assert_eq!(trace.customers[1].service_start, None);
}

#[test]
fn earliest_deadline_is_served_next() {
    // 1 is served on [0, 2]; 2 (deadline 9), 3 (deadline 4) and 4 (deadline
    // 2) queue up. At 2 customer 4 reneges before the service end is
    // processed, then 3 is picked over 2.
    let mut src = ScriptedSource::new(vec![0.0, 0.5, 0.5, 0.5], vec![10.0, 8.5, 3.0, 0.5], vec![2.0, 1.0, 1.0]);
    let trace = scripted(5.0, &mut src);
    assert_eq!(
        trace.events,
        vec![
            ev(0.0, EventKind::Arrival, 1),
            ev(0.0, EventKind::ServiceStart, 1),
            ev(0.5, EventKind::Arrival, 2),
            ev(1.0, EventKind::Arrival, 3),
            ev(1.5, EventKind::Arrival, 4),
            ev(2.0, EventKind::Renege, 4),
            ev(2.0, EventKind::ServiceEnd, 1),
            ev(2.0, EventKind::ServiceStart, 3),
            ev(3.0, EventKind::ServiceEnd, 3),
            ev(3.0, EventKind::ServiceStart, 2),
            ev(4.0, EventKind::ServiceEnd, 2),
        ]
    );
    // customer 1 entered an idle server with deadline 10; every later head
    // had an earlier deadline
    assert!((trace.frontier_at(4.0) - (10.0 - 4.0)).abs() < 1e-12);
}

fn plain_fifo_in_system(x0: u64, inter: &[f64], services: &[f64], times: &[f64]) -> Vec<u64> {
    // Reference M/G/1 count process: with nobody reneging the number in the
    // system does not depend on the service order.
    let mut arrivals = Vec::new();
    let mut t = 0.0;
    for dt in inter {
        t += dt;
        arrivals.push(t);
    }
    let mut departures = Vec::new();
    let mut free_at = 0.0;
    let mut s = services.iter();
    for _ in 0..x0 {
        free_at += s.next().unwrap();
        departures.push(free_at);
    }
    for a in &arrivals {
        let start = if *a > free_at { *a } else { free_at };
        free_at = start + s.next().unwrap();
        departures.push(free_at);
    }
    times
        .iter()
        .map(|&u| {
            let arrived = arrivals.iter().filter(|a| **a <= u).count() as u64;
            let left = departures.iter().filter(|d| **d <= u).count() as u64;
            x0 + arrived - left
        })
        .collect()
}

fn exp_draws(rng: &mut ChaCha8Rng, rate: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            -(1.0 - u).ln() / rate
        })
        .collect()
}

#[test]
fn patient_customers_match_plain_queue_pathwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let inter = exp_draws(&mut rng, 4.0, 200);
        let services = exp_draws(&mut rng, 5.0, 400);
        let mut src = ScriptedSource::new(inter.clone(), vec![1e12; 200], services.clone());
        let cfg = RunConfig::uniform(10.0, 1.0, 201, 0).unwrap();
        let trace = run(SimState::empty(0.0), &mut src, &cfg).unwrap();
        let oracle = plain_fifo_in_system(0, &inter, &services, &trace.paths.t);
        let sim: Vec<u64> = trace.paths.x.iter().map(|x| *x as u64).collect();
        assert_eq!(sim, oracle);
        assert_eq!(trace.reneged, 0);
    }
}

#[test]
fn nearly_patient_queue_matches_mm1_in_distribution() {
    // X(T) over 200 replications against an independent M/M/1 simulation.
    let (lambda, mu, n, horizon) = (0.8, 1.0, 5u64, 4.0);
    let exp1 = DistributionSpec::exponential(1.0).unwrap();
    let patience = DistributionSpec::exponential(1e-9).unwrap();
    let ic = InitialCondition::new(1.0, exp1.clone(), 0.0).unwrap();
    let mut sim_final = Vec::new();
    let mut oracle_final = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for rep in 0..200u64 {
        let params = SystemParams::new(lambda, mu, n, horizon, 1000 + rep).unwrap();
        let mut src = RandomSource::new(&params, exp1.clone(), exp1.clone(), patience.clone()).unwrap();
        let state = build_initial_state(&ic, &params, &mut src).unwrap();
        let cfg = RunConfig::uniform(horizon, 1.0, 2, 0).unwrap();
        let trace = run(state, &mut src, &cfg).unwrap();
        sim_final.push(trace.in_system as f64);

        let inter = exp_draws(&mut rng, lambda * n as f64, 200);
        let services = exp_draws(&mut rng, mu * n as f64, 400);
        oracle_final.push(plain_fifo_in_system(n, &inter, &services, &[horizon])[0] as f64);
    }
    let a = FiniteMeasure::from_locations(sim_final.iter().map(|x| x + 0.5), 1.0 / 200.0).unwrap();
    let b = FiniteMeasure::from_locations(oracle_final.iter().map(|x| x + 0.5), 1.0 / 200.0).unwrap();
    let d = kolmogorov_distance(&a, &b);
    // two-sample critical value at level 0.001 is about 0.195 for 200 vs 200
    assert!(d < 0.195, "KS distance {d}");
}

fn random_trace(seed: u64, lambda: f64, n: u64) -> SimTrace {
    let params = SystemParams::new(lambda, 1.0, n, 3.0, seed).unwrap();
    let exp1 = DistributionSpec::exponential(1.0).unwrap();
    let patience = DistributionSpec::weibull(1.5, 1.0).unwrap();
    let ic = InitialCondition::new(1.0, exp1.clone(), 0.0).unwrap();
    let mut src = RandomSource::new(&params, exp1.clone(), exp1, patience).unwrap();
    let state = build_initial_state(&ic, &params, &mut src).unwrap();
    run(state, &mut src, &RunConfig::with_params(&params).unwrap()).unwrap()
}

#[test]
fn flow_conservation_and_path_identities() {
    for (seed, lambda) in [(1, 1.0), (2, 2.0), (3, 0.5)] {
        let trace = random_trace(seed, lambda, 100);
        let count = |k: EventKind| trace.events.iter().filter(|e| e.kind == k).count() as u64;
        assert_eq!(count(EventKind::Arrival), trace.arrivals);
        assert_eq!(count(EventKind::ServiceEnd), trace.departures);
        assert_eq!(count(EventKind::Renege), trace.reneged);
        assert_eq!(
            trace.in_system,
            trace.initial_in_system + trace.arrivals - trace.departures - trace.reneged
        );
        let p = &trace.paths;
        for k in 0..p.t.len() {
            let x = (p.x[k] * 100.0).round();
            let q = (p.q[k] * 100.0).round();
            assert_eq!(q, (x - 1.0).max(0.0));
            if q > 0.0 {
                assert!(p.frontier[k] >= p.head[k] - 1e-12);
                assert!(p.frontier[k] > 0.0);
                assert_eq!(p.current[k], p.head[k]);
            } else {
                assert_eq!(p.current[k], p.frontier[k]);
            }
        }
        assert!(p.r.windows(2).all(|w| w[1] >= w[0]));
        assert!(trace.events.windows(2).all(|w| w[1].time >= w[0].time));
    }
}

#[test]
fn service_is_non_preemptive_and_edf() {
    for (seed, lambda) in [(5, 1.0), (6, 2.0)] {
        let trace = random_trace(seed, lambda, 60);
        let mut busy: Option<i64> = None;
        for e in &trace.events {
            match e.kind {
                EventKind::ServiceStart => {
                    assert_eq!(busy, None, "start while busy at {}", e.time);
                    busy = Some(e.id);
                }
                EventKind::ServiceEnd => {
                    assert_eq!(busy, Some(e.id));
                    busy = None;
                }
                _ => {}
            }
        }
        let by_id = |id: i64| trace.customers.iter().find(|c| c.id == id).unwrap();
        for e in trace.events.iter().filter(|e| e.kind == EventKind::ServiceStart && e.time > 0.0) {
            let chosen = by_id(e.id);
            if chosen.arrival_time == e.time {
                continue; // entered an idle server on arrival
            }
            let s = e.time;
            for other in &trace.customers {
                let queued = other.id != chosen.id
                    && other.arrival_time <= s
                    && other.service_start.is_none_or(|x| x > s)
                    && !(other.status == CustomerStatus::Reneged && other.deadline <= s);
                if queued {
                    assert!(chosen.deadline <= other.deadline, "EDF violated at {s}");
                }
            }
        }
    }
}

#[test]
fn reneging_happens_exactly_at_deadlines() {
    let trace = random_trace(8, 2.0, 80);
    let mut reneges = 0;
    for e in trace.events.iter().filter(|e| e.kind == EventKind::Renege) {
        let c = trace.customers.iter().find(|c| c.id == e.id).unwrap();
        assert_eq!(c.deadline, e.time);
        assert_eq!(c.status, CustomerStatus::Reneged);
        assert_eq!(c.service_start, None);
        reneges += 1;
    }
    assert!(reneges > 0);
    for c in trace.customers.iter().filter(|c| c.status == CustomerStatus::InQueue) {
        assert!(c.deadline > trace.horizon);
    }
    for c in trace.customers.iter().filter(|c| c.service_start.is_some()) {
        assert!(c.service_start.unwrap() <= c.deadline);
    }
}

#[test]
fn queue_measure_starts_at_current_lead_time() {
    let trace = random_trace(12, 1.0, 200);
    for (k, snap) in trace.snapshots.iter().enumerate() {
        let i = trace.paths.t.iter().position(|t| *t == snap.t).unwrap();
        let c = trace.paths.current[i];
        let below = snap.queue.total_mass() - snap.queue.tail_closed(c);
        assert!(below.abs() < 1e-12, "snapshot {k}");
        assert!((snap.queue.total_mass() - trace.paths.q[i]).abs() < 1e-12);
        // the serverless system holds everyone the real queue holds
        for a in [0.0, 0.3, 1.0, 2.0] {
            assert!(snap.potential.tail(a) >= snap.queue.tail(a) - 1e-12);
        }
    }
    let first = &trace.snapshots[0];
    let initial_queue = first.queue.total_mass();
    assert!((first.potential.total_mass() - initial_queue).abs() < 1e-12);
}

#[test]
fn same_seed_same_events() {
    let a = random_trace(21, 1.0, 100);
    let b = random_trace(21, 1.0, 100);
    assert_eq!(a.events, b.events);
    assert_eq!(a.paths, b.paths);
    let c = random_trace(22, 1.0, 100);
    assert_ne!(a.events, c.events);
}

#[test]
fn initial_state_matches_initial_law() {
    let params = SystemParams::new(1.0, 1.0, 1000, 1.0, 3).unwrap();
    let exp1 = DistributionSpec::exponential(1.0).unwrap();
    let ic = InitialCondition::new(1.0, exp1.clone(), 0.0).unwrap();
    let mut src = RandomSource::new(&params, exp1.clone(), exp1.clone(), exp1).unwrap();
    let state = build_initial_state(&ic, &params, &mut src).unwrap();
    assert_eq!(state.in_system(), 1000);
    let leads = FiniteMeasure::from_locations(state.customers().iter().map(|c| c.initial_lead), 1e-3).unwrap();
    let exact = FiniteMeasure::analytic(1.0, |a| (-a).exp());
    assert!(kolmogorov_distance(&leads, &exact) < 0.05);
}

#[test]
fn bypass_flag_controls_frontier_on_idle_arrivals() {
    let mut cfg = RunConfig::uniform(3.0, 1.0, 31, 0).unwrap();
    let mut src = ScriptedSource::new(vec![0.5], vec![2.0], vec![0.1]);
    let on = run(SimState::empty(0.0), &mut src, &cfg).unwrap();
    assert!((on.frontier_at(1.0) - 1.5).abs() < 1e-12);
    cfg.frontier_on_bypass = false;
    let mut src = ScriptedSource::new(vec![0.5], vec![2.0], vec![0.1]);
    let off = run(SimState::empty(0.0), &mut src, &cfg).unwrap();
    assert!((off.frontier_at(1.0) + 1.0).abs() < 1e-12);
}
