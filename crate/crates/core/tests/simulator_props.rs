use std::collections::{BTreeMap, BTreeSet};

use datagather::planner::{plan_candidate, PlanCandidate, PlanConfig, Uplink};
use datagather::segmentation::segment;
use datagather::simulator::{comm_link, run_mission, spawn_goal_batch, EventKind, Fault, MissionMetrics, MissionTrace, SimOptions};
use datagather::{Method, OccupancyGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn parse(text: &str) -> OccupancyGrid {
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with(';') && !l.is_empty()).collect();
    let w = rows[0].len();
    let mut obs = Vec::new();
    let mut oc = 0;
    for (y, row) in rows.iter().enumerate() {
        for (x, ch) in row.chars().enumerate() {
            obs.push(ch == '#');
            if ch == 'O' {
                oc = y * w + x;
            }
        }
    }
    OccupancyGrid::new(w, rows.len(), obs, oc).unwrap()
}

fn rooms() -> OccupancyGrid {
    parse(include_str!("../../../maps/rooms.txt"))
}

fn small_config() -> PlanConfig {
    PlanConfig { n_agents: 8, n_goals: 40, t_mission: 300.0, ..PlanConfig::default() }
}

fn paired_plan(g: &OccupancyGrid, cfg: &PlanConfig) -> PlanCandidate {
    let c = plan_candidate(g, cfg, Method::Pap, 2).unwrap();
    assert!(!c.collectors.is_empty(), "the test plan needs a collector");
    c
}

fn recorded() -> SimOptions {
    SimOptions { record_steps: true, ..SimOptions::default() }
}

/// Checks every per-step and per-event property of one recorded run.
fn check_run(g: &OccupancyGrid, cfg: &PlanConfig, plan: &PlanCandidate, m: &MissionMetrics, trace: &MissionTrace) {
    let n_w = plan.n_workers();
    let oc = g.center(g.oc());

    // conservation, positions, motion
    let mut last: Vec<_> = vec![oc; n_w + plan.collectors.len()];
    for s in &trace.steps {
        assert_eq!(s.requested, s.delivered + s.in_flight + s.pending, "step {}", s.step);
        for (a, p) in s.positions.iter().enumerate() {
            let cell = g.cell_at(*p).expect("inside the map");
            assert!(g.is_free(cell), "agent {a} in an obstacle at step {}", s.step);
            let speed = if a < n_w { cfg.worker_speed } else { cfg.collector_speed };
            let moved = p.dist(last[a]);
            assert!(moved <= speed * 0.1 + 1e-9, "agent {a} jumped {moved} at step {}", s.step);
            last[a] = *p;
        }
    }

    // event order, gathering before delivery, transmission validity
    let mut gathered = BTreeSet::new();
    let mut delivered = BTreeSet::new();
    let mut prev = 0.0;
    for e in &trace.events {
        assert!(e.t >= prev, "trace goes back in time at {} {:?} after {prev}", e.t, e);
        prev = e.t;
        match &e.kind {
            EventKind::Gather { goal } => assert!(gathered.insert(*goal)),
            EventKind::Transfer { goal, to, steps } => {
                assert!(gathered.contains(goal));
                let w = e.agent.unwrap();
                for &(a, b) in steps {
                    for k in a..=b {
                        let s = &trace.steps[k as usize];
                        assert_eq!(s.transmitting[w], Some(*to));
                        let there = match to {
                            Uplink::Oc => oc,
                            Uplink::Collector(c) => s.positions[n_w + c],
                        };
                        assert!(comm_link(g, s.positions[w], there, cfg.d_com), "goal {goal} sent without a link at step {k}");
                    }
                }
                let ticks: u64 = steps.iter().map(|&(a, b)| b - a + 1).sum();
                assert!(ticks >= (cfg.transmit_time / 0.1).round() as u64);
            }
            EventKind::Delivery { goals } => {
                for g in goals {
                    assert!(gathered.contains(g), "goal {g} delivered before gathering");
                    assert!(delivered.insert(*g));
                }
            }
            _ => {}
        }
    }

    // metrics agree with the trace
    assert_eq!(m.delivered, delivered.len());
    assert_eq!(m.refresh_samples.len(), m.delivered);
    let mean = if m.delivered == 0 { 0.0 } else { m.refresh_samples.iter().sum::<f64>() / m.delivered as f64 };
    assert!((m.mean_refresh - mean).abs() < 1e-9);
    assert_eq!(m.goals_expired, m.requested - m.delivered);
    assert!(m.refresh_samples.iter().all(|&r| r > 0.0));
}

#[test]
fn seeded_missions_keep_every_property() {
    let g = rooms();
    let cfg = small_config();
    let plan = paired_plan(&g, &cfg);
    for seed in 0..3 {
        let (m, trace) = run_mission(&g, &plan, &cfg, seed, &recorded()).unwrap();
        check_run(&g, &cfg, &plan, &m, &trace);
        assert!(m.delivered > 0);
        assert_eq!(m.late_arrivals, 0, "seed {seed}");
        assert_eq!(m.fallbacks, 0, "seed {seed}");
        assert!(m.behaviors.iter().sum::<usize>() > 0);
    }
}

#[test]
fn same_seed_same_trace() {
    let g = rooms();
    let cfg = small_config();
    let plan = paired_plan(&g, &cfg);
    let a = run_mission(&g, &plan, &cfg, 9, &recorded()).unwrap();
    let b = run_mission(&g, &plan, &cfg, 9, &recorded()).unwrap();
    assert_eq!(a, b);
    let c = run_mission(&g, &plan, &cfg, 10, &recorded()).unwrap();
    assert_ne!(a.1.events, c.1.events);
}

#[test]
fn zero_length_mission_delivers_nothing() {
    let g = rooms();
    let cfg = PlanConfig { t_mission: 0.0, ..small_config() };
    let plan = paired_plan(&g, &cfg);
    let (m, trace) = run_mission(&g, &plan, &cfg, 0, &SimOptions::default()).unwrap();
    assert_eq!(m.delivered, 0);
    assert_eq!(m.mean_refresh, 0.0);
    assert!(trace.events.iter().all(|e| matches!(e.kind, EventKind::Spawn { .. })));
}

#[test]
fn corridor_delivery_matches_closed_form() {
    // 1x10 corridor, OC at the left end, one goal in flight
    let g = OccupancyGrid::open(10, 1, 0).unwrap();
    let cfg = PlanConfig { n_agents: 2, n_goals: 1, d_com: 1.0, t_mission: 60.0, ..PlanConfig::default() };
    let plan = plan_candidate(&g, &cfg, Method::Bap, 0).unwrap();
    for seed in 0..6 {
        let (m, trace) = run_mission(&g, &plan, &cfg, seed, &SimOptions::default()).unwrap();
        let (cell, seg) = trace
            .events
            .iter()
            .find_map(|e| match e.kind {
                EventKind::Spawn { cell, segment, .. } => Some((cell, segment)),
                _ => None,
            })
            .unwrap();
        let x = |c: usize| c as f64;
        let centroid = plan.partition.centroids()[seg];
        let v = cfg.worker_speed;
        // walk out to the centroid, to the goal, gather, back until in range, send
        let expected = x(centroid) / v
            + (x(cell) - x(centroid)).abs() / v
            + cfg.gather_time
            + (x(cell) - cfg.d_com).max(0.0) / v
            + cfg.transmit_time;
        let first = m.refresh_samples[0];
        assert!((first - expected).abs() <= 0.2 + 1e-9, "seed {seed}: goal {cell}, refresh {first}, expected {expected}");
    }
}

#[test]
fn removed_collector_still_completes_deliveries() {
    let g = rooms();
    let cfg = small_config();
    let plan = paired_plan(&g, &cfg);
    let faults = (0..plan.collectors.len()).map(|k| Fault::Remove { collector: k, at: 0.0 }).collect();
    let options = SimOptions { faults, drain: true, ..recorded() };
    let (m, trace) = run_mission(&g, &plan, &cfg, 4, &options).unwrap();
    check_run(&g, &cfg, &plan, &m, &trace);
    assert!(m.fallbacks > 0);
    let last = trace.steps.last().unwrap();
    assert_eq!(last.in_flight, 0, "packages stranded after the drain");
    let gathered = trace.events.iter().filter(|e| matches!(e.kind, EventKind::Gather { .. })).count();
    assert_eq!(gathered, m.delivered);
    // nothing reached a removed collector
    assert!(trace.events.iter().all(|e| !matches!(e.kind, EventKind::Transfer { to: Uplink::Collector(_), .. })));
}

#[test]
fn delayed_collector_is_met_later() {
    let g = rooms();
    let cfg = small_config();
    let plan = paired_plan(&g, &cfg);
    let options = SimOptions { faults: vec![Fault::Delay { collector: 0, at: 60.0, secs: 10.0 }], ..recorded() };
    let (m, trace) = run_mission(&g, &plan, &cfg, 2, &options).unwrap();
    check_run(&g, &cfg, &plan, &m, &trace);
    let n_w = plan.n_workers();
    let via_collector = trace
        .events
        .iter()
        .filter(|e| e.t > 70.0 && e.agent == Some(n_w) && matches!(e.kind, EventKind::Delivery { .. }))
        .count();
    assert!(via_collector > 0, "the delayed collector never delivered again");
}

#[test]
fn spawns_follow_segment_areas() {
    let g = OccupancyGrid::open(30, 30, 0).unwrap();
    let p = segment(&g, Method::Pap, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 10_000;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for b in 0..draws {
        let goal = &spawn_goal_batch(&mut rng, &g, &p, 1, 0.0, b, b).unwrap()[0];
        *counts.entry(goal.segment).or_default() += 1;
    }
    let free = (g.free_count() - 1) as f64;
    let oc_seg = p.label(g.oc()).unwrap();
    for (s, &area) in p.areas().iter().enumerate() {
        let cells = if s == oc_seg { area - 1 } else { area };
        let q = cells as f64 / free;
        let mean = draws as f64 * q;
        let sigma = (draws as f64 * q * (1.0 - q)).sqrt();
        let got = *counts.get(&s).unwrap_or(&0) as f64;
        assert!((got - mean).abs() <= 3.0 * sigma, "segment {s}: {got} draws, expected {mean:.0} ± {:.0}", 3.0 * sigma);
    }
}
