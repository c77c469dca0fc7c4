use std::collections::{BTreeSet, VecDeque};

use datagather::planner::{associate_collectors, build_segment_graph, plan_mission, utility, PlanConfig, Uplink};
use datagather::segmentation::segment_pap;
use datagather::OccupancyGrid;

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
    PlanConfig { n_agents: 8, n_goals: 40, ..PlanConfig::default() }
}

#[test]
fn plan_invariants_hold() {
    let g = rooms();
    let cfg = small_config();
    let plan = plan_mission(&g, &cfg).unwrap();
    assert_eq!(plan.candidates.len(), 3 * (cfg.n_agents / 2 + 1));

    for c in &plan.candidates {
        assert_eq!(c.n_collectors + c.n_workers(), cfg.n_agents);
        assert_eq!(c.pairing.len(), c.n_workers());
        assert!((0.0..=1.0 + 1e-12).contains(&c.utility));
        let graph = build_segment_graph(&g, &c.partition).unwrap();
        for (s, &up) in c.pairing.iter().enumerate() {
            if graph.direct[s] {
                assert_eq!(up, Uplink::Oc);
            }
        }
        for (k, route) in c.collectors.iter().enumerate() {
            assert!(!route.assigned_workers.is_empty());
            let path = route.path();
            assert_eq!(path.start(), g.oc());
            assert_eq!(path.end(), g.oc());
            for &s in &route.assigned_workers {
                assert_eq!(c.pairing[s], Uplink::Collector(k));
                // the worker's accepted tour fits in one collector loop
                assert!(c.worker_cycles[s] <= route.cycle_time + 1e-9);
            }
        }
        let t = c.telemetry;
        assert!(t.total_fmm <= (t.b_w + t.b_c) as u64 + 5 + t.estimation_fmm, "{t:?}");
    }
    let winner = plan.winner();
    assert!(plan.candidates.iter().all(|c| c.utility <= winner.utility));
    assert!(plan.candidates.iter().any(|c| c.utility >= cfg.beta - 1e-12 || c.utility >= cfg.alpha - 1e-12));
}

#[test]
fn planning_is_deterministic() {
    let g = rooms();
    let cfg = PlanConfig { n_agents: 6, n_goals: 30, ..PlanConfig::default() };
    let a = plan_mission(&g, &cfg).unwrap();
    let b = plan_mission(&g, &cfg).unwrap();
    assert_eq!(a.best, b.best);
    for (x, y) in a.candidates.iter().zip(&b.candidates) {
        assert_eq!(x.summary(), y.summary());
        assert_eq!(x.pairing, y.pairing);
        assert_eq!(x.collectors, y.collectors);
        assert_eq!(x.partition, y.partition);
    }
}

#[test]
fn scaling_refresh_keeps_the_winner() {
    let g = rooms();
    let plan = plan_mission(&g, &small_config()).unwrap();
    let tc: Vec<f64> = plan.candidates.iter().map(|c| c.est_tc).collect();
    let md: Vec<f64> = plan.candidates.iter().map(|c| c.est_md).collect();
    let argmax = |u: &[f64]| (0..u.len()).max_by(|&a, &b| u[a].total_cmp(&u[b]).then(b.cmp(&a))).unwrap();
    let base = argmax(&utility(&tc, &md, 0.5, 0.5));
    for k in [0.1, 3.0, 17.0] {
        let scaled: Vec<f64> = tc.iter().map(|t| t * k).collect();
        assert_eq!(argmax(&utility(&scaled, &md, 0.5, 0.5)), base);
    }
}

#[test]
fn sixteen_segments_four_collectors() {
    let g = rooms();
    let p = segment_pap(&g, 16).unwrap();
    let graph = build_segment_graph(&g, &p).unwrap();
    let assoc = associate_collectors(&g, &p, &graph, 4).unwrap().expect("far segments exist");
    assert!(assoc.groups.len() <= 4);
    let mut seen = BTreeSet::new();
    for group in &assoc.groups {
        for &s in group {
            assert!(!graph.direct[s]);
            assert!(seen.insert(s), "segment {s} in two groups");
        }
        // connected within the pruned segment graph
        let members: BTreeSet<usize> = group.iter().copied().collect();
        let mut reached = BTreeSet::from([group[0]]);
        let mut queue = VecDeque::from([group[0]]);
        while let Some(s) = queue.pop_front() {
            for &t in &graph.edges[s] {
                if members.contains(&t) && reached.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        assert_eq!(reached, members, "group {group:?} is not connected");
    }
    let far = (0..p.len()).filter(|&s| !graph.direct[s]).count();
    assert_eq!(seen.len(), far, "every far segment joins a collector");
}
