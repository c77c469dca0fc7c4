//! The `plan`, `simulate` and `sweep` subcommands as library calls, with
//! their comma-separated reports.
//!
//! Numbers are written with Rust's shortest round-trip formatting, which
//! never uses exponents and parses back to the same `f64`.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use datagather::planner::{plan_mission, utility, MissionPlan, PlanCandidate, PlanConfig};
use datagather::simulator::{run_mission, MissionMetrics, MissionTrace, SimOptions};
use datagather::{OccupancyGrid, Partition};

use crate::error::CliError;

pub fn cmd_plan(grid: &OccupancyGrid, config: &PlanConfig) -> Result<MissionPlan, CliError> {
    Ok(plan_mission(grid, config)?)
}

/// Candidate table with the utility weights echoed in a `#` header line.
pub fn plan_table(plan: &MissionPlan) -> String {
    let c = &plan.config;
    let mut out = String::new();
    writeln!(out, "# alpha={} beta={} n_agents={} n_goals={}", c.alpha, c.beta, c.n_agents, c.n_goals).unwrap();
    out.push_str("method,n_collectors,active_collectors,n_workers,est_tc,est_md,utility,winner\n");
    for (i, cand) in plan.candidates.iter().enumerate() {
        let s = cand.summary();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.method,
            s.n_collectors,
            s.active_collectors,
            s.n_workers,
            s.est_tc,
            s.est_md,
            s.utility,
            u8::from(i == plan.best)
        )
        .unwrap();
    }
    out
}

/// Mean, minimum and maximum of one metric over trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Band {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Band {
        let (mut n, mut sum, mut min, mut max) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            n += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        if n == 0 {
            return Band { mean: 0.0, min: 0.0, max: 0.0 };
        }
        Band { mean: sum / n as f64, min, max }
    }
}

/// Seeded runs of one candidate.
#[derive(Debug, Clone)]
pub struct SimReport {
    pub seeds: Vec<u64>,
    pub metrics: Vec<MissionMetrics>,
    /// Filled when traces were requested.
    pub traces: Vec<MissionTrace>,
}

impl SimReport {
    pub fn refresh(&self) -> Band {
        Band::of(self.metrics.iter().map(|m| m.mean_refresh))
    }

    pub fn delivered(&self) -> Band {
        Band::of(self.metrics.iter().map(|m| m.delivered as f64))
    }

    pub fn table(&self) -> String {
        let mut out = String::from(
            "row,seed,t_refresh,m_d,t_refresh_min,t_refresh_max,m_d_min,m_d_max,requested,expired,fallbacks,late_arrivals,mean_cycle\n",
        );
        for (i, (seed, m)) in self.seeds.iter().zip(&self.metrics).enumerate() {
            writeln!(
                out,
                "{i},{seed},{},{},,,,,{},{},{},{},{}",
                m.mean_refresh, m.delivered, m.requested, m.goals_expired, m.fallbacks, m.late_arrivals, m.mean_cycle
            )
            .unwrap();
        }
        let (t, d) = (self.refresh(), self.delivered());
        let b = |f: fn(&MissionMetrics) -> f64| Band::of(self.metrics.iter().map(f)).mean;
        writeln!(
            out,
            "aggregate,,{},{},{},{},{},{},{},{},{},{},{}",
            t.mean,
            d.mean,
            t.min,
            t.max,
            d.min,
            d.max,
            b(|m| m.requested as f64),
            b(|m| m.goals_expired as f64),
            b(|m| m.fallbacks as f64),
            b(|m| m.late_arrivals as f64),
            b(|m| m.mean_cycle)
        )
        .unwrap();
        out
    }
}

/// Runs `trials` missions with seeds `seed, seed + 1, ...`, spread over
/// the available cores. Results come back in seed order.
pub fn cmd_simulate(
    grid: &OccupancyGrid,
    config: &PlanConfig,
    candidate: &PlanCandidate,
    seed: u64,
    trials: usize,
    options: &SimOptions,
    keep_traces: bool,
) -> Result<SimReport, CliError> {
    let seeds: Vec<u64> = (0..trials as u64).map(|k| seed + k).collect();
    let results: Mutex<Vec<Option<datagather::Result<(MissionMetrics, MissionTrace)>>>> =
        Mutex::new((0..trials).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(trials.max(1));
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= trials {
                    break;
                }
                let run = run_mission(grid, candidate, config, seeds[i], options);
                results.lock().expect("no panics while holding the lock")[i] = Some(run);
            });
        }
    });
    let mut metrics = Vec::with_capacity(trials);
    let mut traces = Vec::new();
    for r in results.into_inner().expect("workers finished") {
        let (m, t) = r.expect("every trial ran")?;
        metrics.push(m);
        if keep_traces {
            traces.push(t);
        }
    }
    Ok(SimReport { seeds, metrics, traces })
}

/// One candidate's estimate next to its executed band.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub candidate: datagather::planner::CandidateSummary,
    pub refresh: Band,
    pub delivered: Band,
    pub fallbacks: f64,
    pub late_arrivals: f64,
    pub mean_cycle: f64,
    /// Utility recomputed from the executed means over the whole table.
    pub exec_utility: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub plan: MissionPlan,
    pub rows: Vec<SweepRow>,
}

pub fn cmd_sweep(grid: &OccupancyGrid, config: &PlanConfig, seed: u64, trials: usize) -> Result<SweepReport, CliError> {
    let plan = cmd_plan(grid, config)?;
    let mut rows = Vec::with_capacity(plan.candidates.len());
    for cand in &plan.candidates {
        let sim = cmd_simulate(grid, config, cand, seed, trials, &SimOptions::default(), false)?;
        let mean = |f: fn(&MissionMetrics) -> f64| Band::of(sim.metrics.iter().map(f)).mean;
        rows.push(SweepRow {
            candidate: cand.summary(),
            refresh: sim.refresh(),
            delivered: sim.delivered(),
            fallbacks: mean(|m| m.fallbacks as f64),
            late_arrivals: mean(|m| m.late_arrivals as f64),
            mean_cycle: mean(|m| m.mean_cycle),
            exec_utility: 0.0,
        });
    }
    let tc: Vec<f64> = rows.iter().map(|r| r.refresh.mean).collect();
    let md: Vec<f64> = rows.iter().map(|r| r.delivered.mean).collect();
    for (row, u) in rows.iter_mut().zip(utility(&tc, &md, config.alpha, config.beta)) {
        row.exec_utility = u;
    }
    Ok(SweepReport { plan, rows })
}

impl SweepReport {
    pub fn table(&self) -> String {
        let c = &self.plan.config;
        let mut out = String::new();
        writeln!(out, "# alpha={} beta={} n_agents={} n_goals={}", c.alpha, c.beta, c.n_agents, c.n_goals).unwrap();
        out.push_str(
            "method,n_collectors,active_collectors,est_tc,exec_tc,exec_tc_min,exec_tc_max,est_md,exec_md,exec_md_min,exec_md_max,est_utility,exec_utility,fallbacks,late_arrivals,mean_cycle\n",
        );
        for r in &self.rows {
            let s = &r.candidate;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.method,
                s.n_collectors,
                s.active_collectors,
                s.est_tc,
                r.refresh.mean,
                r.refresh.min,
                r.refresh.max,
                s.est_md,
                r.delivered.mean,
                r.delivered.min,
                r.delivered.max,
                s.utility,
                r.exec_utility,
                r.fallbacks,
                r.late_arrivals,
                r.mean_cycle
            )
            .unwrap();
        }
        out
    }
}

/// Segment label per cell, comma-separated rows, `-1` on obstacles.
pub fn segment_raster(grid: &OccupancyGrid, partition: &Partition) -> String {
    let mut out = String::new();
    for y in 0..grid.height() {
        let row: Vec<String> = (0..grid.width())
            .map(|x| partition.label(y * grid.width() + x).map_or_else(|| "-1".to_string(), |l| l.to_string()))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Trace events as JSON lines.
pub fn trace_lines(trace: &MissionTrace) -> String {
    let mut out = String::new();
    for e in &trace.events {
        out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
        out.push('\n');
    }
    out
}
