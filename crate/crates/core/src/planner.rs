//! Mission planning: how many collectors, which partition, who talks to whom.
//!
//! For each partition method and collector count the planner segments the
//! map for the workers, estimates each segment's workload from pseudo-goals,
//! groups the far segments around collectors, builds and contracts the
//! collectors' out-and-back paths, and scores the candidate by the utility
//!
//! ```text
//! U = α (1 − T_c / max T_c) + β (M_d / max M_d)
//! ```
//!
//! over the whole candidate table.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fmm::{distance_to_set, extract_path, march_count, DistanceField, Eikonal, GridPath, Speed, SpeedField};
use crate::grid::{Cell, OccupancyGrid};
use crate::routing::{nn_tour, route_with_window, select_router, two_opt, Tour, TravelOracle, Window};
use crate::segmentation::{iterate_centroids, segment, spread_points, Method, Partition, MAX_ITERS};

/// Mission and team parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Team size `N`.
    pub n_agents: usize,
    /// Goals in flight `M`.
    pub n_goals: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Cells per second.
    pub worker_speed: f64,
    /// Cells per second.
    pub collector_speed: f64,
    /// Seconds spent at each goal.
    pub gather_time: f64,
    /// Seconds to transmit one package.
    pub transmit_time: f64,
    /// Communication range in cells.
    pub d_com: f64,
    pub t_mission: f64,
    /// Largest collector count evaluated; `None` means `⌊N/2⌋`.
    pub max_collectors: Option<usize>,
    /// Evaluate only this collector count, if set.
    pub fixed_collectors: Option<usize>,
    /// Partition methods evaluated.
    pub methods: Vec<Method>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            n_agents: 20,
            n_goals: 100,
            alpha: 0.5,
            beta: 0.5,
            worker_speed: 2.0,
            collector_speed: 2.0,
            gather_time: 5.0,
            transmit_time: 1.0,
            d_com: 10.0,
            t_mission: 1000.0,
            max_collectors: None,
            fixed_collectors: None,
            methods: Method::ALL.to_vec(),
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(invalid("the team needs at least 2 agents"));
        }
        if self.n_goals < 1 {
            return Err(invalid("at least one goal is required"));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && (self.alpha + self.beta - 1.0).abs() <= 1e-9) {
            return Err(invalid("utility weights must be non-negative and sum to 1"));
        }
        for (name, v) in [("worker speed", self.worker_speed), ("collector speed", self.collector_speed)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("gather time", self.gather_time), ("transmit time", self.transmit_time), ("mission time", self.t_mission)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be non-negative")));
            }
        }
        if !(self.d_com >= 1.0 && self.d_com.is_finite()) {
            return Err(invalid("communication range must be at least one cell"));
        }
        if self.methods.is_empty() {
            return Err(invalid("at least one partition method is required"));
        }
        if self.max_collectors() >= self.n_agents {
            return Err(invalid("at least one agent must remain a worker"));
        }
        if let Some(n) = self.fixed_collectors {
            if n >= self.n_agents {
                return Err(invalid("at least one agent must remain a worker"));
            }
        }
        Ok(())
    }

    pub fn max_collectors(&self) -> usize {
        self.max_collectors.unwrap_or(self.n_agents / 2)
    }

    /// Collector counts evaluated, in order.
    pub fn collector_counts(&self) -> Vec<usize> {
        match self.fixed_collectors {
            Some(n) => vec![n],
            None => (0..=self.max_collectors()).collect(),
        }
    }

    /// Seconds to walk `meters` at worker speed.
    fn worker_secs(&self, meters: f64, cell_size: f64) -> f64 {
        meters / (self.worker_speed * cell_size)
    }
}

/// Where a worker delivers its packages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Uplink {
    Oc,
    Collector(usize),
}

/// A collector's shuttle between the OC and its far point `x_col`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectorRoute {
    /// OC → `x_col`.
    pub outbound: GridPath,
    /// Seconds for one full loop OC → `x_col` → OC.
    pub cycle_time: f64,
    /// Worker (segment) ids delivering to this collector.
    pub assigned_workers: Vec<usize>,
}

impl CollectorRoute {
    fn new(outbound: GridPath, assigned_workers: Vec<usize>, speed: f64) -> Self {
        let cycle_time = 2.0 * outbound.length / (speed * outbound.cell_size);
        CollectorRoute { outbound, cycle_time, assigned_workers }
    }

    pub fn x_col(&self) -> Cell {
        self.outbound.end()
    }

    /// The whole loop as a cell sequence, starting and ending at the OC.
    pub fn path(&self) -> GridPath {
        let mut cells = self.outbound.cells.clone();
        cells.extend(self.outbound.cells.iter().rev().skip(1));
        GridPath { cells, length: 2.0 * self.outbound.length, cell_size: self.outbound.cell_size }
    }
}

/// Per-segment plan-time estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    /// Goals expected in the segment per batch.
    pub goals: usize,
    /// Representative goal positions.
    pub pseudo_goals: Vec<Cell>,
    /// Tour time from the centroid through the pseudo-goals, gathering included.
    pub time: f64,
}

/// Iteration and solver counts for one candidate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Telemetry {
    /// Centroid iterations of the worker partition.
    pub b_w: usize,
    /// Centroid iterations of the collector association.
    pub b_c: usize,
    /// Wavefronts spent on workload and goal-acceptance estimates.
    pub estimation_fmm: u64,
    /// All wavefronts run for the candidate.
    pub total_fmm: u64,
}

/// One evaluated (method, collector count) configuration.
#[derive(Debug, Clone)]
pub struct PlanCandidate {
    pub method: Method,
    /// Collectors requested; routes may be fewer if some end up unused.
    pub n_collectors: usize,
    pub partition: Partition,
    pub workloads: Vec<Workload>,
    pub collectors: Vec<CollectorRoute>,
    /// Uplink of each worker, indexed by segment id.
    pub pairing: Vec<Uplink>,
    /// Goals each collector-paired worker fits in one collector cycle.
    pub accepted: Vec<usize>,
    /// Per-cycle time of each worker: the full round trip to the OC for
    /// direct workers, the accepted window tour plus uploads for paired ones.
    pub worker_cycles: Vec<f64>,
    pub est_tc: f64,
    pub est_md: f64,
    pub utility: f64,
    pub telemetry: Telemetry,
}

impl PlanCandidate {
    pub fn n_workers(&self) -> usize {
        self.partition.len()
    }

    pub fn summary(&self) -> CandidateSummary {
        CandidateSummary {
            method: self.method,
            n_collectors: self.n_collectors,
            active_collectors: self.collectors.len(),
            n_workers: self.n_workers(),
            est_tc: self.est_tc,
            est_md: self.est_md,
            utility: self.utility,
            b_w: self.telemetry.b_w,
            b_c: self.telemetry.b_c,
        }
    }
}

/// Flat record of a candidate for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub method: Method,
    pub n_collectors: usize,
    pub active_collectors: usize,
    pub n_workers: usize,
    pub est_tc: f64,
    pub est_md: f64,
    pub utility: f64,
    pub b_w: usize,
    pub b_c: usize,
}

/// The selected candidate and the table it was chosen from.
#[derive(Debug, Clone)]
pub struct MissionPlan {
    pub config: PlanConfig,
    pub candidates: Vec<PlanCandidate>,
    pub best: usize,
}

impl MissionPlan {
    pub fn winner(&self) -> &PlanCandidate {
        &self.candidates[self.best]
    }
}

/// Goals per segment proportional to area, rounded half up, then nudged by
/// one on the largest segments until the total is `m`.
pub fn allocate_goals(partition: &Partition, m: usize) -> Vec<usize> {
    let areas = partition.areas();
    let total: usize = areas.iter().sum();
    let mut goals: Vec<usize> = areas
        .iter()
        .map(|&a| ((m * a) as f64 / total as f64 + 0.5).floor() as usize)
        .collect();
    let mut by_area: Vec<usize> = (0..areas.len()).collect();
    by_area.sort_by_key(|&s| (std::cmp::Reverse(areas[s]), s));
    let mut sum: usize = goals.iter().sum();
    let mut k = 0;
    while sum < m {
        goals[by_area[k % by_area.len()]] += 1;
        sum += 1;
        k += 1;
    }
    k = 0;
    while sum > m {
        let s = by_area[k % by_area.len()];
        if goals[s] > 0 {
            goals[s] -= 1;
            sum -= 1;
        }
        k += 1;
    }
    goals
}

/// Tour time of a worker through `goals` pseudo-goals spread evenly over
/// the segment, starting from the segment centroid, gathering included and
/// without a final delivery leg.
pub fn estimate_workload(
    grid: &OccupancyGrid,
    partition: &Partition,
    segment_id: usize,
    goals: usize,
    config: &PlanConfig,
) -> Result<Workload> {
    if goals == 0 {
        return Ok(Workload { goals, pseudo_goals: Vec::new(), time: 0.0 });
    }
    let mask = partition.mask_of(segment_id);
    let pseudo_goals = spread_points(grid, &mask, goals)?;
    let oracle = TravelOracle::build(
        grid,
        partition.centroids()[segment_id],
        &pseudo_goals,
        None,
        config.worker_speed,
        config.gather_time,
    )?;
    let tour = two_opt(&nn_tour(&oracle), &oracle);
    Ok(Workload { goals, pseudo_goals, time: tour.total_time })
}

/// Segment adjacency with the OC's neighborhood split off.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGraph {
    /// Vertex positions (segment centroids).
    pub centroids: Vec<Cell>,
    /// Edges among segments that are not direct uploaders.
    pub edges: Vec<Vec<usize>>,
    /// Segments that upload straight to the OC.
    pub direct: Vec<bool>,
    pub oc_segment: usize,
}

impl SegmentGraph {
    pub fn degree(&self, s: usize) -> usize {
        self.edges[s].len()
    }
}

/// Graph over segment centroids; the OC's segment and its neighbors upload
/// directly and lose their edges.
pub fn build_segment_graph(grid: &OccupancyGrid, partition: &Partition) -> Result<SegmentGraph> {
    let oc_segment = partition
        .label(grid.oc())
        .ok_or_else(|| invalid("the OC lies outside every segment"))?;
    let adjacency = partition.adjacency(grid);
    let mut direct = vec![false; partition.len()];
    direct[oc_segment] = true;
    for &s in &adjacency[oc_segment] {
        direct[s] = true;
    }
    let edges = adjacency
        .iter()
        .enumerate()
        .map(|(s, list)| {
            if direct[s] {
                Vec::new()
            } else {
                list.iter().copied().filter(|&t| !direct[t]).collect()
            }
        })
        .collect();
    Ok(SegmentGraph { centroids: partition.centroids().to_vec(), edges, direct, oc_segment })
}

/// Collector far points and the worker segments grouped around each.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub x_col: Vec<Cell>,
    /// Segment ids per collector; never empty.
    pub groups: Vec<Vec<usize>>,
    pub iterations: usize,
}

/// Seeds collectors at the best-connected far segments and lets them settle
/// with a wavefront that slows down at segment borders; each far segment
/// joins the collector that claims its centroid.
///
/// Returns `None` when every segment uploads directly.
pub fn associate_collectors(
    grid: &OccupancyGrid,
    partition: &Partition,
    graph: &SegmentGraph,
    n_collectors: usize,
) -> Result<Option<Association>> {
    if n_collectors == 0 {
        return Err(invalid("at least one collector is required"));
    }
    let mut far: Vec<usize> = (0..partition.len()).filter(|&s| !graph.direct[s]).collect();
    if far.is_empty() {
        return Ok(None);
    }
    far.sort_by_key(|&s| (std::cmp::Reverse(graph.degree(s)), std::cmp::Reverse(partition.areas()[s]), s));
    // best vertex of each connected piece of the far graph first, so that no
    // piece is left without a collector when there are enough of them
    let component = components(graph);
    let mut chosen: Vec<usize> = Vec::new();
    let mut covered = BTreeSet::new();
    for &s in &far {
        if chosen.len() < n_collectors && covered.insert(component[s]) {
            chosen.push(s);
        }
    }
    for &s in &far {
        if chosen.len() < n_collectors && !chosen.contains(&s) {
            chosen.push(s);
        }
    }
    chosen.sort_by_key(|&s| far.iter().position(|&t| t == s));
    let seeds: Vec<Cell> = chosen.iter().map(|&s| graph.centroids[s]).collect();

    let region: Vec<bool> = (0..grid.len())
        .map(|c| partition.label(c).is_some_and(|s| !graph.direct[s]))
        .collect();
    let frontier: Vec<Cell> = (0..grid.len())
        .filter(|&c| region[c] && grid.neighbors4(c).any(|n| partition.label(n) != partition.label(c)))
        .collect();
    let front = distance_to_set(grid, &frontier, Some(&region), false)?;
    let h = grid.cell_size();
    let max = (0..grid.len()).filter(|&c| region[c]).map(|c| front.value(c)).fold(0.0, f64::max);
    // offset by one cell so the border cells themselves stay crossable
    let speed: Vec<f64> = (0..grid.len())
        .map(|c| {
            if !grid.is_free(c) {
                0.0
            } else if region[c] {
                (front.value(c) + h) / (max + h)
            } else {
                1.0
            }
        })
        .collect();
    let speed = SpeedField::new(grid, speed)?;
    let run = iterate_centroids(grid, Some(&region), Speed::Field(&speed), seeds, MAX_ITERS)?;

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); run.centroids.len()];
    let mut nearest: Option<DistanceField> = None;
    for &s in far.iter() {
        let centroid = partition.centroids()[s];
        let k = match run.labels[centroid] {
            Some(k) => k,
            // unseeded piece: the collector closest through free space
            None => {
                if nearest.is_none() {
                    nearest = Some(Eikonal::new(grid).sources(&run.centroids).solve()?);
                }
                nearest.as_ref().and_then(|f| f.label(centroid)).expect("free space is connected")
            }
        };
        groups[k].push(s);
    }
    let mut x_col = Vec::new();
    let mut kept = Vec::new();
    for (k, mut g) in groups.into_iter().enumerate() {
        if !g.is_empty() {
            g.sort_unstable();
            x_col.push(run.centroids[k]);
            kept.push(g);
        }
    }
    Ok(Some(Association { x_col, groups: kept, iterations: run.iterations }))
}

/// Connected-component id of every vertex of the pruned segment graph.
fn components(graph: &SegmentGraph) -> Vec<usize> {
    let n = graph.edges.len();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        let mut stack = vec![start];
        while let Some(s) = stack.pop() {
            for &t in &graph.edges[s] {
                if comp[t] == usize::MAX {
                    comp[t] = next;
                    stack.push(t);
                }
            }
        }
        next += 1;
    }
    comp
}

/// A worker served by a collector, as seen by the contraction.
#[derive(Debug, Clone, Copy)]
pub struct AssignedWorker<'a> {
    pub workload: f64,
    pub goals: usize,
    /// Wavefront from the worker's segment centroid.
    pub field: &'a DistanceField,
}

impl AssignedWorker<'_> {
    /// Workload, the round trip between the segment and `meet`, and the
    /// upload of every package.
    pub fn cycle_time(&self, meet: Cell, config: &PlanConfig) -> f64 {
        let d = self.field.value(meet);
        self.workload + 2.0 * config.worker_secs(d, self.field.cell_size()) + config.transmit_time * self.goals as f64
    }
}

/// Outcome of a contraction.
#[derive(Debug, Clone, PartialEq)]
pub enum Contracted {
    Route(CollectorRoute),
    /// `x_col` reached a direct-upload segment; the workers go to the OC.
    Removed,
}

/// Pulls `x_col` toward the OC one cell at a time while every assigned
/// worker still fits in the shorter cycle and the refresh estimate keeps
/// dropping.
///
/// `others` holds the refresh samples that do not depend on this collector
/// (other collectors' cycles and direct workers' cycles). `direct_zone`
/// marks cells of direct-upload segments.
pub fn contract_collector_path(
    grid: &OccupancyGrid,
    route: &CollectorRoute,
    workers: &[AssignedWorker<'_>],
    others: &[f64],
    direct_zone: &[bool],
    config: &PlanConfig,
) -> Contracted {
    let cum = route.outbound.cumulative(grid.width());
    let cells = &route.outbound.cells;
    let loop_time = |i: usize| 2.0 * cum[i] / (config.collector_speed * route.outbound.cell_size);
    let refresh = |tc: f64| (others.iter().sum::<f64>() + tc) / (others.len() + 1) as f64;
    let fits = |i: usize| workers.iter().all(|w| loop_time(i) >= w.cycle_time(cells[i], config) - 1e-9);

    let mut i = cells.len() - 1;
    if direct_zone[cells[i]] {
        return Contracted::Removed;
    }
    while i > 0 {
        let next = i - 1;
        if !fits(next) || refresh(loop_time(next)) >= refresh(loop_time(i)) {
            break;
        }
        if direct_zone[cells[next]] {
            return Contracted::Removed;
        }
        i = next;
    }
    let outbound = GridPath { cells: cells[..=i].to_vec(), length: cum[i], cell_size: route.outbound.cell_size };
    Contracted::Route(CollectorRoute::new(outbound, route.assigned_workers.clone(), config.collector_speed))
}

/// Normalized weighted scores; an all-zero column contributes nothing.
pub fn utility(est_tc: &[f64], est_md: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let max_tc = est_tc.iter().cloned().fold(0.0, f64::max);
    let max_md = est_md.iter().cloned().fold(0.0, f64::max);
    est_tc
        .iter()
        .zip(est_md)
        .map(|(&tc, &md)| {
            let a = if max_tc > 0.0 { 1.0 - tc / max_tc } else { 0.0 };
            let b = if max_md > 0.0 { md / max_md } else { 0.0 };
            alpha * a + beta * b
        })
        .collect()
}

/// Index of the best candidate: highest utility, then fewer collectors,
/// then BAP before PAP before RAP.
pub fn select_best(candidates: &[PlanCandidate]) -> usize {
    (0..candidates.len())
        .max_by(|&a, &b| {
            let (ca, cb) = (&candidates[a], &candidates[b]);
            ca.utility
                .total_cmp(&cb.utility)
                .then(cb.n_collectors.cmp(&ca.n_collectors))
                .then(cb.method.cmp(&ca.method))
        })
        .expect("candidate table is never empty")
}

/// Shared per-map state reused by every candidate.
struct MapContext<'a> {
    grid: &'a OccupancyGrid,
    d_oc: DistanceField,
}

/// Evaluates every (method, collector count) candidate and picks the best.
pub fn plan_mission(grid: &OccupancyGrid, config: &PlanConfig) -> Result<MissionPlan> {
    config.validate()?;
    let ctx = MapContext { grid, d_oc: Eikonal::new(grid).sources(&[grid.oc()]).solve()? };
    let mut candidates = Vec::new();
    for &method in &config.methods {
        for n_c in config.collector_counts() {
            candidates.push(evaluate_candidate(&ctx, config, method, n_c)?);
        }
    }
    let tc: Vec<f64> = candidates.iter().map(|c| c.est_tc).collect();
    let md: Vec<f64> = candidates.iter().map(|c| c.est_md).collect();
    for (c, u) in candidates.iter_mut().zip(utility(&tc, &md, config.alpha, config.beta)) {
        c.utility = u;
    }
    let best = select_best(&candidates);
    Ok(MissionPlan { config: config.clone(), candidates, best })
}

/// Plans a single candidate (utility left at 0).
pub fn plan_candidate(grid: &OccupancyGrid, config: &PlanConfig, method: Method, n_collectors: usize) -> Result<PlanCandidate> {
    config.validate()?;
    let ctx = MapContext { grid, d_oc: Eikonal::new(grid).sources(&[grid.oc()]).solve()? };
    evaluate_candidate(&ctx, config, method, n_collectors)
}

fn evaluate_candidate(ctx: &MapContext<'_>, config: &PlanConfig, method: Method, n_c: usize) -> Result<PlanCandidate> {
    let grid = ctx.grid;
    let h = grid.cell_size();
    let fmm_start = march_count();
    let n_w = config.n_agents - n_c;
    let partition = segment(grid, method, n_w)?;
    let mut telemetry = Telemetry { b_w: partition.iterations(), ..Telemetry::default() };

    let est_start = march_count();
    let goals = allocate_goals(&partition, config.n_goals);
    let workloads = (0..n_w)
        .map(|s| estimate_workload(grid, &partition, s, goals[s], config))
        .collect::<Result<Vec<_>>>()?;
    telemetry.estimation_fmm += march_count() - est_start;

    let direct_cycle = |s: usize| {
        let d = ctx.d_oc.value(partition.centroids()[s]);
        workloads[s].time + 2.0 * config.worker_secs(d, h) + config.transmit_time * goals[s] as f64
    };

    let mut pairing = vec![Uplink::Oc; n_w];
    let mut collectors: Vec<CollectorRoute> = Vec::new();
    let mut accepted = vec![0usize; n_w];
    let mut paired_cycles = vec![0.0; n_w];

    if n_c > 0 {
        let graph = build_segment_graph(grid, &partition)?;
        if let Some(assoc) = associate_collectors(grid, &partition, &graph, n_c)? {
            telemetry.b_c = assoc.iterations;
            let direct_zone: Vec<bool> = (0..grid.len())
                .map(|c| partition.label(c).is_some_and(|s| graph.direct[s]))
                .collect();
            let est_start = march_count();
            let fields: Vec<Option<DistanceField>> = (0..n_w)
                .map(|s| {
                    if graph.direct[s] {
                        Ok(None)
                    } else {
                        Eikonal::new(grid).sources(&partition.centroids()[s..=s]).solve().map(Some)
                    }
                })
                .collect::<Result<_>>()?;
            telemetry.estimation_fmm += march_count() - est_start;

            let mut routes: Vec<Option<CollectorRoute>> = assoc
                .x_col
                .iter()
                .zip(&assoc.groups)
                .map(|(&x, group)| {
                    extract_path(&ctx.d_oc, x).map(|p| Some(CollectorRoute::new(p, group.clone(), config.collector_speed)))
                })
                .collect::<Result<_>>()?;
            // segments grouped to no collector upload directly
            let grouped: Vec<bool> = {
                let mut g = vec![false; n_w];
                for group in &assoc.groups {
                    for &s in group {
                        g[s] = true;
                    }
                }
                g
            };
            for k in 0..routes.len() {
                let Some(route) = routes[k].clone() else { continue };
                let mut others: Vec<f64> = routes
                    .iter()
                    .enumerate()
                    .filter(|&(j, r)| j != k && r.is_some())
                    .map(|(_, r)| r.as_ref().map_or(0.0, |r| r.cycle_time))
                    .collect();
                others.extend((0..n_w).filter(|&s| graph.direct[s] || !grouped[s]).map(direct_cycle));
                let assigned: Vec<AssignedWorker<'_>> = route
                    .assigned_workers
                    .iter()
                    .map(|&s| AssignedWorker {
                        workload: workloads[s].time,
                        goals: goals[s],
                        field: fields[s].as_ref().expect("far segments have a field"),
                    })
                    .collect();
                routes[k] = match contract_collector_path(grid, &route, &assigned, &others, &direct_zone, config) {
                    Contracted::Route(r) => Some(r),
                    Contracted::Removed => None,
                };
            }
            for route in routes.into_iter().flatten() {
                let id = collectors.len();
                for &s in &route.assigned_workers {
                    pairing[s] = Uplink::Collector(id);
                }
                collectors.push(route);
            }

            let est_start = march_count();
            for route in &collectors {
                for &s in &route.assigned_workers {
                    let tour = cycle_tour(grid, &workloads[s], route, config)?;
                    accepted[s] = tour.visited_count();
                    paired_cycles[s] = tour.total_time + config.transmit_time * accepted[s] as f64;
                }
            }
            telemetry.estimation_fmm += march_count() - est_start;
        }
    }

    let mut worker_cycles = vec![0.0; n_w];
    let mut samples = Vec::new();
    let mut est_md = 0.0;
    for s in 0..n_w {
        match pairing[s] {
            Uplink::Oc => {
                let cycle = direct_cycle(s);
                worker_cycles[s] = cycle;
                samples.push(cycle);
                if cycle > 0.0 {
                    est_md += (goals[s] as f64 * config.t_mission / cycle).floor();
                }
            }
            Uplink::Collector(k) => {
                let tc = collectors[k].cycle_time;
                worker_cycles[s] = paired_cycles[s];
                if tc > 0.0 {
                    est_md += (accepted[s] as f64 * config.t_mission / tc).floor();
                }
            }
        }
    }
    samples.extend(collectors.iter().map(|c| c.cycle_time));
    let est_tc = samples.iter().sum::<f64>() / samples.len() as f64;
    telemetry.total_fmm = march_count() - fmm_start;

    Ok(PlanCandidate {
        method,
        n_collectors: n_c,
        partition,
        workloads,
        collectors,
        pairing,
        accepted,
        worker_cycles,
        est_tc,
        est_md,
        utility: 0.0,
        telemetry,
    })
}

/// The time-window tour a paired worker runs each collector cycle, leaving
/// from and returning to `x_col`, over the segment's pseudo-goals.
fn cycle_tour(grid: &OccupancyGrid, work: &Workload, route: &CollectorRoute, config: &PlanConfig) -> Result<Tour> {
    let x = route.x_col();
    if work.pseudo_goals.is_empty() || route.cycle_time <= 0.0 {
        return Ok(Tour { order: Vec::new(), visit_times: Vec::new(), total_time: 0.0 });
    }
    let oracle = TravelOracle::build(grid, x, &work.pseudo_goals, Some(x), config.worker_speed, config.gather_time)?;
    let window = Window::new(route.cycle_time, config.transmit_time);
    route_with_window(&oracle, select_router(work.pseudo_goals.len()), window)
}
