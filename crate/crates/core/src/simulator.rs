//! Discrete-time mission execution: OC goal requests, worker tours, moving
//! rendezvous with collectors, and delivery metrics.
//!
//! Positions are continuous points in cell units. Every agent moves along
//! precomputed grid paths at constant speed; within a step a worker spends
//! its `dt` budget across consecutive moves and gathers, so tour timing
//! matches the planner's path times exactly.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fmm::{extract_path, DistanceField, Eikonal, GridPath};
use crate::grid::{line_of_sight, Cell, OccupancyGrid, Point};
use crate::planner::{CollectorRoute, PlanCandidate, PlanConfig, Uplink};
use crate::routing::{route, route_with_window, select_router, Node, Tour, TravelOracle, Window};
use crate::segmentation::Partition;

/// Default simulation timestep in seconds.
pub const DT: f64 = 0.1;

/// Waiting past the predicted window by this factor triggers the fallback.
const TIMEOUT_FACTOR: f64 = 2.0;

/// Later collector passes tried when a time window admits no goal.
const WINDOW_RETRIES: usize = 4;

/// One requested goal and its life cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRequest {
    pub id: usize,
    pub cell: Cell,
    /// Segment (worker) the goal belongs to.
    pub segment: usize,
    /// Index of the batch that created it.
    pub batch: usize,
    pub t_requested: f64,
    pub t_gathered: Option<f64>,
    pub t_delivered: Option<f64>,
}

/// Draws `m` distinct free cells other than the OC, uniformly, and assigns
/// each to the segment containing it. Ids start at `first_id`.
pub fn spawn_goal_batch<R: Rng>(
    rng: &mut R,
    grid: &OccupancyGrid,
    partition: &Partition,
    m: usize,
    now: f64,
    first_id: usize,
    batch: usize,
) -> Result<Vec<GoalRequest>> {
    if m == 0 {
        return Err(invalid("a goal batch needs at least one goal"));
    }
    let cells: Vec<Cell> = grid.free_cells().filter(|&c| c != grid.oc()).collect();
    if m > cells.len() {
        return Err(invalid(format!("{m} goals requested but only {} free cells", cells.len())));
    }
    sample(rng, cells.len(), m)
        .into_iter()
        .enumerate()
        .map(|(k, i)| {
            let cell = cells[i];
            let segment = partition
                .label(cell)
                .ok_or_else(|| invalid(format!("goal cell {cell} lies in no segment")))?;
            Ok(GoalRequest {
                id: first_id + k,
                cell,
                segment,
                batch,
                t_requested: now,
                t_gathered: None,
                t_delivered: None,
            })
        })
        .collect()
}

/// Communication model: strictly closer than `d_com` cells and an
/// unobstructed line of sight between the occupied cells.
pub fn comm_link(grid: &OccupancyGrid, a: Point, b: Point, d_com: f64) -> bool {
    let h = grid.cell_size();
    if a.dist(b) * h >= d_com * h {
        return false;
    }
    match (grid.cell_at(a), grid.cell_at(b)) {
        (Some(ca), Some(cb)) => line_of_sight(grid, ca, cb),
        _ => false,
    }
}

/// How a worker synchronizes with a moving collector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncBehavior {
    /// Transmission fits easily in the window; the worker crosses the area.
    Intercept,
    /// Transmission needs most of the window; the worker dwells.
    Wait,
    /// Transmission outlasts the window; the worker trails the collector.
    Follow,
}

impl SyncBehavior {
    fn classify(t_tx: f64, window: f64) -> Self {
        if t_tx <= 0.5 * window {
            SyncBehavior::Intercept
        } else if t_tx <= window {
            SyncBehavior::Wait
        } else {
            SyncBehavior::Follow
        }
    }
}

/// A collector pass through the communication area of a fixed cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pass {
    /// The area reaches the cell.
    pub t_in: f64,
    /// Last sampled moment the cell is still covered.
    pub t_out: f64,
    /// Unwrapped loop arc of the collector at `t_in`.
    pub arc_in: f64,
}

impl Pass {
    pub fn window(&self) -> f64 {
        self.t_out - self.t_in
    }
}

/// Where and how a worker meets its collector.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncPlan {
    pub behavior: SyncBehavior,
    /// Meeting cell, on the collector path unless the worker is already
    /// connected where it stands.
    pub target: Cell,
    /// Worker path to `target`.
    pub path: GridPath,
    /// When the collector's area reaches `target`.
    pub t_meet: f64,
    /// Predicted time `target` stays connected.
    pub window: f64,
    /// Unwrapped loop arc at which the collector crosses `target`.
    pub pass_arc: Option<f64>,
}

/// The theoretical motion of a collector looping from t = 0, plus the
/// static link table between its path cells.
#[derive(Debug, Clone)]
pub struct CollectorSchedule {
    /// Loop cells OC → x_col → back, without repeating the OC at the end.
    cells: Vec<Cell>,
    /// Arc position of each loop index in cells; one extra entry closes the loop.
    arc: Vec<f64>,
    total: f64,
    speed: f64,
    d_com: f64,
    /// Distinct path cells (the outbound path).
    out: Vec<Cell>,
    /// `link[j][i]`: `out[j]` connected with loop index `i`.
    link: Vec<Vec<bool>>,
}

impl CollectorSchedule {
    pub fn new(grid: &OccupancyGrid, route: &CollectorRoute, speed: f64, d_com: f64) -> Result<Self> {
        let out = route.outbound.cells.clone();
        if out.len() < 2 {
            return Err(invalid("collector path must leave the OC"));
        }
        if !(speed > 0.0) {
            return Err(invalid("collector speed must be positive"));
        }
        let m = out.len() - 1;
        let cells: Vec<Cell> = (0..2 * m).map(|i| if i <= m { out[i] } else { out[2 * m - i] }).collect();
        let mut arc = Vec::with_capacity(2 * m + 1);
        arc.push(0.0);
        for i in 0..2 * m {
            let next = cells[(i + 1) % (2 * m)];
            let last = *arc.last().expect("non-empty");
            arc.push(last + grid.center(cells[i]).dist(grid.center(next)));
        }
        let total = arc[2 * m];
        let link = out
            .iter()
            .map(|&p| cells.iter().map(|&c| comm_link(grid, grid.center(p), grid.center(c), d_com)).collect())
            .collect();
        Ok(CollectorSchedule { cells, arc, total, speed, d_com, out, link })
    }

    /// Seconds per loop.
    pub fn period(&self) -> f64 {
        self.total / self.speed
    }

    /// Loop length in cells.
    pub fn loop_length(&self) -> f64 {
        self.total
    }

    pub fn path_cells(&self) -> &[Cell] {
        &self.out
    }

    /// Unwrapped arc reached at time `t` on the theoretical schedule.
    pub fn arc_at(&self, t: f64) -> f64 {
        t * self.speed
    }

    /// Point at unwrapped arc `d`.
    pub fn position(&self, grid: &OccupancyGrid, d: f64) -> Point {
        let n = self.cells.len();
        let r = d.rem_euclid(self.total);
        let i = (self.arc.partition_point(|&a| a <= r).max(1) - 1).min(n - 1);
        let span = self.arc[i + 1] - self.arc[i];
        let f = if span > 0.0 { ((r - self.arc[i]) / span).clamp(0.0, 1.0) } else { 0.0 };
        grid.center(self.cells[i]).lerp(grid.center(self.cells[(i + 1) % n]), f)
    }

    /// First loop index at or after time `t`, with the arc offset of its lap.
    fn cursor(&self, t: f64) -> (usize, f64) {
        let d = self.arc_at(t);
        let lap = (d / self.total).floor() * self.total;
        let i = self.arc.partition_point(|&a| a < d - lap - 1e-9);
        if i >= self.cells.len() {
            (0, lap + self.total)
        } else {
            (i, lap)
        }
    }

    fn step(&self, (i, base): (usize, f64)) -> (usize, f64) {
        if i + 1 == self.cells.len() {
            (0, base + self.total)
        } else {
            (i + 1, base)
        }
    }

    fn time_of(&self, (i, base): (usize, f64)) -> f64 {
        (base + self.arc[i]) / self.speed
    }

    /// The next pass starting after `t` for a cell whose link to each loop
    /// index is `linked`. A cell covered by the whole loop gets a pass
    /// starting at `t` lasting one period.
    pub fn next_pass(&self, t: f64, linked: impl Fn(usize) -> bool) -> Option<Pass> {
        let n = self.cells.len();
        if (0..n).all(&linked) {
            return Some(Pass { t_in: t, t_out: t + self.period(), arc_in: self.arc_at(t) });
        }
        let mut at = self.cursor(t);
        let mut prev = linked((at.0 + n - 1) % n);
        for _ in 0..=n {
            let cur = linked(at.0);
            if cur && !prev {
                let t_in = self.time_of(at);
                let arc_in = at.1 + self.arc[at.0];
                let mut t_out = t_in;
                let mut k = self.step(at);
                for _ in 0..n {
                    if !linked(k.0) {
                        break;
                    }
                    t_out = self.time_of(k);
                    k = self.step(k);
                }
                return Some(Pass { t_in, t_out, arc_in });
            }
            prev = cur;
            at = self.step(at);
        }
        None
    }

    /// Pass of path cell `out[j]`.
    pub fn next_pass_of(&self, j: usize, t: f64) -> Option<Pass> {
        self.next_pass(t, |i| self.link[j][i])
    }

    /// Seconds from `t` until a cell linked now stops being linked.
    fn remaining(&self, t: f64, linked: impl Fn(usize) -> bool) -> f64 {
        let mut at = self.cursor(t);
        let mut last = t;
        for _ in 0..self.cells.len() {
            if !linked(at.0) {
                break;
            }
            last = self.time_of(at);
            at = self.step(at);
        }
        (last - t).max(0.0)
    }

    /// Unwrapped arc where the collector next stands on `cell` at or after `arc_from`.
    fn pass_arc(&self, cell: Cell, arc_from: f64) -> Option<f64> {
        let mut at = self.cursor(arc_from / self.speed);
        for _ in 0..=self.cells.len() {
            if self.cells[at.0] == cell {
                return Some(at.1 + self.arc[at.0]);
            }
            at = self.step(at);
        }
        None
    }
}

/// Chooses the meeting point with a collector on its theoretical schedule.
///
/// A worker already connected with enough window left transmits where it
/// stands. Otherwise, over every path cell, the first pass starting after
/// the worker could arrive there is found and the earliest one wins. `None`
/// means no path cell is reachable.
pub fn plan_sync(
    grid: &OccupancyGrid,
    schedule: &CollectorSchedule,
    from: Point,
    worker_speed: f64,
    t_tx: f64,
    now: f64,
) -> Result<Option<SyncPlan>> {
    let here = grid
        .cell_at(from)
        .filter(|&c| grid.is_free(c))
        .ok_or_else(|| invalid("worker is outside free space"))?;
    let h = grid.cell_size();
    let here_linked = |i: usize| comm_link(grid, grid.center(here), grid.center(schedule.cells[i]), schedule.d_com);
    let collector = schedule.position(grid, schedule.arc_at(now));
    if comm_link(grid, from, collector, schedule.d_com) {
        let remaining = schedule.remaining(now, here_linked);
        if remaining >= t_tx {
            return Ok(Some(SyncPlan {
                behavior: SyncBehavior::classify(t_tx, remaining),
                target: here,
                path: GridPath::single(here, h),
                t_meet: now,
                window: remaining,
                pass_arc: None,
            }));
        }
    }

    let field = Eikonal::new(grid).sources(&[here]).stop_after(&schedule.out).solve()?;
    let offset = from.dist(grid.center(here)) / worker_speed;
    let mut best: Option<(f64, f64, usize, Pass, GridPath)> = None;
    for (j, &cell) in schedule.out.iter().enumerate() {
        if !field.is_reached(cell) {
            continue;
        }
        // cheap lower bound before extracting the path
        let lower = now + offset + field.value(cell) / (worker_speed * h);
        if best.as_ref().is_some_and(|b| lower > b.0) {
            continue;
        }
        let path = extract_path(&field, cell)?;
        let arrival = now + offset + path.time(worker_speed)?;
        let Some(pass) = schedule.next_pass_of(j, arrival) else { continue };
        let better = match &best {
            None => true,
            Some(b) => pass.t_in < b.0 || (pass.t_in == b.0 && arrival < b.1),
        };
        if better {
            best = Some((pass.t_in, arrival, j, pass, path));
        }
    }
    Ok(best.map(|(t_in, _, j, pass, path)| {
        let target = schedule.out[j];
        SyncPlan {
            behavior: SyncBehavior::classify(t_tx, pass.window()),
            target,
            path,
            t_meet: t_in,
            window: pass.window(),
            pass_arc: schedule.pass_arc(target, pass.arc_in),
        }
    }))
}

/// Injected collector failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Fault {
    /// The collector leaves the mission at its first OC pass at or after
    /// `at` (after uploading), so no package is lost with it.
    Remove { collector: usize, at: f64 },
    /// The collector stands still for `secs` starting at `at`.
    Delay { collector: usize, at: f64, secs: f64 },
}

/// Knobs of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    /// Keep per-step positions, links and goal counts.
    pub record_steps: bool,
    pub faults: Vec<Fault>,
    /// After the mission ends, stop requesting goals and keep running until
    /// every gathered package reaches the OC.
    pub drain: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { dt: DT, record_steps: false, faults: Vec::new(), drain: false }
    }
}

/// Kinds of trace records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Spawn { goal: usize, cell: Cell, segment: usize, batch: usize },
    Arrived { cell: Cell },
    CycleStart { goals: Vec<usize>, carried: usize, window: Option<f64> },
    Gather { goal: usize },
    SyncPlanned { collector: usize, behavior: SyncBehavior, target: Cell, t_meet: f64, window: f64 },
    NoMeeting { collector: usize },
    Late { collector: usize, t_out: f64 },
    /// One package handed over; `steps` are the inclusive step runs during
    /// which the link carried it.
    Transfer { goal: usize, to: Uplink, steps: Vec<(u64, u64)> },
    Delivery { goals: Vec<usize> },
    Fallback { collector: usize },
    CollectorRemoved,
}

/// One trace record. Agents `0..N_w` are workers, collectors follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    pub agent: Option<usize>,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// State of every agent after one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSample {
    pub step: u64,
    pub t: f64,
    pub positions: Vec<Point>,
    /// Receiver each agent transmitted to during the step.
    pub transmitting: Vec<Option<Uplink>>,
    pub requested: usize,
    pub delivered: usize,
    pub in_flight: usize,
    pub pending: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MissionTrace {
    pub events: Vec<TraceEvent>,
    pub steps: Vec<StepSample>,
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionMetrics {
    /// Mean of `refresh_samples`, 0 without deliveries.
    pub mean_refresh: f64,
    pub delivered: usize,
    pub requested: usize,
    /// `t_delivered − t_requested` per delivered package, in delivery order.
    pub refresh_samples: Vec<f64>,
    /// Meters traveled per agent.
    pub distance: Vec<f64>,
    /// Requested goals not delivered when the run ended.
    pub goals_expired: usize,
    pub fallbacks: usize,
    /// Paired workers that missed the collector pass their tour targeted.
    pub late_arrivals: usize,
    /// Planned Intercept, Wait and Follow rendezvous.
    pub behaviors: [usize; 3],
    /// Mean executed cycle over uplinking agents: collector loops and the
    /// spacing of direct workers' OC deliveries. 0 if no agent closed two.
    pub mean_cycle: f64,
    pub duration: f64,
}

/// Runs `candidate` on `grid` for `config.t_mission` seconds.
pub fn run_mission(
    grid: &OccupancyGrid,
    candidate: &PlanCandidate,
    config: &PlanConfig,
    seed: u64,
    options: &SimOptions,
) -> Result<(MissionMetrics, MissionTrace)> {
    let mut sim = Sim::new(grid, candidate, config, seed, options)?;
    sim.run()?;
    Ok(sim.finish())
}

/// Moves `pos` along the remaining points by at most `budget` cells and
/// returns the unused budget.
#[derive(Debug, Clone)]
struct Polyline {
    points: Vec<Point>,
    next: usize,
}

impl Polyline {
    fn new(grid: &OccupancyGrid, path: &GridPath) -> Self {
        Polyline { points: path.cells.iter().map(|&c| grid.center(c)).collect(), next: 0 }
    }

    fn done(&self) -> bool {
        self.next >= self.points.len()
    }

    fn advance(&mut self, pos: &mut Point, mut budget: f64) -> f64 {
        while let Some(&p) = self.points.get(self.next) {
            let d = pos.dist(p);
            if d <= budget {
                *pos = p;
                budget -= d;
                self.next += 1;
            } else {
                *pos = pos.lerp(p, budget / d);
                return 0.0;
            }
        }
        budget
    }
}

#[derive(Debug, Clone)]
enum Action {
    Move(Polyline),
    Gather { goal: usize, left: f64 },
}

#[derive(Debug, Clone)]
struct SyncRun {
    plan: SyncPlan,
    approach: Polyline,
    follow: Option<f64>,
    deadline: f64,
}

#[derive(Debug, Clone)]
enum Phase {
    Init(Polyline),
    Idle,
    Work(VecDeque<Action>, Option<Polyline>),
    ToOc(Polyline),
    Sync(SyncRun),
    Fallback { arc: f64, stop: f64 },
}

impl Phase {
    fn delivering(&self) -> bool {
        matches!(self, Phase::ToOc(_) | Phase::Sync(_) | Phase::Fallback { .. })
    }
}

struct Worker {
    segment: usize,
    uplink: Uplink,
    pos: Point,
    carried: VecDeque<usize>,
    tx_ticks: u64,
    tx_to: Option<Uplink>,
    tx_runs: Vec<(u64, u64)>,
    linked: Option<Uplink>,
    phase: Phase,
    /// Path cell nearest to the segment centroid, for paired workers.
    rendezvous: Option<usize>,
    /// The collector pass the current tour was sized for.
    target: Option<Pass>,
    /// Pending count at the last cycle that accepted nothing.
    stalled_on: Option<usize>,
    distance: f64,
}

struct Collector {
    schedule: CollectorSchedule,
    ticks: u64,
    lap: u64,
    arc: f64,
    pos: Point,
    carried: Vec<usize>,
    active: bool,
    remove_at: Option<f64>,
    delays: Vec<(f64, f64)>,
    distance: f64,
}

struct Sim<'a> {
    grid: &'a OccupancyGrid,
    partition: &'a Partition,
    config: &'a PlanConfig,
    dt: f64,
    tx_need: u64,
    record: bool,
    drain: bool,
    rng: ChaCha8Rng,
    d_oc: DistanceField,
    workers: Vec<Worker>,
    collectors: Vec<Collector>,
    goals: Vec<GoalRequest>,
    pending: Vec<Vec<usize>>,
    batches: usize,
    draining: bool,
    events: Vec<TraceEvent>,
    steps: Vec<StepSample>,
    delivered_order: Vec<usize>,
    fallbacks: usize,
    late: usize,
    behaviors: [usize; 3],
    /// Times at which each uplinking agent closed a cycle.
    cycle_marks: Vec<Vec<f64>>,
    step: u64,
}

impl<'a> Sim<'a> {
    fn new(
        grid: &'a OccupancyGrid,
        candidate: &'a PlanCandidate,
        config: &'a PlanConfig,
        seed: u64,
        options: &SimOptions,
    ) -> Result<Self> {
        config.validate()?;
        if !(options.dt > 0.0 && options.dt.is_finite()) {
            return Err(invalid("timestep must be positive"));
        }
        let partition = &candidate.partition;
        let n_w = partition.len();
        if partition.labels().len() != grid.len()
            || candidate.pairing.len() != n_w
            || partition.centroids().iter().any(|&c| !grid.is_free(c))
            || grid.free_cells().any(|c| partition.label(c).is_none())
        {
            return Err(invalid("plan does not match the grid"));
        }
        let d_oc = Eikonal::new(grid).sources(&[grid.oc()]).solve()?;
        let oc = grid.center(grid.oc());

        let mut collectors = Vec::new();
        let mut usable = Vec::new();
        for route in &candidate.collectors {
            if route.outbound.cells.len() < 2 {
                usable.push(None);
                continue;
            }
            usable.push(Some(collectors.len()));
            let schedule = CollectorSchedule::new(grid, route, config.collector_speed, config.d_com)?;
            collectors.push(Collector {
                schedule,
                ticks: 0,
                lap: 0,
                arc: 0.0,
                pos: oc,
                carried: Vec::new(),
                active: true,
                remove_at: None,
                delays: Vec::new(),
                distance: 0.0,
            });
        }
        for fault in &options.faults {
            let k = match *fault {
                Fault::Remove { collector, .. } | Fault::Delay { collector, .. } => collector,
            };
            let c = collectors.get_mut(k).ok_or_else(|| invalid(format!("fault names unknown collector {k}")))?;
            match *fault {
                Fault::Remove { at, .. } => {
                    c.remove_at = Some(c.remove_at.map_or(at, |r| r.min(at)));
                    if at <= 0.0 {
                        c.active = false;
                    }
                }
                Fault::Delay { at, secs, .. } => c.delays.push((at, at + secs)),
            }
        }

        let mut workers = Vec::with_capacity(n_w);
        for s in 0..n_w {
            let uplink = match candidate.pairing[s] {
                Uplink::Oc => Uplink::Oc,
                Uplink::Collector(k) => match usable.get(k).copied().flatten() {
                    Some(id) => Uplink::Collector(id),
                    None => Uplink::Oc,
                },
            };
            let centroid = partition.centroids()[s];
            let rendezvous = match uplink {
                Uplink::Oc => None,
                Uplink::Collector(k) => {
                    let sched = &collectors[k].schedule;
                    let field = Eikonal::new(grid).sources(&[centroid]).stop_after(&sched.out).solve()?;
                    (0..sched.out.len())
                        .filter(|&j| field.is_reached(sched.out[j]))
                        .min_by(|&a, &b| field.value(sched.out[a]).total_cmp(&field.value(sched.out[b])).then(a.cmp(&b)))
                }
            };
            let init = Polyline::new(grid, &extract_path(&d_oc, centroid)?);
            workers.push(Worker {
                segment: s,
                uplink,
                pos: oc,
                carried: VecDeque::new(),
                tx_ticks: 0,
                tx_to: None,
                tx_runs: Vec::new(),
                linked: None,
                phase: Phase::Init(init),
                rendezvous,
                target: None,
                stalled_on: None,
                distance: 0.0,
            });
        }

        let n_agents = workers.len() + collectors.len();
        Ok(Sim {
            grid,
            partition,
            config,
            dt: options.dt,
            tx_need: (config.transmit_time / options.dt).round() as u64,
            record: options.record_steps,
            drain: options.drain,
            rng: ChaCha8Rng::seed_from_u64(seed),
            d_oc,
            workers,
            collectors,
            goals: Vec::new(),
            pending: vec![Vec::new(); n_w],
            batches: 0,
            draining: false,
            events: Vec::new(),
            steps: Vec::new(),
            delivered_order: Vec::new(),
            fallbacks: 0,
            late: 0,
            behaviors: [0; 3],
            cycle_marks: vec![Vec::new(); n_agents],
            step: 0,
        })
    }

    fn now(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// Timestamp of everything that happens during the current step.
    fn step_end(&self) -> f64 {
        (self.step + 1) as f64 * self.dt
    }

    fn emit(&mut self, t: f64, agent: Option<usize>, kind: EventKind) {
        self.events.push(TraceEvent { t, agent, kind });
    }

    fn spawn(&mut self, m: usize, t: f64) -> Result<()> {
        if m == 0 || self.draining {
            return Ok(());
        }
        let batch = spawn_goal_batch(&mut self.rng, self.grid, self.partition, m, t, self.goals.len(), self.batches)?;
        self.batches += 1;
        for g in batch {
            self.pending[g.segment].push(g.id);
            self.emit(t, None, EventKind::Spawn { goal: g.id, cell: g.cell, segment: g.segment, batch: g.batch });
            self.goals.push(g);
        }
        Ok(())
    }

    fn deliver(&mut self, agent: usize, ids: Vec<usize>, t: f64) -> Result<()> {
        if ids.is_empty() {
            return Ok(());
        }
        if self.workers.get(agent).is_some_and(|w| w.uplink == Uplink::Oc) {
            self.cycle_marks[agent].push(t);
        }
        for &g in &ids {
            self.goals[g].t_delivered = Some(t);
            self.delivered_order.push(g);
        }
        let m = ids.len();
        self.emit(t, Some(agent), EventKind::Delivery { goals: ids });
        self.spawn(m, t)
    }

    fn run(&mut self) -> Result<()> {
        self.spawn(self.config.n_goals, 0.0)?;
        let steps = (self.config.t_mission / self.dt).round() as u64;
        let period = self.collectors.iter().map(|c| c.schedule.period()).fold(0.0, f64::max);
        let cap = steps + ((10.0 * period + 2000.0) / self.dt) as u64;
        loop {
            if self.step >= steps {
                if !self.drain || self.step >= cap || self.settled() {
                    break;
                }
                self.draining = true;
            }
            self.advance()?;
        }
        Ok(())
    }

    /// Nothing gathered is still on its way and no tour is running.
    fn settled(&self) -> bool {
        self.in_flight() == 0 && self.workers.iter().all(|w| !matches!(w.phase, Phase::Work(..) | Phase::Init(_)))
    }

    fn in_flight(&self) -> usize {
        self.workers.iter().map(|w| w.carried.len()).sum::<usize>()
            + self.collectors.iter().map(|c| c.carried.len()).sum::<usize>()
    }

    fn advance(&mut self) -> Result<()> {
        let t = self.now();
        let t_end = self.step_end();
        let n_w = self.workers.len();

        for k in 0..self.collectors.len() {
            let c = &mut self.collectors[k];
            if !c.active || c.delays.iter().any(|&(a, b)| t >= a && t < b) {
                continue;
            }
            c.ticks += 1;
            let arc = c.ticks as f64 * self.dt * c.schedule.speed;
            c.distance += arc - c.arc;
            c.arc = arc;
            c.pos = c.schedule.position(self.grid, arc);
            let lap = (arc / c.schedule.total).floor() as u64;
            if lap > c.lap {
                c.lap = lap;
                self.cycle_marks[n_w + k].push(t_end);
                let ids = std::mem::take(&mut c.carried);
                let removed = c.remove_at.is_some_and(|r| r <= t_end);
                if removed {
                    c.active = false;
                }
                self.deliver(n_w + k, ids, t_end)?;
                if removed {
                    self.emit(t_end, Some(n_w + k), EventKind::CollectorRemoved);
                }
            }
        }

        for w in 0..n_w {
            self.update_worker(w, t)?;
        }

        let mut transmitting = vec![None; n_w + self.collectors.len()];
        for w in 0..n_w {
            transmitting[w] = self.transmit(w, t_end)?;
        }

        if self.record {
            let mut positions: Vec<Point> = self.workers.iter().map(|w| w.pos).collect();
            positions.extend(self.collectors.iter().map(|c| c.pos));
            let pending = self.pending.iter().map(Vec::len).sum::<usize>()
                + self
                    .workers
                    .iter()
                    .map(|w| match &w.phase {
                        Phase::Work(actions, _) => actions.iter().filter(|a| matches!(a, Action::Gather { .. })).count(),
                        _ => 0,
                    })
                    .sum::<usize>();
            self.steps.push(StepSample {
                step: self.step,
                t: t_end,
                positions,
                transmitting,
                requested: self.goals.len(),
                delivered: self.delivered_order.len(),
                in_flight: self.in_flight(),
                pending,
            });
        }
        self.step += 1;
        Ok(())
    }

    /// One transmission tick for worker `w`, returning the receiver used.
    fn transmit(&mut self, w: usize, t_end: f64) -> Result<Option<Uplink>> {
        let grid = self.grid;
        let d_com = self.config.d_com;
        let worker = &self.workers[w];
        if worker.carried.is_empty() || !worker.phase.delivering() {
            self.workers[w].linked = None;
            return Ok(None);
        }
        let oc = grid.center(grid.oc());
        let receiver = if comm_link(grid, worker.pos, oc, d_com) {
            Some(Uplink::Oc)
        } else {
            match worker.uplink {
                Uplink::Collector(k) => {
                    let c = &self.collectors[k];
                    (c.active && comm_link(grid, worker.pos, c.pos, d_com)).then_some(Uplink::Collector(k))
                }
                Uplink::Oc => None,
            }
        };
        let step = self.step;
        let worker = &mut self.workers[w];
        worker.linked = receiver;
        let Some(to) = receiver else { return Ok(None) };
        if worker.tx_to != Some(to) {
            worker.tx_ticks = 0;
            worker.tx_runs.clear();
            worker.tx_to = Some(to);
        }
        worker.tx_ticks += 1;
        match worker.tx_runs.last_mut() {
            Some(run) if run.1 + 1 == step => run.1 = step,
            _ => worker.tx_runs.push((step, step)),
        }
        let mut sent = Vec::new();
        while worker.tx_ticks >= self.tx_need {
            let Some(goal) = worker.carried.pop_front() else { break };
            worker.tx_ticks -= self.tx_need;
            let steps = if self.tx_need == 0 { vec![(step, step)] } else { std::mem::take(&mut worker.tx_runs) };
            sent.push((goal, steps));
            if worker.carried.is_empty() {
                break;
            }
        }
        if self.workers[w].carried.is_empty() {
            let worker = &mut self.workers[w];
            worker.tx_ticks = 0;
            worker.tx_runs.clear();
            worker.tx_to = None;
            worker.phase = Phase::Idle;
        }
        let mut to_oc = Vec::new();
        for (goal, steps) in sent {
            self.emit(t_end, Some(w), EventKind::Transfer { goal, to, steps });
            match to {
                Uplink::Oc => to_oc.push(goal),
                Uplink::Collector(k) => self.collectors[k].carried.push(goal),
            }
        }
        self.deliver(w, to_oc, t_end)?;
        Ok(Some(to))
    }

    fn update_worker(&mut self, w: usize, t: f64) -> Result<()> {
        let speed = self.config.worker_speed;
        let start = self.workers[w].pos;
        let mut budget = self.dt;
        loop {
            let now = t + self.dt - budget;
            let phase = std::mem::replace(&mut self.workers[w].phase, Phase::Idle);
            let (phase, go_on) = match phase {
                Phase::Idle => {
                    let started = self.start_cycle(w, now)?;
                    (std::mem::replace(&mut self.workers[w].phase, Phase::Idle), started)
                }
                Phase::Init(mut line) => {
                    budget = line.advance(&mut self.workers[w].pos, budget * speed) / speed;
                    if line.done() {
                        let cell = self.partition.centroids()[w];
                        self.emit(self.step_end(), Some(w), EventKind::Arrived { cell });
                        (Phase::Idle, true)
                    } else {
                        (Phase::Init(line), false)
                    }
                }
                Phase::Work(mut actions, to_oc) => match actions.front_mut() {
                    Some(Action::Move(line)) => {
                        budget = line.advance(&mut self.workers[w].pos, budget * speed) / speed;
                        if line.done() {
                            actions.pop_front();
                        }
                        (Phase::Work(actions, to_oc), budget > 0.0)
                    }
                    Some(Action::Gather { goal, left }) => {
                        let used = left.min(budget);
                        *left -= used;
                        budget -= used;
                        if *left <= 1e-12 {
                            let goal = *goal;
                            self.goals[goal].t_gathered = Some(t + self.dt - budget);
                            self.workers[w].carried.push_back(goal);
                            self.emit(self.step_end(), Some(w), EventKind::Gather { goal });
                            actions.pop_front();
                        }
                        (Phase::Work(actions, to_oc), budget > 0.0)
                    }
                    None => (self.finish_work(w, to_oc, now)?, true),
                },
                Phase::ToOc(mut line) => {
                    if self.workers[w].linked != Some(Uplink::Oc) {
                        line.advance(&mut self.workers[w].pos, budget * speed);
                    }
                    (Phase::ToOc(line), false)
                }
                Phase::Sync(run) => (self.sync_step(w, run, now, budget)?, false),
                Phase::Fallback { arc, stop } => {
                    let Uplink::Collector(k) = self.workers[w].uplink else { unreachable!("direct workers never fall back") };
                    let mut arc = arc;
                    if self.workers[w].linked != Some(Uplink::Oc) {
                        let step = budget * speed;
                        arc = if stop < arc { (arc - step).max(stop) } else { (arc + step).min(stop) };
                        self.workers[w].pos = self.collectors[k].schedule.position(self.grid, arc);
                    }
                    (Phase::Fallback { arc, stop }, false)
                }
            };
            self.workers[w].phase = phase;
            if !go_on || budget <= 1e-12 {
                break;
            }
        }
        let moved = start.dist(self.workers[w].pos);
        self.workers[w].distance += moved;
        Ok(())
    }

    /// Routes the segment's pending goals; returns whether a cycle started.
    fn start_cycle(&mut self, w: usize, now: f64) -> Result<bool> {
        let grid = self.grid;
        let config = self.config;
        let seg = self.workers[w].segment;
        let ids: Vec<usize> = if self.draining { Vec::new() } else { self.pending[seg].clone() };
        let carried = self.workers[w].carried.len();
        if ids.is_empty() && carried == 0 {
            return Ok(false);
        }
        if carried == 0 && self.workers[w].stalled_on == Some(ids.len()) {
            return Ok(false);
        }
        let here = grid
            .cell_at(self.workers[w].pos)
            .filter(|&c| grid.is_free(c))
            .ok_or_else(|| invalid("worker left free space"))?;
        let cells: Vec<Cell> = ids.iter().map(|&g| self.goals[g].cell).collect();

        let (oracle, tour, window) = match self.workers[w].uplink {
            Uplink::Oc => {
                let oracle = TravelOracle::build(grid, here, &cells, Some(grid.oc()), config.worker_speed, config.gather_time)?;
                let tour = route(&oracle, select_router(cells.len()))?;
                (oracle, tour, None)
            }
            Uplink::Collector(k) => {
                let sched = &self.collectors[k].schedule;
                let j = self.workers[w].rendezvous.expect("paired workers have a rendezvous");
                let oracle = TravelOracle::build(grid, here, &cells, Some(sched.out[j]), config.worker_speed, config.gather_time)?;
                let mut pass = sched.next_pass_of(j, now).ok_or_else(|| invalid("collector never reaches its rendezvous"))?;
                let mut tour = Tour { order: Vec::new(), visit_times: Vec::new(), total_time: 0.0 };
                for _ in 0..WINDOW_RETRIES {
                    let span = pass.t_in - now;
                    if span > 0.0 && !cells.is_empty() {
                        let window = Window { t_c: span, t_tx_per_pkg: config.transmit_time, carried };
                        tour = route_with_window(&oracle, select_router(cells.len()), window)?;
                    }
                    if !tour.order.is_empty() || carried > 0 || cells.is_empty() {
                        break;
                    }
                    match sched.next_pass_of(j, pass.t_out + 1e-6) {
                        Some(p) => pass = p,
                        None => break,
                    }
                }
                self.workers[w].target = Some(pass);
                let span = pass.t_in - now;
                (oracle, tour, Some(span))
            }
        };

        if tour.order.is_empty() && carried == 0 {
            self.workers[w].stalled_on = Some(ids.len());
            return Ok(false);
        }
        self.workers[w].stalled_on = None;
        let taken: Vec<usize> = tour.order.iter().map(|&g| ids[g]).collect();
        self.pending[seg].retain(|g| !taken.contains(g));

        let mut actions = VecDeque::new();
        let mut at = Node::Start;
        for &g in &tour.order {
            let path = oracle.path(at, Node::Goal(g)).expect("tour goals are reachable");
            actions.push_back(Action::Move(Polyline::new(grid, path)));
            actions.push_back(Action::Gather { goal: ids[g], left: config.gather_time });
            at = Node::Goal(g);
        }
        let to_oc = match self.workers[w].uplink {
            Uplink::Oc => {
                let path = match oracle.path_to_sink(at) {
                    Some(p) => p.clone(),
                    None => extract_path(&self.d_oc, grid.cell_at(self.workers[w].pos).unwrap_or(here))?.reversed(),
                };
                Some(Polyline::new(grid, &path))
            }
            Uplink::Collector(_) => None,
        };
        let t_ev = self.step_end();
        self.emit(t_ev, Some(w), EventKind::CycleStart { goals: taken, carried, window });
        self.workers[w].phase = Phase::Work(actions, to_oc);
        Ok(true)
    }

    /// Tour done: head to the OC or plan the rendezvous.
    fn finish_work(&mut self, w: usize, to_oc: Option<Polyline>, now: f64) -> Result<Phase> {
        if self.workers[w].carried.is_empty() {
            return Ok(Phase::Idle);
        }
        let k = match self.workers[w].uplink {
            Uplink::Oc => {
                let line = match to_oc {
                    Some(line) => line,
                    None => {
                        let here = self.grid.cell_at(self.workers[w].pos).expect("inside the grid");
                        Polyline::new(self.grid, &extract_path(&self.d_oc, here)?.reversed())
                    }
                };
                return Ok(Phase::ToOc(line));
            }
            Uplink::Collector(k) => k,
        };
        let t_tx = self.config.transmit_time * self.workers[w].carried.len() as f64;
        let plan = plan_sync(
            self.grid,
            &self.collectors[k].schedule,
            self.workers[w].pos,
            self.config.worker_speed,
            t_tx,
            now,
        )?;
        let target = self.workers[w].target.take();
        let late = match (&plan, target) {
            (None, _) => true,
            (Some(p), Some(pass)) => p.t_meet > pass.t_out + 1e-9,
            (Some(_), None) => false,
        };
        let agent = Some(w);
        let t_ev = self.step_end();
        if late {
            self.late += 1;
            self.emit(t_ev, agent, EventKind::Late { collector: k, t_out: target.map_or(now, |p| p.t_out) });
        }
        match plan {
            Some(plan) => Ok(self.enter_sync(w, k, plan, t_ev)),
            None => {
                self.emit(t_ev, agent, EventKind::NoMeeting { collector: k });
                let seg = self.workers[w].segment;
                if !self.draining && !self.pending[seg].is_empty() && self.start_cycle(w, now)? {
                    let phase = std::mem::replace(&mut self.workers[w].phase, Phase::Idle);
                    if matches!(&phase, Phase::Work(actions, _) if !actions.is_empty()) {
                        return Ok(phase);
                    }
                }
                // nothing to gather meanwhile: wait at the rendezvous
                let sched = &self.collectors[k].schedule;
                let j = self.workers[w].rendezvous.expect("paired workers have a rendezvous");
                let here = self.grid.cell_at(self.workers[w].pos).expect("inside the grid");
                let field = Eikonal::new(self.grid).sources(&[here]).stop_after(&sched.out[j..=j]).solve()?;
                let path = extract_path(&field, sched.out[j])?;
                let pass = sched.next_pass_of(j, now + path.time(self.config.worker_speed)?);
                let plan = SyncPlan {
                    behavior: SyncBehavior::classify(t_tx, pass.map_or(0.0, |p| p.window())),
                    target: sched.out[j],
                    t_meet: pass.map_or(now, |p| p.t_in),
                    window: pass.map_or(0.0, |p| p.window()),
                    pass_arc: pass.and_then(|p| sched.pass_arc(sched.out[j], p.arc_in)),
                    path,
                };
                Ok(self.enter_sync(w, k, plan, t_ev))
            }
        }
    }

    fn enter_sync(&mut self, w: usize, collector: usize, plan: SyncPlan, t_ev: f64) -> Phase {
        self.behaviors[plan.behavior as usize] += 1;
        self.emit(
            t_ev,
            Some(w),
            EventKind::SyncPlanned {
                collector,
                behavior: plan.behavior,
                target: plan.target,
                t_meet: plan.t_meet,
                window: plan.window,
            },
        );
        // a grazing pass may end before the collector actually crosses the target
        let Uplink::Collector(k) = self.workers[w].uplink else { unreachable!("direct workers never sync") };
        let crossing = plan.pass_arc.map_or(plan.t_meet, |a| a / self.collectors[k].schedule.speed);
        let deadline = plan.t_meet.max(crossing) + TIMEOUT_FACTOR * plan.window.max(self.dt);
        let approach = Polyline::new(self.grid, &plan.path);
        Phase::Sync(SyncRun { plan, approach, follow: None, deadline })
    }

    fn sync_step(&mut self, w: usize, mut run: SyncRun, now: f64, budget: f64) -> Result<Phase> {
        let Uplink::Collector(k) = self.workers[w].uplink else { unreachable!("direct workers never sync") };
        let step = budget * self.config.worker_speed;
        if let Some(arc) = run.follow {
            let c = &self.collectors[k];
            let arc = (arc + step).min(c.arc.max(arc));
            self.workers[w].pos = c.schedule.position(self.grid, arc);
            run.follow = Some(arc);
            return Ok(Phase::Sync(run));
        }
        if !run.approach.done() {
            run.approach.advance(&mut self.workers[w].pos, step);
            return Ok(Phase::Sync(run));
        }
        let c = &self.collectors[k];
        let linked = self.workers[w].linked.is_some();
        let passed = run.plan.pass_arc.is_some_and(|a| c.arc >= a - 1e-9);
        if passed && (run.plan.behavior == SyncBehavior::Follow || !linked) {
            run.follow = run.plan.pass_arc;
            return Ok(Phase::Sync(run));
        }
        if now < run.deadline || linked {
            return Ok(Phase::Sync(run));
        }
        match run.plan.pass_arc {
            Some(a) if !passed => {
                let total = c.schedule.total;
                let lap = (a / total).floor() * total;
                let stop = if a - lap <= 0.5 * total { lap } else { lap + total };
                self.fallbacks += 1;
                let t_ev = self.step_end();
                self.emit(t_ev, Some(w), EventKind::Fallback { collector: k });
                Ok(Phase::Fallback { arc: a, stop })
            }
            _ => {
                // standing off the path and the link is gone: plan again
                let t_tx = self.config.transmit_time * self.workers[w].carried.len() as f64;
                let plan = plan_sync(self.grid, &c.schedule, self.workers[w].pos, self.config.worker_speed, t_tx, now)?;
                let t_ev = self.step_end();
                match plan {
                    Some(plan) => Ok(self.enter_sync(w, k, plan, t_ev)),
                    None => {
                        let here = self.grid.cell_at(self.workers[w].pos).expect("inside the grid");
                        let path = extract_path(&self.d_oc, here)?.reversed();
                        self.fallbacks += 1;
                        self.emit(t_ev, Some(w), EventKind::Fallback { collector: k });
                        Ok(Phase::ToOc(Polyline::new(self.grid, &path)))
                    }
                }
            }
        }
    }

    fn finish(self) -> (MissionMetrics, MissionTrace) {
        let refresh_samples: Vec<f64> = self
            .delivered_order
            .iter()
            .map(|&g| self.goals[g].t_delivered.expect("delivered") - self.goals[g].t_requested)
            .collect();
        let mean_refresh = if refresh_samples.is_empty() {
            0.0
        } else {
            refresh_samples.iter().sum::<f64>() / refresh_samples.len() as f64
        };
        let cycles: Vec<f64> = self
            .cycle_marks
            .iter()
            .filter(|m| m.len() >= 2)
            .map(|m| (m[m.len() - 1] - m[0]) / (m.len() - 1) as f64)
            .collect();
        let mean_cycle = if cycles.is_empty() { 0.0 } else { cycles.iter().sum::<f64>() / cycles.len() as f64 };
        let h = self.grid.cell_size();
        let mut distance: Vec<f64> = self.workers.iter().map(|w| w.distance * h).collect();
        distance.extend(self.collectors.iter().map(|c| c.distance * h));
        let metrics = MissionMetrics {
            mean_refresh,
            delivered: self.delivered_order.len(),
            requested: self.goals.len(),
            goals_expired: self.goals.len() - self.delivered_order.len(),
            refresh_samples,
            distance,
            fallbacks: self.fallbacks,
            late_arrivals: self.late,
            behaviors: self.behaviors,
            mean_cycle,
            duration: self.now(),
        };
        (metrics, MissionTrace { events: self.events, steps: self.steps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::segment;
    use crate::Method;

    fn straight(grid: &OccupancyGrid, cells: Vec<Cell>) -> CollectorRoute {
        let h = grid.cell_size();
        let length = (cells.len() - 1) as f64 * h;
        CollectorRoute { outbound: GridPath { cells, length, cell_size: h }, cycle_time: 0.0, assigned_workers: vec![0] }
    }

    /// 40x10 open grid, OC at (0,5), collector running along row 5 to x = 30.
    fn lane(speed: f64) -> (OccupancyGrid, CollectorSchedule) {
        let g = OccupancyGrid::open(40, 10, 5 * 40).unwrap();
        let route = straight(&g, (0..=30).map(|x| 5 * 40 + x).collect());
        let s = CollectorSchedule::new(&g, &route, speed, 3.0).unwrap();
        (g, s)
    }

    #[test]
    fn link_is_strict_and_needs_sight() {
        let g = OccupancyGrid::open(10, 1, 0).unwrap();
        let a = g.center(0);
        assert!(comm_link(&g, a, a, 1.0));
        assert!(!comm_link(&g, a, g.center(3), 3.0));
        assert!(comm_link(&g, a, g.center(3), 3.0 + 1e-9));

        let mut obs = vec![false; 10];
        obs[2] = true;
        let walled = OccupancyGrid::new(10, 1, obs, 0).unwrap();
        assert!(!comm_link(&walled, walled.center(0), walled.center(4), 10.0));
    }

    #[test]
    fn single_goal_lands_in_its_segment() {
        let g = OccupancyGrid::open(20, 20, 0).unwrap();
        let p = segment(&g, Method::Pap, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = spawn_goal_batch(&mut rng, &g, &p, 1, 2.5, 7, 1).unwrap();
        assert_eq!(batch.len(), 1);
        let goal = &batch[0];
        assert_eq!((goal.id, goal.batch, goal.t_requested), (7, 1, 2.5));
        assert_ne!(goal.cell, g.oc());
        assert_eq!(p.label(goal.cell), Some(goal.segment));
    }

    #[test]
    fn spawning_is_seeded_and_distinct() {
        let g = OccupancyGrid::open(20, 20, 0).unwrap();
        let p = segment(&g, Method::Bap, 3).unwrap();
        let draw = |seed| spawn_goal_batch(&mut ChaCha8Rng::seed_from_u64(seed), &g, &p, 50, 0.0, 0, 0).unwrap();
        assert_eq!(draw(11), draw(11));
        let mut cells: Vec<Cell> = draw(11).iter().map(|q| q.cell).collect();
        cells.sort_unstable();
        cells.dedup();
        assert_eq!(cells.len(), 50);
    }

    #[test]
    fn batch_size_is_checked() {
        let g = OccupancyGrid::open(3, 1, 0).unwrap();
        let p = segment(&g, Method::Bap, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(spawn_goal_batch(&mut rng, &g, &p, 0, 0.0, 0, 0).is_err());
        assert!(spawn_goal_batch(&mut rng, &g, &p, 3, 0.0, 0, 0).is_err());
        assert_eq!(spawn_goal_batch(&mut rng, &g, &p, 2, 0.0, 0, 0).unwrap().len(), 2);
    }

    #[test]
    fn schedule_loops_out_and_back() {
        let (g, s) = lane(0.5);
        assert_eq!(s.loop_length(), 60.0);
        assert_eq!(s.period(), 120.0);
        assert_eq!(s.position(&g, 10.0), g.center(5 * 40 + 10));
        assert_eq!(s.position(&g, 50.0), g.center(5 * 40 + 10));
        assert_eq!(s.position(&g, 70.0), g.center(5 * 40 + 10));
        // cell x = 20 is linked from x = 18 to 22 on the way out
        let pass = s.next_pass_of(20, 0.0).unwrap();
        assert!((pass.t_in - 36.0).abs() < 1e-9 && (pass.t_out - 44.0).abs() < 1e-9);
        // and again on the way back
        let back = s.next_pass_of(20, 50.0).unwrap();
        assert!((back.t_in - 76.0).abs() < 1e-9 && (back.t_out - 84.0).abs() < 1e-9);
    }

    #[test]
    fn short_transmission_intercepts() {
        let (g, s) = lane(0.5);
        let from = g.center(0 * 40 + 20);
        let plan = plan_sync(&g, &s, from, 2.0, 0.1, 0.0).unwrap().unwrap();
        assert_eq!(plan.behavior, SyncBehavior::Intercept);
        assert!(plan.t_meet >= plan.path.time(2.0).unwrap() - 1e-9);
        assert!(s.path_cells().contains(&plan.target));
    }

    #[test]
    fn long_transmission_follows() {
        let (g, s) = lane(0.5);
        let plan = plan_sync(&g, &s, g.center(20), 2.0, 100.0, 0.0).unwrap().unwrap();
        assert_eq!(plan.behavior, SyncBehavior::Follow);
        assert!(plan.window < 100.0);
    }

    #[test]
    fn linked_worker_transmits_in_place() {
        let (g, s) = lane(0.5);
        // at t = 10 the collector stands on x = 5
        let here = 6 * 40 + 5;
        let plan = plan_sync(&g, &s, g.center(here), 2.0, 1.0, 10.0).unwrap().unwrap();
        assert_eq!(plan.target, here);
        assert_eq!(plan.path.cells, vec![here]);
        assert_eq!(plan.t_meet, 10.0);
        assert_eq!(plan.pass_arc, None);
        assert!((plan.window - 4.0).abs() < 1e-9);
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(SyncBehavior::classify(5.0, 10.0), SyncBehavior::Intercept);
        assert_eq!(SyncBehavior::classify(6.0, 10.0), SyncBehavior::Wait);
        assert_eq!(SyncBehavior::classify(10.0, 10.0), SyncBehavior::Wait);
        assert_eq!(SyncBehavior::classify(10.5, 10.0), SyncBehavior::Follow);
    }
}
