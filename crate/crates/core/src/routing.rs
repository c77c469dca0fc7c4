//! Worker tours over the goals of one segment.
//!
//! A [`TravelOracle`] holds the pairwise travel times (and the realized grid
//! paths) between the worker's start, its goals and an optional delivery
//! sink. Tours start at the start node, visit goals in order, spend the
//! gather time at each one, and finish at the sink.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fmm::{extract_path, Eikonal, GridPath};
use crate::grid::{Cell, OccupancyGrid};

/// Largest goal count accepted by the exact router.
pub const BF_CAP: usize = 13;
/// Largest goal count for which [`select_router`] picks the exact router.
pub const BF_THRESHOLD: usize = 12;

/// A stop of a tour: the worker's start or one of its goals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Start,
    Goal(usize),
}

impl Node {
    fn index(self) -> usize {
        match self {
            Node::Start => 0,
            Node::Goal(g) => g + 1,
        }
    }
}

/// Pairwise travel times between a start, its goals and a sink.
#[derive(Debug, Clone)]
pub struct TravelOracle {
    start: Cell,
    goals: Vec<Cell>,
    sink: Option<Cell>,
    gather_time: f64,
    /// Row-major `(K + 1)²` travel seconds; node 0 is the start.
    times: Vec<f64>,
    to_sink: Vec<f64>,
    paths: Vec<Option<GridPath>>,
    sink_paths: Vec<Option<GridPath>>,
}

impl TravelOracle {
    /// Builds the oracle from wavefronts on `grid`.
    ///
    /// Times come from the extracted grid paths rather than the wavefront
    /// values, so an agent walking the stored paths takes exactly the
    /// predicted time. Each pair is solved once and mirrored.
    pub fn build(
        grid: &OccupancyGrid,
        start: Cell,
        goals: &[Cell],
        sink: Option<Cell>,
        speed: f64,
        gather_time: f64,
    ) -> Result<Self> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(invalid("speed must be positive"));
        }
        if !(gather_time >= 0.0 && gather_time.is_finite()) {
            return Err(invalid("gather time must be non-negative"));
        }
        if !grid.is_free(start) {
            return Err(invalid(format!("start cell {start} is not free")));
        }
        for &c in goals.iter().chain(sink.iter()) {
            if !grid.is_free(c) {
                return Err(invalid(format!("cell {c} is not free")));
            }
        }
        let nodes: Vec<Cell> = std::iter::once(start).chain(goals.iter().copied()).collect();
        let n = nodes.len();
        let scale = speed * grid.cell_size();
        let mut times = vec![f64::INFINITY; n * n];
        let mut paths: Vec<Option<GridPath>> = vec![None; n * n];
        for i in 0..n {
            times[i * n + i] = 0.0;
            paths[i * n + i] = Some(GridPath::single(nodes[i], grid.cell_size()));
        }
        for i in 0..n.saturating_sub(1) {
            let targets = &nodes[i + 1..];
            let field = Eikonal::new(grid).sources(&nodes[i..=i]).stop_after(targets).solve()?;
            for j in i + 1..n {
                match extract_path(&field, nodes[j]) {
                    Ok(p) => {
                        let t = p.length / scale;
                        times[i * n + j] = t;
                        times[j * n + i] = t;
                        paths[j * n + i] = Some(p.reversed());
                        paths[i * n + j] = Some(p);
                    }
                    Err(Error::NoPath(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        let mut to_sink = vec![0.0; n];
        let mut sink_paths = vec![None; n];
        if let Some(s) = sink {
            let field = Eikonal::new(grid).sources(&[s]).stop_after(&nodes).solve()?;
            for (i, &c) in nodes.iter().enumerate() {
                match extract_path(&field, c) {
                    Ok(p) => {
                        to_sink[i] = p.length / scale;
                        sink_paths[i] = Some(p.reversed());
                    }
                    Err(Error::NoPath(_)) => to_sink[i] = f64::INFINITY,
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(TravelOracle { start, goals: goals.to_vec(), sink, gather_time, times, to_sink, paths, sink_paths })
    }

    /// Oracle over an explicit time table, without grid paths.
    ///
    /// `times` is the `(K + 1) × (K + 1)` row-major travel table with the
    /// start as node 0; `to_sink` holds one entry per node.
    pub fn from_table(times: Vec<f64>, to_sink: Vec<f64>, gather_time: f64) -> Result<Self> {
        let n = to_sink.len();
        if n == 0 || times.len() != n * n {
            return Err(invalid("time table must be square with one sink time per node"));
        }
        if times.iter().chain(&to_sink).any(|&t| t < 0.0 || t.is_nan()) {
            return Err(invalid("travel times must be non-negative"));
        }
        Ok(TravelOracle {
            start: 0,
            goals: (1..n).collect(),
            sink: None,
            gather_time,
            times,
            to_sink,
            paths: vec![None; n * n],
            sink_paths: vec![None; n],
        })
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goals(&self) -> &[Cell] {
        &self.goals
    }

    pub fn sink(&self) -> Option<Cell> {
        self.sink
    }

    pub fn gather_time(&self) -> f64 {
        self.gather_time
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    /// Travel seconds between two stops (infinite if unreachable).
    pub fn time(&self, a: Node, b: Node) -> f64 {
        self.times[a.index() * (self.goals.len() + 1) + b.index()]
    }

    /// Travel seconds from a stop to the sink (0 without a sink).
    pub fn time_to_sink(&self, a: Node) -> f64 {
        self.to_sink[a.index()]
    }

    /// Grid path between two stops, if built from a grid and reachable.
    pub fn path(&self, a: Node, b: Node) -> Option<&GridPath> {
        self.paths[a.index() * (self.goals.len() + 1) + b.index()].as_ref()
    }

    pub fn path_to_sink(&self, a: Node) -> Option<&GridPath> {
        self.sink_paths[a.index()].as_ref()
    }

    pub fn is_reachable(&self, g: usize) -> bool {
        self.time(Node::Start, Node::Goal(g)).is_finite()
    }

    /// Tour for a fixed visiting order, with all times recomputed.
    pub fn evaluate(&self, order: &[usize]) -> Tour {
        let mut visit_times = Vec::with_capacity(order.len());
        let mut at = Node::Start;
        let mut t = 0.0;
        for &g in order {
            t += self.time(at, Node::Goal(g)) + self.gather_time;
            visit_times.push(t);
            at = Node::Goal(g);
        }
        Tour { order: order.to_vec(), visit_times, total_time: t + self.time_to_sink(at) }
    }
}

/// Visiting order with cumulative times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    /// Goal indices into the oracle's goal list.
    pub order: Vec<usize>,
    /// Seconds at which gathering completes at each goal.
    pub visit_times: Vec<f64>,
    /// Seconds to finish the last goal and reach the sink.
    pub total_time: f64,
}

impl Tour {
    pub fn visited_count(&self) -> usize {
        self.order.len()
    }

    /// Seconds spent when the last goal is gathered (0 for an empty tour).
    pub fn accumulated(&self) -> f64 {
        self.visit_times.last().copied().unwrap_or(0.0)
    }
}

/// Tour construction heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Router {
    /// Exact search over all orders.
    BruteForce,
    /// Nearest neighbor improved by 2-opt.
    NearestTwoOpt,
}

/// Exact router for small instances, heuristic above [`BF_THRESHOLD`].
pub fn select_router(goal_count: usize) -> Router {
    if goal_count <= BF_THRESHOLD {
        Router::BruteForce
    } else {
        Router::NearestTwoOpt
    }
}

/// Greedy nearest-unvisited tour over every reachable goal.
pub fn nn_tour(oracle: &TravelOracle) -> Tour {
    let k = oracle.len();
    let mut left: Vec<usize> = (0..k).filter(|&g| oracle.is_reachable(g)).collect();
    let mut order = Vec::with_capacity(left.len());
    let mut at = Node::Start;
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &g)| {
                let t = oracle.time(at, Node::Goal(g));
                if t < best.1 {
                    (i, t)
                } else {
                    best
                }
            });
        let g = left.remove(pos);
        order.push(g);
        at = Node::Goal(g);
    }
    oracle.evaluate(&order)
}

/// Best-improvement 2-opt: reverses the sub-sequence giving the largest
/// reduction of the total time until none helps.
pub fn two_opt(tour: &Tour, oracle: &TravelOracle) -> Tour {
    let mut order = tour.order.clone();
    let mut best = oracle.evaluate(&order).total_time;
    let k = order.len();
    loop {
        let mut swap = None;
        for i in 0..k {
            for j in i + 1..k {
                order[i..=j].reverse();
                let t = oracle.evaluate(&order).total_time;
                order[i..=j].reverse();
                if t < best - 1e-9 && swap.map_or(true, |(_, _, bt)| t < bt) {
                    swap = Some((i, j, t));
                }
            }
        }
        match swap {
            Some((i, j, t)) => {
                order[i..=j].reverse();
                best = t;
            }
            None => break,
        }
    }
    oracle.evaluate(&order)
}

/// Exact minimum-time order over all reachable goals.
///
/// Dynamic programming over visited subsets; equivalent to enumerating
/// every permutation with the start fixed and the sink terminal.
pub fn bf_tour(oracle: &TravelOracle) -> Result<Tour> {
    let goals: Vec<usize> = (0..oracle.len()).filter(|&g| oracle.is_reachable(g)).collect();
    if goals.len() > BF_CAP {
        return Err(Error::TooManyGoals { goals: goals.len(), cap: BF_CAP });
    }
    let best = subset_search(oracle, &goals, |_, _, _| true);
    Ok(oracle.evaluate(&best))
}

/// Subset DP keeping, for every (visited set, last goal), the smallest
/// accumulated time among orders whose every step passes `accept`.
///
/// Returns the order visiting the most goals, ties broken by smaller total
/// time. `accept(accepted_before, t_accum_after, goal)` decides whether a goal may
/// be appended.
fn subset_search(oracle: &TravelOracle, goals: &[usize], accept: impl Fn(usize, f64, usize) -> bool) -> Vec<usize> {
    let k = goals.len();
    if k == 0 {
        return Vec::new();
    }
    let full = 1usize << k;
    let mut acc = vec![f64::INFINITY; full * k];
    let mut parent = vec![usize::MAX; full * k];
    for (i, &g) in goals.iter().enumerate() {
        let t = oracle.time(Node::Start, Node::Goal(g)) + oracle.gather_time();
        if accept(0, t, g) {
            acc[(1 << i) * k + i] = t;
        }
    }
    for mask in 1..full {
        let count = mask.count_ones() as usize;
        for last in 0..k {
            let t = acc[mask * k + last];
            if !t.is_finite() {
                continue;
            }
            for next in 0..k {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nt = t + oracle.time(Node::Goal(goals[last]), Node::Goal(goals[next])) + oracle.gather_time();
                let slot = (mask | 1 << next) * k + next;
                if nt < acc[slot] && accept(count, nt, goals[next]) {
                    acc[slot] = nt;
                    parent[slot] = last;
                }
            }
        }
    }
    let mut best: Option<(usize, f64, usize, usize)> = None;
    for mask in 1..full {
        let count = mask.count_ones() as usize;
        for last in 0..k {
            let t = acc[mask * k + last];
            if !t.is_finite() {
                continue;
            }
            let total = t + oracle.time_to_sink(Node::Goal(goals[last]));
            let better = match best {
                None => true,
                Some((bc, bt, _, _)) => count > bc || (count == bc && total < bt - 1e-12),
            };
            if better {
                best = Some((count, total, mask, last));
            }
        }
    }
    let Some((_, _, mut mask, mut last)) = best else { return Vec::new() };
    let mut order = Vec::new();
    loop {
        order.push(goals[last]);
        let p = parent[mask * k + last];
        mask &= !(1 << last);
        if p == usize::MAX {
            break;
        }
        last = p;
    }
    order.reverse();
    order
}

/// Rendezvous deadline for a time-window tour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    /// Seconds available before the collector closes its cycle.
    pub t_c: f64,
    /// Transmit seconds per package.
    pub t_tx_per_pkg: f64,
    /// Packages already carried from earlier goals.
    pub carried: usize,
}

impl Window {
    pub fn new(t_c: f64, t_tx_per_pkg: f64) -> Self {
        Window { t_c, t_tx_per_pkg, carried: 0 }
    }

    /// Whether a goal may be accepted: `t_c − t_tx ≥ t_accum + t_gj + t_gj−c`,
    /// where `t_accum_after` already includes travel and gathering at the goal.
    pub fn admits(&self, accepted_before: usize, t_accum_after: f64, to_sink: f64) -> bool {
        let t_tx = self.t_tx_per_pkg * (accepted_before + 1 + self.carried) as f64;
        self.t_c - t_tx >= t_accum_after + to_sink
    }
}

/// Time-window tour: goals in base order, accepted while the deadline holds.
pub fn tour_with_window(oracle: &TravelOracle, base: Router, t_c: f64, t_tx_per_pkg: f64) -> Result<Tour> {
    route_with_window(oracle, base, Window::new(t_c, t_tx_per_pkg))
}

/// [`tour_with_window`] with an explicit [`Window`].
pub fn route_with_window(oracle: &TravelOracle, base: Router, window: Window) -> Result<Tour> {
    if !(window.t_c > 0.0) {
        return Err(invalid("window length must be positive"));
    }
    match base {
        Router::BruteForce => {
            let goals: Vec<usize> = (0..oracle.len()).filter(|&g| oracle.is_reachable(g)).collect();
            if goals.len() > BF_CAP {
                return Err(Error::TooManyGoals { goals: goals.len(), cap: BF_CAP });
            }
            let order = subset_search(oracle, &goals, |before, t, g| {
                window.admits(before, t, oracle.time_to_sink(Node::Goal(g)))
            });
            Ok(oracle.evaluate(&order))
        }
        Router::NearestTwoOpt => {
            // 2-opt over every goal may open the tour with a far goal, so the
            // window-truncated nearest-neighbor prefix is refined as well
            let nn = nn_tour(oracle);
            let full = truncate(oracle, &two_opt(&nn, oracle).order, window);
            let prefix = truncate(oracle, &nn.order, window);
            let refined = truncate(oracle, &two_opt(&prefix, oracle).order, window);
            let better = |a: &Tour, b: &Tour| {
                a.order.len() > b.order.len() || (a.order.len() == b.order.len() && a.total_time < b.total_time - 1e-9)
            };
            let mut best = full;
            for t in [prefix, refined] {
                if better(&t, &best) {
                    best = t;
                }
            }
            Ok(best)
        }
    }
}

/// Longest prefix of `order` whose every goal passes the window rule.
pub fn truncate(oracle: &TravelOracle, order: &[usize], window: Window) -> Tour {
    let mut kept = Vec::new();
    let mut at = Node::Start;
    let mut t = 0.0;
    for &g in order {
        let next = t + oracle.time(at, Node::Goal(g)) + oracle.gather_time();
        if !window.admits(kept.len(), next, oracle.time_to_sink(Node::Goal(g))) {
            break;
        }
        kept.push(g);
        t = next;
        at = Node::Goal(g);
    }
    oracle.evaluate(&kept)
}

/// Full tour with the given router.
pub fn route(oracle: &TravelOracle, router: Router) -> Result<Tour> {
    match router {
        Router::BruteForce => bf_tour(oracle),
        Router::NearestTwoOpt => Ok(two_opt(&nn_tour(oracle), oracle)),
    }
}
