//! Fast Marching solver for `|∇D| F = 1` on an occupancy grid.
//!
//! The update uses the 8-neighborhood: single-neighbor updates along the
//! axes and diagonals plus the triangle update spanned by one axis neighbor
//! and an adjacent diagonal neighbor. Path steps never cut an obstacle
//! corner (both orthogonal cells must be passable for a diagonal step).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::grid::{offset, Cell, OccupancyGrid, AXIS, DIAG};

/// Lower bound applied to speeds on free cells, so arrival times stay finite.
pub const SPEED_FLOOR: f64 = 1e-6;

const NO_LABEL: u32 = u32::MAX;

/// Per-cell propagation speed `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedField {
    values: Vec<f64>,
}

impl SpeedField {
    pub fn new(grid: &OccupancyGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("speed field size does not match the grid"));
        }
        let mut any = false;
        for (c, &v) in values.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("speed at cell {c} is not a finite non-negative value")));
            }
            if grid.is_obstacle(c) {
                if v != 0.0 {
                    return Err(invalid(format!("speed must be 0 on obstacle cell {c}")));
                }
            } else if v > 0.0 {
                any = true;
            }
        }
        if !any {
            return Err(invalid("speed field is zero on every free cell"));
        }
        Ok(SpeedField { values })
    }

    /// Speed equal to the field's values on free cells. Unreached cells get 0.
    pub fn from_distance(grid: &OccupancyGrid, field: &DistanceField) -> Result<Self> {
        let values = (0..grid.len())
            .map(|c| {
                let v = field.value(c);
                if grid.is_free(c) && v.is_finite() {
                    v
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(grid, values)
    }

    /// Divides every value by the maximum.
    pub fn normalized(&self) -> Self {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        SpeedField { values: self.values.iter().map(|v| v / max).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Speed<'a> {
    /// `F = 1` on free cells.
    Uniform,
    Field(&'a SpeedField),
}

/// Arrival values of a wavefront, with the nearest-source label of each cell.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    height: usize,
    cell_size: f64,
    values: Vec<f64>,
    labels: Vec<u32>,
    sources: Vec<Cell>,
    passable: Vec<bool>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Arrival value at `c`; `f64::INFINITY` when unreached.
    pub fn value(&self, c: Cell) -> f64 {
        self.values[c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_reached(&self, c: Cell) -> bool {
        self.values[c].is_finite()
    }

    /// Index into [`sources`](Self::sources) of the front that reached `c` first.
    pub fn label(&self, c: Cell) -> Option<usize> {
        match self.labels[c] {
            NO_LABEL => None,
            l => Some(l as usize),
        }
    }

    pub fn sources(&self) -> &[Cell] {
        &self.sources
    }

    pub(crate) fn neighbor(&self, c: Cell, dx: isize, dy: isize) -> Option<Cell> {
        offset(self.width, self.height, c, dx, dy)
    }

    /// Largest finite value and the lowest cell index holding it.
    pub fn max_reached(&self) -> Option<(Cell, f64)> {
        let mut best: Option<(Cell, f64)> = None;
        for (c, &v) in self.values.iter().enumerate() {
            if v.is_finite() && best.map_or(true, |(_, b)| v > b) {
                best = Some((c, v));
            }
        }
        best
    }
}

/// Ordered cell sequence between 8-neighbors with its metric length.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    /// Accumulated length in meters.
    pub length: f64,
    pub cell_size: f64,
}

impl GridPath {
    pub fn single(c: Cell, cell_size: f64) -> Self {
        GridPath { cells: vec![c], length: 0.0, cell_size }
    }

    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn end(&self) -> Cell {
        *self.cells.last().expect("paths are never empty")
    }

    /// Traversal time in seconds at `speed` cells per second.
    pub fn time(&self, speed: f64) -> Result<f64> {
        path_time(self, speed)
    }

    /// Length from the start to each cell.
    pub fn cumulative(&self, width: usize) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.cells.len());
        let mut total = 0.0;
        acc.push(0.0);
        for w in self.cells.windows(2) {
            total += step_length(width, w[0], w[1]) * self.cell_size;
            acc.push(total);
        }
        acc
    }

    pub fn reversed(&self) -> Self {
        let mut cells = self.cells.clone();
        cells.reverse();
        GridPath { cells, length: self.length, cell_size: self.cell_size }
    }
}

pub(crate) fn step_length(width: usize, a: Cell, b: Cell) -> f64 {
    let diagonal = a % width != b % width && a / width != b / width;
    if diagonal {
        SQRT_2
    } else {
        1.0
    }
}

/// Seconds needed to traverse `path` at `speed` cells per second.
pub fn path_time(path: &GridPath, speed: f64) -> Result<f64> {
    if !(speed > 0.0) {
        return Err(invalid("speed must be positive"));
    }
    Ok(path.length / (speed * path.cell_size))
}

/// Configurable eikonal solve.
///
/// ```
/// use datagather::{fmm::Eikonal, OccupancyGrid};
/// let grid = OccupancyGrid::open(10, 1, 0).unwrap();
/// let field = Eikonal::new(&grid).sources(&[0]).solve().unwrap();
/// assert_eq!(field.value(9), 9.0);
/// ```
pub struct Eikonal<'a> {
    grid: &'a OccupancyGrid,
    sources: &'a [Cell],
    speed: Speed<'a>,
    region: Option<&'a [bool]>,
    targets: Option<&'a [Cell]>,
}

impl<'a> Eikonal<'a> {
    pub fn new(grid: &'a OccupancyGrid) -> Self {
        Eikonal { grid, sources: &[], speed: Speed::Uniform, region: None, targets: None }
    }

    pub fn sources(mut self, sources: &'a [Cell]) -> Self {
        self.sources = sources;
        self
    }

    pub fn speed(mut self, speed: Speed<'a>) -> Self {
        self.speed = speed;
        self
    }

    /// Restricts propagation to cells where `region` is true.
    pub fn region(mut self, region: &'a [bool]) -> Self {
        self.region = Some(region);
        self
    }

    /// Stops once every target cell is final. Cells not yet final are left
    /// unreached, so only values up to the last target are available.
    pub fn stop_after(mut self, targets: &'a [Cell]) -> Self {
        self.targets = Some(targets);
        self
    }

    pub fn solve(self) -> Result<DistanceField> {
        let grid = self.grid;
        if self.sources.is_empty() {
            return Err(invalid("at least one source is required"));
        }
        if let Some(r) = self.region {
            if r.len() != grid.len() {
                return Err(invalid("region mask size does not match the grid"));
            }
        }
        let passable: Vec<bool> = (0..grid.len())
            .map(|c| grid.is_free(c) && self.region.map_or(true, |r| r[c]))
            .collect();
        if !passable.iter().any(|&p| p) {
            return Err(invalid("no passable cell"));
        }
        for &s in self.sources {
            if s >= grid.len() {
                return Err(invalid(format!("source {s} is out of bounds")));
            }
            if !passable[s] {
                return Err(invalid(format!("source {s} is not a free cell")));
            }
        }
        let speed: Vec<f64> = match self.speed {
            Speed::Uniform => passable.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect(),
            Speed::Field(f) => {
                if f.values.len() != grid.len() {
                    return Err(invalid("speed field size does not match the grid"));
                }
                f.values
                    .iter()
                    .zip(&passable)
                    .map(|(&v, &p)| if p { v.max(SPEED_FLOOR) } else { 0.0 })
                    .collect()
            }
        };
        let (values, labels) = march(
            grid.width(),
            grid.height(),
            grid.cell_size(),
            &passable,
            &speed,
            self.sources,
            self.targets,
        );
        Ok(DistanceField {
            width: grid.width(),
            height: grid.height(),
            cell_size: grid.cell_size(),
            values,
            labels,
            sources: self.sources.to_vec(),
            passable,
        })
    }
}

/// Solves the eikonal equation from `sources` over the free cells of `grid`.
pub fn solve_eikonal(grid: &OccupancyGrid, sources: &[Cell], speed: Speed<'_>) -> Result<DistanceField> {
    Eikonal::new(grid).sources(sources).speed(speed).solve()
}

/// Distance from every free cell to the nearest obstacle, treating the map
/// border as an obstacle ring.
pub fn obstacle_field(grid: &OccupancyGrid) -> Result<DistanceField> {
    obstacle_field_with(grid, true)
}

/// Like [`obstacle_field`], with the border ring optional.
pub fn obstacle_field_with(grid: &OccupancyGrid, boundary_ring: bool) -> Result<DistanceField> {
    let sources: Vec<Cell> = (0..grid.len()).filter(|&c| grid.is_obstacle(c)).collect();
    distance_to_set(grid, &sources, None, boundary_ring)
}

/// Uniform distance from every free cell to the cell set `sources`, which may
/// include obstacles. `region`, when given, limits which free cells are
/// measured; cells outside it count as part of the source set.
pub(crate) fn distance_to_set(
    grid: &OccupancyGrid,
    sources: &[Cell],
    region: Option<&[bool]>,
    boundary_ring: bool,
) -> Result<DistanceField> {
    let (w, h) = (grid.width(), grid.height());
    let (pw, ph) = if boundary_ring { (w + 2, h + 2) } else { (w, h) };
    let pad = |c: Cell| -> Cell {
        if boundary_ring {
            (c / w + 1) * pw + c % w + 1
        } else {
            c
        }
    };
    let mut padded_sources: Vec<Cell> = sources.iter().map(|&c| pad(c)).collect();
    if let Some(r) = region {
        padded_sources.extend((0..grid.len()).filter(|&c| !r[c] && grid.is_free(c)).map(pad));
    }
    if boundary_ring {
        for x in 0..pw {
            padded_sources.push(x);
            padded_sources.push((ph - 1) * pw + x);
        }
        for y in 1..ph - 1 {
            padded_sources.push(y * pw);
            padded_sources.push(y * pw + pw - 1);
        }
    }
    if padded_sources.is_empty() {
        return Err(invalid("no obstacle to measure distance from"));
    }
    let passable = vec![true; pw * ph];
    let speed = vec![1.0; pw * ph];
    let (pv, _) = march(pw, ph, grid.cell_size(), &passable, &speed, &padded_sources, None);
    let values: Vec<f64> = (0..grid.len()).map(|c| pv[pad(c)]).collect();
    Ok(DistanceField {
        width: w,
        height: h,
        cell_size: grid.cell_size(),
        values,
        labels: vec![NO_LABEL; grid.len()],
        sources: sources.to_vec(),
        passable: (0..grid.len()).map(|c| grid.is_free(c)).collect(),
    })
}

/// Steepest-descent path from a source to `from`.
///
/// Descends over the 8 neighbors, always to a strictly smaller value,
/// choosing the largest drop per unit length; ties go to the lowest index.
pub fn extract_path(field: &DistanceField, from: Cell) -> Result<GridPath> {
    if from >= field.values.len() || !field.is_reached(from) {
        return Err(Error::NoPath(from));
    }
    let mut cells = vec![from];
    let mut length = 0.0;
    let mut cur = from;
    while field.values[cur] > 0.0 {
        let mut best: Option<(Cell, f64, f64)> = None;
        for (dx, dy, step) in NEIGHBORS8 {
            let Some(n) = field.neighbor(cur, dx, dy) else { continue };
            if !field.is_reached(n) || field.values[n] >= field.values[cur] {
                continue;
            }
            if dx != 0 && dy != 0 && !corner_clear(field, cur, dx, dy) {
                continue;
            }
            let slope = (field.values[cur] - field.values[n]) / step;
            let better = match best {
                None => true,
                Some((bn, _, bs)) => slope > bs || (slope == bs && n < bn),
            };
            if better {
                best = Some((n, step, slope));
            }
        }
        let Some((n, step, _)) = best else {
            return Err(Error::NoPath(from));
        };
        length += step * field.cell_size;
        cells.push(n);
        cur = n;
    }
    cells.reverse();
    Ok(GridPath { cells, length, cell_size: field.cell_size })
}

const NEIGHBORS8: [(isize, isize, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT_2),
    (1, -1, SQRT_2),
    (-1, 1, SQRT_2),
    (-1, -1, SQRT_2),
];

fn corner_clear(field: &DistanceField, c: Cell, dx: isize, dy: isize) -> bool {
    let a = field.neighbor(c, dx, 0);
    let b = field.neighbor(c, 0, dy);
    matches!((a, b), (Some(a), Some(b)) if field.passable[a] && field.passable[b])
}

#[derive(Clone, Copy, PartialEq)]
struct Trial {
    t: f64,
    c: Cell,
}

impl Eq for Trial {}

impl Ord for Trial {
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.c.cmp(&self.c))
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Stencil<'a> {
    width: usize,
    height: usize,
    h: f64,
    passable: &'a [bool],
    speed: &'a [f64],
}

impl Stencil<'_> {
    fn at(&self, c: Cell, dx: isize, dy: isize) -> Option<Cell> {
        offset(self.width, self.height, c, dx, dy).filter(|&n| self.passable[n])
    }

    /// Best upwind value at `c` from the final neighbor values, with the
    /// label it inherits. `known` marks neighbors that may be used.
    fn update(&self, c: Cell, values: &[f64], labels: &[u32], known: &[bool]) -> (f64, u32) {
        let step = self.h / self.speed[c];
        let mut best = (f64::INFINITY, NO_LABEL);
        let offer = |t: f64, l: u32, best: &mut (f64, u32)| {
            if t < best.0 || (t == best.0 && l < best.1) {
                *best = (t, l);
            }
        };
        for &(dx, dy) in &AXIS {
            let Some(a) = self.at(c, dx, dy) else { continue };
            if !known[a] {
                continue;
            }
            let ta = values[a];
            offer(ta + step, labels[a], &mut best);
            // triangles spanned by this axis neighbor and its two diagonals
            let diagonals = if dx != 0 { [(dx, 1), (dx, -1)] } else { [(1, dy), (-1, dy)] };
            for (ddx, ddy) in diagonals {
                let Some(d) = self.at(c, ddx, ddy) else { continue };
                if !known[d] {
                    continue;
                }
                // Past the diagonal edge the characteristic runs along c-d;
                // clamping there keeps the update monotone in both values.
                let diff = ta - values[d];
                if diff * diff * 2.0 <= step * step {
                    if diff >= 0.0 {
                        offer(ta + (step * step - diff * diff).sqrt(), labels[a], &mut best);
                    }
                } else if diff > 0.0 {
                    if self.at(c, ddx - dx, ddy - dy).is_some() {
                        offer(values[d] + step * SQRT_2, labels[d], &mut best);
                    } else {
                        // a blocked corner forbids the c-d diagonal; hold the
                        // edge value, which still descends through a
                        offer(ta + step * FRAC_1_SQRT_2, labels[a], &mut best);
                    }
                }
            }
        }
        for &(dx, dy) in &DIAG {
            let Some(d) = self.at(c, dx, dy) else { continue };
            if !known[d] || self.at(c, dx, 0).is_none() || self.at(c, 0, dy).is_none() {
                continue;
            }
            offer(values[d] + step * SQRT_2, labels[d], &mut best);
        }
        best
    }
}

thread_local! {
    static MARCHES: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

/// Number of wavefront propagations run so far on the current thread.
pub fn march_count() -> u64 {
    MARCHES.with(|m| m.get())
}

fn march(
    width: usize,
    height: usize,
    h: f64,
    passable: &[bool],
    speed: &[f64],
    sources: &[Cell],
    targets: Option<&[Cell]>,
) -> (Vec<f64>, Vec<u32>) {
    MARCHES.with(|m| m.set(m.get() + 1));
    let n = width * height;
    let stencil = Stencil { width, height, h, passable, speed };
    let mut values = vec![f64::INFINITY; n];
    let mut labels = vec![NO_LABEL; n];
    let mut known = vec![false; n];
    let mut heap = BinaryHeap::new();
    for (i, &s) in sources.iter().enumerate() {
        if labels[s] == NO_LABEL {
            values[s] = 0.0;
            labels[s] = i as u32;
            heap.push(Trial { t: 0.0, c: s });
        }
    }
    let mut is_target = targets.map(|ts| {
        let mut mask = vec![false; n];
        for &t in ts {
            if t < n {
                mask[t] = true;
            }
        }
        mask
    });
    let mut remaining = is_target.as_ref().map(|m| m.iter().filter(|&&b| b).count());

    while let Some(Trial { t, c }) = heap.pop() {
        if known[c] || t > values[c] {
            continue;
        }
        known[c] = true;
        if let (Some(mask), Some(left)) = (is_target.as_mut(), remaining.as_mut()) {
            if mask[c] {
                mask[c] = false;
                *left -= 1;
                if *left == 0 {
                    break;
                }
            }
        }
        for (dx, dy, _) in NEIGHBORS8 {
            let Some(nb) = stencil.at(c, dx, dy) else { continue };
            if known[nb] {
                continue;
            }
            let (tn, ln) = stencil.update(nb, &values, &labels, &known);
            if tn < values[nb] || (tn == values[nb] && ln < labels[nb]) {
                values[nb] = tn;
                labels[nb] = ln;
                heap.push(Trial { t: tn, c: nb });
            }
        }
    }
    for c in 0..n {
        if !known[c] {
            values[c] = f64::INFINITY;
            labels[c] = NO_LABEL;
        }
    }
    (values, labels)
}
