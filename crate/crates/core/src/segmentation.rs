//! Area partition of the free space into worker segments.
//!
//! Three methods are provided, all driven by wavefront propagation:
//!
//! - **BAP** grows regions of roughly `A / n` cells outward from the OC, so
//!   segment areas come out balanced.
//! - **PAP** seeds one centroid per open area (maxima of the obstacle
//!   distance) and iteratively moves each centroid toward the farthest cell
//!   of its segment until the configuration repeats.
//! - **RAP** runs the same iteration, but the wavefronts travel at a speed
//!   proportional to the obstacle distance, so they rush through rooms and
//!   stall at doors.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fmm::{distance_to_set, extract_path, DistanceField, Eikonal, Speed, SpeedField};
use crate::grid::{Cell, OccupancyGrid};

/// Safety cap on the centroid iteration.
pub const MAX_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bap,
    Pap,
    Rap,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Bap, Method::Pap, Method::Rap];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bap => "bap",
            Method::Pap => "pap",
            Method::Rap => "rap",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bap" => Ok(Method::Bap),
            "pap" => Ok(Method::Pap),
            "rap" => Ok(Method::Rap),
            other => Err(format!("unknown partition method '{other}'")),
        }
    }
}

/// Segment label of every free cell, with one centroid per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    labels: Vec<Option<usize>>,
    centroids: Vec<Cell>,
    areas: Vec<usize>,
    method: Method,
    iterations: usize,
}

impl Partition {
    pub fn new(labels: Vec<Option<usize>>, centroids: Vec<Cell>, method: Method) -> Self {
        let mut areas = vec![0; centroids.len()];
        for l in labels.iter().flatten() {
            areas[*l] += 1;
        }
        Partition { labels, centroids, areas, method, iterations: 0 }
    }

    fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn label(&self, c: Cell) -> Option<usize> {
        self.labels[c]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn centroids(&self) -> &[Cell] {
        &self.centroids
    }

    pub fn areas(&self) -> &[usize] {
        &self.areas
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Centroid iterations performed while building the partition.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn cells_of(&self, segment: usize) -> Vec<Cell> {
        (0..self.labels.len()).filter(|&c| self.labels[c] == Some(segment)).collect()
    }

    pub fn mask_of(&self, segment: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l == Some(segment)).collect()
    }

    /// Sorted, de-duplicated 4-adjacency between segments.
    pub fn adjacency(&self, grid: &OccupancyGrid) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for c in 0..self.labels.len() {
            let Some(a) = self.labels[c] else { continue };
            for n in grid.neighbors4(c) {
                if let Some(b) = self.labels[n] {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Checks coverage, area bookkeeping, centroid containment and 4-connectivity.
    pub fn validate(&self, grid: &OccupancyGrid) -> Result<()> {
        if self.labels.len() != grid.len() {
            return Err(invalid("label raster does not match the grid"));
        }
        for c in 0..grid.len() {
            match (grid.is_free(c), self.labels[c]) {
                (true, None) => return Err(invalid(format!("free cell {c} is unlabeled"))),
                (false, Some(_)) => return Err(invalid(format!("obstacle cell {c} is labeled"))),
                (_, Some(l)) if l >= self.len() => {
                    return Err(invalid(format!("cell {c} has label {l} out of range")))
                }
                _ => {}
            }
        }
        if self.areas.iter().sum::<usize>() != grid.free_count() {
            return Err(invalid("segment areas do not sum to the free area"));
        }
        for (s, &centroid) in self.centroids.iter().enumerate() {
            if self.labels[centroid] != Some(s) {
                return Err(invalid(format!("centroid of segment {s} lies outside it")));
            }
            let reached = flood4(grid, centroid, |c| self.labels[c] == Some(s)).len();
            if reached != self.areas[s] {
                return Err(invalid(format!(
                    "segment {s} is not 4-connected ({reached} of {} cells reachable)",
                    self.areas[s]
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn flood4(grid: &OccupancyGrid, start: Cell, inside: impl Fn(Cell) -> bool) -> Vec<Cell> {
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(c) = queue.pop_front() {
        out.push(c);
        for n in grid.neighbors4(c) {
            if !seen[n] && inside(n) {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    out
}

fn ensure_connected(grid: &OccupancyGrid) -> Result<()> {
    let reached = flood4(grid, grid.oc(), |_| true).len();
    if reached != grid.free_count() {
        return Err(invalid(format!(
            "free space is not connected: {} of {} free cells reachable from the OC",
            reached,
            grid.free_count()
        )));
    }
    Ok(())
}

fn check_count(grid: &OccupancyGrid, n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("at least one segment is required"));
    }
    if n > grid.free_count() {
        return Err(invalid(format!(
            "{n} segments requested but only {} free cells",
            grid.free_count()
        )));
    }
    ensure_connected(grid)
}

/// Partition with the requested method.
pub fn segment(grid: &OccupancyGrid, method: Method, n_segments: usize) -> Result<Partition> {
    match method {
        Method::Bap => segment_bap(grid, n_segments),
        Method::Pap => segment_pap(grid, n_segments),
        Method::Rap => segment_rap(grid, n_segments),
    }
}

/// Picks `n` centroids at successive maxima of the obstacle distance.
///
/// After each pick every cell within a disk of radius equal to the picked
/// value is suppressed. When every cell is suppressed before `n` picks, the
/// suppression is cleared (earlier picks stay excluded).
pub fn init_centroids(grid: &OccupancyGrid, obstacle_f: &DistanceField, n: usize) -> Vec<Cell> {
    let candidates: Vec<Cell> = grid.free_cells().filter(|&c| obstacle_f.is_reached(c)).collect();
    pick_maxima(grid, &candidates, |c| obstacle_f.value(c), n)
}

fn pick_maxima(grid: &OccupancyGrid, candidates: &[Cell], value: impl Fn(Cell) -> f64, n: usize) -> Vec<Cell> {
    let mut picked: Vec<Cell> = Vec::with_capacity(n);
    let mut suppressed = vec![false; grid.len()];
    let mut taken = vec![false; grid.len()];
    while picked.len() < n.min(candidates.len()) {
        let best = candidates
            .iter()
            .copied()
            .filter(|&c| !suppressed[c] && !taken[c])
            .fold(None, |best: Option<(Cell, f64)>, c| {
                let v = value(c);
                match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((c, v)),
                }
            });
        let Some((c, v)) = best else {
            suppressed.iter_mut().for_each(|s| *s = false);
            continue;
        };
        picked.push(c);
        taken[c] = true;
        let radius = v / grid.cell_size();
        let center = grid.center(c);
        let r = radius.ceil() as isize;
        let (cx, cy) = grid.coords(c);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (cx as isize + dx, cy as isize + dy);
                if x < 0 || y < 0 || x >= grid.width() as isize || y >= grid.height() as isize {
                    continue;
                }
                let cell = grid.index(x as usize, y as usize);
                if grid.center(cell).dist(center) <= radius + 1e-9 {
                    suppressed[cell] = true;
                }
            }
        }
    }
    picked
}

/// Labels from a multi-source field, adjusted so each segment is 4-connected
/// to its own source.
///
/// Cells whose label was inherited across a diagonal from a different
/// segment adopt the label of their lowest-valued anchored 4-neighbor.
pub(crate) fn connected_labels(grid: &OccupancyGrid, field: &DistanceField) -> Vec<Option<usize>> {
    let mut labels: Vec<Option<usize>> = (0..grid.len()).map(|c| field.label(c)).collect();
    let mut anchored = vec![false; grid.len()];
    for (i, &s) in field.sources().iter().enumerate() {
        if labels[s] != Some(i) || anchored[s] {
            continue;
        }
        for c in flood4(grid, s, |c| labels[c] == Some(i)) {
            anchored[c] = true;
        }
    }
    let mut orphans: Vec<Cell> = (0..grid.len()).filter(|&c| labels[c].is_some() && !anchored[c]).collect();
    orphans.sort_by(|&a, &b| field.value(a).total_cmp(&field.value(b)).then(a.cmp(&b)));
    while !orphans.is_empty() {
        let mut progress = false;
        let mut rest = Vec::new();
        for &c in &orphans {
            let best = grid
                .neighbors4(c)
                .filter(|&n| anchored[n])
                .min_by(|&a, &b| field.value(a).total_cmp(&field.value(b)).then(a.cmp(&b)));
            match best {
                Some(n) => {
                    labels[c] = labels[n];
                    anchored[c] = true;
                    progress = true;
                }
                None => rest.push(c),
            }
        }
        if !progress {
            for c in rest {
                labels[c] = None;
            }
            break;
        }
        orphans = rest;
    }
    labels
}

/// Nearest-centroid labels under `speed`, with the same connectivity repair
/// the partitioners apply.
pub fn label_by_nearest(grid: &OccupancyGrid, centroids: &[Cell], speed: Speed<'_>) -> Result<Vec<Option<usize>>> {
    let field = crate::fmm::solve_eikonal(grid, centroids, speed)?;
    Ok(connected_labels(grid, &field))
}

/// Outcome of the centroid iteration.
#[derive(Debug, Clone)]
pub(crate) struct IterationResult {
    pub labels: Vec<Option<usize>>,
    pub centroids: Vec<Cell>,
    pub iterations: usize,
}

/// Centroid iteration over an optional sub-region of the grid.
pub(crate) fn iterate_centroids(
    grid: &OccupancyGrid,
    region: Option<&[bool]>,
    speed: Speed<'_>,
    mut centroids: Vec<Cell>,
    max_iters: usize,
) -> Result<IterationResult> {
    if centroids.is_empty() {
        return Err(invalid("at least one centroid is required"));
    }
    let distinct: HashSet<Cell> = centroids.iter().copied().collect();
    if distinct.len() != centroids.len() {
        return Err(invalid("centroids must be distinct"));
    }
    let mut seen: HashSet<Vec<Cell>> = HashSet::new();
    let mut iterations = 0;
    loop {
        let mut solve = Eikonal::new(grid).sources(&centroids).speed(speed);
        if let Some(r) = region {
            solve = solve.region(r);
        }
        let field = solve.solve()?;
        let labels = connected_labels(grid, &field);
        let mut key = centroids.clone();
        key.sort_unstable();
        if !seen.insert(key) || iterations >= max_iters {
            return Ok(IterationResult { labels, centroids, iterations });
        }
        iterations += 1;

        let k = centroids.len();
        let mut farthest: Vec<Option<(Cell, f64)>> = vec![None; k];
        for c in 0..grid.len() {
            let Some(l) = labels[c] else { continue };
            let v = field.value(c);
            if farthest[l].map_or(true, |(_, bv)| v > bv) {
                farthest[l] = Some((c, v));
            }
        }
        let mut next = centroids.clone();
        for s in 0..k {
            let Some((target, _)) = farthest[s] else { continue };
            let path = extract_path(&field, target)?;
            if path.start() != centroids[s] || path.cells.len() < 2 {
                continue;
            }
            let step = path.cells[1];
            if !next.contains(&step) {
                next[s] = step;
            }
        }
        centroids = next;
    }
}

/// Lloyd-style iteration: partition by nearest centroid under `costmap`,
/// move each centroid one cell toward the farthest cell of its segment, and
/// stop when a centroid configuration repeats (or after [`MAX_ITERS`]).
pub fn iterative_partition(
    centroids: &[Cell],
    costmap: Speed<'_>,
    grid: &OccupancyGrid,
) -> Result<(Partition, Vec<Cell>)> {
    let method = match costmap {
        Speed::Uniform => Method::Pap,
        Speed::Field(_) => Method::Rap,
    };
    let run = iterate_centroids(grid, None, costmap, centroids.to_vec(), MAX_ITERS)?;
    let partition = Partition::new(run.labels, run.centroids.clone(), method).with_iterations(run.iterations);
    Ok((partition, run.centroids))
}

/// Polygonal partition: obstacle-distance maxima, then uniform iteration.
pub fn segment_pap(grid: &OccupancyGrid, n_segments: usize) -> Result<Partition> {
    check_count(grid, n_segments)?;
    let obstacle_f = crate::fmm::obstacle_field(grid)?;
    let seeds = init_centroids(grid, &obstacle_f, n_segments);
    let (p, _) = iterative_partition(&seeds, Speed::Uniform, grid)?;
    Ok(p)
}

/// Room-like partition: like PAP, but fronts move at the normalized
/// obstacle distance.
pub fn segment_rap(grid: &OccupancyGrid, n_segments: usize) -> Result<Partition> {
    check_count(grid, n_segments)?;
    let obstacle_f = crate::fmm::obstacle_field(grid)?;
    let seeds = init_centroids(grid, &obstacle_f, n_segments);
    let speed = SpeedField::from_distance(grid, &obstacle_f)?.normalized();
    let (p, _) = iterative_partition(&seeds, Speed::Field(&speed), grid)?;
    Ok(p)
}

/// Places `n` points inside `region` with the polygonal procedure restricted
/// to that region. Returns the final centroids.
pub(crate) fn spread_points(grid: &OccupancyGrid, region: &[bool], n: usize) -> Result<Vec<Cell>> {
    let cells: Vec<Cell> = (0..grid.len()).filter(|&c| region[c] && grid.is_free(c)).collect();
    let n = n.min(cells.len());
    if n == 0 {
        return Ok(Vec::new());
    }
    let obstacles: Vec<Cell> = (0..grid.len()).filter(|&c| grid.is_obstacle(c)).collect();
    let inner = distance_to_set(grid, &obstacles, Some(region), true)?;
    let seeds = pick_maxima(grid, &cells, |c| inner.value(c), n);
    Ok(iterate_centroids(grid, Some(region), Speed::Uniform, seeds, MAX_ITERS)?.centroids)
}

/// Balanced partition grown outward from the OC.
pub fn segment_bap(grid: &OccupancyGrid, n_segments: usize) -> Result<Partition> {
    check_count(grid, n_segments)?;
    let n = n_segments;
    let total = grid.free_count();
    let a_opt = total as f64 / n as f64;
    let quota = (a_opt.round() as usize).max(1);
    let d_oc = crate::fmm::solve_eikonal(grid, &[grid.oc()], Speed::Uniform)?;

    let mut labels: Vec<Option<usize>> = vec![None; grid.len()];
    let mut areas: Vec<usize> = Vec::new();
    let mut unclassified = total;
    let mut iterations = 0;
    while unclassified > 0 {
        iterations += 1;
        let origin = grid
            .free_cells()
            .filter(|&c| labels[c].is_none())
            .min_by(|&a, &b| d_oc.value(a).total_cmp(&d_oc.value(b)).then(a.cmp(&b)))
            .expect("an unclassified cell exists");
        let open: Vec<bool> = (0..grid.len()).map(|c| grid.is_free(c) && labels[c].is_none()).collect();
        let wave = Eikonal::new(grid).sources(&[origin]).region(&open).solve()?;
        let mut grown: Vec<Cell> = (0..grid.len()).filter(|&c| wave.is_reached(c)).collect();
        grown.sort_by(|&a, &b| wave.value(a).total_cmp(&wave.value(b)).then(a.cmp(&b)));
        grown.truncate(quota);

        let mut neighbors: Vec<usize> = grown
            .iter()
            .flat_map(|&c| grid.neighbors4(c).filter_map(|nb| labels[nb]).collect::<Vec<_>>())
            .collect();
        neighbors.sort_unstable();
        neighbors.dedup();
        let big_enough = grown.len() as f64 >= a_opt / 2.0;
        let id = if (big_enough && areas.len() < n) || neighbors.is_empty() {
            areas.push(0);
            areas.len() - 1
        } else {
            *neighbors
                .iter()
                .min_by_key(|&&s| (areas[s], s))
                .expect("non-empty")
        };
        for &c in &grown {
            labels[c] = Some(id);
        }
        areas[id] += grown.len();
        unclassified -= grown.len();
    }

    // halve the biggest segments until the count is met
    while areas.len() < n {
        let big = (0..areas.len()).max_by_key(|&s| (areas[s], std::cmp::Reverse(s))).expect("non-empty");
        let region: Vec<bool> = labels.iter().map(|&l| l == Some(big)).collect();
        let seeds = spread_seeds(grid, &region, 2)?;
        let run = iterate_centroids(grid, Some(&region), Speed::Uniform, seeds, MAX_ITERS)?;
        // one seed field and one final solve on top of the moves
        iterations += run.iterations + 2;
        let new_id = areas.len();
        areas.push(0);
        areas[big] = 0;
        for c in 0..grid.len() {
            if region[c] {
                let id = if run.labels[c] == Some(1) { new_id } else { big };
                labels[c] = Some(id);
                areas[id] += 1;
            }
        }
    }

    let centroids = (0..areas.len()).map(|s| central_cell(grid, &labels, s)).collect();
    Ok(Partition::new(labels, centroids, Method::Bap).with_iterations(iterations))
}

fn spread_seeds(grid: &OccupancyGrid, region: &[bool], n: usize) -> Result<Vec<Cell>> {
    let cells: Vec<Cell> = (0..grid.len()).filter(|&c| region[c]).collect();
    let obstacles: Vec<Cell> = (0..grid.len()).filter(|&c| grid.is_obstacle(c)).collect();
    let inner = distance_to_set(grid, &obstacles, Some(region), true)?;
    Ok(pick_maxima(grid, &cells, |c| inner.value(c), n))
}

/// Cell of segment `s` closest to the segment's mean position.
pub(crate) fn central_cell(grid: &OccupancyGrid, labels: &[Option<usize>], s: usize) -> Cell {
    let cells: Vec<Cell> = (0..grid.len()).filter(|&c| labels[c] == Some(s)).collect();
    let (mut mx, mut my) = (0.0, 0.0);
    for &c in &cells {
        let p = grid.center(c);
        mx += p.x;
        my += p.y;
    }
    let mean = crate::grid::Point::new(mx / cells.len() as f64, my / cells.len() as f64);
    cells
        .into_iter()
        .min_by(|&a, &b| grid.center(a).dist(mean).total_cmp(&grid.center(b).dist(mean)).then(a.cmp(&b)))
        .expect("segments are non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fmm::obstacle_field;

    fn two_rooms() -> OccupancyGrid {
        // two 12x12 rooms joined by a 1-cell door in a 1-cell wall
        let (w, h) = (25, 12);
        let mut obs = vec![false; w * h];
        for y in 0..h {
            if y != 6 {
                obs[y * w + 12] = true;
            }
        }
        OccupancyGrid::new(w, h, obs, 0).unwrap()
    }

    #[test]
    fn single_segment_is_everything() {
        let g = two_rooms();
        for m in Method::ALL {
            let p = segment(&g, m, 1).unwrap();
            p.validate(&g).unwrap();
            assert_eq!(p.areas(), &[g.free_count()]);
        }
    }

    #[test]
    fn too_many_segments_is_invalid() {
        let g = OccupancyGrid::open(3, 3, 4).unwrap();
        for m in Method::ALL {
            assert!(segment(&g, m, 10).is_err());
            assert!(segment(&g, m, 0).is_err());
        }
    }

    #[test]
    fn disconnected_free_space_is_rejected() {
        let (w, h) = (7, 3);
        let mut obs = vec![false; w * h];
        for y in 0..h {
            obs[y * w + 3] = true;
        }
        let g = OccupancyGrid::new(w, h, obs, 0).unwrap();
        assert!(segment_bap(&g, 2).is_err());
    }

    #[test]
    fn one_centroid_in_square_room_is_central() {
        let g = OccupancyGrid::open(11, 11, 0).unwrap();
        let f = obstacle_field(&g).unwrap();
        let c = init_centroids(&g, &f, 1);
        let (x, y) = g.coords(c[0]);
        assert!(x.abs_diff(5) <= 1 && y.abs_diff(5) <= 1);
    }

    #[test]
    fn two_centroids_land_in_distinct_rooms() {
        let g = two_rooms();
        let f = obstacle_field(&g).unwrap();
        let c = init_centroids(&g, &f, 2);
        let sides: Vec<bool> = c.iter().map(|&c| g.coords(c).0 < 12).collect();
        assert_ne!(sides[0], sides[1]);
    }

    #[test]
    fn corridor_centroids_are_apart() {
        let g = OccupancyGrid::open(20, 1, 0).unwrap();
        let f = obstacle_field(&g).unwrap();
        let c = init_centroids(&g, &f, 2);
        assert_eq!(c.len(), 2);
        assert_ne!(c[0], c[1]);
        assert!(c.iter().all(|&c| g.is_free(c)));
    }

    #[test]
    fn exhausted_suppression_still_yields_n_centroids() {
        let g = OccupancyGrid::open(5, 5, 0).unwrap();
        let f = obstacle_field(&g).unwrap();
        let c = init_centroids(&g, &f, 20);
        assert_eq!(c.len(), 20);
        let distinct: HashSet<_> = c.iter().collect();
        assert_eq!(distinct.len(), 20);
    }

    #[test]
    fn duplicate_centroids_rejected() {
        let g = OccupancyGrid::open(5, 5, 0).unwrap();
        assert!(iterative_partition(&[3, 3], Speed::Uniform, &g).is_err());
    }

    #[test]
    fn two_centroids_split_rectangle_at_midline() {
        let (w, h) = (30, 15);
        let g = OccupancyGrid::open(w, h, 0).unwrap();
        let (p, _) = iterative_partition(&[g.index(3, 3), g.index(10, 12)], Speed::Uniform, &g).unwrap();
        p.validate(&g).unwrap();
        let a = p.areas();
        let diff = a[0].abs_diff(a[1]) as f64 / a[0].max(a[1]) as f64;
        assert!(diff <= 0.10, "areas {a:?}");
        // boundary column per row within 2 cells of the midline
        for y in 0..h {
            let row: Vec<Option<usize>> = (0..w).map(|x| p.label(g.index(x, y))).collect();
            let switch = (1..w).find(|&x| row[x] != row[x - 1]).expect("boundary in every row");
            assert!((switch as f64 - w as f64 / 2.0).abs() <= 2.0, "row {y} switches at {switch}");
        }
    }

    #[test]
    fn single_centroid_converges() {
        let g = OccupancyGrid::open(15, 15, 0).unwrap();
        let (p, c) = iterative_partition(&[0], Speed::Uniform, &g).unwrap();
        assert_eq!(p.areas(), &[225]);
        let (x, y) = g.coords(c[0]);
        assert!(x.abs_diff(7) <= 1 && y.abs_diff(7) <= 1, "drifted to ({x},{y})");
    }

    #[test]
    fn iteration_is_deterministic() {
        let g = two_rooms();
        let a = segment_pap(&g, 3).unwrap();
        let b = segment_pap(&g, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn final_labels_are_nearest_centroid_labels() {
        let g = two_rooms();
        let (p, c) = iterative_partition(&[g.index(2, 2), g.index(20, 9), g.index(5, 10)], Speed::Uniform, &g).unwrap();
        let field = crate::fmm::solve_eikonal(&g, &c, Speed::Uniform).unwrap();
        assert_eq!(connected_labels(&g, &field), p.labels());
    }

    #[test]
    fn rap_boundary_goes_through_the_door() {
        let g = two_rooms();
        let p = segment_rap(&g, 2).unwrap();
        p.validate(&g).unwrap();
        let left = p.label(g.index(3, 3)).unwrap();
        let right = p.label(g.index(20, 3)).unwrap();
        assert_ne!(left, right);
        for c in g.free_cells() {
            let x = g.coords(c).0;
            if x < 11 {
                assert_eq!(p.label(c), Some(left));
            }
            if x > 13 {
                assert_eq!(p.label(c), Some(right));
            }
        }
    }

    #[test]
    fn bap_four_segments_are_balanced() {
        let g = OccupancyGrid::open(40, 40, 0).unwrap();
        let p = segment_bap(&g, 4).unwrap();
        p.validate(&g).unwrap();
        assert_eq!(p.len(), 4);
        let opt = 1600.0 / 4.0;
        for &a in p.areas() {
            assert!((0.75 * opt..=1.25 * opt).contains(&(a as f64)), "areas {:?}", p.areas());
        }
    }

    #[test]
    fn bap_splits_when_short_of_segments() {
        // quota regions along a thin corridor merge into neighbors; the
        // result must still reach the requested count
        let g = OccupancyGrid::open(9, 2, 0).unwrap();
        for n in 1..=18 {
            let p = segment_bap(&g, n).unwrap();
            assert_eq!(p.len(), n);
            p.validate(&g).unwrap();
        }
    }

    #[test]
    fn pap_quadrants_on_empty_square() {
        let g = OccupancyGrid::open(30, 30, 0).unwrap();
        let p = segment_pap(&g, 4).unwrap();
        p.validate(&g).unwrap();
        for &a in p.areas() {
            assert!((a as f64 - 225.0).abs() <= 0.15 * 225.0, "areas {:?}", p.areas());
        }
    }

    #[test]
    fn spread_points_stay_inside_region() {
        let g = two_rooms();
        let region: Vec<bool> = (0..g.len()).map(|c| g.coords(c).0 < 12).collect();
        let pts = spread_points(&g, &region, 4).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|&c| region[c] && g.is_free(c)));
    }
}
