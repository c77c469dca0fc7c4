//! Occupancy grid, continuous points in cell units, and line-of-sight tests.
//!
//! Cells are addressed by their linear index `y * width + x`. The center of
//! cell `(x, y)` sits at the continuous point `(x, y)`, so a cell covers the
//! square `[x - 0.5, x + 0.5) × [y - 0.5, y + 0.5)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Linear cell index.
pub type Cell = usize;

/// 4-neighborhood offsets, in a fixed order.
pub(crate) const AXIS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
/// Diagonal offsets, in a fixed order.
pub(crate) const DIAG: [(isize, isize); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

/// A position in continuous cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Rectangular map of free and obstacle cells plus the operation center.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    obstacle: Vec<bool>,
    oc: Cell,
    cell_size: f64,
}

impl OccupancyGrid {
    /// Builds a grid from a row-major obstacle mask.
    pub fn new(width: usize, height: usize, obstacle: Vec<bool>, oc: Cell) -> Result<Self> {
        Self::with_cell_size(width, height, obstacle, oc, 1.0)
    }

    pub fn with_cell_size(
        width: usize,
        height: usize,
        obstacle: Vec<bool>,
        oc: Cell,
        cell_size: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("grid dimensions must be positive"));
        }
        if obstacle.len() != width * height {
            return Err(invalid(format!(
                "obstacle mask has {} cells, expected {}",
                obstacle.len(),
                width * height
            )));
        }
        if oc >= obstacle.len() {
            return Err(invalid(format!("operation center {oc} is out of bounds")));
        }
        if obstacle[oc] {
            return Err(invalid("operation center must be a free cell"));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(invalid("cell size must be positive"));
        }
        Ok(OccupancyGrid { width, height, obstacle, oc, cell_size })
    }

    /// An obstacle-free grid with the operation center at `oc`.
    pub fn open(width: usize, height: usize, oc: Cell) -> Result<Self> {
        Self::new(width, height, vec![false; width * height], oc)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.obstacle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacle.is_empty()
    }

    pub fn oc(&self) -> Cell {
        self.oc
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn obstacles(&self) -> &[bool] {
        &self.obstacle
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c < self.obstacle.len() && !self.obstacle[c]
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.obstacle[c]
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).filter(move |&c| !self.obstacle[c])
    }

    pub fn free_count(&self) -> usize {
        self.obstacle.iter().filter(|&&o| !o).count()
    }

    pub fn index(&self, x: usize, y: usize) -> Cell {
        y * self.width + x
    }

    pub fn coords(&self, c: Cell) -> (usize, usize) {
        (c % self.width, c / self.width)
    }

    pub fn center(&self, c: Cell) -> Point {
        let (x, y) = self.coords(c);
        Point::new(x as f64, y as f64)
    }

    /// The cell containing `p`, if it is inside the grid.
    pub fn cell_at(&self, p: Point) -> Option<Cell> {
        let x = (p.x + 0.5).floor();
        let y = (p.y + 0.5).floor();
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        Some(self.index(x as usize, y as usize))
    }

    pub(crate) fn offset(&self, c: Cell, dx: isize, dy: isize) -> Option<Cell> {
        offset(self.width, self.height, c, dx, dy)
    }

    /// Free 4-neighbors of `c`.
    pub fn neighbors4(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        AXIS.iter()
            .filter_map(move |&(dx, dy)| self.offset(c, dx, dy))
            .filter(move |&n| !self.obstacle[n])
    }

    /// Same grid with every cell outside `keep` marked as an obstacle.
    ///
    /// The operation center is kept only if it lies in `keep`; otherwise the
    /// first kept cell takes its place so the grid stays valid.
    pub fn restricted(&self, keep: &[bool]) -> Result<Self> {
        let obstacle: Vec<bool> = self
            .obstacle
            .iter()
            .zip(keep)
            .map(|(&o, &k)| o || !k)
            .collect();
        let oc = if !obstacle[self.oc] {
            self.oc
        } else {
            obstacle
                .iter()
                .position(|&o| !o)
                .ok_or_else(|| invalid("restriction leaves no free cell"))?
        };
        Self::with_cell_size(self.width, self.height, obstacle, oc, self.cell_size)
    }
}

pub(crate) fn offset(width: usize, height: usize, c: Cell, dx: isize, dy: isize) -> Option<Cell> {
    let x = (c % width) as isize + dx;
    let y = (c / width) as isize + dy;
    if x < 0 || y < 0 || x >= width as isize || y >= height as isize {
        None
    } else {
        Some(y as usize * width + x as usize)
    }
}

/// Every cell touched by the segment between the centers of `a` and `b`.
///
/// Supercover traversal: when the segment passes exactly through a cell
/// corner, both side cells are included.
pub fn supercover(grid: &OccupancyGrid, a: Cell, b: Cell) -> Vec<Cell> {
    let (x0, y0) = grid.coords(a);
    let (x1, y1) = grid.coords(b);
    let (mut x, mut y) = (x0 as isize, y0 as isize);
    let dx = x1 as isize - x;
    let dy = y1 as isize - y;
    let (nx, ny) = (dx.abs(), dy.abs());
    let (sx, sy) = (dx.signum(), dy.signum());
    let w = grid.width();
    let mut out = vec![a];
    let (mut ix, mut iy) = (0isize, 0isize);
    while ix < nx || iy < ny {
        let decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx;
        if decision == 0 {
            out.push((y as usize) * w + (x + sx) as usize);
            out.push(((y + sy) as usize) * w + x as usize);
            x += sx;
            y += sy;
            ix += 1;
            iy += 1;
        } else if decision < 0 {
            x += sx;
            ix += 1;
        } else {
            y += sy;
            iy += 1;
        }
        out.push((y as usize) * w + x as usize);
    }
    out
}

/// True iff the supercover of the segment between two cell centers crosses
/// no obstacle cell.
pub fn line_of_sight(grid: &OccupancyGrid, a: Cell, b: Cell) -> bool {
    supercover(grid, a, b).into_iter().all(|c| !grid.is_obstacle(c))
}
