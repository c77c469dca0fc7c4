//! ASCII scenario rasters: `#` obstacle, `.` free, `O` operation center.
//!
//! Lines starting with `;` are metadata. `; cell_size = <meters>` sets the
//! cell size; any other header line is kept as a comment only.

use std::fmt::Write as _;
use std::path::Path;

use datagather::OccupancyGrid;

use crate::error::{CliError, ScenarioError};

pub fn load_scenario(path: impl AsRef<Path>) -> Result<OccupancyGrid, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text).map_err(|e| CliError::Scenario { path: path.display().to_string(), source: e })
}

pub fn parse_scenario(text: &str) -> Result<OccupancyGrid, ScenarioError> {
    let mut cell_size = 1.0;
    let mut width = None;
    let mut height = 0;
    let mut obstacle = Vec::new();
    let mut oc: Option<(usize, usize, usize)> = None;
    let mut last_row = 0;

    let lines: Vec<&str> = text.lines().collect();
    // trailing blank lines are not rows
    let used = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    for (i, raw) in lines[..used].iter().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if let Some(meta) = line.strip_prefix(';') {
            if height > 0 {
                return Err(ScenarioError::new(line_no, 1, "header lines must come before the raster"));
            }
            if let Some((key, value)) = meta.split_once('=') {
                if key.trim() == "cell_size" {
                    cell_size = value
                        .trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| *v > 0.0 && v.is_finite())
                        .ok_or_else(|| ScenarioError::new(line_no, 1, format!("bad cell size '{}'", value.trim())))?;
                }
            }
            continue;
        }
        let cols = line.chars().count();
        match width {
            None => width = Some(cols),
            Some(w) if w != cols => {
                return Err(ScenarioError::new(
                    line_no,
                    cols.min(w) + 1,
                    format!("row has {cols} cells, expected {w}"),
                ))
            }
            _ => {}
        }
        for (x, ch) in line.chars().enumerate() {
            match ch {
                '#' => obstacle.push(true),
                '.' => obstacle.push(false),
                'O' => {
                    if let Some((l, c, _)) = oc {
                        return Err(ScenarioError::new(
                            line_no,
                            x + 1,
                            format!("second operation center (first at line {l}, column {c})"),
                        ));
                    }
                    oc = Some((line_no, x + 1, height * cols + x));
                    obstacle.push(false);
                }
                other => return Err(ScenarioError::new(line_no, x + 1, format!("unknown cell character '{other}'"))),
            }
        }
        height += 1;
        last_row = line_no;
    }
    let width = width.filter(|&w| w > 0).ok_or_else(|| ScenarioError::new(used.max(1), 1, "the raster is empty"))?;
    let (_, _, oc) = oc.ok_or_else(|| ScenarioError::new(last_row.max(1), 1, "no operation center 'O' in the raster"))?;
    OccupancyGrid::with_cell_size(width, height, obstacle, oc, cell_size)
        .map_err(|e| ScenarioError::new(last_row, 1, e.to_string()))
}

/// Writes `grid` in the format [`parse_scenario`] reads.
pub fn export_scenario(grid: &OccupancyGrid) -> String {
    let mut out = String::new();
    writeln!(out, "; cell_size = {}", grid.cell_size()).unwrap();
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let c = y * grid.width() + x;
            out.push(if c == grid.oc() {
                'O'
            } else if grid.is_obstacle(c) {
                '#'
            } else {
                '.'
            });
        }
        out.push('\n');
    }
    out
}
