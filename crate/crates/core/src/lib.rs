//! Planning and simulation for multi-agent data-gathering missions.
//!
//! A team splits into workers, which gather data at goals inside their own
//! segment of the map, and collectors, which shuttle the data between the
//! workers and a static operation center (OC). The crate covers the whole
//! pipeline:
//!
//! - [`fmm`]: Fast Marching wavefronts on an occupancy grid.
//! - [`segmentation`]: balanced, polygonal and room-like area partitions.
//! - [`routing`]: worker tours (brute force, nearest neighbor + 2-opt, and
//!   their time-window variants).
//! - [`planner`]: workload estimation, collector paths, association and the
//!   utility-driven plan selection.
//! - [`simulator`]: deterministic execution of a plan with moving rendezvous.

pub mod error;
pub mod fmm;
pub mod grid;
pub mod planner;
pub mod routing;
pub mod segmentation;
pub mod simulator;

pub use error::{Error, Result};
pub use fmm::{extract_path, obstacle_field, path_time, solve_eikonal, DistanceField, GridPath, Speed, SpeedField};
pub use grid::{line_of_sight, Cell, OccupancyGrid, Point};
pub use segmentation::{Method, Partition};
pub use routing::{Router, Tour, TravelOracle};
pub use planner::{MissionPlan, PlanCandidate, PlanConfig};
pub use simulator::{run_mission, MissionMetrics, MissionTrace, SimOptions};
