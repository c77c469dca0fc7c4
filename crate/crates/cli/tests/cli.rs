use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use datagather_cli::{load_scenario, parse_scenario};

const BIN: &str = env!("CARGO_BIN_EXE_datagather");

/// 30x30 map: two rooms joined by a door, OC in the lower-left corner.
fn small_map() -> String {
    let mut rows = Vec::new();
    for y in 0..30 {
        let row: String = (0..30)
            .map(|x| match (x, y) {
                (1, 28) => 'O',
                (15, y) if !(12..=15).contains(&y) => '#',
                (x, 8) if (20..28).contains(&x) => '#',
                _ => '.',
            })
            .collect();
        rows.push(row);
    }
    format!("; two rooms\n{}\n", rows.join("\n"))
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("map.txt"), small_map()).unwrap();
        std::fs::write(dir.path().join("exp.cfg"), "# small team\nn_agents = 6\nn_goals = 12\nt_mission = 120\n").unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let map = self.path("map.txt");
        let cfg = self.path("exp.cfg");
        let mut cmd = Command::new(BIN);
        cmd.args(&args[..1]).arg("--scenario").arg(&map).arg("--config").arg(&cfg).args(&args[1..]);
        cmd.output().unwrap()
    }
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows (no `#` lines, no header) split into fields.
fn records(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn plan_lists_every_candidate() {
    let f = Fixture::new();
    let text = stdout(&f.run(&["plan"]));
    assert!(text.starts_with("# alpha=0.5 beta=0.5"));
    let (header, rows) = records(&text);
    assert_eq!(rows.len(), 3 * (6 / 2 + 1));
    let winners: Vec<_> = rows.iter().filter(|r| r[col(&header, "winner")] == "1").collect();
    assert_eq!(winners.len(), 1);
    for r in &rows {
        let u: f64 = r[col(&header, "utility")].parse().unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&u));
    }
}

#[test]
fn method_and_collector_filters() {
    let f = Fixture::new();
    let (header, rows) = records(&stdout(&f.run(&["plan", "--method", "pap"])));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[col(&header, "method")] == "pap"));

    let (header, rows) = records(&stdout(&f.run(&["plan", "--collectors", "1", "--set", "alpha=0.3", "--set", "beta=0.7"])));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[col(&header, "n_collectors")] == "1"));
}

#[test]
fn flags_override_the_config_file() {
    let f = Fixture::new();
    let text = stdout(&f.run(&["plan", "--method", "bap", "--set", "n_agents=4"]));
    assert!(text.contains("n_agents=4"));
    assert_eq!(records(&text).1.len(), 3);
}

#[test]
fn plan_exports_segments_and_config() {
    let f = Fixture::new();
    let out = f.path("out");
    let o = f.run(&["plan", "--method", "bap", "--out", out.to_str().unwrap(), "--export-segments"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(out.join("plan.csv")).unwrap().contains("bap,0,"));
    let raster = std::fs::read_to_string(out.join("segments.csv")).unwrap();
    let grid = load_scenario(f.path("map.txt")).unwrap();
    let cells: Vec<i64> = raster.lines().flat_map(|l| l.split(',').map(|v| v.parse::<i64>().unwrap())).collect();
    assert_eq!(cells.len(), grid.len());
    for (c, &label) in cells.iter().enumerate() {
        assert_eq!(label < 0, grid.is_obstacle(c));
    }
    let config = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("n_agents = 6") && config.contains("methods = bap"));
}

#[test]
fn simulate_reports_trials_and_aggregate() {
    let f = Fixture::new();
    let args = ["simulate", "--trials", "3", "--seed", "5"];
    let text = stdout(&f.run(&args));
    assert_eq!(text, stdout(&f.run(&args)), "same seed, same report");
    let (header, rows) = records(&text);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3][0], "aggregate");
    let seeds: Vec<&str> = rows[..3].iter().map(|r| r[col(&header, "seed")].as_str()).collect();
    assert_eq!(seeds, ["5", "6", "7"]);
    for name in ["t_refresh", "m_d"] {
        let k = col(&header, name);
        let values: Vec<f64> = rows[..3].iter().map(|r| r[k].parse().unwrap()).collect();
        let mean: f64 = rows[3][k].parse().unwrap();
        assert!((mean - values.iter().sum::<f64>() / 3.0).abs() < 1e-9);
        let min: f64 = rows[3][col(&header, &format!("{name}_min"))].parse().unwrap();
        let max: f64 = rows[3][col(&header, &format!("{name}_max"))].parse().unwrap();
        assert_eq!(min, values.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(max, values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
}

#[test]
fn simulate_exports_traces() {
    let f = Fixture::new();
    let out = f.path("runs");
    let o = f.run(&["simulate", "--trials", "2", "--collectors", "1", "--out", out.to_str().unwrap(), "--export-trace"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for seed in [0, 1] {
        let text = std::fs::read_to_string(out.join(format!("trace_seed{seed}.jsonl"))).unwrap();
        let mut last = 0.0;
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let t = v["t"].as_f64().unwrap();
            assert!(t >= last);
            last = t;
            assert!(v["kind"].is_string());
        }
        assert!(text.contains("\"kind\":\"delivery\""));
    }
}

#[test]
fn sweep_has_estimated_and_executed_columns() {
    let f = Fixture::new();
    let text = stdout(&f.run(&["sweep", "--method", "rap", "--trials", "2"]));
    let (header, rows) = records(&text);
    assert_eq!(rows.len(), 4);
    for name in ["est_tc", "exec_tc", "est_md", "exec_md", "est_utility", "exec_utility"] {
        let k = col(&header, name);
        assert!(rows.iter().all(|r| r[k].parse::<f64>().is_ok()), "{name}");
    }
}

#[test]
fn numbers_parse_back_exactly() {
    let f = Fixture::new();
    let grid = load_scenario(f.path("map.txt")).unwrap();
    let config = datagather::PlanConfig { n_agents: 6, n_goals: 12, ..Default::default() };
    let plan = datagather_cli::cmd_plan(&grid, &config).unwrap();
    let (header, rows) = records(&datagather_cli::commands::plan_table(&plan));
    for (c, r) in plan.candidates.iter().zip(&rows) {
        assert_eq!(r[col(&header, "est_tc")].parse::<f64>().unwrap(), c.est_tc);
        assert_eq!(r[col(&header, "utility")].parse::<f64>().unwrap(), c.utility);
    }
}

#[test]
fn bad_inputs_exit_nonzero() {
    let f = Fixture::new();
    std::fs::write(f.path("two.txt"), "O..\n..O\n").unwrap();
    let o = Command::new(BIN).args(["plan", "--scenario"]).arg(f.path("two.txt")).output().unwrap();
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2, column 3"), "{err}");
    assert!(o.stdout.is_empty());

    let o = f.run(&["plan", "--set", "alpha=0.9"]);
    assert!(!o.status.success(), "weights no longer sum to one");
    let o = f.run(&["plan", "--method", "xyz"]);
    assert!(!o.status.success());
    let o = Command::new(BIN).args(["plan", "--scenario", "/nonexistent/map.txt"]).output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn scenario_round_trips_through_a_file() {
    let f = Fixture::new();
    let grid = load_scenario(f.path("map.txt")).unwrap();
    let copy = f.path("copy.txt");
    std::fs::write(&copy, datagather_cli::export_scenario(&grid)).unwrap();
    assert_eq!(load_scenario(Path::new(&copy)).unwrap(), grid);
    assert_eq!(parse_scenario(&small_map()).unwrap(), grid);
}
