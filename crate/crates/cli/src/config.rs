//! Flat `key = value` experiment files mirroring [`PlanConfig`].
//!
//! Blank lines and lines starting with `#` are ignored. Command-line
//! `--set key=value` pairs go through the same [`apply`] after the file.

use std::fmt::Write as _;
use std::path::Path;

use datagather::{Method, PlanConfig};

use crate::error::CliError;

pub const KEYS: [&str; 13] = [
    "n_agents",
    "n_goals",
    "alpha",
    "beta",
    "worker_speed",
    "collector_speed",
    "gather_time",
    "transmit_time",
    "d_com",
    "t_mission",
    "max_collectors",
    "fixed_collectors",
    "methods",
];

pub fn load_config(path: impl AsRef<Path>) -> Result<PlanConfig, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut config = PlanConfig::default();
    parse_into(&mut config, &text, &path.display().to_string())?;
    Ok(config)
}

/// Applies every `key = value` line of `text` to `config`.
pub fn parse_into(config: &mut PlanConfig, text: &str, origin: &str) -> Result<(), CliError> {
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = format!("{origin}:{}", i + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config { origin: at.clone(), message: format!("expected key = value, got '{line}'") })?;
        apply(config, key.trim(), value.trim()).map_err(|message| CliError::Config { origin: at, message })?;
    }
    Ok(())
}

/// Sets one field by name.
pub fn apply(config: &mut PlanConfig, key: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
        value.parse().map_err(|_| format!("bad value '{value}' for {key}"))
    }
    fn optional(key: &str, value: &str) -> Result<Option<usize>, String> {
        match value {
            "" | "none" => Ok(None),
            v => num(key, v).map(Some),
        }
    }
    match key {
        "n_agents" => config.n_agents = num(key, value)?,
        "n_goals" => config.n_goals = num(key, value)?,
        "alpha" => config.alpha = num(key, value)?,
        "beta" => config.beta = num(key, value)?,
        "worker_speed" => config.worker_speed = num(key, value)?,
        "collector_speed" => config.collector_speed = num(key, value)?,
        "gather_time" => config.gather_time = num(key, value)?,
        "transmit_time" => config.transmit_time = num(key, value)?,
        "d_com" => config.d_com = num(key, value)?,
        "t_mission" => config.t_mission = num(key, value)?,
        "max_collectors" => config.max_collectors = optional(key, value)?,
        "fixed_collectors" => config.fixed_collectors = optional(key, value)?,
        "methods" => config.methods = parse_methods(value)?,
        _ => return Err(format!("unknown key '{key}' (known: {})", KEYS.join(", "))),
    }
    Ok(())
}

/// `all` or a comma-separated list of method names.
pub fn parse_methods(value: &str) -> Result<Vec<Method>, String> {
    if value.eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    value.split(',').map(|m| m.trim().parse::<Method>()).collect()
}

/// Renders `config` so that [`parse_into`] restores it exactly.
pub fn render(config: &PlanConfig) -> String {
    let opt = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |n| n.to_string());
    let methods: Vec<&str> = config.methods.iter().map(|m| m.name()).collect();
    let mut out = String::new();
    writeln!(out, "n_agents = {}", config.n_agents).unwrap();
    writeln!(out, "n_goals = {}", config.n_goals).unwrap();
    // shortest representation that parses back to the same f64
    for (k, v) in [
        ("alpha", config.alpha),
        ("beta", config.beta),
        ("worker_speed", config.worker_speed),
        ("collector_speed", config.collector_speed),
        ("gather_time", config.gather_time),
        ("transmit_time", config.transmit_time),
        ("d_com", config.d_com),
        ("t_mission", config.t_mission),
    ] {
        writeln!(out, "{k} = {v:?}").unwrap();
    }
    writeln!(out, "max_collectors = {}", opt(config.max_collectors)).unwrap();
    writeln!(out, "fixed_collectors = {}", opt(config.fixed_collectors)).unwrap();
    writeln!(out, "methods = {}", methods.join(",")).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults() {
        let mut c = PlanConfig::default();
        parse_into(&mut c, "# team\nn_agents = 12\n\nd_com=7.5\nmethods = pap\n", "t").unwrap();
        assert_eq!(c.n_agents, 12);
        assert_eq!(c.d_com, 7.5);
        assert_eq!(c.methods, vec![Method::Pap]);
        assert_eq!(c.n_goals, 100);
    }

    #[test]
    fn errors_name_the_line() {
        let mut c = PlanConfig::default();
        let e = parse_into(&mut c, "n_agents = 4\nspeed = 3\n", "exp.cfg").unwrap_err();
        assert!(e.to_string().starts_with("exp.cfg:2:"), "{e}");
        let e = parse_into(&mut c, "alpha 0.3\n", "exp.cfg").unwrap_err();
        assert!(e.to_string().contains("exp.cfg:1"));
        assert!(apply(&mut c, "n_goals", "-3").is_err());
    }

    #[test]
    fn render_round_trips() {
        let c = PlanConfig {
            alpha: 0.3,
            beta: 0.7,
            d_com: 1.0 / 3.0,
            max_collectors: Some(3),
            methods: vec![Method::Rap, Method::Bap],
            ..PlanConfig::default()
        };
        let mut back = PlanConfig::default();
        parse_into(&mut back, &render(&c), "r").unwrap();
        assert_eq!(back, c);
    }
}
