//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Every key is optional and may appear once. Unknown keys are errors.

use std::fmt;
use std::path::PathBuf;

use nematic_core::physics::MaterialParams;
use nematic_core::problem::{by_name, BoundaryData, DEFAULT_PULSE_AMPLITUDE, DEFAULT_PULSE_STEEPNESS};
use nematic_core::solver::{RefinementMode, SolverConfig};

/// Every key the file format accepts, in documentation order.
pub const KEYS: &[&str] = &[
    "problem",
    "steepness",
    "amplitude",
    "mode",
    "levels",
    "nu",
    "tolerance",
    "max_iterations",
    "damping_start",
    "damping_increment",
    "damping_cap",
    "root",
    "volume_points",
    "edge_points",
    "reference_dofs",
    "initial_tilt",
    "k1",
    "k2",
    "k3",
    "eps0",
    "eps_perp",
    "eps_a",
    "e_s",
    "e_b",
    "zeta",
    "out",
    "emit_fields",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line in the config file; `None` for command-line overrides and
    /// whole-config checks.
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}, field `{}`: {}", self.field, self.message),
            None => write!(f, "config field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: String,
    pub steepness: f64,
    pub amplitude: f64,
    pub params: MaterialParams,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub emit_fields: bool,
    /// Only consumed by randomized test fixtures.
    pub seed: u64,
    levels_set: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "paper".into(),
            steepness: DEFAULT_PULSE_STEEPNESS,
            amplitude: DEFAULT_PULSE_AMPLITUDE,
            params: MaterialParams::default(),
            solver: SolverConfig::new(RefinementMode::Amr),
            output_dir: PathBuf::from("out"),
            emit_fields: true,
            seed: 0,
            levels_set: false,
        }
    }
}

fn number<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("`{value}` is not a valid number"))
}

fn finite(value: &str) -> Result<f64, String> {
    let v: f64 = number(value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{value}` is not finite"))
    }
}

fn positive(value: &str) -> Result<f64, String> {
    let v = finite(value)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

impl ExperimentConfig {
    /// Parses a config file. Keys absent from the file keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = ExperimentConfig::default();
        let mut seen: Vec<(String, usize)> = Vec::new();
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    field: content.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
                return Err(ConfigError {
                    line: Some(line),
                    field: key.to_string(),
                    message: format!("already set on line {first}"),
                });
            }
            seen.push((key.to_string(), line));
            entries.push((line, key, value));
        }
        // The mode picks the default level count, so it goes first.
        entries.sort_by_key(|&(_, key, _)| key != "mode");
        for (line, key, value) in entries {
            config.set(key, value).map_err(|mut e| {
                e.line = Some(line);
                e
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies one assignment, as from a config line or a command-line flag.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.apply(key, value).map_err(|message| ConfigError {
            line: None,
            field: key.to_string(),
            message,
        })
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let s = &mut self.solver;
        let p = &mut self.params;
        match key {
            "problem" => {
                if by_name(value, 1.0, 1.0).is_none() {
                    return Err(format!("unknown problem `{value}` (expected trivial, paper or manufactured)"));
                }
                self.problem = value.to_string();
            }
            "steepness" => self.steepness = positive(value)?,
            "amplitude" => self.amplitude = finite(value)?,
            "mode" => {
                s.mode = value.parse().map_err(|_| format!("unknown mode `{value}` (expected uniform or amr)"))?;
                if !self.levels_set {
                    s.levels = s.mode.default_levels();
                }
            }
            "levels" => {
                s.levels = number(value)?;
                if s.levels == 0 {
                    return Err("at least one level is required".into());
                }
                self.levels_set = true;
            }
            "nu" => {
                let nu = finite(value)?;
                if !(nu > 0.0 && nu <= 1.0) {
                    return Err(format!("{nu} outside (0, 1]"));
                }
                s.dorfler_fraction = nu;
            }
            "tolerance" => s.tolerance = positive(value)?,
            "max_iterations" => s.max_iterations = number(value)?,
            "damping_start" => s.damping_start = positive(value)?,
            "damping_increment" => s.damping_increment = finite(value)?,
            "damping_cap" => s.damping_cap = positive(value)?,
            "root" => {
                s.root = number(value)?;
                if s.root == 0 {
                    return Err("root grid must have at least one cell".into());
                }
            }
            "volume_points" => s.volume_points = number(value)?,
            "edge_points" => s.edge_points = number(value)?,
            "reference_dofs" => s.reference_dofs = Some(number(value)?),
            "initial_tilt" => s.initial_tilt = finite(value)?,
            "k1" => p.k1 = positive(value)?,
            "k2" => p.k2 = positive(value)?,
            "k3" => p.k3 = positive(value)?,
            "eps0" => p.eps0 = positive(value)?,
            "eps_perp" => p.eps_perp = positive(value)?,
            "eps_a" => p.eps_a = finite(value)?,
            "e_s" => p.e_s = finite(value)?,
            "e_b" => p.e_b = finite(value)?,
            "zeta" => p.zeta = positive(value)?,
            "out" => {
                if value.is_empty() {
                    return Err("empty output directory".into());
                }
                self.output_dir = PathBuf::from(value);
            }
            "emit_fields" => {
                self.emit_fields = match value {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(format!("`{value}` is not a boolean")),
                }
            }
            "seed" => self.seed = number(value)?,
            _ => return Err(format!("unknown key (expected one of: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Cross-field checks that a single assignment cannot catch.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |field: &str, e: nematic_core::Error| ConfigError {
            line: None,
            field: field.to_string(),
            message: e.to_string(),
        };
        self.solver.validate().map_err(|e| wrap("solver", e))?;
        self.params.validate().map_err(|e| wrap("material", e))
    }

    pub fn boundary(&self) -> BoundaryData {
        by_name(&self.problem, self.steepness, self.amplitude).expect("problem name checked on assignment")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c.problem, "paper");
        assert_eq!(c.solver.mode, RefinementMode::Amr);
        assert_eq!(c.solver.levels, 6);

        let text = "# comment\nlevels = 3\n\nmode = uniform # trailing\nzeta=1000\nk2 = 0.5\ninitial_tilt = 0.05\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.solver.mode, RefinementMode::Uniform);
        assert_eq!(c.solver.levels, 3);
        assert_eq!(c.params.zeta, 1000.0);
        assert_eq!(c.params.k2, 0.5);
        assert_eq!(c.solver.initial_tilt, 0.05);
    }

    #[test]
    fn mode_sets_default_levels_unless_given() {
        let c = ExperimentConfig::parse("mode = uniform").unwrap();
        assert_eq!(c.solver.levels, 5);
        let mut c = ExperimentConfig::parse("levels = 2").unwrap();
        c.set("mode", "uniform").unwrap();
        assert_eq!(c.solver.levels, 2);
    }

    #[test]
    fn errors_name_field_and_line() {
        let e = ExperimentConfig::parse("mode = amr\nzeta = lots\n").unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (Some(2), "zeta"));
        let e = ExperimentConfig::parse("\n\ncolour = red").unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (Some(3), "colour"));
        let e = ExperimentConfig::parse("nu = 0.5\nnu = 0.7").unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (Some(2), "nu"));
        let e = ExperimentConfig::parse("just words").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = ExperimentConfig::parse("problem = ising").unwrap_err();
        assert_eq!(e.field, "problem");
        assert!(e.to_string().contains("line 1"));
        let e = ExperimentConfig::parse("damping_start = 0.9\ndamping_cap = 0.5").unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (None, "solver"));
    }
}
