//! Line-oriented `key = value` experiment configuration.
//!
//! Zero-dependency parsing, `#` comments, unknown keys are hard errors so a
//! config file is always a faithful record of what ran.

use eplab_core::grid::Stretch;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub r_max: f64,
    pub n: usize,
    pub stretch: Stretch,
    /// Weight indices for the W_l norms (all <= 0).
    pub l_values: Vec<f64>,
    /// Seed amplitudes for the escape scan, strictly decreasing.
    pub deltas: Vec<f64>,
    /// Escape threshold in sqrt(E00) units.
    pub theta: f64,
    pub t_max: f64,
    pub cfl: f64,
    /// Wave-equation step as a fraction of the stability bound.
    pub dt_factor: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub filter_coeff: f64,
    /// Re-run escape experiments at 2 R_max and report both values.
    pub truncation_check: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            r_max: 100.0,
            n: 2000,
            stretch: Stretch::Default,
            l_values: vec![-1.0, -2.0],
            deltas: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
            theta: 1e-2,
            t_max: 40.0,
            cfl: 0.8,
            dt_factor: 1.0,
            out_dir: PathBuf::from("out"),
            seed: 7,
            filter_coeff: 0.0,
            truncation_check: true,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim()
        .parse()
        .map_err(|_| ConfigError(format!("cannot parse value '{v}' for key '{key}'")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|s| parse_num::<f64>(key, s))
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "rmax" => cfg.r_max = parse_num(key, value)?,
                "n" => cfg.n = parse_num(key, value)?,
                "stretch" => {
                    cfg.stretch = Stretch::from_str(value)
                        .map_err(|e| ConfigError(format!("line {}: {e}", lineno + 1)))?
                }
                "l_values" => cfg.l_values = parse_list(key, value)?,
                "deltas" => cfg.deltas = parse_list(key, value)?,
                "theta" => cfg.theta = parse_num(key, value)?,
                "t_max" => cfg.t_max = parse_num(key, value)?,
                "cfl" => cfg.cfl = parse_num(key, value)?,
                "dt_factor" => cfg.dt_factor = parse_num(key, value)?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "seed" => cfg.seed = parse_num(key, value)?,
                "filter_coeff" => cfg.filter_coeff = parse_num(key, value)?,
                "truncation_check" => {
                    cfg.truncation_check = match value {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(ConfigError(format!(
                                "line {}: expected true/false for truncation_check, got '{other}'",
                                lineno + 1
                            )))
                        }
                    }
                }
                unknown => {
                    return Err(ConfigError(format!(
                        "line {}: unknown key '{unknown}'",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 8 {
            return Err(ConfigError(format!("n = {} < 8", self.n)));
        }
        if !(self.r_max > 0.0) {
            return Err(ConfigError(format!("rmax = {} <= 0", self.r_max)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(ConfigError(format!("cfl = {} outside (0, 0.9]", self.cfl)));
        }
        if !(self.dt_factor > 0.0 && self.dt_factor <= 1.0) {
            return Err(ConfigError(format!(
                "dt_factor = {} outside (0, 1]",
                self.dt_factor
            )));
        }
        if !(self.theta > 0.0) {
            return Err(ConfigError(format!("theta = {} <= 0", self.theta)));
        }
        if self.t_max <= 0.0 {
            return Err(ConfigError(format!("t_max = {} <= 0", self.t_max)));
        }
        if self.filter_coeff < 0.0 {
            return Err(ConfigError(format!(
                "filter_coeff = {} < 0",
                self.filter_coeff
            )));
        }
        if self.l_values.iter().any(|&l| l > 0.0) {
            return Err(ConfigError("l_values must all be <= 0".into()));
        }
        if self.deltas.is_empty() {
            return Err(ConfigError("deltas must be nonempty".into()));
        }
        for w in self.deltas.windows(2) {
            if w[1] >= w[0] {
                return Err(ConfigError("deltas must be strictly decreasing".into()));
            }
        }
        // delta = theta is allowed (it crosses at t = 0 by convention)
        if self.deltas[0] > self.theta {
            return Err(ConfigError(format!(
                "largest delta {} exceeds theta {}",
                self.deltas[0], self.theta
            )));
        }
        if self.deltas.iter().any(|&d| d <= 0.0) {
            return Err(ConfigError("deltas must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "\
# a comment
rmax = 50
n = 1000
stretch = uniform
l_values = -1, -2.5
deltas = 1e-2, 1e-3
theta = 2e-2
t_max = 12
cfl = 0.5        # trailing comment
dt_factor = 0.5
out_dir = results
seed = 42
filter_coeff = 0.001
truncation_check = false
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.n, 1000);
        assert_eq!(cfg.stretch, Stretch::Uniform);
        assert_eq!(cfg.l_values, vec![-1.0, -2.5]);
        assert_eq!(cfg.seed, 42);
        assert!(!cfg.truncation_check);
    }

    #[test]
    fn unknown_key_is_hard_error() {
        assert!(ExperimentConfig::parse("wibble = 3\n").is_err());
    }

    #[test]
    fn bad_values_rejected() {
        assert!(ExperimentConfig::parse("n = 4\n").is_err());
        assert!(ExperimentConfig::parse("cfl = 1.5\n").is_err());
        assert!(ExperimentConfig::parse("deltas = 1e-3, 1e-2\n").is_err());
        assert!(ExperimentConfig::parse("deltas = 5e-2\ntheta = 1e-2\n").is_err());
        assert!(ExperimentConfig::parse("theta: 1e-2\n").is_err());
    }
}
