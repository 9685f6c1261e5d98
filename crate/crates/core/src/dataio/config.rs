//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::{MonthRange, YearMonth};

use super::DataError;

/// How observations are assigned to the train/test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitUnit {
    Observation,
    Corridor,
}

/// Convention for per-hazard attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionConvention {
    /// Flows with only this hazard active minus flows with no disasters.
    OnlyHazard,
    /// Flows with all hazards minus flows with every hazard except this one.
    LeaveOneOut,
}

/// Search direction used by the calibration optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Descent {
    /// Gradient scaled by a damped Gauss-Newton metric.
    Preconditioned,
    /// Plain negative gradient.
    Steepest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub window: MonthRange,
    pub seed: u64,
    pub split_fraction: f64,
    pub split_unit: SplitUnit,
    pub starts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub descent: Descent,
    pub bootstrap_reps: usize,
    pub bootstrap_iter: usize,
    pub corridor_weighted_loss: bool,
    pub delta_gdp_clamp: bool,
    pub attribution: AttributionConvention,
    pub band_draws: usize,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            window: MonthRange::decade(),
            seed: 42,
            split_fraction: 0.8,
            split_unit: SplitUnit::Observation,
            starts: 8,
            max_iter: 200,
            tol: 1e-10,
            descent: Descent::Preconditioned,
            bootstrap_reps: 0,
            bootstrap_iter: 20,
            corridor_weighted_loss: false,
            delta_gdp_clamp: false,
            attribution: AttributionConvention::OnlyHazard,
            band_draws: 1000,
            threads: None,
        }
    }
}

fn invalid(path: &Path, line: usize, key: &str, value: &str) -> DataError {
    DataError::Config {
        path: path.to_path_buf(),
        line,
        message: format!("invalid value '{value}' for '{key}'"),
    }
}

fn parse<T: FromStr>(path: &Path, line: usize, key: &str, value: &str) -> Result<T, DataError> {
    value.parse().map_err(|_| invalid(path, line, key, value))
}

fn parse_bool(path: &Path, line: usize, key: &str, value: &str) -> Result<bool, DataError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(DataError::Config {
            path: path.to_path_buf(),
            line,
            message: format!("invalid boolean '{value}' for '{key}'"),
        }),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, path)
    }

    /// Parses the flat config format. Relative `data_dir`/`output_dir` values are
    /// resolved against the config file's directory.
    pub fn parse_str(text: &str, path: &Path) -> Result<Self, DataError> {
        let mut cfg = RunConfig::default();
        let base = path.parent().unwrap_or(Path::new("."));
        let mut start = cfg.window.start;
        let mut end = cfg.window.end;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| DataError::Config {
                path: path.to_path_buf(),
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "data_dir" => cfg.data_dir = base.join(value),
                "output_dir" => cfg.output_dir = base.join(value),
                "start" => start = parse::<YearMonth>(path, line, key, value)?,
                "end" => end = parse::<YearMonth>(path, line, key, value)?,
                "seed" => cfg.seed = parse(path, line, key, value)?,
                "split_fraction" => cfg.split_fraction = parse(path, line, key, value)?,
                "split_unit" => {
                    cfg.split_unit = match value {
                        "observation" => SplitUnit::Observation,
                        "corridor" => SplitUnit::Corridor,
                        _ => return Err(invalid(path, line, key, value)),
                    }
                }
                "starts" => cfg.starts = parse(path, line, key, value)?,
                "max_iter" => cfg.max_iter = parse(path, line, key, value)?,
                "tol" => cfg.tol = parse(path, line, key, value)?,
                "descent" => {
                    cfg.descent = match value {
                        "preconditioned" => Descent::Preconditioned,
                        "steepest" => Descent::Steepest,
                        _ => return Err(invalid(path, line, key, value)),
                    }
                }
                "bootstrap_reps" => cfg.bootstrap_reps = parse(path, line, key, value)?,
                "bootstrap_iter" => cfg.bootstrap_iter = parse(path, line, key, value)?,
                "corridor_weighted_loss" => {
                    cfg.corridor_weighted_loss = parse_bool(path, line, key, value)?
                }
                "delta_gdp_clamp" => cfg.delta_gdp_clamp = parse_bool(path, line, key, value)?,
                "attribution" => {
                    cfg.attribution = match value {
                        "only-hazard" => AttributionConvention::OnlyHazard,
                        "leave-one-out" => AttributionConvention::LeaveOneOut,
                        _ => return Err(invalid(path, line, key, value)),
                    }
                }
                "band_draws" => cfg.band_draws = parse(path, line, key, value)?,
                "threads" => cfg.threads = Some(parse(path, line, key, value)?),
                _ => {
                    return Err(DataError::Config {
                        path: path.to_path_buf(),
                        line,
                        message: format!("unknown key '{key}'"),
                    })
                }
            }
        }
        cfg.window = MonthRange::new(start, end).ok_or_else(|| DataError::Config {
            path: path.to_path_buf(),
            line: 0,
            message: format!("start {start} is after end {end}"),
        })?;
        cfg.validate().map_err(|message| DataError::Config {
            path: path.to_path_buf(),
            line: 0,
            message,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let decade = MonthRange::decade();
        if !decade.contains(self.window.start) || !decade.contains(self.window.end) {
            return Err(format!(
                "date range must lie within {}..{}",
                decade.start, decade.end
            ));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err("split_fraction must lie in (0, 1)".into());
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err("tol must be finite and non-negative".into());
        }
        Ok(())
    }

    /// Serialises back to the flat format (paths written as given).
    pub fn to_flat_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("start", self.window.start.to_string());
        kv("end", self.window.end.to_string());
        kv("seed", self.seed.to_string());
        kv("split_fraction", self.split_fraction.to_string());
        kv(
            "split_unit",
            match self.split_unit {
                SplitUnit::Observation => "observation",
                SplitUnit::Corridor => "corridor",
            }
            .into(),
        );
        kv("starts", self.starts.to_string());
        kv("max_iter", self.max_iter.to_string());
        kv("tol", self.tol.to_string());
        kv("bootstrap_reps", self.bootstrap_reps.to_string());
        kv("bootstrap_iter", self.bootstrap_iter.to_string());
        kv(
            "descent",
            match self.descent {
                Descent::Preconditioned => "preconditioned",
                Descent::Steepest => "steepest",
            }
            .into(),
        );
        kv("corridor_weighted_loss", self.corridor_weighted_loss.to_string());
        kv("delta_gdp_clamp", self.delta_gdp_clamp.to_string());
        kv(
            "attribution",
            match self.attribution {
                AttributionConvention::OnlyHazard => "only-hazard",
                AttributionConvention::LeaveOneOut => "leave-one-out",
            }
            .into(),
        );
        kv("band_draws", self.band_draws.to_string());
        if let Some(n) = self.threads {
            kv("threads", n.to_string());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let text = "# run\nstart = 2011-03\nend = 2012-02\nseed = 7\nsplit_fraction = 0.75\n\
                    delta_gdp_clamp = on\nattribution = leave-one-out\ndata_dir = fx\n";
        let cfg = RunConfig::parse_str(text, Path::new("/tmp/run.cfg")).unwrap();
        assert_eq!(cfg.window.len(), 12);
        assert_eq!(cfg.seed, 7);
        assert!(cfg.delta_gdp_clamp);
        assert_eq!(cfg.attribution, AttributionConvention::LeaveOneOut);
        assert_eq!(cfg.data_dir, PathBuf::from("/tmp/fx"));
    }

    #[test]
    fn rejects_out_of_window_and_bad_fraction() {
        let p = Path::new("run.cfg");
        assert!(RunConfig::parse_str("start = 2009-12\n", p).is_err());
        assert!(RunConfig::parse_str("split_fraction = 1.0\n", p).is_err());
        assert!(RunConfig::parse_str("start = 2015-01\nend = 2014-01\n", p).is_err());
        assert!(RunConfig::parse_str("bogus = 1\n", p).is_err());
    }

    #[test]
    fn flat_string_round_trips() {
        let cfg = RunConfig {
            seed: 99,
            split_fraction: 0.7,
            ..RunConfig::default()
        };
        let back = RunConfig::parse_str(&cfg.to_flat_string(), Path::new("run.cfg")).unwrap();
        assert_eq!(back.seed, 99);
        assert_eq!(back.split_fraction, 0.7);
        assert_eq!(back.window, cfg.window);
    }
}
