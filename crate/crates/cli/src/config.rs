use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use xchan::analyzer::PowerAllocation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Schedule,
    CsitTable,
    Simulate,
    Sweep,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        s == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Allocation {
    EqualSymbol,
    TotalPower,
}

/// Flags shared by every subcommand. Everything is optional here so that a
/// config file can supply the rest.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Number of transmitters.
    #[arg(long = "M", value_name = "M")]
    pub m: Option<usize>,
    /// Number of receivers.
    #[arg(long = "N", value_name = "N")]
    pub n: Option<usize>,
    /// Single seed.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Comma-separated seeds, or a range `a..b` (end exclusive).
    #[arg(long)]
    pub seeds: Option<String>,
    /// SNR point in dB; repeatable.
    #[arg(long = "snr", value_name = "DB", allow_negative_numbers = true)]
    pub snr: Vec<f64>,
    #[arg(long, value_enum)]
    pub noise: Option<Switch>,
    #[arg(long, value_enum)]
    pub normalize: Option<Switch>,
    /// Channel draws per SNR point.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Largest M and N for the verify grid.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, value_enum)]
    pub allocation: Option<Allocation>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// TOML file with the same keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Keys accepted in a config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub snr_db: Option<Vec<f64>>,
    pub noise: Option<Switch>,
    pub normalize: Option<Switch>,
    pub draws: Option<usize>,
    pub grid: Option<usize>,
    pub allocation: Option<PowerAllocation>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub m: usize,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub snr_db: Vec<f64>,
    pub noise: bool,
    pub normalize: bool,
    pub draws: usize,
    pub grid: usize,
    pub allocation: PowerAllocation,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// A rejected configuration, naming the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}: {}", self.field, self.message)
    }
}

fn err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError { field, message: message.into() }
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = |e: std::num::ParseIntError| err("seeds", format!("{text:?}: {e}"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (a.trim().parse::<u64>().map_err(bad)?, b.trim().parse::<u64>().map_err(bad)?);
        if a >= b {
            return Err(err("seeds", format!("empty range {text:?}")));
        }
        return Ok((a..b).collect());
    }
    text.split(',').map(|s| s.trim().parse::<u64>().map_err(bad)).collect()
}

fn load_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| err("config", format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| err("config", format!("{}: {}", path.display(), e.message())))
}

impl ExperimentConfig {
    /// Merges flags over the optional config file and validates the fields
    /// the mode needs.
    pub fn resolve(mode: Mode, flags: &Flags) -> Result<Self, ConfigError> {
        let file = match &flags.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let seeds = match (flags.seed, &flags.seeds) {
            (Some(s), _) => vec![s],
            (None, Some(text)) => parse_seeds(text)?,
            (None, None) => file.seeds.unwrap_or_else(|| vec![0]),
        };
        let snr_db = if flags.snr.is_empty() { file.snr_db.unwrap_or_default() } else { flags.snr.clone() };
        let allocation = match flags.allocation {
            Some(Allocation::EqualSymbol) => PowerAllocation::EqualSymbol,
            Some(Allocation::TotalPower) => PowerAllocation::TotalPower,
            None => file.allocation.unwrap_or_default(),
        };
        let default_format = match mode {
            Mode::Schedule | Mode::CsitTable | Mode::Verify => Format::Text,
            Mode::Simulate => Format::Json,
            Mode::Sweep => Format::Csv,
        };
        let cfg = Self {
            mode,
            m: flags.m.or(file.m).unwrap_or(0),
            n: flags.n.or(file.n).unwrap_or(0),
            seeds,
            snr_db,
            noise: flags.noise.or(file.noise).map_or(mode == Mode::Sweep, bool::from),
            normalize: flags.normalize.or(file.normalize).map_or(mode == Mode::Sweep, bool::from),
            draws: flags.draws.or(file.draws).unwrap_or(200),
            grid: flags.grid.or(file.grid).unwrap_or(6),
            allocation,
            out: flags.out.clone().or(file.out),
            format: flags.format.or(file.format).unwrap_or(default_format),
        };
        cfg.validate(flags.m.is_some() || file.m.is_some(), flags.n.is_some() || file.n.is_some())?;
        Ok(cfg)
    }

    fn validate(&self, has_m: bool, has_n: bool) -> Result<(), ConfigError> {
        if self.mode != Mode::Verify {
            if !has_m {
                return Err(err("M", "required"));
            }
            if !has_n {
                return Err(err("N", "required"));
            }
            if self.m < 1 {
                return Err(err("M", "must be at least 1"));
            }
            if self.n < 2 {
                return Err(err("N", "must be at least 2"));
            }
        }
        match self.mode {
            Mode::Simulate if self.seeds.is_empty() => return Err(err("seeds", "at least one seed required")),
            Mode::Sweep => {
                if self.snr_db.len() < 3 {
                    return Err(err("snr", "sweep needs at least 3 SNR points"));
                }
                if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
                    return Err(err("snr", format!("{x} is not finite")));
                }
                let lo = self.snr_db.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = self.snr_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi - lo < 20.0 {
                    return Err(err("snr", format!("span {:.1} dB is below 20 dB", hi - lo)));
                }
                if !self.noise {
                    return Err(err("noise", "sweep rates need noise on"));
                }
                if self.draws == 0 {
                    return Err(err("draws", "must be positive"));
                }
            }
            Mode::Verify if self.grid < 3 => return Err(err("grid", "must be at least 3")),
            _ => {}
        }
        if self.format == Format::Csv && self.mode == Mode::Verify {
            return Err(err("format", "verify supports json or text"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(m: usize, n: usize) -> Flags {
        Flags { m: Some(m), n: Some(n), ..Flags::default() }
    }

    #[test]
    fn seed_lists_and_ranges() {
        assert_eq!(parse_seeds("1,2, 5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_seeds("3..6").unwrap(), vec![3, 4, 5]);
        assert!(parse_seeds("6..3").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn defaults_per_mode() {
        let c = ExperimentConfig::resolve(Mode::Schedule, &flags(3, 3)).unwrap();
        assert_eq!((c.format, c.noise, c.normalize, c.seeds.clone()), (Format::Text, false, false, vec![0]));
        let mut f = flags(2, 2);
        f.snr = vec![40.0, 60.0, 80.0];
        let c = ExperimentConfig::resolve(Mode::Sweep, &f).unwrap();
        assert_eq!((c.format, c.noise, c.normalize), (Format::Csv, true, true));
    }

    #[test]
    fn field_level_rejections() {
        assert_eq!(ExperimentConfig::resolve(Mode::Schedule, &Flags::default()).unwrap_err().field, "M");
        assert_eq!(ExperimentConfig::resolve(Mode::Schedule, &flags(3, 1)).unwrap_err().field, "N");
        assert_eq!(ExperimentConfig::resolve(Mode::Sweep, &flags(3, 3)).unwrap_err().field, "snr");
        let mut f = flags(3, 3);
        f.snr = vec![40.0, 50.0, 60.0];
        f.noise = Some(Switch::Off);
        assert_eq!(ExperimentConfig::resolve(Mode::Sweep, &f).unwrap_err().field, "noise");
        let f = Flags { grid: Some(2), ..Flags::default() };
        assert_eq!(ExperimentConfig::resolve(Mode::Verify, &f).unwrap_err().field, "grid");
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, "M = 4\nN = 3\nseeds = [7, 8]\nformat = \"json\"\n").unwrap();
        let f = Flags { n: Some(5), config: Some(path.clone()), ..Flags::default() };
        let c = ExperimentConfig::resolve(Mode::Simulate, &f).unwrap();
        assert_eq!((c.m, c.n, c.seeds.clone(), c.format), (4, 5, vec![7, 8], Format::Json));

        std::fs::write(&path, "M = 4\nbogus = 1\n").unwrap();
        let f = Flags { config: Some(path), ..Flags::default() };
        assert_eq!(ExperimentConfig::resolve(Mode::Simulate, &f).unwrap_err().field, "config");
    }
}
