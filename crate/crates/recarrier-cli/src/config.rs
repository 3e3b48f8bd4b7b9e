//! Experiment configuration: defaults, overridden by a TOML config file
//! with one section per subcommand, overridden in turn by command-line
//! flags.

use std::path::{Path, PathBuf};

use recarrier::noise::{KickSamples, NoiseSpec};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum NoiseKind {
    None,
    Dephasing,
    Depolarizing,
    Kicks,
}

impl NoiseKind {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "none" => Ok(NoiseKind::None),
            "dephasing" => Ok(NoiseKind::Dephasing),
            "depolarizing" => Ok(NoiseKind::Depolarizing),
            "kicks" => Ok(NoiseKind::Kicks),
            other => Err(CliError::config(format!("unknown noise kind {other:?}"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Dephasing => "dephasing",
            NoiseKind::Depolarizing => "depolarizing",
            NoiseKind::Kicks => "kicks",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Engine {
    Dense,
    Pauliframe,
    Both,
}

impl Engine {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "dense" => Ok(Engine::Dense),
            "pauliframe" => Ok(Engine::Pauliframe),
            "both" => Ok(Engine::Both),
            other => Err(CliError::config(format!("unknown engine {other:?}"))),
        }
    }

    pub fn wants_dense(self) -> bool {
        matches!(self, Engine::Dense | Engine::Both)
    }

    pub fn wants_pauliframe(self) -> bool {
        matches!(self, Engine::Pauliframe | Engine::Both)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::config(format!("unknown format {other:?}"))),
        }
    }
}

/// Inclusive grid `start, start+step, ..` up to `stop`.
#[derive(Clone, Copy, Debug)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::config(format!(
                "grid must be start:stop:step, got {s:?}"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| CliError::config(format!("grid component {p:?} is not a number")))
            })
            .collect::<Result<_, _>>()?;
        let grid = Grid {
            start: nums[0],
            stop: nums[1],
            step: nums[2],
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(CliError::config(format!("grid step must be > 0, got {}", self.step)));
        }
        if self.stop < self.start {
            return Err(CliError::config(format!(
                "empty grid: stop {} below start {}",
                self.stop, self.start
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let value = self.start + self.step * k as f64;
            if value > self.stop + 1e-12 {
                break;
            }
            out.push(value);
            k += 1;
        }
        out
    }
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub noise: NoiseKind,
    pub p: f64,
    pub rounds: usize,
    pub receivers: usize,
    pub engine: Engine,
    pub trials: usize,
    pub seed: u64,
    pub grid: Grid,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub kicks_file: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            noise: NoiseKind::None,
            p: 0.0,
            rounds: 4,
            receivers: 2,
            engine: Engine::Dense,
            trials: 100_000,
            seed: 1,
            grid: Grid {
                start: 0.0,
                stop: 0.5,
                step: 0.1,
            },
            out: None,
            format: Format::Csv,
            kicks_file: None,
        }
    }
}

const KNOWN_KEYS: [&str; 11] = [
    "noise",
    "p",
    "rounds",
    "receivers",
    "engine",
    "trials",
    "seed",
    "grid",
    "out",
    "format",
    "kicks_file",
];

impl ExperimentConfig {
    /// Layer a TOML section over the defaults. Unknown keys are rejected.
    pub fn apply_file(&mut self, path: &Path, section: &str) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let Some(section_value) = table.get(section) else {
            return Ok(());
        };
        let section_table = section_value.as_table().ok_or_else(|| {
            CliError::config(format!("[{section}] must be a table of key = value pairs"))
        })?;
        for (key, value) in section_table {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!("[{section}] unknown key {key:?}")));
            }
            self.apply_toml_key(key, value, section)?;
        }
        Ok(())
    }

    fn apply_toml_key(
        &mut self,
        key: &str,
        value: &toml::Value,
        section: &str,
    ) -> Result<(), CliError> {
        let bad_type = || CliError::config(format!("[{section}] {key}: unexpected type"));
        match key {
            "noise" => self.noise = NoiseKind::parse(value.as_str().ok_or_else(bad_type)?)?,
            "p" => self.p = toml_float(value).ok_or_else(bad_type)?,
            "rounds" => self.rounds = toml_usize(value).ok_or_else(bad_type)?,
            "receivers" => self.receivers = toml_usize(value).ok_or_else(bad_type)?,
            "engine" => self.engine = Engine::parse(value.as_str().ok_or_else(bad_type)?)?,
            "trials" => self.trials = toml_usize(value).ok_or_else(bad_type)?,
            "seed" => {
                self.seed = value
                    .as_integer()
                    .and_then(|v| u64::try_from(v).ok())
                    .ok_or_else(bad_type)?
            }
            "grid" => self.grid = Grid::parse(value.as_str().ok_or_else(bad_type)?)?,
            "out" => self.out = Some(PathBuf::from(value.as_str().ok_or_else(bad_type)?)),
            "format" => self.format = Format::parse(value.as_str().ok_or_else(bad_type)?)?,
            "kicks_file" => {
                self.kicks_file = Some(PathBuf::from(value.as_str().ok_or_else(bad_type)?))
            }
            _ => unreachable!("filtered against KNOWN_KEYS"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(CliError::config(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.receivers < 2 {
            return Err(CliError::config(format!(
                "need at least 2 receivers, got {}",
                self.receivers
            )));
        }
        if self.rounds == 0 {
            return Err(CliError::config("rounds must be at least 1".into()));
        }
        self.grid.validate()?;
        if self.engine.wants_pauliframe() && self.trials == 0 {
            return Err(CliError::config(
                "trials must be at least 1 for the pauliframe engine".into(),
            ));
        }
        if self.noise == NoiseKind::Kicks && self.kicks_file.is_none() {
            return Err(CliError::config(
                "--noise kicks requires --kicks-file <path>".into(),
            ));
        }
        Ok(())
    }

    /// The noise spec this config describes.
    pub fn noise_spec(&self) -> Result<NoiseSpec, CliError> {
        match self.noise {
            NoiseKind::None => Ok(NoiseSpec::None),
            NoiseKind::Dephasing => Ok(NoiseSpec::Dephasing { p: self.p }),
            NoiseKind::Depolarizing => Ok(NoiseSpec::Depolarizing { p: self.p }),
            NoiseKind::Kicks => {
                let path = self
                    .kicks_file
                    .as_ref()
                    .ok_or_else(|| CliError::config("--noise kicks requires --kicks-file".into()))?;
                let samples = KickSamples::from_path(path).map_err(CliError::from_library)?;
                Ok(NoiseSpec::Kicks { samples })
            }
        }
    }

    /// Noise spec with a given strength substituted (for sweeps).
    pub fn noise_spec_at(&self, p: f64) -> Result<NoiseSpec, CliError> {
        match self.noise {
            NoiseKind::Dephasing => Ok(NoiseSpec::Dephasing { p }),
            NoiseKind::Depolarizing => Ok(NoiseSpec::Depolarizing { p }),
            _ => Err(CliError::config(
                "sweep requires --noise dephasing or depolarizing".into(),
            )),
        }
    }
}

fn toml_float(value: &toml::Value) -> Option<f64> {
    value
        .as_float()
        .or_else(|| value.as_integer().map(|v| v as f64))
}

fn toml_usize(value: &toml::Value) -> Option<usize> {
    value.as_integer().and_then(|v| usize::try_from(v).ok())
}
