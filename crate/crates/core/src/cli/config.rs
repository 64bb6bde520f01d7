use std::path::{Path, PathBuf};

use crate::diagnostics::Method;
use crate::error::{Error, Result};
use crate::extension::DEFAULT_OMEGA;
use crate::phasecore::ModelId;

/// Settings of one run after layering defaults, config file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelId,
    pub method: Method,
    pub tau: f64,
    pub t_final: f64,
    pub omega: f64,
    pub record_every: usize,
    pub initial: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelId::Model1,
            method: Method::Ksym2,
            tau: 0.01,
            t_final: 1000.0,
            omega: DEFAULT_OMEGA,
            record_every: 1,
            initial: None,
            out: None,
            seed: 0,
        }
    }
}

/// Optional values from one layer; `None` leaves the lower layer in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub model: Option<ModelId>,
    pub method: Option<Method>,
    pub tau: Option<f64>,
    pub t_final: Option<f64>,
    pub omega: Option<f64>,
    pub record_every: Option<usize>,
    pub initial: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.model {
            cfg.model = v;
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.t_final {
            cfg.t_final = v;
        }
        if let Some(v) = self.omega {
            cfg.omega = v;
        }
        if let Some(v) = self.record_every {
            cfg.record_every = v;
        }
        if let Some(v) = &self.initial {
            cfg.initial = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }

    /// Parses a flat `key = value` file. Blank lines and `#` comments are
    /// ignored; keys may use `-` or `_`.
    pub fn parse_file_text(text: &str) -> Result<Self> {
        let mut o = Overrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let value = value.trim();
            let at = |e: Error| Error::Config(format!("line {}: {e}", lineno + 1));
            match key.trim().replace('-', "_").as_str() {
                "model" => o.model = Some(value.parse().map_err(at)?),
                "method" => o.method = Some(value.parse().map_err(at)?),
                "tau" => o.tau = Some(parse_f64("tau", value).map_err(at)?),
                "t_final" => o.t_final = Some(parse_f64("t_final", value).map_err(at)?),
                "omega" => o.omega = Some(parse_f64("omega", value).map_err(at)?),
                "record_every" => {
                    o.record_every = Some(
                        value
                            .parse()
                            .map_err(|_| at(Error::Config(format!("bad record_every '{value}'"))))?,
                    )
                }
                "initial" => o.initial = Some(parse_vector(value).map_err(at)?),
                "out" => o.out = Some(PathBuf::from(value)),
                "seed" => {
                    o.seed = Some(value.parse().map_err(|_| at(Error::Config(format!("bad seed '{value}'"))))?)
                }
                other => return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        Ok(o)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_file_text(&text)
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("bad {key} '{value}'")))
}

/// Comma-separated reals, e.g. `0.2,0.4,0.3,0.5`.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| parse_f64("vector entry", t.trim()))
        .collect()
}

impl RunConfig {
    /// Defaults, then the config file, then flags.
    pub fn layered(file: Option<&Overrides>, flags: &Overrides) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(f) = file {
            f.apply(&mut cfg);
        }
        flags.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!("t_final must be non-negative, got {}", self.t_final)));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::Config(format!("omega must be positive, got {}", self.omega)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if let Some(z) = &self.initial {
            let dim = self.model.build()?.dim();
            if z.len() != dim {
                return Err(Error::Config(format!(
                    "initial state has {} entries, model {} needs {dim}",
                    z.len(),
                    self.model
                )));
            }
        }
        Ok(())
    }
}
