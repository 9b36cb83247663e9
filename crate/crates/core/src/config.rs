//! `key = value` run configuration with `#` comments.
//!
//! Every key is checked against a fixed schema; unknown keys and malformed
//! values are rejected with the offending key named.

use std::path::Path;

use crate::error::{QgnnError, Result};
use crate::graph::{Normalization, SelectionCuts};
use crate::hitdata::{GeneratorConfig, N_LAYERS};
use crate::train::TrainConfig;
use crate::ttn::Backend;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub cuts: SelectionCuts,
    pub generator: GeneratorConfig,
    pub normalization: Normalization,
    pub n_events: usize,
    /// Shots for sampled evaluation; `None` means exact expectations.
    pub shots: Option<u64>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            cuts: SelectionCuts::default(),
            generator: GeneratorConfig::default(),
            normalization: Normalization::default(),
            n_events: 1,
            shots: None,
            threads: None,
        }
    }
}

/// Every accepted key, for help text and validation.
pub const KEYS: &[&str] = &[
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "n_iterations",
    "epochs",
    "n_train",
    "n_val",
    "seed",
    "clamp_eps",
    "val_every",
    "backend",
    "shots",
    "threads",
    "pt_min",
    "phi_slope_max",
    "z0_max",
    "eta_min",
    "eta_max",
    "events",
    "tracks",
    "noise",
    "pt_lo",
    "pt_hi",
    "gen_eta_max",
    "vz_sigma",
    "b_field",
    "smear_sigma",
    "half_length",
    "layer_radii",
    "r_scale",
    "z_offset",
    "z_scale",
];

fn value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| QgnnError::Config(format!("invalid value {raw:?} for key `{key}`")))
}

impl RunConfig {
    /// Sets one key. Range checks happen in [`Self::validate`].
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let t = &mut self.train;
        let c = &mut self.cuts;
        let g = &mut self.generator;
        let n = &mut self.normalization;
        match key {
            "learning_rate" => t.adam.learning_rate = value(key, raw)?,
            "adam_beta1" => t.adam.beta1 = value(key, raw)?,
            "adam_beta2" => t.adam.beta2 = value(key, raw)?,
            "adam_eps" => t.adam.eps = value(key, raw)?,
            "n_iterations" => t.n_iterations = value(key, raw)?,
            "epochs" => t.epochs = value(key, raw)?,
            "n_train" => t.n_train = value(key, raw)?,
            "n_val" => t.n_val = value(key, raw)?,
            "seed" => t.seed = value(key, raw)?,
            "clamp_eps" => t.clamp_eps = value(key, raw)?,
            "val_every" => t.val_every = value(key, raw)?,
            "backend" => t.backend = Backend::parse(raw.trim())?,
            "shots" => {
                let s: u64 = value(key, raw)?;
                self.shots = (s > 0).then_some(s);
            }
            "threads" => {
                let k: usize = value(key, raw)?;
                self.threads = (k > 0).then_some(k);
            }
            "pt_min" => c.pt_min = value(key, raw)?,
            "phi_slope_max" => c.phi_slope_max = value(key, raw)?,
            "z0_max" => c.z0_max = value(key, raw)?,
            "eta_min" => c.eta_min = value(key, raw)?,
            "eta_max" => c.eta_max = value(key, raw)?,
            "events" => self.n_events = value(key, raw)?,
            "tracks" => g.n_tracks = value(key, raw)?,
            "noise" => g.noise_fraction = value(key, raw)?,
            "pt_lo" => g.pt_range.min = value(key, raw)?,
            "pt_hi" => g.pt_range.max = value(key, raw)?,
            "gen_eta_max" => g.eta_max = value(key, raw)?,
            "vz_sigma" => g.vz_sigma = value(key, raw)?,
            "b_field" => g.geometry.b_field = value(key, raw)?,
            "smear_sigma" => g.geometry.smear_sigma = value(key, raw)?,
            "half_length" => g.geometry.half_length = value(key, raw)?,
            "layer_radii" => {
                let radii = raw
                    .split(',')
                    .map(|r| value::<f64>(key, r))
                    .collect::<Result<Vec<_>>>()?;
                g.geometry.layer_radii = radii.try_into().map_err(|v: Vec<f64>| {
                    QgnnError::Config(format!("`layer_radii` needs {N_LAYERS} values, got {}", v.len()))
                })?;
            }
            "r_scale" => n.r_scale = value(key, raw)?,
            "z_offset" => n.z_offset = value(key, raw)?,
            "z_scale" => n.z_scale = value(key, raw)?,
            other => return Err(QgnnError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.cuts.validate()?;
        self.generator.validate()?;
        let radii = &self.generator.geometry.layer_radii;
        if radii.windows(2).any(|w| !(w[0] < w[1])) || radii[0] <= 0.0 {
            return Err(QgnnError::Config("layer_radii must be positive and increasing".into()));
        }
        let n = &self.normalization;
        if !(n.r_scale > 0.0 && n.z_scale > 0.0) {
            return Err(QgnnError::Config("normalization scales must be positive".into()));
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str, source: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| QgnnError::parse(source, i + 1, format!("expected `key = value`, found {line:?}")))?;
            self.set(key.trim(), raw.trim()).map_err(|e| match e {
                QgnnError::Config(msg) => QgnnError::parse(source, i + 1, msg),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QgnnError::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }
}
