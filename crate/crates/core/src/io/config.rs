use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Provenance;
use crate::error::{Error, Result};
use crate::mcmc::{AcceptanceRule, SamplerConfig};

/// Layout of a pairs CSV.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// Columns `x1..x{d}, y1..y{d}`.
    #[default]
    UnitVectors,
    /// Columns `x_lon, x_lat, y_lon, y_lat` in degrees.
    LonLat,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit_vectors" => Ok(Self::UnitVectors),
            "lonlat" => Ok(Self::LonLat),
            _ => Err(Error::Config(format!("data_format must be unit_vectors or lonlat, got {s:?}"))),
        }
    }
}

/// Everything a command-line run needs, read from a flat `key = value` file.
/// Blank lines and lines starting with `#` are ignored; unknown keys are
/// errors.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub sampler: SamplerConfig<f64>,
    /// Rescale proposals to the data before sampling
    /// (see [`SamplerConfig::scaled_for`]).
    pub auto_scale: bool,
    /// Independent chains per fit; draws are pooled.
    pub chains: usize,
    pub data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
    pub data_format: DataFormat,
    /// Simulation truth: number of atoms, concentration, training and
    /// held-out sizes.
    pub k: usize,
    pub kappa: f64,
    pub n: usize,
    pub n_test: usize,
    /// Monte Carlo points for integrated distances.
    pub distance_points: usize,
    /// Simulation-study grid.
    pub grid_k: Vec<usize>,
    pub grid_kappa: Vec<f64>,
    pub grid_n: Vec<usize>,
    /// Worker threads for the simulation study (0 = all cores).
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            auto_scale: true,
            chains: 1,
            data: None,
            test_data: None,
            truth: None,
            out: PathBuf::from("out"),
            data_format: DataFormat::UnitVectors,
            k: 5,
            kappa: 10.0,
            n: 100,
            n_test: 0,
            distance_points: 50_000,
            grid_k: vec![5],
            grid_kappa: vec![10.0, 100.0],
            grid_n: vec![100, 500, 1000],
            threads: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.sampler;
        match key {
            "q_atom" => s.move_probs.q_atom = parse(key, v)?,
            "q_psi" => s.move_probs.q_psi = parse(key, v)?,
            "q_add" => s.move_probs.q_add = parse(key, v)?,
            "q_remove" => s.move_probs.q_remove = parse(key, v)?,
            "sigma_eps" => s.sigma_eps = parse(key, v)?,
            "sigma_kappa" => s.sigma_kappa = parse(key, v)?,
            "kappa_vmf_atom" => s.kappa_vmf_atom = parse(key, v)?,
            "iters" => s.iters = parse(key, v)?,
            "burn_in" => s.burn_in = parse(key, v)?,
            "thin" => s.thin = parse(key, v)?,
            "seed" => s.seed = parse(key, v)?,
            "acceptance_rule" => {
                s.rule = match v {
                    "corrected" => AcceptanceRule::Corrected,
                    "as_published" => AcceptanceRule::AsPublished,
                    _ => return Err(Error::Config(format!("acceptance_rule must be corrected or as_published, got {v:?}"))),
                }
            }
            "lambda" => s.prior.lambda = parse(key, v)?,
            "p" => s.prior.p = parse(key, v)?,
            "cloud_size" => s.prior.cloud_size = parse(key, v)?,
            "k_max" => s.prior.k_max = parse(key, v)?,
            "rejection_budget" => s.prior.rejection_budget = parse(key, v)?,
            "auto_scale" => self.auto_scale = parse(key, v)?,
            "chains" => self.chains = parse(key, v)?,
            "data" => self.data = opt_path(v),
            "test_data" => self.test_data = opt_path(v),
            "truth" => self.truth = opt_path(v),
            "out" => self.out = PathBuf::from(v),
            "data_format" => self.data_format = v.parse()?,
            "k" => self.k = parse(key, v)?,
            "kappa" => self.kappa = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "n_test" => self.n_test = parse(key, v)?,
            "distance_points" => self.distance_points = parse(key, v)?,
            "grid_k" => self.grid_k = parse_list(key, v)?,
            "grid_kappa" => self.grid_kappa = parse_list(key, v)?,
            "grid_n" => self.grid_n = parse_list(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults and validates.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.chains == 0 {
            return bad("chains must be at least 1");
        }
        if self.k == 0 || self.k > self.sampler.prior.k_max {
            return bad("k must be in 1..=k_max");
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be positive");
        }
        if self.distance_points == 0 {
            return bad("distance_points must be positive");
        }
        if self.grid_k.iter().any(|&k| k == 0 || k > self.sampler.prior.k_max) {
            return bad("grid_k entries must be in 1..=k_max");
        }
        if self.grid_kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return bad("grid_kappa entries must be positive");
        }
        Ok(())
    }

    /// Every setting as `key → value`, in a form [`RunConfig::parse`]
    /// accepts.
    pub fn to_provenance(&self) -> Provenance {
        let s = &self.sampler;
        let rule = match s.rule {
            AcceptanceRule::Corrected => "corrected",
            AcceptanceRule::AsPublished => "as_published",
        };
        let format = match self.data_format {
            DataFormat::UnitVectors => "unit_vectors",
            DataFormat::LonLat => "lonlat",
        };
        [
            ("q_atom", s.move_probs.q_atom.to_string()),
            ("q_psi", s.move_probs.q_psi.to_string()),
            ("q_add", s.move_probs.q_add.to_string()),
            ("q_remove", s.move_probs.q_remove.to_string()),
            ("sigma_eps", s.sigma_eps.to_string()),
            ("sigma_kappa", s.sigma_kappa.to_string()),
            ("kappa_vmf_atom", s.kappa_vmf_atom.to_string()),
            ("iters", s.iters.to_string()),
            ("burn_in", s.burn_in.to_string()),
            ("thin", s.thin.to_string()),
            ("seed", s.seed.to_string()),
            ("acceptance_rule", rule.to_string()),
            ("lambda", s.prior.lambda.to_string()),
            ("p", s.prior.p.to_string()),
            ("cloud_size", s.prior.cloud_size.to_string()),
            ("k_max", s.prior.k_max.to_string()),
            ("rejection_budget", s.prior.rejection_budget.to_string()),
            ("auto_scale", self.auto_scale.to_string()),
            ("chains", self.chains.to_string()),
            ("data", path_text(&self.data)),
            ("test_data", path_text(&self.test_data)),
            ("truth", path_text(&self.truth)),
            ("out", self.out.display().to_string()),
            ("data_format", format.to_string()),
            ("k", self.k.to_string()),
            ("kappa", self.kappa.to_string()),
            ("n", self.n.to_string()),
            ("n_test", self.n_test.to_string()),
            ("distance_points", self.distance_points.to_string()),
            ("grid_k", join(&self.grid_k)),
            ("grid_kappa", join(&self.grid_kappa)),
            ("grid_n", join(&self.grid_n)),
            ("threads", self.threads.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// The resolved configuration as a `key = value` file.
    pub fn to_text(&self) -> String {
        self.to_provenance().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
