use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::OptimizerConfig;

/// The named experiments, one per CLI subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Response,
    Frontier,
    MseProfile,
    Squeezing,
    Sequential,
    Hybrid,
    Husimi,
    Oqi,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Response,
        Experiment::Frontier,
        Experiment::MseProfile,
        Experiment::Squeezing,
        Experiment::Sequential,
        Experiment::Hybrid,
        Experiment::Husimi,
        Experiment::Oqi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Response => "response",
            Experiment::Frontier => "frontier",
            Experiment::MseProfile => "mse-profile",
            Experiment::Squeezing => "squeezing",
            Experiment::Sequential => "sequential",
            Experiment::Hybrid => "hybrid",
            Experiment::Husimi => "husimi",
            Experiment::Oqi => "oqi",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// A scalar, an explicit list, or `points` evenly spaced values on
/// [start, stop].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Scalar(f64),
    List(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::Scalar(x) => vec![*x],
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                _ => (0..*points)
                    .map(|i| start + (stop - start) * i as f64 / (*points - 1) as f64)
                    .collect(),
            },
        };
        if v.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("grid has non-finite values".into()));
        }
        Ok(v)
    }
}

/// Inputs of one experiment run. Fields left out of the TOML file take the
/// experiment's defaults (see [`RunConfig::defaults`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Atom number N.
    pub particles: usize,
    pub chi: f64,
    pub delta_phi: Grid,
    pub sigma_det: Grid,
    /// Sequence orders n.
    pub orders: Vec<usize>,
    /// Explicit protocol times, where an experiment uses a fixed protocol.
    pub times: Vec<f64>,
    /// Gauss-Hermite order of Gaussian priors.
    pub nodes: usize,
    /// Points of phase grids on [-pi, pi] (scaled for wider ranges).
    pub phi_points: usize,
    /// Prior width for the amplified scheme in `response`.
    pub qa_delta_phi: f64,
    /// Encoded phase for `husimi`.
    pub phase: f64,
    pub husimi_theta: usize,
    pub husimi_phi: usize,
    pub squeezing_step: f64,
    pub mc_samples: usize,
    pub oqi_tolerance: f64,
    pub oqi_max_iter: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Its `seed` always follows the run seed.
    pub optimizer: OptimizerConfig,
}

/// TOML view of [`RunConfig`]: every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<Experiment>,
    particles: Option<usize>,
    chi: Option<f64>,
    delta_phi: Option<Grid>,
    sigma_det: Option<Grid>,
    orders: Option<Vec<usize>>,
    times: Option<Vec<f64>>,
    nodes: Option<usize>,
    phi_points: Option<usize>,
    qa_delta_phi: Option<f64>,
    phase: Option<f64>,
    husimi_theta: Option<usize>,
    husimi_phi: Option<usize>,
    squeezing_step: Option<f64>,
    mc_samples: Option<usize>,
    oqi_tolerance: Option<f64>,
    oqi_max_iter: Option<usize>,
    optimizer: Option<OptimizerConfig>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
}

/// Sequential-QD times quoted for N = 100, chi = 1, n = 2.
pub const REFERENCE_SEQUENTIAL_TIMES: [f64; 3] = [0.0022, 0.014, 0.0061];
pub const DEFAULT_SEED: u64 = 2024;

impl RunConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        use Experiment::*;
        let frontier_grid = Grid::Range {
            start: 0.1,
            stop: 1.0,
            points: 15,
        };
        let (delta_phi, sigma_det) = match experiment {
            Response => (Grid::Scalar(0.5), Grid::Scalar(2.0)),
            Frontier | MseProfile | Squeezing | Oqi => (frontier_grid, Grid::Scalar(0.0)),
            Sequential => (
                Grid::Range {
                    start: 0.4,
                    stop: 1.4,
                    points: 11,
                },
                Grid::Scalar(0.0),
            ),
            Hybrid => (Grid::Scalar(0.5), Grid::List(vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0])),
            Husimi => (Grid::Scalar(0.5), Grid::Scalar(0.0)),
        };
        Self {
            experiment,
            particles: 100,
            chi: 1.0,
            delta_phi,
            sigma_det,
            orders: vec![1, 2, 3],
            times: REFERENCE_SEQUENTIAL_TIMES.to_vec(),
            nodes: crate::estimation::DEFAULT_NODES,
            phi_points: 2001,
            qa_delta_phi: 0.2,
            phase: 0.5,
            husimi_theta: 61,
            husimi_phi: 120,
            squeezing_step: 2.5e-4,
            mc_samples: 100_000,
            oqi_tolerance: crate::oqi::DEFAULT_TOLERANCE,
            oqi_max_iter: crate::oqi::DEFAULT_MAX_ITER,
            out_dir: PathBuf::from("out").join(experiment.name()),
            seed: DEFAULT_SEED,
            optimizer: OptimizerConfig {
                seed: DEFAULT_SEED,
                ..OptimizerConfig::default()
            },
        }
    }

    /// Parses TOML over the defaults of `experiment`, or of the file's own
    /// `experiment` key when `experiment` is `None`.
    pub fn from_toml(text: &str, experiment: Option<Experiment>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let exp = match (experiment, raw.experiment) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "config is for '{}' but '{}' was requested",
                    b.name(),
                    a.name()
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("config names no experiment".into())),
        };
        let mut c = Self::defaults(exp);
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = raw.$f { c.$f = v; })* };
        }
        take!(
            particles, chi, delta_phi, sigma_det, orders, times, nodes, phi_points, qa_delta_phi, phase,
            husimi_theta, husimi_phi, squeezing_step, mc_samples, oqi_tolerance, oqi_max_iter, optimizer,
            out_dir, seed
        );
        c.optimizer.seed = c.seed;
        Ok(c)
    }

    pub fn load(path: &Path, experiment: Option<Experiment>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, experiment)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets the run seed and the optimizer seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.optimizer.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.particles == 0 || self.particles > crate::spin::MAX_PARTICLES {
            return bad("particles must be in 1..=4096");
        }
        if !(self.chi.is_finite() && self.chi != 0.0) {
            return bad("chi must be finite and nonzero");
        }
        if self.delta_phi.values()?.iter().any(|d| *d <= 0.0) {
            return bad("delta_phi values must be positive");
        }
        if self.sigma_det.values()?.iter().any(|s| *s < 0.0) {
            return bad("sigma_det values must be >= 0");
        }
        if self.orders.is_empty() || self.orders.contains(&0) {
            return bad("orders must be a nonempty list of positive integers");
        }
        if self.nodes == 0 || self.phi_points < 2 || self.husimi_theta < 2 || self.husimi_phi < 2 {
            return bad("nodes must be >= 1 and grid sizes >= 2");
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return bad("times must be finite");
        }
        if !(self.qa_delta_phi > 0.0 && self.squeezing_step > 0.0 && self.oqi_tolerance > 0.0) {
            return bad("qa_delta_phi, squeezing_step and oqi_tolerance must be positive");
        }
        if self.optimizer.starts == 0 || self.optimizer.max_evaluations == 0 || !(self.optimizer.tolerance > 0.0) {
            return bad("optimizer needs starts >= 1, max_evaluations >= 1 and tolerance > 0");
        }
        Ok(())
    }
}
