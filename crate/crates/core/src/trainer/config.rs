use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PinnError, Result};
use crate::loss::LossWeights;
use crate::network::{Architecture, InitScheme};
use crate::optimizer::OptimizerConfig;
use crate::sampling::{
    make_observation_grid, sample_boundary, sample_initial, sample_interior, CollocationSet,
    Observation, Point, SamplingMode, SpaceTimeDomain,
};
use crate::transport::{exact_solution, BoundaryCondition, ResidualSpec};

fn default_coefficient_log_every() -> usize {
    100
}

/// Everything that determines a training run.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub init: InitScheme,
    /// Seeds the initializer and, through separate streams, every sampled
    /// point set.
    pub seed: u64,
    pub domain: SpaceTimeDomain,
    pub collocation: CollocationConfig,
    pub residual: ResidualSpec,
    #[serde(default)]
    pub boundary: BoundaryCondition,
    #[serde(default)]
    pub weights: LossWeights,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub log_every: usize,
    #[serde(default = "default_coefficient_log_every")]
    pub coefficient_log_every: usize,
    /// Fill the `seconds` column of the run log. Off by default because
    /// wall-clock time is the one logged quantity that is not reproducible.
    #[serde(default)]
    pub record_wall_clock: bool,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CollocationConfig {
    Sampled {
        n_interior: usize,
        n_boundary: usize,
        n_initial: usize,
        #[serde(default)]
        mode: SamplingMode,
        /// `[n_x, n_t]` grid of exact-solution observations.
        #[serde(default)]
        observation_grid: Option<[usize; 2]>,
    },
    Explicit {
        #[serde(default)]
        interior: Vec<Point>,
        #[serde(default)]
        boundary: Vec<Point>,
        #[serde(default)]
        initial: Vec<Point>,
        #[serde(default)]
        observations: Vec<Observation>,
    },
}

impl CollocationConfig {
    fn counts(&self) -> [usize; 4] {
        match self {
            CollocationConfig::Sampled {
                n_interior,
                n_boundary,
                n_initial,
                observation_grid,
                ..
            } => [
                *n_interior,
                *n_boundary,
                *n_initial,
                observation_grid.map_or(0, |[a, b]| a * b),
            ],
            CollocationConfig::Explicit {
                interior,
                boundary,
                initial,
                observations,
            } => [
                interior.len(),
                boundary.len(),
                initial.len(),
                observations.len(),
            ],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        self.domain.validate()?;
        self.residual.validate()?;
        self.weights.validate()?;
        self.optimizer.validate()?;
        if self.epochs == 0 {
            return Err(PinnError::Config("epochs must be at least 1".into()));
        }
        if self.log_every == 0 || self.coefficient_log_every == 0 {
            return Err(PinnError::Config(
                "logging cadence must be at least 1".into(),
            ));
        }
        if let CollocationConfig::Sampled {
            observation_grid: Some([n_x, n_t]),
            ..
        } = self.collocation
        {
            if n_x == 0 || n_t == 0 {
                return Err(PinnError::Config(format!(
                    "observation grid must be at least 1x1, got {n_x}x{n_t}"
                )));
            }
        }
        let names = ["n_interior", "n_boundary", "n_initial", "observations"];
        for ((w, n), name) in self
            .weights
            .as_array()
            .into_iter()
            .zip(self.collocation.counts())
            .zip(names)
        {
            if w > 0.0 && n == 0 {
                return Err(PinnError::Config(format!(
                    "{name} is empty but its loss weight is {w}"
                )));
            }
        }
        Ok(())
    }

    pub fn build_collocation(&self) -> Result<CollocationSet> {
        let domain = &self.domain;
        match &self.collocation {
            CollocationConfig::Sampled {
                n_interior,
                n_boundary,
                n_initial,
                mode,
                observation_grid,
            } => {
                let or_empty =
                    |n: usize,
                     f: fn(&SpaceTimeDomain, usize, u64, SamplingMode) -> Result<Vec<Point>>|
                     -> Result<Vec<Point>> {
                        if n == 0 {
                            Ok(Vec::new())
                        } else {
                            f(domain, n, self.seed, *mode)
                        }
                    };
                Ok(CollocationSet {
                    interior: or_empty(*n_interior, sample_interior)?,
                    boundary: or_empty(*n_boundary, sample_boundary)?,
                    initial: or_empty(*n_initial, sample_initial)?,
                    observations: match observation_grid {
                        Some([n_x, n_t]) => {
                            make_observation_grid(domain, *n_x, *n_t, exact_solution)?
                        }
                        None => Vec::new(),
                    },
                })
            }
            CollocationConfig::Explicit {
                interior,
                boundary,
                initial,
                observations,
            } => {
                let outside = interior
                    .iter()
                    .chain(boundary)
                    .chain(initial)
                    .chain(
                        observations
                            .iter()
                            .map(|o| Point::new(o.x, o.t))
                            .collect::<Vec<_>>()
                            .iter(),
                    )
                    .find(|p| !domain.contains(**p))
                    .copied();
                if let Some(p) = outside {
                    return Err(PinnError::Config(format!(
                        "point ({}, {}) lies outside the domain",
                        p.x, p.t
                    )));
                }
                Ok(CollocationSet {
                    interior: interior.clone(),
                    boundary: boundary.clone(),
                    initial: initial.clone(),
                    observations: observations.clone(),
                })
            }
        }
    }

    /// Hex digest identifying the run setup. The epoch budget and the
    /// wall-clock switch are excluded so a checkpoint can be resumed with a
    /// longer budget.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.epochs = 0;
        canonical.record_wall_clock = false;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub const PRESET_NAMES: [&str; 4] = [
    "forward-tutorial",
    "forward-small",
    "inverse-tutorial",
    "table-replication",
];

fn forward_base() -> TrainConfig {
    TrainConfig {
        architecture: Architecture::mlp(&[64, 64]).expect("valid architecture"),
        init: InitScheme::GlorotUniform,
        seed: 1,
        domain: SpaceTimeDomain::tutorial(),
        collocation: CollocationConfig::Sampled {
            n_interior: 8190,
            n_boundary: 4094,
            n_initial: 4094,
            mode: SamplingMode::UniformRandom,
            observation_grid: None,
        },
        residual: ResidualSpec::Fixed(3.0),
        boundary: BoundaryCondition::DirichletZero,
        weights: LossWeights {
            w_obs: 0.0,
            ..LossWeights::default()
        },
        optimizer: OptimizerConfig::adam(0.001),
        epochs: 2000,
        log_every: 100,
        coefficient_log_every: 100,
        record_wall_clock: false,
    }
}

/// Built-in configurations. The two small presets place their 70 points
/// on equispaced grids: at that size a random draw can leave gaps in the
/// initial profile that no amount of training recovers.
pub fn preset(name: &str) -> Option<TrainConfig> {
    let config = match name {
        "forward-tutorial" => forward_base(),
        "forward-small" => TrainConfig {
            collocation: CollocationConfig::Sampled {
                n_interior: 40,
                n_boundary: 20,
                n_initial: 10,
                mode: SamplingMode::EquispacedGrid,
                observation_grid: None,
            },
            epochs: 5000,
            ..forward_base()
        },
        "inverse-tutorial" => TrainConfig {
            collocation: CollocationConfig::Sampled {
                n_interior: 40,
                n_boundary: 20,
                n_initial: 10,
                mode: SamplingMode::EquispacedGrid,
                observation_grid: Some([10, 10]),
            },
            residual: ResidualSpec::Trainable(0.0),
            weights: LossWeights::default(),
            optimizer: OptimizerConfig::adam(0.01),
            epochs: 20_000,
            ..forward_base()
        },
        "table-replication" => TrainConfig {
            architecture: Architecture::mlp(&[2]).expect("valid architecture"),
            init: InitScheme::Constant {
                weight: 0.5,
                bias: 0.0,
            },
            collocation: CollocationConfig::Explicit {
                interior: vec![Point::new(0.1, 0.1)],
                boundary: Vec::new(),
                initial: vec![Point::new(0.1, 0.0)],
                observations: Vec::new(),
            },
            weights: LossWeights {
                w_f: 1.0,
                w_b: 0.0,
                w_i: 1.0,
                w_obs: 0.0,
            },
            optimizer: OptimizerConfig::sgd(0.001),
            epochs: 5,
            log_every: 1,
            ..forward_base()
        },
        _ => return None,
    };
    Some(config)
}
