//! The linear transport problem `u_t + c·u_x = 0` with initial profile
//! `u(x, 0) = x·e^(−x²)`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Tape};
use crate::error::{PinnError, Result};
use crate::network::InputDerivs;
use crate::sampling::SpaceTimeDomain;

/// Advection speed of the reference problem.
pub const TRUE_SPEED: f64 = 3.0;

pub fn initial_condition(x: f64) -> f64 {
    x * (-(x * x)).exp()
}

/// `(x − 3t)·e^(−(x − 3t)²)`: the initial profile carried along the
/// characteristics `x − 3t = const`.
pub fn exact_solution(x: f64, t: f64) -> f64 {
    initial_condition(x - TRUE_SPEED * t)
}

/// Transport coefficient: known, or a trainable unknown with its starting
/// value.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ResidualSpec {
    Fixed(f64),
    Trainable(f64),
}

impl ResidualSpec {
    pub fn is_trainable(&self) -> bool {
        matches!(self, ResidualSpec::Trainable(_))
    }

    pub fn initial_value(&self) -> f64 {
        match *self {
            ResidualSpec::Fixed(c) | ResidualSpec::Trainable(c) => c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_value().is_finite() {
            Ok(())
        } else {
            Err(PinnError::Config(
                "transport coefficient must be finite".into(),
            ))
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// `u = 0` on both walls.
    #[default]
    DirichletZero,
    /// The exact solution's trace on the walls.
    DirichletExact,
}

#[derive(Clone, Copy, Debug)]
pub struct ConditionSpec {
    pub initial: fn(f64) -> f64,
    pub boundary: BoundaryCondition,
}

impl ConditionSpec {
    pub fn new(boundary: BoundaryCondition) -> Self {
        Self {
            initial: initial_condition,
            boundary,
        }
    }
}

impl Default for ConditionSpec {
    fn default() -> Self {
        Self::new(BoundaryCondition::DirichletZero)
    }
}

/// Prescribed value at a wall point.
pub fn boundary_value(
    spec: &ConditionSpec,
    domain: &SpaceTimeDomain,
    wall_x: f64,
    t: f64,
) -> Result<f64> {
    if !domain.is_wall(wall_x) {
        return Err(PinnError::NotOnWall {
            x: wall_x,
            x_min: domain.x_min,
            x_max: domain.x_max,
        });
    }
    Ok(match spec.boundary {
        BoundaryCondition::DirichletZero => 0.0,
        BoundaryCondition::DirichletExact => exact_solution(wall_x, t),
    })
}

/// Records `∂ŷ/∂t + c·∂ŷ/∂x`.
pub fn residual(tape: &mut Tape, derivs: &InputDerivs, coefficient: NodeId) -> Result<NodeId> {
    let nodes = [derivs.value, derivs.d_dx, derivs.d_dt, coefficient];
    if !nodes.iter().all(|&n| tape.owns(n)) {
        return Err(PinnError::MismatchedGraphs);
    }
    let advect = tape.mul(coefficient, derivs.d_dx);
    Ok(tape.add(derivs.d_dt, advect))
}
