//! Full-batch update rules over the flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{PinnError, Result};

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            ..Self::adam(learning_rate)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(PinnError::Optimizer(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(PinnError::Optimizer(format!(
                    "{name} must lie in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(PinnError::Optimizer(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(PinnError::LengthMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// `params − η·grads`.
pub fn sgd_step(params: &[f64], grads: &[f64], learning_rate: f64) -> Result<Vec<f64>> {
    check_lengths(params.len(), grads.len())?;
    Ok(params
        .iter()
        .zip(grads)
        .map(|(p, g)| p - learning_rate * g)
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step_count: 0,
        }
    }

    /// Bias-corrected Adam update of `params` in place.
    pub fn update(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        config: &OptimizerConfig,
    ) -> Result<()> {
        check_lengths(params.len(), grads.len())?;
        check_lengths(self.first_moment.len(), params.len())?;
        self.step_count += 1;
        let (b1, b2) = (config.beta1, config.beta2);
        let step = self.step_count as i32;
        let correction1 = 1.0 - b1.powi(step);
        let correction2 = 1.0 - b2.powi(step);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
        Ok(())
    }
}

pub fn adam_step(
    state: &AdamState,
    params: &[f64],
    grads: &[f64],
    config: &OptimizerConfig,
) -> Result<(AdamState, Vec<f64>)> {
    let mut state = state.clone();
    let mut params = params.to_vec();
    state.update(&mut params, grads, config)?;
    Ok((state, params))
}

/// Optimizer with its running state, as used by the trainer.
#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer {
    Sgd {
        learning_rate: f64,
    },
    Adam {
        config: OptimizerConfig,
        state: AdamState,
    },
}

impl Optimizer {
    pub fn new(config: &OptimizerConfig, n: usize) -> Result<Self> {
        config.validate()?;
        Ok(match config.kind {
            OptimizerKind::Sgd => Optimizer::Sgd {
                learning_rate: config.learning_rate,
            },
            OptimizerKind::Adam => Optimizer::Adam {
                config: *config,
                state: AdamState::new(n),
            },
        })
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            Optimizer::Sgd { learning_rate } => {
                check_lengths(params.len(), grads.len())?;
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= *learning_rate * g;
                }
                Ok(())
            }
            Optimizer::Adam { config, state } => state.update(params, grads, config),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sgd_arithmetic() {
        assert_eq!(sgd_step(&[0.5], &[0.2], 0.05).unwrap(), vec![0.49]);
        let p = [0.3, -1.25, 7.0];
        assert_eq!(sgd_step(&p, &[0.0; 3], 0.1).unwrap(), p.to_vec());
        let (g1, g2) = (0.3, -0.7);
        assert_eq!(
            sgd_step(&[0.5], &[g1 + g2], 0.05).unwrap(),
            vec![0.5 - 0.05 * (g1 + g2)]
        );
        assert!(sgd_step(&[0.0; 2], &[0.0; 3], 0.1).is_err());
    }

    #[test]
    fn adam_first_step_is_about_lr() {
        let cfg = OptimizerConfig::adam(0.001);
        let (state, p) = adam_step(&AdamState::new(1), &[0.5], &[0.2], &cfg).unwrap();
        // m̂ = g, v̂ = g², so Δ = −η·g/(|g| + ε).
        let expected = 0.5 - 0.001 * 0.2 / (0.2 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!(((p[0] - 0.5) + 0.001).abs() < 1e-9);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let cfg = OptimizerConfig::adam(0.01);
        let (_, p) = adam_step(&AdamState::new(2), &[0.25, -3.0], &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(p, vec![0.25, -3.0]);
    }

    #[test]
    fn adam_symmetric_gradients() {
        let cfg = OptimizerConfig::adam(0.01);
        let (_, p) = adam_step(&AdamState::new(2), &[1.0, 1.0], &[0.37, -0.37], &cfg).unwrap();
        assert_eq!(p[0] - 1.0, -(p[1] - 1.0));
    }

    #[test]
    fn adam_length_mismatch() {
        let cfg = OptimizerConfig::adam(0.01);
        assert!(adam_step(&AdamState::new(2), &[1.0], &[0.1], &cfg).is_err());
        assert!(adam_step(&AdamState::new(1), &[1.0], &[0.1, 0.2], &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::adam(0.0).validate().is_err());
        assert!(OptimizerConfig {
            beta2: 1.0,
            ..OptimizerConfig::adam(0.1)
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig {
            epsilon: 0.0,
            ..OptimizerConfig::adam(0.1)
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig::sgd(0.05).validate().is_ok());
    }

    proptest! {
        #[test]
        fn sgd_is_affine_in_gradient(
            p in -5.0f64..5.0, g1 in -5.0f64..5.0, g2 in -5.0f64..5.0, lr in 1e-4f64..1.0
        ) {
            let a = sgd_step(&[p], &[g1], lr).unwrap()[0] - p;
            let b = sgd_step(&[p], &[g2], lr).unwrap()[0] - p;
            let ab = sgd_step(&[p], &[g1 + g2], lr).unwrap()[0] - p;
            prop_assert!((ab - (a + b)).abs() <= 1e-12 * (1.0 + p.abs()));
        }

        #[test]
        fn adam_first_step_is_bounded(g in prop_oneof![-10.0f64..-1e-3, 1e-3f64..10.0], lr in 1e-4f64..0.5) {
            let cfg = OptimizerConfig::adam(lr);
            let (state, p) = adam_step(&AdamState::new(1), &[0.0], &[g], &cfg).unwrap();
            prop_assert!(p[0].abs() <= 1.01 * lr);
            prop_assert!(state.second_moment[0] >= 0.0);
        }

        #[test]
        fn adam_is_deterministic(g in -3.0f64..3.0, p in -3.0f64..3.0) {
            let cfg = OptimizerConfig::adam(0.01);
            let s = AdamState::new(1);
            prop_assert_eq!(adam_step(&s, &[p], &[g], &cfg).unwrap(), adam_step(&s, &[p], &[g], &cfg).unwrap());
        }
    }
}
