use serde::{Deserialize, Serialize};

use super::params::TaggerParams;

/// RMSprop: `v ← ρ v + (1 - ρ) g²`, `θ ← θ - lr · g / (√v + ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        RmsProp {
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RmsPropState {
    settings: RmsProp,
    mean_square: Vec<Vec<f64>>,
}

impl RmsPropState {
    pub fn new(settings: RmsProp, params: &TaggerParams) -> Self {
        RmsPropState {
            settings,
            mean_square: params.slices().iter().map(|s| vec![0.0; s.len()]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut TaggerParams, grads: &TaggerParams) {
        let RmsProp {
            learning_rate,
            rho,
            epsilon,
        } = self.settings;
        for ((theta, g), v) in params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(&mut self.mean_square)
        {
            for i in 0..theta.len() {
                v[i] = rho * v[i] + (1.0 - rho) * g[i] * g[i];
                theta[i] -= learning_rate * g[i] / (v[i].sqrt() + epsilon);
            }
        }
    }
}
