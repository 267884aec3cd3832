//! Gaussian exploration policy: the actor network outputs the mean, the
//! diagonal covariance is fixed for the whole of training.

use super::{Mlp, NnError};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub actor: Mlp,
    /// Shared diagonal variance of every action coordinate.
    pub variance: f64,
}

impl GaussianPolicy {
    pub fn new(actor: Mlp, variance: f64) -> Self {
        assert!(variance > 0.0, "exploration variance must be positive");
        Self { actor, variance }
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Mean action for an observation (the deterministic test-time policy).
    pub fn mean(&self, obs: &DVector<f64>) -> Result<DVector<f64>, NnError> {
        self.actor.forward(obs)
    }

    /// Training-time action: mean plus white noise scaled by √variance.
    pub fn sample<R: Rng>(&self, obs: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>, NnError> {
        let mut action = self.mean(obs)?;
        let sigma = self.variance.sqrt();
        for v in action.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
        Ok(action)
    }

    /// Log density of `action` under the Gaussian centered at the mean for
    /// `obs`, summed over coordinates.
    pub fn log_prob(&self, obs: &DVector<f64>, action: &DVector<f64>) -> Result<f64, NnError> {
        let mean = self.mean(obs)?;
        Ok(self.log_prob_given_mean(&mean, action))
    }

    /// Log density with the mean already computed.
    pub fn log_prob_given_mean(&self, mean: &DVector<f64>, action: &DVector<f64>) -> f64 {
        let k = mean.len() as f64;
        let diff = action - mean;
        -0.5 * k * (TAU * self.variance).ln() - diff.norm_squared() / (2.0 * self.variance)
    }
}
