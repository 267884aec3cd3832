//! Input normalization fitted once on a collection of states and frozen
//! afterwards.

use super::NnError;
use nalgebra::DVector;

/// Per-coordinate mean and standard deviation. Standard deviations are
/// floored so constant coordinates normalize to 0 instead of dividing by
/// zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
    pub count: u64,
    pub floor: f64,
}

impl Normalizer {
    /// Fit population statistics (denominator n) over the samples.
    pub fn fit(samples: &[DVector<f64>], floor: f64) -> Result<Self, NnError> {
        if samples.len() < 2 {
            return Err(NnError::TooFewSamples(samples.len()));
        }
        let dim = samples[0].len();
        let n = samples.len() as f64;
        let mut mean = DVector::zeros(dim);
        for s in samples {
            assert_eq!(s.len(), dim, "all samples must share one dimension");
            mean += s;
        }
        mean /= n;
        let mut var = DVector::zeros(dim);
        for s in samples {
            let d = s - &mean;
            var += d.component_mul(&d);
        }
        var /= n;
        let std = var.map(|v| v.sqrt().max(floor));
        Ok(Self { mean, std, count: samples.len() as u64, floor })
    }

    /// Identity transform of the given dimension, for untrained pipelines.
    pub fn identity(dim: usize) -> Self {
        Self { mean: DVector::zeros(dim), std: DVector::from_element(dim, 1.0), count: 0, floor: 1e-6 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, x: &DVector<f64>) -> Result<DVector<f64>, NnError> {
        if x.len() != self.dim() {
            return Err(NnError::NormalizerShape { fitted: self.dim(), input: x.len() });
        }
        Ok((x - &self.mean).component_div(&self.std))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_case() {
        let samples = vec![DVector::from_vec(vec![0.0]), DVector::from_vec(vec![2.0])];
        let n = Normalizer::fit(&samples, 1e-6).unwrap();
        assert_relative_eq!(n.mean[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(n.std[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(n.normalize(&DVector::from_vec(vec![1.0])).unwrap()[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_coordinate_uses_floor() {
        let samples: Vec<_> = (0..10).map(|_| DVector::from_vec(vec![3.5])).collect();
        let n = Normalizer::fit(&samples, 1e-6).unwrap();
        assert_eq!(n.std[0], 1e-6);
        assert_eq!(n.normalize(&DVector::from_vec(vec![3.5])).unwrap()[0], 0.0);
    }

    #[test]
    fn empty_or_single_sample_rejected() {
        assert!(Normalizer::fit(&[], 1e-6).is_err());
        assert!(Normalizer::fit(&[DVector::zeros(2)], 1e-6).is_err());
    }

    #[test]
    fn normalized_fitting_set_is_standardized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let samples: Vec<_> = (0..5000)
            .map(|_| DVector::from_fn(3, |i, _| rng.gen_range(-1.0..1.0) * (i as f64 + 1.0) + 0.3))
            .collect();
        let n = Normalizer::fit(&samples, 1e-6).unwrap();
        let mut mean = DVector::<f64>::zeros(3);
        let mut var = DVector::<f64>::zeros(3);
        for s in &samples {
            mean += n.normalize(s).unwrap();
        }
        mean /= samples.len() as f64;
        for s in &samples {
            let d = n.normalize(s).unwrap() - &mean;
            var += d.component_mul(&d);
        }
        var /= samples.len() as f64;
        for i in 0..3 {
            assert!(mean[i].abs() <= 1e-9);
            assert!((var[i].sqrt() - 1.0).abs() <= 1e-6);
        }
    }
}
