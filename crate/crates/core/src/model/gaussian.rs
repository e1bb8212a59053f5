use super::TargetModel;
use crate::math::LN_2PI;

/// Normalized isotropic Gaussian `N(μ·1_d, I_d)`; `log Z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedGaussian {
    dim: usize,
    mean: f64,
}

impl ShiftedGaussian {
    pub fn new(dim: usize, mean: f64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim, mean }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

impl TargetModel for ShiftedGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let sq: f64 = x.iter().map(|xi| (xi - self.mean) * (xi - self.mean)).sum();
        -0.5 * sq - 0.5 * self.dim as f64 * LN_2PI
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) {
        for (g, xi) in grad.iter_mut().zip(x) {
            *g = self.mean - xi;
        }
    }

    fn known_log_z(&self) -> Option<f64> {
        Some(0.0)
    }

    fn name(&self) -> String {
        format!("gaussian(d={}, mean={})", self.dim, self.mean)
    }
}
