use super::{sanitize_log_density, TargetModel};
use crate::math::LN_2PI;

/// Neal's funnel: `y ~ N(0, 3²)`, `x | y ~ N(0, e^y I_{d−1})`, with the
/// coordinates ordered `(y, x_1, …, x_{d−1})`. Normalized, so `log Z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Funnel {
    dim: usize,
}

impl Funnel {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "funnel needs at least two dimensions");
        Self { dim }
    }
}

impl TargetModel for Funnel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let y = z[0];
        let log_y = -0.5 * y * y / 9.0 - (3.0f64).ln() - 0.5 * LN_2PI;
        let inv_var = (-y).exp();
        let sq: f64 = z[1..].iter().map(|x| x * x).sum();
        let k = (self.dim - 1) as f64;
        let log_x = -0.5 * sq * inv_var - 0.5 * k * y - 0.5 * k * LN_2PI;
        sanitize_log_density(log_y + log_x)
    }

    fn grad_log_density(&self, z: &[f64], grad: &mut [f64]) {
        let y = z[0];
        let inv_var = (-y).exp();
        let sq: f64 = z[1..].iter().map(|x| x * x).sum();
        let k = (self.dim - 1) as f64;
        grad[0] = -y / 9.0 - 0.5 * k + 0.5 * sq * inv_var;
        for (g, x) in grad[1..].iter_mut().zip(&z[1..]) {
            *g = -x * inv_var;
        }
    }

    fn known_log_z(&self) -> Option<f64> {
        Some(0.0)
    }

    fn name(&self) -> String {
        format!("funnel(d={})", self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_density_at_origin() {
        for d in [2usize, 5, 10] {
            let f = Funnel::new(d);
            let z = vec![0.0; d];
            let expected = -0.0 / 9.0 - (3.0 * (2.0 * std::f64::consts::PI).sqrt()).ln()
                + (d - 1) as f64 * (-0.5 * (2.0 * std::f64::consts::PI).ln());
            assert!((f.log_density(&z) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn extreme_neck_is_not_nan() {
        let f = Funnel::new(3);
        let v = f.log_density(&[-800.0, 1.0, 1.0]);
        assert!(!v.is_nan());
    }
}
