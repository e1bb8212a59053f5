//! Target densities, temperature schedules and the geometric annealing path
//! between a standard Gaussian reference and a target.

mod funnel;
mod gaussian;
mod logistic;
mod schedule;

use std::sync::Arc;

pub use funnel::Funnel;
pub use gaussian::ShiftedGaussian;
pub use logistic::LogisticRegression;
pub use schedule::{make_schedule, Schedule, ScheduleKind};

use crate::math::std_normal_logpdf;

/// An unnormalized log-density `log γ` on `ℝᵈ` with an analytic gradient.
///
/// Points outside the support evaluate to `-∞`; implementations never return
/// `NaN` from [`TargetModel::log_density`].
pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    /// Writes `∇ log γ(x)` into `grad`.
    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]);

    /// Analytic `log Z` when known.
    fn known_log_z(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> String;
}

/// Maps `NaN` to `-∞`, the log-density convention for degenerate points.
pub(crate) fn sanitize_log_density(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Geometric path `log γ_t = (1 − λ_t) log q + λ_t log γ` from `q = N(0, I)`.
#[derive(Clone)]
pub struct AnnealedPath {
    target: Arc<dyn TargetModel>,
    schedule: Schedule,
}

impl AnnealedPath {
    pub fn new(target: Arc<dyn TargetModel>, schedule: Schedule) -> Self {
        Self { target, schedule }
    }

    pub fn target(&self) -> &Arc<dyn TargetModel> {
        &self.target
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Number of annealing steps `T`.
    pub fn steps(&self) -> usize {
        self.schedule.steps()
    }

    pub fn lambda(&self, t: usize) -> f64 {
        self.schedule.lambda(t)
    }

    /// Reference log-density `log q(x)`.
    pub fn reference_log_density(x: &[f64]) -> f64 {
        std_normal_logpdf(x)
    }

    /// `log γ_t(x)`.
    pub fn log_density(&self, t: usize, x: &[f64]) -> f64 {
        self.log_density_at(self.lambda(t), x)
    }

    /// `(1 − λ) log q(x) + λ log γ(x)`, evaluated as `log q + λ(log γ − log q)`
    /// so that `γ = q` gives `log q` exactly; `λ = 0` never touches `log γ`.
    pub fn log_density_at(&self, lambda: f64, x: &[f64]) -> f64 {
        let log_q = std_normal_logpdf(x);
        if lambda == 0.0 {
            return log_q;
        }
        let log_target = self.target.log_density(x);
        if lambda == 1.0 {
            return sanitize_log_density(log_target);
        }
        sanitize_log_density(log_q + lambda * (log_target - log_q))
    }

    /// `∇ log γ_t(x)` written into `grad`.
    pub fn grad(&self, t: usize, x: &[f64], grad: &mut [f64]) {
        self.grad_at(self.lambda(t), x, grad)
    }

    pub fn grad_at(&self, lambda: f64, x: &[f64], grad: &mut [f64]) {
        if lambda == 0.0 {
            for (g, xi) in grad.iter_mut().zip(x) {
                *g = -xi;
            }
            return;
        }
        self.target.grad_log_density(x, grad);
        if lambda == 1.0 {
            return;
        }
        for (g, xi) in grad.iter_mut().zip(x) {
            *g = (1.0 - lambda) * (-xi) + lambda * *g;
        }
    }
}

impl std::fmt::Debug for AnnealedPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnnealedPath")
            .field("target", &self.target.name())
            .field("schedule", &self.schedule)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::LN_2PI;

    fn gaussian_path(dim: usize, mean: f64, schedule: Schedule) -> AnnealedPath {
        AnnealedPath::new(Arc::new(ShiftedGaussian::new(dim, mean)), schedule)
    }

    #[test]
    fn endpoints_are_reference_and_target() {
        let path = gaussian_path(2, 3.0, Schedule::linear(4).unwrap());
        let x = [0.4, -1.3];
        assert_eq!(path.log_density(0, &x), std_normal_logpdf(&x));
        assert_eq!(path.log_density(4, &x), path.target().log_density(&x));
        let mut g = [0.0; 2];
        path.grad(0, &x, &mut g);
        assert_eq!(g, [-0.4, 1.3]);
        let mut gt = [0.0; 2];
        path.target().grad_log_density(&x, &mut gt);
        path.grad(4, &x, &mut g);
        assert_eq!(g, gt);
    }

    #[test]
    fn midpoint_gaussian_closed_form() {
        let path = gaussian_path(1, 3.0, Schedule::new(vec![0.0, 0.5, 1.0]).unwrap());
        let expected = -0.5 * (0.5 * 1.0 + 0.5 * 4.0) - 0.5 * LN_2PI;
        assert!((path.log_density(1, &[1.0]) - expected).abs() < 1e-14);
        // mixture score: (1-λ)(-x) + λ(μ - x)
        let mut g = [0.0];
        path.grad(1, &[1.0], &mut g);
        assert!((g[0] - (0.5 * -1.0 + 0.5 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn support_violation_gives_neg_infinity() {
        struct HalfLine;
        impl TargetModel for HalfLine {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, x: &[f64]) -> f64 {
                if x[0] < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -x[0]
                }
            }
            fn grad_log_density(&self, _x: &[f64], g: &mut [f64]) {
                g[0] = -1.0;
            }
            fn name(&self) -> String {
                "half-line".into()
            }
        }
        let path = AnnealedPath::new(Arc::new(HalfLine), Schedule::linear(2).unwrap());
        assert_eq!(path.log_density(1, &[-1.0]), f64::NEG_INFINITY);
        assert!(path.log_density(0, &[-1.0]).is_finite());
    }
}
