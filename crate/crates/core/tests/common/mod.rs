#![allow(dead_code)]

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use smc_tune::kernels::{leapfrog, lmc_logpdf, refresh};
use smc_tune::model::{AnnealedPath, Funnel, LogisticRegression, Schedule, ShiftedGaussian, TargetModel};
use smc_tune::schedule_adapt::{remap_schedule, BarrierKnots};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn builtin_targets() -> Vec<Arc<dyn TargetModel>> {
    vec![
        Arc::new(ShiftedGaussian::new(4, 1.5)),
        Arc::new(Funnel::new(4)),
        Arc::new(LogisticRegression::synthetic(50, 5, 7).expect("synthetic data")),
    ]
}

/// Largest relative error between the analytic gradient and central
/// differences with step `1e-5·(1 + |x_i|)`.
pub fn max_gradient_error(target: &dyn TargetModel, x: &[f64]) -> f64 {
    let d = x.len();
    let mut grad = vec![0.0; d];
    target.grad_log_density(x, &mut grad);
    let mut worst: f64 = 0.0;
    for i in 0..d {
        let step = 1e-5 * (1.0 + x[i].abs());
        let mut hi = x.to_vec();
        let mut lo = x.to_vec();
        hi[i] += step;
        lo[i] -= step;
        let fd = (target.log_density(&hi) - target.log_density(&lo)) / (2.0 * step);
        let err = (grad[i] - fd).abs() / grad[i].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}

/// Worst gradient error over `points` random draws per built-in target.
pub fn gradient_check(points: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for target in builtin_targets() {
        for _ in 0..points {
            let x: Vec<f64> = normals(&mut r, target.dim()).iter().map(|z| 0.5 * z).collect();
            worst = worst.max(max_gradient_error(target.as_ref(), &x));
        }
    }
    worst
}

pub fn gaussian_path(dim: usize, mean: f64, steps: usize) -> AnnealedPath {
    AnnealedPath::new(
        Arc::new(ShiftedGaussian::new(dim, mean)),
        Schedule::linear(steps).expect("schedule"),
    )
}

/// Runs a leapfrog step, flips the momentum, steps again and returns the
/// largest deviation from the starting point.
pub fn leapfrog_roundtrip_error(path: &AnnealedPath, t: usize, x: &[f64], v: &[f64], h: f64) -> f64 {
    let d = x.len();
    let (mut x1, mut v1) = (vec![0.0; d], vec![0.0; d]);
    assert!(leapfrog(path, t, x, v, h, &mut x1, &mut v1));
    let flipped: Vec<f64> = v1.iter().map(|vi| -vi).collect();
    let (mut x2, mut v2) = (vec![0.0; d], vec![0.0; d]);
    assert!(leapfrog(path, t, &x1, &flipped, h, &mut x2, &mut v2));
    x.iter()
        .zip(&x2)
        .map(|(a, b)| (a - b).abs())
        .chain(v.iter().zip(&v2).map(|(a, b)| (a + b).abs()))
        .fold(0.0, f64::max)
}

/// Worst reversibility error on the funnel path, which has a curved gradient.
pub fn leapfrog_reversibility(trials: usize, seed: u64) -> f64 {
    let path = AnnealedPath::new(Arc::new(Funnel::new(3)), Schedule::linear(4).expect("schedule"));
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..trials {
        let x: Vec<f64> = normals(&mut r, 3).iter().map(|z| 0.5 * z).collect();
        let v = normals(&mut r, 3);
        worst = worst.max(leapfrog_roundtrip_error(&path, 1 + k % 4, &x, &v, 0.05));
    }
    worst
}

/// Largest deviation, in standard errors, of the sample mean, variance and
/// cross-covariance of refreshed momenta from those of `N(0, I)`.
pub fn refresh_stationarity_z(draws: usize, rho: f64, seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = 2;
    let n = draws as f64;
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    let mut cross = 0.0;
    let mut out = vec![0.0; d];
    for _ in 0..draws {
        let v = normals(&mut r, d);
        let e = normals(&mut r, d);
        refresh(&v, &e, rho, &mut out);
        for i in 0..d {
            sum[i] += out[i];
            sq[i] += out[i] * out[i];
        }
        cross += out[0] * out[1];
    }
    // Under N(0, I): mean has SE 1/√n, E[x²] = 1 with SE √2/√n, E[x y] = 0
    // with SE 1/√n.
    let se = 1.0 / n.sqrt();
    let mut z: f64 = 0.0;
    for i in 0..d {
        z = z.max((sum[i] / n).abs() / se);
        z = z.max((sq[i] / n - 1.0).abs() / (2f64.sqrt() * se));
    }
    z.max((cross / n).abs() / se)
}

/// `|∫ exp(lmc_logpdf(x, ·)) − 1|` by composite Simpson quadrature in one
/// dimension, maximized over a few starting points and step sizes.
pub fn lmc_normalization_error() -> f64 {
    let path = gaussian_path(1, 2.0, 8);
    let mut worst: f64 = 0.0;
    for &x in &[-1.0, 0.0, 2.5] {
        for &h in &[0.01, 0.1, 0.5] {
            let mut mean = [0.0];
            smc_tune::kernels::lmc_mean(&path, 3, &[x], h, &mut mean);
            let sd = (2.0 * h).sqrt();
            let (lo, hi) = (mean[0] - 12.0 * sd, mean[0] + 12.0 * sd);
            let n = 4000;
            let w = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let y = lo + i as f64 * w;
                let coef = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += coef * lmc_logpdf(&path, 3, &[x], &[y], h).exp();
            }
            worst = worst.max((acc * w / 3.0 - 1.0).abs());
        }
    }
    worst
}

/// Remaps a schedule through a barrier with equal increments at its own
/// knots, keeping the length, and returns the largest knot change.
pub fn remap_identity_error(schedule: &Schedule, increment: f64) -> f64 {
    let steps = schedule.steps();
    let increments = vec![increment; steps];
    let knots = BarrierKnots::from_increments(schedule.lambdas(), &increments).expect("knots");
    let out = remap_schedule(&knots, steps).expect("remap");
    schedule
        .lambdas()
        .iter()
        .zip(out.lambdas())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
