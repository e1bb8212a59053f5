//! Particle system, resampling and the adaptive SMC loop.

mod resample;

pub use resample::{ess, resample, ResamplingScheme};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adapt::{tune, AdaptConfig, ObjectiveContext};
use crate::error::{Error, Result};
use crate::kernels::{propagate_batch, KernelFamily, KernelSpec, StepParams};
use crate::math::log_sum_exp;
use crate::model::AnnealedPath;

/// Sampler settings shared by every step of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub particles: usize,
    /// Resample when `ESS < resample_threshold · N`.
    pub resample_threshold: f64,
    pub scheme: ResamplingScheme,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            particles: 1024,
            resample_threshold: 0.5,
            scheme: ResamplingScheme::Systematic,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least two particles, got {}",
                self.particles
            )));
        }
        if !(self.resample_threshold > 0.0 && self.resample_threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "resample threshold must lie in (0, 1], got {}",
                self.resample_threshold
            )));
        }
        Ok(())
    }
}

/// How kernel parameters are chosen at each step.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Parameters for steps `1..=T`, in order.
    Fixed(Vec<StepParams>),
    Adaptive(AdaptConfig),
}

impl Policy {
    pub fn constant(params: StepParams, steps: usize) -> Self {
        Policy::Fixed(vec![params; steps])
    }
}

/// Particle positions (and momenta for KLMC), log-weights and the running
/// log normalizing-constant estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    dim: usize,
    /// `N × d`, row-major.
    pub positions: Vec<f64>,
    pub momenta: Option<Vec<f64>>,
    pub log_weights: Vec<f64>,
    pub log_z_hat: f64,
    pub step: usize,
}

fn standard_normals<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn gather(rows: &[f64], dim: usize, indices: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(indices.len() * dim);
    for &i in indices {
        out.extend_from_slice(&rows[i * dim..(i + 1) * dim]);
    }
    out
}

impl ParticleSystem {
    /// Draws `x₀ ~ N(0, I)` and, if `momentum`, `v₀ ~ N(0, I)`; unit weights.
    pub fn initialize<R: Rng + ?Sized>(dim: usize, particles: usize, momentum: bool, rng: &mut R) -> Self {
        let positions = standard_normals(rng, particles * dim);
        let momenta = momentum.then(|| standard_normals(rng, particles * dim));
        Self {
            dim,
            positions,
            momenta,
            log_weights: vec![0.0; particles],
            log_z_hat: 0.0,
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    fn resample_in_place<R: Rng + ?Sized>(&mut self, scheme: ResamplingScheme, rng: &mut R) -> Result<()> {
        let ancestors = resample(&self.log_weights, self.len(), scheme, rng).map_err(|_| Error::Collapse {
            step: self.step,
        })?;
        self.positions = gather(&self.positions, self.dim, &ancestors);
        if let Some(m) = &self.momenta {
            self.momenta = Some(gather(m, self.dim, &ancestors));
        }
        self.log_weights.iter_mut().for_each(|w| *w = 0.0);
        Ok(())
    }
}

/// Summary of one [`smc_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// ESS after reweighting, before any resampling.
    pub ess: f64,
    pub resampled: bool,
    /// Particles whose move or potential was numerically degenerate.
    pub degenerate: usize,
    /// MALA acceptance rate.
    pub acc_rate: Option<f64>,
}

/// Moves every particle to step `ps.step + 1` with fresh noise, reweights,
/// and resamples when the ESS drops below the threshold or at the last step.
pub fn smc_step<R: Rng + ?Sized>(
    ps: &mut ParticleSystem,
    spec: KernelSpec,
    path: &AnnealedPath,
    params: StepParams,
    prev_params: Option<StepParams>,
    cfg: &RunConfig,
    rng: &mut R,
) -> Result<StepOutcome> {
    let t = ps.step + 1;
    let n = ps.len();
    let d = ps.dim;
    let eps = standard_normals(rng, n * d);
    let uniforms: Option<Vec<f64>> =
        (spec.family == KernelFamily::Mala).then(|| (0..n).map(|_| rng.random::<f64>()).collect());

    let mut x_new = vec![0.0; n * d];
    let mut v_new = ps.momenta.as_ref().map(|m| vec![0.0; m.len()]);
    let transitions = propagate_batch(
        spec,
        path,
        t,
        params,
        prev_params,
        &ps.positions,
        ps.momenta.as_deref(),
        &eps,
        uniforms.as_deref(),
        &mut x_new,
        v_new.as_deref_mut(),
    );

    let mut degenerate = 0;
    let mut accepted = 0usize;
    for (lw, tr) in ps.log_weights.iter_mut().zip(&transitions) {
        if tr.degenerate && lw.is_finite() {
            degenerate += 1;
        }
        if tr.accepted == Some(true) {
            accepted += 1;
        }
        *lw += tr.log_g;
        if lw.is_nan() {
            *lw = f64::NEG_INFINITY;
        }
    }
    ps.positions = x_new;
    ps.momenta = v_new;
    ps.step = t;

    let lse = log_sum_exp(&ps.log_weights);
    if lse == f64::NEG_INFINITY || lse.is_nan() {
        return Err(Error::Collapse { step: t });
    }
    let ess_value = ess(&ps.log_weights).map_err(|_| Error::Collapse { step: t })?;
    let resampled = ess_value < cfg.resample_threshold * n as f64 || t == path.steps();
    if resampled {
        ps.log_z_hat += lse - (n as f64).ln();
        ps.resample_in_place(cfg.scheme, rng)?;
    }
    Ok(StepOutcome {
        ess: ess_value,
        resampled,
        degenerate,
        acc_rate: (spec.family == KernelFamily::Mala).then(|| accepted as f64 / n as f64),
    })
}

/// Per-step diagnostics of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub lambda: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub ess: f64,
    pub resampled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc_rate: Option<f64>,
    /// Distinct objective evaluations spent on adaptation.
    pub evals: usize,
    /// Regularized objective at the tuned parameters.
    pub objective_value: Option<f64>,
    /// Unregularized incremental-KL estimate at the tuned parameters.
    pub kl_estimate: Option<f64>,
    pub degenerate: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    /// `false` if a KLMC solve stopped at the sweep cap.
    #[serde(default = "default_true")]
    pub converged: bool,
}

fn default_true() -> bool {
    true
}

/// Final estimate and per-step diagnostics of one SMC run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub log_z_hat: f64,
    pub steps: Vec<StepRecord>,
}

impl RunResult {
    /// Parameters used at each step; feeding them to [`Policy::Fixed`]
    /// replays the run without adaptation.
    pub fn tuned_params(&self) -> Vec<StepParams> {
        self.steps.iter().map(|s| StepParams { h: s.h, rho: s.rho }).collect()
    }

    pub fn total_evaluations(&self) -> usize {
        self.steps.iter().map(|s| s.evals).sum()
    }

    pub fn mean_step_size(&self) -> f64 {
        self.steps.iter().map(|s| s.h).sum::<f64>() / self.steps.len() as f64
    }
}

/// Runs SMC from `q = N(0, I)` along `path`, seeding the generator from
/// `cfg.seed`.
pub fn smc_run(path: &AnnealedPath, spec: KernelSpec, policy: &Policy, cfg: &RunConfig) -> Result<RunResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    smc_run_with_rng(path, spec, policy, cfg, &mut rng)
}

/// [`smc_run`] with a caller-supplied generator.
pub fn smc_run_with_rng<R: Rng + ?Sized>(
    path: &AnnealedPath,
    spec: KernelSpec,
    policy: &Policy,
    cfg: &RunConfig,
    rng: &mut R,
) -> Result<RunResult> {
    cfg.validate()?;
    spec.validate()?;
    let steps = path.steps();
    match policy {
        Policy::Fixed(params) => {
            if params.len() != steps {
                return Err(Error::DimensionMismatch {
                    expected: steps,
                    got: params.len(),
                });
            }
            for p in params {
                p.validate(spec.family)?;
            }
        }
        Policy::Adaptive(adapt) => adapt.validate(cfg.particles, spec.family)?,
    }

    let d = path.dim();
    let mut ps = ParticleSystem::initialize(d, cfg.particles, spec.has_momentum(), rng);
    let mut records = Vec::with_capacity(steps);
    let mut prev: Option<StepParams> = None;

    for t in 1..=steps {
        let (params, tuned) = match policy {
            Policy::Fixed(params) => (params[t - 1], None),
            Policy::Adaptive(adapt) => {
                let b = adapt.subsample;
                let noise = standard_normals(rng, b * d);
                let picks = resample(&ps.log_weights, b, cfg.scheme, rng).map_err(|_| Error::Collapse { step: t })?;
                let positions = gather(&ps.positions, d, &picks);
                let momenta = ps.momenta.as_ref().map(|m| gather(m, d, &picks));
                let ctx = ObjectiveContext {
                    spec: spec.with_first_step(adapt.first_step_objective),
                    path,
                    t,
                    positions: &positions,
                    momenta: momenta.as_deref(),
                    noise: &noise,
                    prev,
                    h_anchor: prev.map_or(adapt.h_guess, |p| p.h),
                    tau: adapt.tau,
                };
                let tuned = tune(&ctx, adapt)?;
                (tuned.params, Some(tuned))
            }
        };
        let outcome = smc_step(&mut ps, spec, path, params, prev, cfg, rng)?;
        records.push(StepRecord {
            t,
            lambda: path.lambda(t),
            h: params.h,
            rho: params.rho,
            ess: outcome.ess,
            resampled: outcome.resampled,
            acc_rate: outcome.acc_rate,
            evals: tuned.map_or(0, |x| x.evaluations),
            objective_value: tuned.map(|x| x.objective_value),
            kl_estimate: tuned.map(|x| x.kl_estimate),
            degenerate: outcome.degenerate,
            sweeps: tuned.and_then(|x| x.sweeps),
            converged: tuned.is_none_or(|x| x.converged),
        });
        prev = Some(params);
    }
    Ok(RunResult {
        log_z_hat: ps.log_z_hat,
        steps: records,
    })
}
