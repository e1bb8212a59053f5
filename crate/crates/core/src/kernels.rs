//! Forward kernels (LMC, KLMC, MALA), their potentials, and per-particle
//! propagation shared by the sampler and the adaptation objectives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{gaussian_logpdf, std_normal_logpdf};
use crate::model::AnnealedPath;

/// Markov kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Lmc,
    Klmc,
    Mala,
}

/// Backward kernel choice for LMC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backward {
    /// `L_{t−1} = K_{t−1}` with the previous step size.
    #[serde(rename = "tc-fwd")]
    TimeCorrectForward,
    /// `L_{t−1} = K_t`.
    #[serde(rename = "fwd")]
    Forward,
    /// Detailed-balance formula; potential is `γ_t(x_{t−1}) / γ_{t−1}(x_{t−1})`.
    #[serde(rename = "dbf")]
    DetailedBalance,
}

/// Backward kernel used at the first step of an LMC run weighted with the
/// time-correct forward kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstStep {
    /// `L_0 = K_0`, the LMC kernel of the reference, with step size `h_1`.
    #[default]
    TimeCorrect,
    /// `L_0(x_1, ·) = q`, giving `G_1 = γ_1(x_1) / K_1(x_0, x_1)`. Its weights
    /// have infinite variance once `2h_1` is small against the target scale.
    Reference,
}

/// Log-potential variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Potential {
    LmcFirst,
    LmcTimeCorrectForward,
    LmcForward,
    LmcDetailedBalance,
    MalaDetailedBalance,
    Klmc,
}

/// A kernel family together with the backward kernel it is weighted with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub backward: Backward,
    #[serde(default)]
    pub first_step: FirstStep,
}

impl KernelSpec {
    pub fn lmc(backward: Backward) -> Self {
        Self {
            family: KernelFamily::Lmc,
            backward,
            first_step: FirstStep::TimeCorrect,
        }
    }

    pub fn klmc() -> Self {
        Self {
            family: KernelFamily::Klmc,
            backward: Backward::TimeCorrectForward,
            first_step: FirstStep::TimeCorrect,
        }
    }

    pub fn mala() -> Self {
        Self {
            family: KernelFamily::Mala,
            backward: Backward::DetailedBalance,
            first_step: FirstStep::TimeCorrect,
        }
    }

    pub fn with_first_step(self, first_step: FirstStep) -> Self {
        Self { first_step, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == KernelFamily::Mala && self.backward != Backward::DetailedBalance {
            return Err(Error::Config("MALA is weighted with the detailed-balance potential only".into()));
        }
        Ok(())
    }

    /// Potential used at step `t ≥ 1`.
    pub fn potential(&self, t: usize) -> Potential {
        match (self.family, self.backward) {
            (KernelFamily::Klmc, _) => Potential::Klmc,
            (KernelFamily::Mala, _) => Potential::MalaDetailedBalance,
            (KernelFamily::Lmc, Backward::TimeCorrectForward) if t == 1 && self.first_step == FirstStep::Reference => {
                Potential::LmcFirst
            }
            (KernelFamily::Lmc, Backward::TimeCorrectForward) => Potential::LmcTimeCorrectForward,
            (KernelFamily::Lmc, Backward::Forward) => Potential::LmcForward,
            (KernelFamily::Lmc, Backward::DetailedBalance) => Potential::LmcDetailedBalance,
        }
    }

    pub fn has_momentum(&self) -> bool {
        self.family == KernelFamily::Klmc
    }
}

/// Kernel parameters for one step: step size and, for KLMC, refreshment rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl StepParams {
    pub fn lmc(h: f64) -> Self {
        Self { h, rho: None }
    }

    pub fn klmc(h: f64, rho: f64) -> Self {
        Self { h, rho: Some(rho) }
    }

    pub fn validate(&self, family: KernelFamily) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {}", self.h)));
        }
        if family == KernelFamily::Klmc {
            match self.rho {
                Some(rho) if rho > 0.0 && rho < 1.0 => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "refreshment rate must lie in (0, 1), got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    fn rho_or_default(&self) -> f64 {
        self.rho.unwrap_or(0.5)
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Writes the LMC mean `x + h ∇log π_t(x)` into `out`.
pub fn lmc_mean(path: &AnnealedPath, t: usize, x: &[f64], h: f64, out: &mut [f64]) {
    path.grad(t, x, out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = xi + h * *o;
    }
}

/// Reparameterized LMC move `x + h ∇log π_t(x) + √(2h) ε`. Returns `false`
/// when the result is not finite.
pub fn lmc_map(path: &AnnealedPath, t: usize, x: &[f64], eps: &[f64], h: f64, out: &mut [f64]) -> bool {
    lmc_mean(path, t, x, h, out);
    let scale = (2.0 * h).sqrt();
    for (o, e) in out.iter_mut().zip(eps) {
        *o += scale * e;
    }
    all_finite(out)
}

/// `log N(x′; x + h ∇log π_t(x), 2h I)`.
pub fn lmc_logpdf(path: &AnnealedPath, t: usize, x: &[f64], x_new: &[f64], h: f64) -> f64 {
    let mut mean = vec![0.0; x.len()];
    lmc_mean(path, t, x, h, &mut mean);
    gaussian_logpdf(x_new, &mean, 2.0 * h)
}

/// Partial momentum refreshment `√(1−ρ²) v + ρ ε`.
pub fn refresh(v: &[f64], eps: &[f64], rho: f64, out: &mut [f64]) {
    let keep = (1.0 - rho * rho).sqrt();
    for ((o, vi), e) in out.iter_mut().zip(v).zip(eps) {
        *o = keep * vi + rho * e;
    }
}

/// One kick–drift–kick leapfrog step on `−log π_t`. Returns `false` when the
/// result is not finite.
pub fn leapfrog(
    path: &AnnealedPath,
    t: usize,
    x: &[f64],
    v: &[f64],
    h: f64,
    x_out: &mut [f64],
    v_out: &mut [f64],
) -> bool {
    let mut grad = vec![0.0; x.len()];
    path.grad(t, x, &mut grad);
    for i in 0..x.len() {
        v_out[i] = v[i] + 0.5 * h * grad[i];
        x_out[i] = x[i] + h * v_out[i];
    }
    path.grad(t, x_out, &mut grad);
    for (vo, g) in v_out.iter_mut().zip(&grad) {
        *vo += 0.5 * h * g;
    }
    all_finite(x_out) && all_finite(v_out)
}

/// Refreshment followed by one leapfrog step. Writes the intermediate
/// momentum `v_half` as well, since the potential needs it.
#[allow(clippy::too_many_arguments)]
pub fn klmc_step(
    path: &AnnealedPath,
    t: usize,
    x: &[f64],
    v: &[f64],
    eps: &[f64],
    h: f64,
    rho: f64,
    x_out: &mut [f64],
    v_out: &mut [f64],
    v_half: &mut [f64],
) -> bool {
    refresh(v, eps, rho, v_half);
    leapfrog(path, t, x, v_half, h, x_out, v_out)
}

/// Outcome of a Metropolis-adjusted Langevin move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalaMove {
    pub accepted: bool,
    pub alpha: f64,
    /// `‖y − x‖²` of the proposal, whether or not it was accepted.
    pub proposal_sq_jump: f64,
    /// The proposal was finite.
    pub finite: bool,
}

/// MALA move from `x` with proposal noise `eps` and acceptance uniform `u`.
/// `out` receives the proposal if accepted and `x` otherwise.
#[allow(clippy::too_many_arguments)]
pub fn mala_step(
    path: &AnnealedPath,
    t: usize,
    x: &[f64],
    eps: &[f64],
    u: f64,
    h: f64,
    out: &mut [f64],
) -> MalaMove {
    let mut y = vec![0.0; x.len()];
    let finite = lmc_map(path, t, x, eps, h, &mut y);
    let sq_jump: f64 = if finite {
        y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
    } else {
        0.0
    };
    let alpha = if finite {
        let log_ratio = path.log_density(t, &y) + lmc_logpdf(path, t, &y, x, h)
            - path.log_density(t, x)
            - lmc_logpdf(path, t, x, &y, h);
        if log_ratio.is_nan() {
            0.0
        } else {
            log_ratio.min(0.0).exp()
        }
    } else {
        0.0
    };
    let accepted = u < alpha;
    out.copy_from_slice(if accepted { &y } else { x });
    MalaMove {
        accepted,
        alpha,
        proposal_sq_jump: sq_jump,
        finite,
    }
}

/// Inputs of [`log_potential`]. Fields not used by a variant may be left at
/// their defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct PotentialArgs<'a> {
    pub x_prev: &'a [f64],
    pub x_new: &'a [f64],
    pub h: f64,
    /// Previous step size; needed by the time-correct forward potential.
    pub h_prev: Option<f64>,
    pub rho: f64,
    pub v_prev: &'a [f64],
    pub v_half: &'a [f64],
    pub v_new: &'a [f64],
}

/// Log-potential `log G_t` of the given variant. May return `-∞` and, for
/// numerically broken inputs, `NaN`; [`sanitize_log_potential`] handles both.
pub fn log_potential(variant: Potential, path: &AnnealedPath, t: usize, a: &PotentialArgs<'_>) -> f64 {
    match variant {
        Potential::LmcFirst => path.log_density(t, a.x_new) - lmc_logpdf(path, t, a.x_prev, a.x_new, a.h),
        Potential::LmcTimeCorrectForward => {
            let h_prev = a.h_prev.expect("time-correct forward potential needs the previous step size");
            path.log_density(t, a.x_new) + lmc_logpdf(path, t - 1, a.x_new, a.x_prev, h_prev)
                - path.log_density(t - 1, a.x_prev)
                - lmc_logpdf(path, t, a.x_prev, a.x_new, a.h)
        }
        Potential::LmcForward => {
            path.log_density(t, a.x_new) + lmc_logpdf(path, t, a.x_new, a.x_prev, a.h)
                - path.log_density(t - 1, a.x_prev)
                - lmc_logpdf(path, t, a.x_prev, a.x_new, a.h)
        }
        Potential::LmcDetailedBalance | Potential::MalaDetailedBalance => {
            if path.lambda(t) == path.lambda(t - 1) {
                return 0.0;
            }
            path.log_density(t, a.x_prev) - path.log_density(t - 1, a.x_prev)
        }
        Potential::Klmc => {
            let keep = (1.0 - a.rho * a.rho).sqrt();
            let var = a.rho * a.rho;
            let back: Vec<f64> = a.v_half.iter().map(|v| keep * v).collect();
            let fwd: Vec<f64> = a.v_prev.iter().map(|v| keep * v).collect();
            path.log_density(t, a.x_new) - path.log_density(t - 1, a.x_prev) + std_normal_logpdf(a.v_new)
                - std_normal_logpdf(a.v_prev)
                + gaussian_logpdf(a.v_prev, &back, var)
                - gaussian_logpdf(a.v_half, &fwd, var)
        }
    }
}

/// Maps `NaN` and `+∞` to `-∞`. The flag reports whether the value was
/// replaced.
pub fn sanitize_log_potential(value: f64) -> (f64, bool) {
    if value.is_nan() || value == f64::INFINITY {
        (f64::NEG_INFINITY, true)
    } else {
        (value, false)
    }
}

/// Previous state of one particle.
#[derive(Debug, Clone, Copy)]
pub struct ParticleRef<'a> {
    pub x: &'a [f64],
    /// Momentum, for KLMC.
    pub v: Option<&'a [f64]>,
}

/// Noise consumed by one particle move.
#[derive(Debug, Clone, Copy)]
pub struct ParticleNoise<'a> {
    pub eps: &'a [f64],
    /// Acceptance uniform, for MALA.
    pub u: f64,
}

/// Result of one particle move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Sanitized log-potential; `-∞` for degenerate moves.
    pub log_g: f64,
    /// The move produced non-finite state or potential.
    pub degenerate: bool,
    /// MALA acceptance probability.
    pub alpha: Option<f64>,
    pub accepted: Option<bool>,
    /// MALA proposal squared jump distance.
    pub proposal_sq_jump: f64,
}

/// Moves one particle with kernel `spec` at step `t` and computes its
/// log-potential. `prev_params` are the parameters of step `t − 1`, needed by
/// the time-correct forward potential for `t ≥ 2`.
#[allow(clippy::too_many_arguments)]
pub fn propagate(
    spec: KernelSpec,
    path: &AnnealedPath,
    t: usize,
    params: StepParams,
    prev_params: Option<StepParams>,
    from: ParticleRef<'_>,
    noise: ParticleNoise<'_>,
    x_out: &mut [f64],
    v_out: Option<&mut [f64]>,
) -> Transition {
    let h = params.h;
    let potential = spec.potential(t);
    let mut alpha = None;
    let mut accepted = None;
    let mut proposal_sq_jump = 0.0;
    let raw = match spec.family {
        KernelFamily::Lmc => {
            if lmc_map(path, t, from.x, noise.eps, h, x_out) {
                let args = PotentialArgs {
                    x_prev: from.x,
                    x_new: x_out,
                    h,
                    // at t = 1 the reference kernel borrows h_1
                    h_prev: Some(prev_params.map_or(h, |p| p.h)),
                    ..Default::default()
                };
                log_potential(potential, path, t, &args)
            } else {
                f64::NAN
            }
        }
        KernelFamily::Mala => {
            let mv = mala_step(path, t, from.x, noise.eps, noise.u, h, x_out);
            alpha = Some(mv.alpha);
            accepted = Some(mv.accepted);
            proposal_sq_jump = mv.proposal_sq_jump;
            let args = PotentialArgs {
                x_prev: from.x,
                x_new: x_out,
                h,
                ..Default::default()
            };
            log_potential(potential, path, t, &args)
        }
        KernelFamily::Klmc => {
            let v = from.v.expect("KLMC particles carry momenta");
            let v_out = v_out.expect("KLMC propagation writes momenta");
            let rho = params.rho_or_default();
            let mut v_half = vec![0.0; v.len()];
            if klmc_step(path, t, from.x, v, noise.eps, h, rho, x_out, v_out, &mut v_half) {
                let args = PotentialArgs {
                    x_prev: from.x,
                    x_new: x_out,
                    h,
                    rho,
                    v_prev: v,
                    v_half: &v_half,
                    v_new: v_out,
                    ..Default::default()
                };
                log_potential(potential, path, t, &args)
            } else {
                f64::NAN
            }
        }
    };
    let (log_g, degenerate) = sanitize_log_potential(raw);
    Transition {
        log_g,
        degenerate,
        alpha,
        accepted,
        proposal_sq_jump,
    }
}

/// Applies [`propagate`] to a batch of particles stored row-major. Rows are
/// processed in parallel; the output order matches the input order, so the
/// result does not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn propagate_batch(
    spec: KernelSpec,
    path: &AnnealedPath,
    t: usize,
    params: StepParams,
    prev_params: Option<StepParams>,
    positions: &[f64],
    momenta: Option<&[f64]>,
    eps: &[f64],
    uniforms: Option<&[f64]>,
    x_out: &mut [f64],
    v_out: Option<&mut [f64]>,
) -> Vec<Transition> {
    let d = path.dim();
    let step = |i: usize, xo: &mut [f64], vo: Option<&mut [f64]>| {
        let from = ParticleRef {
            x: &positions[i * d..(i + 1) * d],
            v: momenta.map(|m| &m[i * d..(i + 1) * d]),
        };
        let noise = ParticleNoise {
            eps: &eps[i * d..(i + 1) * d],
            u: uniforms.map_or(0.0, |u| u[i]),
        };
        propagate(spec, path, t, params, prev_params, from, noise, xo, vo)
    };
    match v_out {
        Some(v_out) => x_out
            .par_chunks_mut(d)
            .zip(v_out.par_chunks_mut(d))
            .enumerate()
            .map(|(i, (xo, vo))| step(i, xo, Some(vo)))
            .collect(),
        None => x_out
            .par_chunks_mut(d)
            .enumerate()
            .map(|(i, xo)| step(i, xo, None))
            .collect(),
    }
}
