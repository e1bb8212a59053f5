//! Per-step parameter adaptation: the empirical incremental-KL objective,
//! step-size tuning, joint step-size and refreshment tuning for KLMC, and the
//! acceptance-rate and jump-distance baselines for MALA.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{mala_step, propagate_batch, FirstStep, KernelFamily, KernelSpec, StepParams};
use crate::model::AnnealedPath;
use crate::optim1d::{find_feasible, minimize, ExtendedValue, Objective, SearchParams};

/// Acceptance rate targeted by the MALA acceptance-rate controller.
pub const MALA_TARGET_ACCEPTANCE: f64 = 0.574;

/// Default cap on coordinate-descent sweeps for KLMC tuning.
pub const KLMC_SWEEP_CAP: usize = 20;

/// Objective used to tune MALA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MalaMode {
    /// Drive the mean acceptance probability to [`MALA_TARGET_ACCEPTANCE`].
    #[default]
    Arc,
    /// Maximize the expected squared jump distance.
    Esjd,
}

/// Adaptation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    /// Regularization weight on `(log h − log h_prev)²`.
    pub tau: f64,
    pub epsilon: f64,
    pub c: f64,
    pub r: f64,
    pub delta: f64,
    pub h_guess: f64,
    /// Subsample size `B`.
    pub subsample: usize,
    /// Refreshment-rate grid for KLMC.
    pub xi: Vec<f64>,
    pub rho_guess: f64,
    pub mala_mode: MalaMode,
    pub target_acceptance: f64,
    pub sweep_cap: usize,
    /// First-step potential inside the LMC tuning objective. Its log-step
    /// entropy term is what moves `h_1` away from a tiny initial guess.
    pub first_step_objective: FirstStep,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self::lmc()
    }
}

impl AdaptConfig {
    pub fn lmc() -> Self {
        Self {
            tau: 0.1,
            epsilon: 0.01,
            c: 0.1,
            r: 2.0,
            delta: -1.0,
            h_guess: (-10.0f64).exp(),
            subsample: 128,
            xi: vec![0.1, 0.9],
            rho_guess: 0.1,
            mala_mode: MalaMode::Arc,
            target_acceptance: MALA_TARGET_ACCEPTANCE,
            sweep_cap: KLMC_SWEEP_CAP,
            first_step_objective: FirstStep::Reference,
        }
    }

    pub fn klmc() -> Self {
        Self {
            tau: 5.0,
            epsilon: 0.01,
            c: 0.01,
            r: 3.0,
            delta: -1.0,
            h_guess: (-7.5f64).exp(),
            ..Self::lmc()
        }
    }

    /// MALA shares the LMC search settings.
    pub fn mala(mode: MalaMode) -> Self {
        Self {
            mala_mode: mode,
            ..Self::lmc()
        }
    }

    pub fn for_family(family: KernelFamily) -> Self {
        match family {
            KernelFamily::Lmc => Self::lmc(),
            KernelFamily::Klmc => Self::klmc(),
            KernelFamily::Mala => Self::mala(MalaMode::Arc),
        }
    }

    pub fn search_params(&self) -> Result<SearchParams> {
        SearchParams::new(self.c, self.r, self.epsilon, self.delta)
    }

    pub fn validate(&self, particles: usize, family: KernelFamily) -> Result<()> {
        self.search_params()?;
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be non-negative, got {}", self.tau)));
        }
        if !(self.h_guess > 0.0 && self.h_guess.is_finite()) {
            return Err(Error::InvalidParameter(format!("h_guess must be positive, got {}", self.h_guess)));
        }
        if self.subsample == 0 || self.subsample > particles {
            return Err(Error::InvalidParameter(format!(
                "subsample size must lie in [1, {particles}], got {}",
                self.subsample
            )));
        }
        if self.sweep_cap == 0 {
            return Err(Error::InvalidParameter("sweep_cap must be at least 1".into()));
        }
        if family == KernelFamily::Klmc {
            if self.xi.is_empty() || self.xi.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                return Err(Error::InvalidParameter(format!(
                    "refreshment grid must be non-empty within (0, 1), got {:?}",
                    self.xi
                )));
            }
            if !(self.rho_guess > 0.0 && self.rho_guess < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "rho_guess must lie in (0, 1), got {}",
                    self.rho_guess
                )));
            }
        }
        if family == KernelFamily::Mala && !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target acceptance must lie in (0, 1), got {}",
                self.target_acceptance
            )));
        }
        Ok(())
    }
}

/// Frozen inputs of one adaptation solve: the equally weighted subsample of
/// step `t − 1` particles and the noise used to move them.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveContext<'a> {
    pub spec: KernelSpec,
    pub path: &'a AnnealedPath,
    pub t: usize,
    /// `B × d` positions, row-major.
    pub positions: &'a [f64],
    pub momenta: Option<&'a [f64]>,
    /// `B × d` standard-normal draws.
    pub noise: &'a [f64],
    /// Tuned parameters of step `t − 1`, if any.
    pub prev: Option<StepParams>,
    /// Step size the regularizer pulls towards.
    pub h_anchor: f64,
    pub tau: f64,
}

impl ObjectiveContext<'_> {
    pub fn size(&self) -> usize {
        self.positions.len() / self.path.dim()
    }

    /// `τ (log h − log h_anchor)²`.
    pub fn regularizer(&self, h: f64) -> f64 {
        let diff = h.ln() - self.h_anchor.ln();
        if diff == 0.0 {
            0.0
        } else {
            self.tau * diff * diff
        }
    }

    /// Unregularized `−(1/B) Σ log G_t`; `+∞` if any particle degenerates.
    pub fn kl_estimate(&self, params: StepParams) -> f64 {
        if !(params.h > 0.0 && params.h.is_finite()) {
            return f64::INFINITY;
        }
        let mut x_out = vec![0.0; self.positions.len()];
        let mut v_out = self.momenta.map(|m| vec![0.0; m.len()]);
        let transitions = propagate_batch(
            self.spec,
            self.path,
            self.t,
            params,
            self.prev,
            self.positions,
            self.momenta,
            self.noise,
            None,
            &mut x_out,
            v_out.as_deref_mut(),
        );
        let mut sum = 0.0;
        for tr in &transitions {
            if tr.degenerate || !tr.log_g.is_finite() {
                return f64::INFINITY;
            }
            sum += tr.log_g;
        }
        -sum / transitions.len() as f64
    }

    /// Regularized objective `L̂(θ)`.
    pub fn objective(&self, params: StepParams) -> f64 {
        let kl = self.kl_estimate(params);
        if kl == f64::INFINITY {
            return kl;
        }
        kl + self.regularizer(params.h)
    }

    /// Mean acceptance probability and mean `α‖y − x‖²` of MALA proposals at
    /// step size `h`; `None` when a proposal is not finite.
    pub fn mala_statistics(&self, h: f64) -> Option<(f64, f64)> {
        if !(h > 0.0 && h.is_finite()) {
            return None;
        }
        let d = self.path.dim();
        let b = self.size();
        let mut out = vec![0.0; d];
        let (mut alpha_sum, mut jump_sum) = (0.0, 0.0);
        for i in 0..b {
            let x = &self.positions[i * d..(i + 1) * d];
            let eps = &self.noise[i * d..(i + 1) * d];
            let mv = mala_step(self.path, self.t, x, eps, 1.0, h, &mut out);
            if !mv.finite || !mv.proposal_sq_jump.is_finite() {
                return None;
            }
            alpha_sum += mv.alpha;
            jump_sum += mv.alpha * mv.proposal_sq_jump;
        }
        Some((alpha_sum / b as f64, jump_sum / b as f64))
    }

    /// Regularized MALA tuning objective.
    pub fn mala_objective(&self, mode: MalaMode, target_acceptance: f64, h: f64) -> f64 {
        match self.mala_statistics(h) {
            None => f64::INFINITY,
            Some((alpha, esjd)) => {
                let base = match mode {
                    MalaMode::Arc => (alpha - target_acceptance).powi(2),
                    MalaMode::Esjd => -esjd,
                };
                base + self.regularizer(h)
            }
        }
    }
}

/// Step-size objective `h ↦ L̂(h)` over a frozen context.
pub fn build_objective<'a>(ctx: &'a ObjectiveContext<'a>) -> impl Fn(f64) -> f64 + 'a {
    move |h| ctx.objective(StepParams::lmc(h))
}

/// Joint objective `(h, ρ) ↦ L̂(h, ρ)` for KLMC.
pub fn build_objective_klmc<'a>(ctx: &'a ObjectiveContext<'a>) -> impl Fn(f64, f64) -> f64 + 'a {
    move |h, rho| ctx.objective(StepParams::klmc(h, rho))
}

/// Result of a step-size solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeOutcome {
    pub h: f64,
    /// Distinct objective evaluations.
    pub evaluations: usize,
    pub value: f64,
}

/// Tunes a step size by minimizing `ℓ ↦ L(exp ℓ)`. The feasibility search
/// only runs at `t = 1`; later steps warm-start from `h_guess`.
pub fn adapt_stepsize<F: FnMut(f64) -> f64>(
    mut objective: F,
    t: usize,
    h_guess: f64,
    cfg: &AdaptConfig,
) -> Result<StepsizeOutcome> {
    let params = cfg.search_params()?;
    let mut f = Objective::new(|l: f64| objective(l.exp()));
    let mut l = h_guess.ln();
    if t == 1 {
        l = find_feasible(&mut f, l, params.delta)?;
    }
    let l = minimize(&mut f, l, &params)?;
    let value = f.eval(l).get();
    Ok(StepsizeOutcome {
        h: l.exp(),
        evaluations: f.evaluations(),
        value,
    })
}

/// Result of a KLMC coordinate-descent solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlmcOutcome {
    pub h: f64,
    pub rho: f64,
    pub evaluations: usize,
    pub value: f64,
    pub sweeps: usize,
    /// `false` when the sweep cap was reached before the tolerance test passed.
    pub converged: bool,
}

/// Coordinate descent over `(log h, ρ)`: minimize in `log h` at fixed `ρ`,
/// then take the grid argmin over `Ξ` at fixed `h` (first index wins ties).
pub fn adapt_klmc<F: FnMut(f64, f64) -> f64>(
    mut objective: F,
    t: usize,
    h_guess: f64,
    rho_guess: f64,
    cfg: &AdaptConfig,
) -> Result<KlmcOutcome> {
    let params = cfg.search_params()?;
    if cfg.xi.is_empty() {
        return Err(Error::InvalidParameter("refreshment grid is empty".into()));
    }
    let mut cache: HashMap<(u64, u64), f64> = HashMap::new();
    let mut eval = |l: f64, rho: f64| -> f64 {
        let key = ((l + 0.0).to_bits(), (rho + 0.0).to_bits());
        *cache
            .entry(key)
            .or_insert_with(|| ExtendedValue::new(objective(l.exp(), rho)).get())
    };

    let mut l = h_guess.ln();
    let mut rho = rho_guess;
    if t == 1 {
        let mut f = Objective::new(|x| eval(x, rho));
        l = find_feasible(&mut f, l, params.delta)?;
    }
    let mut sweeps = 0;
    let mut converged = false;
    let (mut l_new, mut rho_new) = (l, rho);
    while sweeps < cfg.sweep_cap {
        sweeps += 1;
        {
            let mut f = Objective::new(|x| eval(x, rho));
            l_new = minimize(&mut f, l, &params)?;
        }
        rho_new = cfg.xi[0];
        let mut best = eval(l_new, rho_new);
        for &xi in &cfg.xi[1..] {
            let v = eval(l_new, xi);
            if v < best {
                best = v;
                rho_new = xi;
            }
        }
        if (l - l_new).abs().max((rho - rho_new).abs()) <= cfg.epsilon {
            converged = true;
            break;
        }
        l = l_new;
        rho = rho_new;
    }
    let value = eval(l_new, rho_new);
    Ok(KlmcOutcome {
        h: l_new.exp(),
        rho: rho_new,
        evaluations: cache.len(),
        value,
        sweeps,
        converged,
    })
}

/// Tunes a MALA step size with the acceptance-rate or jump-distance objective.
pub fn adapt_mala(ctx: &ObjectiveContext<'_>, h_guess: f64, cfg: &AdaptConfig) -> Result<StepsizeOutcome> {
    adapt_stepsize(
        |h| ctx.mala_objective(cfg.mala_mode, cfg.target_acceptance, h),
        ctx.t,
        h_guess,
        cfg,
    )
}

/// Outcome of tuning one SMC step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuned {
    pub params: StepParams,
    pub evaluations: usize,
    /// Regularized objective at the tuned parameters.
    pub objective_value: f64,
    /// Unregularized incremental-KL estimate at the tuned parameters.
    pub kl_estimate: f64,
    /// KLMC sweep count.
    pub sweeps: Option<usize>,
    pub converged: bool,
}

/// Runs the adaptation routine that matches the kernel family. Guesses come
/// from the previous step when available, else from `cfg`.
pub fn tune(ctx: &ObjectiveContext<'_>, cfg: &AdaptConfig) -> Result<Tuned> {
    let h_guess = ctx.prev.map_or(cfg.h_guess, |p| p.h);
    match ctx.spec.family {
        KernelFamily::Lmc => {
            let out = adapt_stepsize(build_objective(ctx), ctx.t, h_guess, cfg)?;
            let params = StepParams::lmc(out.h);
            Ok(Tuned {
                params,
                evaluations: out.evaluations,
                objective_value: out.value,
                kl_estimate: out.value - ctx.regularizer(out.h),
                sweeps: None,
                converged: true,
            })
        }
        KernelFamily::Klmc => {
            let rho_guess = ctx.prev.and_then(|p| p.rho).unwrap_or(cfg.rho_guess);
            let out = adapt_klmc(build_objective_klmc(ctx), ctx.t, h_guess, rho_guess, cfg)?;
            Ok(Tuned {
                params: StepParams::klmc(out.h, out.rho),
                evaluations: out.evaluations,
                objective_value: out.value,
                kl_estimate: out.value - ctx.regularizer(out.h),
                sweeps: Some(out.sweeps),
                converged: out.converged,
            })
        }
        KernelFamily::Mala => {
            let out = adapt_mala(ctx, h_guess, cfg)?;
            let params = StepParams::lmc(out.h);
            Ok(Tuned {
                params,
                evaluations: out.evaluations,
                objective_value: out.value,
                kl_estimate: ctx.kl_estimate(params),
                sweeps: None,
                converged: true,
            })
        }
    }
}
