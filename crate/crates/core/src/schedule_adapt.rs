//! Round-based annealing schedule adaptation driven by estimated local
//! communication barriers.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adapt::AdaptConfig;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::model::{AnnealedPath, Schedule, TargetModel};
use crate::smc::{smc_run_with_rng, Policy, RunConfig, RunResult, StepRecord};

/// `√max(L̂*, 0)`; non-finite estimates count as zero.
pub fn barrier_increment(objective_value: f64) -> f64 {
    if objective_value > 0.0 && objective_value.is_finite() {
        objective_value.sqrt()
    } else {
        0.0
    }
}

/// Turns one step's diagnostics into a non-negative barrier increment.
pub trait BarrierEstimator: Send + Sync {
    fn increment(&self, step: &StepRecord) -> f64;
}

/// Square root of the unregularized objective at the tuned parameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct SqrtKlBarrier;

impl BarrierEstimator for SqrtKlBarrier {
    fn increment(&self, step: &StepRecord) -> f64 {
        step.kl_estimate.map_or(0.0, barrier_increment)
    }
}

/// Knots `(λ_t, Λ̂(λ_t))` of the accumulated barrier, `Λ̂(λ_0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierKnots {
    lambdas: Vec<f64>,
    barrier: Vec<f64>,
}

impl BarrierKnots {
    /// Accumulates per-step increments over the temperatures of a schedule.
    pub fn from_increments(lambdas: &[f64], increments: &[f64]) -> Result<Self> {
        if lambdas.len() != increments.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: lambdas.len().saturating_sub(1),
                got: increments.len(),
            });
        }
        if let Some(bad) = increments.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("barrier increments must be finite and >= 0, got {bad}")));
        }
        if lambdas.first() != Some(&0.0) || lambdas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSchedule("knot temperatures must start at 0 and be nondecreasing".into()));
        }
        let mut barrier = Vec::with_capacity(lambdas.len());
        let mut acc = 0.0;
        barrier.push(0.0);
        for inc in increments {
            acc += inc;
            barrier.push(acc);
        }
        Ok(Self {
            lambdas: lambdas.to_vec(),
            barrier,
        })
    }

    /// Knots from the telemetry of an adaptive run on `schedule`.
    pub fn from_run(schedule: &Schedule, run: &RunResult, estimator: &dyn BarrierEstimator) -> Result<Self> {
        let increments: Vec<f64> = run.steps.iter().map(|s| estimator.increment(s)).collect();
        Self::from_increments(schedule.lambdas(), &increments)
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn barrier(&self) -> &[f64] {
        &self.barrier
    }

    /// Global barrier estimate `Λ̂`.
    pub fn total(&self) -> f64 {
        *self.barrier.last().unwrap_or(&0.0)
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.lambdas.iter().copied().zip(self.barrier.iter().copied()).collect()
    }
}

/// New schedule with `steps` steps placing equal barrier mass between
/// consecutive temperatures. Falls back to a linear schedule when the
/// barrier is identically zero.
pub fn remap_schedule(knots: &BarrierKnots, steps: usize) -> Result<Schedule> {
    if steps == 0 {
        return Err(Error::InvalidSchedule("need at least one step".into()));
    }
    let total = knots.total();
    if !(total > 0.0) {
        log::warn!("barrier estimate is zero everywhere; using a linear schedule");
        return Schedule::linear(steps);
    }
    // Keep the left-most temperature of every run of equal barrier values so
    // the inverse is single valued.
    let mut xs = vec![knots.barrier[0]];
    let mut ys = vec![knots.lambdas[0]];
    for (&b, &l) in knots.barrier.iter().zip(&knots.lambdas).skip(1) {
        if b > *xs.last().unwrap() {
            xs.push(b);
            ys.push(l);
        }
    }
    let mut lambdas = Vec::with_capacity(steps + 1);
    lambdas.push(0.0);
    let mut seg = 0;
    for t in 1..steps {
        let y = total * t as f64 / steps as f64;
        while seg + 2 < xs.len() && xs[seg + 1] < y {
            seg += 1;
        }
        let w = (y - xs[seg]) / (xs[seg + 1] - xs[seg]);
        lambdas.push(ys[seg] + w * (ys[seg + 1] - ys[seg]));
    }
    lambdas.push(1.0);
    Schedule::new(lambdas)
}

/// Settings of the round-based loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundPlan {
    /// Number of adaptive runs, `r_max ≥ 1`.
    pub rounds: usize,
    /// `T_{r+1} = round(multiplier · Λ̂)`.
    pub multiplier: f64,
    pub max_steps: usize,
    /// Start round `r + 1` from the last step size of round `r`.
    pub warm_start: bool,
}

impl Default for RoundPlan {
    fn default() -> Self {
        Self {
            rounds: 3,
            multiplier: 2.0,
            max_steps: 4096,
            warm_start: true,
        }
    }
}

impl RoundPlan {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidParameter("need at least one round".into()));
        }
        if !(self.multiplier > 0.0 && self.multiplier.is_finite()) {
            return Err(Error::InvalidParameter(format!("multiplier must be positive, got {}", self.multiplier)));
        }
        if self.max_steps < 2 {
            return Err(Error::InvalidParameter("max_steps must be at least 2".into()));
        }
        Ok(())
    }

    /// Length of the next round for a global barrier `Λ̂`; `None` when the
    /// barrier carries no information.
    pub fn next_steps(&self, total_barrier: f64) -> Option<usize> {
        if !(total_barrier > 0.0 && total_barrier.is_finite()) {
            return None;
        }
        let raw = (self.multiplier * total_barrier).round();
        let clamped = raw.clamp(2.0, self.max_steps as f64);
        if clamped != raw {
            log::warn!("next round length {raw} clamped to {clamped}");
        }
        Some(clamped as usize)
    }
}

/// One entry of the schedule history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    #[serde(rename = "T")]
    pub steps: usize,
    pub lambdas: Vec<f64>,
    pub barrier_knots: Vec<(f64, f64)>,
    pub log_z_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundsResult {
    /// Result of the last round.
    pub run: RunResult,
    pub history: Vec<RoundRecord>,
}

/// Runs adaptive SMC `plan.rounds` times, remapping the schedule between
/// rounds.
pub fn run_rounds<R: Rng + ?Sized>(
    target: Arc<dyn TargetModel>,
    initial: Schedule,
    spec: KernelSpec,
    adapt: &AdaptConfig,
    cfg: &RunConfig,
    plan: &RoundPlan,
    rng: &mut R,
) -> Result<RoundsResult> {
    run_rounds_with(target, initial, spec, adapt, cfg, plan, &SqrtKlBarrier, rng)
}

/// [`run_rounds`] with a custom barrier estimator.
#[allow(clippy::too_many_arguments)]
pub fn run_rounds_with<R: Rng + ?Sized>(
    target: Arc<dyn TargetModel>,
    initial: Schedule,
    spec: KernelSpec,
    adapt: &AdaptConfig,
    cfg: &RunConfig,
    plan: &RoundPlan,
    estimator: &dyn BarrierEstimator,
    rng: &mut R,
) -> Result<RoundsResult> {
    plan.validate()?;
    let mut schedule = initial;
    let mut adapt = adapt.clone();
    let mut history = Vec::with_capacity(plan.rounds);
    let mut last = None;
    for round in 1..=plan.rounds {
        let path = AnnealedPath::new(target.clone(), schedule.clone());
        let run = smc_run_with_rng(&path, spec, &Policy::Adaptive(adapt.clone()), cfg, rng)?;
        let knots = BarrierKnots::from_run(&schedule, &run, estimator)?;
        history.push(RoundRecord {
            round,
            steps: schedule.steps(),
            lambdas: schedule.lambdas().to_vec(),
            barrier_knots: knots.pairs(),
            log_z_hat: run.log_z_hat,
        });
        if round < plan.rounds {
            schedule = match plan.next_steps(knots.total()) {
                Some(steps) => remap_schedule(&knots, steps)?,
                None => {
                    log::warn!("round {round}: zero barrier estimate; keeping T and using a linear schedule");
                    Schedule::linear(schedule.steps())?
                }
            };
            if plan.warm_start {
                if let Some(step) = run.steps.last() {
                    adapt.h_guess = step.h;
                    log::info!("round {}: warm start h_guess = {}", round + 1, step.h);
                }
            }
        }
        last = Some(run);
    }
    Ok(RoundsResult {
        run: last.expect("at least one round"),
        history,
    })
}
