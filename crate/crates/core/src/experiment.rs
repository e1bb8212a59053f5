//! Replicated experiments: flat JSON specs, named presets, CSV and JSON
//! output, and summary statistics.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::adapt::{AdaptConfig, MalaMode};
use crate::error::{Error, Result};
use crate::kernels::{Backward, FirstStep, KernelFamily, KernelSpec, StepParams};
use crate::model::{make_schedule, AnnealedPath, Funnel, LogisticRegression, Schedule, ScheduleKind, ShiftedGaussian, TargetModel};
use crate::schedule_adapt::{run_rounds, RoundPlan, RoundRecord};
use crate::smc::{smc_run, Policy, ResamplingScheme, RunConfig, RunResult};

/// Header of the per-replication CSV.
pub const CSV_HEADER: &str = "seed,log_z_hat,wall_time_s,total_objective_evals";

/// Names accepted by [`expand_preset`].
pub const PRESETS: [&str; 5] = ["gridsearch-fixed-h", "adaptive", "backward-compare", "dim-scaling", "ground-truth"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// `N(mean·1, I)`.
    Gaussian,
    Funnel,
    /// Logistic regression on `data` (CSV) or on a synthetic dataset.
    Logistic,
}

/// One experiment. Serialized as a flat JSON object; every key is optional
/// in config files and falls back to [`ExperimentSpec::default`]. Adaptation
/// keys left `null` take the kernel family's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub name: String,
    pub target: TargetKind,
    pub dim: usize,
    pub mean: f64,
    pub data: Option<PathBuf>,
    pub rows: usize,
    pub features: usize,
    pub data_seed: u64,

    pub kernel: KernelFamily,
    pub backward: Backward,
    pub first_step: FirstStep,
    pub schedule: ScheduleKind,
    pub steps: usize,
    pub lambdas: Option<Vec<f64>>,

    /// `false` runs with the fixed `h` (and `rho`) below.
    pub adaptive: bool,
    pub h: f64,
    pub rho: Option<f64>,

    pub particles: usize,
    pub resample_threshold: f64,
    pub scheme: ResamplingScheme,

    pub tau: Option<f64>,
    pub epsilon: Option<f64>,
    pub c: Option<f64>,
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub h_guess: Option<f64>,
    pub subsample: Option<usize>,
    pub xi: Option<Vec<f64>>,
    pub rho_guess: Option<f64>,
    pub mala_mode: Option<MalaMode>,
    pub target_acceptance: Option<f64>,
    pub sweep_cap: Option<usize>,
    pub first_step_objective: Option<FirstStep>,

    /// Schedule-adaptation rounds; 1 disables remapping.
    pub rounds: usize,
    pub multiplier: f64,
    pub max_steps: usize,
    pub warm_start: bool,

    pub replications: usize,
    pub seed: u64,
    /// When false, wall times are written as 0 so repeated runs produce
    /// identical files.
    pub timing: bool,
    pub reference_log_z: Option<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let plan = RoundPlan::default();
        Self {
            name: "experiment".into(),
            target: TargetKind::Gaussian,
            dim: 10,
            mean: 3.0,
            data: None,
            rows: 200,
            features: 19,
            data_seed: 42,
            kernel: KernelFamily::Lmc,
            backward: Backward::TimeCorrectForward,
            first_step: FirstStep::TimeCorrect,
            schedule: ScheduleKind::Quadratic,
            steps: 64,
            lambdas: None,
            adaptive: true,
            h: 0.1,
            rho: None,
            particles: 1024,
            resample_threshold: 0.5,
            scheme: ResamplingScheme::Systematic,
            tau: None,
            epsilon: None,
            c: None,
            r: None,
            delta: None,
            h_guess: None,
            subsample: None,
            xi: None,
            rho_guess: None,
            mala_mode: None,
            target_acceptance: None,
            sweep_cap: None,
            first_step_objective: None,
            rounds: 1,
            multiplier: plan.multiplier,
            max_steps: plan.max_steps,
            warm_start: plan.warm_start,
            replications: 32,
            seed: 0,
            timing: true,
            reference_log_z: None,
        }
    }
}

impl ExperimentSpec {
    /// Parses a flat JSON object, rejecting unknown keys.
    pub fn from_value(value: Value) -> Result<Self> {
        let Value::Object(map) = &value else {
            return Err(Error::Config("experiment config must be a JSON object".into()));
        };
        let known = known_keys();
        if let Some(bad) = map.keys().find(|k| !known.contains(k.as_str())) {
            return Err(Error::Config(format!("unknown config key `{bad}`")));
        }
        let spec: Self = serde_json::from_value(value)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: impl AsRef<Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut value: Value = serde_json::from_str(&text)?;
        apply_overrides(&mut value, overrides)?;
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        match self.target {
            TargetKind::Gaussian if self.dim == 0 => return Err(Error::Config("dim must be positive".into())),
            TargetKind::Funnel if self.dim < 2 => return Err(Error::Config("funnel needs dim >= 2".into())),
            TargetKind::Logistic if self.data.is_none() && (self.rows == 0 || self.features == 0) => {
                return Err(Error::Config("synthetic logistic data needs rows and features".into()))
            }
            _ => {}
        }
        if self.rounds > 1 && !self.adaptive {
            return Err(Error::Config("schedule rounds require adaptive tuning".into()));
        }
        self.kernel_spec().validate()?;
        self.run_config(self.seed).validate()?;
        self.schedule()?;
        if self.adaptive {
            self.adapt_config().validate(self.particles, self.kernel)?;
            self.round_plan().validate()?;
        } else {
            self.fixed_params().validate(self.kernel)?;
        }
        Ok(())
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        KernelSpec {
            family: self.kernel,
            backward: self.backward,
            first_step: self.first_step,
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        match (&self.lambdas, self.schedule) {
            (Some(values), _) => make_schedule(ScheduleKind::Explicit, 0, Some(values.clone())),
            (None, kind) => make_schedule(kind, self.steps, None),
        }
    }

    pub fn build_target(&self) -> Result<Arc<dyn TargetModel>> {
        Ok(match self.target {
            TargetKind::Gaussian => Arc::new(ShiftedGaussian::new(self.dim, self.mean)),
            TargetKind::Funnel => Arc::new(Funnel::new(self.dim)),
            TargetKind::Logistic => match &self.data {
                Some(path) => Arc::new(LogisticRegression::from_csv(path)?),
                None => Arc::new(LogisticRegression::synthetic(self.rows, self.features, self.data_seed)?),
            },
        })
    }

    pub fn adapt_config(&self) -> AdaptConfig {
        let mut a = AdaptConfig::for_family(self.kernel);
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    a.$field = v.clone();
                }
            )*};
        }
        set!(tau, epsilon, c, r, delta, h_guess, subsample, xi, rho_guess, mala_mode, target_acceptance, sweep_cap, first_step_objective);
        a
    }

    pub fn fixed_params(&self) -> StepParams {
        StepParams {
            h: self.h,
            rho: match self.kernel {
                KernelFamily::Klmc => Some(self.rho.unwrap_or(0.5)),
                _ => None,
            },
        }
    }

    pub fn run_config(&self, seed: u64) -> RunConfig {
        RunConfig {
            particles: self.particles,
            resample_threshold: self.resample_threshold,
            scheme: self.scheme,
            seed,
        }
    }

    pub fn round_plan(&self) -> RoundPlan {
        RoundPlan {
            rounds: self.rounds,
            multiplier: self.multiplier,
            max_steps: self.max_steps,
            warm_start: self.warm_start,
        }
    }
}

fn known_keys() -> BTreeSet<String> {
    match serde_json::to_value(ExperimentSpec::default()) {
        Ok(Value::Object(map)) => map.keys().cloned().collect(),
        _ => BTreeSet::new(),
    }
}

/// Parses `key=value`; the value is read as JSON when possible and as a
/// string otherwise.
pub fn parse_override(arg: &str) -> Result<(String, Value)> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{arg}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{arg}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Sets top-level keys of a JSON object.
pub fn apply_overrides(value: &mut Value, overrides: &[(String, Value)]) -> Result<()> {
    let Value::Object(map) = value else {
        return Err(Error::Config("experiment config must be a JSON object".into()));
    };
    for (k, v) in overrides {
        map.insert(k.clone(), v.clone());
    }
    Ok(())
}

fn take<T: serde::de::DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> Result<Option<T>> {
    map.remove(key)
        .map(|v| serde_json::from_value(v).map_err(|e| Error::Config(format!("bad value for `{key}`: {e}"))))
        .transpose()
}

/// `T = 4⌈√d⌉`.
pub fn dim_scaling_steps(dim: usize) -> usize {
    4 * (dim as f64).sqrt().ceil() as usize
}

/// `n` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
            .collect(),
    }
}

/// Expands a named preset into experiment specs. Keys `dims` (dim-scaling),
/// `h_grid` and `rho_grid` (gridsearch-fixed-h) shape the expansion; every
/// other override is applied to each resulting spec.
pub fn expand_preset(name: &str, overrides: &[(String, Value)]) -> Result<Vec<ExperimentSpec>> {
    let mut extra: Map<String, Value> = overrides.iter().cloned().collect();
    let dims: Vec<usize> = take(&mut extra, "dims")?.unwrap_or_else(|| vec![16, 64]);
    let h_grid: Vec<f64> = take(&mut extra, "h_grid")?.unwrap_or_else(|| log_grid(1e-3, 1.0, 10));
    let rho_grid: Vec<f64> = take(&mut extra, "rho_grid")?.unwrap_or_else(|| vec![0.1, 0.5, 0.9]);
    let kernel: Option<KernelFamily> = extra
        .get("kernel")
        .cloned()
        .map(serde_json::from_value)
        .transpose()?;

    let base = ExperimentSpec {
        name: name.to_string(),
        ..Default::default()
    };
    let specs = match name {
        "adaptive" => vec![base],
        "gridsearch-fixed-h" => {
            let rhos: Vec<Option<f64>> = if kernel == Some(KernelFamily::Klmc) {
                rho_grid.iter().map(|&r| Some(r)).collect()
            } else {
                vec![None]
            };
            let mut out = Vec::new();
            for &h in &h_grid {
                for &rho in &rhos {
                    let suffix = rho.map_or(String::new(), |r| format!("-rho{r}"));
                    out.push(ExperimentSpec {
                        name: format!("{name}-h{h:.4e}{suffix}"),
                        adaptive: false,
                        h,
                        rho,
                        ..base.clone()
                    });
                }
            }
            out
        }
        "backward-compare" => [Backward::DetailedBalance, Backward::Forward, Backward::TimeCorrectForward]
            .into_iter()
            .map(|b| ExperimentSpec {
                name: format!("{name}-{}", serde_json::to_value(b).unwrap().as_str().unwrap()),
                dim: 10,
                mean: 30.0,
                schedule: ScheduleKind::Linear,
                steps: 64,
                adaptive: false,
                h: 0.5,
                backward: b,
                ..base.clone()
            })
            .collect(),
        "dim-scaling" => dims
            .iter()
            .map(|&d| ExperimentSpec {
                name: format!("{name}-d{d}"),
                dim: d,
                mean: 3.0,
                steps: dim_scaling_steps(d),
                ..base.clone()
            })
            .collect(),
        "ground-truth" => vec![ExperimentSpec {
            particles: 1 << 14,
            steps: 1 << 9,
            replications: 1,
            ..base
        }],
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    let extra: Vec<(String, Value)> = extra.into_iter().collect();
    specs
        .into_iter()
        .map(|spec| {
            let mut value = serde_json::to_value(spec)?;
            apply_overrides(&mut value, &extra)?;
            ExperimentSpec::from_value(value)
        })
        .collect()
}

/// One line of the replication CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub seed: u64,
    pub log_z_hat: f64,
    pub wall_time_s: f64,
    pub total_objective_evals: usize,
}

/// Full diagnostics of one successful replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub seed: u64,
    pub log_z_hat: f64,
    pub wall_time_s: f64,
    pub total_objective_evals: usize,
    pub run: RunResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<RoundRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub name: String,
    pub log_z_hat: Vec<f64>,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    /// Mean objective evaluations at each step, over replications reaching it.
    pub mean_evals_per_step: Vec<f64>,
    pub succeeded: usize,
    pub failed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_log_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub summary: SummaryRecord,
    pub replications: Vec<Replication>,
    pub failures: Vec<Failure>,
}

impl ExperimentOutput {
    pub fn csv_records(&self) -> Vec<CsvRecord> {
        self.replications
            .iter()
            .map(|r| CsvRecord {
                seed: r.seed,
                log_z_hat: r.log_z_hat,
                wall_time_s: r.wall_time_s,
                total_objective_evals: r.total_objective_evals,
            })
            .collect()
    }

    /// Writes `<name>.csv` and `<name>.json` into `dir`; returns both paths.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.spec.name));
        let json_path = dir.join(format!("{}.json", self.spec.name));
        let mut file = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
        write_csv(&self.csv_records(), &mut file)?;
        file.flush()?;
        std::fs::write(&json_path, serde_json::to_string_pretty(self)?)?;
        Ok((csv_path, json_path))
    }
}

/// Floats are written with 17 significant digits, so parsing them back is
/// exact.
pub fn write_csv<W: Write>(records: &[CsvRecord], out: &mut W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{}",
            r.seed, r.log_z_hat, r.wall_time_s, r.total_objective_evals
        )?;
    }
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let records = reader.deserialize().collect::<std::result::Result<Vec<CsvRecord>, _>>()?;
    Ok(records)
}

/// Nearest-rank empirical quantile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    // tolerance keeps e.g. 0.1 · 30 from rounding up to rank 4
    let rank = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

fn run_one(spec: &ExperimentSpec, target: &Arc<dyn TargetModel>, seed: u64) -> Result<(RunResult, Option<Vec<RoundRecord>>)> {
    let cfg = spec.run_config(seed);
    let schedule = spec.schedule()?;
    let kernel = spec.kernel_spec();
    if !spec.adaptive {
        let path = AnnealedPath::new(target.clone(), schedule.clone());
        let policy = Policy::constant(spec.fixed_params(), schedule.steps());
        return Ok((smc_run(&path, kernel, &policy, &cfg)?, None));
    }
    let adapt = spec.adapt_config();
    if spec.rounds <= 1 {
        let path = AnnealedPath::new(target.clone(), schedule);
        return Ok((smc_run(&path, kernel, &Policy::Adaptive(adapt), &cfg)?, None));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = run_rounds(target.clone(), schedule, kernel, &adapt, &cfg, &spec.round_plan(), &mut rng)?;
    Ok((res.run, Some(res.history)))
}

/// Runs every replication (seed `spec.seed + i`) in parallel and aggregates
/// in seed order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let target = spec.build_target()?;
    let outcomes: Vec<(u64, Result<Replication>)> = (0..spec.replications as u64)
        .into_par_iter()
        .map(|i| {
            let seed = spec.seed.wrapping_add(i);
            let start = Instant::now();
            let rep = run_one(spec, &target, seed).map(|(run, rounds)| {
                let elapsed = start.elapsed().as_secs_f64();
                Replication {
                    seed,
                    log_z_hat: run.log_z_hat,
                    wall_time_s: if spec.timing { elapsed } else { 0.0 },
                    total_objective_evals: run.total_evaluations(),
                    run,
                    rounds,
                }
            });
            (seed, rep)
        })
        .collect();

    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for (seed, rep) in outcomes {
        match rep {
            Ok(r) => replications.push(r),
            Err(e) => {
                log::warn!("{}: replication with seed {seed} failed: {e}", spec.name);
                failures.push(Failure {
                    seed,
                    error: e.to_string(),
                })
            }
        }
    }
    if replications.is_empty() {
        let first = failures.first().map_or_else(String::new, |f| f.error.clone());
        return Err(Error::AllReplicationsFailed(first));
    }
    let summary = summarize(spec, &replications, failures.len());
    Ok(ExperimentOutput {
        spec: spec.clone(),
        summary,
        replications,
        failures,
    })
}

fn summarize(spec: &ExperimentSpec, reps: &[Replication], failed: usize) -> SummaryRecord {
    let log_z_hat: Vec<f64> = reps.iter().map(|r| r.log_z_hat).collect();
    let mut sorted = log_z_hat.clone();
    sorted.sort_by(f64::total_cmp);
    let longest = reps.iter().map(|r| r.run.steps.len()).max().unwrap_or(0);
    let mean_evals_per_step = (0..longest)
        .map(|t| {
            let counts: Vec<f64> = reps
                .iter()
                .filter_map(|r| r.run.steps.get(t).map(|s| s.evals as f64))
                .collect();
            counts.iter().sum::<f64>() / counts.len() as f64
        })
        .collect();
    SummaryRecord {
        name: spec.name.clone(),
        median: nearest_rank(&sorted, 0.5),
        q10: nearest_rank(&sorted, 0.1),
        q90: nearest_rank(&sorted, 0.9),
        log_z_hat,
        mean_evals_per_step,
        succeeded: reps.len(),
        failed,
        reference_log_z: spec.reference_log_z,
    }
}
