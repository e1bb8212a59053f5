//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured quantities before asserting. The line goes straight
//! to stdout so it shows without `--nocapture`.

mod common;

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use smc_tune::adapt::AdaptConfig;
use smc_tune::experiment::{dim_scaling_steps, nearest_rank};
use smc_tune::kernels::{Backward, KernelSpec, StepParams};
use smc_tune::model::{AnnealedPath, Funnel, LogisticRegression, Schedule, ShiftedGaussian};
use smc_tune::optim1d::{
    bracket_minimum, golden_section_search_with, gss_iteration_bound, Objective, SearchParams,
};
use smc_tune::smc::{smc_run, Policy, RunConfig, RunResult};

fn report(criterion: &str, pass: bool, detail: String, started: Instant) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {criterion}: {verdict} ({detail}; {:.1}s)\n",
        started.elapsed().as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).ok();
    out.flush().ok();
    pass
}

fn run_config(particles: usize, seed: u64) -> RunConfig {
    RunConfig {
        particles,
        seed,
        ..RunConfig::default()
    }
}

fn replicate(path: &AnnealedPath, spec: KernelSpec, policy: &Policy, particles: usize, reps: u64, base: u64) -> Vec<RunResult> {
    (0..reps)
        .into_par_iter()
        .map(|i| smc_run(path, spec, policy, &run_config(particles, base + i)).expect("run succeeds"))
        .collect()
}

fn sorted_log_z(runs: &[RunResult]) -> Vec<f64> {
    let mut v: Vec<f64> = runs.iter().map(|r| r.log_z_hat).collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn criterion_1_unbiased_normalizing_constant() {
    let started = Instant::now();
    let path = AnnealedPath::new(Arc::new(ShiftedGaussian::new(1, 2.0)), Schedule::linear(16).unwrap());
    let cases = [
        ("LMC tc-fwd", KernelSpec::lmc(Backward::TimeCorrectForward), StepParams::lmc(0.05)),
        ("KLMC", KernelSpec::klmc(), StepParams::klmc(0.05, 0.5)),
        ("MALA dbf", KernelSpec::mala(), StepParams::lmc(0.05)),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (name, spec, params) in cases {
        let runs = replicate(&path, spec, &Policy::constant(params, 16), 256, 1024, 0);
        let z: Vec<f64> = runs.iter().map(|r| r.log_z_hat.exp()).collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let se = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
        let ok = (mean - 1.0).abs() <= 3.0 * se;
        pass &= ok;
        details.push(format!("{name} mean Z {mean:.4} ± {se:.4}"));
    }
    assert!(report("1", pass, details.join(", "), started));
}

#[test]
fn criterion_2_backward_kernel_bias() {
    let started = Instant::now();
    let path = AnnealedPath::new(Arc::new(ShiftedGaussian::new(10, 30.0)), Schedule::linear(64).unwrap());
    let policy = Policy::constant(StepParams::lmc(0.5), 64);
    let summary = |b: Backward| {
        let v = sorted_log_z(&replicate(&path, KernelSpec::lmc(b), &policy, 1024, 32, 0));
        (nearest_rank(&v, 0.5), nearest_rank(&v, 0.9) - nearest_rank(&v, 0.1))
    };
    let (dbf_median, _) = summary(Backward::DetailedBalance);
    let (tc_median, tc_width) = summary(Backward::TimeCorrectForward);
    let (_, fwd_width) = summary(Backward::Forward);

    let a = dbf_median > 2.0;
    let b = tc_median.abs() <= 1.0;
    let c = fwd_width > tc_width;
    let detail = format!(
        "(a) dbf median {dbf_median:.3} {}; (b) tc-fwd median {tc_median:.3} {}; (c) fwd width {fwd_width:.3} vs tc-fwd {tc_width:.3} {}",
        verdict(a),
        verdict(b),
        verdict(c)
    );
    assert!(report("2", a && b && c, detail, started));
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "missed"
    }
}

#[test]
fn criterion_3_dimension_scaling() {
    let started = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    let mut mean_h = Vec::new();
    for d in [16usize, 64] {
        let steps = dim_scaling_steps(d);
        let path = AnnealedPath::new(Arc::new(ShiftedGaussian::new(d, 3.0)), Schedule::quadratic(steps).unwrap());
        let runs = replicate(
            &path,
            KernelSpec::lmc(Backward::TimeCorrectForward),
            &Policy::Adaptive(AdaptConfig::lmc()),
            1024,
            16,
            0,
        );
        let median = nearest_rank(&sorted_log_z(&runs), 0.5);
        let h = runs.iter().map(RunResult::mean_step_size).sum::<f64>() / runs.len() as f64;
        mean_h.push(h);
        pass &= median.abs() <= 1.0;
        details.push(format!("d={d} T={steps} median {median:.3} mean h {h:.4}"));
    }
    let decreasing = mean_h[1] < mean_h[0];
    pass &= decreasing;
    details.push(format!("step size decreases with d: {}", verdict(decreasing)));
    assert!(report("3", pass, details.join(", "), started));
}

#[test]
fn criterion_4_optimizer_guarantees() {
    let started = Instant::now();
    let mut r = common::rng(2024);
    let mut worst_error: f64 = 0.0;
    let mut worst_excess: i64 = i64::MIN;
    let mut invalid = 0;
    let mut failures = 0;
    let eps = 1e-3;
    let params = SearchParams::new(0.1, 2.0, eps, -1.0).unwrap();
    for _ in 0..100 {
        let u = common::normals(&mut r, 4);
        let m = 5.0 * u[0];
        let edge = m + 0.1 + u[1].abs();
        let curvature = 0.1 + u[2].abs() * 5.0;
        let x0 = (m + 10.0 * u[3]).min(edge - 0.01);
        let f = |x: f64| {
            if x >= edge {
                f64::INFINITY
            } else {
                curvature * (x - m).powi(2) + 0.3 * (x - m).abs()
            }
        };

        let mut obj = Objective::new(f);
        let Ok(t) = bracket_minimum(&mut obj, x0, params.c, params.r) else {
            failures += 1;
            continue;
        };
        if !(t.a < t.b && t.b < t.c && t.fa.is_finite() && t.fb <= t.fa && t.fb <= t.fc) {
            invalid += 1;
        }
        let Ok(out) = golden_section_search_with(&mut obj, &t, eps, |_| {}) else {
            failures += 1;
            continue;
        };
        let bound = gss_iteration_bound(t.width(), eps) as i64;
        worst_excess = worst_excess.max(out.iterations as i64 - bound);
        worst_error = worst_error.max((out.minimizer - m).abs());
    }
    let pass = failures == 0 && invalid == 0 && worst_error <= eps && worst_excess <= 2;
    let detail = format!(
        "max |x* − m| {worst_error:.2e} (ε = {eps:.0e}), max iterations over bound {worst_excess}, invalid triplets {invalid}, errors {failures}"
    );
    assert!(report("4", pass, detail, started));
}

#[test]
fn criterion_5_warm_start_budget() {
    let started = Instant::now();
    let path = AnnealedPath::new(Arc::new(Funnel::new(10)), Schedule::linear(64).unwrap());
    let cfg = AdaptConfig {
        subsample: 128,
        ..AdaptConfig::lmc()
    };
    let run = smc_run(
        &path,
        KernelSpec::lmc(Backward::TimeCorrectForward),
        &Policy::Adaptive(cfg),
        &run_config(1024, 1),
    )
    .unwrap();
    let mut evals: Vec<f64> = run.steps.iter().filter(|s| s.t > 1).map(|s| s.evals as f64).collect();
    evals.sort_by(f64::total_cmp);
    let median = nearest_rank(&evals, 0.5);
    let detail = format!(
        "median evaluations for t > 1: {median}, max {}, first step {}",
        evals.last().unwrap(),
        run.steps[0].evals
    );
    assert!(report("5", median <= 15.0, detail, started));
}

#[test]
fn criterion_6_refreshment_boundary() {
    let started = Instant::now();
    let model = LogisticRegression::synthetic(200, 19, 42).unwrap();
    let path = AnnealedPath::new(Arc::new(model), Schedule::linear(64).unwrap());
    let cfg = AdaptConfig::klmc();
    let xi = cfg.xi.clone();
    let run = smc_run(&path, KernelSpec::klmc(), &Policy::Adaptive(cfg), &run_config(1024, 1)).unwrap();
    let rhos: Vec<f64> = run.steps.iter().map(|s| s.rho.expect("KLMC records ρ")).collect();
    let on_grid = rhos.iter().filter(|r| xi.contains(r)).count() as f64 / rhos.len() as f64;
    let low = rhos.iter().filter(|&&r| r == xi[0]).count();
    let high = rhos.iter().filter(|&&r| r == xi[1]).count();
    let pass = on_grid >= 0.9 && low > 0 && high > 0;
    let detail = format!(
        "{:.0}% of ρ on the grid, ρ = {} at {low} steps, ρ = {} at {high} steps",
        100.0 * on_grid,
        xi[0],
        xi[1]
    );
    assert!(report("6", pass, detail, started));
}

#[test]
fn criterion_7_numerical_invariants() {
    let started = Instant::now();
    let reversibility = common::leapfrog_reversibility(200, 7);
    let refresh_z = [0.1, 0.5, 0.9]
        .iter()
        .enumerate()
        .map(|(k, &rho)| common::refresh_stationarity_z(100_000, rho, 70 + k as u64))
        .fold(0.0, f64::max);
    let gradient = common::gradient_check(100, 71);
    let normalization = common::lmc_normalization_error();
    let remap = [Schedule::linear(37).unwrap(), Schedule::quadratic(64).unwrap()]
        .iter()
        .map(|s| common::remap_identity_error(s, 0.2))
        .fold(0.0, f64::max);

    let pass = reversibility <= 1e-10 && refresh_z <= 3.0 && gradient <= 1e-5 && normalization <= 1e-6 && remap <= 1e-12;
    let detail = format!(
        "leapfrog reversal {reversibility:.1e}, refresh {refresh_z:.2} SE, gradient {gradient:.1e}, normalization {normalization:.1e}, remap {remap:.1e}"
    );
    assert!(report("7", pass, detail, started));
}
