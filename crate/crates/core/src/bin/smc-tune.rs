use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use smc_tune::experiment::{expand_preset, parse_override, run_experiment, ExperimentSpec, PRESETS};
use smc_tune::{Error, Result};

#[derive(Parser)]
#[command(name = "smc-tune", version, about = "Adaptive SMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named preset or a JSON config file.
    Run {
        /// Preset name or path to a flat JSON config.
        target: String,
        /// Base seed; replication i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        /// `key=value`; the value is parsed as JSON when possible.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Reference log Z file written by the ground-truth preset.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// List preset names.
    Presets,
}

fn read_reference(path: &Path) -> Result<f64> {
    let value: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    value
        .get("log_z_hat")
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Config(format!("{} has no numeric `log_z_hat`", path.display())))
}

fn run(
    target: &str,
    seed: Option<u64>,
    reps: Option<usize>,
    out_dir: &Path,
    raw_overrides: &[String],
    reference: Option<&Path>,
) -> Result<()> {
    let mut overrides = raw_overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(s) = seed {
        overrides.push(("seed".into(), json!(s)));
    }
    if let Some(r) = reps {
        overrides.push(("replications".into(), json!(r)));
    }
    if let Some(path) = reference {
        overrides.push(("reference_log_z".into(), json!(read_reference(path)?)));
    }

    let specs = if PRESETS.contains(&target) {
        expand_preset(target, &overrides)?
    } else if Path::new(target).is_file() {
        vec![ExperimentSpec::from_json_file(target, &overrides)?]
    } else {
        return Err(Error::UnknownPreset(target.to_string()));
    };

    for spec in &specs {
        let out = run_experiment(spec)?;
        let (csv, json_path) = out.write(out_dir)?;
        let s = &out.summary;
        println!(
            "{}: median {:.4} [q10 {:.4}, q90 {:.4}] over {} replications ({} failed) -> {}, {}",
            s.name,
            s.median,
            s.q10,
            s.q90,
            s.succeeded,
            s.failed,
            csv.display(),
            json_path.display()
        );
        if target == "ground-truth" {
            let path = out_dir.join(format!("{}.reference.json", spec.name));
            let body = json!({ "name": spec.name, "seed": spec.seed, "log_z_hat": s.median });
            std::fs::write(&path, serde_json::to_string_pretty(&body)?)?;
            println!("reference log Z written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            target,
            seed,
            reps,
            out_dir,
            overrides,
            reference,
        } => run(target, *seed, *reps, out_dir, overrides, reference.as_deref()),
        Command::Presets => {
            for p in PRESETS {
                println!("{p}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
