use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shockform_cli::config::ExperimentConfig;
use shockform_cli::report::{
    format_checks, verify_figures, Expectations, Report, VerifyError, EXIT_NUMERICAL,
    EXIT_VERIFICATION,
};
use shockform_cli::run_experiment;
use shockform_cli::synth::SynthSpec;
use shockform_core::model::{HyperbolicSystem, BUILTIN_MODELS};

const EXIT_USAGE: u8 = 1;

#[derive(Parser)]
#[command(
    name = "shockform",
    version,
    about = "Shock formation experiments for 1D hyperbolic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report and artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Initial grid size; overrides the config.
        #[arg(long)]
        grid: Option<usize>,
        /// Absolute slope threshold that stops the run.
        #[arg(long)]
        threshold: Option<f64>,
        /// Check the report against this expectations file.
        #[arg(long)]
        expectations: Option<PathBuf>,
    },
    /// Check an existing report against an expectations file.
    Verify {
        /// Report JSON, or the output directory holding report.json.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        expectations: PathBuf,
    },
    /// List the built-in models.
    ListModels,
    /// Write synthetic exact-law series and fit them back.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Relative multiplicative noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.2)]
        t_star: f64,
        #[arg(long, default_value_t = 0.14)]
        k: f64,
    },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn apply_expectations(report: &mut Report, path: &Path) -> Result<(), VerifyError> {
    let expectations = Expectations::load(path)?;
    report.checks = verify_figures(&report.metrics, &expectations)?;
    Ok(())
}

fn run(
    config: &Path,
    out: Option<PathBuf>,
    grid: Option<usize>,
    threshold: Option<f64>,
    expectations: Option<PathBuf>,
) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(config) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    if let Some(n) = grid {
        cfg = cfg.with_grid(n);
    }
    if let Some(x) = threshold {
        cfg.controls.blowup_threshold = Some(x);
    }
    let out = out.unwrap_or_else(|| cfg.output.dir.clone());
    let mut report = match run_experiment(&cfg, &out) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    if let Some(path) = expectations {
        if let Err(e) = apply_expectations(&mut report, &path) {
            return usage(e);
        }
        let path = out.join("report.json");
        if let Err(e) = std::fs::write(&path, report.to_json()) {
            return usage(format!("cannot write {}: {e}", path.display()));
        }
        print!("{}", format_checks(&report.checks));
    }
    summarize(&report);
    ExitCode::from(report.exit_code() as u8)
}

fn summarize(report: &Report) {
    println!("outcome: {:?}", report.outcome);
    for s in &report.shocks {
        let e = &s.estimate;
        print!(
            "shock {}: t* = {:.6} ± {:.1e}, x* = {:.6}, family {}",
            s.index, e.t_star, e.t_star_uncertainty, e.x_star, e.family
        );
        if let Some(p) = &s.prediction {
            print!(", c = {:.6}, K = {:.4}", p.c, p.k);
        }
        println!();
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for e in &report.stage_errors {
        eprintln!("stage {} failed: {}", e.stage, e.message);
    }
}

fn verify(report: &Path, expectations: &Path) -> ExitCode {
    let path = if report.is_dir() {
        report.join("report.json")
    } else {
        report.to_path_buf()
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return usage(format!("cannot read {}: {e}", path.display())),
    };
    let checks = Report::metrics_from_json(&text).and_then(|metrics| {
        let expectations = Expectations::load(expectations)?;
        verify_figures(&metrics, &expectations)
    });
    match checks {
        Ok(checks) => {
            print!("{}", format_checks(&checks));
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFICATION as u8)
            }
        }
        Err(e) => usage(e),
    }
}

fn list_models() -> ExitCode {
    for (name, description) in BUILTIN_MODELS {
        let system = HyperbolicSystem::builtin(name).expect("listed models are built in");
        println!(
            "{name:<18} [{}] {description}",
            system.field_names().join(", ")
        );
    }
    println!("{:<18} fields and terms given in the config", "polynomial");
    ExitCode::SUCCESS
}

fn synth(out: &Path, spec: SynthSpec) -> ExitCode {
    let series = match spec.generate() {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    if let Err(e) =
        std::fs::create_dir_all(out).and_then(|_| series.to_csv().write(&out.join("synthetic.csv")))
    {
        return usage(format!("cannot write to {}: {e}", out.display()));
    }
    let recovery = match spec.recover(&series) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: fitting the synthetic series failed: {e}");
            return ExitCode::from(EXIT_NUMERICAL as u8);
        }
    };
    println!(
        "t* = {:.12} (error {:+.3e}), K = {:.12} (error {:+.3e})",
        recovery.t_star, recovery.t_star_error, recovery.k, recovery.k_error
    );
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            grid,
            threshold,
            expectations,
        } => run(&config, out, grid, threshold, expectations),
        Command::Verify {
            report,
            expectations,
        } => verify(&report, &expectations),
        Command::ListModels => list_models(),
        Command::Synth {
            out,
            seed,
            noise,
            t_star,
            k,
        } => synth(
            out.as_path(),
            SynthSpec {
                seed,
                noise,
                t_star,
                k,
                ..SynthSpec::default()
            },
        ),
    }
}
