use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clsnet_cli::commands;
use clsnet_cli::config::{Action, ScenarioConfig};
use clsnet_cli::output::{json, write};
use clsnet_cli::verify::{run_suite, Fault};
use clsnet_cli::CliError;

#[derive(Parser)]
#[command(name = "clsnet", version, about = "Compact localized state storage, transfer and routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, compact localized states and symmetry blocks.
    Spectrum(RunArgs),
    /// Run a protocol schedule and write its trajectory.
    Simulate(RunArgs),
    /// Evaluate, refine or search CRAB pulse parameters.
    Optimize(RunArgs),
    /// Plan, schedule and simulate CLS routes on a lattice.
    Route(RunArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the integrator tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run only these criteria (repeatable).
    #[arg(long = "criterion")]
    criteria: Vec<u8>,
    /// Also write a JSON pass/fail table here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Deliberately break the build to check that the suite notices.
    #[arg(long, hide = true, value_parser = ["propagator-sign"])]
    inject_fault: Option<String>,
}

fn load(args: &RunArgs, expected: &str) -> Result<ScenarioConfig, CliError> {
    let src = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let mut cfg = ScenarioConfig::parse(&src).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", args.config.display())),
        other => other,
    })?;
    let kind = match cfg.action {
        Action::Spectrum(_) => "spectrum",
        Action::Simulate(_) => "simulate",
        Action::Optimize(_) => "optimize",
        Action::Route(_) => "route",
    };
    if kind != expected {
        return Err(CliError::Config(format!("config describes a {kind} action, not {expected}")));
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(t) = args.tol {
        cfg.integrator.tol = t;
    }
    if let Some(o) = &args.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn scenario(args: &RunArgs, expected: &str) -> Result<(), CliError> {
    let cfg = load(args, expected)?;
    let artifacts = commands::run(&cfg)?;
    artifacts.write(&cfg.output.dir)?;
    write(&cfg.output.dir, "scenario.toml", &cfg.emit())?;
    print!("{}", artifacts.summary_json());
    Ok(())
}

fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let fault = args.inject_fault.as_deref().map(|_| Fault::PropagatorSign);
    let results = run_suite(&args.criteria, fault).map_err(CliError::Config)?;
    for r in &results {
        println!("{}", r.line());
    }
    if let Some(dir) = &args.out {
        write(dir, "verify.json", &json(&serde_json::to_value(&results).expect("serializable")))?;
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| format!("{} ({})", r.id, r.name)).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        Ok(())
    } else {
        Err(CliError::Acceptance(format!("failed criteria: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Spectrum(a) => scenario(a, "spectrum"),
        Command::Simulate(a) => scenario(a, "simulate"),
        Command::Optimize(a) => scenario(a, "optimize"),
        Command::Route(a) => scenario(a, "route"),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("clsnet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
