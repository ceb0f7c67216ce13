use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cnp_cli::{run, run_suite, write_report, CliError, Format, Overrides, Scenario, Task};

#[derive(Parser)]
#[command(name = "cnp", version, about = "Finite-sample kernel factorization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory; reports go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol_psd: Option<f64>,
    #[arg(long)]
    tol_rank: Option<f64>,
    /// Overrides the sample seed of the scenario.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol_psd: self.tol_psd,
            tol_rank: self.tol_rank,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// PSD, CNP and row-contraction tests of the scenario kernels.
    KernelCheck(TaskArgs),
    /// Partially isometric multiplier for the subspace M.
    Synthesize(TaskArgs),
    /// Leech factor between the representations of M and N.
    Leech(TaskArgs),
    /// Partially isometric representation of N through that of M.
    Pipeline(TaskArgs),
    /// Root function sweep in the coefficient model.
    Rootfn(TaskArgs),
    /// Smallest singular value of the H2 to A2 inclusion on polynomials.
    Counterexample(TaskArgs),
    /// Every scenario in a directory.
    Suite {
        dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn run_task(task: Task, args: &TaskArgs) -> Result<bool, CliError> {
    let mut scenario = Scenario::load(&args.config)?;
    scenario.apply(&args.common.overrides());
    if args.common.format == Format::Csv && task != Task::Rootfn {
        return Err(CliError::Invalid("CSV output is only available for rootfn".into()));
    }
    let report = run(&scenario, Some(task))?;
    match &args.common.out {
        Some(dir) => {
            let stem = args
                .config
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| scenario.name.clone());
            write_report(&report, dir, &stem, args.common.format)?;
        }
        None if args.common.format == Format::Csv => print!("{}", report.to_csv().unwrap_or_default()),
        None => print!("{}", report.to_json()),
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("failed: {} ({})", c.name, c.detail);
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::KernelCheck(a) => run_task(Task::KernelCheck, a),
        Command::Synthesize(a) => run_task(Task::Synthesize, a),
        Command::Leech(a) => run_task(Task::Leech, a),
        Command::Pipeline(a) => run_task(Task::Pipeline, a),
        Command::Rootfn(a) => run_task(Task::Rootfn, a),
        Command::Counterexample(a) => run_task(Task::Counterexample, a),
        Command::Suite { dir, common } => {
            run_suite(dir, common.out.as_deref(), &common.overrides(), common.format).map(|summary| {
                print!("{}", summary.table());
                summary.passed
            })
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
