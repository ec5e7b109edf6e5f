//! Command-line front end for the requirement-derivation library.
//!
//! Exit codes: 0 success, 1 validation error (bad flags or input files),
//! 2 infeasibility, 3 compliance failure (`check` only).

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use safereq_core::detection::{
    admissible_frontier, curve_dataset, write_curve_csv,
};
use safereq_core::generalization::required_sample_size;
use safereq_core::probability::format_sci;
use safereq_core::requirements::{
    check_compliance, derive_requirements, render, MeasuredMetrics, RenderFormat, RequirementSet,
    Scenario,
};
use safereq_core::safety_model::{evaluate_fault_tree, FaultTree};
use safereq_core::simulation::{
    analytic_reject_probability, exact_reject_probability_markov, simulate_iid, simulate_markov,
    SimConfig,
};
use safereq_core::Error;

#[derive(Parser)]
#[command(name = "safereq", version, about = "Derive ML safety performance requirements from quantitative safety objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the full requirement set from a scenario file
    Derive(DeriveArgs),
    /// Critical miss probability for every confirmation threshold
    Frontier(FrontierArgs),
    /// Grid of P(T=0) over rejection thresholds and miss probabilities (CSV)
    Curve(CurveArgs),
    /// Minimum sample count for a Hoeffding gap bound
    Samplesize(SampleSizeArgs),
    /// Monte Carlo estimate of P(T=0)
    Simulate(SimulateArgs),
    /// Fault tree operations
    Fta(FtaArgs),
    /// Check measured metrics against a derived requirement set
    Check(CheckArgs),
    /// Re-render a requirement set as JSON or Markdown
    Render(RenderArgs),
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write a Markdown rendering
    #[arg(long)]
    md: Option<PathBuf>,
}

#[derive(Args)]
struct FrontierArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    qso: String,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    n: usize,
    /// Rejection threshold range, e.g. 4..12
    #[arg(long)]
    ymin: String,
    #[arg(long, default_value = "0.5")]
    pmiss_max: String,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleSizeArgs {
    #[arg(long)]
    epsilon: String,
    #[arg(long)]
    delta: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    xmin: usize,
    #[arg(long)]
    pmiss: String,
    #[arg(long)]
    trials: u64,
    /// Mandatory for reproducibility; there is no wall-clock default
    #[arg(long)]
    seed: u64,
    /// Lag-1 autocorrelation of the miss process (0 = IID)
    #[arg(long, default_value = "0")]
    rho: String,
}

#[derive(Args)]
struct FtaArgs {
    #[command(subcommand)]
    command: FtaCommand,
}

#[derive(Subcommand)]
enum FtaCommand {
    /// Evaluate the top-event probability
    Eval {
        #[arg(long)]
        tree: PathBuf,
    },
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    reqs: PathBuf,
    #[arg(long)]
    measured: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    reqs: PathBuf,
    /// json or markdown
    #[arg(long, default_value = "markdown")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Validation(String),
    Infeasible(String),
    ComplianceFailure,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_infeasible() {
            CliError::Infeasible(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::ComplianceFailure) => ExitCode::from(3),
    }
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &PathBuf, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

fn parse_prob(name: &str, s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| CliError::Validation(format!("flag --{name}: invalid number `{s}`: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Derive(args) => {
            let scenario = Scenario::from_json(&read_file(&args.scenario)?)?;
            let reqs = derive_requirements(&scenario)?;
            write_file(&args.out, &render(&reqs, RenderFormat::Json)?)?;
            if let Some(md) = &args.md {
                write_file(md, &render(&reqs, RenderFormat::Markdown)?)?;
            }
            println!(
                "derived {} requirements for `{}` (q_tr = {}, n = {}, eta = {})",
                reqs.requirements.len(),
                reqs.scenario,
                format_sci(reqs.q_tr),
                reqs.n,
                reqs.eta
            );
            Ok(())
        }
        Command::Frontier(args) => {
            let qso = parse_prob("qso", &args.qso)?;
            let frontier = admissible_frontier(args.n, qso)?;
            println!("x_min,y_min,critical_p_miss");
            for p in frontier {
                println!("{},{},{}", p.x_min, p.y_min, format_sci(p.critical_p_miss));
            }
            Ok(())
        }
        Command::Curve(args) => {
            let (lo, hi) = args
                .ymin
                .split_once("..")
                .ok_or_else(|| CliError::Validation("flag --ymin: expected A..B".into()))?;
            let lo: usize = lo
                .trim()
                .parse()
                .map_err(|e| CliError::Validation(format!("flag --ymin: {e}")))?;
            let hi: usize = hi
                .trim()
                .parse()
                .map_err(|e| CliError::Validation(format!("flag --ymin: {e}")))?;
            let pmax = parse_prob("pmiss-max", &args.pmiss_max)?;
            if args.steps == 0 {
                return Err(CliError::Validation("flag --steps must be >= 1".into()));
            }
            let grid: Vec<f64> =
                (0..=args.steps).map(|i| pmax * i as f64 / args.steps as f64).collect();
            let rows = curve_dataset(args.n, lo..=hi, &grid)?;
            let mut buf = Vec::new();
            write_curve_csv(&rows, &mut buf)
                .map_err(|e| CliError::Validation(format!("csv: {e}")))?;
            fs::write(&args.out, buf)
                .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", args.out.display())))?;
            println!("wrote {} rows to {}", rows.len(), args.out.display());
            Ok(())
        }
        Command::Samplesize(args) => {
            let epsilon = parse_prob("epsilon", &args.epsilon)?;
            let delta = parse_prob("delta", &args.delta)?;
            println!("{}", required_sample_size(epsilon, delta)?);
            Ok(())
        }
        Command::Simulate(args) => {
            let config = SimConfig {
                n: args.n,
                x_min: args.xmin,
                p_miss: parse_prob("pmiss", &args.pmiss)?,
                trials: args.trials,
                seed: args.seed,
                rho: parse_prob("rho", &args.rho)?,
            };
            let result = if config.rho == 0.0 {
                simulate_iid(&config)?
            } else {
                simulate_markov(&config)?
            };
            let analytic = analytic_reject_probability(config.n, config.x_min, config.p_miss)?;
            let mut out = serde_json::json!({
                "result": result,
                "analytic_iid": analytic,
            });
            if config.rho > 0.0 && config.n <= 24 {
                // sensitivity report: exact correlated value vs the IID model
                let exact = exact_reject_probability_markov(
                    config.n,
                    config.x_min,
                    config.p_miss,
                    config.rho,
                )?;
                out["exact_markov"] = serde_json::json!(exact);
            }
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, &out)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let _ = writeln!(lock);
            Ok(())
        }
        Command::Fta(args) => match args.command {
            FtaCommand::Eval { tree } => {
                let tree = FaultTree::from_json(&read_file(&tree)?)?;
                let p = evaluate_fault_tree(&tree, None)?;
                println!("{}", format_sci(p));
                Ok(())
            }
        },
        Command::Check(args) => {
            let reqs = RequirementSet::from_json(&read_file(&args.reqs)?)?;
            let measured = MeasuredMetrics::from_json(&read_file(&args.measured)?)?;
            let report = check_compliance(&reqs, &measured)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            println!("{json}");
            if report.all_pass() {
                Ok(())
            } else {
                Err(CliError::ComplianceFailure)
            }
        }
        Command::Render(args) => {
            let reqs = RequirementSet::from_json(&read_file(&args.reqs)?)?;
            let format = match args.format.as_str() {
                "json" => RenderFormat::Json,
                "markdown" | "md" => RenderFormat::Markdown,
                other => {
                    return Err(CliError::Validation(format!(
                        "flag --format: expected json or markdown, got `{other}`"
                    )))
                }
            };
            let doc = render(&reqs, format)?;
            match &args.out {
                Some(path) => write_file(path, &doc)?,
                None => print!("{doc}"),
            }
            Ok(())
        }
    }
}
