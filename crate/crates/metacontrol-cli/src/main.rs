use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use metacontrol::case_study::{case_study_config, case_study_designs, MODEL_FILE_HEADER};
use metacontrol::harness::{self, HarnessError, Mode};
use metacontrol::model::{serialize_metacontrol_config, serialize_model};
use metacontrol::navsim::MissionSpec;

#[derive(Parser)]
#[command(name = "metacontrol", about = "Self-adaptive navigation experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single mission and write its trace and logs.
    Run(RunArgs),
    /// Run paired adaptive-vs-static missions over a batch of seeds.
    Compare(CompareArgs),
    /// Write the built-in 27-design navigation case study to a directory.
    GenCaseStudy {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// `adaptive` or `static:<fd-id>`.
    #[arg(long)]
    mode: String,
    #[arg(long)]
    seed: u64,
    /// Mission time budget in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Mean obstacle spawns per second.
    #[arg(long)]
    obstacle_rate: Option<f64>,
    /// Output directory for trace.csv, diagnostics.csv, decisions.log,
    /// reconfigurations.log, metrics.csv. Defaults to the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Number of seeds, used as 0..n.
    #[arg(long, conflicts_with = "seed_list")]
    seeds: Option<u64>,
    /// File with one seed per line.
    #[arg(long)]
    seed_list: Option<PathBuf>,
    /// Function design id for the static baseline.
    #[arg(long)]
    static_fd: String,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    obstacle_rate: Option<f64>,
    /// Output path for the comparison CSV. Defaults to compare.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    /// Bad invocation: exit 1.
    Usage(String),
    /// Unreadable or unparsable input files: exit 2.
    Input(String),
}

impl From<HarnessError> for CliError {
    fn from(err: HarnessError) -> Self {
        match err {
            HarnessError::Parse(_) | HarnessError::Validation(_) => CliError::Input(err.to_string()),
            _ => CliError::Usage(err.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn mission_spec(seed: u64, duration: Option<f64>, obstacle_rate: Option<f64>) -> MissionSpec {
    let mut spec = MissionSpec { seed, ..MissionSpec::default() };
    if let Some(d) = duration {
        spec.duration_limit_s = d;
    }
    if let Some(r) = obstacle_rate {
        spec.obstacle_rate = r;
    }
    spec
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let mode = Mode::parse(&args.mode)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let model = read(&args.model)?;
            let config = read(&args.config)?;
            let spec = mission_spec(args.seed, args.duration, args.obstacle_rate);
            let artifacts = harness::run_mission(&model, &config, spec, &mode, &[])?;
            let out = args.out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&out)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
            write(&out.join("trace.csv"), &artifacts.trace_csv)?;
            write(&out.join("diagnostics.csv"), &artifacts.diagnostics_csv)?;
            write(&out.join("decisions.log"), &artifacts.decision_log)?;
            write(&out.join("reconfigurations.log"), &artifacts.reconfig_log)?;
            let metrics = format!(
                "{}{}",
                harness::METRICS_CSV_HEADER,
                harness::metrics_csv_row(&artifacts.metrics)
            );
            write(&out.join("metrics.csv"), &metrics)?;
            println!(
                "mission {:?} mode={} initial_fd={} adaptations={}",
                artifacts.status,
                artifacts.metrics.mode,
                artifacts.initial_fd,
                artifacts.metrics.adaptations
            );
            Ok(())
        }
        Command::Compare(args) => {
            let seeds: Vec<u64> = match (args.seeds, &args.seed_list) {
                (Some(n), None) => (0..n).collect(),
                (None, Some(path)) => read(path)?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(|l| {
                        l.parse::<u64>()
                            .map_err(|_| CliError::Input(format!("bad seed line `{l}`")))
                    })
                    .collect::<Result<_, _>>()?,
                _ => {
                    return Err(CliError::Usage(
                        "exactly one of --seeds or --seed-list is required".to_string(),
                    ))
                }
            };
            let model = read(&args.model)?;
            let config = read(&args.config)?;
            let spec = mission_spec(0, args.duration, args.obstacle_rate);
            let result = harness::compare(&model, &config, &seeds, &args.static_fd, spec)?;
            let out = args.out.unwrap_or_else(|| PathBuf::from("compare.csv"));
            write(&out, &result.csv)?;
            print!("{}", result.verdict);
            Ok(())
        }
        Command::GenCaseStudy { out } => {
            fs::create_dir_all(&out)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
            let model = format!("{}{}", MODEL_FILE_HEADER, serialize_model(&case_study_designs()));
            write(&out.join("model.mdl"), &model)?;
            write(
                &out.join("metacontrol.cfg"),
                &serialize_metacontrol_config(&case_study_config()),
            )?;
            println!("wrote {} and {}", out.join("model.mdl").display(), out.join("metacontrol.cfg").display());
            Ok(())
        }
    }
}
