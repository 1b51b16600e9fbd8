use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lonscape::encodings::Encoding;
use lonscape::evaluate::EvaluatorKind;
use lonscape_cli::{
    cmd_build, cmd_compare, cmd_export, cmd_metrics, cmd_sample, CliError, ExperimentConfig, ExportFormat,
};

#[derive(Parser)]
#[command(
    name = "lonscape",
    version,
    about = "Sample and analyse local optima networks of robot morphology encodings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run iterated local search and write one log per run
    Sample(SampleArgs),
    /// Merge a directory of run logs into a LON
    Build {
        log_dir: PathBuf,
        /// Output directory (defaults to the log directory)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write network and run statistics tables
    Metrics {
        #[arg(required = true)]
        lons: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Pairwise Mann-Whitney U tests between LONs
    Compare {
        #[arg(required = true, num_args = 2..)]
        lons: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Export LONs as graph files with pooled quartile colouring
    Export {
        #[arg(required = true)]
        lons: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Graphml)]
        format: Format,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SampleArgs {
    /// JSON experiment configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's out_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; run r uses seed + r
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    encoding: Option<Encoding>,
    #[arg(long, value_enum)]
    evaluator: Option<EvaluatorArg>,
    /// Shell command starting an external evaluator
    #[arg(long)]
    external_cmd: Option<String>,
    /// Worker threads (0 = number of processors)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvaluatorArg {
    Surrogate,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Graphml,
    Dot,
    Csv,
}

fn sample(args: SampleArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(encoding) = args.encoding {
        cfg.encoding = encoding;
    }
    if let Some(kind) = args.evaluator {
        cfg.evaluator.kind = match kind {
            EvaluatorArg::Surrogate => EvaluatorKind::Surrogate,
            EvaluatorArg::External => EvaluatorKind::External,
        };
    }
    if let Some(cmd) = args.external_cmd {
        cfg.evaluator.external_command = Some(cmd);
    }
    if let Some(out) = args.out {
        cfg.out_dir = Some(out);
    }
    let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let written = cmd_sample(&cfg, &out, args.jobs)?;
    eprintln!("wrote {} run logs to {}", written.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sample(args) => sample(args),
        Command::Build { log_dir, out } => {
            let path = cmd_build(&log_dir, out.as_deref().unwrap_or(&log_dir))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::Metrics { lons, out } => {
            for p in cmd_metrics(&lons, &out)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Compare { lons, out } => {
            eprintln!("wrote {}", cmd_compare(&lons, &out)?.display());
            Ok(())
        }
        Command::Export { lons, format, out } => {
            let format = match format {
                Format::Graphml => ExportFormat::Graphml,
                Format::Dot => ExportFormat::Dot,
                Format::Csv => ExportFormat::Csv,
            };
            for p in cmd_export(&lons, format, &out)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
