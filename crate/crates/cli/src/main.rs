use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tracelens_cli::commands::{run_analyze, run_generate, run_ingest, AnalyzeArgs, GenerateArgs, IngestArgs};
use tracelens_cli::error::{CliError, CliResult};

/// Cluster-trace workload characterization.
#[derive(Parser)]
#[command(name = "tracelens", version)]
struct Cli {
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true, env = "TRACELENS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate trace tables into a per-job table.
    Ingest {
        #[arg(long)]
        trace_root: PathBuf,
        /// Output directory for jobs.csv and ingest_stats.json.
        #[arg(long)]
        out: PathBuf,
        /// Window bounds in trace microseconds; rows outside are dropped.
        #[arg(long)]
        window_start: Option<u64>,
        #[arg(long)]
        window_end: Option<u64>,
        /// TOML file overriding column positions.
        #[arg(long)]
        colmap: Option<PathBuf>,
    },
    /// Classify, cluster and fit a job table; writes report.json and plot CSVs.
    Analyze {
        #[arg(long)]
        jobs: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a synthetic trace described by a spec file.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn print_paths(paths: &[PathBuf]) {
    let mut out = std::io::stdout().lock();
    for p in paths {
        let _ = writeln!(out, "{}", p.display());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    match cli.command {
        Command::Ingest { trace_root, out, window_start, window_end, colmap } => {
            let paths = run_ingest(&IngestArgs { trace_root, out, window_start, window_end, colmap })?;
            print_paths(&paths);
        }
        Command::Analyze { jobs, out_dir, k_min, k_max, restarts, seed } => {
            let out = run_analyze(&AnalyzeArgs { jobs, out_dir, k_min, k_max, restarts, seed })?;
            print_paths(std::slice::from_ref(&out.report_path));
            print_paths(&out.files);
            if out.report.nothing_succeeded() {
                return Err(CliError::usage("no analysis succeeded; see report sections for reasons"));
            }
        }
        Command::Generate { spec, out_dir } => {
            let manifest = run_generate(&GenerateArgs { spec, out_dir })?;
            print_paths(&[manifest]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "{}: {}", record.level(), record.args()))
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::usage(e.to_string().trim_end());
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json_line());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
