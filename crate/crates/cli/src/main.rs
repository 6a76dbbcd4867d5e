use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pauli_est::{exit_code, run, write_all, Command, Format, SpecFile};

#[derive(Parser)]
#[command(name = "pauli-est", version, about = "Fisher-optimal estimation of Pauli channels")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fisher matrices, determinants and Cramer-Rao bounds for given configurations
    Fisher(Common),
    /// Closed-form optimal configurations and their information
    OptimalConfig(Common),
    /// Numerical maximisation of det F from a grid of starts
    Optimize(Common),
    /// Estimate channel parameters from measured frequencies
    Estimate(Common),
    /// Monte Carlo MSE of the full-direction estimator
    Simulate(Common),
    /// Orthogonality or N-scaling sweep of the Monte Carlo MSE
    Sweep(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Spec file (TOML)
    #[arg(long)]
    spec: PathBuf,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the spec's seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Worker threads (default: all cores)
    #[arg(long, env = "PAULI_EST_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Fisher(a) => (Command::Fisher, a),
        Cmd::OptimalConfig(a) => (Command::OptimalConfig, a),
        Cmd::Optimize(a) => (Command::Optimize, a),
        Cmd::Estimate(a) => (Command::Estimate, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
    };
    if let Some(n) = args.threads {
        // only fails if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let format = match args.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let result = SpecFile::load(&args.spec).and_then(|mut spec| {
        if let Some(seed) = args.seed {
            spec.seed = seed;
        }
        let files = run(cmd, &spec, format)?;
        write_all(&args.out, &files)?;
        Ok(files)
    });
    match result {
        Ok(files) => {
            for (name, _) in files {
                println!("{}", args.out.join(name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = exit_code(&e);
            let record = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": code,
            });
            eprintln!("{record}");
            ExitCode::from(code as u8)
        }
    }
}
