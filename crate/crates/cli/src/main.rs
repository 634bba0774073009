//! `geodist`: build hierarchical geodesic indexes over feature-vector pools,
//! query them, validate them against a brute-force oracle, and run the
//! contrastive mining simulation.

mod commands;
mod config;

use clap::{Parser, Subcommand};

use geodist_core::Error as CoreError;

/// Exit codes: 0 ok, 2 usage, 3 corrupt input, 4 bad query, 5 size limit.
const EXIT_CORRUPT: i32 = 3;
const EXIT_BAD_QUERY: i32 = 4;
const EXIT_TOO_LARGE: i32 = 5;

#[derive(Parser)]
#[command(name = "geodist", version, about)]
struct Cli {
    /// Worker threads (default: GEODIST_THREADS env var, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic datasets into embedding files.
    Gen(commands::gen::GenArgs),
    /// Build a hierarchical index from an embedding file.
    Build(commands::build::BuildArgs),
    /// Query distances and similarities from an index.
    Query(commands::query::QueryArgs),
    /// Exact brute-force geodesic table with Floyd/Dijkstra cross-check.
    Oracle(commands::oracle::OracleArgs),
    /// Compare an index against a dumped exact distance matrix.
    Compare(commands::oracle::CompareArgs),
    /// Run the contrastive mining simulation over paired datasets.
    Simulate(commands::simulate::SimulateArgs),
    /// Sweep neighbor counts and check connectivity bounds empirically.
    CheckBounds(commands::bounds::CheckBoundsArgs),
    /// Measure build, query, insert, and rebuild performance.
    Bench(commands::bench::BenchArgs),
}

fn main() {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let result = match cli.command {
        Command::Gen(args) => commands::gen::run(args),
        Command::Build(args) => commands::build::run(args),
        Command::Query(args) => commands::query::run(args),
        Command::Oracle(args) => commands::oracle::run(args),
        Command::Compare(args) => commands::oracle::run_compare(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::CheckBounds(args) => commands::bounds::run(args),
        Command::Bench(args) => commands::bench::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code_for(&err));
    }
}

fn init_threads(flag: Option<usize>) {
    let threads = flag.or_else(|| {
        std::env::var("GEODIST_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        // A failed build here means a pool already exists; that is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::CorruptFile(_) => EXIT_CORRUPT,
                CoreError::Io(_) => EXIT_CORRUPT,
                CoreError::IndexOutOfRange { .. } => EXIT_BAD_QUERY,
                CoreError::TooLarge { .. } => EXIT_TOO_LARGE,
                _ => 1,
            };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            let _ = io;
            return EXIT_CORRUPT;
        }
    }
    1
}
