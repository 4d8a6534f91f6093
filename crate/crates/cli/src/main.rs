use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use lpann_core::io::{load_index, read_dataset, save_index, write_atomic, write_dataset};
use lpann_core::{
    preprocess, run_campaign, sample_dataset, space_usage, BenchSpec, Distribution, LpError, Result, SchemeConfig,
};

#[derive(Parser, Debug)]
#[command(name = "lpann", version, about = "Approximate near neighbor search in lp, p > 2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset file.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Norm exponent recorded in the file header.
        #[arg(long, default_value_t = 4.0)]
        p: f64,
        /// gaussian, uniform or clustered
        #[arg(long, default_value = "gaussian")]
        dist: Distribution,
        /// Coordinate scale (standard deviation, or half-width for uniform).
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an index over a dataset file and write it to disk.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer every vector of a query file; prints "id distance" per line.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long = "query-file")]
        query_file: PathBuf,
    },
    /// Run a planted-trial campaign from a JSON spec and write the report.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("LPANN_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| LpError::Usage(format!("LPANN_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| LpError::Usage(format!("cannot configure thread pool: {e}")))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| LpError::io(path, e))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            n,
            d,
            p,
            dist,
            scale,
            seed,
            out,
        } => {
            if !(p.is_finite() && p >= 1.0) {
                return Err(LpError::Usage(format!("p must be finite and >= 1, got {p}")));
            }
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(LpError::Usage(format!("scale must be positive, got {scale}")));
            }
            let ds = sample_dataset(n, d, dist, scale, seed)?;
            write_atomic(&out, write_dataset(&ds, p).as_bytes())
        }
        Command::Build {
            input,
            r,
            delta,
            seed,
            out,
        } => {
            let file = read_dataset(&input)?;
            let config = SchemeConfig {
                p: file.p,
                r,
                delta,
                seed,
                ..Default::default()
            };
            let index = preprocess(&file.dataset, &config)?;
            save_index(&index, &out)?;
            let summary = json!({
                "approximation_bound": index.bound(),
                "achieved_approx": index.achieved_approx(),
                "ladder": index.ladder_summary(),
                "space": space_usage(&index),
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            Ok(())
        }
        Command::Query { index, query_file } => {
            let (_, index) = load_index(&index)?;
            let queries = read_dataset(&query_file)?.dataset;
            if !queries.is_empty() && queries.dim() != index.dim() {
                return Err(LpError::DimensionMismatch {
                    expected: index.dim(),
                    actual: queries.dim(),
                });
            }
            let mut out = String::new();
            for q in queries.iter() {
                match index.query(q)? {
                    Some(a) => out.push_str(&format!("{} {}\n", a.id, a.distance)),
                    None => out.push_str("none inf\n"),
                }
            }
            print!("{out}");
            Ok(())
        }
        Command::Bench { spec, out } => {
            let spec = BenchSpec::from_json(&read_text(&spec)?)?;
            let report = run_campaign(&spec)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            write_atomic(&out, text.as_bytes())?;
            println!(
                "success_rate {:.4} c_p {:.4} total_points {} fit_slope {}",
                report.success_rate,
                report.approximation_bound.c_p,
                report.space.total,
                report.space.fit_slope.map_or("n/a".to_string(), |s| format!("{s:.4}")),
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lpann: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
