mod config;
mod experiments;
mod record;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::config::Source;
use crate::experiments::{Context, RunError};
use crate::record::{Format, Provenance, ResultRecord, SCHEMA_VERSION};

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "satlab", version, about = "Experiments on saturated feedback systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Reject times that are not whole multiples of the cell width.
        #[arg(long)]
        strict_alignment: bool,
        /// Overrides `numerics.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for parallel sweeps.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn config_hash(text: &str, seed: u64, strict: bool) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update(format!("\nseed={seed}\nstrict_alignment={strict}\n").as_bytes());
    hex(&h.finalize())
}

fn write_outputs(dir: &Path, record: &ResultRecord, format: Format) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, body) in record::render(record, format) {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}

fn run(
    path: &Path,
    out: &Path,
    format: Format,
    strict_alignment: bool,
    seed: Option<u64>,
    threads: Option<usize>,
) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: error: cannot read config: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let source = Source::new(path.display().to_string(), text);
    let config = match config::parse(&source) {
        Ok(c) => c,
        Err(d) => {
            eprintln!("{d}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(k) = threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let seed = seed.unwrap_or(config.numerics.seed);
    let ctx = Context {
        config: &config,
        source: &source,
        seed,
        strict_alignment,
    };
    let start = Instant::now();
    let (evidence, verdicts) = match experiments::run(&ctx) {
        Ok(r) => r,
        Err(RunError::Config(d)) => {
            eprintln!("{d}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(RunError::Numeric(msg)) => {
            eprintln!("{}: numeric failure: {msg}", source.path);
            return ExitCode::from(EXIT_NUMERIC);
        }
    };
    let record = ResultRecord {
        schema_version: SCHEMA_VERSION,
        experiment: config.experiment.name().into(),
        provenance: Provenance {
            config_hash: config_hash(&source.text, seed, strict_alignment),
            code_version: env!("CARGO_PKG_VERSION").into(),
            seed,
        },
        wall_time_s: start.elapsed().as_secs_f64(),
        config: serde_json::to_value(&config).expect("config serializes"),
        evidence,
        verdicts,
    };
    match write_outputs(out, &record, format) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", out.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    record::print_summary(&record);
    if record.failed() {
        ExitCode::from(EXIT_FAILED)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            format,
            strict_alignment,
            seed,
            threads,
        } => run(&config, &out, format, strict_alignment, seed, threads),
    }
}
