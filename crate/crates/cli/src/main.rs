use std::path::PathBuf;
use std::process::ExitCode;

use activeris_core::channel::{generate_channels, ScenarioGeometry};
use activeris_core::harness::config::{build_params, SystemSettings, FULL_REALIZATIONS};
use activeris_core::harness::{load_config, oracle_search, run_sweep, write_outputs, OracleGrid, OracleInstance};
use activeris_core::Error;
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUN_FAILURES: u8 = 2;

#[derive(Parser)]
#[command(name = "activeris", version, about = "Secrecy-rate optimization for active-RIS-assisted MISO links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to `run.output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        /// Use the full realization count instead of the configured one.
        #[arg(long)]
        full: bool,
    },
    /// Grid-search the best secrecy rate of a small instance.
    Oracle {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Levels per searched coordinate.
        #[arg(long)]
        grid: usize,
        #[arg(long, default_value_t = 30.0)]
        pt_dbm: f64,
        #[arg(long, default_value_t = 30.0)]
        pi_dbm: f64,
        #[arg(long, default_value_t = 30.0)]
        eta2_db: f64,
        #[arg(long, default_value_t = -95.0)]
        noise_dbm: f64,
        /// Report the raw grid optimum without local polishing.
        #[arg(long)]
        no_refine: bool,
    },
    /// Parse and validate a configuration file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn fail(e: &Error, code: u8) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn run(config: PathBuf, out: Option<PathBuf>, workers: usize, full: bool) -> ExitCode {
    let mut cfg = match load_config(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e, EXIT_CONFIG),
    };
    if full {
        cfg.realizations = FULL_REALIZATIONS;
    }
    let Some(dir) = out.or_else(|| cfg.output_dir.clone()) else {
        eprintln!("error: no output directory; pass --out or set run.output_dir");
        return ExitCode::from(EXIT_CONFIG);
    };
    log::info!("{} runs on {} workers", cfg.total_runs(), workers);
    let outcome = match run_sweep(&cfg, workers) {
        Ok(o) => o,
        Err(e) => return fail(&e, EXIT_RUN_FAILURES),
    };
    if let Err(e) = write_outputs(&dir, &cfg, &outcome, cfg.write_traces) {
        return fail(&e, EXIT_RUN_FAILURES);
    }
    for s in outcome.summary() {
        println!("{}={} {:<8} mean SR {:.4} nats ({:.4} bits) over {} runs", s.sweep_var, s.sweep_value, s.method, s.mean_sr_nats, s.mean_sr_bits, s.runs);
    }
    println!("results written to {}", dir.display());
    let failures = outcome.failures();
    if failures > 0 {
        eprintln!("{failures} run(s) failed; see the status column");
        return ExitCode::from(EXIT_RUN_FAILURES);
    }
    ExitCode::SUCCESS
}

#[allow(clippy::too_many_arguments)]
fn oracle(m: usize, n: usize, seed: u64, grid: usize, pt_dbm: f64, pi_dbm: f64, eta2_db: f64, noise_dbm: f64, no_refine: bool) -> ExitCode {
    let settings = SystemSettings { m, n, pt_dbm, pi_dbm, eta2_db, noise_dbm };
    let outcome = build_params(&settings).and_then(|params| {
        let ch = generate_channels(&params, &ScenarioGeometry::default(), seed)?;
        oracle_search(&OracleInstance::new(&ch, &params), &OracleGrid { resolution: grid, refine: !no_refine })
    });
    match outcome {
        Ok(best) => {
            println!("grid points: {:.0}", best.points);
            println!("best SR: {:.6} nats ({:.6} bits)", best.sr, best.sr / std::f64::consts::LN_2);
            for (i, w) in best.w.iter().enumerate() {
                println!("w[{i}] = {:.6e} {:+.6e}i", w.re, w.im);
            }
            for (i, q) in best.q.iter().enumerate() {
                println!("q[{i}] = {:.6} at {:.6} rad", q.norm(), q.arg());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, EXIT_CONFIG),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, out, workers, full } => run(config, out, workers, full),
        Command::Oracle { m, n, seed, grid, pt_dbm, pi_dbm, eta2_db, noise_dbm, no_refine } => {
            oracle(m, n, seed, grid, pt_dbm, pi_dbm, eta2_db, noise_dbm, no_refine)
        }
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                println!(
                    "ok: sweep over {} with {} values, {} methods, {} realizations ({} runs)",
                    cfg.variable,
                    cfg.points.len(),
                    cfg.methods.len(),
                    cfg.realizations,
                    cfg.total_runs()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e, EXIT_CONFIG),
        },
    }
}
