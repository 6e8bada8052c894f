use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ecosched::batch::{gnuplot_data, parse_rows, summarise, table};
use ecosched::generate::{generate_random, GenParams};
use ecosched::io::{self, instance_to_json, load_instance, to_pretty};
use ecosched::report::{certify_report, parse_report, run_instance, Algo, OracleMode};
use ecosched::sweep::{run_sweep, SweepConfig};
use ecosched::AppError;
use ecosched_core::certify::Verdict;
use ecosched_core::model::ProblemKind;

#[derive(Parser)]
#[command(name = "ecosched", version, about = "Online energy-aware scheduling: simulate, certify, sweep")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a random instance as JSON.
    Generate {
        #[arg(long, value_parser = parse_problem)]
        problem: ProblemKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        g: f64,
        #[arg(long = "wakeup-cost", default_value_t = 0.0)]
        wakeup_cost: f64,
        #[arg(long, default_value_t = 1)]
        machines: usize,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an algorithm and write its report as JSON.
    Run {
        #[arg(long)]
        algo: Algo,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a run report and print its certificate.
    Certify {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "auto")]
        oracle: OracleMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate, run and certify a grid of instances into a CSV file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Summarise a sweep CSV as a table.
    Report {
        #[arg(long)]
        csv: PathBuf,
        /// Also write the summary as gnuplot data.
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
}

fn parse_problem(s: &str) -> Result<ProblemKind, String> {
    ProblemKind::parse(s).ok_or_else(|| format!("unknown problem `{s}`"))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), AppError> {
    match out {
        Some(p) => io::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Returns the exit code on success paths too: a failed certificate is 2.
fn dispatch(cmd: Cmd) -> Result<u8, AppError> {
    match cmd {
        Cmd::Generate { problem, n, alpha, g, wakeup_cost, machines, epsilon, horizon, seed, out } => {
            let mut p = GenParams::new(problem, n, alpha);
            p.g = g;
            p.wakeup_cost = wakeup_cost;
            p.machines = machines;
            p.epsilon = epsilon;
            p.horizon = horizon;
            let inst = generate_random(&p, seed).map_err(|e| AppError::Usage(e.to_string()))?;
            emit(out.as_deref(), &instance_to_json(&inst))?;
        }
        Cmd::Run { algo, instance, epsilon, out } => {
            let inst = load_instance(&instance)?;
            let rep = run_instance(inst, algo, epsilon)?;
            emit(out.as_deref(), &to_pretty(&rep))?;
        }
        Cmd::Certify { run, oracle, out } => {
            let rep = parse_report(&io::read(&run)?)?;
            let cert = certify_report(&rep, oracle)?;
            let file = cert.to_file();
            match out {
                Some(p) => {
                    io::write(&p, &to_pretty(&file))?;
                    println!("verdict: {}", file.verdict);
                }
                None => print!("{}", to_pretty(&file)),
            }
            for name in cert.certificate.failed_checks() {
                eprintln!("check failed: {name}");
            }
            if cert.certificate.verdict == Verdict::Failed {
                return Ok(2);
            }
        }
        Cmd::Sweep { config } => {
            let cfg: SweepConfig =
                serde_json::from_str(&io::read(&config)?).map_err(|e| AppError::Parse(e.to_string()))?;
            let csv = run_sweep(&cfg)?;
            io::write(&cfg.output, &csv)?;
            let rows = parse_rows(&csv)?;
            eprintln!("wrote {} rows to {}", rows.iter().filter(|r| !r.is_summary()).count(), cfg.output.display());
        }
        Cmd::Report { csv, gnuplot } => {
            let rows = parse_rows(&io::read(&csv)?)?;
            let sums = summarise(&rows);
            print!("{}", table(&sums));
            if let Some(p) = gnuplot {
                io::write(&p, &gnuplot_data(&sums))?;
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
