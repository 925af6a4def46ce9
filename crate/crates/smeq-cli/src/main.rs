use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use smeq::paragroup::compare_paragroups;
use smeq::pipeline::{bratteli_dot, compare_dot, run_scenario, subject_paragroup};
use smeq::scenario::{Scenario, BUILTINS};
use smeq::Error;

/// Verify strong Morita equivalence constructions on matrix-algebra scenarios.
#[derive(Parser)]
#[command(name = "smeq", version)]
struct Cli {
    /// Run every map sequentially even when built with the parallel feature.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification pipeline on a scenario file or built-in name.
    Verify {
        file: String,
        /// Keep only checks whose name starts with this prefix.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        depth: Option<usize>,
        /// Write the machine-readable report (JSON) here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the Bratteli diagram of the relative commutants (DOT) here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    ListBuiltins,
    /// Compare the relative-commutant data of two scenarios.
    Compare {
        file_a: String,
        file_b: String,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write both diagrams and the verdict (DOT) here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
}

fn load(file: &str, seed: Option<u64>, tol: Option<f64>, depth: Option<usize>) -> Result<Scenario, Error> {
    let mut sc = Scenario::load(file)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(t) = tol {
        sc.tol = t;
    }
    if let Some(d) = depth {
        sc.depth = d;
    }
    Ok(sc)
}

fn write(path: &PathBuf, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn input_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.sequential {
        smeq::exec::set_parallel(false);
    }
    match cli.command {
        Command::ListBuiltins => {
            for b in BUILTINS {
                println!("{:<20} {}", b.name, b.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Verify { file, filter, seed, tol, depth, report, dot } => {
            let sc = match load(&file, seed, tol, depth) {
                Ok(sc) => sc,
                Err(e) => return input_error(&e),
            };
            let out = run_scenario(&sc, filter.as_deref());
            if out.report.checks.is_empty() {
                return input_error(&Error::InputShape(format!("filter {:?} matches no check", filter.unwrap_or_default())));
            }
            print!("{}", out.report.to_text());
            if let Some(p) = &report {
                if let Err(e) = write(p, &out.report.to_json()) {
                    return input_error(&e);
                }
            }
            if let Some(p) = &dot {
                if let Err(e) = write(p, &bratteli_dot(out.artifacts.right.as_ref(), &sc.name)) {
                    return input_error(&e);
                }
            }
            if out.report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Compare { file_a, file_b, depth, seed, dot } => {
            let (sa, sb) = match (load(&file_a, seed, None, depth), load(&file_b, seed, None, depth)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => return input_error(&e),
            };
            let (pa, pb) = match (subject_paragroup(&sa), subject_paragroup(&sb)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let v = compare_paragroups(&pa, &pb);
            println!("{}: relative commutant dims {:?}", sa.name, pa.rc_dims);
            println!("{}: relative commutant dims {:?}", sb.name, pb.rc_dims);
            if v.equal {
                println!("equivalent; block permutations {:?}", v.permutations);
            } else {
                println!("different at level {}: {}", v.first_difference.unwrap_or(0), v.reason);
            }
            if let Some(p) = &dot {
                if let Err(e) = write(p, &compare_dot(&pa, &sa.name, &pb, &sb.name, &v)) {
                    return input_error(&e);
                }
            }
            if v.equal {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
