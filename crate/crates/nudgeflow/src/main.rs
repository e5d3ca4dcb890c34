use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nudgeflow::commands::{self, CheckLevel};
use nudgeflow::RunConfig;

#[derive(Parser)]
#[command(name = "nudgeflow", version, about = "Miscible displacement with nudging data assimilation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reference run plus one nudged run per configured mu.
    Run { config: PathBuf },
    /// Check model assumptions, lattice alignment and the stability proxy.
    Validate { config: PathBuf },
    /// Plateau and decay rate over a (mu, hbar) grid.
    Sweep { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let path = match &cli.command {
        Command::Run { config } | Command::Validate { config } | Command::Sweep { config } => config,
    };
    let cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Run { .. } => commands::run(&cfg).map(|s| {
            for r in &s.runs {
                match &r.error {
                    None => println!("ok     {} -> {}", r.label, r.dir.display()),
                    Some(e) => println!("FAILED {}: {e}", r.label),
                }
            }
            s.all_completed()
        }),
        Command::Validate { .. } => commands::validate(&cfg).map(|checks| {
            for c in &checks {
                println!("{c}");
            }
            let warns = checks.iter().filter(|c| c.level == CheckLevel::Warn).count();
            println!("{} checks, {warns} warnings", checks.len());
            true
        }),
        Command::Sweep { .. } => commands::sweep(&cfg).map(|rows| {
            for r in &rows {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
                match &r.error {
                    None => println!("hbar {} mu {}: plateau {} interp {} rate {}", r.hbar, r.mu, f(r.plateau), f(r.interp_plateau), f(r.rate)),
                    Some(e) => println!("hbar {} mu {}: failed: {e}", r.hbar, r.mu),
                }
            }
            rows.iter().all(|r| r.error.is_none())
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
