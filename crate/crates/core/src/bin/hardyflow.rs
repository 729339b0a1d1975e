use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hardyflow::cli::{run, RunConfig, RunReport};

/// Green, Bergman and conjugate Hardy kernels along Green sublevel flows.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace every level instead of reading and writing the level cache.
    #[arg(long)]
    no_cache: bool,
    /// Print the run report as JSON on stdout.
    #[arg(long)]
    json: bool,
}

fn summary(report: &RunReport) {
    println!("{:?} on {:?}", report.config.command, report.method);
    if !report.critical_times.is_empty() {
        println!("critical times: {:?}", report.critical_times);
    }
    if let Some(k) = &report.kernels {
        let kn = &k.kernels;
        println!(
            "t = {}: B = {:.12e}, Khat = {:.12e}, hnormB = {:.12e} (degree {}, change {:.1e}, {} holes)",
            kn.t, kn.bergman, kn.khat, kn.hnorm_bergman, kn.degree, kn.degree_change, k.holes
        );
    }
    if let Some(c) = &report.checks {
        println!("checks: {}/{} passed", c.passed, c.total);
        for name in &c.failed {
            println!("  FAILED {name}");
        }
    }
    for (t, e) in &report.row_failures {
        println!("row t = {t} failed: {e}");
    }
    for a in &report.artifacts {
        println!("wrote {}", a.display());
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = RunConfig::load(&args.config).and_then(|mut config| {
        if let Some(out) = args.out {
            config.out = out;
        }
        if args.no_cache {
            config.cache = false;
        }
        run(&config)
    });
    match result {
        Ok(report) => {
            if args.json {
                match serde_json::to_string_pretty(&report) {
                    Ok(s) => println!("{s}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(4);
                    }
                }
            } else {
                summary(&report);
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
