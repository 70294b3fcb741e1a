use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mbe::config::ExperimentConfig;
use mbe::persist::write_json;
use mbe::verify::{report_run, Check, VerifyReport};
use mbe::{scan, simulate, suites};
use mbe_core::harness::FitWindow;

#[derive(Parser)]
#[command(name = "mbe", version, about = "Pseudo-spectral MBE growth simulator and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and persist it.
    Simulate {
        /// JSON config; omitted fields take their defaults.
        config: Option<PathBuf>,
        /// Overrides `output_dir`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Kernel norm scaling in d = 1 and d = 2.
    VerifyKernel {
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 128.0)]
        length: f64,
        /// First time of the fitted decade.
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Gradient, interpolation, growth and coarsening verdicts on a run directory.
    VerifyBounds {
        run: PathBuf,
        #[arg(long, requires = "t_max")]
        t_min: Option<f64>,
        #[arg(long, requires = "t_min")]
        t_max: Option<f64>,
    },
    /// Beta, Bihari and Strauss suites.
    BoundsLab {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Amplitude scan bracketing the smallness threshold.
    Scan {
        config: Option<PathBuf>,
        /// Comma-separated, non-decreasing.
        #[arg(long, value_delimiter = ',', required = true)]
        amplitudes: Vec<f64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Regenerate verify.json and plots for persisted runs.
    Report { runs: Vec<PathBuf> },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_json(p, value).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn print_verdicts(r: &VerifyReport) {
    let line = |name: &str, c: Result<String, &str>| match c {
        Ok(s) => println!("{name:<14} {s}"),
        Err(reason) => println!("{name:<14} skipped: {reason}"),
    };
    match &r.gradient {
        Check::Done { report } => line(
            "gradient",
            Ok(format!(
                "{} M = {:.4e}, compensated ratio {:.4}, L^p ratio {:.4}",
                verdict(report.pass),
                report.m,
                report.compensated.ratio,
                report.lp.ratio
            )),
        ),
        Check::Skipped { reason } => line("gradient", Err(reason)),
    }
    for c in &r.interpolated {
        match c {
            Check::Done { report } => line(
                "interpolated",
                Ok(format!(
                    "{} theta {:.4} p_theta {:.4}: slope {:.4} vs {:.4}",
                    verdict(report.pass),
                    report.theta,
                    report.p_theta,
                    report.fit.slope,
                    report.fit.bound.unwrap_or(f64::NAN)
                )),
            ),
            Check::Skipped { reason } => line("interpolated", Err(reason)),
        }
    }
    match &r.growth {
        Check::Done { report } => line(
            "growth",
            Ok(format!(
                "{} L^p slope {:.4} (bound {:.4}), L^inf slope {:.4} (bound {:.4})",
                verdict(report.pass),
                report.lp.slope,
                report.lp.bound.unwrap_or(f64::NAN),
                report.linf.slope,
                report.linf.bound.unwrap_or(f64::NAN)
            )),
        ),
        Check::Skipped { reason } => line("growth", Err(reason)),
    }
    if let Check::Done { report } = &r.exponent_chain {
        println!("{:<14} {report}", "exponents");
    }
    match &r.coarseness {
        Check::Done { report } => line(
            "coarsening",
            Ok(format!("{} slope {:.4} (bound {:.4})", verdict(report.pass), report.fit.slope, report.chain.bound_value)),
        ),
        Check::Skipped { reason } => line("coarsening", Err(reason)),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let (traj, meta) = simulate(&cfg, out.as_deref())?;
            let dir = out.unwrap_or(cfg.output_dir);
            println!(
                "{}: {:?} at t = {} after {} steps ({:.2} s)",
                dir.display(),
                meta.termination,
                traj.final_time(),
                meta.steps,
                meta.wall_seconds
            );
            for w in &meta.guards.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::VerifyKernel { n, length, t0, out } => {
            let s = suites::kernel_suite(n, length, t0)?;
            for r in s.sup.iter().chain(&s.grad_l1).chain(&s.l1) {
                eprintln!(
                    "d = {} order {} p = {}: slope {:.5} (theory {:.5})",
                    r.d, r.n, r.p, r.fitted_slope, r.theoretical_slope
                );
            }
            emit(&s, out.as_deref())?;
        }
        Command::VerifyBounds { run, t_min, t_max } => {
            let window = t_min.zip(t_max).map(|(t_min, t_max)| FitWindow { t_min, t_max });
            let (_, report) = report_run(&run, window)?;
            print_verdicts(&report);
        }
        Command::BoundsLab { seed, out } => emit(&suites::bounds_lab(seed)?, out.as_deref())?,
        Command::Scan { config, amplitudes, workers, out } => {
            let cfg = load_config(config.as_deref())?;
            let report = scan::parallel_scan(&cfg.experiment(), &amplitudes, workers.unwrap_or_else(scan::default_workers))?;
            for e in &report.entries {
                let guards = if e.guards_clean { "" } else { "  (guard warning)" };
                eprintln!("A = {:<10} |grad u0|_p = {:.4e}  {}{guards}", e.amplitude, e.grad_lp0, verdict(e.pass));
            }
            emit(&report, out.as_deref())?;
        }
        Command::Report { runs } => {
            for dir in runs {
                let (_, report) = report_run(&dir, None)?;
                println!("== {}", dir.display());
                print_verdicts(&report);
            }
        }
    }
    Ok(())
}
