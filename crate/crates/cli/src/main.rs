use std::path::PathBuf;
use std::process::ExitCode;

use bscd::runner::{emit_report, exit_code, run, Format, MomentMethod, RunConfig};
use bscd::Error;
use clap::Parser;

const CONFIG_ERROR: u8 = 2;

/// Runs verification suites for a bivariate Bernstein-Szego measure.
#[derive(Debug, Parser)]
#[command(name = "bscd", version)]
struct Cli {
    /// Suite name (stability, moments, schur-cohn, cd-kernel,
    /// verify-orthogonality, verify-cd, verify-kernel, parametric) or `all`.
    suite: String,

    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Tolerance override, either NAME=V or a bare value applied to every class.
    #[arg(long, value_name = "NAME=V")]
    tol: Vec<String>,

    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    format: Option<Format>,

    /// Moment window A,B.
    #[arg(long, value_name = "A,B")]
    window: Option<String>,

    #[arg(long)]
    method: Option<MomentMethod>,

    #[arg(long)]
    theta_grid: Option<usize>,

    #[arg(long)]
    j: Option<usize>,

    #[arg(long)]
    k_max: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,
}

fn parse_window(s: &str) -> Result<[usize; 2], Error> {
    let bad = || Error::ConfigInvalid(format!("window must be A,B, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok([a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?])
}

fn parse_value(s: &str) -> Result<f64, Error> {
    s.trim().parse().map_err(|_| Error::ConfigInvalid(format!("not a number: `{s}`")))
}

fn apply(cli: &Cli, cfg: &mut RunConfig) -> Result<(), Error> {
    if cli.suite != "all" {
        cfg.suites = Some(vec![cli.suite.clone()]);
    } else if cfg.suites.is_none() {
        cfg.suites = Some(vec!["all".into()]);
    }
    for t in &cli.tol {
        match t.split_once('=') {
            Some((name, v)) => {
                cfg.tolerances.insert(name.trim().to_string(), parse_value(v)?);
            }
            None => {
                let v = parse_value(t)?;
                for name in ["orthogonality", "identity", "cross_path", "moments"] {
                    cfg.tolerances.insert(name.into(), v);
                }
                cfg.moment_tol = Some(v);
            }
        }
    }
    if let Some(w) = &cli.window {
        cfg.window = Some(parse_window(w)?);
    }
    if let Some(m) = cli.method {
        cfg.moment_method = m;
    }
    if let Some(n) = cli.theta_grid {
        cfg.theta_grid = n;
    }
    if cli.j.is_some() {
        cfg.j = cli.j;
    }
    if let Some(k) = cli.k_max {
        cfg.k_max = k;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Some(out) = &cli.out {
        cfg.output_path = Some(out.display().to_string());
    }
    Ok(())
}

fn threads_from_env() -> Result<(), Error> {
    let Ok(v) = std::env::var("BSCD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::ConfigInvalid(format!("BSCD_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::ConfigInvalid(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = threads_from_env()
        .and_then(|()| RunConfig::from_path(&cli.config))
        .and_then(|mut cfg| apply(&cli, &mut cfg).map(|()| cfg))
        .and_then(|cfg| {
            let reports = run(&cfg)?;
            emit_report(&reports, cfg.format, cfg.output_path.as_deref().map(std::path::Path::new))?;
            Ok(reports)
        });
    match outcome {
        Ok(reports) => {
            for r in &reports {
                eprintln!("{:<22} {:<13} {:.3e}", r.suite, r.status.to_string(), r.max_violation);
            }
            ExitCode::from(exit_code(&reports) as u8)
        }
        Err(e) => {
            eprintln!("bscd: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}
