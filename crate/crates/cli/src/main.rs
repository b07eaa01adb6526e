use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use svie_core::config::ScenarioConfig;
use svie_core::{selftest, workflow, Error};

#[derive(Parser)]
#[command(name = "svie", version, about = "Stochastic Volterra equations via lifted curve-valued SPDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the seed of the scenario file.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the number of paths of the scenario file.
    #[arg(long, global = true, value_name = "N")]
    paths: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and write trajectories plus a manifest.
    Simulate,
    /// Certify the Lipschitz conditions and the limiting-law criteria.
    Certify,
    /// Estimate the law at two horizons and test for convergence.
    EstimateLaw,
    /// Compare the lifted scheme with the direct Volterra sum and the Picard reference.
    OracleCompare,
    /// Run the built-in acceptance checks.
    Selftest,
}

const DEFAULT_OUT: &str = "svie-out";

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } | Error::TooManyDiverged { .. } | Error::NonFiniteKernel { .. } | Error::NoConvergence { .. } => 3,
        _ => 2,
    }
}

fn load(opts: &Opts) -> Result<ScenarioConfig, Error> {
    let path = opts.config.as_deref().ok_or_else(|| Error::Config {
        field: "config".into(),
        message: "this subcommand needs --config PATH".into(),
    })?;
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(n) = opts.paths {
        cfg.paths = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(opts: &Opts, cfg: &ScenarioConfig) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn workers(opts: &Opts) -> Result<usize, Error> {
    match opts.workers {
        Some(0) => Err(Error::Config {
            field: "workers".into(),
            message: "must be at least 1".into(),
        }),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn show(dir: &Path, name: &str) {
    println!("wrote {}", dir.join(name).display());
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let opts = &cli.opts;
    match cli.command {
        Command::Simulate => {
            let cfg = load(opts)?;
            let dir = out_dir(opts, &cfg);
            let m = workflow::simulate(&cfg, &dir, workers(opts)?)?;
            println!(
                "{} paths, {} steps of dt = {}, {} diverged",
                m.paths, m.steps, m.dt, m.diverged
            );
            let t = &m.truncation;
            println!(
                "grid: x_max = {}, {} cells, kernel decay lag {}, window covers horizon: {}, max tail gap {:.3e}",
                t.x_max,
                t.cells,
                t.decay_horizon.map_or("unknown".to_string(), |h| h.to_string()),
                t.covers_horizon,
                t.max_tail_gap
            );
            for (k, s) in m.terminal_summary.iter().enumerate() {
                println!("X{k}(T): mean {:.6} ± {:.6}, variance {:.6}", s.mean, s.std_error, s.variance);
            }
            show(&dir, workflow::TRAJECTORIES);
            show(&dir, svie_core::output::MANIFEST);
        }
        Command::Certify => {
            let cfg = load(opts)?;
            let report = workflow::certify(&cfg)?;
            print!("{}", report.render());
            if let Some(dir) = &opts.out {
                workflow::write_certify_report(&cfg, dir, &report)?;
                show(dir, workflow::CERTIFY_REPORT);
            }
        }
        Command::EstimateLaw => {
            let cfg = load(opts)?;
            let dir = out_dir(opts, &cfg);
            let report = workflow::estimate_law(&cfg, Some(&dir), workers(opts)?)?;
            match &report.criteria {
                Ok(r) => print!("{}", r.render()),
                Err(e) => println!("analytic criteria unavailable: {e}"),
            }
            for e in &report.empirical {
                println!("{}", e.render());
            }
            show(&dir, workflow::LAW_SAMPLES);
            show(&dir, workflow::LAW_REPORT);
        }
        Command::OracleCompare => {
            let cfg = load(opts)?;
            let dir = out_dir(opts, &cfg);
            let report = workflow::oracle_compare(&cfg, Some(&dir))?;
            print!("{}", report.render());
            show(&dir, workflow::ORACLE_REPORT);
        }
        Command::Selftest => {
            let w = workers(opts)?;
            let mut all = true;
            for id in 1..=selftest::NAMES.len() {
                let o = selftest::run(id, w);
                println!("{}", o.render());
                all &= o.pass;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
