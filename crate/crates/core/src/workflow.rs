//! The end-to-end runs behind the command-line subcommands.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coefficients::{certify as certify_coefficients, LipschitzReport};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::invariance::{self, summarize, LawComparison, MAX_DIVERGED_FRACTION};
use crate::output::{self, FileEntry, Manifest};
use crate::solver::{
    deterministic_convergence, fitted_order, picard_oracle, ConvergenceRow, InitialCondition, PathResult,
    SolverConfig, Solver,
};
use crate::space::HilbertPoint;

pub const TRAJECTORIES: &str = "trajectories.csv";
pub const LAW_SAMPLES: &str = "law_samples.csv";
pub const LAW_REPORT: &str = "law_report.json";
pub const CERTIFY_REPORT: &str = "certify_report.json";
pub const ORACLE_REPORT: &str = "oracle_report.json";

/// Paths simulated and written per batch.
const BATCH: u64 = 256;

fn prepare_dir(dir: &Path, hash: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    output::check_replay(dir, hash)
}

/// Simulates `cfg.paths` paths into `dir/trajectories.csv` and writes the manifest.
pub fn simulate(cfg: &ScenarioConfig, dir: &Path, workers: usize) -> Result<Manifest> {
    let hash = cfg.hash();
    prepare_dir(dir, &hash)?;
    let scenario = cfg.scenario()?;
    let solver = scenario.solver(cfg.horizon)?;
    let d = cfg.dim;
    let mut w = BufWriter::new(fs::File::create(dir.join(TRAJECTORIES))?);
    output::write_csv_header(&mut w, &hash, cfg.seed, d)?;
    let mut terminal = Vec::with_capacity(cfg.paths);
    let mut diverged_paths = Vec::new();
    let mut max_gap = 0.0f64;
    let total = cfg.paths as u64;
    let mut start = 0;
    while start < total {
        let end = (start + BATCH).min(total);
        let ens = solver.run_paths(cfg.seed, start..end, workers)?;
        max_gap = max_gap.max(ens.max_tail_gap);
        for (p, r) in (start..end).zip(&ens.results) {
            match r {
                PathResult::Done(out) => {
                    output::write_path_rows(&mut w, out, cfg.output.every)?;
                    terminal.push(HilbertPoint(out.terminal().to_vec()));
                }
                PathResult::Diverged { step, norm } => {
                    log::warn!("path {p} diverged at step {step} (norm {norm:e})");
                    diverged_paths.push(p);
                }
            }
        }
        start = end;
    }
    w.flush()?;
    drop(w);
    let manifest = Manifest {
        tool: "svie".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "simulate".into(),
        config_hash: hash,
        seed: cfg.seed,
        paths: cfg.paths,
        horizon: cfg.horizon,
        dt: cfg.dt,
        steps: solver.steps(),
        truncation: solver.truncation(max_gap),
        diverged: diverged_paths.len(),
        diverged_paths,
        terminal_summary: summarize(&terminal),
        files: vec![FileEntry::of(dir, TRAJECTORIES)?],
    };
    output::write_json(&dir.join(output::MANIFEST), &manifest)?;
    if manifest.diverged as f64 > MAX_DIVERGED_FRACTION * cfg.paths as f64 {
        return Err(Error::TooManyDiverged {
            diverged: manifest.diverged,
            total: cfg.paths,
        });
    }
    Ok(manifest)
}

pub fn certify(cfg: &ScenarioConfig) -> Result<LipschitzReport> {
    certify_coefficients(&cfg.coefficients()?, &cfg.weight()?, cfg.certify.beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub config_hash: String,
    pub report: LipschitzReport,
}

/// Writes `dir/certify_report.json`.
pub fn write_certify_report(cfg: &ScenarioConfig, dir: &Path, report: &LipschitzReport) -> Result<()> {
    let hash = cfg.hash();
    prepare_dir(dir, &hash)?;
    output::write_json(
        &dir.join(CERTIFY_REPORT),
        &CertifyReport {
            config_hash: hash,
            report: report.clone(),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCheck {
    pub name: String,
    pub horizons: (f64, f64),
    pub initial_values: Option<[Vec<f64>; 2]>,
    pub paths: usize,
    pub energy_distance: f64,
    pub p_value: f64,
    pub ks_statistics: Vec<f64>,
    pub pass: bool,
    pub means: (Vec<f64>, Vec<f64>),
    pub variances: (Vec<f64>, Vec<f64>),
}

impl EmpiricalCheck {
    fn from(name: &str, cmp: &LawComparison, init: Option<[Vec<f64>; 2]>) -> EmpiricalCheck {
        let pick = |f: fn(&invariance::CoordinateSummary) -> f64, l: &invariance::LawEstimate| {
            l.summary.iter().map(f).collect::<Vec<_>>()
        };
        EmpiricalCheck {
            name: name.into(),
            horizons: (cmp.first.horizon, cmp.second.horizon),
            initial_values: init,
            paths: cmp.first.requested,
            energy_distance: cmp.verdict.energy_distance,
            p_value: cmp.verdict.p_value,
            ks_statistics: cmp.verdict.ks.iter().map(|k| k.statistic).collect(),
            pass: cmp.verdict.pass,
            means: (pick(|s| s.mean, &cmp.first), pick(|s| s.mean, &cmp.second)),
            variances: (pick(|s| s.variance, &cmp.first), pick(|s| s.variance, &cmp.second)),
        }
    }

    pub fn render(&self) -> String {
        let what = match &self.initial_values {
            Some([a, b]) => format!("x0 = {a:?} vs {b:?} at T = {}", self.horizons.0),
            None => format!("T = {} vs {}", self.horizons.0, self.horizons.1),
        };
        format!(
            "{} ({what}, N = {}): energy = {:.3e}, p = {:.3} -> {}",
            self.name,
            self.paths,
            self.energy_distance,
            self.p_value,
            if self.pass { "no detectable difference" } else { "difference detected" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub config_hash: String,
    pub seed: u64,
    pub paths: usize,
    pub dt: f64,
    /// Analytic criteria, or the reason they could not be evaluated.
    pub criteria: std::result::Result<LipschitzReport, String>,
    pub empirical: Vec<EmpiricalCheck>,
}

/// Two-horizon test plus the optional initial-value probe.
pub fn estimate_law(cfg: &ScenarioConfig, dir: Option<&Path>, workers: usize) -> Result<LawReport> {
    let hash = cfg.hash();
    if let Some(d) = dir {
        prepare_dir(d, &hash)?;
    }
    let scenario = cfg.scenario()?;
    let (t1, t2) = cfg.law_horizons();
    let n = cfg.paths;
    let two = invariance::test_convergence(&scenario, t1, t2, n, cfg.seed, workers)?;
    let mut empirical = vec![EmpiricalCheck::from("two-horizon test", &two, None)];
    if let Some([a, b]) = &cfg.law.probe {
        let probe = invariance::initial_dependence_probe(
            &scenario,
            &HilbertPoint(a.clone()),
            &HilbertPoint(b.clone()),
            t2,
            n,
            cfg.seed,
            workers,
        )?;
        empirical.push(EmpiricalCheck::from(
            "initial-value probe",
            &probe,
            Some([a.clone(), b.clone()]),
        ));
    }
    let report = LawReport {
        config_hash: hash.clone(),
        seed: cfg.seed,
        paths: n,
        dt: cfg.dt,
        criteria: certify(cfg).map_err(|e| e.to_string()),
        empirical,
    };
    if let Some(d) = dir {
        let mut w = BufWriter::new(fs::File::create(d.join(LAW_SAMPLES))?);
        output::write_csv_header(&mut w, &hash, cfg.seed, cfg.dim)?;
        for law in [&two.first, &two.second] {
            for (k, x) in law.sample.iter().enumerate() {
                output::write_point_row(&mut w, law.first_path + k as u64, law.horizon, &x.0)?;
            }
        }
        w.flush()?;
        drop(w);
        output::write_json(&d.join(LAW_REPORT), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub config_hash: String,
    pub seed: u64,
    pub steps: usize,
    pub paths: usize,
    /// Largest `|X_lifted - X_direct|` over all steps and paths.
    pub lifted_vs_direct: f64,
    pub picard_iterations: usize,
    pub convergence: Vec<ConvergenceRow>,
    pub fitted_order: f64,
}

impl OracleReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "lifted vs direct ({} paths, {} steps): max deviation {:.3e}\n",
            self.paths, self.steps, self.lifted_vs_direct
        );
        s.push_str("drift-only convergence against the Picard reference:\n");
        s.push_str("  dt          sup error\n");
        for r in &self.convergence {
            s.push_str(&format!("  {:<10.3e}  {:.3e}\n", r.dt, r.sup_error));
        }
        s.push_str(&format!("  fitted order {:.3}\n", self.fitted_order));
        s
    }
}

fn initial_point(init: &InitialCondition) -> HilbertPoint {
    match init {
        InitialCondition::Constant(u) => u.clone(),
        InitialCondition::Gaussian { mean, .. } => mean.clone(),
        InitialCondition::Curve(c) => HilbertPoint(c.node(0).to_vec()),
    }
}

/// Lifted scheme against the direct Volterra sum, and the drift-only
/// scheme against the Picard reference.
pub fn oracle_compare(cfg: &ScenarioConfig, dir: Option<&Path>) -> Result<OracleReport> {
    let hash = cfg.hash();
    if let Some(d) = dir {
        prepare_dir(d, &hash)?;
    }
    let scenario = cfg.scenario()?;
    let o = &cfg.oracle;
    let horizon = o.steps as f64 * cfg.dt;
    let mut sc = SolverConfig::new(horizon, cfg.dt).with_x_max(horizon + cfg.dt);
    sc.divergence_cap = cfg.divergence_cap;
    let solver = Solver::new(
        sc,
        scenario.coeffs.clone(),
        scenario.model.clone(),
        &scenario.weight,
        scenario.initial.clone(),
    )?;
    let devs: Vec<Result<f64>> = (0..o.paths as u64)
        .map(|p| {
            let s = crate::noise::NoiseStream::new(cfg.seed, p);
            Ok(solver.simulate_path(&s)?.max_abs_diff(&solver.svie_direct(&s)?))
        })
        .collect();
    let mut worst = 0.0f64;
    for d in devs {
        worst = worst.max(d?);
    }
    let drift = cfg.drift_only()?;
    let x0 = initial_point(&scenario.initial);
    let reference = picard_oracle(&drift, &x0, o.horizon, o.fine_dt)?;
    let convergence = deterministic_convergence(&drift, &scenario.weight, &x0, o.horizon, &o.dts, &reference)?;
    let (dts, errs): (Vec<f64>, Vec<f64>) = convergence.iter().map(|r| (r.dt, r.sup_error)).unzip();
    let order = if errs.iter().all(|e| *e > 0.0) { fitted_order(&dts, &errs) } else { f64::NAN };
    let report = OracleReport {
        config_hash: hash,
        seed: cfg.seed,
        steps: o.steps,
        paths: o.paths,
        lifted_vs_direct: worst,
        picard_iterations: reference.iterations,
        convergence,
        fitted_order: order,
    };
    if let Some(d) = dir {
        output::write_json(&d.join(ORACLE_REPORT), &report)?;
    }
    Ok(report)
}
