//! Explicit mild scheme for the lifted equation
//!
//! ```text
//! Y_{n+1} = S_dt (Y_n + dt a(t_n, Y_n) + b(t_n, Y_n) dL_n)
//! ```
//!
//! on a grid with step `dx = dt`, so that `S_dt` is an exact index shift.
//! The boundary `X_n = Y_n(0)` solves the Euler discretisation of the
//! Volterra equation; [`svie_direct`] computes the same sum directly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{add_contribution, CoefficientSet, VolterraKernels};
use crate::error::{Error, Result};
use crate::noise::{standard_normal, LevyModel, NoiseStream};
use crate::space::{eval, shift_in_place, Curve, Grid, GridMetric, HilbertPoint};
use crate::weight::WeightFunction;

pub const DEFAULT_DIVERGENCE_CAP: f64 = 1e12;

/// Kernel envelopes below this level count as decayed when sizing the grid.
pub const TRUNCATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Grid length; derived from the horizon and kernel decay when absent.
    pub x_max: Option<f64>,
    pub divergence_cap: f64,
    pub record_norms: bool,
    /// Times at which the full curve is kept, rounded to the nearest step.
    pub snapshot_times: Vec<f64>,
}

impl SolverConfig {
    pub fn new(horizon: f64, dt: f64) -> Self {
        SolverConfig {
            horizon,
            dt,
            x_max: None,
            divergence_cap: DEFAULT_DIVERGENCE_CAP,
            record_norms: false,
            snapshot_times: Vec::new(),
        }
    }

    pub fn with_x_max(mut self, x_max: f64) -> Self {
        self.x_max = Some(x_max);
        self
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config("horizon", format!("must be positive, got {}", self.horizon)));
        }
        let ratio = self.horizon / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config(
                "horizon",
                format!("{} is not a multiple of dt = {}", self.horizon, self.dt),
            ));
        }
        Ok(steps as usize)
    }
}

/// `Y(0)`: a deterministic curve or a per-path Gaussian constant.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Constant(HilbertPoint),
    Curve(Curve),
    /// Constant curve at `mean + std * Z` with `Z` standard normal per path.
    Gaussian { mean: HilbertPoint, std: f64 },
}

impl InitialCondition {
    pub fn dim(&self) -> usize {
        match self {
            InitialCondition::Constant(u) => u.dim(),
            InitialCondition::Curve(c) => c.dim(),
            InitialCondition::Gaussian { mean, .. } => mean.dim(),
        }
    }

    /// The initial curve on `grid` for one path.
    pub fn realize(&self, grid: Grid, stream: &NoiseStream) -> Result<Curve> {
        match self {
            InitialCondition::Constant(u) => Ok(Curve::constant(grid, u)),
            InitialCondition::Gaussian { mean, std } => {
                let mut rng = stream.aux_rng();
                let u: Vec<f64> = mean.0.iter().map(|m| m + std * standard_normal(&mut rng)).collect();
                Ok(Curve::constant(grid, &HilbertPoint(u)))
            }
            InitialCondition::Curve(c) => {
                if c.grid() == grid {
                    return Ok(c.clone());
                }
                let mut out = Curve::zero(grid, c.dim());
                for j in 0..=grid.cells {
                    let x = grid.node(j).min(c.grid().end());
                    let v = if j == grid.cells { HilbertPoint(c.tail().to_vec()) } else { eval(c, x)? };
                    out.node_mut(j).copy_from_slice(&v.0);
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub n: usize,
    pub dt: f64,
    pub y: Curve,
}

impl SolverState {
    pub fn boundary(&self) -> &[f64] {
        self.y.node(0)
    }
}

/// How the grid was truncated and how much kernel mass was snapped into the tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationDiagnostics {
    pub x_max: f64,
    pub cells: usize,
    pub horizon: f64,
    /// Lag beyond which the envelopes are within the truncation tolerance of their limits.
    pub decay_horizon: Option<f64>,
    /// True when the window reaches past the horizon, so that no kernel
    /// value used by the boundary comes from the tail.
    pub covers_horizon: bool,
    /// Largest difference between a kernel value at the last node and its
    /// declared limit seen on any step of any path.
    pub max_tail_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutput {
    pub path: u64,
    pub dt: f64,
    pub dim: usize,
    /// `X(t_n)` for `n = 0..=steps`, node-major.
    pub x: Vec<f64>,
    pub norms: Option<Vec<f64>>,
    pub snapshots: Vec<(f64, Curve)>,
    pub max_tail_gap: f64,
}

impl PathOutput {
    pub fn steps(&self) -> usize {
        self.x.len() / self.dim - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn at(&self, n: usize) -> &[f64] {
        &self.x[n * self.dim..(n + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.at(self.steps())
    }

    pub fn max_abs_diff(&self, other: &PathOutput) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b).abs())
            .fold(if self.x.len() == other.x.len() { 0.0 } else { f64::INFINITY }, f64::max)
    }
}

/// Per-path outcome of an ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub enum PathResult<T> {
    Done(T),
    Diverged { step: usize, norm: f64 },
}

#[derive(Debug, Clone)]
pub struct Ensemble<T> {
    pub results: Vec<PathResult<T>>,
    pub max_tail_gap: f64,
}

impl<T> Ensemble<T> {
    pub fn diverged(&self) -> usize {
        self.results.iter().filter(|r| matches!(r, PathResult::Diverged { .. })).count()
    }

    pub fn completed(&self) -> impl Iterator<Item = &T> {
        self.results.iter().filter_map(|r| match r {
            PathResult::Done(v) => Some(v),
            PathResult::Diverged { .. } => None,
        })
    }
}

/// Buffers reused across steps of one path.
struct Workspace {
    u: Vec<f64>,
    dl: Vec<f64>,
    mu: Vec<f64>,
    sig: Vec<f64>,
    lim_mu: Vec<f64>,
    lim_sig: Vec<f64>,
}

impl Workspace {
    fn new(d: usize, m: usize) -> Self {
        Workspace {
            u: vec![0.0; d],
            dl: vec![0.0; m],
            mu: vec![0.0; d],
            sig: vec![0.0; d * m],
            lim_mu: vec![0.0; d],
            lim_sig: vec![0.0; d * m],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solver {
    config: SolverConfig,
    coeffs: CoefficientSet,
    model: LevyModel,
    initial: InitialCondition,
    grid: Grid,
    metric: GridMetric,
    steps: usize,
    decay_horizon: Option<f64>,
}

impl Solver {
    pub fn new(
        config: SolverConfig,
        coeffs: CoefficientSet,
        model: LevyModel,
        weight: &WeightFunction,
        initial: InitialCondition,
    ) -> Result<Self> {
        let steps = config.steps()?;
        if model.dim() != coeffs.noise_dim() {
            return Err(Error::config(
                "noise",
                format!("noise dimension {} differs from kernel noise dimension {}", model.dim(), coeffs.noise_dim()),
            ));
        }
        if initial.dim() != coeffs.state_dim() {
            return Err(Error::config(
                "initial",
                format!("initial value has dimension {}, state has {}", initial.dim(), coeffs.state_dim()),
            ));
        }
        if let InitialCondition::Gaussian { std, .. } = initial {
            if !(std.is_finite() && std >= 0.0) {
                return Err(Error::config("initial.std", format!("must be non-negative, got {std}")));
            }
        }
        if !(config.divergence_cap > 0.0) {
            return Err(Error::config("divergence_cap", "must be positive"));
        }
        let dt = config.dt;
        let decay_horizon = coeffs.decay_horizon(TRUNCATION_TOL);
        let x_max = match config.x_max {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                return Err(Error::config("x_max", format!("must be positive, got {x}")))
            }
            Some(x) => x,
            // one extra cell keeps the tail node out of reach of the boundary
            None => config.horizon.min(decay_horizon.unwrap_or(config.horizon)) + dt,
        };
        let grid = Grid::covering(dt, x_max)?;
        let metric = GridMetric::new(weight, grid);
        let k = coeffs.kernels();
        let probe = vec![0.0; coeffs.state_dim()];
        let mut mu = vec![0.0; coeffs.state_dim()];
        let mut sig = vec![0.0; coeffs.state_dim() * coeffs.noise_dim()];
        if !(k.mu_infinity(&probe, &mut mu) && k.sigma_infinity(&probe, &mut sig)) {
            log::warn!("kernel limits at infinity are not declared; the tail takes the last node value");
        }
        Ok(Solver {
            config,
            coeffs,
            model,
            initial,
            grid,
            metric,
            steps,
            decay_horizon,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn noise_model(&self) -> &LevyModel {
        &self.model
    }

    pub fn truncation(&self, max_tail_gap: f64) -> TruncationDiagnostics {
        TruncationDiagnostics {
            x_max: self.grid.end(),
            cells: self.grid.cells,
            horizon: self.config.horizon,
            decay_horizon: self.decay_horizon,
            covers_horizon: self.grid.cells > self.steps,
            max_tail_gap,
        }
    }

    pub fn initial_state(&self, stream: &NoiseStream) -> Result<SolverState> {
        Ok(SolverState {
            t: 0.0,
            n: 0,
            dt: self.config.dt,
            y: self.initial.realize(self.grid, stream)?,
        })
    }

    /// One step of the scheme with the given noise increment. Returns the
    /// tail gap of this step.
    pub fn step(&self, state: &mut SolverState, dl: &[f64]) -> Result<f64> {
        if dl.len() != self.coeffs.noise_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.coeffs.noise_dim(),
                got: dl.len(),
            });
        }
        let mut ws = Workspace::new(self.coeffs.state_dim(), self.coeffs.noise_dim());
        ws.dl.copy_from_slice(dl);
        self.step_with(state, &mut ws)
    }

    fn step_with(&self, state: &mut SolverState, ws: &mut Workspace) -> Result<f64> {
        let k = self.coeffs.kernels();
        let dt = self.config.dt;
        let n = state.n;
        let cells = self.grid.cells;
        let s = n as f64 * dt;
        ws.u.copy_from_slice(state.y.node(0));
        for j in 0..cells {
            let t = (n + j) as f64 * dt;
            add_contribution(k, t, s, &ws.u, dt, &ws.dl, &mut ws.mu, &mut ws.sig, state.y.node_mut(j));
        }
        let gap = self.tail_contribution(k, n, state, ws);
        shift_in_place(&mut state.y, 1);
        state.n += 1;
        state.t = state.n as f64 * dt;
        let norm = self.metric.norm_fast(&state.y);
        if !(norm <= self.config.divergence_cap) {
            return Err(Error::Divergence {
                step: state.n,
                norm,
                cap: self.config.divergence_cap,
            });
        }
        Ok(gap)
    }

    fn tail_contribution(&self, k: &dyn VolterraKernels, n: usize, state: &mut SolverState, ws: &mut Workspace) -> f64 {
        let dt = self.config.dt;
        let cells = self.grid.cells;
        let (t, s) = ((n + cells) as f64 * dt, n as f64 * dt);
        k.mu(t, s, &ws.u, &mut ws.mu);
        k.sigma(t, s, &ws.u, &mut ws.sig);
        let mut gap = 0.0f64;
        if k.mu_infinity(&ws.u, &mut ws.lim_mu) {
            for (a, b) in ws.mu.iter_mut().zip(&ws.lim_mu) {
                gap = gap.max((*a - b).abs());
                *a = *b;
            }
        }
        if k.sigma_infinity(&ws.u, &mut ws.lim_sig) {
            for (a, b) in ws.sig.iter_mut().zip(&ws.lim_sig) {
                gap = gap.max((*a - b).abs());
                *a = *b;
            }
        }
        let m = ws.dl.len();
        for (i, y) in state.y.node_mut(cells).iter_mut().enumerate() {
            let c = dt * ws.mu[i] + crate::space::dot(&ws.sig[i * m..(i + 1) * m], &ws.dl);
            *y += c;
        }
        gap
    }

    fn run_lifted<F: FnMut(&SolverState)>(&self, stream: &NoiseStream, mut observe: F) -> Result<f64> {
        let mut state = self.initial_state(stream)?;
        let mut ws = Workspace::new(self.coeffs.state_dim(), self.coeffs.noise_dim());
        let mut gap = 0.0f64;
        observe(&state);
        for n in 0..self.steps {
            stream.increment_into(&self.model, n as u64, self.config.dt, &mut ws.dl)?;
            gap = gap.max(self.step_with(&mut state, &mut ws)?);
            observe(&state);
        }
        Ok(gap)
    }

    /// Full boundary trajectory of one path.
    pub fn simulate_path(&self, stream: &NoiseStream) -> Result<PathOutput> {
        let d = self.coeffs.state_dim();
        let mut x = Vec::with_capacity((self.steps + 1) * d);
        let mut norms = self.config.record_norms.then(|| Vec::with_capacity(self.steps + 1));
        let snap_steps: Vec<usize> = self
            .config
            .snapshot_times
            .iter()
            .map(|t| ((t / self.config.dt).round().max(0.0) as usize).min(self.steps))
            .collect();
        let mut snapshots = Vec::new();
        let metric = &self.metric;
        let max_tail_gap = self.run_lifted(stream, |st| {
            x.extend_from_slice(st.boundary());
            if let Some(ns) = norms.as_mut() {
                ns.push(metric.norm_fast(&st.y));
            }
            if snap_steps.contains(&st.n) {
                snapshots.push((st.t, st.y.clone()));
            }
        })?;
        Ok(PathOutput {
            path: stream.path,
            dt: self.config.dt,
            dim: d,
            x,
            norms,
            snapshots,
            max_tail_gap,
        })
    }

    /// `X(T)` only, and the tail gap.
    pub fn terminal(&self, stream: &NoiseStream) -> Result<(HilbertPoint, f64)> {
        let mut last = Vec::new();
        let gap = self.run_lifted(stream, |st| {
            if st.n == self.steps {
                last = st.boundary().to_vec();
            }
        })?;
        Ok((HilbertPoint(last), gap))
    }

    /// Largest `|X(t_n)|^2` along the path.
    pub fn max_boundary_square(&self, stream: &NoiseStream) -> Result<f64> {
        let mut best = 0.0f64;
        self.run_lifted(stream, |st| {
            best = best.max(st.boundary().iter().map(|v| v * v).sum());
        })?;
        Ok(best)
    }

    /// Direct Euler sum `X_n = x0(t_n) + sum_{k<n} [mu(t_n, t_k, X_k) dt + sigma(t_n, t_k, X_k) dL_k]`.
    /// Quadratic in the number of steps.
    pub fn svie_direct(&self, stream: &NoiseStream) -> Result<PathOutput> {
        let (d, m) = (self.coeffs.state_dim(), self.coeffs.noise_dim());
        let k = self.coeffs.kernels();
        let dt = self.config.dt;
        let x0 = self.initial.realize(self.grid, stream)?;
        let mut dls = vec![0.0; self.steps * m];
        for n in 0..self.steps {
            stream.increment_into(&self.model, n as u64, dt, &mut dls[n * m..(n + 1) * m])?;
        }
        let mut x = vec![0.0; (self.steps + 1) * d];
        let (mut mu, mut sig) = (vec![0.0; d], vec![0.0; d * m]);
        let mut acc = vec![0.0; d];
        for n in 0..=self.steps {
            acc.copy_from_slice(x0.node(n.min(self.grid.cells)));
            let t = n as f64 * dt;
            for kk in 0..n {
                let s = kk as f64 * dt;
                let (head, _) = x.split_at(n * d);
                let u = &head[kk * d..(kk + 1) * d];
                add_contribution(k, t, s, u, dt, &dls[kk * m..(kk + 1) * m], &mut mu, &mut sig, &mut acc);
            }
            let sq: f64 = acc.iter().map(|v| v * v).sum();
            if !(sq.sqrt() <= self.config.divergence_cap) {
                return Err(Error::Divergence {
                    step: n,
                    norm: sq.sqrt(),
                    cap: self.config.divergence_cap,
                });
            }
            x[n * d..(n + 1) * d].copy_from_slice(&acc);
        }
        Ok(PathOutput {
            path: stream.path,
            dt,
            dim: d,
            x,
            norms: None,
            snapshots: Vec::new(),
            max_tail_gap: 0.0,
        })
    }

    fn in_pool<T: Send, F: FnOnce() -> T + Send>(workers: usize, f: F) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(f))
    }

    fn run_many<T, F>(&self, seed: u64, paths: std::ops::Range<u64>, workers: usize, f: F) -> Result<Ensemble<T>>
    where
        T: Send,
        F: Fn(&NoiseStream) -> Result<(T, f64)> + Sync,
    {
        let outcomes: Vec<Result<(PathResult<T>, f64)>> = Self::in_pool(workers, || {
            paths
                .into_par_iter()
                .map(|p| match f(&NoiseStream::new(seed, p)) {
                    Ok((v, gap)) => Ok((PathResult::Done(v), gap)),
                    Err(Error::Divergence { step, norm, .. }) => Ok((PathResult::Diverged { step, norm }, 0.0)),
                    Err(e) => Err(e),
                })
                .collect()
        })?;
        let mut results = Vec::with_capacity(outcomes.len());
        let mut max_tail_gap = 0.0f64;
        for o in outcomes {
            let (r, gap) = o?;
            max_tail_gap = max_tail_gap.max(gap);
            results.push(r);
        }
        Ok(Ensemble { results, max_tail_gap })
    }

    /// Full trajectories for paths `paths`; results are in path order for any worker count.
    pub fn run_paths(&self, seed: u64, paths: std::ops::Range<u64>, workers: usize) -> Result<Ensemble<PathOutput>> {
        self.run_many(seed, paths, workers, |s| {
            let out = self.simulate_path(s)?;
            let gap = out.max_tail_gap;
            Ok((out, gap))
        })
    }

    /// Terminal values `X(T)` for paths `paths`.
    pub fn run_terminal(&self, seed: u64, paths: std::ops::Range<u64>, workers: usize) -> Result<Ensemble<HilbertPoint>> {
        self.run_many(seed, paths, workers, |s| self.terminal(s))
    }

    /// `max_n |X(t_n)|^2` for paths `paths`.
    pub fn run_max_square(&self, seed: u64, paths: std::ops::Range<u64>, workers: usize) -> Result<Ensemble<f64>> {
        self.run_many(seed, paths, workers, |s| Ok((self.max_boundary_square(s)?, 0.0)))
    }
}

/// Everything needed to build a [`Solver`] except the horizon.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub coeffs: CoefficientSet,
    pub model: LevyModel,
    pub weight: WeightFunction,
    pub initial: InitialCondition,
    pub dt: f64,
    pub x_max: Option<f64>,
    pub divergence_cap: f64,
}

impl Scenario {
    pub fn new(coeffs: CoefficientSet, model: LevyModel, weight: WeightFunction, initial: InitialCondition, dt: f64) -> Self {
        Scenario {
            coeffs,
            model,
            weight,
            initial,
            dt,
            x_max: None,
            divergence_cap: DEFAULT_DIVERGENCE_CAP,
        }
    }

    pub fn with_initial(&self, initial: InitialCondition) -> Scenario {
        Scenario {
            initial,
            ..self.clone()
        }
    }

    pub fn solver(&self, horizon: f64) -> Result<Solver> {
        let mut cfg = SolverConfig::new(horizon, self.dt);
        cfg.x_max = self.x_max;
        cfg.divergence_cap = self.divergence_cap;
        Solver::new(cfg, self.coeffs.clone(), self.model.clone(), &self.weight, self.initial.clone())
    }
}

/// Deterministic solution of `X(t) = x0 + int_0^t mu(t, s, X(s)) ds` on a
/// uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    pub dt: f64,
    pub dim: usize,
    pub x: Vec<f64>,
    pub iterations: usize,
}

impl PicardSolution {
    pub fn at(&self, n: usize) -> &[f64] {
        &self.x[n * self.dim..(n + 1) * self.dim]
    }

    /// Value at `t`, linear between grid points.
    pub fn value(&self, t: f64) -> Vec<f64> {
        let r = t / self.dt;
        let last = self.x.len() / self.dim - 1;
        let n = (r.floor() as usize).min(last);
        if n == last {
            return self.at(last).to_vec();
        }
        let th = r - n as f64;
        self.at(n).iter().zip(self.at(n + 1)).map(|(a, b)| a + th * (b - a)).collect()
    }
}

pub const PICARD_TOL: f64 = 1e-12;
pub const PICARD_MAX_ITER: usize = 200;

/// Fixed-point iteration with trapezoid quadrature. Requires `sigma = 0`.
pub fn picard_oracle(coeffs: &CoefficientSet, x0: &HilbertPoint, horizon: f64, fine_dt: f64) -> Result<PicardSolution> {
    let d = coeffs.state_dim();
    if x0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.dim() });
    }
    let cfg = SolverConfig::new(horizon, fine_dt);
    let steps = cfg.steps()?;
    let k = coeffs.kernels();
    let mut sig = vec![0.0; d * coeffs.noise_dim()];
    for &(t, s) in &[(0.0, 0.0), (horizon, 0.0), (horizon, 0.5 * horizon)] {
        k.sigma(t, s, &x0.0, &mut sig);
        if sig.iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidArgument("deterministic oracle requires sigma = 0".into()));
        }
    }
    let mut cur: Vec<f64> = (0..=steps).flat_map(|_| x0.0.iter().copied()).collect();
    let mut next = cur.clone();
    let mut mu = vec![0.0; d];
    let mut change = f64::INFINITY;
    for it in 1..=PICARD_MAX_ITER {
        for n in 1..=steps {
            let t = n as f64 * fine_dt;
            let acc = &mut next[n * d..(n + 1) * d];
            acc.copy_from_slice(&x0.0);
            for kk in 0..=n {
                let wgt = if kk == 0 || kk == n { 0.5 * fine_dt } else { fine_dt };
                k.mu(t, kk as f64 * fine_dt, &cur[kk * d..(kk + 1) * d], &mut mu);
                acc.iter_mut().zip(&mu).for_each(|(a, m)| *a += wgt * m);
            }
        }
        change = cur.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !change.is_finite() {
            break;
        }
        std::mem::swap(&mut cur, &mut next);
        if change < PICARD_TOL {
            return Ok(PicardSolution {
                dt: fine_dt,
                dim: d,
                x: cur,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: PICARD_MAX_ITER,
        change,
    })
}

/// Least-squares slope of `log err` against `log dt`.
pub fn fitted_order(dts: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Row of a deterministic convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub sup_error: f64,
}

/// Sup-error of the lifted scheme against a reference trajectory for each `dt`.
pub fn deterministic_convergence(
    coeffs: &CoefficientSet,
    weight: &WeightFunction,
    x0: &HilbertPoint,
    horizon: f64,
    dts: &[f64],
    reference: &PicardSolution,
) -> Result<Vec<ConvergenceRow>> {
    let model = LevyModel::new(vec![0.0; coeffs.noise_dim()], None)?;
    dts.iter()
        .map(|&dt| {
            let solver = Solver::new(
                SolverConfig::new(horizon, dt),
                coeffs.clone(),
                model.clone(),
                weight,
                InitialCondition::Constant(x0.clone()),
            )?;
            let path = solver.simulate_path(&NoiseStream::new(0, 0))?;
            let mut err = 0.0f64;
            for n in 0..=path.steps() {
                let r = reference.value(path.time(n));
                for (a, b) in path.at(n).iter().zip(&r) {
                    err = err.max((a - b).abs());
                }
            }
            Ok(ConvergenceRow { dt, sup_error: err })
        })
        .collect()
}
