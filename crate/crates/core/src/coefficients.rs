//! Volterra kernels `mu(t, s, u)`, `sigma(t, s, u)`, their lifts to curve
//! space and envelope-based Lipschitz certification.
//!
//! The lifts are
//!
//! ```text
//! a(t, h) = x -> mu(t + x, t, h(0))
//! b(t, h) = x -> sigma(t + x, t, h(0))
//! ```
//!
//! so both depend on the curve only through its value at the origin.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::space::{dot, Curve, CurveOperator, Grid, GridMetric, HilbertPoint};
use crate::weight::{AlphaW, WeightFunction};

/// Kernel pair of a stochastic Volterra equation on `R^d` driven by noise in `R^m`.
///
/// `sigma` writes a `d x m` matrix in row-major order.
pub trait VolterraKernels: Send + Sync {
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn mu(&self, t: f64, s: f64, u: &[f64], out: &mut [f64]);
    fn sigma(&self, t: f64, s: f64, u: &[f64], out: &mut [f64]);

    /// `lim_{t -> inf} mu(t, 0, u)`, when known.
    fn mu_infinity(&self, _u: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// `lim_{t -> inf} sigma(t, 0, u)`, when known.
    fn sigma_infinity(&self, _u: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Kernels depend on `t - s` only.
    fn is_homogeneous(&self) -> bool {
        false
    }

    /// Drift affine in `u` with a lag-independent limit, which makes the
    /// dissipativity inequality checkable on sampled pairs.
    fn has_affine_drift(&self) -> bool {
        false
    }

    /// `(||a(t, 0)||_w, ||b(t, 0)||_op)` in closed form, when known.
    fn growth_norms(&self, _w: &WeightFunction) -> Option<(f64, f64)> {
        None
    }

    fn describe(&self) -> String;
}

/// Scalar envelope `l` in `H_w(R)` bounding a kernel's Lipschitz behaviour:
/// `|k(0, u1) - k(0, u2)| <= l(0) |u1 - u2|` and
/// `|k'(x, u1) - k'(x, u2)| <= |l'(x)| |u1 - u2|`.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Zero,
    Constant { c: f64 },
    /// `c exp(-rate x)`
    Exponential { c: f64, rate: f64 },
    /// `c (1 + x)^(-p)`
    Power { c: f64, p: f64 },
    /// Sampled curve; norms are those of its piecewise-linear interpolant.
    Sampled(Curve),
}

impl Envelope {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Envelope::Zero => 0.0,
            Envelope::Constant { c } => *c,
            Envelope::Exponential { c, rate } => c * (-rate * x).exp(),
            Envelope::Power { c, p } => c * (1.0 + x).powf(-p),
            Envelope::Sampled(curve) => crate::space::eval(curve, x).map(|v| v[0]).unwrap_or(f64::NAN),
        }
    }

    pub fn at_infinity(&self) -> f64 {
        match self {
            Envelope::Constant { c } => *c,
            Envelope::Sampled(curve) => curve.tail()[0],
            _ => 0.0,
        }
    }

    pub fn scaled(&self, k: f64) -> Envelope {
        match self {
            Envelope::Zero => Envelope::Zero,
            Envelope::Constant { c } => Envelope::Constant { c: k * c },
            Envelope::Exponential { c, rate } => Envelope::Exponential { c: k * c, rate: *rate },
            Envelope::Power { c, p } => Envelope::Power { c: k * c, p: *p },
            Envelope::Sampled(curve) => Envelope::Sampled(curve.scaled(k)),
        }
    }

    /// `int_0^inf w(x) l'(x)^2 dx`; infinite when the envelope is not in `H_w`.
    pub fn derivative_energy(&self, w: &WeightFunction) -> f64 {
        match self {
            Envelope::Zero | Envelope::Constant { .. } => 0.0,
            Envelope::Exponential { c, rate } => {
                if *c == 0.0 || *rate == 0.0 {
                    return 0.0;
                }
                let alpha = w.alpha_w().value;
                // w grows at least like exp(alpha x); an exponential weight is
                // integrable against exp(-2 rate x) iff 2 rate > rho.
                if let Some(rho) = w.exponential_rate() {
                    if 2.0 * rate <= rho {
                        return f64::INFINITY;
                    }
                    return c * c * rate * rate / (2.0 * rate - rho);
                }
                if 2.0 * rate <= alpha {
                    return f64::INFINITY;
                }
                let f = |x: f64| {
                    let d = c * rate * (-rate * x).exp();
                    d * d * w.eval(x)
                };
                quadrature::integrate_half_line(&f, 1e-14)
            }
            Envelope::Power { c, p } => {
                if *c == 0.0 {
                    return 0.0;
                }
                if w.alpha_w().value > 0.0 {
                    return f64::INFINITY;
                }
                if let Some(q) = w.polynomial_exponent() {
                    let r = 2.0 * p + 1.0 - q;
                    if r <= 0.0 {
                        return f64::INFINITY;
                    }
                    return c * c * p * p / r;
                }
                let f = |x: f64| {
                    let d = c * p * (1.0 + x).powf(-p - 1.0);
                    d * d * w.eval(x)
                };
                quadrature::integrate_half_line(&f, 1e-14)
            }
            Envelope::Sampled(curve) => {
                let metric = GridMetric::new(w, curve.grid());
                metric
                    .derivative_inner(curve, curve)
                    .unwrap_or(f64::INFINITY)
            }
        }
    }

    /// `||l||_w`.
    pub fn norm_w(&self, w: &WeightFunction) -> f64 {
        (self.value(0.0).powi(2) + self.derivative_energy(w)).sqrt()
    }

    /// `||l||_{w,inf}`.
    pub fn norm_w_infinity(&self, w: &WeightFunction) -> f64 {
        (self.at_infinity().powi(2) + self.derivative_energy(w)).sqrt()
    }

    /// `(int w l'^2)^(1/2)`.
    pub fn seminorm(&self, w: &WeightFunction) -> f64 {
        self.derivative_energy(w).sqrt()
    }

    /// Smallest `x` beyond which `|l - l(inf)| <= tol`.
    pub fn decay_horizon(&self, tol: f64) -> f64 {
        match self {
            Envelope::Zero | Envelope::Constant { .. } => 0.0,
            Envelope::Exponential { c, rate } => {
                if c.abs() <= tol {
                    0.0
                } else {
                    (c.abs() / tol).ln() / rate
                }
            }
            Envelope::Power { c, p } => {
                if c.abs() <= tol {
                    0.0
                } else {
                    (c.abs() / tol).powf(1.0 / p) - 1.0
                }
            }
            Envelope::Sampled(curve) => {
                let tail = curve.tail()[0];
                (0..=curve.cells())
                    .rev()
                    .find(|&j| (curve.node(j)[0] - tail).abs() > tol)
                    .map_or(0.0, |j| curve.grid().node(j + 1))
            }
        }
    }
}

/// Lipschitz envelopes for the drift and diffusion kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelopes {
    pub drift: Envelope,
    pub diffusion: Envelope,
}

/// Kernels plus optional certification data.
#[derive(Clone)]
pub struct CoefficientSet {
    kernels: Arc<dyn VolterraKernels>,
    envelopes: Option<Envelopes>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("kernels", &self.kernels.describe())
            .field("envelopes", &self.envelopes)
            .finish()
    }
}

impl CoefficientSet {
    pub fn new(kernels: Arc<dyn VolterraKernels>, envelopes: Option<Envelopes>) -> Self {
        CoefficientSet { kernels, envelopes }
    }

    /// Ornstein–Uhlenbeck kernels `mu = lambda (theta - u)`, `sigma = sigma I`.
    pub fn ornstein_uhlenbeck(lambda: f64, theta: f64, sigma: f64, dim: usize, noise_dim: usize) -> Self {
        let k = OuKernels {
            lambda,
            theta,
            sigma,
            dim,
            noise_dim,
        };
        let envelopes = Envelopes {
            drift: Envelope::Constant { c: lambda.abs() },
            diffusion: Envelope::Zero,
        };
        CoefficientSet::new(Arc::new(k), Some(envelopes))
    }

    /// `mu = c_drift e^{-rate (t-s)} u`, `sigma = c_diffusion e^{-rate (t-s)} u e_1^T`.
    pub fn exponential(c_drift: f64, c_diffusion: f64, rate: f64, dim: usize, noise_dim: usize) -> Self {
        let k = DecayKernels {
            c_drift,
            c_diffusion,
            profile: DecayProfile::Exponential { rate },
            dim,
            noise_dim,
        };
        let envelopes = Envelopes {
            drift: Envelope::Exponential { c: c_drift.abs(), rate },
            diffusion: Envelope::Exponential { c: c_diffusion.abs(), rate },
        };
        CoefficientSet::new(Arc::new(k), Some(envelopes))
    }

    /// `mu = c_drift (1 + t - s)^{-p} u`, `sigma = c_diffusion (1 + t - s)^{-p} u e_1^T`.
    pub fn power_law(c_drift: f64, c_diffusion: f64, p: f64, dim: usize, noise_dim: usize) -> Self {
        let k = DecayKernels {
            c_drift,
            c_diffusion,
            profile: DecayProfile::Power { p },
            dim,
            noise_dim,
        };
        let envelopes = Envelopes {
            drift: Envelope::Power { c: c_drift.abs(), p },
            diffusion: Envelope::Power { c: c_diffusion.abs(), p },
        };
        CoefficientSet::new(Arc::new(k), Some(envelopes))
    }

    /// Kernels given as closures, for library use.
    pub fn from_fns<M, S>(dim: usize, noise_dim: usize, homogeneous: bool, mu: M, sigma: S) -> Self
    where
        M: Fn(f64, f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        S: Fn(f64, f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let k = ClosureKernels {
            dim,
            noise_dim,
            homogeneous,
            mu: Box::new(mu),
            sigma: Box::new(sigma),
        };
        CoefficientSet::new(Arc::new(k), None)
    }

    pub fn with_envelopes(mut self, envelopes: Envelopes) -> Self {
        self.envelopes = Some(envelopes);
        self
    }

    pub fn kernels_arc(&self) -> Arc<dyn VolterraKernels> {
        Arc::clone(&self.kernels)
    }

    pub fn kernels(&self) -> &dyn VolterraKernels {
        self.kernels.as_ref()
    }

    pub fn envelopes(&self) -> Option<&Envelopes> {
        self.envelopes.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.kernels.state_dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.kernels.noise_dim()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.kernels.is_homogeneous()
    }

    pub fn describe(&self) -> String {
        self.kernels.describe()
    }

    /// Lag beyond which both envelopes are within `tol` of their limits.
    pub fn decay_horizon(&self, tol: f64) -> Option<f64> {
        self.envelopes
            .as_ref()
            .map(|e| e.drift.decay_horizon(tol).max(e.diffusion.decay_horizon(tol)))
    }

    /// Whether `mu(inf, u) = sigma(inf, u) = 0` is declared, checked on a
    /// few sample points together with the kernels at a large lag.
    pub fn vanishes_at_infinity(&self) -> bool {
        let (d, m) = (self.state_dim(), self.noise_dim());
        let mut mu = vec![0.0; d];
        let mut sig = vec![0.0; d * m];
        let probes = [1.0, -2.5, 10.0];
        probes.iter().all(|&c| {
            let u = vec![c; d];
            let declared = self.kernels.mu_infinity(&u, &mut mu)
                && mu.iter().all(|v| *v == 0.0)
                && self.kernels.sigma_infinity(&u, &mut sig)
                && sig.iter().all(|v| *v == 0.0);
            if !declared {
                return false;
            }
            let scale = 1e-6 * (1.0 + c.abs());
            self.kernels.mu(1e4, 0.0, &u, &mut mu);
            self.kernels.sigma(1e4, 0.0, &u, &mut sig);
            mu.iter().chain(&sig).all(|v| v.abs() <= scale)
        })
    }
}

/// `mu(t, s, u)` at every node `t + x_j` into `out`, with the tail from
/// `mu_infinity` when declared. Returns the gap between the last sampled
/// node and the declared limit.
fn lift_a_into(kernels: &dyn VolterraKernels, t: f64, u: &[f64], out: &mut Curve) -> Result<f64> {
    let grid = out.grid();
    for j in 0..grid.cells {
        let x = grid.node(j);
        kernels.mu(t + x, t, u, out.node_mut(j));
    }
    let last = grid.cells;
    kernels.mu(t + grid.node(last), t, u, out.node_mut(last));
    let mut gap = 0.0;
    let mut limit = vec![0.0; u.len()];
    if kernels.mu_infinity(u, &mut limit) {
        let node = out.node_mut(last);
        gap = node
            .iter()
            .zip(&limit)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        node.copy_from_slice(&limit);
    }
    if !out.is_finite() {
        return Err(Error::NonFiniteKernel { t: t + grid.end(), s: t });
    }
    Ok(gap)
}

/// `a(t, h)`: the curve `x -> mu(t + x, t, h(0))` on the grid of `h`.
pub fn lift_a(coeffs: &CoefficientSet, t: f64, h: &Curve) -> Result<Curve> {
    let mut out = Curve::zero(h.grid(), coeffs.state_dim());
    lift_a_into(coeffs.kernels(), t, h.node(0), &mut out)?;
    Ok(out)
}

/// `b(t, h)`: per-node matrices `sigma(t + x_j, t, h(0))`.
pub fn lift_b(coeffs: &CoefficientSet, t: f64, h: &Curve) -> Result<CurveOperator> {
    let grid = h.grid();
    let (d, m) = (coeffs.state_dim(), coeffs.noise_dim());
    let u = h.node(0);
    let k = coeffs.kernels();
    let mut out = CurveOperator::zero(grid, d, m);
    for j in 0..=grid.cells {
        k.sigma(t + grid.node(j), t, u, out.matrix_mut(j));
    }
    let mut limit = vec![0.0; d * m];
    if k.sigma_infinity(u, &mut limit) {
        out.matrix_mut(grid.cells).copy_from_slice(&limit);
    }
    for j in 0..=grid.cells {
        if out.matrix(j).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteKernel {
                t: t + grid.node(j),
                s: t,
            });
        }
    }
    Ok(out)
}

/// Adds `dt * mu(t, s, u) + sigma(t, s, u) dl` to `acc`. Shared by the lifted
/// and the direct scheme so both accumulate identical increments.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn add_contribution(
    kernels: &dyn VolterraKernels,
    t: f64,
    s: f64,
    u: &[f64],
    dt: f64,
    dl: &[f64],
    mu_buf: &mut [f64],
    sig_buf: &mut [f64],
    acc: &mut [f64],
) {
    kernels.mu(t, s, u, mu_buf);
    kernels.sigma(t, s, u, sig_buf);
    let m = dl.len();
    for (i, a) in acc.iter_mut().enumerate() {
        let c = dt * mu_buf[i] + dot(&sig_buf[i * m..(i + 1) * m], dl);
        *a += c;
    }
}

/// Outcome of one analytic criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("PASS"),
            Verdict::Fail => f.write_str("FAIL"),
            Verdict::NotApplicable(r) => write!(f, "NOT APPLICABLE ({r})"),
        }
    }
}

/// How the dissipativity constant of the drift at infinity was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipativityCheck {
    /// Verified on sampled pairs of constant curves.
    Verified,
    /// Sampled pairs violate the inequality.
    Violated,
    /// Cannot be checked from the kernels; taken as given.
    UserAsserted,
}

/// Lipschitz and growth constants at the norm level together with the
/// squared values as they arise from the envelope bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub l_a: f64,
    pub l_b: f64,
    pub k_a: f64,
    pub k_b: f64,
    pub l_a_squared: f64,
    pub l_b_squared: f64,
}

/// A stability criterion `lhs < rhs` with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    /// Left-hand side in terms of the constants, e.g. `L_b^2 + 2 L_a`.
    pub lhs_label: String,
    /// Right-hand side as printed, e.g. `1 = α_w`.
    pub rhs_text: String,
    pub l_a: f64,
    pub l_b: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: Verdict,
    pub conclusion: String,
    pub notes: Vec<String>,
}

impl Criterion {
    pub fn render(&self) -> String {
        let mut s = format!(
            "{}: {} = {} < {}: {}",
            self.name,
            self.lhs_label,
            fmt_exact(self.lhs),
            self.rhs_text,
            self.verdict
        );
        if self.verdict == Verdict::Pass {
            s.push_str(&format!(" -> {}", self.conclusion));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub weight: String,
    pub alpha_w: AlphaW,
    pub inv_integral_total: f64,
    /// `||delta_0||` under `||.||_w`.
    pub delta0_norm: f64,
    /// `||delta_0||` under `||.||_{w,inf}` on all curves.
    pub delta0_norm_inf: f64,
    /// `||delta_0||` under `||.||_{w,inf}` on tail-zero curves.
    pub delta0_norm_tail_zero: f64,
    pub existence: Constants,
    pub vanishing: Criterion,
    pub dissipative: Criterion,
}

impl LipschitzReport {
    pub fn render(&self) -> String {
        let e = &self.existence;
        let mut out = String::new();
        out.push_str(&format!(
            "weight {}: alpha_w = {}{}, int 1/w = {}\n",
            self.weight,
            fmt_num(self.alpha_w.value),
            if self.alpha_w.exact { "" } else { " (estimate)" },
            fmt_num(self.inv_integral_total)
        ));
        out.push_str(&format!(
            "Lipschitz/growth: L_a = {}, L_b = {}, K_a = {}, K_b = {} (squared form: L_a^2 = {}, L_b^2 = {})\n",
            fmt_num(e.l_a),
            fmt_num(e.l_b),
            fmt_num(e.k_a),
            fmt_num(e.k_b),
            fmt_num(e.l_a_squared),
            fmt_num(e.l_b_squared)
        ));
        for c in [&self.vanishing, &self.dissipative] {
            out.push_str(&c.render());
            out.push('\n');
            for n in &c.notes {
                out.push_str(&format!("  note: {n}\n"));
            }
        }
        out
    }
}

fn fmt_num(x: f64) -> String {
    if x == x.round() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.6}")
    }
}

/// `p/q` when `x` is a fraction with denominator at most 64, else [`fmt_num`].
fn fmt_exact(x: f64) -> String {
    if x.is_finite() && x != x.round() {
        for q in 2..=64u32 {
            let p = (x * q as f64).round();
            if (p / q as f64 - x).abs() <= 1e-12 * x.abs().max(1.0) {
                return format!("{}/{}", p as i64, q);
            }
        }
    }
    fmt_num(x)
}

fn growth_norms_numeric(coeffs: &CoefficientSet, w: &WeightFunction) -> Result<(f64, f64)> {
    let grid = Grid::covering(1.0 / 128.0, 40.0)?;
    let zero = Curve::zero(grid, coeffs.state_dim());
    let metric = GridMetric::new(w, grid);
    let k_a = metric.norm(&lift_a(coeffs, 0.0, &zero)?)?;
    let b = lift_b(coeffs, 0.0, &zero)?;
    let k_b = operator_norm_estimate(&metric, &b, 0)?;
    Ok((k_a, k_b))
}

/// Largest `||B v||_w` over the coordinate directions and a few random unit vectors.
fn operator_norm_estimate(metric: &GridMetric, b: &CurveOperator, seed: u64) -> Result<f64> {
    let (_, m) = b.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut v = vec![0.0; m];
    for k in 0..m + 16 {
        if k < m {
            v.iter_mut().enumerate().for_each(|(i, x)| *x = (i == k) as u8 as f64);
        } else {
            v.iter_mut().for_each(|x| *x = rng.random::<f64>() - 0.5);
            let n = dot(&v, &v).sqrt();
            if n == 0.0 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= n);
        }
        best = best.max(metric.norm(&b.apply(&v)?)?);
    }
    Ok(best)
}

/// Envelope-based certification of the Lipschitz and growth conditions and
/// of the two limiting-law criteria. `beta` is the dissipativity constant of
/// the drift at infinity, required for the second criterion.
pub fn certify(coeffs: &CoefficientSet, w: &WeightFunction, beta: Option<f64>) -> Result<LipschitzReport> {
    let env = coeffs
        .envelopes()
        .ok_or_else(|| Error::Certification("no Lipschitz envelopes supplied".into()))?;
    let alpha = w.alpha_w();
    let inv_total = w.inv_integral_total();
    let delta0 = 1.0;
    let delta0_inf = (1.0 + inv_total).sqrt();
    let delta0_tail_zero = inv_total.sqrt();

    let (na, nb) = (env.drift.norm_w(w), env.diffusion.norm_w(w));
    if !(na.is_finite() && nb.is_finite()) {
        return Err(Error::Certification(format!(
            "envelopes are not elements of H_w for weight {}",
            w.describe()
        )));
    }
    let (k_a, k_b) = match coeffs.kernels().growth_norms(w) {
        Some(k) => k,
        None => growth_norms_numeric(coeffs, w)?,
    };
    let existence = Constants {
        l_a: na * delta0,
        l_b: nb * delta0,
        k_a,
        k_b,
        l_a_squared: na * na * delta0 * delta0,
        l_b_squared: nb * nb * delta0 * delta0,
    };

    // Vanishing-impact regime: coefficients map tail-zero curves to
    // tail-zero curves and the shift contracts at rate alpha_w / 2 there.
    let vanishing = {
        let l_a = env.drift.norm_w_infinity(w) * delta0_tail_zero;
        let l_b = env.diffusion.norm_w_infinity(w) * delta0_tail_zero;
        let lhs = l_b * l_b + 2.0 * l_a;
        let mut notes = Vec::new();
        let verdict = if alpha.value <= 0.0 {
            Verdict::NotApplicable(format!("alpha_w = {} is not positive", alpha.value))
        } else if !coeffs.vanishes_at_infinity() {
            Verdict::NotApplicable("mu(inf, u) = sigma(inf, u) = 0 is not declared".into())
        } else if lhs < alpha.value {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        if !alpha.exact {
            notes.push("alpha_w is a sampled estimate".into());
        }
        Criterion {
            name: "vanishing-impact criterion".into(),
            lhs_label: "L_b^2 + 2 L_a".into(),
            rhs_text: format!("{} = α_w", fmt_exact(alpha.value)),
            l_a,
            l_b,
            lhs,
            rhs: alpha.value,
            verdict,
            conclusion: "limiting law exists, depends on initial value".into(),
            notes,
        }
    };

    let dissipative = {
        let l_a = env.drift.seminorm(w) * delta0_inf;
        let l_b = env.diffusion.norm_w_infinity(w) * delta0_inf;
        let lhs = 2.0 * l_a + l_b * l_b;
        let mut notes = Vec::new();
        let verdict = match beta {
            None => Verdict::NotApplicable("no dissipativity constant beta given".into()),
            Some(b) if !(b > 0.0) => Verdict::NotApplicable(format!("beta = {b} is not positive")),
            Some(_) if alpha.value <= 0.0 => {
                Verdict::NotApplicable(format!("alpha_w = {} is not positive", alpha.value))
            }
            Some(b) if b > 0.5 * alpha.value => Verdict::NotApplicable(format!(
                "beta = {b} exceeds alpha_w / 2 = {}",
                0.5 * alpha.value
            )),
            Some(b) => {
                let check = check_dissipativity(coeffs, b);
                match check {
                    DissipativityCheck::Verified => {
                        notes.push("dissipativity verified on sampled constant curves".into())
                    }
                    DissipativityCheck::Violated => {
                        notes.push("dissipativity violated on sampled constant curves".into())
                    }
                    DissipativityCheck::UserAsserted => notes.push("user-asserted beta".into()),
                }
                if check != DissipativityCheck::Violated && lhs < 2.0 * b {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
        };
        Criterion {
            name: "dissipative criterion".into(),
            lhs_label: "2 L_a + L_b^2".into(),
            rhs_text: beta.map_or_else(|| "2β".to_string(), |b| format!("2β = {}", fmt_exact(2.0 * b))),
            l_a,
            l_b,
            lhs,
            rhs: 2.0 * beta.unwrap_or(0.0),
            verdict,
            conclusion: "limiting law exists, independent of initial value".into(),
            notes,
        }
    };

    Ok(LipschitzReport {
        weight: w.describe(),
        alpha_w: alpha,
        inv_integral_total: inv_total,
        delta0_norm: delta0,
        delta0_norm_inf: delta0_inf,
        delta0_norm_tail_zero: delta0_tail_zero,
        existence,
        vanishing,
        dissipative,
    })
}

/// Checks `<mu(inf, u) - mu(inf, v), u - v> <= -beta |u - v|^2` on random
/// pairs of constant curves, which is exact for affine drifts.
pub fn check_dissipativity(coeffs: &CoefficientSet, beta: f64) -> DissipativityCheck {
    let k = coeffs.kernels();
    if !k.has_affine_drift() {
        return DissipativityCheck::UserAsserted;
    }
    let d = coeffs.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut mu_u, mut mu_v) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..256 {
        let u: Vec<f64> = (0..d).map(|_| 20.0 * (rng.random::<f64>() - 0.5)).collect();
        let v: Vec<f64> = (0..d).map(|_| 20.0 * (rng.random::<f64>() - 0.5)).collect();
        if !(k.mu_infinity(&u, &mut mu_u) && k.mu_infinity(&v, &mut mu_v)) {
            return DissipativityCheck::UserAsserted;
        }
        let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let lhs: f64 = mu_u.iter().zip(&mu_v).zip(&diff).map(|((a, b), c)| (a - b) * c).sum();
        let rhs = -beta * dot(&diff, &diff);
        if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
            return DissipativityCheck::Violated;
        }
    }
    DissipativityCheck::Verified
}

/// Random pairs of curves for [`empirical_lipschitz`]: a random constant plus
/// a random smooth perturbation, whose amplitude is sometimes zero so that
/// constant differences are represented.
pub fn random_curve_pairs(grid: Grid, dim: usize, count: usize, seed: u64) -> Vec<(Curve, Curve)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let one = |rng: &mut ChaCha8Rng| {
        let base: Vec<f64> = (0..dim).map(|_| 4.0 * (rng.random::<f64>() - 0.5)).collect();
        let amp = if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() };
        let freq = 0.5 + 3.0 * rng.random::<f64>();
        let decay = 0.5 + 2.0 * rng.random::<f64>();
        Curve::from_fn(grid, dim, |x, out| {
            for (k, o) in out.iter_mut().enumerate() {
                *o = base[k] + amp * (-decay * x).exp() * (freq * x + k as f64).sin();
            }
        })
    };
    (0..count).map(|_| (one(&mut rng), one(&mut rng))).collect()
}

/// Largest observed ratios `||a(t,g) - a(t,h)||_w / ||g - h||_w` and the
/// operator analogue for `b`, probed with random unit noise directions.
/// A Monte Carlo lower bound for the certified constants.
pub fn empirical_lipschitz(
    coeffs: &CoefficientSet,
    w: &WeightFunction,
    pairs: &[(Curve, Curve)],
    t: f64,
) -> Result<(f64, f64)> {
    let Some((first, _)) = pairs.first() else {
        return Ok((0.0, 0.0));
    };
    let metric = GridMetric::new(w, first.grid());
    let mut best = (0.0f64, 0.0f64);
    for (k, (g, h)) in pairs.iter().enumerate() {
        let denom = metric.norm(&g.try_sub(h)?)?;
        if denom == 0.0 {
            continue;
        }
        let da = lift_a(coeffs, t, g)?.try_sub(&lift_a(coeffs, t, h)?)?;
        best.0 = best.0.max(metric.norm(&da)? / denom);
        let bg = lift_b(coeffs, t, g)?;
        let bh = lift_b(coeffs, t, h)?;
        let mut diff = CurveOperator::zero(bg.grid(), coeffs.state_dim(), coeffs.noise_dim());
        for j in 0..=bg.grid().cells {
            for ((o, x), y) in diff.matrix_mut(j).iter_mut().zip(bg.matrix(j)).zip(bh.matrix(j)) {
                *o = x - y;
            }
        }
        let op = operator_norm_estimate(&metric, &diff, k as u64)?;
        best.1 = best.1.max(op / denom);
    }
    Ok(best)
}

struct OuKernels {
    lambda: f64,
    theta: f64,
    sigma: f64,
    dim: usize,
    noise_dim: usize,
}

impl OuKernels {
    fn drift(&self, u: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(u) {
            *o = self.lambda * (self.theta - x);
        }
    }

    fn diffusion(&self, out: &mut [f64]) {
        for i in 0..self.dim {
            for j in 0..self.noise_dim {
                out[i * self.noise_dim + j] = if i == j { self.sigma } else { 0.0 };
            }
        }
    }
}

impl VolterraKernels for OuKernels {
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    fn mu(&self, _t: f64, _s: f64, u: &[f64], out: &mut [f64]) {
        self.drift(u, out);
    }
    fn sigma(&self, _t: f64, _s: f64, _u: &[f64], out: &mut [f64]) {
        self.diffusion(out);
    }
    fn mu_infinity(&self, u: &[f64], out: &mut [f64]) -> bool {
        self.drift(u, out);
        true
    }
    fn sigma_infinity(&self, _u: &[f64], out: &mut [f64]) -> bool {
        self.diffusion(out);
        true
    }
    fn is_homogeneous(&self) -> bool {
        true
    }
    fn has_affine_drift(&self) -> bool {
        true
    }
    fn growth_norms(&self, _w: &WeightFunction) -> Option<(f64, f64)> {
        let k_a = (self.lambda * self.theta).abs() * (self.dim as f64).sqrt();
        let k_b = if self.dim.min(self.noise_dim) > 0 { self.sigma.abs() } else { 0.0 };
        Some((k_a, k_b))
    }
    fn describe(&self) -> String {
        format!(
            "ornstein-uhlenbeck(lambda = {}, theta = {}, sigma = {})",
            self.lambda, self.theta, self.sigma
        )
    }
}

#[derive(Debug, Clone, Copy)]
enum DecayProfile {
    Exponential { rate: f64 },
    Power { p: f64 },
}

impl DecayProfile {
    fn at(&self, lag: f64) -> f64 {
        match *self {
            DecayProfile::Exponential { rate } => (-rate * lag).exp(),
            DecayProfile::Power { p } => (1.0 + lag).powf(-p),
        }
    }
}

struct DecayKernels {
    c_drift: f64,
    c_diffusion: f64,
    profile: DecayProfile,
    dim: usize,
    noise_dim: usize,
}

impl VolterraKernels for DecayKernels {
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    fn mu(&self, t: f64, s: f64, u: &[f64], out: &mut [f64]) {
        let c = self.c_drift * self.profile.at(t - s);
        out.iter_mut().zip(u).for_each(|(o, x)| *o = c * x);
    }
    fn sigma(&self, t: f64, s: f64, u: &[f64], out: &mut [f64]) {
        let c = self.c_diffusion * self.profile.at(t - s);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, x) in u.iter().enumerate() {
            out[i * self.noise_dim] = c * x;
        }
    }
    fn mu_infinity(&self, _u: &[f64], out: &mut [f64]) -> bool {
        out.iter_mut().for_each(|o| *o = 0.0);
        true
    }
    fn sigma_infinity(&self, _u: &[f64], out: &mut [f64]) -> bool {
        out.iter_mut().for_each(|o| *o = 0.0);
        true
    }
    fn is_homogeneous(&self) -> bool {
        true
    }
    fn growth_norms(&self, _w: &WeightFunction) -> Option<(f64, f64)> {
        Some((0.0, 0.0))
    }
    fn describe(&self) -> String {
        match self.profile {
            DecayProfile::Exponential { rate } => format!(
                "exponential(c_drift = {}, c_diffusion = {}, rate = {rate})",
                self.c_drift, self.c_diffusion
            ),
            DecayProfile::Power { p } => format!(
                "power-law(c_drift = {}, c_diffusion = {}, p = {p})",
                self.c_drift, self.c_diffusion
            ),
        }
    }
}

type KernelFn = Box<dyn Fn(f64, f64, &[f64], &mut [f64]) + Send + Sync>;

struct ClosureKernels {
    dim: usize,
    noise_dim: usize,
    homogeneous: bool,
    mu: KernelFn,
    sigma: KernelFn,
}

impl VolterraKernels for ClosureKernels {
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    fn mu(&self, t: f64, s: f64, u: &[f64], out: &mut [f64]) {
        (self.mu)(t, s, u, out)
    }
    fn sigma(&self, t: f64, s: f64, u: &[f64], out: &mut [f64]) {
        (self.sigma)(t, s, u, out)
    }
    fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }
    fn describe(&self) -> String {
        format!("user kernels (d = {}, m = {})", self.dim, self.noise_dim)
    }
}

/// Lifts of a constant point `u`, convenient for tests and reports.
pub fn lift_a_at(coeffs: &CoefficientSet, t: f64, u: &HilbertPoint, grid: Grid) -> Result<Curve> {
    lift_a(coeffs, t, &Curve::constant(grid, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{eval, norm_w};

    fn grid() -> Grid {
        Grid::covering(1.0 / 64.0, 8.0).unwrap()
    }

    #[test]
    fn ou_lift_is_constant_mean_reversion() {
        let c = CoefficientSet::ornstein_uhlenbeck(1.5, 0.3, 0.5, 1, 1);
        let h = Curve::scalar_fn(grid(), |x| 2.0 + x.sin());
        let a = lift_a(&c, 3.0, &h).unwrap();
        let expected = 1.5 * (0.3 - 2.0);
        assert!(a.as_flat().iter().all(|v| (*v - expected).abs() < 1e-15));
        let b = lift_b(&c, 3.0, &h).unwrap();
        for j in 0..=grid().cells {
            assert_eq!(b.matrix(j), &[0.5]);
        }
    }

    #[test]
    fn exponential_lift_matches_closed_form() {
        let c = CoefficientSet::exponential(0.25, 0.25, 1.0, 2, 1);
        let u = HilbertPoint(vec![1.0, -3.0]);
        let h = Curve::constant(grid(), &u);
        let a = lift_a(&c, 0.7, &h).unwrap();
        for &x in &[0.0, 0.5, 2.0, 7.0] {
            let v = eval(&a, x).unwrap();
            for k in 0..2 {
                assert!((v[k] - 0.25 * (-x).exp() * u[k]).abs() < 1e-14);
            }
        }
        // the limit replaces the last node
        assert_eq!(a.tail(), &[0.0, 0.0]);
        let b = lift_b(&c, 0.7, &h).unwrap();
        let x = grid().node(10);
        assert!((b.matrix(10)[0] - 0.25 * (-x).exp()).abs() < 1e-15);
        assert!((b.matrix(10)[1] + 0.75 * (-x).exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_kernels_lift_to_zero() {
        let c = CoefficientSet::exponential(0.0, 0.0, 1.0, 1, 1);
        let h = Curve::scalar_fn(grid(), |x| x);
        assert!(lift_a(&c, 0.0, &h).unwrap().as_flat().iter().all(|v| *v == 0.0));
        let b = lift_b(&c, 0.0, &h).unwrap();
        assert!(b.apply(&[1.0]).unwrap().as_flat().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lifts_depend_only_on_value_at_origin() {
        let c = CoefficientSet::power_law(0.3, 0.2, 3.0, 1, 1);
        let g = Curve::scalar_fn(grid(), |x| 1.0 + x.sin());
        let h = Curve::scalar_fn(grid(), |x| 1.0 + 5.0 * x * (-x).exp());
        assert_eq!(lift_a(&c, 1.0, &g).unwrap(), lift_a(&c, 1.0, &h).unwrap());
        assert_eq!(lift_b(&c, 1.0, &g).unwrap(), lift_b(&c, 1.0, &h).unwrap());
    }

    #[test]
    fn homogeneous_families_depend_on_lag_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for c in [
            CoefficientSet::ornstein_uhlenbeck(1.0, 0.2, 0.3, 2, 2),
            CoefficientSet::exponential(0.4, 0.1, 2.0, 2, 2),
            CoefficientSet::power_law(0.4, 0.1, 2.5, 2, 2),
        ] {
            assert!(c.is_homogeneous());
            for _ in 0..100 {
                let (s, lag) = (10.0 * rng.random::<f64>(), 10.0 * rng.random::<f64>());
                let u = [rng.random::<f64>(), -rng.random::<f64>()];
                let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
                c.kernels().mu(s + lag, s, &u, &mut a);
                c.kernels().mu(lag, 0.0, &u, &mut b);
                for k in 0..2 {
                    assert!((a[k] - b[k]).abs() <= 1e-12 * (1.0 + b[k].abs()));
                }
            }
        }
    }

    #[test]
    fn lift_has_finite_norm() {
        let w = WeightFunction::exponential(1.0).unwrap();
        let c = CoefficientSet::exponential(0.25, 0.25, 1.0, 1, 1);
        let h = Curve::constant(grid(), &HilbertPoint(vec![2.0]));
        assert!(norm_w(&lift_a(&c, 0.0, &h).unwrap(), &w).unwrap().is_finite());
    }

    #[test]
    fn non_finite_kernel_is_an_error() {
        let c = CoefficientSet::from_fns(1, 1, true, |t, s, _u, out| out[0] = 1.0 / (t - s - 1.0), |_, _, _, out| out[0] = 0.0);
        let h = Curve::zero(Grid::new(0.5, 4).unwrap(), 1);
        assert!(matches!(lift_a(&c, 0.0, &h), Err(Error::NonFiniteKernel { .. })));
    }

    #[test]
    fn envelope_norms_closed_form() {
        let w = WeightFunction::exponential(1.0).unwrap();
        let e = Envelope::Exponential { c: 0.25, rate: 1.0 };
        // int (1/4 e^{-x})^2 e^x dx = 1/16
        assert!((e.derivative_energy(&w) - 1.0 / 16.0).abs() < 1e-15);
        assert!((e.norm_w_infinity(&w) - 0.25).abs() < 1e-15);
        assert!((e.norm_w(&w) - (1.0f64 / 8.0).sqrt()).abs() < 1e-15);
        let poly = WeightFunction::polynomial(2.0).unwrap();
        let p = Envelope::Power { c: 1.0, p: 2.0 };
        // int 4 (1+x)^{-6} (1+x)^2 = 4/3
        assert!((p.derivative_energy(&poly) - 4.0 / 3.0).abs() < 1e-14);
        assert!(Envelope::Power { c: 1.0, p: 2.0 }.derivative_energy(&w).is_infinite());
        assert!(Envelope::Exponential { c: 1.0, rate: 0.4 }.derivative_energy(&w).is_infinite());
    }

    #[test]
    fn envelope_quadrature_matches_closed_form() {
        let w = WeightFunction::custom("e^x", |x: f64| x.exp(), |x: f64| x.exp()).unwrap();
        let e = Envelope::Exponential { c: 0.25, rate: 1.0 };
        assert!((e.derivative_energy(&w) - 1.0 / 16.0).abs() < 1e-10);
        let pe = WeightFunction::polynomial_exponential(1.0, 0.5).unwrap();
        // int (e^{-x})^2 (1+x) e^{x/2} = int (1+x) e^{-3x/2} = 2/3 + 4/9
        let e1 = Envelope::Exponential { c: 1.0, rate: 1.0 };
        assert!((e1.derivative_energy(&pe) - (2.0 / 3.0 + 4.0 / 9.0)).abs() < 1e-10);
    }

    #[test]
    fn sampled_envelope_uses_grid_norm() {
        let w = WeightFunction::exponential(1.0).unwrap();
        let g = Grid::covering(1.0 / 1024.0, 40.0).unwrap();
        let e = Envelope::Sampled(Curve::scalar_fn(g, |x| 0.25 * (-x).exp()));
        assert!((e.norm_w_infinity(&w) - 0.25).abs() < 1e-6);
        assert!(e.decay_horizon(1e-10) <= 40.0);
    }

    #[test]
    fn example_two_certification() {
        let w = WeightFunction::exponential(1.0).unwrap();
        let c = CoefficientSet::exponential(0.25, 0.25, 1.0, 1, 1);
        let r = certify(&c, &w, None).unwrap();
        assert!((r.vanishing.l_a - 0.25).abs() < 1e-15);
        assert!((r.vanishing.l_b - 0.25).abs() < 1e-15);
        assert!((r.vanishing.lhs - 9.0 / 16.0).abs() < 1e-15);
        assert_eq!(r.vanishing.rhs, 1.0);
        assert_eq!(r.vanishing.verdict, Verdict::Pass);
        let line = r.vanishing.render();
        assert!(line.contains("= 9/16 < 1 = α_w: PASS"), "{line}");
        assert!(line.contains("depends on initial value"));
    }

    #[test]
    fn ou_certification() {
        let w = WeightFunction::exponential(2.0).unwrap();
        let c = CoefficientSet::ornstein_uhlenbeck(1.0, 0.3, 0.5, 1, 1);
        let r = certify(&c, &w, Some(1.0)).unwrap();
        assert_eq!(r.dissipative.l_a, 0.0);
        assert_eq!(r.dissipative.l_b, 0.0);
        assert_eq!(r.dissipative.lhs, 0.0);
        assert_eq!(r.dissipative.rhs, 2.0);
        assert_eq!(r.dissipative.verdict, Verdict::Pass);
        assert!(r.dissipative.notes.iter().any(|n| n.contains("verified")));
        assert!(matches!(r.vanishing.verdict, Verdict::NotApplicable(_)));
        let line = r.dissipative.render();
        assert!(line.contains("= 0 < 2β = 2: PASS"), "{line}");
        // existence constants: the lifted drift is lambda-Lipschitz
        assert_eq!(r.existence.l_a, 1.0);
        assert!((r.existence.k_a - 0.3).abs() < 1e-15);
    }

    #[test]
    fn beta_beyond_half_alpha_is_not_applicable() {
        let w = WeightFunction::exponential(1.0).unwrap();
        let c = CoefficientSet::ornstein_uhlenbeck(1.0, 0.0, 0.5, 1, 1);
        let r = certify(&c, &w, Some(1.0)).unwrap();
        assert!(matches!(r.dissipative.verdict, Verdict::NotApplicable(_)));
    }

    #[test]
    fn violated_dissipativity_fails() {
        let w = WeightFunction::exponential(4.0).unwrap();
        let c = CoefficientSet::ornstein_uhlenbeck(1.0, 0.0, 0.0, 1, 1);
        let r = certify(&c, &w, Some(1.5)).unwrap();
        assert_eq!(r.dissipative.verdict, Verdict::Fail);
    }

    #[test]
    fn zero_envelopes_certify_everything() {
        let w = WeightFunction::exponential(0.3).unwrap();
        let c = CoefficientSet::exponential(0.0, 0.0, 1.0, 1, 1);
        let r = certify(&c, &w, None).unwrap();
        assert_eq!(r.existence.l_a, 0.0);
        assert_eq!(r.existence.l_b, 0.0);
        assert_eq!(r.vanishing.lhs, 0.0);
        assert_eq!(r.vanishing.verdict, Verdict::Pass);
    }

    #[test]
    fn missing_envelopes_cannot_certify() {
        let w = WeightFunction::exponential(1.0).unwrap();
        let c = CoefficientSet::from_fns(1, 1, true, |_, _, u, o| o[0] = -u[0], |_, _, _, o| o[0] = 1.0);
        assert!(matches!(certify(&c, &w, Some(0.1)), Err(Error::Certification(_))));
    }

    #[test]
    fn certification_scales_with_envelope() {
        let w = WeightFunction::exponential(1.0).unwrap();
        let base = CoefficientSet::exponential(0.25, 0.1, 1.0, 1, 1);
        let env = base.envelopes().unwrap().clone();
        let l0 = certify(&base, &w, None).unwrap().existence.l_a;
        for k in [0.0, 0.5, 2.0] {
            let scaled = base.clone().with_envelopes(Envelopes {
                drift: env.drift.scaled(k),
                diffusion: env.diffusion.clone(),
            });
            let l = certify(&scaled, &w, None).unwrap().existence.l_a;
            assert!((l - k * l0).abs() <= 1e-15 * l0.max(1.0), "k = {k}");
        }
    }

    #[test]
    fn empirical_lipschitz_is_below_certified() {
        // On a fine grid the piecewise-linear lift inflates the derivative
        // energy only by O(dx^2), far below the 1e-6 slack.
        let g = Grid::covering(1.0 / 1024.0, 30.0).unwrap();
        let cases = [
            (WeightFunction::exponential(1.0).unwrap(), CoefficientSet::exponential(0.25, 0.25, 1.0, 1, 1)),
            (WeightFunction::exponential(2.0).unwrap(), CoefficientSet::ornstein_uhlenbeck(1.0, 0.3, 0.5, 1, 1)),
            (WeightFunction::exponential(1.0).unwrap(), CoefficientSet::exponential(0.0, 0.0, 1.0, 1, 1)),
        ];
        for (w, c) in cases {
            let pairs = random_curve_pairs(g, c.state_dim(), 40, 3);
            let (ea, eb) = empirical_lipschitz(&c, &w, &pairs, 0.0).unwrap();
            let r = certify(&c, &w, None).unwrap();
            assert!(ea >= 0.0 && eb >= 0.0);
            assert!(ea <= r.existence.l_a * (1.0 + 1e-6), "{}: {ea} vs {}", c.describe(), r.existence.l_a);
            assert!(eb <= r.existence.l_b * (1.0 + 1e-6), "{}: {eb} vs {}", c.describe(), r.existence.l_b);
        }
    }

    #[test]
    fn ou_empirical_ratio_is_attained_on_constant_differences() {
        let g = Grid::covering(1.0 / 64.0, 4.0).unwrap();
        let w = WeightFunction::exponential(2.0).unwrap();
        let c = CoefficientSet::ornstein_uhlenbeck(1.3, 0.0, 0.5, 1, 1);
        let pair = (
            Curve::constant(g, &HilbertPoint(vec![1.0])),
            Curve::constant(g, &HilbertPoint(vec![-0.5])),
        );
        let (ea, eb) = empirical_lipschitz(&c, &w, &[pair], 0.0).unwrap();
        assert!((ea - 1.3).abs() < 1e-14);
        assert_eq!(eb, 0.0);
    }

    #[test]
    fn power_law_needs_polynomial_weight() {
        let c = CoefficientSet::power_law(0.2, 0.1, 3.0, 1, 1);
        let exp_w = WeightFunction::exponential(1.0).unwrap();
        assert!(matches!(certify(&c, &exp_w, None), Err(Error::Certification(_))));
        let poly = WeightFunction::polynomial(2.0).unwrap();
        let r = certify(&c, &poly, None).unwrap();
        assert!(r.existence.l_a.is_finite());
        assert!(matches!(r.vanishing.verdict, Verdict::NotApplicable(_)));
    }

    #[test]
    fn exact_formatting() {
        assert_eq!(fmt_exact(0.5625), "9/16");
        assert_eq!(fmt_exact(1.0), "1");
        assert_eq!(fmt_exact(std::f64::consts::PI), "3.141593");
    }
}
