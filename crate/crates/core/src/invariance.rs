//! Empirical limiting laws of homogeneous equations and two-sample tests
//! for weak convergence.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{InitialCondition, Scenario};
use crate::space::HilbertPoint;

pub const LEVEL: f64 = 0.05;
pub const RESAMPLES: usize = 500;
pub const MIN_PATHS: usize = 100;
/// Largest diverged fraction tolerated by an ensemble run.
pub const MAX_DIVERGED_FRACTION: f64 = 0.01;
/// Per-sample cap for the quadratic multivariate energy statistic.
pub const MULTIVARIATE_CAP: usize = 500;

const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Mergeable running moments of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub const EMPTY: Moments = Moments { n: 0, mean: 0.0, m2: 0.0 };

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan's pairwise update.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        Moments {
            n,
            mean: self.mean + delta * nb / n as f64,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n.max(1) as f64).sqrt()
    }
}

/// Moments of `values` by a balanced pairwise merge, so that rounding does
/// not grow with the sample size.
pub fn moments(values: &[f64]) -> Moments {
    if values.len() <= 16 {
        let mut m = Moments::EMPTY;
        values.iter().for_each(|v| m.push(*v));
        return m;
    }
    let (a, b) = values.split_at(values.len() / 2);
    moments(a).merge(&moments(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    /// `(p, q_p)` pairs.
    pub quantiles: Vec<(f64, f64)>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(sample: &[HilbertPoint]) -> Vec<CoordinateSummary> {
    let d = sample.first().map_or(0, |p| p.dim());
    (0..d)
        .map(|k| {
            let mut xs: Vec<f64> = sample.iter().map(|p| p[k]).collect();
            xs.sort_by(f64::total_cmp);
            let m = moments(&xs);
            CoordinateSummary {
                mean: m.mean,
                variance: m.variance(),
                std_error: m.std_error(),
                quantiles: QUANTILES.iter().map(|&p| (p, quantile(&xs, p))).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawEstimate {
    pub horizon: f64,
    pub seed: u64,
    pub first_path: u64,
    pub requested: usize,
    pub diverged: usize,
    pub sample: Vec<HilbertPoint>,
    pub summary: Vec<CoordinateSummary>,
    pub max_tail_gap: f64,
}

/// Terminal sample `X(T)` over paths `first_path .. first_path + n`.
pub fn estimate_law(
    scenario: &Scenario,
    horizon: f64,
    n: usize,
    seed: u64,
    first_path: u64,
    workers: usize,
) -> Result<LawEstimate> {
    if !scenario.coeffs.is_homogeneous() {
        return Err(Error::InvalidArgument(
            "limiting laws are only estimated for homogeneous kernels".into(),
        ));
    }
    if n < MIN_PATHS {
        return Err(Error::config("paths", format!("need at least {MIN_PATHS} paths, got {n}")));
    }
    let solver = scenario.solver(horizon)?;
    let ens = solver.run_terminal(seed, first_path..first_path + n as u64, workers)?;
    let diverged = ens.diverged();
    if diverged as f64 > MAX_DIVERGED_FRACTION * n as f64 {
        return Err(Error::TooManyDiverged { diverged, total: n });
    }
    if diverged > 0 {
        log::warn!("{diverged} of {n} paths diverged and were excluded");
    }
    let sample: Vec<HilbertPoint> = ens.completed().cloned().collect();
    Ok(LawEstimate {
        horizon,
        seed,
        first_path,
        requested: n,
        diverged,
        summary: summarize(&sample),
        sample,
        max_tail_gap: ens.max_tail_gap,
    })
}

/// `sum_{i,j} |x_i - y_j|` for sorted inputs, in linear time.
fn cross_sum_sorted(x: &[f64], y: &[f64]) -> f64 {
    let total_y: f64 = y.iter().sum();
    let mut below = 0.0;
    let mut count = 0usize;
    let mut acc = 0.0;
    for &xi in x {
        while count < y.len() && y[count] < xi {
            below += y[count];
            count += 1;
        }
        let above = total_y - below;
        let (nb, na) = (count as f64, (y.len() - count) as f64);
        acc += (xi * nb - below) + (above - xi * na);
    }
    acc
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// V-statistic energy distance `2 E|X-Y| - E|X-X'| - E|Y-Y'|` of two scalar samples.
pub fn energy_distance_1d(x: &[f64], y: &[f64]) -> f64 {
    let (x, y) = (sorted(x), sorted(y));
    let (n, m) = (x.len() as f64, y.len() as f64);
    let exy = cross_sum_sorted(&x, &y) / (n * m);
    let exx = cross_sum_sorted(&x, &x) / (n * n);
    let eyy = cross_sum_sorted(&y, &y) / (m * m);
    (2.0 * exy - exx - eyy).max(0.0)
}

fn euclid(a: &HilbertPoint, b: &HilbertPoint) -> f64 {
    a.0.iter().zip(&b.0).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

fn pair_sum(x: &[HilbertPoint], y: &[HilbertPoint]) -> f64 {
    x.iter().map(|a| y.iter().map(|b| euclid(a, b)).sum::<f64>()).sum()
}

/// Energy distance in `R^d`; scalar samples use the sorted linear-time path.
pub fn energy_distance(x: &[HilbertPoint], y: &[HilbertPoint]) -> f64 {
    if x.is_empty() || y.is_empty() {
        return 0.0;
    }
    if x[0].dim() == 1 {
        let xs: Vec<f64> = x.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = y.iter().map(|p| p[0]).collect();
        return energy_distance_1d(&xs, &ys);
    }
    let (n, m) = (x.len() as f64, y.len() as f64);
    (2.0 * pair_sum(x, y) / (n * m) - pair_sum(x, x) / (n * n) - pair_sum(y, y) / (m * m)).max(0.0)
}

/// Energy statistic of the split `labels` of the sorted pooled scalar sample
/// `z`, via within-group ranks: `sum_{i<j in g} |z_i - z_j| = sum_k z_k (2 r_k - n_g + 1)`.
fn split_energy_sorted(z: &[f64], labels: &[bool], total_pairs: f64, na: usize, nb: usize) -> f64 {
    let (mut ra, mut rb) = (0usize, 0usize);
    let (mut sa, mut sb) = (0.0, 0.0);
    for (v, &in_a) in z.iter().zip(labels) {
        if in_a {
            sa += v * (2.0 * ra as f64 - na as f64 + 1.0);
            ra += 1;
        } else {
            sb += v * (2.0 * rb as f64 - nb as f64 + 1.0);
            rb += 1;
        }
    }
    let cross = total_pairs - sa - sb;
    let (na, nb) = (na as f64, nb as f64);
    2.0 * cross / (na * nb) - 2.0 * sa / (na * na) - 2.0 * sb / (nb * nb)
}

/// Permutation p-value `(1 + #{E_perm >= E_obs}) / (R + 1)` for the energy statistic.
pub fn permutation_p_value(x: &[HilbertPoint], y: &[HilbertPoint], resamples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (na, nb) = (x.len(), y.len());
    let mut count = 0usize;
    if x[0].dim() == 1 {
        let mut pooled: Vec<(f64, bool)> =
            x.iter().map(|p| (p[0], true)).chain(y.iter().map(|p| (p[0], false))).collect();
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
        let z: Vec<f64> = pooled.iter().map(|p| p.0).collect();
        let mut labels: Vec<bool> = pooled.iter().map(|p| p.1).collect();
        let n = z.len() as f64;
        let total: f64 = z.iter().enumerate().map(|(k, v)| v * (2.0 * k as f64 - n + 1.0)).sum();
        let observed = split_energy_sorted(&z, &labels, total, na, nb);
        let slack = 1e-12 * observed.abs().max(1e-300);
        for _ in 0..resamples {
            labels.shuffle(&mut rng);
            if split_energy_sorted(&z, &labels, total, na, nb) >= observed - slack {
                count += 1;
            }
        }
    } else {
        let pooled: Vec<&HilbertPoint> = x.iter().chain(y).collect();
        let n = pooled.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = euclid(pooled[i], pooled[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let stat = |labels: &[bool]| {
            let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for j in i + 1..n {
                    let d = dist[i * n + j];
                    match (labels[i], labels[j]) {
                        (true, true) => saa += d,
                        (false, false) => sbb += d,
                        _ => sab += d,
                    }
                }
            }
            let (a, b) = (na as f64, nb as f64);
            2.0 * sab / (a * b) - 2.0 * saa / (a * a) - 2.0 * sbb / (b * b)
        };
        let mut labels: Vec<bool> = (0..n).map(|i| i < na).collect();
        let observed = stat(&labels);
        let slack = 1e-12 * observed.abs().max(1e-300);
        for _ in 0..resamples {
            labels.shuffle(&mut rng);
            if stat(&labels) >= observed - slack {
                count += 1;
            }
        }
    }
    (1 + count) as f64 / (resamples + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov statistic with the asymptotic p-value.
pub fn ks_test(a: &[f64], b: &[f64]) -> KsResult {
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    }
}

/// `Q(l) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 l^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub energy_distance: f64,
    pub p_value: f64,
    pub ks: Vec<KsResult>,
    pub level: f64,
    pub resamples: usize,
    pub sizes: (usize, usize),
    /// No detectable difference at `level`.
    pub pass: bool,
}

/// Energy test with permutation p-value plus per-coordinate KS. Multivariate
/// samples are truncated to their first [`MULTIVARIATE_CAP`] points.
pub fn compare_samples(x: &[HilbertPoint], y: &[HilbertPoint], seed: u64) -> Result<ConvergenceVerdict> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InvalidArgument("two-sample test needs at least two points per sample".into()));
    }
    let d = x[0].dim();
    if x.iter().chain(y).any(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: 0 });
    }
    let (xs, ys) = if d > 1 {
        (&x[..x.len().min(MULTIVARIATE_CAP)], &y[..y.len().min(MULTIVARIATE_CAP)])
    } else {
        (x, y)
    };
    let energy = energy_distance(xs, ys);
    let p_value = permutation_p_value(xs, ys, RESAMPLES, seed);
    let ks = (0..d)
        .map(|k| {
            let a: Vec<f64> = x.iter().map(|p| p[k]).collect();
            let b: Vec<f64> = y.iter().map(|p| p[k]).collect();
            ks_test(&a, &b)
        })
        .collect();
    Ok(ConvergenceVerdict {
        energy_distance: energy,
        p_value,
        ks,
        level: LEVEL,
        resamples: RESAMPLES,
        sizes: (xs.len(), ys.len()),
        pass: p_value >= LEVEL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawComparison {
    pub first: LawEstimate,
    pub second: LawEstimate,
    pub verdict: ConvergenceVerdict,
}

/// Compares `X(t1)` and `X(t2)` on disjoint path sets.
pub fn test_convergence(scenario: &Scenario, t1: f64, t2: f64, n: usize, seed: u64, workers: usize) -> Result<LawComparison> {
    if !(t1 < t2) {
        return Err(Error::InvalidArgument(format!("need t1 < t2, got {t1} and {t2}")));
    }
    let first = estimate_law(scenario, t1, n, seed, 0, workers)?;
    let second = estimate_law(scenario, t2, n, seed, n as u64, workers)?;
    let verdict = compare_samples(&first.sample, &second.sample, seed)?;
    Ok(LawComparison { first, second, verdict })
}

/// Compares the laws at `horizon` started from two initial values. A pass
/// means no detectable dependence on the initial value.
pub fn initial_dependence_probe(
    scenario: &Scenario,
    x0_a: &HilbertPoint,
    x0_b: &HilbertPoint,
    horizon: f64,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<LawComparison> {
    let a = scenario.with_initial(InitialCondition::Constant(x0_a.clone()));
    let b = scenario.with_initial(InitialCondition::Constant(x0_b.clone()));
    let first = estimate_law(&a, horizon, n, seed, 0, workers)?;
    let second = estimate_law(&b, horizon, n, seed, n as u64, workers)?;
    let verdict = compare_samples(&first.sample, &second.sample, seed)?;
    Ok(LawComparison { first, second, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_sample(n: usize, shift: f64, scale: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| shift + scale * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn points(xs: &[f64]) -> Vec<HilbertPoint> {
        xs.iter().map(|v| HilbertPoint(vec![*v])).collect()
    }

    fn brute_energy(x: &[f64], y: &[f64]) -> f64 {
        let s = |a: &[f64], b: &[f64]| a.iter().map(|u| b.iter().map(|v| (u - v).abs()).sum::<f64>()).sum::<f64>();
        let (n, m) = (x.len() as f64, y.len() as f64);
        2.0 * s(x, y) / (n * m) - s(x, x) / (n * n) - s(y, y) / (m * m)
    }

    #[test]
    fn energy_matches_brute_force() {
        let x = normal_sample(200, 0.0, 1.0, 1);
        let y = normal_sample(150, 0.3, 1.5, 2);
        let fast = energy_distance_1d(&x, &y);
        assert!((fast - brute_energy(&x, &y)).abs() < 1e-10);
        let px: Vec<HilbertPoint> = x.chunks(2).map(|c| HilbertPoint(c.to_vec())).collect();
        let py: Vec<HilbertPoint> = y.chunks(2).map(|c| HilbertPoint(c.to_vec())).collect();
        assert!(energy_distance(&px, &py) > 0.0);
    }

    #[test]
    fn energy_is_zero_on_identical_samples() {
        let x = normal_sample(333, 1.0, 2.0, 3);
        assert_eq!(energy_distance_1d(&x, &x), 0.0);
        let p: Vec<HilbertPoint> = x.chunks(3).map(|c| HilbertPoint(c.to_vec())).collect();
        assert_eq!(energy_distance(&p, &p), 0.0);
    }

    #[test]
    fn split_formula_matches_direct_statistic() {
        let x = normal_sample(40, 0.0, 1.0, 4);
        let y = normal_sample(30, 0.5, 1.0, 5);
        let mut pooled: Vec<(f64, bool)> = x.iter().map(|v| (*v, true)).chain(y.iter().map(|v| (*v, false))).collect();
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
        let z: Vec<f64> = pooled.iter().map(|p| p.0).collect();
        let labels: Vec<bool> = pooled.iter().map(|p| p.1).collect();
        let n = z.len() as f64;
        let total: f64 = z.iter().enumerate().map(|(k, v)| v * (2.0 * k as f64 - n + 1.0)).sum();
        let split = split_energy_sorted(&z, &labels, total, 40, 30);
        assert!((split - brute_energy(&x, &y)).abs() < 1e-10);
    }

    #[test]
    fn permutation_detects_shift_and_accepts_null() {
        let x = points(&normal_sample(500, 0.0, 1.0, 6));
        let y = points(&normal_sample(500, 0.5, 1.0, 7));
        let v = compare_samples(&x, &y, 1).unwrap();
        assert!(!v.pass);
        assert!(v.p_value < 0.01);
        assert!((0.0..=1.0).contains(&v.p_value));
        let z = points(&normal_sample(500, 0.0, 1.0, 8));
        let v = compare_samples(&x, &z, 1).unwrap();
        assert!(v.p_value > 0.0 && v.p_value <= 1.0);
    }

    #[test]
    fn multivariate_permutation_detects_shift() {
        let a = normal_sample(400, 0.0, 1.0, 9);
        let b = normal_sample(400, 0.7, 1.0, 10);
        let x: Vec<HilbertPoint> = a.chunks(2).map(|c| HilbertPoint(c.to_vec())).collect();
        let y: Vec<HilbertPoint> = b.chunks(2).map(|c| HilbertPoint(c.to_vec())).collect();
        let v = compare_samples(&x, &y, 2).unwrap();
        assert!(!v.pass);
        assert_eq!(v.ks.len(), 2);
    }

    #[test]
    fn ks_statistic_and_p_value() {
        let r = ks_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = ks_test(&[0.0, 1.0], &[2.0, 3.0]);
        assert_eq!(r.statistic, 1.0);
        // Q(1.36) is close to 0.05
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn moments_merge_is_order_insensitive() {
        let x = normal_sample(1000, 2.0, 3.0, 11);
        let a = moments(&x);
        let mut rev = x.clone();
        rev.reverse();
        let b = moments(&rev);
        assert!((a.mean - b.mean).abs() < 1e-12 * a.mean.abs());
        assert!((a.variance() - b.variance()).abs() < 1e-12 * a.variance());
        let naive_mean = x.iter().sum::<f64>() / 1000.0;
        assert!((a.mean - naive_mean).abs() < 1e-12);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = summarize(&points(&[4.0, 1.0, 3.0, 2.0, 5.0]));
        assert_eq!(s[0].quantiles[2], (0.5, 3.0));
        assert_eq!(s[0].mean, 3.0);
        assert_eq!(s[0].variance, 2.5);
    }
}
