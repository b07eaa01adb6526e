//! Mean-zero square-integrable Lévy drivers on `R^m`: a Gaussian part with
//! diagonal covariance plus a compensated compound-Poisson part.
//!
//! Increments are drawn from a counter-based stream: step `n` of path `p`
//! under seed `s` always uses the generator keyed by `(s, p, n)`, so a path
//! is reproducible bit for bit regardless of how paths are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of a single jump coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    /// `+size` or `-size` with probability 1/2 each.
    Symmetric { size: f64 },
    /// `N(mean, std^2)`.
    Normal { mean: f64, std: f64 },
}

impl JumpLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::Symmetric { .. } => 0.0,
            JumpLaw::Normal { mean, .. } => mean,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            JumpLaw::Symmetric { size } => size * size,
            JumpLaw::Normal { mean, std } => mean * mean + std * std,
        }
    }

    fn scaled(&self, c: f64) -> JumpLaw {
        match *self {
            JumpLaw::Symmetric { size } => JumpLaw::Symmetric { size: c * size },
            JumpLaw::Normal { mean, std } => JumpLaw::Normal {
                mean: c * mean,
                std: c * std,
            },
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Symmetric { size } => {
                if rng.random::<bool>() {
                    size
                } else {
                    -size
                }
            }
            JumpLaw::Normal { mean, std } => mean + std * rng.sample::<f64, _>(StandardNormal),
        }
    }
}

/// Finite-activity jump component: jumps arrive at `rate`, each coordinate
/// of a jump is drawn independently from `law`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpPart {
    pub rate: f64,
    #[serde(flatten)]
    pub law: JumpLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    dim: usize,
    /// Eigenvalues of the Gaussian covariance, one per coordinate.
    spectrum: Vec<f64>,
    jumps: Option<JumpPart>,
}

impl LevyModel {
    pub fn new(spectrum: Vec<f64>, jumps: Option<JumpPart>) -> Result<Self> {
        let dim = spectrum.len();
        if dim == 0 {
            return Err(Error::InvalidNoise("noise dimension must be at least 1".into()));
        }
        if let Some(v) = spectrum.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidNoise(format!(
                "covariance eigenvalues must be non-negative, got {v}"
            )));
        }
        if let Some(j) = &jumps {
            if !(j.rate.is_finite() && j.rate >= 0.0) {
                return Err(Error::InvalidNoise(format!(
                    "jump rate must be non-negative, got {}",
                    j.rate
                )));
            }
            let ok = match j.law {
                JumpLaw::Symmetric { size } => size.is_finite(),
                JumpLaw::Normal { mean, std } => mean.is_finite() && std.is_finite() && std >= 0.0,
            };
            if !ok {
                return Err(Error::InvalidNoise(format!("invalid jump law {:?}", j.law)));
            }
        }
        Ok(LevyModel {
            dim,
            spectrum,
            jumps,
        })
    }

    /// Standard Brownian motion on `R^m` scaled so that `E|L(1)|^2 = 1`.
    pub fn brownian(dim: usize) -> Self {
        LevyModel::new(vec![1.0 / dim as f64; dim], None).expect("valid spectrum")
    }

    /// The same process multiplied by the constant that makes
    /// `E|L(1)|^2 = 1`. A zero model is returned unchanged.
    pub fn normalized(&self) -> Self {
        let m2 = self.second_moment();
        if m2 == 0.0 {
            return self.clone();
        }
        let c = m2.sqrt().recip();
        LevyModel {
            dim: self.dim,
            spectrum: self.spectrum.iter().map(|v| v * c * c).collect(),
            jumps: self.jumps.map(|j| JumpPart {
                rate: j.rate,
                law: j.law.scaled(c),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn jumps(&self) -> Option<&JumpPart> {
        self.jumps.as_ref()
    }

    /// `E|L(1)|^2` of the centred process: trace of the covariance plus
    /// `rate * E|J|^2`.
    pub fn second_moment(&self) -> f64 {
        let gaussian: f64 = self.spectrum.iter().sum();
        let jumps = self
            .jumps
            .map_or(0.0, |j| j.rate * self.dim as f64 * j.law.second_moment());
        gaussian + jumps
    }

    /// Draws `L(t + dt) - L(t)` into `out`.
    pub fn sample_increment_into<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        dt: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: out.len(),
            });
        }
        let sdt = dt.sqrt();
        for (o, ev) in out.iter_mut().zip(&self.spectrum) {
            *o = if *ev > 0.0 {
                ev.sqrt() * sdt * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
        }
        if let Some(j) = &self.jumps {
            if j.rate > 0.0 {
                let count = Poisson::new(j.rate * dt)
                    .map_err(|e| Error::InvalidNoise(e.to_string()))?
                    .sample(rng) as u64;
                for _ in 0..count {
                    for o in out.iter_mut() {
                        *o += j.law.sample(rng);
                    }
                }
                let compensation = j.rate * dt * j.law.mean();
                if compensation != 0.0 {
                    out.iter_mut().for_each(|o| *o -= compensation);
                }
            }
        }
        Ok(())
    }
}

/// Counter-based source of per-step generators for one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub path: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl NoiseStream {
    pub fn new(seed: u64, path: u64) -> Self {
        NoiseStream { seed, path }
    }

    /// Generator for step `step`; identical keys give identical generators.
    pub fn step_rng(&self, step: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let words = [
            splitmix64(self.seed),
            splitmix64(self.path ^ 0x5851_f42d_4c95_7f2d),
            splitmix64(step ^ 0x1405_7b7e_f767_814f),
            splitmix64(self.seed ^ self.path.rotate_left(21) ^ step.rotate_left(42)),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Generator for auxiliary per-path draws such as a random initial value.
    pub fn aux_rng(&self) -> ChaCha8Rng {
        self.step_rng(u64::MAX)
    }

    pub fn increment(&self, model: &LevyModel, step: u64, dt: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; model.dim()];
        self.increment_into(model, step, dt, &mut out)?;
        Ok(out)
    }

    pub fn increment_into(
        &self,
        model: &LevyModel,
        step: u64,
        dt: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let mut rng = self.step_rng(step);
        model.sample_increment_into(&mut rng, dt, out)
    }
}

/// `sample_increment` in functional form.
pub fn sample_increment(
    model: &LevyModel,
    stream: &NoiseStream,
    step: u64,
    dt: f64,
) -> Result<Vec<f64>> {
    stream.increment(model, step, dt)
}

/// Standard normal draw, exposed for sampled initial values.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// Normal sampler with validated parameters.
pub fn normal(mean: f64, std: f64) -> Result<Normal<f64>> {
    Normal::new(mean, std).map_err(|e| Error::InvalidArgument(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn draws(model: &LevyModel, dt: f64, n: usize, seed: u64) -> Vec<f64> {
        let stream = NoiseStream::new(seed, 0);
        (0..n as u64)
            .map(|k| stream.increment(model, k, dt).unwrap()[0])
            .collect()
    }

    #[test]
    fn second_moments() {
        assert_eq!(LevyModel::new(vec![0.5, 0.5], None).unwrap().second_moment(), 1.0);
        let jumps = JumpPart {
            rate: 0.5,
            law: JumpLaw::Symmetric { size: 1.0 },
        };
        let m = LevyModel::new(vec![0.5], Some(jumps)).unwrap();
        assert!((m.second_moment() - 1.0).abs() < 1e-15);
        assert_eq!(LevyModel::new(vec![0.0, 0.0], None).unwrap().second_moment(), 0.0);
    }

    #[test]
    fn normalization_gives_unit_moment() {
        let jumps = JumpPart {
            rate: 3.0,
            law: JumpLaw::Normal { mean: 0.3, std: 2.0 },
        };
        let m = LevyModel::new(vec![2.0, 0.7, 0.1], Some(jumps)).unwrap().normalized();
        assert!((m.second_moment() - 1.0).abs() < 1e-12);
        let zero = LevyModel::new(vec![0.0], None).unwrap();
        assert_eq!(zero.normalized(), zero);
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(LevyModel::new(vec![-0.1], None).is_err());
        assert!(LevyModel::new(vec![], None).is_err());
        let bad = JumpPart {
            rate: -1.0,
            law: JumpLaw::Symmetric { size: 1.0 },
        };
        assert!(LevyModel::new(vec![1.0], Some(bad)).is_err());
        let m = LevyModel::brownian(1);
        assert!(NoiseStream::new(0, 0).increment(&m, 0, 0.0).is_err());
    }

    #[test]
    fn gaussian_increments_have_unit_rate_variance() {
        let dt = 1.0 / 64.0;
        let n = 100_000;
        let xs: Vec<f64> = draws(&LevyModel::brownian(1), dt, n, 7)
            .iter()
            .map(|x| x / dt.sqrt())
            .collect();
        let (mean, var) = mean_var(&xs);
        let se_mean = (var / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean}");
        // Var of sample variance for N(0,1) is 2/(n-1)
        let se_var = (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn jump_only_model_has_unit_second_moment() {
        let jumps = JumpPart {
            rate: 2.0,
            law: JumpLaw::Symmetric { size: 1.0 },
        };
        let model = LevyModel::new(vec![0.0], Some(jumps)).unwrap().normalized();
        let xs = draws(&model, 1.0, 100_000, 11);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m2, v2) = mean_var(&sq);
        let se = (v2 / sq.len() as f64).sqrt();
        assert!((m2 - 1.0).abs() < 3.0 * se, "E L(1)^2 = {m2} +- {se}");
    }

    #[test]
    fn compensated_jumps_are_centred() {
        let jumps = JumpPart {
            rate: 5.0,
            law: JumpLaw::Normal { mean: 0.4, std: 0.2 },
        };
        let model = LevyModel::new(vec![0.0], Some(jumps)).unwrap().normalized();
        let dt = 0.1;
        let xs: Vec<f64> = draws(&model, dt, 100_000, 3).iter().map(|x| x / dt).collect();
        let (mean, var) = mean_var(&xs);
        assert!(mean.abs() < 3.0 * (var / xs.len() as f64).sqrt(), "{mean}");
    }

    #[test]
    fn sub_increments_add_up_in_law() {
        // sum of 2^k independent increments over [0, T] has variance T
        let model = LevyModel::brownian(1);
        let t = 2.0;
        let k = 4;
        let parts = 1u64 << k;
        let dt = t / parts as f64;
        let paths = 20_000u64;
        let sums: Vec<f64> = (0..paths)
            .map(|p| {
                let s = NoiseStream::new(99, p);
                (0..parts).map(|n| s.increment(&model, n, dt).unwrap()[0]).sum()
            })
            .collect();
        let (_, var) = mean_var(&sums);
        let se = t * (2.0 / (paths as f64 - 1.0)).sqrt();
        assert!((var - t).abs() < 3.0 * se, "{var}");
    }

    #[test]
    fn increments_are_uncorrelated_across_steps() {
        let xs = draws(&LevyModel::brownian(1), 1.0, 100_000, 5);
        let (mean, var) = mean_var(&xs);
        let n = xs.len();
        let lag1 = xs
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / ((n - 1) as f64 * var);
        assert!(lag1.abs() < 3.0 / (n as f64).sqrt(), "{lag1}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let model = LevyModel::new(
            vec![0.3, 0.2],
            Some(JumpPart {
                rate: 4.0,
                law: JumpLaw::Symmetric { size: 0.3 },
            }),
        )
        .unwrap();
        let a = NoiseStream::new(42, 3);
        let b = NoiseStream::new(42, 3);
        for n in 0..50 {
            assert_eq!(
                a.increment(&model, n, 0.01).unwrap(),
                b.increment(&model, n, 0.01).unwrap()
            );
        }
        assert_ne!(
            a.increment(&model, 0, 0.01).unwrap(),
            NoiseStream::new(42, 4).increment(&model, 0, 0.01).unwrap()
        );
        assert_ne!(
            a.increment(&model, 0, 0.01).unwrap(),
            NoiseStream::new(43, 3).increment(&model, 0, 0.01).unwrap()
        );
    }
}
