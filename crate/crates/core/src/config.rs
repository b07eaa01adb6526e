//! TOML scenario files. Unknown fields are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::{CoefficientSet, Envelope, Envelopes};
use crate::error::{Error, Result};
use crate::noise::{JumpLaw, JumpPart, LevyModel};
use crate::solver::{InitialCondition, Scenario, DEFAULT_DIVERGENCE_CAP};
use crate::space::HilbertPoint;
use crate::weight::WeightFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub x_max: Option<f64>,
    #[serde(default = "default_cap")]
    pub divergence_cap: f64,
    pub dim: usize,
    pub noise_dim: usize,
    pub weight: WeightConfig,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub law: LawConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_paths() -> usize {
    10_000
}

fn default_cap() -> f64 {
    DEFAULT_DIVERGENCE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightConfig {
    Exponential { rho: f64 },
    Polynomial { q: f64 },
    PolynomialExponential { q: f64, rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    OrnsteinUhlenbeck {
        lambda: f64,
        theta: f64,
        sigma: f64,
        #[serde(default)]
        envelopes: EnvelopeChoice,
    },
    Exponential {
        c_drift: f64,
        c_diffusion: f64,
        rate: f64,
        #[serde(default)]
        envelopes: EnvelopeChoice,
    },
    PowerLaw {
        c_drift: f64,
        c_diffusion: f64,
        p: f64,
        #[serde(default)]
        envelopes: EnvelopeChoice,
    },
}

/// `"analytic"` uses the envelopes shipped with the family, `"none"` drops
/// them, and explicit tables override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvelopeChoice {
    Named(String),
    Explicit(ExplicitEnvelopes),
}

impl Default for EnvelopeChoice {
    fn default() -> Self {
        EnvelopeChoice::Named("analytic".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitEnvelopes {
    pub drift: EnvelopeConfig,
    pub diffusion: EnvelopeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvelopeConfig {
    Zero,
    Constant { c: f64 },
    Exponential { c: f64, rate: f64 },
    Power { c: f64, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Gaussian covariance eigenvalues; one per noise coordinate, default all ones.
    pub spectrum: Option<Vec<f64>>,
    pub jumps: Option<JumpConfig>,
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub rate: f64,
    pub law: String,
    pub size: Option<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Constant { value: Vec<f64> },
    Gaussian { mean: Vec<f64>, std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    /// First horizon; defaults to the scenario horizon.
    pub t1: Option<f64>,
    /// Second horizon; defaults to twice the first.
    pub t2: Option<f64>,
    /// Two initial values for the dependence probe.
    pub probe: Option<[Vec<f64>; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_oracle_paths")]
    pub paths: usize,
    #[serde(default = "default_oracle_steps")]
    pub steps: usize,
    #[serde(default = "default_oracle_horizon")]
    pub horizon: f64,
    #[serde(default = "default_oracle_dts")]
    pub dts: Vec<f64>,
    #[serde(default = "default_fine_dt")]
    pub fine_dt: f64,
}

fn default_oracle_paths() -> usize {
    4
}
fn default_oracle_steps() -> usize {
    512
}
fn default_oracle_horizon() -> f64 {
    1.0
}
fn default_oracle_dts() -> Vec<f64> {
    vec![1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0]
}
fn default_fine_dt() -> f64 {
    1.0 / 4096.0
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            paths: default_oracle_paths(),
            steps: default_oracle_steps(),
            horizon: default_oracle_horizon(),
            dts: default_oracle_dts(),
            fine_dt: default_fine_dt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    /// Write every `every`-th step to the trajectory file.
    #[serde(default = "default_every")]
    pub every: usize,
}

fn default_every() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, every: 1 }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be non-negative, got {v}")))
    }
}

fn dimension(field: &str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::config(field, format!("expected {expected} entries, got {}", v.len())));
    }
    v.iter().try_for_each(|x| finite(field, *x))
}

/// Field named by a parse error: the backticked name for unknown or
/// missing fields, else the key on the offending line.
fn error_field(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message();
    if msg.contains("unknown field") || msg.contains("missing field") {
        if let Some(name) = msg.split('`').nth(1) {
            return name.to_string();
        }
    }
    e.span()
        .and_then(|span| {
            let start = text[..span.start.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
            let line = text[start..].lines().next()?;
            let key = line.split('=').next()?.trim();
            (!key.is_empty() && !key.starts_with('[')).then(|| key.to_string())
        })
        .unwrap_or_else(|| "config".into())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::config(error_field(text, &e), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config("horizon", format!("{} is not a multiple of dt = {}", self.horizon, self.dt)));
        }
        if let Some(x) = self.x_max {
            positive("x_max", x)?;
            if x < self.dt {
                return Err(Error::config("x_max", "must be at least dt"));
            }
        }
        positive("divergence_cap", self.divergence_cap)?;
        if self.paths < 1 {
            return Err(Error::config("paths", "must be at least 1"));
        }
        if self.dim < 1 {
            return Err(Error::config("dim", "must be at least 1"));
        }
        if self.noise_dim < 1 {
            return Err(Error::config("noise_dim", "must be at least 1"));
        }
        self.weight()?;
        self.validate_kernel()?;
        self.noise_model()?;
        match &self.initial {
            InitialConfig::Constant { value } => dimension("initial.value", value, self.dim)?,
            InitialConfig::Gaussian { mean, std } => {
                dimension("initial.mean", mean, self.dim)?;
                non_negative("initial.std", *std)?;
            }
        }
        if let Some(b) = self.certify.beta {
            positive("certify.beta", b)?;
        }
        let (t1, t2) = self.law_horizons();
        positive("law.t1", t1)?;
        positive("law.t2", t2)?;
        if t1 >= t2 {
            return Err(Error::config("law.t2", format!("must exceed t1 = {t1}")));
        }
        for (field, t) in [("law.t1", t1), ("law.t2", t2)] {
            let r = t / self.dt;
            if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                return Err(Error::config(field, format!("{t} is not a multiple of dt = {}", self.dt)));
            }
        }
        if let Some(probe) = &self.law.probe {
            dimension("law.probe", &probe[0], self.dim)?;
            dimension("law.probe", &probe[1], self.dim)?;
        }
        let o = &self.oracle;
        if o.paths < 1 {
            return Err(Error::config("oracle.paths", "must be at least 1"));
        }
        if o.steps < 1 {
            return Err(Error::config("oracle.steps", "must be at least 1"));
        }
        positive("oracle.horizon", o.horizon)?;
        positive("oracle.fine_dt", o.fine_dt)?;
        if o.dts.len() < 2 {
            return Err(Error::config("oracle.dts", "need at least two step sizes"));
        }
        for dt in &o.dts {
            positive("oracle.dts", *dt)?;
            let r = o.horizon / dt;
            if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                return Err(Error::config("oracle.dts", format!("{dt} does not divide oracle.horizon")));
            }
        }
        if self.output.every < 1 {
            return Err(Error::config("output.every", "must be at least 1"));
        }
        Ok(())
    }

    fn validate_kernel(&self) -> Result<()> {
        match &self.kernel {
            KernelConfig::OrnsteinUhlenbeck { lambda, theta, sigma, envelopes } => {
                finite("kernel.lambda", *lambda)?;
                finite("kernel.theta", *theta)?;
                finite("kernel.sigma", *sigma)?;
                validate_envelopes(envelopes)
            }
            KernelConfig::Exponential { c_drift, c_diffusion, rate, envelopes } => {
                finite("kernel.c_drift", *c_drift)?;
                finite("kernel.c_diffusion", *c_diffusion)?;
                positive("kernel.rate", *rate)?;
                validate_envelopes(envelopes)
            }
            KernelConfig::PowerLaw { c_drift, c_diffusion, p, envelopes } => {
                finite("kernel.c_drift", *c_drift)?;
                finite("kernel.c_diffusion", *c_diffusion)?;
                positive("kernel.p", *p)?;
                validate_envelopes(envelopes)
            }
        }
    }

    pub fn law_horizons(&self) -> (f64, f64) {
        let t1 = self.law.t1.unwrap_or(self.horizon);
        (t1, self.law.t2.unwrap_or(2.0 * t1))
    }

    pub fn weight(&self) -> Result<WeightFunction> {
        let w = match self.weight {
            WeightConfig::Exponential { rho } => WeightFunction::exponential(rho),
            WeightConfig::Polynomial { q } => WeightFunction::polynomial(q),
            WeightConfig::PolynomialExponential { q, rho } => WeightFunction::polynomial_exponential(q, rho),
        };
        w.map_err(|e| Error::config("weight", e.to_string()))
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        let (d, m) = (self.dim, self.noise_dim);
        let (set, choice) = match &self.kernel {
            KernelConfig::OrnsteinUhlenbeck { lambda, theta, sigma, envelopes } => {
                (CoefficientSet::ornstein_uhlenbeck(*lambda, *theta, *sigma, d, m), envelopes)
            }
            KernelConfig::Exponential { c_drift, c_diffusion, rate, envelopes } => {
                (CoefficientSet::exponential(*c_drift, *c_diffusion, *rate, d, m), envelopes)
            }
            KernelConfig::PowerLaw { c_drift, c_diffusion, p, envelopes } => {
                (CoefficientSet::power_law(*c_drift, *c_diffusion, *p, d, m), envelopes)
            }
        };
        Ok(match choice {
            EnvelopeChoice::Named(n) if n == "analytic" => set,
            EnvelopeChoice::Named(_) => CoefficientSet::new(set.kernels_arc(), None),
            EnvelopeChoice::Explicit(e) => set.with_envelopes(Envelopes {
                drift: e.drift.build(),
                diffusion: e.diffusion.build(),
            }),
        })
    }

    /// The same kernel family with the diffusion switched off.
    pub fn drift_only(&self) -> Result<CoefficientSet> {
        let mut c = self.clone();
        match &mut c.kernel {
            KernelConfig::OrnsteinUhlenbeck { sigma, .. } => *sigma = 0.0,
            KernelConfig::Exponential { c_diffusion, .. } | KernelConfig::PowerLaw { c_diffusion, .. } => {
                *c_diffusion = 0.0
            }
        }
        c.coefficients()
    }

    pub fn noise_model(&self) -> Result<LevyModel> {
        let spectrum = self.noise.spectrum.clone().unwrap_or_else(|| vec![1.0; self.noise_dim]);
        if spectrum.len() != self.noise_dim {
            return Err(Error::config(
                "noise.spectrum",
                format!("expected {} entries, got {}", self.noise_dim, spectrum.len()),
            ));
        }
        let jumps = match &self.noise.jumps {
            None => None,
            Some(j) => {
                non_negative("noise.jumps.rate", j.rate)?;
                let need = |name: &str, v: Option<f64>| {
                    v.ok_or_else(|| Error::config(format!("noise.jumps.{name}"), format!("required for law `{}`", j.law)))
                };
                let law = match j.law.as_str() {
                    "symmetric" => JumpLaw::Symmetric { size: need("size", j.size)? },
                    "normal" => JumpLaw::Normal {
                        mean: need("mean", j.mean)?,
                        std: need("std", j.std)?,
                    },
                    other => {
                        return Err(Error::config(
                            "noise.jumps.law",
                            format!("unknown law `{other}`, expected `symmetric` or `normal`"),
                        ))
                    }
                };
                Some(JumpPart { rate: j.rate, law })
            }
        };
        let model = LevyModel::new(spectrum, jumps).map_err(|e| Error::config("noise", e.to_string()))?;
        Ok(if self.noise.normalize { model.normalized() } else { model })
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match &self.initial {
            InitialConfig::Constant { value } => InitialCondition::Constant(HilbertPoint(value.clone())),
            InitialConfig::Gaussian { mean, std } => InitialCondition::Gaussian {
                mean: HilbertPoint(mean.clone()),
                std: *std,
            },
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = Scenario::new(
            self.coefficients()?,
            self.noise_model()?,
            self.weight()?,
            self.initial_condition(),
            self.dt,
        );
        s.x_max = self.x_max;
        s.divergence_cap = self.divergence_cap;
        Ok(s)
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn validate_envelopes(choice: &EnvelopeChoice) -> Result<()> {
    match choice {
        EnvelopeChoice::Named(n) if n == "analytic" || n == "none" => Ok(()),
        EnvelopeChoice::Named(n) => Err(Error::config(
            "kernel.envelopes",
            format!("unknown choice `{n}`, expected `analytic`, `none` or a table"),
        )),
        EnvelopeChoice::Explicit(e) => {
            for (field, env) in [("kernel.envelopes.drift", e.drift), ("kernel.envelopes.diffusion", e.diffusion)] {
                match env {
                    EnvelopeConfig::Zero => {}
                    EnvelopeConfig::Constant { c } => non_negative(field, c)?,
                    EnvelopeConfig::Exponential { c, rate } => {
                        non_negative(field, c)?;
                        positive(field, rate)?;
                    }
                    EnvelopeConfig::Power { c, p } => {
                        non_negative(field, c)?;
                        positive(field, p)?;
                    }
                }
            }
            Ok(())
        }
    }
}

impl EnvelopeConfig {
    fn build(&self) -> Envelope {
        match *self {
            EnvelopeConfig::Zero => Envelope::Zero,
            EnvelopeConfig::Constant { c } => Envelope::Constant { c },
            EnvelopeConfig::Exponential { c, rate } => Envelope::Exponential { c, rate },
            EnvelopeConfig::Power { c, p } => Envelope::Power { c, p },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OU: &str = r#"
seed = 7
paths = 200
horizon = 1.0
dt = 0.0625
dim = 1
noise_dim = 1

[weight]
family = "exponential"
rho = 2.0

[kernel]
family = "ornstein-uhlenbeck"
lambda = 1.0
theta = 0.3
sigma = 0.5

[initial]
kind = "constant"
value = [1.0]

[certify]
beta = 1.0
"#;

    fn field_of(text: &str) -> String {
        match ScenarioConfig::from_toml(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_and_builds() {
        let c = ScenarioConfig::from_toml(OU).unwrap();
        let s = c.scenario().unwrap();
        assert_eq!(s.coeffs.state_dim(), 1);
        assert!(s.coeffs.envelopes().is_some());
        assert_eq!(c.law_horizons(), (1.0, 2.0));
        assert_eq!(c.hash(), ScenarioConfig::from_toml(OU).unwrap().hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ScenarioConfig::from_toml(OU).unwrap();
        let mut b = a.clone();
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_unknown_fields() {
        assert_eq!(field_of(&format!("{OU}\nbogus = 1\n")), "bogus");
        let t = OU.replace("rho = 2.0", "rho = 2.0\nextra = 3");
        assert_eq!(field_of(&t), "extra");
        let t = OU.replace("beta = 1.0", "beta = 1.0\ngamma = 2");
        assert_eq!(field_of(&t), "gamma");
    }

    #[test]
    fn field_level_validation() {
        assert_eq!(field_of(&OU.replace("dt = 0.0625", "dt = 0.0")), "dt");
        assert_eq!(field_of(&OU.replace("dt = 0.0625", "dt = -1.0")), "dt");
        assert_eq!(field_of(&OU.replace("horizon = 1.0", "horizon = 1.01")), "horizon");
        assert_eq!(field_of(&OU.replace("paths = 200", "paths = 0")), "paths");
        assert_eq!(field_of(&OU.replace("value = [1.0]", "value = [1.0, 2.0]")), "initial.value");
        assert_eq!(field_of(&OU.replace("rho = 2.0", "rho = -1.0")), "weight");
        assert_eq!(field_of(&OU.replace("beta = 1.0", "beta = 0.0")), "certify.beta");
        assert_eq!(field_of(&OU.replace("\"ornstein-uhlenbeck\"", "\"mystery\"")), "family");
    }

    #[test]
    fn envelope_choices() {
        let none = OU.replace("sigma = 0.5", "sigma = 0.5\nenvelopes = \"none\"");
        let c = ScenarioConfig::from_toml(&none).unwrap().coefficients().unwrap();
        assert!(c.envelopes().is_none());
        let explicit = OU.replace(
            "sigma = 0.5",
            "sigma = 0.5\nenvelopes = { drift = { kind = \"constant\", c = 2.0 }, diffusion = { kind = \"zero\" } }",
        );
        let c = ScenarioConfig::from_toml(&explicit).unwrap().coefficients().unwrap();
        assert_eq!(c.envelopes().unwrap().drift, Envelope::Constant { c: 2.0 });
        let bad = OU.replace("sigma = 0.5", "sigma = 0.5\nenvelopes = \"guess\"");
        assert_eq!(field_of(&bad), "kernel.envelopes");
    }

    #[test]
    fn jump_noise() {
        let t = format!("{OU}\n[noise]\nspectrum = [0.5]\n[noise.jumps]\nrate = 2.0\nlaw = \"symmetric\"\nsize = 0.5\n");
        let m = ScenarioConfig::from_toml(&t).unwrap().noise_model().unwrap();
        assert!((m.second_moment() - (0.5 + 2.0 * 0.25)).abs() < 1e-15);
        let t = format!("{OU}\n[noise.jumps]\nrate = 2.0\nlaw = \"normal\"\nmean = 0.1\n");
        assert_eq!(field_of(&t), "noise.jumps.std");
    }
}
