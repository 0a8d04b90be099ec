//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::advantage::Estimator;
use crate::channels::{self, CgfSpec, Channel, DensitySpec};
use crate::error::{LcdfError, Result};
use crate::priors::{self, Prior, SpikeLaw};
use crate::spectral::{Corruption, CorruptionKind, PhaseScanConfig, SpikedMatrixConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Fisher,
    Overlap,
    Advantage,
    Exact,
    Universality,
    Spectral,
    PhaseDiagram,
    Selftest,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub channel: Option<ChannelConfig>,
    pub prior: Option<PriorConfig>,
    pub degree: Option<usize>,
    pub trials: Option<usize>,
    pub estimator: Option<EstimatorConfig>,
    /// Noise level for the `univ` estimator; defaults to `1/F` of the channel.
    pub sigma2: Option<f64>,
    pub points: Option<Vec<[f64; 2]>>,
    /// Path of a discrete model, relative to the config file.
    pub model: Option<PathBuf>,
    pub spectral: Option<SpectralConfig>,
    pub scan: Option<ScanConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorConfig {
    SubsetFormula,
    ExpBound,
    Univ,
}

impl From<EstimatorConfig> for Estimator {
    fn from(e: EstimatorConfig) -> Self {
        match e {
            EstimatorConfig::SubsetFormula => Estimator::SubsetFormula,
            EstimatorConfig::ExpBound => Estimator::ExpBound,
            EstimatorConfig::Univ => Estimator::Univ,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    Gaussian {
        #[serde(default = "one")]
        sigma: f64,
        fisher: Option<f64>,
    },
    Logistic {
        #[serde(default = "one")]
        scale: f64,
        fisher: Option<f64>,
    },
    SmoothedLaplace {
        c: f64,
        eps: f64,
        fisher: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl DensityConfig {
    pub fn build(&self) -> Result<DensitySpec> {
        let (d, f) = match *self {
            DensityConfig::Gaussian { sigma, fisher } => (DensitySpec::gaussian(sigma), fisher),
            DensityConfig::Logistic { scale, fisher } => (DensitySpec::logistic(scale), fisher),
            DensityConfig::SmoothedLaplace { c, eps, fisher } => (DensitySpec::smoothed_laplace(c, eps), fisher),
        };
        d.validate()?;
        match f {
            Some(t) => d.with_fisher(t),
            None => Ok(d),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CgfConfig {
    Gaussian { variance: f64 },
    Bernoulli { c: f64 },
    Poisson { mean: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    Additive { density: DensityConfig },
    ExpFamily { cgf: CgfConfig },
    Bernoulli { c: f64 },
    Censored { eta: f64, inner: Box<ChannelConfig> },
    Quantized { density: DensityConfig },
}

impl ChannelConfig {
    pub fn build(&self) -> Result<Channel> {
        match self {
            ChannelConfig::Additive { density } => channels::make_additive(density.build()?),
            ChannelConfig::ExpFamily { cgf } => channels::make_exponential_family(match *cgf {
                CgfConfig::Gaussian { variance } => CgfSpec::Gaussian { variance },
                CgfConfig::Bernoulli { c } => CgfSpec::Bernoulli { c },
                CgfConfig::Poisson { mean } => CgfSpec::Poisson { mean },
            }),
            ChannelConfig::Bernoulli { c } => channels::bernoulli(*c),
            ChannelConfig::Censored { eta, inner } => channels::censor(inner.build()?, *eta),
            ChannelConfig::Quantized { density } => channels::quantize(channels::make_additive(density.build()?)?),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawConfig {
    Rademacher,
    SparseRademacher { s: f64 },
    UniformPm,
    TwoPoint { p: f64 },
}

impl From<LawConfig> for SpikeLaw {
    fn from(l: LawConfig) -> Self {
        match l {
            LawConfig::Rademacher => SpikeLaw::Rademacher,
            LawConfig::SparseRademacher { s } => SpikeLaw::SparseRademacher { s },
            LawConfig::UniformPm => SpikeLaw::UniformPm,
            LawConfig::TwoPoint { p } => SpikeLaw::TwoPoint { p },
        }
    }
}

fn rademacher() -> LawConfig {
    LawConfig::Rademacher
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    SpikedMatrix {
        n: usize,
        lambda: f64,
        #[serde(default = "rademacher")]
        law: LawConfig,
    },
    SpikedTensor {
        n: usize,
        q: usize,
        lambda: f64,
        #[serde(default = "rademacher")]
        law: LawConfig,
    },
    Iid {
        n: usize,
        #[serde(default = "rademacher")]
        law: LawConfig,
        #[serde(default = "one")]
        scale: f64,
    },
    Diluted {
        k: usize,
        inner: Box<PriorConfig>,
    },
}

impl PriorConfig {
    pub fn build(&self) -> Result<Prior> {
        match self {
            PriorConfig::SpikedMatrix { n, lambda, law } => priors::make_spiked_matrix_prior(*n, *lambda, (*law).into()),
            PriorConfig::SpikedTensor { n, q, lambda, law } => {
                priors::make_spiked_tensor_prior(*n, *q, *lambda, (*law).into())
            }
            PriorConfig::Iid { n, law, scale } => priors::make_iid_prior(*n, (*law).into(), *scale),
            PriorConfig::Diluted { k, inner } => priors::dilute(inner.build()?, *k),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub n: usize,
    pub lambda: f64,
    pub density: DensityConfig,
    #[serde(default = "rademacher")]
    pub law: LawConfig,
    #[serde(default = "no_corruption")]
    pub corruption: CorruptionKind,
    #[serde(default)]
    pub eta: f64,
    pub trials: usize,
    /// Even degree for the trace-power statistic.
    pub trace_power: Option<usize>,
}

fn no_corruption() -> CorruptionKind {
    CorruptionKind::None
}

impl SpectralConfig {
    pub fn build(&self) -> Result<SpikedMatrixConfig> {
        let corruption = match self.corruption {
            CorruptionKind::None => Corruption::None,
            CorruptionKind::Quantize => Corruption::Quantize,
            CorruptionKind::Censor => Corruption::Censor { eta: self.eta },
        };
        if self.corruption != CorruptionKind::Censor && self.eta != 0.0 {
            return Err(LcdfError::Validation("eta requires censor corruption".into()));
        }
        let mut c = SpikedMatrixConfig::new(self.n, self.lambda, self.density.build()?).with_corruption(corruption);
        c.spike_law = self.law.into();
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub n: usize,
    pub lambda_grid: Vec<f64>,
    #[serde(default = "zero_eta")]
    pub eta: Vec<f64>,
    pub density: DensityConfig,
    #[serde(default = "rademacher")]
    pub law: LawConfig,
    #[serde(default = "no_corruption")]
    pub corruption: CorruptionKind,
    pub trials: usize,
}

fn zero_eta() -> Vec<f64> {
    vec![0.0]
}

impl ScanConfig {
    pub fn build(&self, seed: u64) -> Result<PhaseScanConfig> {
        Ok(PhaseScanConfig {
            n: self.n,
            lambda_grid: self.lambda_grid.clone(),
            eta: self.eta.clone(),
            density: self.density.build()?,
            spike_law: self.law.into(),
            corruption: self.corruption,
            trials: self.trials,
            seed,
        })
    }
}

impl<'de> Deserialize<'de> for CorruptionKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match String::deserialize(d)?.as_str() {
            "none" => Ok(CorruptionKind::None),
            "censor" => Ok(CorruptionKind::Censor),
            "quantize" => Ok(CorruptionKind::Quantize),
            other => Err(serde::de::Error::unknown_variant(other, &["none", "censor", "quantize"])),
        }
    }
}

impl ExperimentConfig {
    pub fn empty() -> Self {
        serde_json::from_str("{}").expect("empty config parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| LcdfError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn require<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T> {
        field
            .as_ref()
            .ok_or_else(|| LcdfError::Validation(format!("config is missing `{name}`")))
    }
}
