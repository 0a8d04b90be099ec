//! Spiked Wigner simulations: `Y = (lambda / sqrt n) x x^T + W` with
//! i.i.d. noise from a density, optional censoring or sign quantization,
//! entrywise score transforms and top-eigenvalue statistics.

mod eigen;

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::DensitySpec;
use crate::error::{domain, LcdfError, Result};
use crate::numeric::NeumaierSum;
use crate::priors::SpikeLaw;
use crate::rng::{stream, StreamRng};
use rand::Rng;

pub use eigen::top_eigenvalue;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Corruption {
    None,
    Censor { eta: f64 },
    Quantize,
}

#[derive(Debug, Clone)]
pub struct SpikedMatrixConfig {
    pub n: usize,
    pub lambda: f64,
    pub density: DensitySpec,
    pub spike_law: SpikeLaw,
    pub corruption: Corruption,
    pub zero_diagonal: bool,
}

impl SpikedMatrixConfig {
    pub fn new(n: usize, lambda: f64, density: DensitySpec) -> Self {
        SpikedMatrixConfig {
            n,
            lambda,
            density,
            spike_law: SpikeLaw::Rademacher,
            corruption: Corruption::None,
            zero_diagonal: true,
        }
    }

    pub fn with_corruption(mut self, c: Corruption) -> Self {
        self.corruption = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return domain(format!("n = {} must be at least 2", self.n));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return domain(format!("lambda = {} must be finite and non-negative", self.lambda));
        }
        if let Corruption::Censor { eta } = self.corruption {
            if !(0.0..=1.0).contains(&eta) {
                return domain(format!("eta = {eta} outside [0, 1]"));
            }
        }
        self.spike_law.validate()?;
        self.density.validate()
    }
}

/// Observed matrix with its censoring mask (`true` marks a censored entry).
#[derive(Debug, Clone)]
pub struct SpikedSample {
    pub y: DMatrix<f64>,
    pub mask: Option<DMatrix<bool>>,
    pub x: Vec<f64>,
}

/// Draws the matrix from stream 0 of `seed`.
pub fn sample_spiked_matrix(config: &SpikedMatrixConfig, seed: u64) -> Result<SpikedSample> {
    sample_spiked_matrix_with(config, &mut stream(seed, 0))
}

/// Draws the spike, then the upper-triangle noise row by row, then the mask.
pub fn sample_spiked_matrix_with(config: &SpikedMatrixConfig, rng: &mut StreamRng) -> Result<SpikedSample> {
    config.validate()?;
    let n = config.n;
    let x: Vec<f64> = (0..n).map(|_| config.spike_law.sample(rng)).collect();
    let c = config.lambda / (n as f64).sqrt();
    let mut y = DMatrix::zeros(n, n);
    for i in 0..n {
        let start = if config.zero_diagonal { i + 1 } else { i };
        for j in start..n {
            let v = c * x[i] * x[j] + config.density.sample(rng)?;
            y[(i, j)] = v;
            y[(j, i)] = v;
        }
    }
    let mut mask = None;
    match config.corruption {
        Corruption::None => {}
        Corruption::Quantize => {
            for i in 0..n {
                for j in i..n {
                    if i == j && config.zero_diagonal {
                        continue;
                    }
                    let s = if y[(i, j)] >= 0.0 { 1.0 } else { -1.0 };
                    y[(i, j)] = s;
                    y[(j, i)] = s;
                }
            }
        }
        Corruption::Censor { eta } => {
            let mut m = DMatrix::from_element(n, n, false);
            for i in 0..n {
                for j in i..n {
                    if i == j && config.zero_diagonal {
                        continue;
                    }
                    if rng.random::<f64>() < eta {
                        m[(i, j)] = true;
                        m[(j, i)] = true;
                        y[(i, j)] = 0.0;
                        y[(j, i)] = 0.0;
                    }
                }
            }
            mask = Some(m);
        }
    }
    Ok(SpikedSample { y, mask, x })
}

/// Entrywise score `-p'/p`; censored entries and a zero diagonal map to 0.
pub fn apply_score_transform(sample: &SpikedSample, density: &DensitySpec, zero_diagonal: bool) -> DMatrix<f64> {
    let n = sample.y.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            if (i == j && zero_diagonal) || sample.mask.as_ref().is_some_and(|m| m[(i, j)]) {
                continue;
            }
            let v = density.score(sample.y[(i, j)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Matrix the statistic is computed on: the raw sign matrix under
/// quantization, otherwise the score transform.
pub fn statistic_matrix(config: &SpikedMatrixConfig, sample: &SpikedSample) -> DMatrix<f64> {
    match config.corruption {
        Corruption::Quantize => sample.y.clone(),
        _ => apply_score_transform(sample, &config.density, config.zero_diagonal),
    }
}

/// `lambda_max(M) / sqrt n`.
pub fn normalized_top_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(top_eigenvalue(m)? / (m.nrows() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Planted,
    Null,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestOutcome {
    pub decision: Decision,
    pub statistic: f64,
    pub threshold: f64,
}

/// `sqrt F + lambda F / 2 + 1 / (2 lambda)`.
pub fn eigenvalue_threshold(lambda: f64, fisher: f64) -> f64 {
    fisher.sqrt() + 0.5 * lambda * fisher + 0.5 / lambda
}

/// Thresholds `lambda_max(f(Y)) / sqrt n` for the score transform `f`.
pub fn eigenvalue_test(sample: &SpikedSample, lambda: f64, density: &DensitySpec) -> Result<TestOutcome> {
    if !(lambda > 0.0) {
        return domain(format!("lambda = {lambda} must be positive"));
    }
    let fisher = density.fisher()?;
    let statistic = normalized_top_eigenvalue(&apply_score_transform(sample, density, true))?;
    let threshold = eigenvalue_threshold(lambda, fisher);
    Ok(TestOutcome {
        decision: if statistic > threshold { Decision::Planted } else { Decision::Null },
        statistic,
        threshold,
    })
}

/// `Tr((M / sqrt n)^D)` for even `D`, as `||(M / sqrt n)^{D/2}||_F^2`.
pub fn trace_power_statistic(m: &DMatrix<f64>, d: usize) -> Result<f64> {
    let n = m.nrows();
    if d == 0 || d % 2 == 1 || d > n {
        return domain(format!("D = {d} must be even with 2 <= D <= n = {n}"));
    }
    let a = m / (n as f64).sqrt();
    let mut p = a.clone();
    for _ in 1..d / 2 {
        p = &p * &a;
    }
    Ok(p.iter().map(|v| v * v).collect::<NeumaierSum>().value())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    None,
    Censor,
    Quantize,
}

#[derive(Debug, Clone)]
pub struct PhaseScanConfig {
    pub n: usize,
    pub lambda_grid: Vec<f64>,
    /// Censoring levels; must be `[0]` unless `corruption` is `Censor`.
    pub eta: Vec<f64>,
    pub density: DensitySpec,
    pub spike_law: SpikeLaw,
    pub corruption: CorruptionKind,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub lambda: f64,
    pub eta: f64,
    pub n: usize,
    pub trials: usize,
    pub mean_lmax: f64,
    pub stderr_lmax: f64,
    pub bulk_edge_estimate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaSummary {
    pub eta: f64,
    /// Limit of the bulk edge of the statistic matrix.
    pub bulk_edge_theory: f64,
    /// Mean and standard deviation of the statistic at `lambda = 0`.
    pub null_mean: f64,
    pub null_sd: f64,
    /// Predicted asymptotic detection threshold.
    pub predicted_threshold: f64,
    /// First grid `lambda` whose mean exceeds `null_mean + 3 null_sd`.
    pub transition_estimate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseScan {
    /// Set for censored and quantized scans, whose thresholds are conjectural.
    pub conjecture_probe: bool,
    pub statistic: &'static str,
    pub points: Vec<ScanPoint>,
    pub summaries: Vec<EtaSummary>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().copied().collect::<NeumaierSum>().value() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).collect::<NeumaierSum>().value() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Statistic for `trials` draws; trial `t` uses stream `t`, shared across
/// grid points so that scans are paired.
pub fn statistic_trials(config: &SpikedMatrixConfig, trials: usize, seed: u64) -> Result<Vec<f64>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = sample_spiked_matrix_with(config, &mut stream(seed, t as u64))?;
            normalized_top_eigenvalue(&statistic_matrix(config, &s))
        })
        .collect()
}

pub fn phase_scan(cfg: &PhaseScanConfig) -> Result<PhaseScan> {
    if cfg.lambda_grid.is_empty() || cfg.eta.is_empty() {
        return domain("empty grid");
    }
    if cfg.trials < 2 {
        return domain("phase scan needs at least two trials per point");
    }
    if cfg.corruption != CorruptionKind::Censor && cfg.eta.iter().any(|&e| e != 0.0) {
        return Err(LcdfError::Validation("eta > 0 requires censor corruption".into()));
    }
    let fisher = cfg.density.fisher()?;
    let mut points = Vec::new();
    let mut summaries = Vec::new();
    for &eta in &cfg.eta {
        let corruption = match cfg.corruption {
            CorruptionKind::None => Corruption::None,
            CorruptionKind::Censor => Corruption::Censor { eta },
            CorruptionKind::Quantize => Corruption::Quantize,
        };
        let base = SpikedMatrixConfig {
            n: cfg.n,
            lambda: 0.0,
            density: cfg.density.clone(),
            spike_law: cfg.spike_law,
            corruption,
            zero_diagonal: true,
        };
        let (bulk_edge_theory, predicted_threshold) = match cfg.corruption {
            CorruptionKind::Quantize => {
                let p0 = cfg.density.p_at_zero();
                (2.0, 1.0 / (2.0 * p0))
            }
            _ => {
                let f = (1.0 - eta) * fisher;
                (2.0 * f.sqrt(), 1.0 / f.sqrt())
            }
        };
        let (null_mean, null_sd) = mean_sd(&statistic_trials(&base, cfg.trials, cfg.seed)?);
        let mut transition_estimate = None;
        for &lambda in &cfg.lambda_grid {
            let c = SpikedMatrixConfig { lambda, ..base.clone() };
            let v = statistic_trials(&c, cfg.trials, cfg.seed)?;
            let (m, sd) = mean_sd(&v);
            if transition_estimate.is_none() && m > null_mean + 3.0 * null_sd {
                transition_estimate = Some(lambda);
            }
            points.push(ScanPoint {
                lambda,
                eta,
                n: cfg.n,
                trials: cfg.trials,
                mean_lmax: m,
                stderr_lmax: sd / (cfg.trials as f64).sqrt(),
                bulk_edge_estimate: null_mean,
            });
        }
        summaries.push(EtaSummary {
            eta,
            bulk_edge_theory,
            null_mean,
            null_sd,
            predicted_threshold,
            transition_estimate,
        });
    }
    Ok(PhaseScan {
        conjecture_probe: cfg.corruption != CorruptionKind::None,
        statistic: match cfg.corruption {
            CorruptionKind::Quantize => "raw sign matrix",
            _ => "score transform",
        },
        points,
        summaries,
    })
}

/// Writes the scan points as CSV with shortest round-trip floats.
pub fn write_scan_csv(points: &[ScanPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| LcdfError::Io(e.into()))?;
    for p in points {
        w.serialize(p).map_err(|e| LcdfError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
