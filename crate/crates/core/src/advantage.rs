//! Monte Carlo estimators of squared advantages.
//!
//! Every estimator averages a function of an independent pair `(x1, x2)` of
//! prior draws. Trial `t` draws `x1` from stream `2t` and `x2` from stream
//! `2t + 1` of the master seed, so estimators run with the same seed see the
//! same pairs and their differences and ratios are paired. Per-trial values
//! are reduced in trial order, so results do not depend on the thread count.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{Channel, DensityFamily};
use crate::error::{domain, LcdfError, Result};
use crate::numeric::special::ln_gamma;
use crate::numeric::NeumaierSum;
use crate::priors::{binomial, check_assumptions, AssumptionBounds, Prior, SpikeLaw};
use crate::rng::stream;
use crate::truncexp::trunc_exp;

const BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    SubsetFormula,
    ExpBound,
    Univ,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdvantageEstimate {
    pub estimator: Estimator,
    pub degree: usize,
    pub trials: usize,
    pub mean: f64,
    pub std_error: f64,
    /// Mean with the largest 0.1% of trials removed.
    pub trimmed_mean: f64,
    /// Set when `trimmed_mean` and `mean` differ by more than 20%.
    pub unstable: bool,
}

impl AdvantageEstimate {
    pub fn from_values(estimator: Estimator, degree: usize, values: &[f64]) -> Self {
        let n = values.len();
        let mean = mean(values);
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).collect::<NeumaierSum>().value() / (n - 1) as f64
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let drop = n / 1000;
        let trimmed_mean = mean_of(&sorted[..n - drop]);
        let unstable = (trimmed_mean - mean).abs() > 0.2 * mean.abs();
        AdvantageEstimate {
            estimator,
            degree,
            trials: n,
            mean,
            std_error: (var / n as f64).sqrt(),
            trimmed_mean,
            unstable,
        }
    }
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().copied().collect::<NeumaierSum>().value() / v.len() as f64
}

fn mean(v: &[f64]) -> f64 {
    mean_of(v)
}

/// Mean and standard error of `a_t - b_t` over shared trials.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let e = AdvantageEstimate::from_values(Estimator::SubsetFormula, 0, &d);
    (e.mean, e.std_error)
}

/// `sum_{d <= D} e_d(r)`; `D > N` is clamped to `N`, which is exact.
pub fn esp_prefix_sum(r: &[f64], d: usize) -> f64 {
    esp_values(r, d).into_iter().collect::<NeumaierSum>().value()
}

/// Elementary symmetric polynomials `e_0, ..., e_D` of `r` (clamped to
/// `D <= N`), each accumulated with a compensation term.
pub fn esp_values(r: &[f64], d: usize) -> Vec<f64> {
    let d = d.min(r.len());
    let mut hi = vec![0.0; d + 1];
    let mut lo = vec![0.0; d + 1];
    hi[0] = 1.0;
    for (i, &ri) in r.iter().enumerate() {
        for k in (1..=d.min(i + 1)).rev() {
            let add = ri * (hi[k - 1] + lo[k - 1]);
            let s = hi[k] + add;
            let bb = s - hi[k];
            let err = (hi[k] - (s - bb)) + (add - bb);
            hi[k] = s;
            lo[k] += err;
        }
    }
    hi.iter().zip(&lo).map(|(a, b)| a + b).collect()
}

fn expensive_overlap(ch: &Channel) -> bool {
    match ch {
        Channel::Additive(d) => !matches!(d.family, DensityFamily::Gaussian),
        Channel::Bernoulli { .. } => false,
        Channel::Censored { inner, .. } => expensive_overlap(inner),
        Channel::ExpFamily(_) | Channel::Quantized(_) => true,
    }
}

/// Overlap evaluator with a per-batch memo for quadrature-backed channels.
struct OverlapCache<'a> {
    channel: &'a Channel,
    memo: Option<HashMap<(u64, u64), f64>>,
}

impl<'a> OverlapCache<'a> {
    fn new(channel: &'a Channel) -> Self {
        OverlapCache {
            channel,
            memo: expensive_overlap(channel).then(HashMap::new),
        }
    }

    fn overlaps(&mut self, x1: &[f64], x2: &[f64], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for (i, (&a, &b)) in x1.iter().zip(x2).enumerate() {
            let r = match &mut self.memo {
                None => self.channel.overlap(a, b),
                Some(m) => {
                    let key = (a.to_bits(), b.to_bits());
                    match m.get(&key) {
                        Some(v) => Ok(*v),
                        None => {
                            let v = self.channel.overlap(a, b);
                            if let Ok(v) = v {
                                m.insert(key, v);
                            }
                            v
                        }
                    }
                }
            };
            match r {
                Ok(v) => out.push(v),
                Err(LcdfError::Domain(msg)) => return domain(format!("coordinate {i}: {msg}")),
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// Runs `trials` paired trials and returns `k` columns of per-trial values.
/// `f` receives the pair, a scratch state created once per batch, and the
/// output row.
pub fn paired_columns<S, I, F>(prior: &Prior, trials: usize, seed: u64, k: usize, init: I, f: F) -> Result<Vec<Vec<f64>>>
where
    I: Fn() -> S + Sync,
    F: Fn(&[f64], &[f64], &mut S, &mut [f64]) -> Result<()> + Sync,
{
    if trials == 0 {
        return domain("at least one trial is required");
    }
    let batches = trials.div_ceil(BATCH);
    let rows: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| -> Result<Vec<f64>> {
            let mut state = init();
            let (mut x1, mut x2) = (Vec::new(), Vec::new());
            let lo = b * BATCH;
            let hi = (lo + BATCH).min(trials);
            let mut out = vec![0.0; (hi - lo) * k];
            for (j, t) in (lo..hi).enumerate() {
                prior.sample_into(&mut stream(seed, 2 * t as u64), &mut x1);
                prior.sample_into(&mut stream(seed, 2 * t as u64 + 1), &mut x2);
                f(&x1, &x2, &mut state, &mut out[j * k..(j + 1) * k])?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::with_capacity(trials); k];
    for row in rows {
        for chunk in row.chunks(k) {
            for (c, v) in cols.iter_mut().zip(chunk) {
                c.push(*v);
            }
        }
    }
    Ok(cols)
}

fn require_even(d: usize) -> Result<()> {
    if d % 2 == 1 {
        return domain(format!("degree {d} must be even"));
    }
    Ok(())
}

fn inner(x1: &[f64], x2: &[f64]) -> f64 {
    x1.iter().zip(x2).map(|(a, b)| a * b).collect::<NeumaierSum>().value()
}

/// Monte Carlo estimate of `CAdv^2_{<=D}` via the subset-product formula.
pub fn cadv_mc(prior: &Prior, channel: &Channel, d: usize, trials: usize, seed: u64) -> Result<AdvantageEstimate> {
    let cols = paired_columns(
        prior,
        trials,
        seed,
        1,
        || (OverlapCache::new(channel), Vec::new()),
        |x1, x2, (cache, r), out| {
            cache.overlaps(x1, x2, r)?;
            out[0] = esp_prefix_sum(r, d);
            Ok(())
        },
    )?;
    Ok(AdvantageEstimate::from_values(Estimator::SubsetFormula, d, &cols[0]))
}

/// Monte Carlo estimate of the upper bound `E exp^{<=D}(sum_i R_i)`.
pub fn cadv_exp_bound_mc(prior: &Prior, channel: &Channel, d: usize, trials: usize, seed: u64) -> Result<AdvantageEstimate> {
    require_even(d)?;
    let cols = paired_columns(
        prior,
        trials,
        seed,
        1,
        || (OverlapCache::new(channel), Vec::new()),
        |x1, x2, (cache, r), out| {
            cache.overlaps(x1, x2, r)?;
            out[0] = trunc_exp(r.iter().copied().collect::<NeumaierSum>().value(), d)?;
            Ok(())
        },
    )?;
    Ok(AdvantageEstimate::from_values(Estimator::ExpBound, d, &cols[0]))
}

/// Monte Carlo estimate of `Univ_{<=D}(X, sigma2) = E exp^{<=D}(<x1, x2> / sigma2)`.
pub fn univ_mc(prior: &Prior, sigma2: f64, d: usize, trials: usize, seed: u64) -> Result<AdvantageEstimate> {
    require_even(d)?;
    if !(sigma2 > 0.0) {
        return domain(format!("sigma2 = {sigma2} must be positive"));
    }
    let cols = paired_columns(
        prior,
        trials,
        seed,
        1,
        || (),
        |x1, x2, _, out| {
            out[0] = trunc_exp(inner(x1, x2) / sigma2, d)?;
            Ok(())
        },
    )?;
    Ok(AdvantageEstimate::from_values(Estimator::Univ, d, &cols[0]))
}

/// Subset-formula estimates for several channels on one shared pair stream.
pub fn cadv_mc_paired(
    prior: &Prior,
    channels: &[Channel],
    d: usize,
    trials: usize,
    seed: u64,
) -> Result<(Vec<AdvantageEstimate>, Vec<Vec<f64>>)> {
    let cols = paired_columns(
        prior,
        trials,
        seed,
        channels.len(),
        || (channels.iter().map(OverlapCache::new).collect::<Vec<_>>(), Vec::new()),
        |x1, x2, (caches, r), out| {
            for (c, o) in caches.iter_mut().zip(out.iter_mut()) {
                c.overlaps(x1, x2, r)?;
                *o = esp_prefix_sum(r, d);
            }
            Ok(())
        },
    )?;
    let est = cols
        .iter()
        .map(|c| AdvantageEstimate::from_values(Estimator::SubsetFormula, d, c))
        .collect();
    Ok((est, cols))
}

/// Atoms `(value, mass)` of a discrete spike law, scaled.
pub fn law_atoms(law: &SpikeLaw, scale: f64) -> Option<Vec<(f64, f64)>> {
    match *law {
        SpikeLaw::Rademacher => Some(vec![(scale, 0.5), (-scale, 0.5)]),
        SpikeLaw::SparseRademacher { s } => {
            let a = scale / s.sqrt();
            Some(vec![(a, 0.5 * s), (-a, 0.5 * s), (0.0, 1.0 - s)])
        }
        SpikeLaw::TwoPoint { p } => {
            let a = ((1.0 - p) / p).sqrt();
            let b = (p / (1.0 - p)).sqrt();
            Some(vec![(scale * a, p), (-scale * b, 1.0 - p)])
        }
        SpikeLaw::UniformPm => None,
    }
}

/// Exact `CAdv^2_{<=D}` for an i.i.d. prior with a discrete law:
/// `sum_{d <= D} C(N, d) m^d` with `m = E R(x1, x2)` over independent draws.
pub fn cadv_iid_exact(prior: &Prior, channel: &Channel, d: usize) -> Result<f64> {
    let (n, law, scale) = match prior {
        Prior::Iid { n, law, scale } => (*n, law, *scale),
        other => return Err(LcdfError::Unsupported(format!("exact formula needs an iid prior, got {}", other.name()))),
    };
    let atoms = law_atoms(law, scale)
        .ok_or_else(|| LcdfError::Unsupported(format!("exact formula needs a discrete law, got {law:?}")))?;
    let mut m = NeumaierSum::new();
    for &(a, pa) in &atoms {
        for &(b, pb) in &atoms {
            m.add(pa * pb * channel.overlap(a, b)?);
        }
    }
    Ok(esp_prefix_sum(&vec![m.value(); n], d))
}

/// Exact `Univ_{<=D}` for an i.i.d. Rademacher prior with scale `s`:
/// `<x1, x2> = s^2 (2K - N)` with `K ~ Bin(N, 1/2)`.
pub fn univ_rademacher_exact(n: usize, scale: f64, sigma2: f64, d: usize) -> Result<f64> {
    require_even(d)?;
    let mut acc = NeumaierSum::new();
    let log_half_n = -(n as f64) * std::f64::consts::LN_2;
    for k in 0..=n {
        let logc = ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
        let w = (logc + log_half_n).exp();
        acc.add(w * trunc_exp(scale * scale * (2.0 * k as f64 - n as f64) / sigma2, d)?);
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Serialize)]
pub struct UniversalityReport {
    pub degree: usize,
    pub fisher_information: f64,
    pub cadv: AdvantageEstimate,
    pub univ_d: AdvantageEstimate,
    pub univ_d_minus_2: AdvantageEstimate,
    /// `cadv / univ_D`, paired.
    pub ratio_d: f64,
    /// `cadv / univ_{D-2}`, paired.
    pub ratio_d_minus_2: f64,
    /// Paired mean and standard error of `univ_D - univ_{D-2}`.
    pub excess: (f64, f64),
    /// Whether the prior passed the assumption audit with default bounds.
    pub prior_audit_pass: bool,
}

/// Sandwich diagnostic comparing `CAdv^2_{<=D}` with the Gaussian functional
/// at the matched noise level `1/F`, all on a shared pair stream.
pub fn universality_report(prior: &Prior, channel: &Channel, d: usize, trials: usize, seed: u64) -> Result<UniversalityReport> {
    require_even(d)?;
    if d < 2 {
        return domain("universality report needs D >= 2");
    }
    let f = channel.fisher_information()?;
    if !(f > 0.0) {
        return domain(format!("{} has zero Fisher information", channel.name()));
    }
    let audit = check_assumptions(prior, 32, seed ^ 0x5eed, &AssumptionBounds::default());
    let prior_audit_pass = audit.p1 && audit.p2;
    if !prior_audit_pass {
        log::warn!("prior {} fails the P1/P2 audit; the sandwich need not hold", prior.name());
    }
    let sigma2 = 1.0 / f;
    let cols = paired_columns(
        prior,
        trials,
        seed,
        3,
        || (OverlapCache::new(channel), Vec::new()),
        |x1, x2, (cache, r), out| {
            cache.overlaps(x1, x2, r)?;
            out[0] = esp_prefix_sum(r, d);
            let s = inner(x1, x2) / sigma2;
            out[1] = trunc_exp(s, d)?;
            out[2] = trunc_exp(s, d - 2)?;
            Ok(())
        },
    )?;
    let cadv = AdvantageEstimate::from_values(Estimator::SubsetFormula, d, &cols[0]);
    let univ_d = AdvantageEstimate::from_values(Estimator::Univ, d, &cols[1]);
    let univ_d_minus_2 = AdvantageEstimate::from_values(Estimator::Univ, d - 2, &cols[2]);
    Ok(UniversalityReport {
        degree: d,
        fisher_information: f,
        ratio_d: cadv.mean / univ_d.mean,
        ratio_d_minus_2: cadv.mean / univ_d_minus_2.mean,
        excess: paired_difference(&cols[1], &cols[2]),
        cadv,
        univ_d,
        univ_d_minus_2,
        prior_audit_pass,
    })
}

/// `C(k, t) >= (k^t / t!) exp(-t^2 / k)`, compared in log space.
pub fn binom_lb_holds(k: usize, t: usize) -> bool {
    let lhs = (binomial(k, t) as f64).ln();
    let rhs = t as f64 * (k as f64).ln() - ln_gamma(t as f64 + 1.0) - (t * t) as f64 / k as f64;
    lhs >= rhs
}
