//! Cumulant generating functions of natural exponential families.
//!
//! The channel at signal `x` is the member of the family with mean `mu + x`,
//! reached at natural parameter `theta(x) = psi'^{-1}(mu + x)`.

use std::fmt;

use crate::channels::density::RealFn;
use crate::error::{LcdfError, Result};
use crate::numeric::NeumaierSum;

#[derive(Clone)]
pub struct CustomCgf {
    pub name: String,
    pub psi: RealFn,
    pub dpsi: RealFn,
    pub d2psi: Option<RealFn>,
    /// Open interval of admissible `theta`.
    pub theta_domain: (f64, f64),
    /// Base measure as atoms `(y, mass)`, when it is discrete and known.
    pub base_atoms: Option<Vec<(f64, f64)>>,
}

impl fmt::Debug for CustomCgf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCgf")
            .field("name", &self.name)
            .field("theta_domain", &self.theta_domain)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum CgfSpec {
    /// Base `N(0, variance)`, `psi = variance theta^2 / 2`.
    Gaussian { variance: f64 },
    /// Base `Bernoulli(c)`, `psi = log(1 - c + c e^theta)`.
    Bernoulli { c: f64 },
    /// Base `Poisson(mean)`, `psi = mean (e^theta - 1)`.
    Poisson { mean: f64 },
    Custom(CustomCgf),
}

/// How expectations under the base measure are evaluated.
pub enum BaseMeasure {
    Gaussian { variance: f64 },
    Atoms(Vec<(f64, f64)>),
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl CgfSpec {
    pub fn name(&self) -> String {
        match self {
            CgfSpec::Gaussian { .. } => "gaussian".into(),
            CgfSpec::Bernoulli { .. } => "bernoulli".into(),
            CgfSpec::Poisson { .. } => "poisson".into(),
            CgfSpec::Custom(c) => c.name.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            CgfSpec::Gaussian { variance } => *variance > 0.0,
            CgfSpec::Bernoulli { c } => *c > 0.0 && *c < 1.0,
            CgfSpec::Poisson { mean } => *mean > 0.0,
            CgfSpec::Custom(c) => {
                let (lo, hi) = c.theta_domain;
                lo < 0.0 && hi > 0.0 && (c.psi)(0.0).abs() < 1e-12
            }
        };
        if !ok {
            return Err(LcdfError::Validation(format!("invalid {} cumulant parameters", self.name())));
        }
        if self.variance() <= 0.0 {
            return Err(LcdfError::Validation(format!("{} has non-positive variance", self.name())));
        }
        Ok(())
    }

    pub fn psi(&self, t: f64) -> f64 {
        match self {
            CgfSpec::Gaussian { variance } => 0.5 * variance * t * t,
            CgfSpec::Bernoulli { c } => {
                if t > 0.0 {
                    t + (c + (1.0 - c) * (-t).exp()).ln()
                } else {
                    (c * t.exp_m1()).ln_1p()
                }
            }
            CgfSpec::Poisson { mean } => mean * t.exp_m1(),
            CgfSpec::Custom(c) => (c.psi)(t),
        }
    }

    pub fn dpsi(&self, t: f64) -> f64 {
        match self {
            CgfSpec::Gaussian { variance } => variance * t,
            CgfSpec::Bernoulli { c } => sigmoid(t + (c / (1.0 - c)).ln()),
            CgfSpec::Poisson { mean } => mean * t.exp(),
            CgfSpec::Custom(c) => (c.dpsi)(t),
        }
    }

    pub fn d2psi(&self, t: f64) -> f64 {
        match self {
            CgfSpec::Gaussian { variance } => *variance,
            CgfSpec::Bernoulli { .. } => {
                let p = self.dpsi(t);
                p * (1.0 - p)
            }
            CgfSpec::Poisson { mean } => mean * t.exp(),
            CgfSpec::Custom(c) => match &c.d2psi {
                Some(f) => f(t),
                None => {
                    let h = 1e-5 * (1.0 + t.abs());
                    let d = &c.dpsi;
                    (-d(t + 2.0 * h) + 8.0 * d(t + h) - 8.0 * d(t - h) + d(t - 2.0 * h)) / (12.0 * h)
                }
            },
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            CgfSpec::Gaussian { .. } => 0.0,
            CgfSpec::Bernoulli { c } => *c,
            CgfSpec::Poisson { mean } => *mean,
            CgfSpec::Custom(_) => self.dpsi(0.0),
        }
    }

    pub fn variance(&self) -> f64 {
        self.d2psi(0.0)
    }

    pub fn theta_domain(&self) -> (f64, f64) {
        match self {
            CgfSpec::Custom(c) => c.theta_domain,
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Open interval of admissible signals `x`, i.e. `psi'(domain) - mu`.
    pub fn signal_domain(&self) -> (f64, f64) {
        match self {
            CgfSpec::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            CgfSpec::Bernoulli { c } => (-c, 1.0 - c),
            CgfSpec::Poisson { mean } => (-mean, f64::INFINITY),
            CgfSpec::Custom(c) => {
                let (lo, hi) = c.theta_domain;
                let mu = self.mean();
                (limit(&c.dpsi, lo, false) - mu, limit(&c.dpsi, hi, true) - mu)
            }
        }
    }

    pub fn base_measure(&self) -> Option<BaseMeasure> {
        match self {
            CgfSpec::Gaussian { variance } => Some(BaseMeasure::Gaussian { variance: *variance }),
            CgfSpec::Bernoulli { c } => Some(BaseMeasure::Atoms(vec![(0.0, 1.0 - c), (1.0, *c)])),
            CgfSpec::Poisson { mean } => {
                let kmax = (mean + 40.0 * mean.sqrt() + 40.0).ceil() as usize;
                let mut atoms = Vec::with_capacity(kmax + 1);
                let mut pmf = (-mean).exp();
                for k in 0..=kmax {
                    if k > 0 {
                        pmf *= mean / k as f64;
                    }
                    atoms.push((k as f64, pmf));
                }
                Some(BaseMeasure::Atoms(atoms))
            }
            CgfSpec::Custom(c) => c.base_atoms.clone().map(BaseMeasure::Atoms),
        }
    }

    /// Solves `psi'(theta) = mu + x`: geometric bracket expansion from 0,
    /// bisection to width `1e-14`, then two Newton steps.
    pub fn theta_of_x(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let (slo, shi) = self.signal_domain();
        if !(x > slo && x < shi) {
            return Err(LcdfError::Domain(format!(
                "signal {x} outside ({slo}, {shi}) for {} family",
                self.name()
            )));
        }
        let target = self.mean() + x;
        let (tlo, thi) = self.theta_domain();
        let mut lo: f64 = 0.0;
        let mut hi: f64 = 0.0;
        let mut step = 1.0;
        let mut found = false;
        for _ in 0..200 {
            if x > 0.0 {
                let cand = if thi.is_finite() { (hi + step).min(0.5 * (hi + thi)) } else { hi + step };
                lo = hi;
                hi = cand;
                if self.dpsi(hi) >= target {
                    found = true;
                    break;
                }
            } else {
                let cand = if tlo.is_finite() { (lo - step).max(0.5 * (lo + tlo)) } else { lo - step };
                hi = lo;
                lo = cand;
                if self.dpsi(lo) <= target {
                    found = true;
                    break;
                }
            }
            step *= 2.0;
        }
        if !found {
            return Err(LcdfError::Domain(format!(
                "could not bracket psi'(theta) = {target}, searched [{lo}, {hi}]"
            )));
        }
        while hi - lo > 1e-14 * (1.0f64).max(lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.dpsi(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..2 {
            let v = self.d2psi(t);
            if v > 0.0 {
                let next = t - (self.dpsi(t) - target) / v;
                if next.is_finite() && next > tlo && next < thi {
                    t = next;
                }
            }
        }
        Ok(t)
    }

    /// `exp(psi(t1 + t2) - psi(t1) - psi(t2)) - 1` at `t_i = theta(x_i)`.
    pub fn overlap(&self, x1: f64, x2: f64) -> Result<f64> {
        if x1 == 0.0 || x2 == 0.0 {
            return Ok(0.0);
        }
        let t1 = self.theta_of_x(x1)?;
        let t2 = self.theta_of_x(x2)?;
        let (lo, hi) = self.theta_domain();
        if !(t1 + t2 > lo && t1 + t2 < hi) {
            return Err(LcdfError::Domain(format!("theta({x1}) + theta({x2}) leaves the natural domain")));
        }
        let delta = self.psi(t1 + t2) - self.psi(t1) - self.psi(t2);
        Ok(delta.exp_m1())
    }

    pub fn likelihood_ratio(&self, x: f64, y: f64) -> Result<f64> {
        let t = self.theta_of_x(x)?;
        Ok((t * y - self.psi(t)).exp())
    }
}

fn limit(f: &RealFn, end: f64, upper: bool) -> f64 {
    if end.is_finite() {
        f(end)
    } else if upper {
        f(700.0)
    } else {
        f(-700.0)
    }
}

impl BaseMeasure {
    pub fn expect<G: FnMut(f64) -> f64>(&self, mut g: G) -> f64 {
        match self {
            BaseMeasure::Gaussian { variance } => {
                let d = crate::channels::density::DensitySpec::gaussian(variance.sqrt());
                d.expect(g)
            }
            BaseMeasure::Atoms(atoms) => atoms.iter().map(|&(y, w)| w * g(y)).collect::<NeumaierSum>().value(),
        }
    }
}
