//! Priors over signal vectors `x in R^N`.
//!
//! Matrix and tensor priors vectorize their index tuples in lexicographic
//! order: `(0,1), (0,2), ..., (1,2), ...`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;

use crate::error::{domain, LcdfError, Result};
use crate::rng::stream;

/// Scalar spike law with mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpikeLaw {
    Rademacher,
    /// `(1 - s) delta_0 + (s/2) delta_{1/sqrt s} + (s/2) delta_{-1/sqrt s}`.
    SparseRademacher { s: f64 },
    /// Continuous uniform on `[-sqrt 3, sqrt 3]`.
    UniformPm,
    /// `sqrt((1-p)/p)` with probability `p`, else `-sqrt(p/(1-p))`.
    TwoPoint { p: f64 },
}

impl SpikeLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SpikeLaw::SparseRademacher { s } => s > 0.0 && s <= 1.0,
            SpikeLaw::TwoPoint { p } => p > 0.0 && p < 1.0,
            _ => true,
        };
        if !ok {
            return Err(LcdfError::Validation(format!("invalid spike law {self:?}")));
        }
        let (m, v) = self.moments();
        if m.abs() > 1e-12 || (v - 1.0).abs() > 1e-12 {
            return Err(LcdfError::Validation(format!("spike law {self:?} has mean {m}, variance {v}")));
        }
        Ok(())
    }

    /// Analytic mean and second moment.
    pub fn moments(&self) -> (f64, f64) {
        match *self {
            SpikeLaw::Rademacher => (0.0, 1.0),
            SpikeLaw::SparseRademacher { s } => {
                let a = 1.0 / s.sqrt();
                (0.0, s * a * a)
            }
            SpikeLaw::UniformPm => (0.0, 3.0f64.sqrt().powi(2) / 3.0),
            SpikeLaw::TwoPoint { p } => {
                let (a, b) = two_point_atoms(p);
                (p * a - (1.0 - p) * b, p * a * a + (1.0 - p) * b * b)
            }
        }
    }

    pub fn bound(&self) -> f64 {
        match *self {
            SpikeLaw::Rademacher => 1.0,
            SpikeLaw::SparseRademacher { s } => 1.0 / s.sqrt(),
            SpikeLaw::UniformPm => 3.0f64.sqrt(),
            SpikeLaw::TwoPoint { p } => {
                let (a, b) = two_point_atoms(p);
                a.max(b)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SpikeLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SpikeLaw::SparseRademacher { s } => {
                let u: f64 = rng.random();
                if u < 0.5 * s {
                    1.0 / s.sqrt()
                } else if u < s {
                    -1.0 / s.sqrt()
                } else {
                    0.0
                }
            }
            SpikeLaw::UniformPm => 3.0f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            SpikeLaw::TwoPoint { p } => {
                let (a, b) = two_point_atoms(p);
                if rng.random::<f64>() < p {
                    a
                } else {
                    -b
                }
            }
        }
    }
}

fn two_point_atoms(p: f64) -> (f64, f64) {
    (((1.0 - p) / p).sqrt(), (p / (1.0 - p)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// `x_i = scale * pi_i` with `pi_i` i.i.d.
    Iid { n: usize, law: SpikeLaw, scale: f64 },
    /// Upper triangle of `(lambda / sqrt n) x x^T`.
    SpikedMatrix { n: usize, lambda: f64, law: SpikeLaw },
    /// Entries of `lambda n^{-q/4} x^{(x) q}` over `i_1 < ... < i_q`.
    SpikedTensor { n: usize, q: usize, lambda: f64, law: SpikeLaw },
    /// Each coordinate of `inner` repeated `k` times at scale `1/sqrt k`.
    Diluted { inner: Box<Prior>, k: usize },
    /// `inner` with draws violating the bounds replaced by zero.
    Truncated { inner: Box<Prior>, a: f64, b: Vec<(u32, f64)> },
    /// Point mass.
    Fixed(Vec<f64>),
    /// Finite support with weights.
    Discrete { support: Vec<Vec<f64>>, weights: Vec<f64> },
}

pub fn make_spiked_matrix_prior(n: usize, lambda: f64, law: SpikeLaw) -> Result<Prior> {
    if n < 2 || !(lambda > 0.0) {
        return domain(format!("spiked matrix prior needs n >= 2 and lambda > 0, got n={n}, lambda={lambda}"));
    }
    law.validate()?;
    Ok(Prior::SpikedMatrix { n, lambda, law })
}

pub fn make_spiked_tensor_prior(n: usize, q: usize, lambda: f64, law: SpikeLaw) -> Result<Prior> {
    if q < 3 || n < q {
        return domain(format!("spiked tensor prior needs q >= 3 and n >= q, got n={n}, q={q}"));
    }
    law.validate()?;
    Ok(Prior::SpikedTensor { n, q, lambda, law })
}

pub fn make_iid_prior(n: usize, law: SpikeLaw, scale: f64) -> Result<Prior> {
    if n == 0 {
        return domain("iid prior needs n >= 1");
    }
    law.validate()?;
    Ok(Prior::Iid { n, law, scale })
}

pub fn dilute(prior: Prior, k: usize) -> Result<Prior> {
    if k == 0 {
        return domain("dilution factor must be at least 1");
    }
    if k == 1 {
        return Ok(prior);
    }
    Ok(Prior::Diluted {
        inner: Box::new(prior),
        k,
    })
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

impl Prior {
    pub fn dim(&self) -> usize {
        match self {
            Prior::Iid { n, .. } => *n,
            Prior::SpikedMatrix { n, .. } => n * (n - 1) / 2,
            Prior::SpikedTensor { n, q, .. } => binomial(*n, *q),
            Prior::Diluted { inner, k } => inner.dim() * k,
            Prior::Truncated { inner, .. } => inner.dim(),
            Prior::Fixed(v) => v.len(),
            Prior::Discrete { support, .. } => support.first().map_or(0, Vec::len),
        }
    }

    /// Deterministic bound on `|x_i|`, when one is known.
    pub fn declared_a(&self) -> Option<f64> {
        match self {
            Prior::Iid { law, scale, .. } => Some(law.bound() * scale.abs()),
            Prior::SpikedMatrix { n, lambda, law } => Some(lambda * law.bound().powi(2) / (*n as f64).sqrt()),
            Prior::SpikedTensor { n, q, lambda, law } => {
                Some(lambda * (*n as f64).powf(-(*q as f64) / 4.0) * law.bound().powi(*q as i32))
            }
            Prior::Diluted { inner, k } => inner.declared_a().map(|a| a / (*k as f64).sqrt()),
            Prior::Truncated { inner, a, .. } => Some(inner.declared_a().map_or(*a, |b| b.min(*a))),
            Prior::Fixed(v) => Some(v.iter().fold(0.0f64, |m, x| m.max(x.abs()))),
            Prior::Discrete { support, .. } => Some(
                support
                    .iter()
                    .flat_map(|v| v.iter())
                    .fold(0.0f64, |m, x| m.max(x.abs())),
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Prior::Iid { law, .. } | Prior::SpikedMatrix { law, .. } | Prior::SpikedTensor { law, .. } => {
                law.validate()
            }
            Prior::Diluted { inner, .. } | Prior::Truncated { inner, .. } => inner.validate(),
            Prior::Fixed(_) => Ok(()),
            Prior::Discrete { support, weights } => {
                if support.is_empty() || support.len() != weights.len() {
                    return Err(LcdfError::Validation("discrete prior support and weights differ in length".into()));
                }
                let n = support[0].len();
                if support.iter().any(|v| v.len() != n) {
                    return Err(LcdfError::Validation("discrete prior vectors differ in length".into()));
                }
                let total: f64 = weights.iter().sum();
                if weights.iter().any(|w| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
                    return Err(LcdfError::Validation("discrete prior weights must be a pmf".into()));
                }
                Ok(())
            }
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        match self {
            Prior::Iid { n, law, scale } => out.extend((0..*n).map(|_| scale * law.sample(rng))),
            Prior::SpikedMatrix { n, lambda, law } => {
                let x: Vec<f64> = (0..*n).map(|_| law.sample(rng)).collect();
                let c = lambda / (*n as f64).sqrt();
                for i in 0..*n {
                    for j in i + 1..*n {
                        out.push(c * x[i] * x[j]);
                    }
                }
            }
            Prior::SpikedTensor { n, q, lambda, law } => {
                let x: Vec<f64> = (0..*n).map(|_| law.sample(rng)).collect();
                let c = lambda * (*n as f64).powf(-(*q as f64) / 4.0);
                for_each_combination(*n, *q, |idx| {
                    out.push(idx.iter().fold(c, |acc, &i| acc * x[i]));
                });
            }
            Prior::Diluted { inner, k } => {
                let mut base = Vec::new();
                inner.sample_into(rng, &mut base);
                let c = 1.0 / (*k as f64).sqrt();
                for v in base {
                    for _ in 0..*k {
                        out.push(c * v);
                    }
                }
            }
            Prior::Truncated { inner, a, b } => {
                inner.sample_into(rng, out);
                if violates(out, *a, b) {
                    out.iter_mut().for_each(|v| *v = 0.0);
                }
            }
            Prior::Fixed(v) => out.extend_from_slice(v),
            Prior::Discrete { support, weights } => {
                let idx = WeightedIndex::new(weights).expect("validated weights").sample(rng);
                out.extend_from_slice(&support[idx]);
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        self.sample_into(rng, &mut v);
        v
    }

    /// Draw from stream 0 of `seed`.
    pub fn sample_seeded(&self, seed: u64) -> Vec<f64> {
        self.sample(&mut stream(seed, 0))
    }

    pub fn name(&self) -> String {
        match self {
            Prior::Iid { n, law, scale } => format!("iid(n={n}, {law:?}, scale={scale})"),
            Prior::SpikedMatrix { n, lambda, law } => format!("spiked_matrix(n={n}, lambda={lambda}, {law:?})"),
            Prior::SpikedTensor { n, q, lambda, law } => {
                format!("spiked_tensor(n={n}, q={q}, lambda={lambda}, {law:?})")
            }
            Prior::Diluted { inner, k } => format!("diluted({}, k={k})", inner.name()),
            Prior::Truncated { inner, .. } => format!("truncated({})", inner.name()),
            Prior::Fixed(v) => format!("fixed(n={})", v.len()),
            Prior::Discrete { support, .. } => format!("discrete(|support|={})", support.len()),
        }
    }
}

/// Calls `f` on every increasing `q`-tuple from `0..n` in lexicographic order.
pub fn for_each_combination<F: FnMut(&[usize])>(n: usize, q: usize, mut f: F) {
    if q > n {
        return;
    }
    let mut idx: Vec<usize> = (0..q).collect();
    loop {
        f(&idx);
        let mut i = q;
        while i > 0 && idx[i - 1] == n - q + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..q {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `||x||_k` for `k >= 1`.
pub fn norm_k(x: &[f64], k: u32) -> f64 {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = x.iter().map(|v| (v.abs() / m).powi(k as i32)).sum();
    m * s.powf(1.0 / k as f64)
}

fn violates(x: &[f64], a: f64, b: &[(u32, f64)]) -> bool {
    let n = x.len() as f64;
    let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    sup > a
        || b
            .iter()
            .any(|&(k, bk)| norm_k(x, k) > bk * n.powf(1.0 / k as f64 - 0.25))
}

/// The moment orders audited by [`check_assumptions`].
pub const AUDIT_ORDERS: [u32; 6] = [2, 4, 6, 8, 10, 12];

#[derive(Debug, Clone)]
pub struct AssumptionBounds {
    pub a: f64,
    /// `B_k` for `k` in [`AUDIT_ORDERS`].
    pub b: [f64; 6],
}

impl Default for AssumptionBounds {
    fn default() -> Self {
        AssumptionBounds { a: 1.0, b: [2.0; 6] }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AssumptionReport {
    pub samples: usize,
    pub dim: usize,
    /// Largest `||x||_inf` seen.
    pub a_emp: f64,
    /// Largest `||x||_k N^{1/4 - 1/k}` seen, per order in [`AUDIT_ORDERS`].
    pub b_stats: Vec<(u32, f64)>,
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
}

pub fn check_assumptions(prior: &Prior, samples: usize, seed: u64, bounds: &AssumptionBounds) -> AssumptionReport {
    let samples = samples.max(1);
    let n = prior.dim() as f64;
    let mut a_emp = 0.0f64;
    let mut stats = [0.0f64; 6];
    let mut x = Vec::with_capacity(prior.dim());
    for t in 0..samples {
        let mut rng = stream(seed, t as u64);
        prior.sample_into(&mut rng, &mut x);
        a_emp = a_emp.max(x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        for (s, &k) in stats.iter_mut().zip(AUDIT_ORDERS.iter()) {
            *s = s.max(norm_k(&x, k) * n.powf(0.25 - 1.0 / k as f64));
        }
    }
    let ok = |range: std::ops::Range<usize>| range.into_iter().all(|i| stats[i] <= bounds.b[i]);
    AssumptionReport {
        samples,
        dim: prior.dim(),
        a_emp,
        b_stats: AUDIT_ORDERS.iter().copied().zip(stats).collect(),
        p1: a_emp <= bounds.a,
        p2: ok(0..3),
        p3: ok(3..6),
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ScalingAudit {
    pub dims: Vec<usize>,
    pub reports: Vec<AssumptionReport>,
    /// Least-squares slope of `log stat` against `log N`, per order.
    pub growth_exponents: Vec<(u32, f64)>,
    /// False when some statistic grows faster than `N^0.1`.
    pub pass: bool,
}

/// Audits a family of priors for growth of the `B_k` statistics with `N`,
/// since the assumptions are about constants uniform in `N`.
pub fn scaling_audit(priors: &[Prior], samples: usize, seed: u64, bounds: &AssumptionBounds) -> ScalingAudit {
    let reports: Vec<_> = priors.iter().map(|p| check_assumptions(p, samples, seed, bounds)).collect();
    let logn: Vec<f64> = reports.iter().map(|r| (r.dim as f64).ln()).collect();
    let mut growth = Vec::new();
    for (i, &k) in AUDIT_ORDERS.iter().enumerate() {
        let logs: Vec<f64> = reports.iter().map(|r| r.b_stats[i].1.max(1e-300).ln()).collect();
        growth.push((k, slope(&logn, &logs)));
    }
    let pass = growth.iter().all(|&(_, s)| s <= 0.1) && reports.iter().all(|r| r.p1 && r.p2 && r.p3);
    ScalingAudit {
        dims: reports.iter().map(|r| r.dim).collect(),
        reports,
        growth_exponents: growth,
        pass,
    }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spike_laws_are_standardized() {
        for law in [
            SpikeLaw::Rademacher,
            SpikeLaw::SparseRademacher { s: 0.1 },
            SpikeLaw::UniformPm,
            SpikeLaw::TwoPoint { p: 0.2 },
        ] {
            law.validate().unwrap();
        }
        assert!(SpikeLaw::SparseRademacher { s: 0.0 }.validate().is_err());
    }

    #[test]
    fn spike_law_sample_moments() {
        let n = 100_000;
        for law in [
            SpikeLaw::Rademacher,
            SpikeLaw::SparseRademacher { s: 0.1 },
            SpikeLaw::UniformPm,
            SpikeLaw::TwoPoint { p: 0.2 },
        ] {
            let mut rng = stream(11, 0);
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
            let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64;
            assert!(m.abs() < 4.0 / (n as f64).sqrt(), "{law:?} mean {m}");
            assert!((v - 1.0).abs() <= 4.0 * ((m4 - 1.0) / n as f64).sqrt(), "{law:?} var {v}");
        }
    }

    #[test]
    fn sparse_rademacher_zero_fraction() {
        let n = 100_000;
        let law = SpikeLaw::SparseRademacher { s: 0.1 };
        let mut rng = stream(5, 1);
        let zeros = (0..n).filter(|_| law.sample(&mut rng) == 0.0).count() as f64 / n as f64;
        let sd = (0.9 * 0.1 / n as f64).sqrt();
        assert!((zeros - 0.9).abs() < 3.0 * sd);
    }

    #[test]
    fn iid_rademacher_support() {
        let p = make_iid_prior(4, SpikeLaw::Rademacher, 1.0).unwrap();
        let x = p.sample_seeded(3);
        assert_eq!(x.len(), 4);
        assert!(x.iter().all(|v| v.abs() == 1.0));
        assert_eq!(p.sample_seeded(3), x);
    }

    #[test]
    fn dilution_examples() {
        let inner = make_iid_prior(2, SpikeLaw::Rademacher, 1.0).unwrap();
        let d = dilute(inner.clone(), 4).unwrap();
        let x = d.sample_seeded(8);
        assert_eq!(x.len(), 8);
        assert!(x.iter().all(|v| v.abs() == 0.5));
        assert!(x[..4].iter().all(|v| *v == x[0]) && x[4..].iter().all(|v| *v == x[4]));
        assert_eq!(dilute(inner.clone(), 1).unwrap(), inner);

        let inner = make_iid_prior(5, SpikeLaw::UniformPm, 1.0).unwrap();
        let base = inner.sample_seeded(2);
        let dil = dilute(inner, 3).unwrap().sample_seeded(2);
        assert!((norm_k(&dil, 2) - norm_k(&base, 2)).abs() < 1e-12);
        assert!((norm_k(&dil, 4).powi(4) - norm_k(&base, 4).powi(4) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn spiked_matrix_layout() {
        let p = make_spiked_matrix_prior(3, 1.0, SpikeLaw::Rademacher).unwrap();
        assert_eq!(p.dim(), 3);
        // reproduce with a fixed x = (1, 1, -1)
        let x = [1.0, 1.0, -1.0];
        let mut v = Vec::new();
        for i in 0..3 {
            for j in i + 1..3 {
                v.push(x[i] * x[j] / 3f64.sqrt());
            }
        }
        let s = 1.0 / 3f64.sqrt();
        assert_eq!(v, vec![s, -s, -s]);
        let drawn = p.sample_seeded(1);
        assert!(drawn.iter().all(|e| (e.abs() - s).abs() < 1e-15));
        assert!(drawn.iter().all(|e| e.abs() <= p.declared_a().unwrap() + 1e-15));
    }

    #[test]
    fn spiked_matrix_overlap_identity() {
        let (n, lambda) = (9, 1.3);
        let p = make_spiked_matrix_prior(n, lambda, SpikeLaw::UniformPm).unwrap();
        // regenerate the underlying spikes with the same stream
        let mut r1 = stream(4, 0);
        let mut r2 = stream(4, 1);
        let x1: Vec<f64> = (0..n).map(|_| SpikeLaw::UniformPm.sample(&mut r1)).collect();
        let x2: Vec<f64> = (0..n).map(|_| SpikeLaw::UniformPm.sample(&mut r2)).collect();
        let v1 = p.sample(&mut stream(4, 0));
        let v2 = p.sample(&mut stream(4, 1));
        let lhs: f64 = v1.iter().zip(&v2).map(|(a, b)| a * b).sum();
        let ip: f64 = x1.iter().zip(&x2).map(|(a, b)| a * b).sum();
        let sq: f64 = x1.iter().zip(&x2).map(|(a, b)| (a * b).powi(2)).sum();
        let rhs = lambda * lambda / (2.0 * n as f64) * (ip * ip - sq);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn spiked_tensor_examples() {
        assert!(make_spiked_tensor_prior(2, 3, 1.0, SpikeLaw::Rademacher).is_err());
        let p = make_spiked_tensor_prior(4, 3, 1.0, SpikeLaw::Rademacher).unwrap();
        assert_eq!(p.dim(), 4);
        let x = p.sample_seeded(0);
        assert!(x.iter().all(|v| (v.abs() - 4f64.powf(-0.75)).abs() < 1e-15));
    }

    #[test]
    fn spiked_tensor_overlap_is_elementary_symmetric() {
        let (n, q, lambda) = (7, 3, 0.8);
        let p = make_spiked_tensor_prior(n, q, lambda, SpikeLaw::UniformPm).unwrap();
        let mut r1 = stream(6, 0);
        let mut r2 = stream(6, 1);
        let x1: Vec<f64> = (0..n).map(|_| SpikeLaw::UniformPm.sample(&mut r1)).collect();
        let x2: Vec<f64> = (0..n).map(|_| SpikeLaw::UniformPm.sample(&mut r2)).collect();
        let v1 = p.sample(&mut stream(6, 0));
        let v2 = p.sample(&mut stream(6, 1));
        let lhs: f64 = v1.iter().zip(&v2).map(|(a, b)| a * b).sum();
        // e_3 of the products by brute force
        let z: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a * b).collect();
        let mut e3 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    e3 += z[i] * z[j] * z[k];
                }
            }
        }
        let rhs = lambda * lambda * (n as f64).powf(-1.5) * e3;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut all = Vec::new();
        for_each_combination(4, 2, |c| all.push(c.to_vec()));
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(binomial(24, 3), 2024);
    }

    #[test]
    fn dilution_preserves_overlap_law() {
        let inner = make_iid_prior(6, SpikeLaw::UniformPm, 1.0).unwrap();
        let dil = dilute(inner.clone(), 5).unwrap();
        let draws = 10_000;
        let ip = |p: &Prior, seed: u64| -> Vec<f64> {
            let mut out: Vec<f64> = (0..draws)
                .map(|t| {
                    let a = p.sample(&mut stream(seed, 2 * t));
                    let b = p.sample(&mut stream(seed, 2 * t + 1));
                    a.iter().zip(&b).map(|(u, v)| u * v).sum()
                })
                .collect();
            out.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out
        };
        let a = ip(&inner, 100);
        let b = ip(&dil, 200);
        // two-sample Kolmogorov-Smirnov statistic
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        let crit = 1.628 * (2.0 / draws as f64).sqrt();
        assert!(d < crit, "KS {d} >= {crit}");
    }

    #[test]
    fn spiked_matrix_statistics_do_not_grow() {
        let priors: Vec<Prior> = [20, 40, 80]
            .iter()
            .map(|&n| make_spiked_matrix_prior(n, 1.0, SpikeLaw::Rademacher).unwrap())
            .collect();
        let audit = scaling_audit(&priors, 20, 1, &AssumptionBounds::default());
        assert!(audit.pass, "{audit:?}");
    }

    #[test]
    fn iid_half_prior_fails_audit() {
        let priors: Vec<Prior> = [64, 256, 1024, 4096]
            .iter()
            .map(|&n| make_iid_prior(n, SpikeLaw::Rademacher, 0.5).unwrap())
            .collect();
        let audit = scaling_audit(&priors, 4, 1, &AssumptionBounds::default());
        assert!(!audit.pass);
        let b4 = audit.growth_exponents[1].1;
        assert!((b4 - 0.25).abs() < 1e-9, "B4 exponent {b4}");
    }

    #[test]
    fn dilution_shrinks_b4_statistic() {
        let inner = make_iid_prior(16, SpikeLaw::Rademacher, 0.5).unwrap();
        let k = 16;
        let a = check_assumptions(&inner, 3, 2, &AssumptionBounds::default());
        let b = check_assumptions(&dilute(inner, k).unwrap(), 3, 2, &AssumptionBounds::default());
        let ratio = b.b_stats[1].1 / a.b_stats[1].1;
        assert!((ratio - (k as f64).powf(-0.25)).abs() < 1e-12);
    }

    #[test]
    fn truncation_zeroes_violations() {
        let inner = make_iid_prior(8, SpikeLaw::UniformPm, 1.0).unwrap();
        let t = Prior::Truncated {
            inner: Box::new(inner),
            a: 1.0,
            b: vec![],
        };
        let mut zeroed = 0;
        for s in 0..50 {
            let x = t.sample_seeded(s);
            if x.iter().all(|v| *v == 0.0) {
                zeroed += 1;
            } else {
                assert!(x.iter().all(|v| v.abs() <= 1.0));
            }
        }
        assert!(zeroed > 0);
    }
}
