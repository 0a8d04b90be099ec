//! Scalar channels `x -> P_x`: likelihood ratios, the overlap kernel
//! `R(x1, x2) = E_{P_0} (L_{x1} - 1)(L_{x2} - 1)`, Fisher information and the
//! local Fisher score.

pub mod cgf;
pub mod density;

pub use cgf::{BaseMeasure, CgfSpec, CustomCgf};
pub use density::{CustomDensity, DensityFamily, DensitySpec, RealFn};

use crate::error::{domain, LcdfError, Result};
use crate::numeric::{integrate_with_breaks, QuadOptions};

/// An output symbol. Censored observations are `Null`; quantized outputs
/// are `Value(+1.0)` or `Value(-1.0)`; Bernoulli outputs are `0.0` or `1.0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obs {
    Value(f64),
    Null,
}

#[derive(Debug, Clone)]
pub enum Channel {
    Additive(DensitySpec),
    ExpFamily(CgfSpec),
    /// `P_x = Bernoulli(c + x)` on the closed domain `[-c, 1 - c]`.
    Bernoulli { c: f64 },
    Censored { inner: Box<Channel>, eta: f64 },
    /// Sign of an additive observation; `sgn(0) = +1`.
    Quantized(DensitySpec),
}

const OVERLAP_QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-15,
    rel_tol: 1e-12,
    max_depth: 40,
};

pub fn make_additive(spec: DensitySpec) -> Result<Channel> {
    spec.validate()?;
    Ok(Channel::Additive(spec))
}

pub fn make_exponential_family(spec: CgfSpec) -> Result<Channel> {
    spec.validate()?;
    Ok(Channel::ExpFamily(spec))
}

pub fn bernoulli(c: f64) -> Result<Channel> {
    if !(c > 0.0 && c < 1.0) {
        return domain(format!("Bernoulli base probability {c} outside (0, 1)"));
    }
    Ok(Channel::Bernoulli { c })
}

pub fn censor(channel: Channel, eta: f64) -> Result<Channel> {
    if !(0.0..=1.0).contains(&eta) {
        return domain(format!("censoring probability {eta} outside [0, 1]"));
    }
    Ok(Channel::Censored {
        inner: Box::new(channel),
        eta,
    })
}

pub fn quantize(channel: Channel) -> Result<Channel> {
    match channel {
        Channel::Additive(spec) => Ok(Channel::Quantized(spec)),
        other => Err(LcdfError::Unsupported(format!(
            "quantization needs an additive channel, got {}",
            other.name()
        ))),
    }
}

impl Channel {
    pub fn name(&self) -> String {
        match self {
            Channel::Additive(d) => format!("additive({})", d.name()),
            Channel::ExpFamily(c) => format!("expfam({})", c.name()),
            Channel::Bernoulli { c } => format!("bernoulli({c})"),
            Channel::Censored { inner, eta } => format!("censored({}, {eta})", inner.name()),
            Channel::Quantized(d) => format!("quantized({})", d.name()),
        }
    }

    /// Signal domain as `(lo, hi, closed)`.
    pub fn signal_domain(&self) -> (f64, f64, bool) {
        match self {
            Channel::Additive(_) | Channel::Quantized(_) => (f64::NEG_INFINITY, f64::INFINITY, false),
            Channel::ExpFamily(c) => {
                let (lo, hi) = c.signal_domain();
                (lo, hi, false)
            }
            Channel::Bernoulli { c } => (-c, 1.0 - c, true),
            Channel::Censored { inner, .. } => inner.signal_domain(),
        }
    }

    pub fn check_signal(&self, x: f64) -> Result<()> {
        let (lo, hi, closed) = self.signal_domain();
        let inside = if closed { x >= lo && x <= hi } else { x > lo && x < hi };
        if !x.is_finite() || !inside {
            return domain(format!("signal {x} outside the domain of {}", self.name()));
        }
        Ok(())
    }

    pub fn likelihood_ratio(&self, x: f64, y: Obs) -> Result<f64> {
        self.check_signal(x)?;
        match (self, y) {
            (Channel::Censored { .. }, Obs::Null) => Ok(1.0),
            (Channel::Censored { inner, .. }, y) => inner.likelihood_ratio(x, y),
            (_, Obs::Null) => domain(format!("null symbol is not an output of {}", self.name())),
            (Channel::Additive(d), Obs::Value(y)) => Ok((d.log_p(y - x) - d.log_p(y)).exp()),
            (Channel::ExpFamily(c), Obs::Value(y)) => c.likelihood_ratio(x, y),
            (Channel::Bernoulli { c }, Obs::Value(y)) => {
                if y == 1.0 {
                    Ok((c + x) / c)
                } else if y == 0.0 {
                    Ok((1.0 - c - x) / (1.0 - c))
                } else {
                    domain(format!("Bernoulli output {y} not in {{0, 1}}"))
                }
            }
            (Channel::Quantized(d), Obs::Value(y)) => {
                if y == 1.0 {
                    Ok(2.0 * d.cdf(x))
                } else if y == -1.0 {
                    Ok(2.0 * d.cdf(-x))
                } else {
                    domain(format!("quantized output {y} not in {{-1, +1}}"))
                }
            }
        }
    }

    /// `R(x1, x2)`, in closed form where one is known.
    pub fn overlap(&self, x1: f64, x2: f64) -> Result<f64> {
        self.check_signal(x1)?;
        self.check_signal(x2)?;
        if x1 == 0.0 || x2 == 0.0 {
            return Ok(0.0);
        }
        match self {
            Channel::Additive(d) => match d.family {
                DensityFamily::Gaussian => Ok((x1 * x2 / (d.scale * d.scale)).exp_m1()),
                _ => additive_overlap_quadrature(d, x1, x2),
            },
            Channel::ExpFamily(c) => c.overlap(x1, x2),
            Channel::Bernoulli { c } => Ok(x1 * x2 / (c * (1.0 - c))),
            Channel::Censored { inner, eta } => Ok((1.0 - eta) * inner.overlap(x1, x2)?),
            Channel::Quantized(d) => {
                let g = |x: f64| 2.0 * d.cdf(x) - 1.0;
                Ok(g(x1) * g(x2))
            }
        }
    }

    pub fn fisher_information(&self) -> Result<f64> {
        match self {
            Channel::Additive(d) => d.fisher(),
            Channel::ExpFamily(c) => Ok(1.0 / c.variance()),
            Channel::Bernoulli { c } => Ok(1.0 / (c * (1.0 - c))),
            Channel::Censored { inner, eta } => Ok((1.0 - eta) * inner.fisher_information()?),
            Channel::Quantized(d) => {
                let p0 = d.p_at_zero();
                Ok(4.0 * p0 * p0)
            }
        }
    }

    /// True when every observation is censored, so `F = 0`.
    pub fn is_degenerate(&self) -> bool {
        match self {
            Channel::Censored { inner, eta } => *eta >= 1.0 || inner.is_degenerate(),
            _ => false,
        }
    }

    /// `d/dx L_x(y)` at `x = 0`; equals `-p'(y)/p(y)` for additive channels.
    pub fn score_unnormalized(&self, y: Obs) -> Result<f64> {
        match (self, y) {
            (Channel::Censored { .. }, Obs::Null) => Ok(0.0),
            (Channel::Censored { inner, .. }, y) => inner.score_unnormalized(y),
            (_, Obs::Null) => domain(format!("null symbol is not an output of {}", self.name())),
            (Channel::Additive(d), Obs::Value(y)) => Ok(d.score(y)),
            (Channel::ExpFamily(c), Obs::Value(y)) => Ok((y - c.mean()) / c.variance()),
            (Channel::Bernoulli { c }, Obs::Value(y)) => {
                if y == 1.0 {
                    Ok(1.0 / c)
                } else if y == 0.0 {
                    Ok(-1.0 / (1.0 - c))
                } else {
                    domain(format!("Bernoulli output {y} not in {{0, 1}}"))
                }
            }
            (Channel::Quantized(d), Obs::Value(y)) => {
                let p0 = d.p_at_zero();
                if y == 1.0 {
                    Ok(2.0 * p0)
                } else if y == -1.0 {
                    Ok(-2.0 * p0)
                } else {
                    domain(format!("quantized output {y} not in {{-1, +1}}"))
                }
            }
        }
    }

    /// Local Fisher score `f(y) = (1/F) dL_x(y)/dx` at `x = 0`.
    pub fn local_fisher_score(&self, y: Obs) -> Result<f64> {
        if self.is_degenerate() {
            return Err(LcdfError::Domain(format!("{} has zero Fisher information", self.name())));
        }
        Ok(self.score_unnormalized(y)? / self.fisher_information()?)
    }

    /// `E_{P_0} g(y)`.
    pub fn expect_null<G: FnMut(Obs) -> f64>(&self, mut g: G) -> Result<f64> {
        self.expect_null_dyn(&mut g)
    }

    fn expect_null_dyn(&self, g: &mut dyn FnMut(Obs) -> f64) -> Result<f64> {
        match self {
            Channel::Additive(d) => Ok(d.expect(|y| g(Obs::Value(y)))),
            Channel::ExpFamily(c) => match c.base_measure() {
                Some(b) => Ok(b.expect(|y| g(Obs::Value(y)))),
                None => Err(LcdfError::Unsupported(format!("no base measure for {}", c.name()))),
            },
            Channel::Bernoulli { c } => Ok(c * g(Obs::Value(1.0)) + (1.0 - c) * g(Obs::Value(0.0))),
            Channel::Censored { inner, eta } => {
                let null = g(Obs::Null);
                let rest = inner.expect_null_dyn(g)?;
                Ok(eta * null + (1.0 - eta) * rest)
            }
            Channel::Quantized(_) => Ok(0.5 * g(Obs::Value(1.0)) + 0.5 * g(Obs::Value(-1.0))),
        }
    }

    /// Central mixed difference of `R` at the origin with step `h`.
    pub fn fisher_information_fd(&self, h: f64) -> Result<f64> {
        let r = |a: f64, b: f64| self.overlap(a, b);
        Ok((r(h, h)? - r(h, -h)? - r(-h, h)? + r(-h, -h)?) / (4.0 * h * h))
    }

    /// Richardson extrapolation of [`Self::fisher_information_fd`].
    pub fn fisher_information_fd_extrapolated(&self, h: f64) -> Result<f64> {
        let a = self.fisher_information_fd(h)?;
        let b = self.fisher_information_fd(0.5 * h)?;
        Ok((4.0 * b - a) / 3.0)
    }

    /// `d^3 R / dx1^2 dx2` at the origin from `[R(h,h) - R(-h,-h)] / (2h^3)`,
    /// Richardson extrapolated.
    pub fn third_mixed_derivative(&self, h: f64) -> Result<f64> {
        let est = |h: f64| -> Result<f64> { Ok((self.overlap(h, h)? - self.overlap(-h, -h)?) / (2.0 * h * h * h)) };
        let a = est(h)?;
        let b = est(0.5 * h)?;
        Ok((4.0 * b - a) / 3.0)
    }
}

/// `int p(y) expm1(l(y - x1) - l(y)) expm1(l(y - x2) - l(y)) dy`, `l = log p`.
pub fn additive_overlap_quadrature(d: &DensitySpec, x1: f64, x2: f64) -> Result<f64> {
    let radius = d.radius() + 2.0 * (x1.abs() + x2.abs());
    let r = integrate_with_breaks(
        |y| {
            let l0 = d.log_p(y);
            let a = (d.log_p(y - x1) - l0).exp_m1();
            let b = (d.log_p(y - x2) - l0).exp_m1();
            l0.exp() * a * b
        },
        radius,
        &[0.0, x1, x2],
        OVERLAP_QUAD,
    );
    if !r.value.is_finite() {
        return Err(LcdfError::Numerical {
            message: format!("overlap quadrature for {} at ({x1}, {x2})", d.name()),
            achieved: r.error,
        });
    }
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn gaussian() -> Channel {
        make_additive(DensitySpec::gaussian(1.0)).unwrap()
    }

    fn builtins() -> Vec<Channel> {
        vec![
            gaussian(),
            make_additive(DensitySpec::gaussian(0.6)).unwrap(),
            make_additive(DensitySpec::logistic(0.5)).unwrap(),
            make_additive(DensitySpec::smoothed_laplace(1.0, 0.3)).unwrap(),
            make_exponential_family(CgfSpec::Gaussian { variance: 1.0 }).unwrap(),
            make_exponential_family(CgfSpec::Bernoulli { c: 0.3 }).unwrap(),
            make_exponential_family(CgfSpec::Poisson { mean: 2.0 }).unwrap(),
            bernoulli(0.5).unwrap(),
            censor(gaussian(), 0.4).unwrap(),
            quantize(gaussian()).unwrap(),
            quantize(make_additive(DensitySpec::logistic(1.0)).unwrap()).unwrap(),
        ]
    }

    #[test]
    fn likelihood_ratio_examples() {
        let g = gaussian();
        for &y in &[-3.0, 0.0, 2.5] {
            assert_eq!(g.likelihood_ratio(0.0, Obs::Value(y)).unwrap(), 1.0);
        }
        let b = bernoulli(0.5).unwrap();
        assert_eq!(b.likelihood_ratio(0.25, Obs::Value(1.0)).unwrap(), 1.5);
        let q = quantize(gaussian()).unwrap();
        let l = q.likelihood_ratio(0.3, Obs::Value(1.0)).unwrap();
        assert!((l - 1.235_822_844_377_905).abs() < 1e-12);
        let c = censor(gaussian(), 0.3).unwrap();
        assert_eq!(c.likelihood_ratio(0.7, Obs::Null).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        let b = bernoulli(0.5).unwrap();
        assert!(b.overlap(0.6, 0.1).is_err());
        assert!(b.overlap(0.5, -0.5).is_ok());
        let p = make_exponential_family(CgfSpec::Poisson { mean: 2.0 }).unwrap();
        assert!(p.overlap(-2.5, 0.1).is_err());
        assert!(censor(gaussian(), 1.2).is_err());
        assert!(quantize(bernoulli(0.5).unwrap()).is_err());
    }

    #[test]
    fn overlap_examples() {
        let g = gaussian();
        assert!((g.overlap(0.5, 0.2).unwrap() - 0.1f64.exp_m1()).abs() < 1e-15);
        assert!((bernoulli(0.5).unwrap().overlap(0.1, 0.3).unwrap() - 0.12).abs() < 1e-15);
        let c = censor(gaussian(), 0.5).unwrap();
        assert!((c.overlap(0.5, 0.2).unwrap() - 0.5 * 0.1f64.exp_m1()).abs() < 1e-15);
        let c = censor(gaussian(), 0.4).unwrap();
        assert!((c.overlap(0.5, 0.2).unwrap() - 0.6 * 0.1f64.exp_m1()).abs() < 1e-15);
        let c0 = censor(gaussian(), 0.0).unwrap();
        assert_eq!(c0.overlap(0.3, -0.8).unwrap(), g.overlap(0.3, -0.8).unwrap());
        let c1 = censor(gaussian(), 1.0).unwrap();
        assert_eq!(c1.overlap(0.3, -0.8).unwrap(), 0.0);
        assert_eq!(c1.fisher_information().unwrap(), 0.0);
        assert!(c1.is_degenerate());
        assert!(c1.local_fisher_score(Obs::Value(1.0)).is_err());
        let q = quantize(gaussian()).unwrap();
        assert_eq!(q.overlap(0.0, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_quadrature_matches_closed_form() {
        let d = DensitySpec::gaussian(1.0);
        for &(a, b) in &[(0.5, 0.2), (-1.3, 0.7), (2.0, 2.0), (1e-3, -1e-3)] {
            let q = additive_overlap_quadrature(&d, a, b).unwrap();
            let exact = (a * b).exp_m1();
            assert!((q - exact).abs() < 1e-8 * exact.abs().max(1e-6), "{a} {b} {q} {exact}");
        }
    }

    #[test]
    fn quantized_overlap_is_expectation_of_products() {
        let q = quantize(make_additive(DensitySpec::logistic(0.7)).unwrap()).unwrap();
        for &(a, b) in &[(0.3, 0.9), (-0.4, 0.2)] {
            let direct = q
                .expect_null(|y| {
                    (q.likelihood_ratio(a, y).unwrap() - 1.0) * (q.likelihood_ratio(b, y).unwrap() - 1.0)
                })
                .unwrap();
            assert!((q.overlap(a, b).unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn overlap_is_expectation_for_every_builtin() {
        for ch in builtins() {
            for &(a, b) in &[(0.2, 0.15), (-0.1, 0.25)] {
                let direct = ch
                    .expect_null(|y| {
                        (ch.likelihood_ratio(a, y).unwrap() - 1.0) * (ch.likelihood_ratio(b, y).unwrap() - 1.0)
                    })
                    .unwrap();
                let r = ch.overlap(a, b).unwrap();
                assert!((r - direct).abs() < 1e-9, "{} {r} {direct}", ch.name());
            }
        }
    }

    #[test]
    fn fisher_table() {
        assert!((gaussian().fisher_information().unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(bernoulli(0.5).unwrap().fisher_information().unwrap(), 4.0);
        let q = quantize(gaussian()).unwrap().fisher_information().unwrap();
        assert!((q - 2.0 / PI).abs() < 1e-15);
        let c = censor(gaussian(), 0.25).unwrap().fisher_information().unwrap();
        assert!((c - 0.75).abs() < 1e-15);
        let p = make_exponential_family(CgfSpec::Poisson { mean: 2.0 }).unwrap();
        assert!((p.fisher_information().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fisher_fd_examples() {
        let g = gaussian().fisher_information_fd_extrapolated(1e-3).unwrap();
        assert!((g - 1.0).abs() < 1e-5);
        let b = bernoulli(0.5).unwrap().fisher_information_fd_extrapolated(1e-3).unwrap();
        assert!((b - 4.0).abs() < 1e-5);
        let p = make_exponential_family(CgfSpec::Poisson { mean: 2.0 }).unwrap();
        assert!((p.fisher_information_fd_extrapolated(1e-3).unwrap() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn fisher_fd_agrees_for_every_builtin() {
        for ch in builtins() {
            let f = ch.fisher_information().unwrap();
            let fd = ch.fisher_information_fd_extrapolated(1e-2).unwrap();
            assert!((f - fd).abs() <= 1e-5, "{} {f} {fd}", ch.name());
        }
    }

    #[test]
    fn third_mixed_derivative_vanishes() {
        for ch in builtins() {
            let t = ch.third_mixed_derivative(1e-2).unwrap();
            assert!(t.abs() <= 1e-4, "{} {t}", ch.name());
        }
    }

    #[test]
    fn cramer_rao_saturation() {
        for ch in builtins() {
            let f = ch.fisher_information().unwrap();
            let m1 = ch.expect_null(|y| ch.local_fisher_score(y).unwrap()).unwrap();
            let m2 = ch
                .expect_null(|y| {
                    let s = ch.local_fisher_score(y).unwrap();
                    s * s
                })
                .unwrap();
            assert!(m1.abs() < 1e-8, "{} mean {m1}", ch.name());
            assert!((m2 - 1.0 / f).abs() < 1e-6, "{} second moment {m2} vs {}", ch.name(), 1.0 / f);
        }
    }

    #[test]
    fn gaussian_score_is_identity() {
        let g = gaussian();
        for &y in &[-2.0, 0.3, 5.0] {
            assert!((g.score_unnormalized(Obs::Value(y)).unwrap() - y).abs() < 1e-15);
        }
    }

    #[test]
    fn censor_composition() {
        let inner = make_additive(DensitySpec::logistic(0.8)).unwrap();
        let f = inner.fisher_information().unwrap();
        let twice = censor(censor(inner, 0.3).unwrap(), 0.45).unwrap();
        assert!((twice.fisher_information().unwrap() - 0.7 * 0.55 * f).abs() < 1e-12);
    }

    #[test]
    fn quantized_smoothed_laplace_approaches_full_information() {
        let mut prev = 0.0;
        for &eps in &[0.5, 0.1, 0.02] {
            let d = DensitySpec::smoothed_laplace(1.0, eps);
            let full = d.fisher().unwrap();
            let q = quantize(make_additive(d).unwrap()).unwrap().fisher_information().unwrap();
            let ratio = q / full;
            assert!(ratio <= 1.0 + 1e-9 && ratio > prev, "eps={eps} ratio={ratio}");
            prev = ratio;
        }
        assert!(prev > 0.95);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn overlap_symmetry_zero_rows_diagonal(a in -0.29f64..0.29, b in -0.29f64..0.29, k in 0usize..11) {
            let ch = &builtins()[k];
            let r12 = ch.overlap(a, b).unwrap();
            let r21 = ch.overlap(b, a).unwrap();
            prop_assert!((r12 - r21).abs() <= 1e-10);
            prop_assert!(ch.overlap(a, 0.0).unwrap().abs() <= 1e-12);
            prop_assert!(ch.overlap(0.0, a).unwrap().abs() <= 1e-12);
            prop_assert!(ch.overlap(a, a).unwrap() >= -1e-10);
        }
    }
}
