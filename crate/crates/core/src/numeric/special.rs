//! Special functions on top of `libm`.

pub use libm::erfc;

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Scaled complementary error function `exp(z^2) erfc(z)`.
pub fn erfcx(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        if z < -26.6 {
            return f64::INFINITY;
        }
        return 2.0 * (z * z).exp() - erfcx(-z);
    }
    if z < 3.0 {
        return (z * z).exp() * erfc(z);
    }
    // Lentz continued fraction: erfcx(z) = (1/sqrt(pi)) / (z + 1/2 / (z + 1 / (z + 3/2 / ...)))
    let tiny = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for k in 1..200 {
        let a = 0.5 * k as f64;
        d = z + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = z + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (SQRT_PI * f)
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Generalized binomial coefficient `C(n, k)` for integer `n` (possibly
/// negative) and `k >= 0`.
pub fn binom_general(n: i64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k {
        r *= (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_is_continuous_at_switch() {
        let a = erfcx(3.0 - 1e-12);
        let b = erfcx(3.0 + 1e-12);
        assert!((a - b).abs() / a < 1e-11);
    }

    #[test]
    fn erfcx_asymptotics() {
        // erfcx(z) ~ 1/(z sqrt(pi)) (1 - 1/(2 z^2))
        let z = 1e4;
        let approx = 1.0 / (z * SQRT_PI) * (1.0 - 0.5 / (z * z));
        assert!((erfcx(z) - approx).abs() / approx < 1e-12);
        assert!((erfcx(0.0) - 1.0).abs() < 1e-15);
        // erfcx(-1) = 2e - erfcx(1)
        let lhs = erfcx(-1.0);
        let rhs = 2.0 * 1f64.exp() - erfcx(1.0);
        assert!((lhs - rhs).abs() < 1e-14);
        assert!((erfcx(1.0) - 0.427_583_576_155_807).abs() < 1e-14);
        assert!((erfcx(5.0) - 0.110_704_637_733_069).abs() < 1e-14);
    }

    #[test]
    fn generalized_binomials() {
        assert_eq!(binom_general(-1, 0), 1.0);
        assert_eq!(binom_general(-1, 3), -1.0);
        assert_eq!(binom_general(5, 2), 10.0);
        assert_eq!(binom_general(2, 3), 0.0);
    }
}
