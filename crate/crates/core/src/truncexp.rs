//! The truncated exponential `exp^{<=D}(x) = sum_{d=0}^{D} x^d / d!`.
//!
//! Evaluation splits by regime:
//!
//! * `x >= 0`: all terms are positive, a compensated `f64` sum is accurate.
//! * `x < 0`, `|x| >= D + 1`: terms grow in magnitude up to `d = D`; the
//!   alternating sum is accumulated in double-double.
//! * `x < 0`, `|x| < D + 1`: the value is `e^x` minus the tail
//!   `sum_{d>D} x^d/d!`, whose terms are alternating and decreasing. For even
//!   `D` the tail is negative, so no cancellation occurs. Both pieces are
//!   evaluated in double-double.
//!
//! The oracle [`trunc_exp_oracle`] sums exactly in rationals and rounds once.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use crate::numeric::special::ln_gamma;

use crate::error::{domain, Result};
use crate::numeric::special::log_add_exp;
use crate::numeric::{Dd, NeumaierSum};

/// `exp^{<=D}(x)`. Relative error is at most `1e-12` for `|x| <= 50`,
/// `D <= 200`, away from the single real root that odd `D` has for `x < 0`.
pub fn trunc_exp(x: f64, d: usize) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("trunc_exp: non-finite argument {x}"));
    }
    if d == 0 || x == 0.0 {
        return Ok(1.0);
    }
    if x > 0.0 {
        let mut s = NeumaierSum::new();
        let mut t = 1.0;
        s.add(t);
        for k in 1..=d {
            t *= x / k as f64;
            s.add(t);
        }
        return Ok(s.value());
    }
    if -x >= (d + 1) as f64 {
        Ok(direct_dd(x, d).to_f64())
    } else {
        Ok((Dd::exp(x) - tail_dd(x, d)).to_f64())
    }
}

fn direct_dd(x: f64, d: usize) -> Dd {
    let mut t = Dd::ONE;
    let mut s = Dd::ONE;
    for k in 1..=d {
        t = t.mul_f64(x).div_f64(k as f64);
        s = s + t;
    }
    s
}

// sum_{k > d} x^k / k! for |x| < d + 1
fn tail_dd(x: f64, d: usize) -> Dd {
    let mut t = Dd::ONE;
    for k in 1..=d + 1 {
        t = t.mul_f64(x).div_f64(k as f64);
    }
    if !t.is_finite() {
        return t;
    }
    let mut s = Dd::ZERO;
    let mut k = d + 1;
    loop {
        s = s + t;
        k += 1;
        t = t.mul_f64(x).div_f64(k as f64);
        if !(t.hi.abs() > 1e-34 * s.hi.abs()) {
            break;
        }
    }
    s
}

/// Exact rational evaluation of `exp^{<=D}(x)` rounded once to `f64`.
/// Intended for tests only; cost grows quickly with `D`.
pub fn trunc_exp_oracle(x: f64, d: usize) -> f64 {
    let xr = BigRational::from_float(x).expect("finite argument");
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    for k in 1..=d {
        term = term * &xr / BigRational::from_integer(BigInt::from(k));
        sum += &term;
    }
    if sum.is_zero() {
        return 0.0;
    }
    sum.to_f64().unwrap_or(f64::NAN)
}

/// `log exp^{<=D}(x)` for even `D`, safe against overflow and underflow for
/// `|x| <= 1e4`, `D <= 1e4`.
pub fn log_trunc_exp(x: f64, d: usize) -> Result<f64> {
    if d % 2 == 1 {
        return domain(format!("log_trunc_exp: degree {d} is odd"));
    }
    let v = trunc_exp(x, d)?;
    if v.is_finite() && v >= f64::MIN_POSITIVE {
        return Ok(v.ln());
    }
    if x > 0.0 {
        // scale all terms by the peak term t_m
        let m = d.min(x.floor() as usize);
        let log_tm = m as f64 * x.ln() - ln_gamma(m as f64 + 1.0);
        let mut s = NeumaierSum::new();
        s.add(1.0);
        let mut r = 1.0;
        for k in (1..=m).rev() {
            r *= k as f64 / x;
            s.add(r);
            if r < 1e-20 {
                break;
            }
        }
        r = 1.0;
        for k in m + 1..=d {
            r *= x / k as f64;
            s.add(r);
            if r < 1e-20 {
                break;
            }
        }
        return Ok(log_tm + s.value().ln());
    }
    let ax = -x;
    if ax >= (d + 1) as f64 {
        // terms relative to t_D, walking down; t_D > 0 for even D
        let log_td = d as f64 * ax.ln() - ln_gamma(d as f64 + 1.0);
        let mut s = Dd::ONE;
        let mut r = Dd::ONE;
        for k in (1..=d).rev() {
            r = r.mul_f64(k as f64).div_f64(x);
            s = s + r;
            if r.hi.abs() < 1e-34 {
                break;
            }
        }
        return Ok(log_td + s.to_f64().ln());
    }
    // e^x + |tail|, tail relative to its first term
    let log_t1 = (d + 1) as f64 * ax.ln() - ln_gamma(d as f64 + 2.0);
    let mut s = Dd::ONE;
    let mut r = Dd::ONE;
    let mut k = d + 1;
    loop {
        k += 1;
        r = r.mul_f64(x).div_f64(k as f64);
        s = s + r;
        if !(r.hi.abs() >= 1e-34) {
            break;
        }
    }
    Ok(log_add_exp(x, log_t1 + s.to_f64().ln()))
}
