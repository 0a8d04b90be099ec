//! Symmetric noise densities for additive channels.
//!
//! Every family is defined at unit scale and then stretched by
//! `scale`: `p_s(y) = p(y / s) / s`. The Fisher information of the stretched
//! density is `F / s^2`.

use std::f64::consts::{LN_2, PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{LcdfError, Result};
use crate::numeric::special::{erfc, erfcx};
use crate::numeric::{integrate, integrate_with_breaks, QuadOptions};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User supplied density given by its log.
#[derive(Clone)]
pub struct CustomDensity {
    pub name: String,
    pub log_p: RealFn,
    /// Half-width of the quadrature window at unit scale.
    pub radius: f64,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("name", &self.name)
            .field("radius", &self.radius)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum DensityFamily {
    /// Standard normal.
    Gaussian,
    /// Logistic with unit scale, `p(y) = 1 / (4 cosh^2(y/2))`.
    Logistic,
    /// Laplace with rate `rate` convolved with `N(0, smoothing^2)`.
    SmoothedLaplace { rate: f64, smoothing: f64 },
    Custom(CustomDensity),
}

#[derive(Clone, Debug)]
pub struct DensitySpec {
    pub family: DensityFamily,
    pub scale: f64,
}

/// Finite-difference step for numeric scores, relative to `scale`.
pub const FD_STEP: f64 = 1e-5;

impl DensitySpec {
    pub fn gaussian(sigma: f64) -> Self {
        DensitySpec {
            family: DensityFamily::Gaussian,
            scale: sigma,
        }
    }

    pub fn logistic(s: f64) -> Self {
        DensitySpec {
            family: DensityFamily::Logistic,
            scale: s,
        }
    }

    /// Laplace with rate `2c` (Fisher information `4c^2`) smoothed by a
    /// Gaussian of standard deviation `eps`.
    pub fn smoothed_laplace(c: f64, eps: f64) -> Self {
        DensitySpec {
            family: DensityFamily::SmoothedLaplace {
                rate: 2.0 * c,
                smoothing: eps,
            },
            scale: 1.0,
        }
    }

    pub fn custom(name: impl Into<String>, log_p: RealFn, radius: f64) -> Self {
        DensitySpec {
            family: DensityFamily::Custom(CustomDensity {
                name: name.into(),
                log_p,
                radius,
            }),
            scale: 1.0,
        }
    }

    /// Stretches the density by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    /// Rescales so that the Fisher information equals `target`.
    pub fn with_fisher(self, target: f64) -> Result<Self> {
        let f = self.fisher()?;
        Ok(self.scaled((f / target).sqrt()))
    }

    pub fn name(&self) -> String {
        match &self.family {
            DensityFamily::Gaussian => "gaussian".into(),
            DensityFamily::Logistic => "logistic".into(),
            DensityFamily::SmoothedLaplace { .. } => "smoothed_laplace".into(),
            DensityFamily::Custom(c) => c.name.clone(),
        }
    }

    fn log_p_unit(&self, u: f64) -> f64 {
        match &self.family {
            DensityFamily::Gaussian => -0.5 * u * u - 0.5 * (2.0 * PI).ln(),
            DensityFamily::Logistic => {
                // -ln 4 - 2 ln cosh(u/2)
                let a = 0.5 * u.abs();
                -2.0 * (a + (-2.0 * a).exp().ln_1p() - LN_2) - 2.0 * LN_2
            }
            DensityFamily::SmoothedLaplace { rate, smoothing } => sl_log_p(*rate, *smoothing, u),
            DensityFamily::Custom(c) => (c.log_p)(u),
        }
    }

    fn score_unit(&self, u: f64) -> f64 {
        match &self.family {
            DensityFamily::Gaussian => u,
            DensityFamily::Logistic => (0.5 * u).tanh(),
            DensityFamily::SmoothedLaplace { rate, smoothing } => sl_score(*rate, *smoothing, u),
            DensityFamily::Custom(c) => {
                let h = FD_STEP;
                let f = |t: f64| (c.log_p)(t);
                let d = (-f(u + 2.0 * h) + 8.0 * f(u + h) - 8.0 * f(u - h) + f(u - 2.0 * h)) / (12.0 * h);
                -d
            }
        }
    }

    fn radius_unit(&self) -> f64 {
        match &self.family {
            DensityFamily::Gaussian => 14.0,
            DensityFamily::Logistic => 40.0,
            DensityFamily::SmoothedLaplace { rate, smoothing } => 40.0 / rate + 10.0 * smoothing,
            DensityFamily::Custom(c) => c.radius,
        }
    }

    pub fn log_p(&self, y: f64) -> f64 {
        self.log_p_unit(y / self.scale) - self.scale.ln()
    }

    pub fn p(&self, y: f64) -> f64 {
        self.log_p(y).exp()
    }

    /// `-p'(y) / p(y)`.
    pub fn score(&self, y: f64) -> f64 {
        self.score_unit(y / self.scale) / self.scale
    }

    /// Quadrature window half-width, beyond which the mass is below `1e-12`.
    pub fn radius(&self) -> f64 {
        self.radius_unit() * self.scale
    }

    pub fn p_at_zero(&self) -> f64 {
        let unit = match &self.family {
            DensityFamily::Gaussian => 1.0 / (2.0 * PI).sqrt(),
            DensityFamily::Logistic => 0.25,
            DensityFamily::SmoothedLaplace { rate, smoothing } => {
                0.5 * rate * erfcx(rate * smoothing / SQRT_2)
            }
            DensityFamily::Custom(c) => (c.log_p)(0.0).exp(),
        };
        unit / self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let u = x / self.scale;
        match &self.family {
            DensityFamily::Gaussian => 0.5 * erfc(-u / SQRT_2),
            DensityFamily::Logistic => 1.0 / (1.0 + (-u).exp()),
            _ => {
                // symmetric density: CDF(x) = 1/2 + int_0^x p
                let r = integrate(|t| self.log_p_unit(t).exp(), 0.0, u, QuadOptions::default());
                0.5 + r.value
            }
        }
    }

    /// `int p(y) g(y) dy` over the quadrature window.
    pub fn expect<G: FnMut(f64) -> f64>(&self, mut g: G) -> f64 {
        let r = integrate_with_breaks(
            |y| self.p(y) * g(y),
            self.radius(),
            &[0.0],
            QuadOptions {
                abs_tol: 1e-15,
                ..QuadOptions::default()
            },
        );
        r.value
    }

    /// Fisher information `int p'^2 / p`, closed form where known.
    pub fn fisher(&self) -> Result<f64> {
        let unit = match &self.family {
            DensityFamily::Gaussian => 1.0,
            DensityFamily::Logistic => 1.0 / 3.0,
            _ => return self.fisher_quadrature(),
        };
        Ok(unit / (self.scale * self.scale))
    }

    pub fn fisher_quadrature(&self) -> Result<f64> {
        let f = self.expect(|y| {
            let s = self.score(y);
            s * s
        });
        if !f.is_finite() || f <= 0.0 {
            return Err(LcdfError::Numerical {
                message: format!("Fisher information of {} not integrable", self.name()),
                achieved: f,
            });
        }
        Ok(f)
    }

    /// Checks normalization within `1e-8` and symmetry within `1e-12`.
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(LcdfError::Validation(format!("density scale {} must be positive", self.scale)));
        }
        if let DensityFamily::SmoothedLaplace { rate, smoothing } = self.family {
            if !(rate > 0.0 && smoothing > 0.0) {
                return Err(LcdfError::Validation("smoothed Laplace needs c > 0 and eps > 0".into()));
            }
        }
        let mass = self.expect(|_| 1.0);
        if (mass - 1.0).abs() > 1e-8 {
            return Err(LcdfError::Validation(format!("{} integrates to {mass}", self.name())));
        }
        let r = self.radius();
        for i in 1..=50 {
            let y = r * i as f64 / 60.0;
            let (a, b) = (self.p(y), self.p(-y));
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1e-300) {
                return Err(LcdfError::Validation(format!("{} is not symmetric at y = {y}", self.name())));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let unit = match &self.family {
            DensityFamily::Gaussian => Normal::new(0.0, 1.0).unwrap().sample(rng),
            DensityFamily::Logistic => {
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                (u / (1.0 - u)).ln()
            }
            DensityFamily::SmoothedLaplace { rate, smoothing } => {
                let e = Exp::new(*rate).unwrap().sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * e + smoothing * Normal::new(0.0, 1.0).unwrap().sample(rng)
            }
            DensityFamily::Custom(c) => {
                return Err(LcdfError::Unsupported(format!("sampling from custom density {}", c.name)))
            }
        };
        Ok(unit * self.scale)
    }
}

// Smoothed Laplace at unit scale:
// p(y) = (b/4) exp(-y^2 / 2e^2) [erfcx(z1) + erfcx(z2)],
// z1 = (b e^2 - y) / (e sqrt 2), z2 = (b e^2 + y) / (e sqrt 2).
fn sl_z(b: f64, e: f64, y: f64) -> (f64, f64) {
    let a = y.abs();
    ((b * e * e - a) / (e * SQRT_2), (b * e * e + a) / (e * SQRT_2))
}

fn sl_log_p(b: f64, e: f64, y: f64) -> f64 {
    let (m, other) = sl_z(b, e, y);
    if m >= 0.0 {
        (0.25 * b).ln() - y * y / (2.0 * e * e) + (erfcx(m) + erfcx(other)).ln()
    } else {
        // erfcx(m) = 2 exp(m^2) - erfcx(-m); the exp(m^2) factor cancels the Gaussian
        let rest = erfcx(other) - erfcx(-m);
        (0.5 * b).ln() + 0.5 * b * b * e * e - b * y.abs() + (0.5 * rest * (-m * m).exp()).ln_1p()
    }
}

fn sl_score(b: f64, e: f64, y: f64) -> f64 {
    let (m, other) = sl_z(b, e, y);
    // q = erfcx(other) / erfcx(m) in (0, 1]
    let q = if m >= 0.0 {
        erfcx(other) / erfcx(m)
    } else {
        let g = (-m * m).exp();
        erfcx(other) * g / (2.0 - erfcx(-m) * g)
    };
    y.signum() * b * (1.0 - q) / (1.0 + q)
}
