//! Fast invariant checks bundled with the binary.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::advantage::{binom_lb_holds, cadv_iid_exact, cadv_mc, esp_prefix_sum};
use crate::channels::{bernoulli, censor, make_additive, make_exponential_family, quantize, CgfSpec, DensitySpec};
use crate::efron_stein::{self, random_tiny_model, CoordSet, TableFunction};
use crate::priors::{make_iid_prior, make_spiked_matrix_prior, SpikeLaw};
use crate::rng::stream;
use crate::spectral::top_eigenvalue;
use crate::truncexp::{log_trunc_exp, trunc_exp, trunc_exp_oracle};
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, r: Result<(bool, String)>) -> Check {
    match r {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn truncexp_grid() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for xi in -60..=60 {
        let x = xi as f64 * 0.5;
        for d in (0..=40).step_by(2) {
            let a = trunc_exp(x, d)?;
            let b = trunc_exp_oracle(x, d);
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    let big = log_trunc_exp(-1000.0, 1200)?.is_finite() && log_trunc_exp(1000.0, 500)?.is_finite();
    Ok((worst <= 1e-10 && big, format!("max relative error {worst:e}")))
}

fn fisher_table() -> Result<(bool, String)> {
    let g = make_additive(DensitySpec::gaussian(1.0))?;
    let fg = g.fisher_information()?;
    let fb = bernoulli(0.5)?.fisher_information()?;
    let fq = quantize(make_additive(DensitySpec::gaussian(1.0))?)?.fisher_information()?;
    let mut censored_ok = true;
    for k in 1..=9 {
        let eta = k as f64 / 10.0;
        let f = censor(g.clone(), eta)?.fisher_information()?;
        censored_ok &= (f - (1.0 - eta) * fg).abs() <= 1e-10;
    }
    let pass = (fg - 1.0).abs() <= 1e-6 && fb == 4.0 && (fq - 2.0 / std::f64::consts::PI).abs() <= 1e-6 && censored_ok;
    Ok((pass, format!("gaussian {fg}, bernoulli {fb}, quantized {fq}")))
}

fn exp_family() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for spec in [
        CgfSpec::Gaussian { variance: 1.0 },
        CgfSpec::Bernoulli { c: 0.3 },
        CgfSpec::Poisson { mean: 2.0 },
    ] {
        let want = 1.0 / spec.d2psi(0.0);
        let ch = make_exponential_family(spec)?;
        worst = worst.max((ch.fisher_information()? - want).abs());
        worst = worst.max((ch.fisher_information_fd_extrapolated(1e-2)? - want).abs());
    }
    Ok((worst <= 1e-4, format!("max deviation {worst:e}")))
}

fn esp_brute_force() -> Result<(bool, String)> {
    let mut rng = stream(17, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(0..=10);
        let r: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let d = rng.random_range(0..=n);
        let mut brute = 0.0;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize <= d {
                brute += (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).product::<f64>();
            }
        }
        let scale: f64 = r.iter().map(|v| 1.0 + v.abs()).product();
        worst = worst.max((esp_prefix_sum(&r, d) - brute).abs() / scale);
    }
    Ok((worst <= 1e-12, format!("max scaled error {worst:e}")))
}

fn dual_path() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for seed in 0..30 {
        let m = random_tiny_model(&mut stream(seed, 0), 4, 3, 6);
        for d in 0..=m.n() {
            let a = efron_stein::cadv_exact(&m, d)?;
            let b = efron_stein::cadv_formula_exact(&m, d)?;
            worst = worst.max((a - b).abs() / a);
        }
    }
    Ok((worst <= 1e-10, format!("max relative difference {worst:e}")))
}

fn decomposition() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let m = random_tiny_model(&mut stream(seed, 1), 3, 3, 4);
        let mut rng = stream(seed, 2);
        let f = TableFunction {
            values: (0..m.states()).map(|_| rng.random::<f64>()).collect(),
        };
        let sets: Vec<CoordSet> = CoordSet::full(m.n()).subsets().collect();
        let hats = sets
            .iter()
            .map(|&t| efron_stein::project_hat(&m, &f, t))
            .collect::<Result<Vec<_>>>()?;
        let mut sum = vec![0.0; f.values.len()];
        for (a, h) in hats.iter().enumerate() {
            for (s, v) in sum.iter_mut().zip(&h.values) {
                *s += v;
            }
            for g in &hats[a + 1..] {
                worst = worst.max(m.inner(h, g).abs());
            }
        }
        worst = worst.max(TableFunction { values: sum }.max_abs_diff(&f));
    }
    Ok((worst <= 1e-12, format!("max orthogonality/completeness defect {worst:e}")))
}

fn non_universality() -> Result<(bool, String)> {
    let p = make_iid_prior(64, SpikeLaw::Rademacher, 0.5)?;
    let b = bernoulli(0.5)?;
    let vals = (0..=6).map(|d| cadv_iid_exact(&p, &b, d)).collect::<Result<Vec<_>>>()?;
    Ok((vals.iter().all(|&v| v == 1.0), format!("{vals:?}")))
}

fn eigen_examples() -> Result<(bool, String)> {
    let m = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
    let a = top_eigenvalue(&m)?;
    let v: Vec<f64> = (0..150).map(|i| (i as f64 * 0.11).cos()).collect();
    let r1 = DMatrix::from_fn(150, 150, |i, j| v[i] * v[j]);
    let want: f64 = v.iter().map(|x| x * x).sum();
    let b = top_eigenvalue(&r1)?;
    Ok(((a - 2.0).abs() < 1e-10 && (b - want).abs() <= 1e-8 * want, format!("{a}, {b} vs {want}")))
}

fn thread_determinism() -> Result<(bool, String)> {
    let p = make_spiked_matrix_prior(10, 0.8, SpikeLaw::Rademacher)?;
    let g = make_additive(DensitySpec::gaussian(1.0))?;
    let run = |t: usize| -> Result<f64> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| crate::LcdfError::Validation(e.to_string()))?;
        Ok(pool.install(|| cadv_mc(&p, &g, 4, 700, 5))?.mean)
    };
    let (a, b) = (run(1)?, run(3)?);
    Ok((a.to_bits() == b.to_bits(), format!("{a} vs {b}")))
}

fn binom_lb() -> Result<(bool, String)> {
    let ok = (1..=64).all(|k| (1..=k / 2).all(|t| binom_lb_holds(k, t)));
    Ok((ok, "k <= 64, t <= k/2".into()))
}

pub fn run() -> Vec<Check> {
    vec![
        check("truncexp_oracle", truncexp_grid()),
        check("fisher_table", fisher_table()),
        check("exp_family_fisher", exp_family()),
        check("esp_brute_force", esp_brute_force()),
        check("dual_path_exact", dual_path()),
        check("efron_stein_decomposition", decomposition()),
        check("bernoulli_non_universality", non_universality()),
        check("top_eigenvalue", eigen_examples()),
        check("thread_determinism", thread_determinism()),
        check("binomial_lower_bound", binom_lb()),
    ]
}
