//! Adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use super::sum::NeumaierSum;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_depth: 40,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` by global adaptive bisection.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        };
    }
    let mut evals = 0usize;
    // stack of (a, b, value, error, depth)
    let (v0, e0) = gk15(&mut f, a, b);
    evals += 15;
    let mut done = NeumaierSum::new();
    let mut done_err = 0.0;
    let mut stack = vec![(a, b, v0, e0, 0u32)];
    let mut total = v0;
    while let Some((lo, hi, v, e, depth)) = stack.pop() {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        let width_share = (hi - lo).abs() / (b - a).abs();
        if e <= tol * width_share.max(1e-6) || depth >= opts.max_depth {
            done.add(v);
            done_err += e;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evals += 30;
        total += v1 + v2 - v;
        stack.push((lo, mid, v1, e1, depth + 1));
        stack.push((mid, hi, v2, e2, depth + 1));
    }
    QuadResult {
        value: done.value(),
        error: done_err,
        evaluations: evals,
    }
}

/// Integrates over `[-radius, radius]`, splitting at the given breakpoints.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    radius: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> QuadResult {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && b.abs() < radius)
        .collect();
    pts.push(-radius);
    pts.push(radius);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut sum = NeumaierSum::new();
    let mut err = 0.0;
    let mut evals = 0;
    for w in pts.windows(2) {
        let r = integrate(&mut f, w[0], w[1], opts);
        sum.add(r.value);
        err += r.error;
        evals += r.evaluations;
    }
    QuadResult {
        value: sum.value(),
        error: err,
        evaluations: evals,
    }
}
