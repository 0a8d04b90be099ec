//! Exact coordinate decompositions on small finite product spaces.
//!
//! Functions on `Omega_1 x ... x Omega_N` are dense tables in mixed-radix
//! order with coordinate 0 varying fastest. `Avg_T` integrates out the
//! coordinates in `T` under the product null `Q`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::advantage::esp_prefix_sum;
use crate::error::{domain, LcdfError, Result};
use crate::numeric::special::binom_general;
use crate::numeric::NeumaierSum;

pub const MAX_STATES: usize = 1 << 20;
pub const MAX_HAT_SIZE: usize = 20;
pub const MAX_SIGNALS: usize = 4096;
const PMF_TOL: f64 = 1e-14;
const LEQ_AGREEMENT: f64 = 1e-10;

/// Set of coordinates as a bitmask; coordinate `i` is bit `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct CoordSet(pub u64);

impl CoordSet {
    pub fn empty() -> Self {
        CoordSet(0)
    }

    pub fn full(n: usize) -> Self {
        CoordSet(if n == 64 { u64::MAX } else { (1u64 << n) - 1 })
    }

    pub fn from_indices(idx: &[usize]) -> Self {
        CoordSet(idx.iter().fold(0, |m, &i| m | 1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn union(self, o: Self) -> Self {
        CoordSet(self.0 | o.0)
    }

    pub fn minus(self, o: Self) -> Self {
        CoordSet(self.0 & !o.0)
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }

    /// All subsets, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = CoordSet> {
        let full = self.0;
        let mut cur = Some(0u64);
        std::iter::from_fn(move || {
            let s = cur?;
            cur = if s == full { None } else { Some((s.wrapping_sub(full)) & full) };
            Some(CoordSet(s))
        })
    }
}

impl std::fmt::Display for CoordSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v: Vec<String> = self.indices().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", v.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalAtom {
    pub prob: f64,
    /// `channel_pmfs[i]` is the law of `y_i` given this signal.
    pub channel_pmfs: Vec<Vec<f64>>,
}

/// Finite latent variable model with a product null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLVM {
    /// Alphabet size of each coordinate.
    pub alphabets: Vec<usize>,
    pub null_pmfs: Vec<Vec<f64>>,
    pub signals: Vec<SignalAtom>,
}

fn check_pmf(p: &[f64], len: usize, what: &str, strict: bool) -> Result<()> {
    if p.len() != len {
        return Err(LcdfError::Validation(format!("{what}: length {} but alphabet size {len}", p.len())));
    }
    if p.iter().any(|&v| !v.is_finite() || v < 0.0 || (strict && v <= 0.0)) {
        let req = if strict { "strictly positive" } else { "non-negative" };
        return Err(LcdfError::Validation(format!("{what}: entries must be {req}")));
    }
    let s: f64 = p.iter().copied().collect::<NeumaierSum>().value();
    if (s - 1.0).abs() > PMF_TOL {
        return Err(LcdfError::Validation(format!("{what}: sums to {s}")));
    }
    Ok(())
}

/// Dense real function on the product space.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFunction {
    pub values: Vec<f64>,
}

impl TableFunction {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, o: &TableFunction) -> f64 {
        self.values.iter().zip(&o.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn axpy(&mut self, a: f64, x: &TableFunction) {
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }
}

impl DiscreteLVM {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let m: DiscreteLVM = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn n(&self) -> usize {
        self.alphabets.len()
    }

    pub fn states(&self) -> usize {
        self.alphabets.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || n > 64 {
            return Err(LcdfError::Validation(format!("need 1 <= N <= 64 coordinates, got {n}")));
        }
        if self.alphabets.contains(&0) {
            return Err(LcdfError::Validation("empty alphabet".into()));
        }
        let mut states: usize = 1;
        for &a in &self.alphabets {
            states = states.saturating_mul(a);
            if states > MAX_STATES {
                return Err(LcdfError::Validation(format!("state count exceeds cap {MAX_STATES}")));
            }
        }
        if self.null_pmfs.len() != n {
            return Err(LcdfError::Validation(format!("{} null pmfs for {n} coordinates", self.null_pmfs.len())));
        }
        for (i, q) in self.null_pmfs.iter().enumerate() {
            check_pmf(q, self.alphabets[i], &format!("null pmf {i}"), true)?;
        }
        if self.signals.is_empty() {
            return Err(LcdfError::Validation("empty signal support".into()));
        }
        let mut total = NeumaierSum::new();
        for (k, s) in self.signals.iter().enumerate() {
            if !(s.prob >= 0.0) {
                return Err(LcdfError::Validation(format!("signal {k}: negative probability")));
            }
            total.add(s.prob);
            if s.channel_pmfs.len() != n {
                return Err(LcdfError::Validation(format!("signal {k}: {} channel pmfs", s.channel_pmfs.len())));
            }
            for (i, p) in s.channel_pmfs.iter().enumerate() {
                check_pmf(p, self.alphabets[i], &format!("signal {k} coordinate {i}"), false)?;
            }
        }
        if (total.value() - 1.0).abs() > PMF_TOL {
            return Err(LcdfError::Validation(format!("signal probabilities sum to {}", total.value())));
        }
        Ok(())
    }

    fn stride(&self, i: usize) -> usize {
        self.alphabets[..i].iter().product()
    }

    /// Value of coordinate `i` at flat index `idx`.
    pub fn digit(&self, idx: usize, i: usize) -> usize {
        idx / self.stride(i) % self.alphabets[i]
    }

    pub fn table_from_fn(&self, f: impl Fn(&[usize]) -> f64) -> TableFunction {
        let mut y = vec![0usize; self.n()];
        let mut values = Vec::with_capacity(self.states());
        for _ in 0..self.states() {
            values.push(f(&y));
            for (d, a) in y.iter_mut().zip(&self.alphabets) {
                *d += 1;
                if *d < *a {
                    break;
                }
                *d = 0;
            }
        }
        TableFunction { values }
    }

    /// Product null mass of every outcome.
    pub fn null_weights(&self) -> TableFunction {
        self.table_from_fn(|y| y.iter().enumerate().map(|(i, &v)| self.null_pmfs[i][v]).product())
    }

    pub fn expect_null(&self, f: &TableFunction) -> f64 {
        let w = self.null_weights();
        w.values.iter().zip(&f.values).map(|(a, b)| a * b).collect::<NeumaierSum>().value()
    }

    pub fn inner(&self, f: &TableFunction, g: &TableFunction) -> f64 {
        let w = self.null_weights();
        w.values
            .iter()
            .zip(f.values.iter().zip(&g.values))
            .map(|(q, (a, b))| q * a * b)
            .collect::<NeumaierSum>()
            .value()
    }

    pub fn norm_sq(&self, f: &TableFunction) -> f64 {
        self.inner(f, f)
    }

    /// Overlap `R_i(x1, x2) = sum_w P_{i,x1}(w) P_{i,x2}(w) / Q_i(w) - 1`.
    pub fn coordinate_overlap(&self, i: usize, s1: usize, s2: usize) -> f64 {
        let p1 = &self.signals[s1].channel_pmfs[i];
        let p2 = &self.signals[s2].channel_pmfs[i];
        let q = &self.null_pmfs[i];
        (0..self.alphabets[i]).map(|w| p1[w] * p2[w] / q[w]).collect::<NeumaierSum>().value() - 1.0
    }

    /// Model on the coordinates of `t`, in increasing order.
    pub fn restrict(&self, t: CoordSet) -> Result<DiscreteLVM> {
        if t.is_empty() || t.indices().any(|i| i >= self.n()) {
            return domain(format!("{t} is not a non-empty subset of [0, {})", self.n()));
        }
        let keep: Vec<usize> = t.indices().collect();
        Ok(DiscreteLVM {
            alphabets: keep.iter().map(|&i| self.alphabets[i]).collect(),
            null_pmfs: keep.iter().map(|&i| self.null_pmfs[i].clone()).collect(),
            signals: self
                .signals
                .iter()
                .map(|s| SignalAtom {
                    prob: s.prob,
                    channel_pmfs: keep.iter().map(|&i| s.channel_pmfs[i].clone()).collect(),
                })
                .collect(),
        })
    }

    /// Extends a table on the coordinates of `t` to the full space.
    pub fn broadcast(&self, t: CoordSet, g: &TableFunction) -> TableFunction {
        let keep: Vec<usize> = t.indices().collect();
        let strides: Vec<usize> = keep
            .iter()
            .scan(1usize, |s, &i| {
                let cur = *s;
                *s *= self.alphabets[i];
                Some(cur)
            })
            .collect();
        self.table_from_fn(|y| g.values[keep.iter().zip(&strides).map(|(&i, &s)| y[i] * s).sum::<usize>()])
    }

    /// Bernoulli-output model: coordinate `i` is `Ber(c + x_i)` under signal
    /// `x` and `Ber(c)` under the null.
    pub fn bernoulli_product(c: f64, signals: &[(f64, Vec<f64>)]) -> Result<Self> {
        let n = signals.first().map_or(0, |s| s.1.len());
        let m = DiscreteLVM {
            alphabets: vec![2; n],
            null_pmfs: vec![vec![1.0 - c, c]; n],
            signals: signals
                .iter()
                .map(|(p, x)| SignalAtom {
                    prob: *p,
                    channel_pmfs: x.iter().map(|&xi| vec![1.0 - c - xi, c + xi]).collect(),
                })
                .collect(),
        };
        m.validate()?;
        Ok(m)
    }
}

/// Exact likelihood ratio `L(y) = E_x prod_i P_{i,x}(y_i) / Q_i(y_i)`.
pub fn likelihood_vector(model: &DiscreteLVM) -> Result<TableFunction> {
    model.validate()?;
    let l = model.table_from_fn(|y| {
        model
            .signals
            .iter()
            .map(|s| {
                s.prob
                    * y.iter()
                        .enumerate()
                        .map(|(i, &v)| s.channel_pmfs[i][v] / model.null_pmfs[i][v])
                        .product::<f64>()
            })
            .collect::<NeumaierSum>()
            .value()
    });
    let m = l.max_abs();
    if m > 1e6 {
        log::warn!("likelihood ratio reaches {m:e}; projections may lose accuracy");
    }
    Ok(l)
}

fn avg_coordinate(model: &DiscreteLVM, f: &mut TableFunction, i: usize) {
    let s = model.stride(i);
    let a = model.alphabets[i];
    let q = &model.null_pmfs[i];
    let block = s * a;
    for base in (0..f.values.len()).step_by(block) {
        for inner in 0..s {
            let v = (0..a).map(|k| q[k] * f.values[base + k * s + inner]).collect::<NeumaierSum>().value();
            for k in 0..a {
                f.values[base + k * s + inner] = v;
            }
        }
    }
}

/// `Avg_T f`: conditional expectation integrating out the coordinates in `T`.
pub fn avg_operator(model: &DiscreteLVM, f: &TableFunction, t: CoordSet) -> TableFunction {
    let mut g = f.clone();
    for i in t.indices().filter(|&i| i < model.n()) {
        avg_coordinate(model, &mut g, i);
    }
    g
}

fn check_subset(model: &DiscreteLVM, t: CoordSet) -> Result<()> {
    if t.minus(CoordSet::full(model.n())).0 != 0 {
        return domain(format!("{t} is not a subset of [0, {})", model.n()));
    }
    Ok(())
}

fn check_hat(model: &DiscreteLVM, t: CoordSet) -> Result<()> {
    check_subset(model, t)?;
    if t.len() > MAX_HAT_SIZE {
        return domain(format!("|T| = {} exceeds {MAX_HAT_SIZE}", t.len()));
    }
    Ok(())
}

/// Projection onto `hat V_T` by inclusion-exclusion:
/// `sum_{S <= T} (-1)^{|T|-|S|} Avg_{[N] \ S} f`.
pub fn project_hat(model: &DiscreteLVM, f: &TableFunction, t: CoordSet) -> Result<TableFunction> {
    check_hat(model, t)?;
    let full = CoordSet::full(model.n());
    let mut out = TableFunction { values: vec![0.0; f.values.len()] };
    for s in t.subsets() {
        let sign = if (t.len() - s.len()).is_multiple_of(2) { 1.0 } else { -1.0 };
        out.axpy(sign, &avg_operator(model, f, full.minus(s)));
    }
    Ok(out)
}

/// Projection onto `hat V_T` as `prod_{i in T} (Id - Avg_i) prod_{i not in T} Avg_i f`.
pub fn project_hat_product(model: &DiscreteLVM, f: &TableFunction, t: CoordSet) -> Result<TableFunction> {
    check_hat(model, t)?;
    let mut g = avg_operator(model, f, CoordSet::full(model.n()).minus(t));
    for i in t.indices() {
        let mut a = g.clone();
        avg_coordinate(model, &mut a, i);
        g.axpy(-1.0, &a);
    }
    Ok(g)
}

fn subsets_up_to(n: usize, d: usize) -> Vec<CoordSet> {
    CoordSet::full(n).subsets().filter(|s| s.len() <= d).collect()
}

/// `P_{<=D} f` as `sum_{|T| <= D} (-1)^{D-|T|} C(N-|T|-1, D-|T|) Avg_{[N] \ T} f`.
pub fn project_leq_closed_form(model: &DiscreteLVM, f: &TableFunction, d: usize) -> Result<TableFunction> {
    let n = model.n();
    if d > n {
        return domain(format!("D = {d} exceeds N = {n}"));
    }
    let full = CoordSet::full(n);
    let mut out = TableFunction { values: vec![0.0; f.values.len()] };
    for t in subsets_up_to(n, d) {
        let k = d - t.len();
        let c = binom_general(n as i64 - t.len() as i64 - 1, k as i64);
        if c == 0.0 {
            continue;
        }
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        out.axpy(sign * c, &avg_operator(model, f, full.minus(t)));
    }
    Ok(out)
}

/// `P_{<=D} f` as the sum of `hat V_T` projections over `|T| <= D`,
/// cross-checked against the closed form.
pub fn project_leq(model: &DiscreteLVM, f: &TableFunction, d: usize) -> Result<TableFunction> {
    let n = model.n();
    if d > n {
        return domain(format!("D = {d} exceeds N = {n}"));
    }
    let mut out = TableFunction { values: vec![0.0; f.values.len()] };
    for t in subsets_up_to(n, d) {
        out.axpy(1.0, &project_hat(model, f, t)?);
    }
    let alt = project_leq_closed_form(model, f, d)?;
    let diff = out.max_abs_diff(&alt);
    if diff > LEQ_AGREEMENT * (1.0 + f.max_abs()) {
        return Err(LcdfError::Numerical {
            message: "projection routes disagree".into(),
            achieved: diff,
        });
    }
    Ok(out)
}

/// Exact `||P_{<=D} L||` in `L^2(Q)`.
pub fn cadv_exact(model: &DiscreteLVM, d: usize) -> Result<f64> {
    let l = likelihood_vector(model)?;
    let p = project_leq(model, &l, d.min(model.n()))?;
    Ok(model.norm_sq(&p).sqrt())
}

/// Exact `sqrt(E_{x1,x2} sum_{|T| <= D} prod_{i in T} R_i(x1, x2))` by
/// enumerating signal pairs.
pub fn cadv_formula_exact(model: &DiscreteLVM, d: usize) -> Result<f64> {
    model.validate()?;
    let k = model.signals.len();
    if k > MAX_SIGNALS {
        return domain(format!("{k} signals exceed the pair-enumeration cap {MAX_SIGNALS}"));
    }
    let mut acc = NeumaierSum::new();
    let mut r = vec![0.0; model.n()];
    for a in 0..k {
        for b in 0..k {
            let w = model.signals[a].prob * model.signals[b].prob;
            if w == 0.0 {
                continue;
            }
            for (i, ri) in r.iter_mut().enumerate() {
                *ri = model.coordinate_overlap(i, a, b);
            }
            acc.add(w * esp_prefix_sum(&r, d));
        }
    }
    Ok(acc.value().sqrt())
}

/// `chi^2(P || Q) = E_Q L^2 - 1`.
pub fn chi_squared(model: &DiscreteLVM) -> Result<f64> {
    let l = likelihood_vector(model)?;
    Ok(model.norm_sq(&l) - 1.0)
}

/// `||hat L_T||^2` for every non-empty `T`.
pub fn chi2_decomposition(model: &DiscreteLVM) -> Result<BTreeMap<CoordSet, f64>> {
    let l = likelihood_vector(model)?;
    let mut out = BTreeMap::new();
    for t in CoordSet::full(model.n()).subsets().filter(|t| !t.is_empty()) {
        let h = project_hat(model, &l, t)?;
        out.insert(t, model.norm_sq(&h));
    }
    Ok(out)
}

/// Marginal likelihood ratio `L_T` computed from the restricted model and
/// extended to the full space.
pub fn marginal_likelihood(model: &DiscreteLVM, t: CoordSet) -> Result<TableFunction> {
    check_subset(model, t)?;
    if t.is_empty() {
        return Ok(TableFunction { values: vec![1.0; model.states()] });
    }
    let sub = model.restrict(t)?;
    Ok(model.broadcast(t, &likelihood_vector(&sub)?))
}

/// LCDLR written through marginal likelihood ratios:
/// `sum_{|T| <= D} (-1)^{D-|T|} C(N-|T|-1, D-|T|) L_T`.
pub fn lcdlr_mean_field(model: &DiscreteLVM, d: usize) -> Result<TableFunction> {
    let n = model.n();
    if d > n {
        return domain(format!("D = {d} exceeds N = {n}"));
    }
    let mut out = TableFunction { values: vec![0.0; model.states()] };
    for t in subsets_up_to(n, d) {
        let k = d - t.len();
        let c = binom_general(n as i64 - t.len() as i64 - 1, k as i64);
        if c == 0.0 {
            continue;
        }
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        out.axpy(sign * c, &marginal_likelihood(model, t)?);
    }
    Ok(out)
}

fn random_pmf<R: Rng + ?Sized>(rng: &mut R, a: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..a).map(|_| floor + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| v / s).collect();
    let head: f64 = p[..a - 1].iter().sum();
    p[a - 1] = 1.0 - head;
    p
}

/// Random model with `1 <= N <= max_n`, alphabets in `2..=max_alphabet` and
/// up to `max_support` signals; null pmfs are bounded away from zero.
pub fn random_tiny_model<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_alphabet: usize, max_support: usize) -> DiscreteLVM {
    let n = rng.random_range(1..=max_n);
    let alphabets: Vec<usize> = (0..n).map(|_| rng.random_range(2..=max_alphabet)).collect();
    let null_pmfs = alphabets.iter().map(|&a| random_pmf(rng, a, 0.2)).collect();
    let k = rng.random_range(1..=max_support);
    let probs = random_pmf(rng, k, 0.05);
    let signals = probs
        .into_iter()
        .map(|prob| SignalAtom {
            prob,
            channel_pmfs: alphabets.iter().map(|&a| random_pmf(rng, a, 0.0)).collect(),
        })
        .collect();
    DiscreteLVM { alphabets, null_pmfs, signals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn tiny(seed: u64) -> DiscreteLVM {
        random_tiny_model(&mut stream(seed, 0), 4, 3, 6)
    }

    fn random_table<R: Rng>(m: &DiscreteLVM, rng: &mut R) -> TableFunction {
        TableFunction {
            values: (0..m.states()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
        }
    }

    fn single_bernoulli() -> DiscreteLVM {
        DiscreteLVM::bernoulli_product(0.5, &[(1.0, vec![0.25])]).unwrap()
    }

    fn cube(n: usize) -> DiscreteLVM {
        DiscreteLVM {
            alphabets: vec![2; n],
            null_pmfs: vec![vec![0.5, 0.5]; n],
            signals: vec![SignalAtom {
                prob: 1.0,
                channel_pmfs: vec![vec![0.5, 0.5]; n],
            }],
        }
    }

    #[test]
    fn subsets_enumerates_power_set() {
        let t = CoordSet::from_indices(&[0, 2, 5]);
        let s: Vec<CoordSet> = t.subsets().collect();
        assert_eq!(s.len(), 8);
        assert!(s.iter().all(|x| x.minus(t).is_empty()));
        assert_eq!(CoordSet::empty().subsets().count(), 1);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = tiny(1);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(DiscreteLVM::from_json_str(&s).unwrap(), m);
        let bad = r#"{"alphabets":[2],"null_pmfs":[[0.5,0.5000001]],"signals":[{"prob":1.0,"channel_pmfs":[[0.5,0.5]]}]}"#;
        assert!(DiscreteLVM::from_json_str(bad).is_err());
        let zero = r#"{"alphabets":[2],"null_pmfs":[[0.0,1.0]],"signals":[{"prob":1.0,"channel_pmfs":[[0.5,0.5]]}]}"#;
        assert!(DiscreteLVM::from_json_str(zero).is_err());
        let big = DiscreteLVM {
            alphabets: vec![2; 21],
            null_pmfs: vec![vec![0.5, 0.5]; 21],
            signals: vec![SignalAtom { prob: 1.0, channel_pmfs: vec![vec![0.5, 0.5]; 21] }],
        };
        assert!(big.validate().is_err());
    }

    #[test]
    fn likelihood_examples() {
        let m = single_bernoulli();
        let l = likelihood_vector(&m).unwrap();
        assert!((l.values[0] - 0.5).abs() < 1e-15);
        assert!((l.values[1] - 1.5).abs() < 1e-15);
        let c = cube(3);
        assert!(likelihood_vector(&c).unwrap().values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        for seed in 0..20 {
            let m = tiny(seed);
            let l = likelihood_vector(&m).unwrap();
            assert!((m.expect_null(&l) - 1.0).abs() < 1e-12);
            assert!(l.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn averaging_properties() {
        for seed in 0..10 {
            let m = tiny(seed);
            let f = random_table(&m, &mut stream(seed, 1));
            assert_eq!(avg_operator(&m, &f, CoordSet::empty()), f);
            let all = avg_operator(&m, &f, CoordSet::full(m.n()));
            let e = m.expect_null(&f);
            assert!(all.values.iter().all(|v| (v - e).abs() < 1e-14));
            if m.n() >= 2 {
                let a = avg_operator(&m, &avg_operator(&m, &f, CoordSet(1)), CoordSet(2));
                let b = avg_operator(&m, &avg_operator(&m, &f, CoordSet(2)), CoordSet(1));
                assert!(a.max_abs_diff(&b) < 1e-15);
                let u = avg_operator(&m, &f, CoordSet(3));
                assert!(a.max_abs_diff(&u) < 1e-15);
            }
            let once = avg_operator(&m, &f, CoordSet(1));
            assert!(avg_operator(&m, &once, CoordSet(1)).max_abs_diff(&once) < 1e-15);
        }
    }

    #[test]
    fn boolean_monomials() {
        let n = 4;
        let m = cube(n);
        for s in CoordSet::full(n).subsets() {
            let f = m.table_from_fn(|y| s.indices().map(|i| if y[i] == 1 { 1.0 } else { -1.0 }).product());
            for t in CoordSet::full(n).subsets() {
                let p = project_hat(&m, &f, t).unwrap();
                let want = if s == t { f.clone() } else { TableFunction { values: vec![0.0; f.values.len()] } };
                assert!(p.max_abs_diff(&want) < 1e-12, "S={s} T={t}");
            }
        }
    }

    #[test]
    fn hat_of_centered_product_is_identity() {
        let m = tiny(5);
        let mut rng = stream(5, 2);
        let t = CoordSet::full(m.n());
        // centered per-coordinate factors
        let factors: Vec<Vec<f64>> = (0..m.n())
            .map(|i| {
                let g: Vec<f64> = (0..m.alphabets[i]).map(|_| rng.random::<f64>()).collect();
                let mean: f64 = g.iter().zip(&m.null_pmfs[i]).map(|(a, b)| a * b).sum();
                g.iter().map(|v| v - mean).collect()
            })
            .collect();
        let f = m.table_from_fn(|y| y.iter().enumerate().map(|(i, &v)| factors[i][v]).product());
        let p = project_hat(&m, &f, t).unwrap();
        assert!(p.max_abs_diff(&f) < 1e-12);
        let e = project_hat(&m, &f, CoordSet::empty()).unwrap();
        assert!(e.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn hat_projection_structure() {
        for seed in 0..15 {
            let m = tiny(seed);
            let mut rng = stream(seed, 3);
            let f = random_table(&m, &mut rng);
            let g = random_table(&m, &mut rng);
            let sets: Vec<CoordSet> = CoordSet::full(m.n()).subsets().collect();
            let pf: Vec<TableFunction> = sets.iter().map(|&t| project_hat(&m, &f, t).unwrap()).collect();
            let pg: Vec<TableFunction> = sets.iter().map(|&t| project_hat(&m, &g, t).unwrap()).collect();
            for a in 0..sets.len() {
                let prod = project_hat_product(&m, &f, sets[a]).unwrap();
                assert!(prod.max_abs_diff(&pf[a]) < 1e-12);
                let twice = project_hat(&m, &pf[a], sets[a]).unwrap();
                assert!(twice.max_abs_diff(&pf[a]) < 1e-12);
                for (b, h) in pg.iter().enumerate() {
                    if a != b {
                        assert!(m.inner(&pf[a], h).abs() < 1e-12);
                    }
                }
            }
            let mut sum = TableFunction { values: vec![0.0; f.values.len()] };
            for p in &pf {
                sum.axpy(1.0, p);
            }
            assert!(sum.max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn project_leq_edges() {
        let m = tiny(7);
        let f = random_table(&m, &mut stream(7, 4));
        let id = project_leq(&m, &f, m.n()).unwrap();
        assert!(id.max_abs_diff(&f) < 1e-12);
        let c = project_leq(&m, &f, 0).unwrap();
        let e = m.expect_null(&f);
        assert!(c.values.iter().all(|v| (v - e).abs() < 1e-12));
        assert!(project_leq(&m, &f, m.n() + 1).is_err());
    }

    #[test]
    fn two_routes_agree_on_tiny_models() {
        for seed in 0..200 {
            let m = tiny(seed);
            let mut prev = 0.0;
            for d in 0..=m.n() {
                let a = cadv_exact(&m, d).unwrap();
                let b = cadv_formula_exact(&m, d).unwrap();
                assert!((a - b).abs() <= 1e-10, "seed {seed} d {d}: {a} vs {b}");
                assert!(a >= prev - 1e-12);
                prev = a;
            }
            assert!((cadv_exact(&m, 0).unwrap() - 1.0).abs() < 1e-12);
            let full = cadv_exact(&m, m.n()).unwrap();
            assert!((full * full - 1.0 - chi_squared(&m).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn single_coordinate_bernoulli() {
        let m = single_bernoulli();
        assert!((cadv_exact(&m, 1).unwrap() - 1.25f64.sqrt()).abs() < 1e-15);
        assert!((cadv_formula_exact(&m, 1).unwrap() - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn null_signal_gives_one() {
        let m = DiscreteLVM::bernoulli_product(0.3, &[(1.0, vec![0.0; 3])]).unwrap();
        for d in 0..=3 {
            assert!((cadv_formula_exact(&m, d).unwrap() - 1.0).abs() < 1e-15);
            assert!((cadv_exact(&m, d).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(chi2_decomposition(&m).unwrap().values().all(|v| v.abs() < 1e-24));
    }

    #[test]
    fn chi2_decomposition_sums() {
        for seed in 0..20 {
            let m = tiny(seed);
            let dec = chi2_decomposition(&m).unwrap();
            let s: f64 = dec.values().sum();
            assert!((s - chi_squared(&m).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn product_planted_pair_mass_is_product_of_singletons() {
        // L = L_1 L_2 gives hat L_{12} = (L_1 - 1)(L_2 - 1)
        let m = DiscreteLVM::bernoulli_product(0.5, &[(1.0, vec![0.2, -0.1])]).unwrap();
        let dec = chi2_decomposition(&m).unwrap();
        assert!((dec[&CoordSet(1)] - 0.16).abs() < 1e-14);
        assert!((dec[&CoordSet(2)] - 0.04).abs() < 1e-14);
        assert!((dec[&CoordSet(3)] - 0.16 * 0.04).abs() < 1e-14);
    }

    #[test]
    fn one_active_coordinate_mixture_has_singleton_mass_only() {
        let m = DiscreteLVM::bernoulli_product(0.5, &[(0.5, vec![0.2, 0.0]), (0.5, vec![0.0, -0.1])]).unwrap();
        let dec = chi2_decomposition(&m).unwrap();
        assert!(dec[&CoordSet(3)].abs() < 1e-15);
        assert!((dec[&CoordSet(1)] - 0.04).abs() < 1e-14);
        assert!((dec[&CoordSet(2)] - 0.01).abs() < 1e-14);
    }

    #[test]
    fn marginal_consistency_and_mean_field() {
        for seed in 0..30 {
            let m = tiny(seed);
            let l = likelihood_vector(&m).unwrap();
            let full = CoordSet::full(m.n());
            for t in full.subsets() {
                let a = avg_operator(&m, &l, full.minus(t));
                let b = marginal_likelihood(&m, t).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-12);
            }
            for d in 0..=m.n() {
                let mf = lcdlr_mean_field(&m, d).unwrap();
                let p = project_leq(&m, &l, d).unwrap();
                assert!(mf.max_abs_diff(&p) < 1e-10, "seed {seed} d {d}");
            }
        }
    }

    #[test]
    fn hat_size_cap() {
        let m = DiscreteLVM {
            alphabets: vec![1; 21],
            null_pmfs: vec![vec![1.0]; 21],
            signals: vec![SignalAtom { prob: 1.0, channel_pmfs: vec![vec![1.0]; 21] }],
        };
        let f = TableFunction { values: vec![1.0] };
        assert!(project_hat(&m, &f, CoordSet::full(21)).is_err());
        assert!(project_hat(&m, &f, CoordSet::full(20)).is_ok());
    }
}
