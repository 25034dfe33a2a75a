//! Event probabilities `Pr_{x ~ mu^n}[f(x) = a]`.
//!
//! Three routes: exact enumeration of `[q]^n`, the closed form for the
//! zero-event of the tribes variant, and plain Monte Carlo driven through
//! the quantile map `G` of `mu`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::{cube_size, FunctionSpec, Kind};
use crate::measures::SimplexMeasure;

/// Samples per Monte-Carlo chunk; chunk `c` draws from RNG stream `c`.
const MC_CHUNK: u64 = 1 << 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExactEnumeration,
    ClosedForm,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactEnumeration => "exact-enumeration",
            Method::ClosedForm => "closed-form",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

/// A probability with its standard error; exact methods carry zero error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
    pub samples: u64,
}

impl Estimate {
    fn exact(value: f64, method: Method) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            std_error: 0.0,
            method,
            samples: 0,
        }
    }
}

/// How probabilities are computed by the threshold routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluator {
    Exact { cap: u64 },
    ClosedForm,
    MonteCarlo { samples: u64, seed: u64 },
}

impl Evaluator {
    pub fn probability(&self, f: &FunctionSpec, mu: &SimplexMeasure, a: usize) -> Result<Estimate> {
        match *self {
            Evaluator::Exact { cap } => exact_probability(f, mu, a, cap),
            Evaluator::ClosedForm => closed_form_probability(f, mu, a),
            Evaluator::MonteCarlo { samples, seed } => mc_probability(f, mu, a, samples, seed),
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, Evaluator::MonteCarlo { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Evaluator::Exact { .. } => "exact",
            Evaluator::ClosedForm => "closed",
            Evaluator::MonteCarlo { .. } => "mc",
        }
    }
}

fn check_dims(f: &FunctionSpec, mu: &SimplexMeasure) -> Result<()> {
    if f.q() != mu.q() {
        return Err(Error::DimensionMismatch {
            expected: f.q(),
            got: mu.q(),
        });
    }
    Ok(())
}

fn check_value(f: &FunctionSpec, a: usize) -> Result<()> {
    let bound = match f.kind() {
        Kind::Full => f.q(),
        Kind::Indicator => 2,
    };
    if a >= bound {
        return Err(Error::InvalidFunction(format!(
            "event value {a} outside the range of f"
        )));
    }
    Ok(())
}

/// Visits every point of `[q]^{len(x)}` with positive weight under the
/// product of `atoms`, depth first in lexicographic order. Prefix products
/// are carried down the recursion; zero atoms prune whole subtrees.
pub(crate) fn for_each_weighted(
    atoms: &[f64],
    x: &mut [usize],
    depth: usize,
    weight: f64,
    visit: &mut dyn FnMut(&mut [usize], f64),
) {
    if depth == x.len() {
        visit(x, weight);
        return;
    }
    for (v, &w) in atoms.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        x[depth] = v;
        for_each_weighted(atoms, x, depth + 1, weight * w, visit);
    }
}

/// `sum_x prod_k mu(x_k) * 1[f(x) = a]` over all of `[q]^n`.
pub fn exact_probability(
    f: &FunctionSpec,
    mu: &SimplexMeasure,
    a: usize,
    cap: u64,
) -> Result<Estimate> {
    check_dims(f, mu)?;
    check_value(f, a)?;
    cube_size(f.q(), f.n(), cap)?;
    let atoms = mu.atoms();
    let n = f.n();
    // Split on the first coordinate; partial sums are added in index order.
    let partial: Vec<f64> = (0..f.q())
        .into_par_iter()
        .map(|first| {
            let w0 = atoms[first];
            if w0 == 0.0 {
                return 0.0;
            }
            let mut x = vec![0; n];
            x[0] = first;
            let mut acc = 0.0;
            for_each_weighted(atoms, &mut x, 1, w0, &mut |x, w| {
                if f.eval(x) == a {
                    acc += w;
                }
            });
            acc
        })
        .collect();
    Ok(Estimate::exact(
        partial.iter().sum(),
        Method::ExactEnumeration,
    ))
}

/// `1 - prod_T (1 - p0^|T|)`: probability that some tribe is all-zero.
pub fn tribes_prob_zero(tribe_sizes: &[usize], p0: f64) -> f64 {
    let runs: Vec<(usize, usize)> = tribe_sizes
        .chunk_by(|x, y| x == y)
        .map(|run| (run[0], run.len()))
        .collect();
    tribes_prob_zero_runs(&runs, p0)
}

/// [`tribes_prob_zero`] with sizes given as `(size, count)` runs.
pub fn tribes_prob_zero_runs(runs: &[(usize, usize)], p0: f64) -> f64 {
    if p0 <= 0.0 {
        return 0.0;
    }
    if p0 >= 1.0 {
        return 1.0;
    }
    let log_none: f64 = runs
        .iter()
        .map(|&(size, count)| count as f64 * (-p0.powi(size as i32)).ln_1p())
        .sum();
    -log_none.exp_m1()
}

/// Closed-form route; covers the zero-event of the tribes variant only.
pub fn closed_form_probability(
    f: &FunctionSpec,
    mu: &SimplexMeasure,
    a: usize,
) -> Result<Estimate> {
    check_dims(f, mu)?;
    check_value(f, a)?;
    let tribes = f.tribes().ok_or_else(|| {
        Error::Unsupported("closed form exists only for the tribes family".into())
    })?;
    let zero = tribes_prob_zero_runs(&tribes.size_runs(), mu.atom(0));
    let value = match (f.kind(), f.indicator_value()) {
        (Kind::Full, _) if a == 0 => zero,
        (Kind::Indicator, Some(0)) => {
            if a == 1 {
                zero
            } else {
                1.0 - zero
            }
        }
        _ => {
            return Err(Error::Unsupported(
                "closed form covers only the event f = 0 of the tribes family".into(),
            ))
        }
    };
    Ok(Estimate::exact(value, Method::ClosedForm))
}

/// Binomial standard error; at `p_hat` in `{0, 1}` the rule-of-three bound
/// `3 / samples` stands in for zero.
pub fn binomial_std_error(hits: u64, samples: u64) -> f64 {
    if hits == 0 || hits == samples {
        return 3.0 / samples as f64;
    }
    let p = hits as f64 / samples as f64;
    (p * (1.0 - p) / samples as f64).sqrt()
}

/// RNG for chunk `stream` of a seeded run.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Empirical frequency of `f(x) = a` over `samples` draws of `x ~ mu^n`.
/// Bit-for-bit reproducible given `(seed, samples)`.
pub fn mc_probability(
    f: &FunctionSpec,
    mu: &SimplexMeasure,
    a: usize,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    check_dims(f, mu)?;
    check_value(f, a)?;
    if samples == 0 {
        return Err(Error::OutOfRange {
            name: "samples",
            value: 0.0,
            range: ">= 1",
        });
    }
    let g = quantile_encode(mu);
    let n = f.n();
    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c);
            let take = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut x = vec![0; n];
            let mut hits = 0u64;
            for _ in 0..take {
                for slot in x.iter_mut() {
                    *slot = g.map(rng.gen::<f64>());
                }
                hits += u64::from(f.eval(&x) == a);
            }
            hits
        })
        .sum();
    Ok(Estimate {
        value: hits as f64 / samples as f64,
        std_error: binomial_std_error(hits, samples),
        method: Method::MonteCarlo,
        samples,
    })
}

/// The CDF-inversion step map `G: [0, 1] -> [q]` of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileMap {
    /// `cum[i] = sum_{l <= i} mu(l)`.
    cum: Vec<f64>,
    atoms: Vec<f64>,
}

/// `G(x) = i` for `x` in `[sum_{l<i} mu(l), sum_{l<=i} mu(l))`, `G(1) = q - 1`.
pub fn quantile_encode(mu: &SimplexMeasure) -> QuantileMap {
    let mut acc = 0.0;
    let cum = mu
        .atoms()
        .iter()
        .map(|a| {
            acc += a;
            acc
        })
        .collect();
    QuantileMap {
        cum,
        atoms: mu.atoms().to_vec(),
    }
}

impl QuantileMap {
    pub fn map(&self, x: f64) -> usize {
        let last = self.cum.len() - 1;
        // First cell whose right end exceeds x; everything past the last
        // interior boundary (including x = 1) lands in q - 1.
        self.cum[..last].partition_point(|&c| c <= x)
    }

    /// The half-open cell `[lo, hi)` mapped to symbol `i`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { 0.0 } else { self.cum[i - 1] };
        let hi = if i + 1 == self.cum.len() {
            1.0
        } else {
            self.cum[i]
        };
        (lo, hi)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }
}

/// `Var_mu(f) = p (1 - p)` with `p = Pr[f = 1]` for an indicator `f`.
pub fn variance_of_indicator(f: &FunctionSpec, mu: &SimplexMeasure, cap: u64) -> Result<f64> {
    if f.kind() != Kind::Indicator {
        return Err(Error::InvalidFunction(
            "variance needs an indicator function".into(),
        ));
    }
    let p = exact_probability(f, mu, 1, cap)?.value;
    Ok(p * (1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{
        build_tribes_with_size, indicator, point_of_index, random_zero_monotone,
    };
    use crate::measures::{mix_t, sample_uniform, SimplexMeasure};

    const CAP: u64 = crate::DEFAULT_ENUMERATION_CAP;

    fn m(a: &[f64]) -> SimplexMeasure {
        SimplexMeasure::new(a.to_vec()).unwrap()
    }

    /// Plain index loop, no pruning or prefix products.
    fn brute_probability(f: &FunctionSpec, mu: &SimplexMeasure, a: usize) -> f64 {
        let (q, n) = (f.q(), f.n());
        let mut x = vec![0; n];
        (0..q.pow(n as u32))
            .map(|idx| {
                point_of_index(q, idx, &mut x);
                let w: f64 = x.iter().map(|&c| mu.atom(c)).product();
                if f.eval(&x) == a {
                    w
                } else {
                    0.0
                }
            })
            .sum()
    }

    #[test]
    fn exact_probability_examples() {
        let c = FunctionSpec::constant(3, 3, Kind::Full, 2, CAP).unwrap();
        assert_eq!(
            exact_probability(&c, &m(&[0.2, 0.3, 0.5]), 2, CAP)
                .unwrap()
                .value,
            1.0
        );

        let f = FunctionSpec::from_fn(3, 2, Kind::Full, CAP, |x| x[0].max(x[1])).unwrap();
        for j in 0..3 {
            let delta = SimplexMeasure::point_mass(3, j).unwrap();
            for a in 0..3 {
                let want = if f.eval(&[j, j]) == a { 1.0 } else { 0.0 };
                assert_eq!(exact_probability(&f, &delta, a, CAP).unwrap().value, want);
            }
        }

        let tribes = build_tribes_with_size(3, 4, 2).unwrap();
        let mu = m(&[0.5, 0.25, 0.25]);
        let brute = brute_probability(&tribes, &mu, 0);
        assert!((brute - 7.0 / 16.0).abs() < 1e-15);
        let got = exact_probability(&tribes, &mu, 0, CAP).unwrap();
        assert!((got.value - 7.0 / 16.0).abs() < 1e-15);
        assert_eq!(got.std_error, 0.0);
        assert!(exact_probability(&tribes, &mu, 0, 10).is_err());
    }

    #[test]
    fn probabilities_sum_to_one() {
        let f = FunctionSpec::from_fn(3, 4, Kind::Full, CAP, |x| (x[0] * x[3] + x[1]) % 3).unwrap();
        let mut rng = stream_rng(9, 0);
        for _ in 0..5 {
            let mu = sample_uniform(3, &mut rng).unwrap();
            let total: f64 = (0..3)
                .map(|a| exact_probability(&f, &mu, a, CAP).unwrap().value)
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
            for a in 0..3 {
                let got = exact_probability(&f, &mu, a, CAP).unwrap().value;
                assert!((got - brute_probability(&f, &mu, a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tribes_closed_form_examples() {
        assert_eq!(tribes_prob_zero(&[2, 2], 0.0), 0.0);
        assert_eq!(tribes_prob_zero(&[2, 2], 1.0), 1.0);
        assert!((tribes_prob_zero(&[2, 2], 0.5) - 7.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn tribes_closed_form_matches_enumeration() {
        let mut rng = stream_rng(11, 0);
        for (n, r) in [(4, 2), (6, 2), (6, 3), (6, 4)] {
            let f = build_tribes_with_size(3, n, r).unwrap();
            for _ in 0..10 {
                let mu = sample_uniform(3, &mut rng).unwrap();
                let closed = tribes_prob_zero(&f.tribes().unwrap().sizes, mu.atom(0));
                let exact = exact_probability(&f, &mu, 0, CAP).unwrap().value;
                assert!((closed - exact).abs() < 1e-12, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn closed_form_evaluator_routes() {
        let f = build_tribes_with_size(3, 4, 2).unwrap();
        let ind = indicator(&f, 0, CAP).unwrap();
        let mu = m(&[0.5, 0.25, 0.25]);
        let ev = Evaluator::ClosedForm;
        assert!((ev.probability(&f, &mu, 0).unwrap().value - 0.4375).abs() < 1e-15);
        assert!((ev.probability(&ind, &mu, 1).unwrap().value - 0.4375).abs() < 1e-15);
        assert!((ev.probability(&ind, &mu, 0).unwrap().value - 0.5625).abs() < 1e-15);
        assert!(ev.probability(&f, &mu, 1).is_err());
        let table = FunctionSpec::constant(3, 2, Kind::Full, 0, CAP).unwrap();
        assert!(ev.probability(&table, &mu, 0).is_err());
    }

    #[test]
    fn monte_carlo_against_exact() {
        let f = build_tribes_with_size(3, 4, 2).unwrap();
        let mu = m(&[0.5, 0.25, 0.25]);
        for a in 0..3 {
            let exact = exact_probability(&f, &mu, a, CAP).unwrap().value;
            let est = mc_probability(&f, &mu, a, 1_000_000, 42).unwrap();
            assert!(
                (est.value - exact).abs() <= 4.0 * est.std_error,
                "a={a}: {} vs {exact}",
                est.value
            );
        }
        let c = FunctionSpec::constant(3, 2, Kind::Full, 1, CAP).unwrap();
        let est = mc_probability(&c, &mu, 1, 1000, 1).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.std_error, 3.0 / 1000.0);
        assert!(mc_probability(&c, &mu, 1, 0, 1).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let f = random_zero_monotone(3, 4, 0.05, 3, CAP).unwrap();
        let mu = m(&[0.3, 0.3, 0.4]);
        let a = mc_probability(&f, &mu, 1, 50_000, 17).unwrap();
        let b = mc_probability(&f, &mu, 1, 50_000, 17).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let c = mc_probability(&f, &mu, 1, 50_000, 18).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn quantile_examples() {
        let g = quantile_encode(&SimplexMeasure::uniform(3).unwrap());
        assert_eq!(g.map(0.5), 1);
        assert_eq!(g.map(1.0), 2);
        assert_eq!(g.map(0.0), 0);
        let skewed = quantile_encode(&m(&[0.0, 0.5, 0.5]));
        assert_eq!(skewed.map(0.0), 1);
        assert_eq!(skewed.map(0.5), 2);
        let tail_zero = quantile_encode(&m(&[0.5, 0.5, 0.0]));
        assert_eq!(tail_zero.map(0.99), 1);
        assert_eq!(tail_zero.map(1.0), 2);
    }

    #[test]
    fn quantile_pushforward_matches_atoms() {
        let mu = m(&[0.1, 0.25, 0.0, 0.65]);
        let g = quantile_encode(&mu);
        for (i, &a) in mu.atoms().iter().enumerate() {
            let (lo, hi) = g.interval(i);
            assert!(((hi - lo) - a).abs() <= 4.0 * f64::EPSILON, "cell {i}");
        }
        let n = 100_000;
        let mut counts = [0u64; 4];
        let mut rng = stream_rng(5, 0);
        for _ in 0..n {
            counts[g.map(rng.gen::<f64>())] += 1;
        }
        for (i, &a) in mu.atoms().iter().enumerate() {
            let sigma = (a * (1.0 - a) / n as f64).sqrt();
            let freq = counts[i] as f64 / n as f64;
            assert!(
                (freq - a).abs() <= 4.0 * sigma + 1e-12,
                "atom {i}: {freq} vs {a}"
            );
        }
    }

    #[test]
    fn variance_examples() {
        let c = FunctionSpec::constant(3, 2, Kind::Indicator, 1, CAP).unwrap();
        assert_eq!(
            variance_of_indicator(&c, &m(&[0.2, 0.3, 0.5]), CAP).unwrap(),
            0.0
        );
        let half = FunctionSpec::from_fn(2, 1, Kind::Indicator, CAP, |x| x[0]).unwrap();
        assert_eq!(
            variance_of_indicator(&half, &m(&[0.5, 0.5]), CAP).unwrap(),
            0.25
        );

        let up = random_zero_monotone(3, 3, 0.08, 4, CAP).unwrap();
        let mu = m(&[0.2, 0.5, 0.3]);
        let e1 = brute_probability(&up, &mu, 1);
        // f is {0,1}-valued, so E[f^2] = E[f].
        let moment = e1 - e1 * e1;
        assert!((variance_of_indicator(&up, &mu, CAP).unwrap() - moment).abs() < 1e-15);
    }

    #[test]
    fn probability_is_monotone_along_lines() {
        let base = m(&[0.0, 0.3, 0.7]);
        for seed in 0..10 {
            let f = random_zero_monotone(3, 3, 0.06, seed, CAP).unwrap();
            let mut prev = 0.0;
            for j in 0..100 {
                let t = j as f64 / 99.0;
                let p = exact_probability(&f, &mix_t(&base, t).unwrap(), 1, CAP)
                    .unwrap()
                    .value;
                assert!(p >= prev - 1e-12);
                prev = p;
            }
        }
    }
}
