//! Invariant suites run by `qtl verify`.
//!
//! Each suite checks one identity or inequality against an independent
//! route (finite differences, brute-force pair enumeration, literal
//! definitions) at desk scale and counts violations.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluate::{exact_probability, tribes_prob_zero};
use crate::functions::{
    build_tribes_with_size, indicator, is_a_monotone, leq_a_raw, point_of_index, upset_corpus,
    FunctionSpec, Kind,
};
use crate::influence::{
    ent, h_interval, h_paper, h_variance, influence_bkkkl, influence_h, influence_variance,
};
use crate::measures::{mix_t, sample_uniform, second_smallest_atom, SimplexMeasure};
use crate::threshold::rm_derivative_exact;

const CAP: u64 = crate::DEFAULT_ENUMERATION_CAP;

/// Suite names in run order.
pub const SUITES: [&str; 8] = [
    "order",
    "rm",
    "rm1",
    "alpha",
    "entropy",
    "influence",
    "tribes",
    "monotone",
];

/// Deliberate faults for exercising the harness itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// `<=_a` loses reflexivity.
    CorruptOrder,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
    pub elapsed: Duration,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Default)]
struct Tally {
    checks: u64,
    failures: u64,
    first_failure: Option<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }
}

/// Bases in `Gamma` for `q = 3`.
pub fn gamma_bases() -> Vec<SimplexMeasure> {
    [0.5, 0.2, 0.7, 0.9, 0.35]
        .iter()
        .map(|&s| SimplexMeasure::new(vec![0.0, s, 1.0 - s]).expect("valid"))
        .collect()
}

/// Central finite difference of `Pr[f = 1]` along `mu_t`, one-sided within
/// `step` of the ends.
pub fn finite_difference(
    f: &FunctionSpec,
    base: &SimplexMeasure,
    t: f64,
    step: f64,
) -> Result<f64> {
    let p = |t: f64| -> Result<f64> { Ok(exact_probability(f, &mix_t(base, t)?, 1, CAP)?.value) };
    Ok(if t < step {
        (p(t + step)? - p(t)?) / step
    } else if t > 1.0 - step {
        (p(t)? - p(t - step)?) / step
    } else {
        (p(t + step)? - p(t - step)?) / (2.0 * step)
    })
}

/// Relative error against the identity's value; where the identity gives
/// exactly zero (constant `f`) the difference quotient is pure rounding and
/// is compared in absolute terms.
pub fn relative_error(exact: f64, approx: f64) -> f64 {
    if exact == 0.0 {
        approx.abs()
    } else {
        (exact - approx).abs() / exact.abs()
    }
}

pub fn run_suites(filter: &[String], fault: Option<Fault>) -> Result<Vec<SuiteResult>> {
    if let Some(bad) = filter.iter().find(|s| !SUITES.contains(&s.as_str())) {
        return Err(Error::Unsupported(format!(
            "unknown suite {bad:?}; expected one of {}",
            SUITES.join(", ")
        )));
    }
    SUITES
        .iter()
        .filter(|name| filter.is_empty() || filter.iter().any(|f| f == *name))
        .map(|&name| {
            let start = Instant::now();
            let tally = match name {
                "order" => order_suite(fault)?,
                "rm" => rm_suite()?,
                "rm1" => rm1_suite()?,
                "alpha" => alpha_suite()?,
                "entropy" => entropy_suite()?,
                "influence" => influence_suite()?,
                "tribes" => tribes_suite()?,
                "monotone" => monotone_suite()?,
                _ => unreachable!("filtered above"),
            };
            Ok(SuiteResult {
                name,
                checks: tally.checks,
                failures: tally.failures,
                first_failure: tally.first_failure,
                elapsed: start.elapsed(),
            })
        })
        .collect()
}

fn cube(q: usize, n: usize) -> Vec<Vec<usize>> {
    (0..q.pow(n as u32))
        .map(|i| {
            let mut x = vec![0; n];
            point_of_index(q, i, &mut x);
            x
        })
        .collect()
}

/// Partial-order laws of `<=_a` and cover-vs-all-pairs monotonicity.
fn order_suite(fault: Option<Fault>) -> Result<Tally> {
    let leq = |x: &[usize], y: &[usize], a: usize| match fault {
        Some(Fault::CorruptOrder) => leq_a_raw(x, y, a) && x != y,
        None => leq_a_raw(x, y, a),
    };
    let mut tally = Tally::default();
    for n in 1..=3 {
        let pts = cube(3, n);
        for a in 0..3 {
            for x in &pts {
                tally.check(leq(x, x, a), || {
                    format!("reflexivity fails at {x:?}, a={a}")
                });
                for y in &pts {
                    if leq(x, y, a) && leq(y, x, a) {
                        tally.check(x == y, || format!("antisymmetry fails at {x:?}, {y:?}"));
                    }
                    for z in &pts {
                        if leq(x, y, a) && leq(y, z, a) {
                            tally.check(leq(x, z, a), || {
                                format!("transitivity fails at {x:?}, {y:?}, {z:?}")
                            });
                        }
                    }
                }
            }
        }
        let corpus = upset_corpus(3, n, 10, 1000 + n as u64, CAP)?;
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        for (j, f) in corpus.iter().enumerate() {
            // Scramble half the corpus so both verdicts occur.
            let g = if j % 2 == 0 {
                f.clone()
            } else {
                use rand::Rng;
                let table = (0..pts.len())
                    .map(|_| u8::from(rng.gen_bool(0.5)))
                    .collect();
                FunctionSpec::from_table(3, n, Kind::Indicator, table)?
            };
            for a in 0..3 {
                let all_pairs = pts
                    .iter()
                    .all(|x| pts.iter().all(|y| !leq(x, y, a) || g.eval(x) <= g.eval(y)));
                let covers = is_a_monotone(&g, a, CAP)?;
                tally.check(covers == all_pairs, || {
                    format!("cover check {covers} vs all pairs {all_pairs}, n={n}, a={a}")
                });
            }
        }
    }
    Ok(tally)
}

/// Russo-Margulis identity against central differences.
fn rm_suite() -> Result<Tally> {
    let mut tally = Tally::default();
    let bases = gamma_bases();
    for (j, f) in upset_corpus(3, 3, 20, 1, CAP)?.iter().enumerate() {
        let base = &bases[j % bases.len()];
        for step in 1..=9 {
            let t = step as f64 / 10.0;
            let exact = rm_derivative_exact(f, base, t, CAP)?;
            let fd = finite_difference(f, base, t, 1e-5)?;
            let err = relative_error(exact, fd);
            tally.check(err <= 1e-6, || {
                format!("upset {j}, t={t}: {exact} vs {fd} (rel {err:e})")
            });
        }
    }
    Ok(tally)
}

/// Every `0`-monotone `f: [3] -> {0,1}` on a `t` grid.
fn rm1_suite() -> Result<Tally> {
    let mut tally = Tally::default();
    for bits in 0..8u8 {
        let table: Vec<u8> = (0..3).map(|v| (bits >> v) & 1).collect();
        let f = FunctionSpec::from_table(3, 1, Kind::Indicator, table.clone())?;
        if !is_a_monotone(&f, 0, CAP)? {
            continue;
        }
        for base in gamma_bases() {
            for step in 0..20 {
                let t = step as f64 / 20.0;
                let exact = rm_derivative_exact(&f, &base, t, CAP)?;
                let fd = finite_difference(&f, &base, t, 1e-5)?;
                let err = relative_error(exact, fd);
                tally.check(err <= 1e-8, || {
                    format!("f={table:?}, t={t}: {exact} vs {fd}")
                });
            }
        }
    }
    Ok(tally)
}

/// `alpha (1 - t) <= E_{mu_t}[1 - f_k^x]` on every non-constant fibre.
fn alpha_suite() -> Result<Tally> {
    let mut tally = Tally::default();
    let n = 4;
    let pts = cube(3, n);
    for f in upset_corpus(3, n, 20, 77, CAP)? {
        for base in gamma_bases() {
            let alpha = second_smallest_atom(&base);
            for t in [0.0, 0.25, 0.5, 0.75, 0.95] {
                let mu_t = mix_t(&base, t)?;
                for x in &pts {
                    for k in 0..n {
                        let mut y = x.clone();
                        let fib: Vec<usize> = (0..3)
                            .map(|v| {
                                y[k] = v;
                                f.eval(&y)
                            })
                            .collect();
                        if fib.iter().all(|&v| v == fib[0]) {
                            continue;
                        }
                        let miss: f64 = (0..3).map(|v| mu_t.atom(v) * (1 - fib[v]) as f64).sum();
                        tally.check(alpha * (1.0 - t) <= miss + 1e-12, || {
                            format!("x={x:?}, k={k}, t={t}: {miss} < {}", alpha * (1.0 - t))
                        });
                    }
                }
            }
        }
    }
    Ok(tally)
}

/// `h(t) >= Ent(t)` on `10^6 + 1` grid points.
fn entropy_suite() -> Result<Tally> {
    let mut tally = Tally::default();
    for j in 0..=1_000_000u32 {
        let t = f64::from(j) * 1e-6;
        let t = t.min(1.0);
        let (h, e) = (h_paper(t)?, ent(t)?);
        tally.check(h >= e - 1e-12, || format!("t={t}: h={h} < Ent={e}"));
    }
    Ok(tally)
}

/// h-influence specializations at full support.
fn influence_suite() -> Result<Tally> {
    use rand::Rng;
    let mut tally = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 1..=4 {
        for _ in 0..6 {
            let table = (0..3usize.pow(n as u32))
                .map(|_| u8::from(rng.gen_bool(0.5)))
                .collect();
            let f = FunctionSpec::from_table(3, n, Kind::Indicator, table)?;
            let mu = sample_uniform(3, &mut rng)?;
            for k in 0..n {
                let var = influence_variance(&f, &mu, k, CAP)?;
                let hv = influence_h(&f, &mu, k, CAP, h_variance)?;
                tally.check((var - hv).abs() <= 1e-12, || {
                    format!("variance n={n} k={k}")
                });
                let bk = influence_bkkkl(&f, &mu, k, CAP)?;
                let hi = influence_h(&f, &mu, k, CAP, h_interval)?;
                tally.check((bk - hi).abs() <= 1e-12, || format!("bkkkl n={n} k={k}"));
            }
        }
    }
    Ok(tally)
}

/// Tribes closed form against enumeration.
fn tribes_suite() -> Result<Tally> {
    let mut tally = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (n, r) in [(4, 2), (6, 2), (6, 3)] {
        let f = build_tribes_with_size(3, n, r)?;
        let sizes = &f.tribes().expect("tribes").sizes;
        for _ in 0..10 {
            let mu = sample_uniform(3, &mut rng)?;
            let closed = tribes_prob_zero(sizes, mu.atom(0));
            let exact = exact_probability(&f, &mu, 0, CAP)?.value;
            tally.check((closed - exact).abs() <= 1e-12, || {
                format!("n={n} r={r} mu={mu}: {closed} vs {exact}")
            });
        }
    }
    Ok(tally)
}

/// `Pr[f = 1]` along `mu_t` is nondecreasing for `0`-monotone `f`.
fn monotone_suite() -> Result<Tally> {
    let mut tally = Tally::default();
    let mut corpus = upset_corpus(3, 3, 10, 500, CAP)?;
    corpus.push(indicator(&build_tribes_with_size(3, 4, 2)?, 0, CAP)?);
    corpus.push(indicator(&build_tribes_with_size(3, 6, 2)?, 0, CAP)?);
    for (j, f) in corpus.iter().enumerate() {
        for base in gamma_bases() {
            let mut prev = f64::NEG_INFINITY;
            for step in 0..100 {
                let t = step as f64 / 99.0;
                let p = exact_probability(f, &mix_t(&base, t)?, 1, CAP)?.value;
                tally.check(p >= prev - 1e-12, || {
                    format!("function {j}, t={t}: {p} < {prev}")
                });
                prev = p;
            }
        }
    }
    Ok(tally)
}
