//! Threshold widths and the Russo-Margulis derivative.
//!
//! Along a line `mu_t = t * delta_0 + (1 - t) * base` the probability of a
//! `0`-monotone event is nondecreasing in `t`, so the window
//! `{t : eps <= Pr <= 1 - eps}` is an interval found by monotone bisection.
//! Cross sections integrate line widths over a second parameter and region
//! measures sample the whole simplex.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluate::{binomial_std_error, stream_rng, Estimate, Evaluator};
use crate::functions::{build_tribes, FunctionSpec, Kind};
use crate::influence::phi_k;
use crate::measures::{
    central_measure, cross_section_base, mix_t, sample_uniform, second_smallest_atom,
    SimplexMeasure,
};

/// Default bisection tolerance in `t`.
pub const BISECTION_TOL: f64 = 1e-9;

/// Last `t` used by derivative sweeps; the identity divides by `1 - t`.
pub const T_MAX: f64 = 1.0 - 1e-6;

/// Slack on monotonicity checks for exact evaluators.
const EXACT_SLACK: f64 = 1e-9;

/// Simplex samples per region-measure chunk.
const REGION_CHUNK: u64 = 1 << 10;

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "eps",
            value: eps,
            range: "(0, 1/2)",
        })
    }
}

/// `d/dt E_{mu_t^n}[f] = (1 / (1 - t)) * sum_k Phi_k(mu_t)` for a
/// `0`-monotone indicator `f` and `base` in `Gamma`.
pub fn rm_derivative_exact(
    f: &FunctionSpec,
    base: &SimplexMeasure,
    t: f64,
    cap: u64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            range: "[0, 1)",
        });
    }
    let mu_t = mix_t(base, t)?;
    let total = (0..f.n())
        .map(|k| phi_k(f, &mu_t, k, cap))
        .sum::<Result<f64>>()?;
    Ok(total / (1.0 - t))
}

/// One row of derivative diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeDiagnostic {
    pub t: f64,
    pub alpha: f64,
    pub derivative: f64,
    /// `E (1 - E) ln n / ln(1 / alpha)` at `mu_t`.
    pub denominator: f64,
    /// `None` when the denominator vanishes (constant or degenerate `f`).
    pub ratio: Option<f64>,
}

/// Derivative over `E (1 - E) ln n / ln(1 / alpha)`, with `alpha` the
/// second-smallest atom of `base`. Report-only: no constant is asserted.
pub fn derivative_lower_bound_ratio(
    f: &FunctionSpec,
    base: &SimplexMeasure,
    t: f64,
    cap: u64,
) -> Result<DerivativeDiagnostic> {
    let alpha = second_smallest_atom(base);
    if alpha <= 0.0 {
        return Err(Error::Undefined(
            "lower-bound ratio with second-smallest atom 0",
        ));
    }
    let derivative = rm_derivative_exact(f, base, t, cap)?;
    let e = Evaluator::Exact { cap }
        .probability(f, &mix_t(base, t)?, 1)?
        .value;
    let n = f.n() as f64;
    let log_inv_alpha = (1.0 / alpha).ln();
    let denominator = if log_inv_alpha > 0.0 {
        e * (1.0 - e) * n.ln() / log_inv_alpha
    } else {
        0.0
    };
    let ratio = (denominator > 0.0).then(|| derivative / denominator);
    Ok(DerivativeDiagnostic {
        t,
        alpha,
        derivative,
        denominator,
        ratio,
    })
}

/// Knobs for crossing searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthOptions {
    /// Bisection stops once the bracket is narrower than this.
    pub tolerance: f64,
    /// Coarse grid cells used to bracket crossings.
    pub coarse_grid: usize,
    /// Grid cells of the fallback scan after a non-monotone probe.
    pub fallback_grid: usize,
}

impl Default for WidthOptions {
    fn default() -> Self {
        Self {
            tolerance: BISECTION_TOL,
            coarse_grid: 20,
            fallback_grid: 1000,
        }
    }
}

/// Window of `t` where `eps <= Pr[f = a] <= 1 - eps` along one line.
///
/// For an increasing probability, `t_lo` solves `Pr = eps` and `t_hi` solves
/// `Pr = 1 - eps`; for a decreasing one the two levels swap. An absent
/// crossing means the window reaches the end of `[0, 1]` (flagged) or the
/// window is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub eps: f64,
    pub a: usize,
    pub t_lo: Option<f64>,
    pub t_hi: Option<f64>,
    pub width: f64,
    pub lo_absent: bool,
    pub hi_absent: bool,
    pub increasing: bool,
    pub non_monotone: bool,
    pub grid_size: usize,
    pub tolerance: f64,
    pub probes: usize,
}

pub fn line_width(
    f: &FunctionSpec,
    base: &SimplexMeasure,
    a: usize,
    eps: f64,
    evaluator: &Evaluator,
) -> Result<ThresholdReport> {
    line_width_with(f, base, a, eps, evaluator, WidthOptions::default())
}

/// Monte-Carlo probes get enough samples that a 95% interval is at most
/// `0.25 * min(eps, 0.1)` wide on each side.
fn probe_evaluator(evaluator: &Evaluator, eps: f64) -> Evaluator {
    match *evaluator {
        Evaluator::MonteCarlo { samples, seed } => {
            let half_width = 0.25 * eps.min(0.1);
            let needed = (1.96 * 0.5 / half_width).powi(2).ceil() as u64;
            Evaluator::MonteCarlo {
                samples: samples.max(needed),
                seed,
            }
        }
        other => other,
    }
}

pub fn line_width_with(
    f: &FunctionSpec,
    base: &SimplexMeasure,
    a: usize,
    eps: f64,
    evaluator: &Evaluator,
    opts: WidthOptions,
) -> Result<ThresholdReport> {
    check_eps(eps)?;
    mix_t(base, 0.0)?;
    let probe = probe_evaluator(evaluator, eps);
    let mut probes = 0usize;
    let mut eval = |t: f64| -> Result<Estimate> {
        probes += 1;
        probe.probability(f, &mix_t(base, t)?, a)
    };
    let mut report = window_search(&mut eval, eps, evaluator.is_exact(), opts)?;
    report.a = a;
    report.probes = probes;
    Ok(report)
}

fn slack(x: &Estimate, y: &Estimate, exact: bool) -> f64 {
    if exact {
        EXACT_SLACK
    } else {
        4.0 * (x.std_error + y.std_error)
    }
}

/// Core search over a probability curve on `[0, 1]`.
fn window_search(
    eval: &mut dyn FnMut(f64) -> Result<Estimate>,
    eps: f64,
    exact: bool,
    opts: WidthOptions,
) -> Result<ThresholdReport> {
    let cells = opts.coarse_grid.max(1);
    let grid: Vec<f64> = (0..=cells).map(|j| j as f64 / cells as f64).collect();
    let mut values = Vec::with_capacity(grid.len());
    for &t in &grid {
        values.push(eval(t)?);
    }
    let increasing = values[cells].value >= values[0].value;
    // Window membership is symmetric under p -> 1 - p, so work with an
    // increasing curve.
    let orient = |e: Estimate| {
        if increasing {
            e
        } else {
            Estimate {
                value: 1.0 - e.value,
                ..e
            }
        }
    };
    let coarse: Vec<Estimate> = values.into_iter().map(orient).collect();

    let mut report = ThresholdReport {
        eps,
        a: 0,
        t_lo: None,
        t_hi: None,
        width: 0.0,
        lo_absent: false,
        hi_absent: false,
        increasing,
        non_monotone: false,
        grid_size: cells,
        tolerance: opts.tolerance,
        probes: 0,
    };

    if coarse
        .windows(2)
        .any(|w| w[1].value < w[0].value - slack(&w[0], &w[1], exact))
    {
        return grid_scan(eval, eps, increasing, opts, report);
    }

    let (p0, p1) = (coarse[0].value, coarse[cells].value);
    if p1 < eps || p0 > 1.0 - eps {
        report.lo_absent = true;
        report.hi_absent = true;
        return Ok(report);
    }

    let search = Bracket {
        grid: &grid,
        coarse: &coarse,
        increasing,
        exact,
        tolerance: opts.tolerance,
    };
    let lo = if p0 >= eps {
        None
    } else {
        Some(search.crossing(eval, eps)?)
    };
    let hi = if p1 <= 1.0 - eps {
        None
    } else {
        Some(search.crossing(eval, 1.0 - eps)?)
    };
    let (lo, hi) = match (lo, hi) {
        (Some(Crossing::NonMonotone), _) | (_, Some(Crossing::NonMonotone)) => {
            return grid_scan(eval, eps, increasing, opts, report)
        }
        (lo, hi) => (lo.map(Crossing::at), hi.map(Crossing::at)),
    };
    report.t_lo = lo;
    report.t_hi = hi;
    report.lo_absent = lo.is_none();
    report.hi_absent = hi.is_none();
    report.width = (hi.unwrap_or(1.0) - lo.unwrap_or(0.0)).max(0.0);
    Ok(report)
}

enum Crossing {
    At(f64),
    NonMonotone,
}

impl Crossing {
    fn at(self) -> f64 {
        match self {
            Crossing::At(t) => t,
            Crossing::NonMonotone => unreachable!("handled by the caller"),
        }
    }
}

/// Coarse-grid values of an increasing curve, used to bracket crossings.
struct Bracket<'a> {
    grid: &'a [f64],
    coarse: &'a [Estimate],
    increasing: bool,
    exact: bool,
    tolerance: f64,
}

impl Bracket<'_> {
    /// Bisects for the first `t` with curve value `>= level`; the caller
    /// guarantees the last grid value reaches the level.
    fn crossing(
        &self,
        eval: &mut dyn FnMut(f64) -> Result<Estimate>,
        level: f64,
    ) -> Result<Crossing> {
        let j = self
            .coarse
            .iter()
            .position(|e| e.value >= level)
            .expect("last grid value reaches the level");
        if j == 0 {
            return Ok(Crossing::At(0.0));
        }
        let (mut lo, mut hi) = (self.grid[j - 1], self.grid[j]);
        let (mut e_lo, mut e_hi) = (self.coarse[j - 1], self.coarse[j]);
        while hi - lo > self.tolerance {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let mut e = eval(mid)?;
            if !self.increasing {
                e.value = 1.0 - e.value;
            }
            if e.value < e_lo.value - slack(&e, &e_lo, self.exact)
                || e.value > e_hi.value + slack(&e, &e_hi, self.exact)
            {
                return Ok(Crossing::NonMonotone);
            }
            if e.value >= level {
                hi = mid;
                e_hi = e;
            } else {
                lo = mid;
                e_lo = e;
            }
        }
        Ok(Crossing::At(0.5 * (lo + hi)))
    }
}

/// Fallback after a non-monotone probe: the fraction of grid nodes inside
/// the window.
fn grid_scan(
    eval: &mut dyn FnMut(f64) -> Result<Estimate>,
    eps: f64,
    increasing: bool,
    opts: WidthOptions,
    mut report: ThresholdReport,
) -> Result<ThresholdReport> {
    let cells = opts.fallback_grid.max(1);
    let mut inside = Vec::new();
    for j in 0..=cells {
        let t = j as f64 / cells as f64;
        let p = eval(t)?.value;
        if p >= eps && p <= 1.0 - eps {
            inside.push(t);
        }
    }
    report.non_monotone = true;
    report.increasing = increasing;
    report.grid_size = cells;
    report.t_lo = inside.first().copied();
    report.t_hi = inside.last().copied();
    report.lo_absent = report.t_lo.is_none();
    report.hi_absent = report.t_hi.is_none();
    report.width = inside.len() as f64 / (cells + 1) as f64;
    Ok(report)
}

/// Widths along the lines of a `mu_{s,t}` cross section and their
/// trapezoid-rule integral over `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub area: f64,
    pub slices: Vec<(f64, ThresholdReport)>,
}

#[allow(clippy::too_many_arguments)]
pub fn cross_section_scan(
    f: &FunctionSpec,
    base: &SimplexMeasure,
    i: usize,
    a: usize,
    eps: f64,
    s_grid: &[f64],
    evaluator: &Evaluator,
    opts: WidthOptions,
) -> Result<CrossSection> {
    if s_grid.is_empty() {
        return Err(Error::InvalidMeasure("empty s grid".into()));
    }
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidMeasure(
            "s grid must be strictly increasing".into(),
        ));
    }
    let slices = s_grid
        .par_iter()
        .map(|&s| {
            let line_base = cross_section_base(base, i, s)?;
            Ok((s, line_width_with(f, &line_base, a, eps, evaluator, opts)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let area = slices
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.width + w[1].1.width))
        .sum();
    Ok(CrossSection { area, slices })
}

/// Normalized uniform-simplex fraction of measures inside the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMeasureEstimate {
    pub fraction: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Fraction of uniform samples `mu` from `Delta[q]` with
/// `eps <= Pr_{mu^n}[f = a] <= 1 - eps`. Chunk `c` draws measures from RNG
/// stream `c`; a Monte-Carlo evaluator gets a distinct seed per measure.
pub fn region_measure(
    f: &FunctionSpec,
    a: usize,
    eps: f64,
    samples: u64,
    seed: u64,
    evaluator: &Evaluator,
) -> Result<RegionMeasureEstimate> {
    check_eps(eps)?;
    if samples == 0 {
        return Err(Error::OutOfRange {
            name: "samples",
            value: 0.0,
            range: ">= 1",
        });
    }
    let chunks = samples.div_ceil(REGION_CHUNK);
    let hits = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c);
            let take = REGION_CHUNK.min(samples - c * REGION_CHUNK);
            let mut hits = 0u64;
            for j in 0..take {
                let mu = sample_uniform(f.q(), &mut rng)?;
                let ev = match *evaluator {
                    Evaluator::MonteCarlo {
                        samples,
                        seed: inner,
                    } => Evaluator::MonteCarlo {
                        samples,
                        seed: inner ^ (c * REGION_CHUNK + j).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                    },
                    other => other,
                };
                let p = ev.probability(f, &mu, a)?.value;
                hits += u64::from(p >= eps && p <= 1.0 - eps);
            }
            Ok(hits)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    Ok(RegionMeasureEstimate {
        fraction: hits as f64 / samples as f64,
        std_error: binomial_std_error(hits, samples),
        samples,
        seed,
    })
}

/// One row of the tribes scaling table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub r: usize,
    pub p_lo: Option<f64>,
    pub p_hi: Option<f64>,
    pub width: f64,
    pub width_times_ln_n: f64,
}

/// Width of the `mu(0)` window of the tribes zero-event, via the closed
/// form, for each `n`. Rows come back in input order.
pub fn sweep_scaling(q: usize, p0: f64, n_list: &[usize], eps: f64) -> Result<Vec<ScalingRow>> {
    check_eps(eps)?;
    // The zero-event depends on mu only through mu(0) = t, so any base in
    // Gamma traces the p0 axis.
    let base = central_measure(q)?;
    n_list
        .par_iter()
        .map(|&n| {
            let f = build_tribes(q, n, p0)?;
            let r = f.tribes().map(|t| t.r).unwrap_or(0);
            let rep = line_width(&f, &base, 0, eps, &Evaluator::ClosedForm)?;
            Ok(ScalingRow {
                n,
                r,
                p_lo: rep.t_lo,
                p_hi: rep.t_hi,
                width: rep.width,
                width_times_ln_n: rep.width * (n as f64).ln(),
            })
        })
        .collect()
}

/// Derivative diagnostics on an even `t` grid inside `[0, T_MAX]`.
pub fn derivative_sweep(
    f: &FunctionSpec,
    base: &SimplexMeasure,
    points: usize,
    cap: u64,
) -> Result<Vec<DerivativeDiagnostic>> {
    if f.kind() != Kind::Indicator {
        return Err(Error::InvalidFunction(
            "derivative needs an indicator function".into(),
        ));
    }
    (0..points)
        .map(|j| {
            let t = if points <= 1 {
                0.0
            } else {
                T_MAX * j as f64 / (points - 1) as f64
            };
            derivative_lower_bound_ratio(f, base, t, cap)
        })
        .collect()
}
