//! Fibres and influences of indicator functions under product measures.
//!
//! All influences here are expectations over `x ~ mu^n` of a functional of
//! the fibre `f_k^x: [q] -> {0, 1}`, the restriction of `f` to the points
//! that agree with `x` off coordinate `k`.

use crate::error::{Error, Result};
use crate::evaluate::{exact_probability, for_each_weighted};
use crate::functions::{cube_size, FunctionSpec, Kind, Point};
use crate::measures::SimplexMeasure;

/// `f_k^x` as its `q` output values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibreView {
    pub base: Point,
    pub k: usize,
    pub values: Vec<usize>,
}

impl FibreView {
    pub fn is_constant(&self) -> bool {
        is_constant(&self.values)
    }

    /// `E_{v ~ mu}[f_k^x(v)]`.
    pub fn mean(&self, mu: &SimplexMeasure) -> f64 {
        mean(&self.values, mu.atoms())
    }
}

pub fn fibre(f: &FunctionSpec, x: &Point, k: usize) -> Result<FibreView> {
    if x.n() != f.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            got: x.n(),
        });
    }
    if k >= f.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            got: k + 1,
        });
    }
    let mut coords = x.coords().to_vec();
    let mut values = vec![0; f.q()];
    f.fibre_into(&mut coords, k, &mut values);
    Ok(FibreView {
        base: x.clone(),
        k,
        values,
    })
}

fn is_constant(values: &[usize]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Constant fibres return their value exactly; atoms only sum to one within
/// tolerance.
fn mean(values: &[usize], atoms: &[f64]) -> f64 {
    if is_constant(values) {
        return values[0] as f64;
    }
    values.iter().zip(atoms).map(|(&v, &w)| v as f64 * w).sum()
}

/// `E_{x ~ mu^n}[g(f_k^x)]`. The fibre does not depend on `x_k`, so only the
/// other `n - 1` coordinates are enumerated.
pub fn fibre_average(
    f: &FunctionSpec,
    mu: &SimplexMeasure,
    k: usize,
    cap: u64,
    mut g: impl FnMut(&[usize]) -> f64,
) -> Result<f64> {
    if f.kind() != Kind::Indicator {
        return Err(Error::InvalidFunction(
            "influences need an indicator function".into(),
        ));
    }
    if f.q() != mu.q() {
        return Err(Error::DimensionMismatch {
            expected: f.q(),
            got: mu.q(),
        });
    }
    if k >= f.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            got: k + 1,
        });
    }
    cube_size(f.q(), f.n(), cap)?;
    let n = f.n();
    let mut rest = vec![0; n - 1];
    let mut x = vec![0; n];
    let mut values = vec![0; f.q()];
    let mut acc = 0.0;
    for_each_weighted(mu.atoms(), &mut rest, 0, 1.0, &mut |rest, w| {
        x[..k].copy_from_slice(&rest[..k]);
        x[k + 1..].copy_from_slice(&rest[k..]);
        f.fibre_into(&mut x, k, &mut values);
        acc += w * g(&values);
    });
    Ok(acc)
}

/// `Pr_x[f_k^x is not constant]`.
pub fn influence_bkkkl(f: &FunctionSpec, mu: &SimplexMeasure, k: usize, cap: u64) -> Result<f64> {
    fibre_average(f, mu, k, cap, |v| if is_constant(v) { 0.0 } else { 1.0 })
}

/// `E_x[Var_{x_k ~ mu}(f_k^x)]`.
pub fn influence_variance(
    f: &FunctionSpec,
    mu: &SimplexMeasure,
    k: usize,
    cap: u64,
) -> Result<f64> {
    let atoms = mu.atoms();
    fibre_average(f, mu, k, cap, |v| {
        let m = mean(v, atoms);
        v.iter()
            .zip(atoms)
            .map(|(&y, &w)| w * (y as f64 - m).powi(2))
            .sum()
    })
}

/// `E_x[h(E_{x_k ~ mu}[f_k^x(x_k)])]`.
pub fn influence_h(
    f: &FunctionSpec,
    mu: &SimplexMeasure,
    k: usize,
    cap: u64,
    h: impl Fn(f64) -> f64,
) -> Result<f64> {
    let atoms = mu.atoms();
    fibre_average(f, mu, k, cap, |v| h(mean(v, atoms).clamp(0.0, 1.0)))
}

/// `t (1 - t)`: the h that recovers the variance influence.
pub fn h_variance(t: f64) -> f64 {
    t * (1.0 - t)
}

/// `1[t in (0, 1)]`: the h that recovers the BKKKL influence for
/// full-support measures.
pub fn h_interval(t: f64) -> f64 {
    if t > 0.0 && t < 1.0 {
        1.0
    } else {
        0.0
    }
}

fn check_t(t: f64) -> Result<()> {
    crate::error::check_unit("t", t)
}

/// `-t ln t - (1 - t) ln(1 - t)`, zero at both endpoints.
pub fn ent(t: f64) -> Result<f64> {
    check_t(t)?;
    if t == 0.0 || t == 1.0 {
        return Ok(0.0);
    }
    Ok(-t * t.ln() - (1.0 - t) * (-t).ln_1p())
}

/// `2 * 1[t in (0, 1)] * (1 - t) * (1 - ln(1 - t))`.
pub fn h_paper(t: f64) -> Result<f64> {
    check_t(t)?;
    if t == 0.0 || t == 1.0 {
        return Ok(0.0);
    }
    let u = 1.0 - t;
    Ok(2.0 * u * (1.0 - (-t).ln_1p()))
}

/// `E_{x ~ mu_t^n}[1[f_k^x not constant] * E_{x_k ~ mu_t}[1 - f_k^x(x_k)]]`.
pub fn phi_k(f: &FunctionSpec, mu_t: &SimplexMeasure, k: usize, cap: u64) -> Result<f64> {
    let atoms = mu_t.atoms();
    fibre_average(f, mu_t, k, cap, |v| {
        if is_constant(v) {
            0.0
        } else {
            1.0 - mean(v, atoms)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfluenceKind {
    Bkkkl,
    Variance,
    /// h-influence with [`h_paper`].
    H,
}

impl InfluenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InfluenceKind::Bkkkl => "bkkkl",
            InfluenceKind::Variance => "variance",
            InfluenceKind::H => "h",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceProfile {
    pub kind: InfluenceKind,
    pub values: Vec<f64>,
}

impl InfluenceProfile {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

pub fn influence_profile(
    f: &FunctionSpec,
    mu: &SimplexMeasure,
    kind: InfluenceKind,
    cap: u64,
) -> Result<InfluenceProfile> {
    let values = (0..f.n())
        .map(|k| match kind {
            InfluenceKind::Bkkkl => influence_bkkkl(f, mu, k, cap),
            InfluenceKind::Variance => influence_variance(f, mu, k, cap),
            InfluenceKind::H => influence_h(f, mu, k, cap, |t| h_paper(t).unwrap_or(0.0)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InfluenceProfile { kind, values })
}

/// `max_k I_k^h(f)` against `Var(f) ln n / n`. Nothing is asserted about
/// the ratio; `ratio` is `None` when the denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KellerReport {
    pub max_influence: f64,
    pub variance: f64,
    pub denominator: f64,
    pub ratio: Option<f64>,
}

pub fn keller_diagnostic(f: &FunctionSpec, mu: &SimplexMeasure, cap: u64) -> Result<KellerReport> {
    let profile = influence_profile(f, mu, InfluenceKind::H, cap)?;
    let p = exact_probability(f, mu, 1, cap)?.value;
    let variance = p * (1.0 - p);
    let n = f.n() as f64;
    let denominator = variance * n.ln() / n;
    let max_influence = profile.max();
    let ratio = (denominator > 0.0).then(|| max_influence / denominator);
    Ok(KellerReport {
        max_influence,
        variance,
        denominator,
        ratio,
    })
}
