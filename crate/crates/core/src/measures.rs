//! Points of the probability simplex `Delta[q]` and the parametrizations used
//! to sweep it.
//!
//! Every measure in `Delta[q]` is `mu_t = t * delta_0 + (1 - t) * mu` for some
//! base `mu` in the face `Gamma = {mu : mu(0) = 0}`, so widths along these
//! lines control region measures. Cross sections `mu_{s,t}` additionally slide
//! mass onto a fixed atom `i`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{check_unit, Error, Result};

/// Tolerance on `sum(atoms) == 1` accepted at construction.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A probability measure on `{0, .., q-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexMeasure {
    atoms: Vec<f64>,
}

impl SimplexMeasure {
    /// Validates `atoms` without touching them.
    pub fn new(atoms: Vec<f64>) -> Result<Self> {
        if atoms.len() < 2 {
            return Err(Error::InvalidMeasure(format!(
                "need q >= 2 atoms, got {}",
                atoms.len()
            )));
        }
        if let Some(bad) = atoms.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "atom {bad} is not a probability"
            )));
        }
        let total: f64 = atoms.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "atoms sum to {total}, not 1"
            )));
        }
        Ok(Self { atoms })
    }

    /// Scales nonnegative weights to total mass one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    /// The point mass `delta_j` on `[q]`.
    pub fn point_mass(q: usize, j: usize) -> Result<Self> {
        if j >= q {
            return Err(Error::InvalidMeasure(format!("atom {j} outside [{q}]")));
        }
        let mut atoms = vec![0.0; q];
        atoms[j] = 1.0;
        Self::new(atoms)
    }

    pub fn uniform(q: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidMeasure(format!("need q >= 2, got {q}")));
        }
        Self::new(vec![1.0 / q as f64; q])
    }

    pub fn q(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> f64 {
        self.atoms[j]
    }

    /// True when every atom is strictly positive.
    pub fn has_full_support(&self) -> bool {
        self.atoms.iter().all(|&a| a > 0.0)
    }

    fn require_zero(&self, idx: &[usize]) -> Result<()> {
        if idx.iter().all(|&j| self.atoms[j] == 0.0) {
            Ok(())
        } else {
            Err(Error::NotInFace {
                atoms: idx.to_vec(),
                measure: self.to_string(),
            })
        }
    }
}

impl fmt::Display for SimplexMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, a) in self.atoms.iter().enumerate() {
            if j > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for SimplexMeasure {
    type Err = Error;

    /// Parses comma-separated atoms, e.g. `0,0.5,0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let atoms = s
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidMeasure(format!("atom {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }
}

/// `t * delta_0 + (1 - t) * base` for `base` in `Gamma`.
pub fn mix_t(base: &SimplexMeasure, t: f64) -> Result<SimplexMeasure> {
    base.require_zero(&[0])?;
    check_unit("t", t)?;
    let mut atoms: Vec<f64> = base.atoms.iter().map(|b| (1.0 - t) * b).collect();
    atoms[0] = t;
    SimplexMeasure::new(atoms)
}

/// `t * delta_0 + s(1 - t) * delta_i + (1 - t)(1 - s) * base` for `base` in
/// `Gamma_i` (zero mass on atoms `0` and `i`).
pub fn mix_st(base: &SimplexMeasure, i: usize, s: f64, t: f64) -> Result<SimplexMeasure> {
    if i == 0 || i >= base.q() {
        return Err(Error::InvalidMeasure(format!(
            "cross-section atom {i} must lie in 1..{}",
            base.q()
        )));
    }
    base.require_zero(&[0, i])?;
    check_unit("s", s)?;
    check_unit("t", t)?;
    let scale = (1.0 - t) * (1.0 - s);
    let mut atoms: Vec<f64> = base.atoms.iter().map(|b| scale * b).collect();
    atoms[0] = t;
    atoms[i] = s * (1.0 - t);
    SimplexMeasure::new(atoms)
}

/// The base of the `mu_t` line through the cross section at slice `s`:
/// `s * delta_i + (1 - s) * base`, which lies in `Gamma`.
pub fn cross_section_base(base: &SimplexMeasure, i: usize, s: f64) -> Result<SimplexMeasure> {
    mix_st(base, i, s, 0.0)
}

/// `min_{j >= 1} mu(j)`; atom 0 is excluded.
pub fn second_smallest_atom(mu: &SimplexMeasure) -> f64 {
    mu.atoms[1..].iter().copied().fold(f64::INFINITY, f64::min)
}

/// Region `R_i` containing `mu`: the lowest `i >= 1` attaining the minimum of
/// atoms `1..q`.
pub fn classify_region(mu: &SimplexMeasure) -> usize {
    let mut best = 1;
    for j in 2..mu.q() {
        if mu.atoms[j] < mu.atoms[best] {
            best = j;
        }
    }
    best
}

/// `mu*`: zero on atom 0, `1 / (q - 1)` elsewhere.
pub fn central_measure(q: usize) -> Result<SimplexMeasure> {
    if q < 2 {
        return Err(Error::InvalidMeasure(format!("need q >= 2, got {q}")));
    }
    let mut atoms = vec![1.0 / (q - 1) as f64; q];
    atoms[0] = 0.0;
    SimplexMeasure::new(atoms)
}

/// Draws a measure uniformly (Lebesgue) from `Delta[q]` by normalizing `q`
/// i.i.d. standard exponentials.
pub fn sample_uniform<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Result<SimplexMeasure> {
    if q < 2 {
        return Err(Error::InvalidMeasure(format!("need q >= 2, got {q}")));
    }
    loop {
        let draws: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            let mut atoms: Vec<f64> = draws.iter().map(|d| d / total).collect();
            // Push the rounding residue onto the largest atom.
            let residue = 1.0 - atoms.iter().sum::<f64>();
            let (big, _) =
                atoms.iter().enumerate().fold(
                    (0, f64::MIN),
                    |acc, (j, &a)| if a > acc.1 { (j, a) } else { acc },
                );
            atoms[big] += residue;
            return SimplexMeasure::new(atoms);
        }
    }
}

/// Uniform sample restricted to `Gamma`: atom 0 is zero, atoms `1..q` are
/// uniform on `Delta[q-1]`.
pub fn sample_gamma<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Result<SimplexMeasure> {
    if q < 2 {
        return Err(Error::InvalidMeasure(format!("need q >= 2, got {q}")));
    }
    if q == 2 {
        return SimplexMeasure::new(vec![0.0, 1.0]);
    }
    let inner = sample_uniform(q - 1, rng)?;
    let mut atoms = Vec::with_capacity(q);
    atoms.push(0.0);
    atoms.extend_from_slice(inner.atoms());
    SimplexMeasure::new(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(atoms: &[f64]) -> SimplexMeasure {
        SimplexMeasure::new(atoms.to_vec()).unwrap()
    }

    #[test]
    fn construction_rejects_bad_atoms() {
        assert!(SimplexMeasure::new(vec![1.0]).is_err());
        assert!(SimplexMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexMeasure::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexMeasure::new(vec![0.5, 0.5 + 1e-13]).is_ok());
        assert_eq!(
            SimplexMeasure::normalized(vec![1.0, 3.0]).unwrap(),
            m(&[0.25, 0.75])
        );
    }

    #[test]
    fn mix_t_examples() {
        let base = m(&[0.0, 0.5, 0.5]);
        assert_eq!(mix_t(&base, 0.0).unwrap(), base);
        assert_eq!(mix_t(&base, 1.0).unwrap(), m(&[1.0, 0.0, 0.0]));
        let mid = mix_t(&base, 0.4).unwrap();
        for (got, want) in mid.atoms().iter().zip([0.4, 0.3, 0.3]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(mix_t(&m(&[0.1, 0.9]), 0.5).is_err());
        assert!(mix_t(&base, 1.5).is_err());
    }

    #[test]
    fn mix_st_examples() {
        let base = m(&[0.0, 0.0, 1.0]);
        let a = mix_st(&base, 1, 0.0, 0.3).unwrap();
        assert_eq!(a.atoms(), &[0.3, 0.0, 0.7]);
        assert_eq!(mix_st(&base, 1, 0.6, 1.0).unwrap(), m(&[1.0, 0.0, 0.0]));
        assert_eq!(mix_st(&base, 1, 0.0, 1.0).unwrap(), m(&[1.0, 0.0, 0.0]));
        // Direct substitution gives delta_i at (s, t) = (1, 0).
        assert_eq!(mix_st(&base, 1, 1.0, 0.0).unwrap(), m(&[0.0, 1.0, 0.0]));
        assert!(mix_st(&m(&[0.0, 0.5, 0.5]), 1, 0.5, 0.5).is_err());
        assert!(mix_st(&base, 0, 0.5, 0.5).is_err());
    }

    #[test]
    fn second_smallest_and_regions() {
        let star = central_measure(4).unwrap();
        assert_eq!(second_smallest_atom(&star), 1.0 / 3.0);
        assert_eq!(second_smallest_atom(&m(&[0.0, 0.2, 0.8])), 0.2);
        assert_eq!(
            second_smallest_atom(&SimplexMeasure::point_mass(3, 0).unwrap()),
            0.0
        );

        assert_eq!(classify_region(&star), 1);
        assert_eq!(classify_region(&m(&[0.0, 0.7, 0.1, 0.2])), 2);
        assert_eq!(classify_region(&m(&[0.5, 0.25, 0.25])), 1);
    }

    #[test]
    fn central_measure_examples() {
        assert_eq!(central_measure(2).unwrap(), m(&[0.0, 1.0]));
        assert_eq!(central_measure(3).unwrap(), m(&[0.0, 0.5, 0.5]));
        assert_eq!(
            central_measure(4).unwrap().atoms(),
            &[0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]
        );
        assert!(central_measure(1).is_err());
    }

    #[test]
    fn display_round_trip() {
        let mu = m(&[0.0, 0.5, 0.5]);
        assert_eq!(mu.to_string(), "0,0.5,0.5");
        assert_eq!("0, 0.5,0.5".parse::<SimplexMeasure>().unwrap(), mu);
        assert!("0,x".parse::<SimplexMeasure>().is_err());
    }

    #[test]
    fn uniform_sampling_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut mean = [0.0; 3];
        let mut low_zero = 0usize;
        for _ in 0..n {
            let mu = sample_uniform(3, &mut rng).unwrap();
            for (acc, a) in mean.iter_mut().zip(mu.atoms()) {
                *acc += a / n as f64;
            }
            if mu.atom(0) <= 0.5 {
                low_zero += 1;
            }
        }
        for v in mean {
            assert!((v - 1.0 / 3.0).abs() < 0.01, "mean {v}");
        }
        // Beta(1, 2) marginal: P(mu(0) <= 1/2) = 1 - (1/2)^2.
        let frac = low_zero as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.01, "fraction {frac}");
    }

    #[test]
    fn q2_sample_is_a_uniform_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let below: usize = (0..n)
            .filter(|_| sample_uniform(2, &mut rng).unwrap().atom(0) < 0.3)
            .count();
        assert!((below as f64 / n as f64 - 0.3).abs() < 0.015);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn gamma_base() -> impl Strategy<Value = SimplexMeasure> {
            proptest::collection::vec(0.01f64..1.0, 2..6).prop_map(|mut w| {
                w.insert(0, 0.0);
                SimplexMeasure::normalized(w).unwrap()
            })
        }

        proptest! {
            #[test]
            fn mix_t_atom_zero_is_t(base in gamma_base(), step in 0usize..=100) {
                let t = step as f64 / 100.0;
                prop_assert_eq!(mix_t(&base, t).unwrap().atom(0), t);
            }

            #[test]
            fn mix_st_atom_i_is_s_times_one_minus_t(
                w in proptest::collection::vec(0.01f64..1.0, 1..5),
                s in 0.0f64..=1.0,
                t in 0.0f64..=1.0,
            ) {
                let mut atoms = vec![0.0, 0.0];
                atoms.extend(w);
                let base = SimplexMeasure::normalized(atoms).unwrap();
                let mu = mix_st(&base, 1, s, t).unwrap();
                prop_assert_eq!(mu.atom(1), s * (1.0 - t));
            }

            #[test]
            fn region_attains_second_smallest(w in proptest::collection::vec(0.0f64..1.0, 3..7)) {
                prop_assume!(w.iter().sum::<f64>() > 0.0);
                let mu = SimplexMeasure::normalized(w).unwrap();
                prop_assert_eq!(mu.atom(classify_region(&mu)), second_smallest_atom(&mu));
            }

            #[test]
            fn samples_are_valid(seed in any::<u64>(), q in 2usize..8) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mu = sample_uniform(q, &mut rng).unwrap();
                prop_assert!(mu.atoms().iter().all(|&a| a >= 0.0));
                prop_assert!((mu.atoms().iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
            }
        }
    }
}
