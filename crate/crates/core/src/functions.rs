//! Functions on `[q]^n`: explicit tables, the tribes variant, indicator
//! views, the partial orders `<=_a` and the monotonicity/symmetry checks.
//!
//! Points are indexed lexicographically with coordinate 0 most significant:
//! `index(x) = sum_k x_k * q^(n-1-k)`. Tables and the text file format both
//! use this order.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A point of `[q]^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Point {
    coords: Vec<usize>,
}

impl Point {
    pub fn new(q: usize, coords: Vec<usize>) -> Result<Self> {
        if let Some(&c) = coords.iter().find(|&&c| c >= q) {
            return Err(Error::InvalidFunction(format!(
                "coordinate {c} outside [{q}]"
            )));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }
}

/// Whether outputs range over `[q]` or over `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Full,
    Indicator,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Full => "full",
            Kind::Indicator => "indicator",
        }
    }
}

/// Tribe layout of the tribes variant.
#[derive(Debug, Clone, PartialEq)]
pub struct TribesFamily {
    /// Nominal tribe size.
    pub r: usize,
    /// The `mu(0)` the tribe size was tuned for, when built from the formula.
    pub p0: Option<f64>,
    /// True when the formula fell outside `[1, n]` and was clamped.
    pub clamped: bool,
    /// Tribe sizes in coordinate order; the last tribe absorbs the remainder.
    pub sizes: Vec<usize>,
}

impl TribesFamily {
    fn eval(&self, x: &[usize]) -> usize {
        let mut start = 0;
        for &len in &self.sizes {
            if x[start..start + len].iter().all(|&c| c == 0) {
                return 0;
            }
            start += len;
        }
        // No tribe is all-zero, so some coordinate is nonzero.
        x.iter().copied().find(|&c| c != 0).unwrap_or(0)
    }

    /// Sizes as `(size, count)` runs: `r` repeated, then the last tribe.
    pub fn size_runs(&self) -> Vec<(usize, usize)> {
        let count = self.sizes.len();
        let last = self.sizes[count - 1];
        if last == self.r {
            vec![(self.r, count)]
        } else {
            vec![(self.r, count - 1), (last, 1)]
        }
    }

    /// True when some tribe of `x` is all-zero.
    pub fn has_zero_tribe(&self, x: &[usize]) -> bool {
        self.eval(x) == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Table(Vec<u8>),
    Tribes(TribesFamily),
    /// Lazy `1[inner(x) = value]` over a structured family.
    IndicatorOf {
        inner: Box<FunctionSpec>,
        value: usize,
    },
}

/// A function `[q]^n -> [q]` (kind `Full`) or `[q]^n -> {0, 1}` (kind
/// `Indicator`).
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    q: usize,
    n: usize,
    kind: Kind,
    body: Body,
}

/// `q^n`, or an error when it exceeds `cap`.
pub fn cube_size(q: usize, n: usize, cap: u64) -> Result<usize> {
    let points = (q as u64).checked_pow(n as u32);
    match points {
        Some(p) if p <= cap => Ok(p as usize),
        Some(p) => Err(Error::CapExceeded {
            points: p.to_string(),
            cap,
        }),
        None => Err(Error::CapExceeded {
            points: format!("{q}^{n}"),
            cap,
        }),
    }
}

/// Writes the coordinates of point `index` into `out`.
pub fn point_of_index(q: usize, mut index: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % q;
        index /= q;
    }
}

pub fn index_of(q: usize, x: &[usize]) -> usize {
    x.iter().fold(0, |acc, &c| acc * q + c)
}

fn check_shape(q: usize, n: usize) -> Result<()> {
    if !(2..=256).contains(&q) {
        return Err(Error::InvalidFunction(format!(
            "q = {q} must lie in 2..=256"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidFunction("n must be at least 1".into()));
    }
    Ok(())
}

impl FunctionSpec {
    pub fn from_table(q: usize, n: usize, kind: Kind, table: Vec<u8>) -> Result<Self> {
        check_shape(q, n)?;
        let expected = (q as u64)
            .checked_pow(n as u32)
            .filter(|&p| p <= usize::MAX as u64)
            .ok_or_else(|| {
                Error::InvalidFunction(format!("{q}^{n} points do not fit in memory"))
            })?;
        if table.len() as u64 != expected {
            return Err(Error::InvalidFunction(format!(
                "table has {} entries, expected {expected}",
                table.len()
            )));
        }
        let bound = match kind {
            Kind::Full => q,
            Kind::Indicator => 2,
        };
        if let Some(&v) = table.iter().find(|&&v| v as usize >= bound) {
            return Err(Error::InvalidFunction(format!(
                "value {v} out of range for a {} function",
                kind.as_str()
            )));
        }
        Ok(Self {
            q,
            n,
            kind,
            body: Body::Table(table),
        })
    }

    /// Tabulates `rule` over every point of `[q]^n`.
    pub fn from_fn(
        q: usize,
        n: usize,
        kind: Kind,
        cap: u64,
        mut rule: impl FnMut(&[usize]) -> usize,
    ) -> Result<Self> {
        check_shape(q, n)?;
        let size = cube_size(q, n, cap)?;
        let mut x = vec![0; n];
        let mut table = Vec::with_capacity(size);
        for idx in 0..size {
            point_of_index(q, idx, &mut x);
            table.push(rule(&x) as u8);
        }
        Self::from_table(q, n, kind, table)
    }

    pub fn constant(q: usize, n: usize, kind: Kind, value: usize, cap: u64) -> Result<Self> {
        Self::from_fn(q, n, kind, cap, |_| value)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn table(&self) -> Option<&[u8]> {
        match &self.body {
            Body::Table(t) => Some(t),
            _ => None,
        }
    }

    /// The tribe layout when this is the tribes variant or an indicator of it.
    pub fn tribes(&self) -> Option<&TribesFamily> {
        match &self.body {
            Body::Tribes(t) => Some(t),
            Body::IndicatorOf { inner, .. } => inner.tribes(),
            Body::Table(_) => None,
        }
    }

    /// `Some(a)` when this is a lazy indicator view `1[g = a]`.
    pub fn indicator_value(&self) -> Option<usize> {
        match &self.body {
            Body::IndicatorOf { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[usize]) -> usize {
        debug_assert_eq!(x.len(), self.n);
        match &self.body {
            Body::Table(t) => t[index_of(self.q, x)] as usize,
            Body::Tribes(tr) => tr.eval(x),
            Body::IndicatorOf { inner, value } => usize::from(inner.eval(x) == *value),
        }
    }

    pub fn eval_point(&self, x: &Point) -> Result<usize> {
        if x.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.n(),
            });
        }
        Ok(self.eval(x.coords()))
    }

    /// Fills `out[v] = f(x with x_k = v)` for every `v` in `[q]`.
    pub fn fibre_into(&self, x: &mut [usize], k: usize, out: &mut [usize]) {
        let saved = x[k];
        match &self.body {
            Body::Table(t) => {
                x[k] = 0;
                let base = index_of(self.q, x);
                let stride = self.q.pow((self.n - 1 - k) as u32);
                for (v, slot) in out.iter_mut().enumerate() {
                    *slot = t[base + v * stride] as usize;
                }
            }
            _ => {
                for (v, slot) in out.iter_mut().enumerate() {
                    x[k] = v;
                    *slot = self.eval(x);
                }
            }
        }
        x[k] = saved;
    }

    fn require_kind(&self, kind: Kind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::InvalidFunction(format!(
                "expected a {} function, got {}",
                kind.as_str(),
                self.kind.as_str()
            )))
        }
    }

    /// Relabels coordinates: the result at `x` is `f(y)` with `y_{perm[k]} = x_k`.
    pub fn permuted(&self, perm: &[usize], cap: u64) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        let mut y = vec![0; self.n];
        Self::from_fn(self.q, self.n, self.kind, cap, |x| {
            for (k, &c) in x.iter().enumerate() {
                y[perm[k]] = c;
            }
            self.eval(&y)
        })
    }

    /// Serializes to the text format:
    ///
    /// ```text
    /// q=<q> n=<n> kind=<full|indicator>
    /// family=tribes r=<r> p0=<p0>      (structured families only)
    /// <one value per point, lexicographic order>   (tables only)
    /// ```
    pub fn to_file_string(&self) -> String {
        let mut out = format!("q={} n={} kind={}\n", self.q, self.n, self.kind.as_str());
        match &self.body {
            Body::Table(t) => {
                for v in t {
                    writeln!(out, "{v}").unwrap();
                }
            }
            Body::Tribes(_) | Body::IndicatorOf { .. } => {
                let tr = self
                    .tribes()
                    .expect("structured bodies wrap a tribes family");
                write!(out, "family=tribes r={}", tr.r).unwrap();
                if let Some(p0) = tr.p0 {
                    write!(out, " p0={p0}").unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parses the text format written by [`FunctionSpec::to_file_string`].
    ///
    /// A family file with `kind=indicator` denotes the event `f = 0`.
    pub fn parse_file(text: &str, cap: u64) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header `q=<q> n=<n> kind=<full|indicator>`".into(),
        })?;
        let fields = key_values(hline, header)?;
        let q: usize = field(hline, &fields, "q")?;
        let n: usize = field(hline, &fields, "n")?;
        let kind = match lookup(&fields, "kind") {
            Some("full") => Kind::Full,
            Some("indicator") => Kind::Indicator,
            other => {
                return Err(Error::Parse {
                    line: hline,
                    message: format!("kind must be `full` or `indicator`, got {other:?}"),
                })
            }
        };
        check_shape(q, n).map_err(|e| Error::Parse {
            line: hline,
            message: e.to_string(),
        })?;

        let mut rest = lines.peekable();
        if let Some(&(fline, first)) = rest.peek() {
            if first.starts_with("family=") {
                let fam = key_values(fline, first)?;
                if lookup(&fam, "family") != Some("tribes") {
                    return Err(Error::Parse {
                        line: fline,
                        message: "only `family=tribes` is supported".into(),
                    });
                }
                let r: usize = field(fline, &fam, "r")?;
                let p0 = match lookup(&fam, "p0") {
                    Some(v) => Some(v.parse::<f64>().map_err(|e| Error::Parse {
                        line: fline,
                        message: format!("p0: {e}"),
                    })?),
                    None => None,
                };
                let at = |e: Error| Error::Parse {
                    line: fline,
                    message: e.to_string(),
                };
                let mut f = build_tribes_with_size(q, n, r).map_err(at)?;
                if let Body::Tribes(tr) = &mut f.body {
                    tr.p0 = p0;
                }
                rest.next();
                if let Some((line, _)) = rest.next() {
                    return Err(Error::Parse {
                        line,
                        message: "unexpected values after a family line".into(),
                    });
                }
                return match kind {
                    Kind::Full => Ok(f),
                    Kind::Indicator => indicator(&f, 0, cap).map_err(at),
                };
            }
        }

        cube_size(q, n, cap).map_err(|e| Error::Parse {
            line: hline,
            message: e.to_string(),
        })?;
        let bound = match kind {
            Kind::Full => q,
            Kind::Indicator => 2,
        };
        let mut table = Vec::new();
        let mut last_line = hline;
        for (line, tok) in rest {
            let v: usize = tok.parse().map_err(|e| Error::Parse {
                line,
                message: format!("value {tok:?}: {e}"),
            })?;
            if v >= bound {
                return Err(Error::Parse {
                    line,
                    message: format!("value {v} out of range for a {} function", kind.as_str()),
                });
            }
            table.push(v as u8);
            last_line = line;
        }
        let expected = q.pow(n as u32);
        if table.len() != expected {
            return Err(Error::Parse {
                line: last_line + 1,
                message: format!("expected {expected} values, found {}", table.len()),
            });
        }
        Self::from_table(q, n, kind, table)
    }
}

fn key_values(line: usize, text: &str) -> Result<Vec<(&str, &str)>> {
    text.split_whitespace()
        .map(|tok| {
            tok.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected key=value, got {tok:?}"),
            })
        })
        .collect()
}

fn lookup<'a>(fields: &[(&str, &'a str)], key: &str) -> Option<&'a str> {
    fields.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

fn field<T: std::str::FromStr>(line: usize, fields: &[(&str, &str)], key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = lookup(fields, key).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing `{key}=`"),
    })?;
    raw.parse().map_err(|e| Error::Parse {
        line,
        message: format!("{key}: {e}"),
    })
}

/// `x <=_a y`: `y` arises from `x` by changing some coordinates to `a`.
pub fn leq_a(x: &Point, y: &Point, a: usize) -> Result<bool> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            got: y.n(),
        });
    }
    Ok(leq_a_raw(x.coords(), y.coords(), a))
}

pub(crate) fn leq_a_raw(x: &[usize], y: &[usize], a: usize) -> bool {
    x.iter().zip(y).all(|(&xi, &yi)| yi == a || xi == yi)
}

/// Checks `x <=_a y => f(x) <= f(y)` on the covering pairs (one non-`a`
/// coordinate switched to `a`), which generate the order.
pub fn is_a_monotone(f: &FunctionSpec, a: usize, cap: u64) -> Result<bool> {
    f.require_kind(Kind::Indicator)?;
    covering_monotone(f, a, cap, |v| v)
}

/// True iff `1[f = a]` is `a`-monotone for every `a` in `[q]`.
pub fn is_monotone_full(f: &FunctionSpec, cap: u64) -> Result<bool> {
    f.require_kind(Kind::Full)?;
    for a in 0..f.q {
        if !covering_monotone(f, a, cap, |v| usize::from(v == a))? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn covering_monotone(
    f: &FunctionSpec,
    a: usize,
    cap: u64,
    view: impl Fn(usize) -> usize,
) -> Result<bool> {
    if a >= f.q {
        return Err(Error::InvalidFunction(format!(
            "value {a} outside [{}]",
            f.q
        )));
    }
    let size = cube_size(f.q, f.n, cap)?;
    let mut x = vec![0; f.n];
    for idx in 0..size {
        point_of_index(f.q, idx, &mut x);
        let fx = view(f.eval(&x));
        if fx == 0 {
            continue;
        }
        for i in 0..f.n {
            let xi = x[i];
            if xi == a {
                continue;
            }
            x[i] = a;
            let fy = view(f.eval(&x));
            x[i] = xi;
            if fx > fy {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Permutations of `{0..n}` given as images `sigma[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationGroupSpec {
    n: usize,
    generators: Vec<Vec<usize>>,
}

impl PermutationGroupSpec {
    pub fn new(n: usize, generators: Vec<Vec<usize>>) -> Result<Self> {
        for g in &generators {
            let mut seen = vec![false; n];
            if g.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: g.len(),
                });
            }
            for &img in g {
                if img >= n || std::mem::replace(&mut seen[img], true) {
                    return Err(Error::InvalidFunction(format!(
                        "{g:?} is not a permutation"
                    )));
                }
            }
        }
        Ok(Self { n, generators })
    }

    /// `(0 1), (1 2), ..., (n-2 n-1)`: generates the full symmetric group.
    pub fn adjacent_transpositions(n: usize) -> Self {
        let generators = (0..n.saturating_sub(1))
            .map(|i| {
                let mut p: Vec<usize> = (0..n).collect();
                p.swap(i, i + 1);
                p
            })
            .collect();
        Self { n, generators }
    }

    /// The single cycle `i -> i + 1 mod n`.
    pub fn full_cycle(n: usize) -> Self {
        Self {
            n,
            generators: vec![(0..n).map(|i| (i + 1) % n).collect()],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            generators: vec![(0..n).collect()],
        }
    }

    pub fn generators(&self) -> &[Vec<usize>] {
        &self.generators
    }

    /// Orbit of coordinate 0 under the generated group.
    pub fn orbit_of_first(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        if self.n > 0 {
            seen[0] = true;
        }
        while let Some(i) = stack.pop() {
            for g in &self.generators {
                let j = g[i];
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        (0..self.n).filter(|&i| seen[i]).collect()
    }

    pub fn is_transitive(&self) -> bool {
        self.orbit_of_first().len() == self.n
    }
}

/// Transitivity of the generated group plus invariance `f(x_sigma) = f(x)`
/// under every generator, where `(x_sigma)_i = x_{sigma(i)}`.
pub fn is_symmetric(f: &FunctionSpec, group: &PermutationGroupSpec, cap: u64) -> Result<bool> {
    if group.n != f.n {
        return Err(Error::DimensionMismatch {
            expected: f.n,
            got: group.n,
        });
    }
    if !group.is_transitive() {
        return Ok(false);
    }
    let size = cube_size(f.q, f.n, cap)?;
    let mut x = vec![0; f.n];
    let mut xs = vec![0; f.n];
    for idx in 0..size {
        point_of_index(f.q, idx, &mut x);
        let fx = f.eval(&x);
        for g in &group.generators {
            for (slot, &src) in xs.iter_mut().zip(g) {
                *slot = x[src];
            }
            if f.eval(&xs) != fx {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The tribe-size formula `floor((ln n - ln ln n + ln ln(1/p0)) / ln(1/p0))`
/// clamped to `[1, n]`. Returns the size and whether clamping happened.
pub fn tribe_size(n: usize, p0: f64) -> Result<(usize, bool)> {
    if n < 3 {
        return Err(Error::InvalidFunction(format!(
            "tribe size formula needs n >= 3 (ln ln n), got {n}"
        )));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::OutOfRange {
            name: "p0",
            value: p0,
            range: "(0, 1)",
        });
    }
    let ln_n = (n as f64).ln();
    let inv = (1.0 / p0).ln();
    let raw = (ln_n - ln_n.ln() + inv.ln()) / inv;
    // n = 2^k with p0 = 1/2 lands exactly on integers; absorb rounding below them.
    let floored = (raw + 1e-9).floor();
    if floored < 1.0 {
        Ok((1, true))
    } else if floored > n as f64 {
        Ok((n, true))
    } else {
        Ok((floored as usize, false))
    }
}

/// The tribes variant with tribe size chosen by [`tribe_size`].
pub fn build_tribes(q: usize, n: usize, p0: f64) -> Result<FunctionSpec> {
    let (r, clamped) = tribe_size(n, p0)?;
    let mut f = build_tribes_with_size(q, n, r)?;
    if let Body::Tribes(tr) = &mut f.body {
        tr.p0 = Some(p0);
        tr.clamped = clamped;
    }
    Ok(f)
}

/// The tribes variant with an explicit tribe size `r`: `floor(n / r)` tribes
/// of consecutive coordinates, the remainder joining the last one. `f(x) = 0`
/// if some tribe is all-zero, else the first nonzero coordinate of `x`.
pub fn build_tribes_with_size(q: usize, n: usize, r: usize) -> Result<FunctionSpec> {
    check_shape(q, n)?;
    if r == 0 || r > n {
        return Err(Error::InvalidFunction(format!(
            "tribe size {r} must lie in 1..={n}"
        )));
    }
    let count = n / r;
    let mut sizes = vec![r; count];
    *sizes.last_mut().expect("r <= n gives at least one tribe") += n - count * r;
    Ok(FunctionSpec {
        q,
        n,
        kind: Kind::Full,
        body: Body::Tribes(TribesFamily {
            r,
            p0: None,
            clamped: false,
            sizes,
        }),
    })
}

/// `1[f = a]`: tabulated for tables, a lazy view for structured families.
pub fn indicator(f: &FunctionSpec, a: usize, cap: u64) -> Result<FunctionSpec> {
    f.require_kind(Kind::Full)?;
    if a >= f.q {
        return Err(Error::InvalidFunction(format!(
            "value {a} outside [{}]",
            f.q
        )));
    }
    match &f.body {
        Body::Table(_) => FunctionSpec::from_fn(f.q, f.n, Kind::Indicator, cap, |x| {
            usize::from(f.eval(x) == a)
        }),
        _ => Ok(FunctionSpec {
            q: f.q,
            n: f.n,
            kind: Kind::Indicator,
            body: Body::IndicatorOf {
                inner: Box::new(f.clone()),
                value: a,
            },
        }),
    }
}

/// Upward closure under `<=_0` of a random seed set: every point is a seed
/// independently with probability `density`.
pub fn random_zero_monotone(
    q: usize,
    n: usize,
    density: f64,
    seed: u64,
    cap: u64,
) -> Result<FunctionSpec> {
    check_shape(q, n)?;
    crate::error::check_unit("density", density)?;
    let size = cube_size(q, n, cap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table: Vec<u8> = (0..size).map(|_| u8::from(rng.gen_bool(density))).collect();

    // A point's lower covers have one fewer zero, so sweeping by zero count
    // settles every point after all of its lower covers.
    let mut x = vec![0; n];
    let mut by_zeros: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for idx in 0..size {
        point_of_index(q, idx, &mut x);
        by_zeros[x.iter().filter(|&&c| c == 0).count()].push(idx);
    }
    for bucket in &by_zeros {
        for &idx in bucket {
            if table[idx] == 1 {
                continue;
            }
            point_of_index(q, idx, &mut x);
            let mut up = false;
            'cover: for (k, &xk) in x.iter().enumerate() {
                if xk != 0 {
                    continue;
                }
                let stride = q.pow((n - 1 - k) as u32);
                for v in 1..q {
                    if table[idx + v * stride] == 1 {
                        up = true;
                        break 'cover;
                    }
                }
            }
            if up {
                table[idx] = 1;
            }
        }
    }
    FunctionSpec::from_table(q, n, Kind::Indicator, table)
}

/// `count` non-constant random upsets for seeds starting at `seed`, with
/// densities cycling through `0.02..0.2`.
pub fn upset_corpus(
    q: usize,
    n: usize,
    count: usize,
    seed: u64,
    cap: u64,
) -> Result<Vec<FunctionSpec>> {
    let mut out = Vec::with_capacity(count);
    let mut s = seed;
    while out.len() < count {
        let density = 0.02 + 0.02 * (s % 10) as f64;
        let f = random_zero_monotone(q, n, density, s, cap)?;
        s += 1;
        let t = f.table().expect("tabulated");
        if t.iter().any(|&v| v != t[0]) {
            out.push(f);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAP: u64 = crate::DEFAULT_ENUMERATION_CAP;

    fn p(q: usize, c: &[usize]) -> Point {
        Point::new(q, c.to_vec()).unwrap()
    }

    fn all_points(q: usize, n: usize) -> Vec<Vec<usize>> {
        let size = q.pow(n as u32);
        (0..size)
            .map(|i| {
                let mut x = vec![0; n];
                point_of_index(q, i, &mut x);
                x
            })
            .collect()
    }

    /// Monotonicity over every comparable pair, not just covers.
    fn monotone_all_pairs(f: &FunctionSpec, a: usize) -> bool {
        let pts = all_points(f.q(), f.n());
        pts.iter().all(|x| {
            pts.iter()
                .all(|y| !leq_a_raw(x, y, a) || f.eval(x) <= f.eval(y))
        })
    }

    #[test]
    fn leq_a_examples() {
        assert!(leq_a(&p(3, &[1, 2, 0]), &p(3, &[1, 2, 0]), 0).unwrap());
        assert!(leq_a(&p(3, &[1, 2, 0]), &p(3, &[1, 0, 0]), 0).unwrap());
        assert!(!leq_a(&p(3, &[1, 2]), &p(3, &[2, 2]), 0).unwrap());
        assert!(leq_a(&p(3, &[1]), &p(3, &[1, 2]), 0).is_err());
    }

    #[test]
    fn leq_a_is_a_partial_order() {
        for n in 1..=3 {
            let pts = all_points(3, n);
            for a in 0..3 {
                for x in &pts {
                    assert!(leq_a_raw(x, x, a));
                    for y in &pts {
                        if leq_a_raw(x, y, a) && leq_a_raw(y, x, a) {
                            assert_eq!(x, y);
                        }
                        for z in &pts {
                            if leq_a_raw(x, y, a) && leq_a_raw(y, z, a) {
                                assert!(leq_a_raw(x, z, a));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_examples() {
        let c = FunctionSpec::constant(3, 2, Kind::Indicator, 1, CAP).unwrap();
        assert!(is_a_monotone(&c, 0, CAP).unwrap());
        let some_zero =
            FunctionSpec::from_fn(3, 2, Kind::Indicator, CAP, |x| usize::from(x.contains(&0)))
                .unwrap();
        assert!(is_a_monotone(&some_zero, 0, CAP).unwrap());
        assert!(monotone_all_pairs(&some_zero, 0));
        let no_zero =
            FunctionSpec::from_fn(3, 2, Kind::Indicator, CAP, |x| usize::from(!x.contains(&0)))
                .unwrap();
        assert!(!is_a_monotone(&no_zero, 0, CAP).unwrap());
        assert!(!monotone_all_pairs(&no_zero, 0));
        assert!(is_a_monotone(
            &FunctionSpec::constant(3, 2, Kind::Full, 1, CAP).unwrap(),
            0,
            CAP
        )
        .is_err());
    }

    #[test]
    fn covering_check_agrees_with_all_pairs() {
        for n in 1..=3 {
            for seed in 0..40 {
                let table: Vec<u8> = {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..3usize.pow(n as u32))
                        .map(|_| u8::from(rng.gen_bool(0.5)))
                        .collect()
                };
                let f = FunctionSpec::from_table(3, n, Kind::Indicator, table).unwrap();
                for a in 0..3 {
                    assert_eq!(
                        is_a_monotone(&f, a, CAP).unwrap(),
                        monotone_all_pairs(&f, a)
                    );
                }
                let up = random_zero_monotone(3, n, 0.1, seed, CAP).unwrap();
                assert!(monotone_all_pairs(&up, 0));
            }
        }
    }

    #[test]
    fn full_monotonicity() {
        let c = FunctionSpec::constant(3, 2, Kind::Full, 2, CAP).unwrap();
        assert!(is_monotone_full(&c, CAP).unwrap());
        let dictator = FunctionSpec::from_fn(3, 2, Kind::Full, CAP, |x| x[0]).unwrap();
        assert!(is_monotone_full(&dictator, CAP).unwrap());
        let max = FunctionSpec::from_fn(3, 2, Kind::Full, CAP, |x| x[0].max(x[1])).unwrap();
        assert!(is_monotone_full(&max, CAP).unwrap());
        let sum = FunctionSpec::from_fn(3, 2, Kind::Full, CAP, |x| (x[0] + x[1]) % 3).unwrap();
        assert!(!is_monotone_full(&sum, CAP).unwrap());
    }

    #[test]
    fn tribes_monotone_for_every_tribe_size() {
        for n in [4, 6] {
            for r in 1..=n {
                let f = build_tribes_with_size(3, n, r).unwrap();
                assert!(is_monotone_full(&f, CAP).unwrap(), "n={n} r={r}");
            }
        }
    }

    #[test]
    fn tribe_size_formula() {
        assert_eq!(tribe_size(1 << 16, 0.5).unwrap(), (12, false));
        assert_eq!(tribe_size(1 << 10, 0.5).unwrap(), (6, false));
        // Small n never reaches r = 2.
        assert_eq!(tribe_size(4, 0.5).unwrap().0, 1);
        assert!(tribe_size(2, 0.5).is_err());
        assert!(tribe_size(10, 1.0).is_err());
        assert_eq!(tribe_size(3, 0.999).unwrap(), (1, true));
    }

    #[test]
    fn tribes_definition_cases() {
        let f = build_tribes_with_size(3, 4, 2).unwrap();
        assert_eq!(f.eval(&[0, 0, 2, 1]), 0);
        assert_eq!(f.eval(&[0, 2, 0, 1]), 2);
        assert_eq!(f.eval(&[1, 0, 0, 0]), 0);
        assert_eq!(f.eval(&[0, 1, 2, 0]), 1);
        let g = build_tribes_with_size(3, 7, 3).unwrap();
        assert_eq!(g.tribes().unwrap().sizes, vec![3, 4]);
    }

    #[test]
    fn tribes_indicator_matches_predicate() {
        let f = build_tribes_with_size(3, 4, 2).unwrap();
        let ind = indicator(&f, 0, CAP).unwrap();
        for x in all_points(3, 4) {
            let zero_tribe = (x[0] == 0 && x[1] == 0) || (x[2] == 0 && x[3] == 0);
            assert_eq!(ind.eval(&x), usize::from(zero_tribe));
            assert_eq!(f.tribes().unwrap().has_zero_tribe(&x), zero_tribe);
        }
        assert!(is_a_monotone(&ind, 0, CAP).unwrap());
    }

    #[test]
    fn indicators_partition_unity() {
        let f = FunctionSpec::from_fn(3, 3, Kind::Full, CAP, |x| (x[0] + 2 * x[2]) % 3).unwrap();
        let inds: Vec<_> = (0..3).map(|a| indicator(&f, a, CAP).unwrap()).collect();
        for x in all_points(3, 3) {
            assert_eq!(inds.iter().map(|g| g.eval(&x)).sum::<usize>(), 1);
        }
        let c = FunctionSpec::constant(3, 2, Kind::Full, 1, CAP).unwrap();
        assert_eq!(indicator(&c, 1, CAP).unwrap().table().unwrap(), &[1; 9]);
        assert_eq!(indicator(&c, 0, CAP).unwrap().table().unwrap(), &[0; 9]);
    }

    #[test]
    fn symmetry_examples() {
        let sum =
            FunctionSpec::from_fn(3, 3, Kind::Full, CAP, |x| x.iter().sum::<usize>() % 3).unwrap();
        assert!(
            is_symmetric(&sum, &PermutationGroupSpec::adjacent_transpositions(3), CAP).unwrap()
        );
        let dictator = FunctionSpec::from_fn(3, 3, Kind::Full, CAP, |x| x[0]).unwrap();
        assert!(!is_symmetric(&dictator, &PermutationGroupSpec::identity(3), CAP).unwrap());
        assert!(!is_symmetric(&dictator, &PermutationGroupSpec::full_cycle(3), CAP).unwrap());
        assert!(PermutationGroupSpec::full_cycle(3).is_transitive());
        assert!(PermutationGroupSpec::new(2, vec![vec![0, 0]]).is_err());
    }

    #[test]
    fn random_upsets_edges() {
        let zero = random_zero_monotone(3, 3, 0.0, 1, CAP).unwrap();
        assert!(zero.table().unwrap().iter().all(|&v| v == 0));
        let one = random_zero_monotone(3, 3, 1.0, 1, CAP).unwrap();
        assert!(one.table().unwrap().iter().all(|&v| v == 1));
        for seed in 0..20 {
            let f = random_zero_monotone(3, 4, 0.05, seed, CAP).unwrap();
            assert!(is_a_monotone(&f, 0, CAP).unwrap());
        }
    }

    #[test]
    fn permuted_relabels_coordinates() {
        let f = FunctionSpec::from_fn(3, 3, Kind::Full, CAP, |x| x[0]).unwrap();
        let g = f.permuted(&[2, 0, 1], CAP).unwrap();
        // g(x) = f(y) with y_2 = x_0, y_0 = x_1, y_1 = x_2.
        assert_eq!(g.eval(&[0, 2, 1]), 2);
    }

    #[test]
    fn file_format_round_trip_and_errors() {
        let f = FunctionSpec::from_fn(2, 2, Kind::Full, CAP, |x| x[0] & x[1]).unwrap();
        let text = f.to_file_string();
        assert_eq!(text, "q=2 n=2 kind=full\n0\n0\n0\n1\n");
        assert_eq!(FunctionSpec::parse_file(&text, CAP).unwrap(), f);

        let tribes = build_tribes(3, 8, 0.5).unwrap();
        let text = tribes.to_file_string();
        assert!(text.starts_with("q=3 n=8 kind=full\nfamily=tribes r="));
        assert_eq!(
            FunctionSpec::parse_file(&text, CAP).unwrap().tribes(),
            tribes.tribes()
        );

        let ind =
            FunctionSpec::parse_file("q=3 n=4 kind=indicator\nfamily=tribes r=2\n", CAP).unwrap();
        assert_eq!(ind.eval(&[0, 0, 1, 1]), 1);

        match FunctionSpec::parse_file("q=2 n=2 kind=full\n0\n1\n7\n1\n", CAP) {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match FunctionSpec::parse_file("q=2 n=2 kind=full\n0\n1\n", CAP) {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            FunctionSpec::parse_file("q=2 kind=full\n", CAP),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
