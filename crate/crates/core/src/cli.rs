//! Command-line harness: `qtl <eval|influence|width|region|sweep|verify>`.
//!
//! Every command writes CSV (header row, `.` decimals, floats with 17
//! significant digits) to `--out` or stdout. Given the same configuration,
//! including the seed, the output is byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::evaluate::{Estimate, Evaluator};
use crate::functions::{
    build_tribes, build_tribes_with_size, indicator, is_a_monotone, FunctionSpec, Kind,
};
use crate::influence::{influence_profile, keller_diagnostic, InfluenceKind};
use crate::measures::{central_measure, SimplexMeasure};
use crate::threshold::{
    cross_section_scan, derivative_sweep, line_width, region_measure, sweep_scaling, WidthOptions,
};
use crate::verify::{run_suites, Fault};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "qtl",
    version,
    about = "Sharp-threshold experiments for monotone functions on [q]^n"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probability of f = a under product measures.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Measure as comma-separated atoms; repeatable. Defaults to uniform.
        #[arg(long = "mu")]
        mu: Vec<String>,
    },
    /// Per-coordinate influences of the indicator 1[f = a].
    Influence {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long = "mu")]
        mu: Option<String>,
        #[arg(long, value_enum, default_value_t = KindArg::All)]
        kind: KindArg,
        /// Emit the max-h-influence versus Var ln n / n summary instead.
        #[arg(long)]
        keller: bool,
    },
    /// Threshold window along the line t -> t delta_0 + (1 - t) base.
    Width {
        #[command(flatten)]
        common: CommonArgs,
        /// Base measure with atom 0 equal to 0; defaults to the central measure.
        #[arg(long)]
        base: Option<String>,
        /// Scan the cross section sliding mass onto this atom instead.
        #[arg(long)]
        section: Option<usize>,
        #[arg(long, default_value_t = 32)]
        s_points: usize,
        /// Also write derivative diagnostics along the line to this file.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Fraction of the simplex where eps <= Pr[f = a] <= 1 - eps.
    Region {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Tribes window width across n.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated n values; empty for none.
        #[arg(long, default_value = "1024,4096,16384,65536,262144,1048576")]
        n_list: String,
    },
    /// Run the invariant suites.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Restrict to these suites; repeatable.
        #[arg(long)]
        suite: Vec<String>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvaluatorArg {
    Exact,
    Closed,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Tribes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Bkkkl,
    Variance,
    H,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub a: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, env = "QTL_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long, value_enum, default_value_t = EvaluatorArg::Exact)]
    pub evaluator: EvaluatorArg,
    #[arg(long = "fn")]
    pub fn_path: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long, default_value_t = 0.5)]
    pub p0: f64,
    /// Tribe size override for `--family tribes`.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = crate::DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Validated settings shared by every command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub q: usize,
    pub n: Option<usize>,
    pub a: Option<usize>,
    pub eps: f64,
    pub seed: u64,
    pub samples: Option<u64>,
    pub evaluator: EvaluatorArg,
    pub fn_path: Option<PathBuf>,
    pub family: Option<FamilyArg>,
    pub p0: f64,
    pub r: Option<usize>,
    pub cap: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_args(args: &CommonArgs) -> Result<Self> {
        if !(args.eps > 0.0 && args.eps < 0.5) {
            return Err(Error::OutOfRange {
                name: "eps",
                value: args.eps,
                range: "(0, 1/2)",
            });
        }
        if args.q < 2 {
            return Err(Error::InvalidFunction(format!(
                "q = {} must be at least 2",
                args.q
            )));
        }
        if let Some(a) = args.a {
            if a >= args.q {
                return Err(Error::InvalidFunction(format!(
                    "a = {a} outside [{}]",
                    args.q
                )));
            }
        }
        if args.samples == Some(0) {
            return Err(Error::OutOfRange {
                name: "samples",
                value: 0.0,
                range: ">= 1",
            });
        }
        Ok(Self {
            q: args.q,
            n: args.n,
            a: args.a,
            eps: args.eps,
            seed: args.seed,
            samples: args.samples,
            evaluator: args.evaluator,
            fn_path: args.fn_path.clone(),
            family: args.family,
            p0: args.p0,
            r: args.r,
            cap: args.cap,
            out: args.out.clone(),
        })
    }

    fn evaluator(&self, default_samples: u64) -> Evaluator {
        match self.evaluator {
            EvaluatorArg::Exact => Evaluator::Exact { cap: self.cap },
            EvaluatorArg::Closed => Evaluator::ClosedForm,
            EvaluatorArg::Mc => Evaluator::MonteCarlo {
                samples: self.samples.unwrap_or(default_samples),
                seed: self.seed,
            },
        }
    }

    /// The function from `--fn` or from `--family`.
    pub fn load_function(&self) -> Result<FunctionSpec> {
        let f = match (&self.fn_path, self.family) {
            (Some(_), Some(_)) => {
                return Err(Error::Unsupported(
                    "give either --fn or --family, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Unsupported(
                    "one of --fn or --family is required".into(),
                ))
            }
            (Some(path), None) => {
                let text = fs::read_to_string(path)?;
                FunctionSpec::parse_file(&text, self.cap)?
            }
            (None, Some(FamilyArg::Tribes)) => {
                let n = self
                    .n
                    .ok_or_else(|| Error::Unsupported("--family tribes needs --n".into()))?;
                match self.r {
                    Some(r) => build_tribes_with_size(self.q, n, r)?,
                    None => build_tribes(self.q, n, self.p0)?,
                }
            }
        };
        if let Some(a) = self.a {
            let bound = match f.kind() {
                Kind::Full => f.q(),
                Kind::Indicator => 2,
            };
            if a >= bound {
                return Err(Error::InvalidFunction(format!(
                    "event value {a} outside the range of f"
                )));
            }
        }
        Ok(f)
    }
}

/// `%.17g`: 17 significant digits, trailing zeros trimmed.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if (-5..17).contains(&exp) {
        if exp < 0 {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            out.push_str(&digits);
        } else {
            let split = exp as usize + 1;
            out.push_str(&digits[..split]);
            out.push('.');
            out.push_str(&digits[split..]);
        }
        let trimmed = out.trim_end_matches('0').trim_end_matches('.');
        trimmed.to_string()
    } else {
        let mut m = format!("{}.{}", &digits[..1], &digits[1..]);
        m = m.trim_end_matches('0').trim_end_matches('.').to_string();
        format!("{out}{m}e{exp}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    fn finish(self) -> Result<String> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// What a command produced: the main CSV, side files, stderr notes and
/// whether everything passed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub csv: String,
    pub side_files: Vec<(PathBuf, String)>,
    pub notes: Vec<String>,
    pub ok: bool,
}

fn parse_measure(text: &str, q: usize) -> Result<SimplexMeasure> {
    let mu: SimplexMeasure = text.parse()?;
    if mu.q() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: mu.q(),
        });
    }
    Ok(mu)
}

fn estimate_row(f: &FunctionSpec, a: usize, mu: &SimplexMeasure, e: &Estimate) -> Vec<String> {
    vec![
        f.q().to_string(),
        f.n().to_string(),
        a.to_string(),
        mu.to_string(),
        e.method.as_str().to_string(),
        fmt_f64(e.value),
        fmt_f64(e.std_error),
        e.samples.to_string(),
    ]
}

pub fn cmd_eval(cfg: &RunConfig, mus: &[String]) -> Result<Outcome> {
    let f = cfg.load_function()?;
    let evaluator = cfg.evaluator(100_000);
    let measures = if mus.is_empty() {
        vec![SimplexMeasure::uniform(f.q())?]
    } else {
        mus.iter()
            .map(|m| parse_measure(m, f.q()))
            .collect::<Result<_>>()?
    };
    let values: Vec<usize> = match (cfg.a, f.kind()) {
        (Some(a), _) => vec![a],
        (None, Kind::Full) => (0..f.q()).collect(),
        (None, Kind::Indicator) => vec![0, 1],
    };
    let mut table = Table::new(&[
        "q",
        "n",
        "a",
        "mu",
        "method",
        "value",
        "std_error",
        "samples",
    ])?;
    for mu in &measures {
        for &a in &values {
            let e = evaluator.probability(&f, mu, a)?;
            table.row(estimate_row(&f, a, mu, &e))?;
        }
    }
    Ok(Outcome {
        csv: table.finish()?,
        ok: true,
        ..Default::default()
    })
}

/// The indicator `1[f = a]`; an indicator input is used as is.
fn event_indicator(f: &FunctionSpec, a: usize, cap: u64) -> Result<FunctionSpec> {
    match f.kind() {
        Kind::Full => indicator(f, a, cap),
        Kind::Indicator => Ok(f.clone()),
    }
}

pub fn cmd_influence(
    cfg: &RunConfig,
    mu: Option<&str>,
    kind: KindArg,
    keller: bool,
) -> Result<Outcome> {
    let f = cfg.load_function()?;
    let g = event_indicator(&f, cfg.a.unwrap_or(0), cfg.cap)?;
    let mu = match mu {
        Some(text) => parse_measure(text, f.q())?,
        None => SimplexMeasure::uniform(f.q())?,
    };
    if keller {
        let rep = keller_diagnostic(&g, &mu, cfg.cap)?;
        let mut table = Table::new(&["n", "max_influence", "variance", "denominator", "ratio"])?;
        table.row([
            g.n().to_string(),
            fmt_f64(rep.max_influence),
            fmt_f64(rep.variance),
            fmt_f64(rep.denominator),
            fmt_opt(rep.ratio),
        ])?;
        return Ok(Outcome {
            csv: table.finish()?,
            ok: true,
            ..Default::default()
        });
    }
    let kinds = match kind {
        KindArg::Bkkkl => vec![InfluenceKind::Bkkkl],
        KindArg::Variance => vec![InfluenceKind::Variance],
        KindArg::H => vec![InfluenceKind::H],
        KindArg::All => vec![
            InfluenceKind::Bkkkl,
            InfluenceKind::Variance,
            InfluenceKind::H,
        ],
    };
    let mut table = Table::new(&["k", "kind", "value"])?;
    for kind in kinds {
        let profile = influence_profile(&g, &mu, kind, cfg.cap)?;
        for (k, v) in profile.values.iter().enumerate() {
            table.row([(k + 1).to_string(), kind.as_str().to_string(), fmt_f64(*v)])?;
        }
    }
    Ok(Outcome {
        csv: table.finish()?,
        ok: true,
        ..Default::default()
    })
}

pub fn cmd_width(
    cfg: &RunConfig,
    base: Option<&str>,
    section: Option<usize>,
    s_points: usize,
    diagnostics: Option<&Path>,
) -> Result<Outcome> {
    let f = cfg.load_function()?;
    let a = cfg.a.unwrap_or(0);
    let evaluator = cfg.evaluator(20_000);
    let mut outcome = Outcome {
        ok: true,
        ..Default::default()
    };

    if let Some(i) = section {
        let base = match base {
            Some(text) => parse_measure(text, f.q())?,
            None => {
                // Uniform on the atoms other than 0 and i.
                let mut w = vec![1.0; f.q()];
                w[0] = 0.0;
                if i < f.q() {
                    w[i] = 0.0;
                }
                SimplexMeasure::normalized(w)?
            }
        };
        let points = s_points.max(2);
        let grid: Vec<f64> = (0..points)
            .map(|j| j as f64 / (points - 1) as f64)
            .collect();
        let scan = cross_section_scan(
            &f,
            &base,
            i,
            a,
            cfg.eps,
            &grid,
            &evaluator,
            WidthOptions::default(),
        )?;
        let mut table = Table::new(&["s", "t_lo", "t_hi", "width", "area"])?;
        for (s, rep) in &scan.slices {
            table.row([
                fmt_f64(*s),
                fmt_opt(rep.t_lo),
                fmt_opt(rep.t_hi),
                fmt_f64(rep.width),
                fmt_f64(scan.area),
            ])?;
        }
        outcome.csv = table.finish()?;
    } else {
        let base = match base {
            Some(text) => parse_measure(text, f.q())?,
            None => central_measure(f.q())?,
        };
        let rep = line_width(&f, &base, a, cfg.eps, &evaluator)?;
        let mut table = Table::new(&[
            "eps",
            "a",
            "base",
            "evaluator",
            "t_lo",
            "t_hi",
            "width",
            "lo_absent",
            "hi_absent",
            "increasing",
            "non_monotone",
            "grid_size",
            "tolerance",
        ])?;
        table.row([
            fmt_f64(rep.eps),
            a.to_string(),
            base.to_string(),
            evaluator.name().to_string(),
            fmt_opt(rep.t_lo),
            fmt_opt(rep.t_hi),
            fmt_f64(rep.width),
            rep.lo_absent.to_string(),
            rep.hi_absent.to_string(),
            rep.increasing.to_string(),
            rep.non_monotone.to_string(),
            rep.grid_size.to_string(),
            fmt_f64(rep.tolerance),
        ])?;
        if let Some(clamped) = f.tribes().map(|t| t.clamped).filter(|&c| c) {
            outcome
                .notes
                .push(format!("tribe size formula clamped: {clamped}"));
        }
        outcome.csv = table.finish()?;

        if let Some(path) = diagnostics {
            let g = event_indicator(&f, a, cfg.cap)?;
            if !is_a_monotone(&g, 0, cfg.cap)? {
                return Err(Error::InvalidFunction(
                    "derivative diagnostics need a 0-monotone event".into(),
                ));
            }
            let rows = derivative_sweep(&g, &base, 21, cfg.cap)?;
            let mut diag = Table::new(&[
                "n",
                "t",
                "alpha",
                "derivative",
                "lower_bound_denominator",
                "ratio",
            ])?;
            for d in rows {
                diag.row([
                    g.n().to_string(),
                    fmt_f64(d.t),
                    fmt_f64(d.alpha),
                    fmt_f64(d.derivative),
                    fmt_f64(d.denominator),
                    fmt_opt(d.ratio),
                ])?;
            }
            outcome
                .side_files
                .push((path.to_path_buf(), diag.finish()?));
        }
    }
    Ok(outcome)
}

pub fn cmd_region(cfg: &RunConfig) -> Result<Outcome> {
    let f = cfg.load_function()?;
    let a = cfg.a.unwrap_or(0);
    let samples = cfg.samples.unwrap_or(10_000);
    // Per-measure Monte Carlo uses its own default budget.
    let evaluator = match cfg.evaluator {
        EvaluatorArg::Mc => Evaluator::MonteCarlo {
            samples: 10_000,
            seed: cfg.seed,
        },
        _ => cfg.evaluator(10_000),
    };
    let est = region_measure(&f, a, cfg.eps, samples, cfg.seed, &evaluator)?;
    let mut table = Table::new(&[
        "q",
        "n",
        "a",
        "eps",
        "samples",
        "fraction",
        "std_error",
        "seed",
    ])?;
    table.row([
        f.q().to_string(),
        f.n().to_string(),
        a.to_string(),
        fmt_f64(cfg.eps),
        est.samples.to_string(),
        fmt_f64(est.fraction),
        fmt_f64(est.std_error),
        est.seed.to_string(),
    ])?;
    Ok(Outcome {
        csv: table.finish()?,
        ok: true,
        ..Default::default()
    })
}

pub fn parse_n_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line: 0,
                message: format!("n-list entry {s:?}: {e}"),
            })
        })
        .collect()
}

pub fn cmd_sweep(cfg: &RunConfig, n_list: &str) -> Result<Outcome> {
    let ns = parse_n_list(n_list)?;
    let mut rows = sweep_scaling(cfg.q, cfg.p0, &ns, cfg.eps)?;
    rows.sort_by_key(|r| r.n);
    let mut table = Table::new(&["n", "r", "p_lo", "p_hi", "width", "width_times_ln_n"])?;
    let mut plot = String::from("# n width\n");
    for row in &rows {
        table.row([
            row.n.to_string(),
            row.r.to_string(),
            fmt_opt(row.p_lo),
            fmt_opt(row.p_hi),
            fmt_f64(row.width),
            fmt_f64(row.width_times_ln_n),
        ])?;
        plot.push_str(&format!("{} {}\n", row.n, fmt_f64(row.width)));
    }
    let mut outcome = Outcome {
        csv: table.finish()?,
        ok: true,
        ..Default::default()
    };
    if let Some(out) = &cfg.out {
        outcome.side_files.push((out.with_extension("dat"), plot));
    }
    Ok(outcome)
}

pub fn cmd_verify(suites: &[String], inject_fault: bool) -> Result<Outcome> {
    let fault = inject_fault.then_some(Fault::CorruptOrder);
    let results = run_suites(suites, fault)?;
    let mut table = Table::new(&["suite", "status", "checks", "failures"])?;
    let mut outcome = Outcome {
        ok: true,
        ..Default::default()
    };
    for r in &results {
        table.row([
            r.name.to_string(),
            if r.passed() { "pass" } else { "fail" }.to_string(),
            r.checks.to_string(),
            r.failures.to_string(),
        ])?;
        outcome
            .notes
            .push(format!("{}: {:.3}s", r.name, r.elapsed.as_secs_f64()));
        if let Some(detail) = &r.first_failure {
            outcome
                .notes
                .push(format!("{}: first failure: {detail}", r.name));
        }
        outcome.ok &= r.passed();
    }
    outcome.csv = table.finish()?;
    Ok(outcome)
}

/// Dispatches one parsed command line.
pub fn execute(cli: &Cli) -> Result<(Outcome, Option<PathBuf>)> {
    let (common, outcome) = match &cli.command {
        Command::Eval { common, mu } => (common, cmd_eval(&RunConfig::from_args(common)?, mu)?),
        Command::Influence {
            common,
            mu,
            kind,
            keller,
        } => (
            common,
            cmd_influence(
                &RunConfig::from_args(common)?,
                mu.as_deref(),
                *kind,
                *keller,
            )?,
        ),
        Command::Width {
            common,
            base,
            section,
            s_points,
            diagnostics,
        } => (
            common,
            cmd_width(
                &RunConfig::from_args(common)?,
                base.as_deref(),
                *section,
                *s_points,
                diagnostics.as_deref(),
            )?,
        ),
        Command::Region { common } => (common, cmd_region(&RunConfig::from_args(common)?)?),
        Command::Sweep { common, n_list } => {
            (common, cmd_sweep(&RunConfig::from_args(common)?, n_list)?)
        }
        Command::Verify {
            common,
            suite,
            inject_fault,
        } => {
            RunConfig::from_args(common)?;
            (common, cmd_verify(suite, *inject_fault)?)
        }
    };
    Ok((outcome, common.out.clone()))
}

/// Runs a command line and writes its files; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = execute(&cli).and_then(|(outcome, out)| {
        match &out {
            Some(path) => fs::write(path, &outcome.csv)?,
            None => stdout.write_all(outcome.csv.as_bytes())?,
        }
        for (path, contents) in &outcome.side_files {
            fs::write(path, contents)?;
        }
        for note in &outcome.notes {
            writeln!(stderr, "{note}")?;
        }
        Ok(outcome.ok)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}
