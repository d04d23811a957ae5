//! The `dfderiv` command line: estimates at a point, step-size sweeps, solver
//! runs and the table-reproduction benchmarks.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::bases::BasisKind;
use crate::bounds::observed_order;
use crate::error::Error;
use crate::estimators::{estimate_with, DiagMethod, EstimateOptions};
use crate::fbpcg::{solve_from, SolverConfig, StopReason};
use crate::problems::{lookup, registry, Objective};
use crate::sampling::{ModelOrder, SamplingScheme};

pub const CSV_HEADER: [&str; 12] = [
    "problem", "basis", "model", "h", "eta", "nf", "eps_g", "eps_d", "fmin", "gnorm", "itns", "qmfs",
];

/// Directory for bench output when `--output` is not given.
pub const OUTPUT_DIR_ENV: &str = "DFDERIV_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_TOLERANCE: i32 = 2;
pub const EXIT_EVALUATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dfderiv",
    version,
    about = "Derivative estimates on structured positive bases"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate g and diag(H) at one point.
    Estimate(EstimateArgs),
    /// Estimate over a logarithmic range of h and fit the observed order.
    Sweep(SweepArgs),
    /// Run the frame-based PCG solver.
    Solve(SolveArgs),
    /// Run a benchmark suite and check it against reference values.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Table3,
    Table4,
    Mgh,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Table3 => "table3",
            Suite::Table4 => "table4",
            Suite::Mgh => "mgh",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Recorded with the run; every shipped command is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long, default_value = "rosenbrock")]
    pub problem: String,
    /// Comma-separated point; defaults to the problem's standard start.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    #[arg(long, default_value = "cb")]
    pub basis: BasisKind,
    #[arg(long, allow_hyphen_values = true)]
    pub h: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub eta: f64,
    #[arg(long, default_value = "quadratic")]
    pub model: ModelOrder,
    /// Central second differences for the diagonal (CB and CMPB only).
    #[arg(long)]
    pub central_diag: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "rosenbrock")]
    pub problem: String,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// One basis; all four when omitted.
    #[arg(long)]
    pub basis: Option<BasisKind>,
    /// `LO:HI:N`, N log-spaced radii from HI down to LO.
    #[arg(long, default_value = "1e-5:1e-2:7")]
    pub h_range: String,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub eta: f64,
    #[arg(long, default_value = "quadratic")]
    pub model: ModelOrder,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, default_value = "rosenbrock")]
    pub problem: String,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    #[arg(long, default_value = "cb")]
    pub basis: BasisKind,
    #[arg(long, default_value_t = 1300)]
    pub budget: usize,
    #[arg(long, default_value_t = 1.0)]
    pub h0: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub h_min: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// CSV with columns `problem,basis,eps_g,eps_d,fmin` replacing the
    /// built-in reference values; blank cells are not checked.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// One output record. Missing cells are blank in CSV and `null` in JSON.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Row {
    pub problem: String,
    pub basis: String,
    pub model: String,
    pub h: Option<f64>,
    /// Marks a slope footer row, whose `eps_g`/`eps_d` hold fitted orders.
    pub slope: bool,
    pub eta: Option<f64>,
    pub nf: Option<usize>,
    pub eps_g: Option<f64>,
    pub eps_d: Option<f64>,
    pub fmin: Option<f64>,
    pub gnorm: Option<f64>,
    pub itns: Option<usize>,
    pub qmfs: Option<usize>,
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

fn int(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Row {
    pub fn cells(&self) -> [String; 12] {
        [
            self.problem.clone(),
            self.basis.clone(),
            self.model.clone(),
            if self.slope { "slope".into() } else { num(self.h) },
            num(self.eta),
            int(self.nf),
            num(self.eps_g),
            num(self.eps_d),
            num(self.fmin),
            num(self.gnorm),
            int(self.itns),
            int(self.qmfs),
        ]
    }

    pub fn to_json(&self) -> Value {
        let f = |v: Option<f64>| v.map_or(Value::Null, |x| json!(x));
        let u = |v: Option<usize>| v.map_or(Value::Null, |x| json!(x));
        let mut m = Map::new();
        m.insert("problem".into(), json!(self.problem));
        m.insert("basis".into(), json!(self.basis));
        m.insert("model".into(), json!(self.model));
        m.insert("h".into(), if self.slope { json!("slope") } else { f(self.h) });
        m.insert("eta".into(), f(self.eta));
        m.insert("nf".into(), u(self.nf));
        m.insert("eps_g".into(), f(self.eps_g));
        m.insert("eps_d".into(), f(self.eps_d));
        m.insert("fmin".into(), f(self.fmin));
        m.insert("gnorm".into(), f(self.gnorm));
        m.insert("itns".into(), u(self.itns));
        m.insert("qmfs".into(), u(self.qmfs));
        Value::Object(m)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Tolerance(Vec<String>),
    Evaluation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Tolerance(_) => EXIT_TOLERANCE,
            CliError::Evaluation(_) => EXIT_EVALUATION,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Evaluation { .. } => CliError::Evaluation(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

pub fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("bad coordinate {t:?} in --x")))
        })
        .collect()
}

/// Parses `LO:HI:N` into N log-spaced radii, largest first.
pub fn parse_h_range(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "--h-range expects LO:HI:N with 0 < LO < HI and N >= 3, got {s:?}"
        ))
    };
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || count < 3 {
        return Err(bad());
    }
    let (llo, lhi) = (lo.log10(), hi.log10());
    Ok((0..count)
        .map(|i| 10f64.powf(lhi - (lhi - llo) * i as f64 / (count - 1) as f64))
        .collect())
}

fn resolve_point(obj: &Objective, x: Option<&str>) -> Result<Vec<f64>, CliError> {
    let point = match x {
        Some(s) => parse_point(s)?,
        None => obj.standard_start.clone(),
    };
    if point.len() != obj.n {
        return Err(CliError::Usage(format!(
            "{} takes {} coordinates, --x has {}",
            obj.name,
            obj.n,
            point.len()
        )));
    }
    Ok(point)
}

struct EstimateOutcome {
    row: Row,
    g: Vec<f64>,
    d: Option<Vec<f64>>,
}

fn estimate_row(
    obj: &Objective,
    x: &[f64],
    scheme: &SamplingScheme,
    diag: DiagMethod,
) -> Result<EstimateOutcome, CliError> {
    let f = |p: &[f64]| {
        let v = obj.evaluate(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite value {v}"))
        }
    };
    let est = estimate_with(f, x, scheme, EstimateOptions { diag, f0: None })?;
    let eps_g = obj.gradient(x).ok().map(|t| norm_diff(&est.g, &t));
    let eps_d = match (&est.d, obj.diag_hessian(x)) {
        (Some(d), Ok(t)) => Some(norm_diff(d, &t)),
        _ => None,
    };
    Ok(EstimateOutcome {
        row: Row {
            problem: obj.name.into(),
            basis: scheme.kind.short_name().into(),
            model: scheme.model.name().into(),
            h: Some(scheme.h),
            eta: (scheme.model == ModelOrder::Quadratic).then_some(scheme.eta),
            nf: Some(est.total_evals()),
            eps_g,
            eps_d,
            ..Row::default()
        },
        g: est.g,
        d: est.d,
    })
}

fn render(rows: &[Row], format: Format) -> Result<String, CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER).map_err(|e| CliError::Io(e.to_string()))?;
            for r in rows {
                w.write_record(r.cells()).map_err(|e| CliError::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
        }
        Format::Json => {
            let arr = Value::Array(rows.iter().map(Row::to_json).collect());
            let mut s = serde_json::to_string_pretty(&arr).map_err(|e| CliError::Io(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Text => {
            let table: Vec<[String; 12]> = std::iter::once(CSV_HEADER.map(String::from))
                .chain(rows.iter().map(Row::cells))
                .collect();
            let mut widths = [0usize; 12];
            for r in &table {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let mut s = String::new();
            for r in &table {
                let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                let _ = writeln!(s, "{}", line.join("  ").trim_end());
            }
            Ok(s)
        }
    }
}

fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(CliError::from),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.9e}")).collect::<Vec<_>>().join(", ")
}

pub fn cmd_estimate(args: &EstimateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let obj = lookup(&args.problem)?;
    let x = resolve_point(&obj, args.x.as_deref())?;
    let scheme = SamplingScheme::with_options(args.basis, obj.n, args.h, args.eta, args.model)?;
    let diag = if args.central_diag {
        if !matches!(args.basis, BasisKind::Coordinate | BasisKind::CoordinateMinimal) {
            return Err(CliError::Usage("--central-diag needs --basis cb or cmpb".into()));
        }
        DiagMethod::Central
    } else {
        DiagMethod::LeastSquares
    };
    let out = estimate_row(&obj, &x, &scheme, diag)?;
    let format = args.out.format.unwrap_or(Format::Text);
    let text = if format == Format::Text {
        let mut s = String::new();
        let _ = writeln!(s, "problem  {}", obj.name);
        let _ = writeln!(s, "x        {}", fmt_vec(&x));
        let _ = writeln!(
            s,
            "scheme   {} {} h={:e} eta={}",
            scheme.kind.short_name(),
            scheme.model,
            scheme.h,
            scheme.eta
        );
        let _ = writeln!(s, "g        {}", fmt_vec(&out.g));
        if let Some(d) = &out.d {
            let _ = writeln!(s, "d        {}", fmt_vec(d));
        }
        let _ = writeln!(s, "nf       {}", out.row.nf.unwrap_or(0));
        if let Some(e) = out.row.eps_g {
            let _ = writeln!(s, "eps_g    {e:.9e}");
        }
        if let Some(e) = out.row.eps_d {
            let _ = writeln!(s, "eps_d    {e:.9e}");
        }
        s
    } else {
        render(&[out.row], format)?
    };
    emit(&text, args.out.output.as_deref(), stdout)
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let obj = lookup(&args.problem)?;
    if !obj.has_gradient() {
        return Err(CliError::Usage(format!(
            "{} has no analytic gradient to sweep against",
            obj.name
        )));
    }
    let x = resolve_point(&obj, args.x.as_deref())?;
    let hs = parse_h_range(&args.h_range)?;
    let kinds: Vec<BasisKind> = match args.basis {
        Some(k) => vec![k],
        None => BasisKind::ALL.to_vec(),
    };
    let schemes = kinds
        .iter()
        .map(|&k| {
            hs.iter()
                .map(|&h| SamplingScheme::with_options(k, obj.n, h, args.eta, args.model))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut footers = Vec::new();
    for per_basis in &schemes {
        let mut eg = Vec::new();
        let mut ed = Vec::new();
        for s in per_basis {
            let r = estimate_row(&obj, &x, s, DiagMethod::LeastSquares)?.row;
            if let Some(e) = r.eps_g {
                eg.push((s.h, e));
            }
            if let Some(e) = r.eps_d {
                ed.push((s.h, e));
            }
            rows.push(r);
        }
        let first = &per_basis[0];
        footers.push(Row {
            problem: obj.name.into(),
            basis: first.kind.short_name().into(),
            model: first.model.name().into(),
            slope: true,
            eta: (first.model == ModelOrder::Quadratic).then_some(first.eta),
            eps_g: observed_order(&eg).ok().map(|f| f.slope),
            eps_d: observed_order(&ed).ok().map(|f| f.slope),
            ..Row::default()
        });
    }
    rows.extend(footers);
    let text = render(&rows, args.out.format.unwrap_or(Format::Csv))?;
    emit(&text, args.out.output.as_deref(), stdout)
}

fn solver_row(obj: &Objective, x0: &[f64], config: &SolverConfig) -> Result<(Row, Option<String>), CliError> {
    let res = solve_from(obj, x0, config)?;
    let failure = match &res.stop {
        StopReason::EvaluationFailed { point, message } => Some(format!("evaluation failed at {point:?}: {message}")),
        _ => None,
    };
    let row = Row {
        problem: obj.name.into(),
        basis: config.basis.short_name().into(),
        model: ModelOrder::Quadratic.name().into(),
        h: Some(res.h),
        eta: Some(-1.0),
        nf: Some(res.nf),
        fmin: Some(res.fmin),
        gnorm: Some(res.gnorm),
        itns: Some(res.iterations),
        qmfs: Some(res.qmf_count),
        ..Row::default()
    };
    Ok((row, failure))
}

pub fn cmd_solve(args: &SolveArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let obj = lookup(&args.problem)?;
    let x0 = resolve_point(&obj, args.x.as_deref())?;
    let config = SolverConfig {
        basis: args.basis,
        budget: args.budget,
        h0: args.h0,
        h_min: args.h_min,
        ..SolverConfig::default()
    };
    config.validate()?;
    let (row, failure) = solver_row(&obj, &x0, &config)?;
    let text = render(&[row], args.out.format.unwrap_or(Format::Text))?;
    emit(&text, args.out.output.as_deref(), stdout)?;
    match failure {
        Some(msg) => Err(CliError::Evaluation(msg)),
        None => Ok(()),
    }
}

/// Expected values for one bench row. `None` cells are not checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub problem: String,
    pub basis: String,
    pub eps_g: Option<f64>,
    pub eps_d: Option<f64>,
    /// Upper bound on the solver's final value.
    pub fmin: Option<f64>,
}

fn reference(problem: &str, basis: &str, eps_g: Option<f64>, eps_d: Option<f64>, fmin: Option<f64>) -> Reference {
    Reference {
        problem: problem.into(),
        basis: basis.into(),
        eps_g,
        eps_d,
        fmin,
    }
}

pub fn builtin_references(suite: Suite) -> Vec<Reference> {
    let table = |vals: [(&str, f64, f64); 4]| {
        vals.iter()
            .map(|&(b, g, d)| reference("rosenbrock", b, Some(g), Some(d), None))
            .collect()
    };
    match suite {
        Suite::Table3 => table([
            ("cb", 4.39e-4, 1.99e-4),
            ("rb", 5.02e-4, 3.11e2),
            ("cmpb", 3.79e-4, 4.15e2),
            ("rmpb", 3.33e-4, 1.77e-4),
        ]),
        Suite::Table4 => table([
            ("cb", 3.54e-10, 1.91e-6),
            ("rb", 4.09e-10, 2.55e2),
            ("cmpb", 2.95e-10, 3.39e2),
            ("rmpb", 2.67e-10, 1.69e-6),
        ]),
        Suite::Mgh => ["cb", "cmpb", "rmpb"]
            .iter()
            .map(|b| reference("rosenbrock", b, None, None, Some(1e-8)))
            .collect(),
    }
}

pub fn read_references(path: &Path) -> Result<Vec<Reference>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Io(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ip), Some(ib)) = (col("problem"), col("basis")) else {
        return Err(CliError::Usage("reference file needs problem and basis columns".into()));
    };
    let (ig, id, iff) = (col("eps_g"), col("eps_d"), col("fmin"));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Io(e.to_string()))?;
        let cell = |i: Option<usize>| -> Result<Option<f64>, CliError> {
            match i.and_then(|i| rec.get(i)).map(str::trim) {
                None | Some("") => Ok(None),
                Some(s) => s
                    .parse()
                    .map(Some)
                    .map_err(|_| CliError::Usage(format!("bad number {s:?} in reference file"))),
            }
        };
        out.push(Reference {
            problem: rec.get(ip).unwrap_or_default().to_string(),
            basis: rec.get(ib).unwrap_or_default().to_string(),
            eps_g: cell(ig)?,
            eps_d: cell(id)?,
            fmin: cell(iff)?,
        });
    }
    Ok(out)
}

/// Relative tolerances on `eps_g` and `eps_d` for a suite.
pub fn suite_tolerances(suite: Suite) -> (f64, f64) {
    match suite {
        Suite::Table3 => (0.02, 0.02),
        Suite::Table4 => (0.10, 0.02),
        Suite::Mgh => (0.0, 0.0),
    }
}

/// Compares rows against references; returns one message per failed check.
pub fn check_rows(suite: Suite, rows: &[Row], refs: &[Reference]) -> Vec<String> {
    let (tol_g, tol_d) = suite_tolerances(suite);
    let mut failures = Vec::new();
    for r in refs {
        let Some(row) = rows.iter().find(|w| w.problem == r.problem && w.basis == r.basis) else {
            failures.push(format!("{} {}: no such row", r.problem, r.basis));
            continue;
        };
        let rel = |name: &str, got: Option<f64>, want: Option<f64>, tol: f64, out: &mut Vec<String>| {
            if let Some(want) = want {
                let ok = got.is_some_and(|g| ((g - want) / want).abs() <= tol);
                if !ok {
                    out.push(format!(
                        "{} {} {name}: got {} want {want:e} within {}%",
                        r.problem,
                        r.basis,
                        got.map_or("nothing".into(), |g| format!("{g:.4e}")),
                        tol * 100.0
                    ));
                }
            }
        };
        rel("eps_g", row.eps_g, r.eps_g, tol_g, &mut failures);
        rel("eps_d", row.eps_d, r.eps_d, tol_d, &mut failures);
        if let Some(bound) = r.fmin {
            if !row.fmin.is_some_and(|f| f <= bound) {
                failures.push(format!(
                    "{} {} fmin: got {:?} want <= {bound:e}",
                    r.problem, r.basis, row.fmin
                ));
            }
        }
    }
    failures
}

/// Rows for a suite, in a fixed order.
pub fn bench_rows(suite: Suite) -> Result<Vec<Row>, CliError> {
    let table = |x: [f64; 2], h: f64| -> Result<Vec<Row>, CliError> {
        let obj = lookup("rosenbrock")?;
        BasisKind::ALL
            .iter()
            .map(|&k| {
                let s = SamplingScheme::new(k, 2, h)?;
                Ok(estimate_row(&obj, &x, &s, DiagMethod::LeastSquares)?.row)
            })
            .collect()
    };
    match suite {
        Suite::Table3 => table([1.1, 1.1 * 1.1 + 1e-5], 1e-3),
        Suite::Table4 => table([0.9, 0.81], 1e-6),
        Suite::Mgh => {
            let problems = registry();
            let jobs: Vec<(usize, usize)> = (0..problems.len())
                .flat_map(|p| (0..BasisKind::ALL.len()).map(move |b| (p, b)))
                .collect();
            let mut rows: Vec<((usize, usize), Row)> = jobs
                .par_iter()
                .map(|&(p, b)| {
                    let obj = &problems[p];
                    let config = SolverConfig::with_basis(BasisKind::ALL[b]);
                    solver_row(obj, &obj.standard_start, &config).map(|(row, _)| ((p, b), row))
                })
                .collect::<Result<_, _>>()?;
            rows.sort_by_key(|(key, _)| *key);
            Ok(rows.into_iter().map(|(_, r)| r).collect())
        }
    }
}

pub fn cmd_bench(args: &BenchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let refs = match &args.reference {
        Some(p) => read_references(p)?,
        None => builtin_references(args.suite),
    };
    let rows = bench_rows(args.suite)?;
    let format = args.out.format.unwrap_or(Format::Csv);
    let text = render(&rows, format)?;
    let path = args.out.output.clone().or_else(|| {
        std::env::var_os(OUTPUT_DIR_ENV).map(|dir| {
            let ext = match format {
                Format::Csv => "csv",
                Format::Json => "json",
                Format::Text => "txt",
            };
            PathBuf::from(dir).join(format!("{}.{ext}", args.suite.name()))
        })
    });
    emit(&text, path.as_deref(), stdout)?;
    let failures = check_rows(args.suite, &rows, &refs);
    for f in &failures {
        let _ = writeln!(stderr, "FAIL {}: {f}", args.suite.name());
    }
    if failures.is_empty() {
        let _ = writeln!(stderr, "{}: {} checks passed", args.suite.name(), refs.len());
        Ok(())
    } else {
        Err(CliError::Tolerance(failures))
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Solve(a) => cmd_solve(a, stdout),
        Command::Bench(a) => cmd_bench(a, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                CliError::Usage(m) => {
                    let _ = writeln!(stderr, "error: {m}");
                }
                CliError::Io(m) => {
                    let _ = writeln!(stderr, "i/o error: {m}");
                }
                CliError::Evaluation(m) => {
                    let _ = writeln!(stderr, "evaluation error: {m}");
                }
                CliError::Tolerance(_) => {}
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("dfderiv").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn h_range_parsing() {
        let hs = parse_h_range("1e-5:1e-2:7").unwrap();
        assert_eq!(hs.len(), 7);
        assert!((hs[0] - 1e-2).abs() < 1e-15 && (hs[6] - 1e-5).abs() < 1e-18);
        assert!(hs.windows(2).all(|w| w[1] < w[0]));
        for bad in ["", "1e-2:1e-5:7", "1e-5:1e-2", "0:1:5", "1e-5:1e-2:2", "a:b:c"] {
            assert!(parse_h_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn point_parsing() {
        assert_eq!(parse_point("-1.2, 1").unwrap(), vec![-1.2, 1.0]);
        assert!(parse_point("1,,2").is_err());
        assert!(parse_point("nan,1").is_err());
    }

    #[test]
    fn csv_row_format() {
        let row = Row {
            problem: "rosenbrock".into(),
            basis: "cb".into(),
            model: "quadratic".into(),
            h: Some(1e-3),
            eta: Some(-1.0),
            nf: Some(5),
            eps_g: Some(4.4e-4),
            ..Row::default()
        };
        let csv = render(&[row], Format::Csv).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "rosenbrock,cb,quadratic,1.000000000e-3,-1.000000000e0,5,4.400000000e-4,,,,,"
        );
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_capture(&["estimate", "--basis", "cb", "--h", "0"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["estimate", "--basis", "xb", "--h", "1e-3"]).0, EXIT_USAGE);
        assert_eq!(
            run_capture(&["estimate", "--problem", "nope", "--h", "1e-3"]).0,
            EXIT_USAGE
        );
        assert_eq!(run_capture(&["estimate", "--x", "1,2,3", "--h", "1e-3"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["sweep", "--h-range", ""]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["solve", "--basis", "qb"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn estimate_reports_table_errors() {
        let (code, out, _) = run_capture(&[
            "estimate",
            "--problem",
            "rosenbrock",
            "--x",
            "1.1,1.21001",
            "--basis",
            "rmpb",
            "--h",
            "1e-3",
            "--format",
            "json",
        ]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        let eps_g = v[0]["eps_g"].as_f64().unwrap();
        assert!((eps_g / 3.33e-4 - 1.0).abs() < 0.02);
        assert_eq!(v[0]["nf"], 7);
    }

    #[test]
    fn table_suites_pass() {
        for suite in [Suite::Table3, Suite::Table4] {
            let rows = bench_rows(suite).unwrap();
            assert_eq!(rows.len(), 4);
            assert!(check_rows(suite, &rows, &builtin_references(suite)).is_empty());
        }
    }

    #[test]
    fn broken_reference_fails() {
        let rows = bench_rows(Suite::Table3).unwrap();
        let mut refs = builtin_references(Suite::Table3);
        refs[0].eps_g = Some(1.0);
        assert_eq!(check_rows(Suite::Table3, &rows, &refs).len(), 1);
        refs.push(reference("rosenbrock", "zz", Some(1.0), None, None));
        assert_eq!(check_rows(Suite::Table3, &rows, &refs).len(), 2);
    }
}
