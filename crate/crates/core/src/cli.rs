//! `precistab` command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 bad data or configuration, 4 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimators::{sample_cov, sample_mean, spectral_gap, SampleSet};
use crate::lab::report::{self, XAxis};
use crate::lab::{run_stability_experiment, ExperimentConfig};
use crate::linalg::{eigh, SymMatrix};
use crate::portfolio::{dual_bound_check, solve_markowitz, Duals, PortfolioProblem};
use crate::precision::{self, PrecisionProblem};
use crate::transport::{fm2_upper, fm_lower_dictionary, w1_assignment, AtomKind, EmpiricalMeasure, GroundMetric};
use crate::Inequality;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "precistab",
    version,
    about = "Sparse precision estimation, transport distances and stability experiments",
    after_help = "JSON output carries \"precistab_schema\": 1. Exit codes: 0 ok, 2 usage, 3 data error, 4 numerical failure."
)]
pub struct Cli {
    /// Seed for commands that draw random numbers (overrides the config seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (output directory for `experiment`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample mean, covariance, eigenvalues and spectral gap of a CSV data set.
    ///
    /// Output: {mean, covariance{n,rows}, eigenvalues, spectral_gap, ...}.
    Estimate(EstimateArgs),
    /// Solve the l1-penalized log-det program on the sample covariance.
    ///
    /// Output: {s_star, objective, kkt_residual, iterations, converged, edges, ...}.
    Precision(PrecisionArgs),
    /// Transport distance between two equal-size empirical measures.
    ///
    /// Output: {w1} for order 1, {lower, upper} for order 2.
    Wasserstein(WassersteinArgs),
    /// Minimum-variance long-only portfolio with a target return.
    ///
    /// Output: {w, value, duals, active_set, dual_bound}.
    Portfolio(PortfolioArgs),
    /// Run a stability sweep from a JSON config; writes report.json, report.csv and plot.svg.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV with one observation per row.
    pub input: PathBuf,
    /// Use the uncentered second moment instead of the centered covariance.
    #[arg(long, conflicts_with = "centered")]
    pub uncentered: bool,
    /// Centered covariance (default).
    #[arg(long)]
    pub centered: bool,
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a finite number > 0, got {s}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a finite number ≥ 0, got {s}"))
    }
}

#[derive(Debug, Args)]
pub struct PrecisionArgs {
    pub input: PathBuf,
    /// Penalty λ > 0.
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, value_parser = positive, default_value_t = precision::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = precision::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Also solve the smoothed problem with this ε and report the gap.
    #[arg(long, value_parser = positive)]
    pub eps: Option<f64>,
    /// Edge threshold; defaults to 1e-3 · max |S*ᵢⱼ|.
    #[arg(long, value_parser = non_negative)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub uncentered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Scalar,
    Vector,
    /// Each row holds a dense n×n matrix, row-major.
    Matrix,
}

#[derive(Debug, Args)]
pub struct WassersteinArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Vector)]
    pub kind: Kind,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub order: u8,
}

#[derive(Debug, Args)]
pub struct PortfolioArgs {
    /// Expected returns, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub mu: Vec<f64>,
    /// CSV holding the covariance matrix.
    #[arg(long)]
    pub sigma: PathBuf,
    /// Target return.
    #[arg(long, allow_hyphen_values = true)]
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    D1,
    Dbar2,
    W2,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub config: PathBuf,
    /// Distance on the x axis of plot.svg.
    #[arg(long, value_enum, default_value_t = Axis::D1)]
    pub x_axis: Axis,
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Self::numerical(e.to_string())
        } else {
            Self::data(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Reads a headerless numeric CSV; `#` lines are comments, rows must have equal width.
pub fn read_matrix_csv(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let at = e
                .position()
                .map(|p| format!(" line {}", p.line()))
                .unwrap_or_default();
            CliError::data(format!("{}:{at}: {e}", path.display()))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::data(format!(
                        "{}: parse error at line {line}, column {}: {cell:?} is not a finite number",
                        path.display(),
                        col + 1
                    ))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{}: empty input", path.display())));
    }
    Ok(rows)
}

fn read_samples(path: &Path) -> CliResult<SampleSet> {
    Ok(SampleSet::from_rows(&read_matrix_csv(path)?)?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub samples: usize,
    pub centered: bool,
    pub mean: Vec<f64>,
    pub covariance: SymMatrix,
    pub eigenvalues: Vec<f64>,
    pub spectral_gap: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SmoothedOutput {
    eps: f64,
    s_star: SymMatrix,
    objective: f64,
    iterations: usize,
    converged: bool,
    gap_fro: f64,
}

#[derive(Debug, Serialize)]
struct PrecisionOutput {
    lambda: f64,
    s_star: SymMatrix,
    objective: f64,
    kkt_residual: f64,
    iterations: usize,
    converged: bool,
    tau: f64,
    edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    smoothed: Option<SmoothedOutput>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum WassersteinOutput {
    Order1 { kind: &'static str, atoms: usize, w1: f64 },
    Order2 { kind: &'static str, atoms: usize, lower: f64, upper: f64 },
}

#[derive(Debug, Serialize)]
struct DualBound {
    lhs: f64,
    rhs: f64,
    holds: bool,
}

#[derive(Debug, Serialize)]
struct PortfolioOutput {
    z: f64,
    w: Vec<f64>,
    value: f64,
    duals: Duals,
    active_set: Vec<usize>,
    /// Absent when the bound is undefined (μ parallel to the ones vector or Σ = 0).
    dual_bound: Option<DualBound>,
}

#[derive(Debug, Serialize)]
struct ExperimentSummary {
    statistic: String,
    rows: usize,
    all_pass: bool,
    files: Vec<String>,
    wall_time_s: f64,
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::data(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())
                .and_then(|_| so.flush())
                .map_err(|e| CliError::data(format!("stdout: {e}")))
        }
    }
}

fn json_line<T: Serialize>(v: &T) -> String {
    let mut s = report::to_json(v);
    s.push('\n');
    s
}

fn matrix_csv(rows: &[Vec<f64>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",") + "\n")
        .collect()
}

fn cmd_estimate(cli: &Cli, a: &EstimateArgs) -> CliResult<String> {
    let s = read_samples(&a.input)?;
    let centered = !a.uncentered;
    let cov = sample_cov(&s, centered);
    let eig = eigh(&cov)?.values;
    let out = EstimateOutput {
        samples: s.len(),
        centered,
        mean: sample_mean(&s),
        spectral_gap: spectral_gap(&eig).ok(),
        eigenvalues: eig,
        covariance: cov,
    };
    Ok(match cli.format {
        Format::Json => json_line(&out),
        Format::Csv => matrix_csv(&out.covariance.to_rows()),
    })
}

fn cmd_precision(cli: &Cli, a: &PrecisionArgs) -> CliResult<String> {
    let s = read_samples(&a.input)?;
    let p = PrecisionProblem::new(a.lambda, sample_cov(&s, !a.uncentered))?;
    let r = precision::solve(&p, a.tol, a.max_iter)?;
    if !r.converged {
        return Err(CliError::numerical(format!(
            "solver did not converge in {} iterations (KKT residual {:e})",
            r.iterations, r.kkt_residual
        )));
    }
    let max_off = {
        let mut m = 0.0f64;
        r.s_star.for_each_entry(|_, _, v| m = m.max(v.abs()));
        m
    };
    let tau = a.tau.unwrap_or(1e-3 * max_off);
    let smoothed = match a.eps {
        None => None,
        Some(eps) => {
            let sm = precision::solve_smoothed(&p, eps, a.tol, precision::SMOOTHED_MAX_ITER)?;
            Some(SmoothedOutput {
                eps,
                gap_fro: (&sm.s_star - &r.s_star).norm_fro(),
                s_star: sm.s_star,
                objective: sm.objective,
                iterations: sm.iterations,
                converged: sm.converged,
            })
        }
    };
    let out = PrecisionOutput {
        lambda: a.lambda,
        edges: precision::edge_set(&r.s_star, tau),
        tau,
        objective: r.objective,
        kkt_residual: r.kkt_residual,
        iterations: r.iterations,
        converged: r.converged,
        s_star: r.s_star,
        smoothed,
    };
    Ok(match cli.format {
        Format::Json => json_line(&out),
        Format::Csv => matrix_csv(&out.s_star.to_rows()),
    })
}

fn measure(path: &Path, kind: Kind) -> CliResult<EmpiricalMeasure> {
    let rows = read_matrix_csv(path)?;
    let w = rows[0].len();
    let bad = |msg: String| CliError::data(format!("{}: {msg}", path.display()));
    let m = match kind {
        Kind::Scalar if w != 1 => return Err(bad(format!("scalar atoms need 1 column, got {w}"))),
        Kind::Scalar => EmpiricalMeasure::from_scalars(&rows.iter().map(|r| r[0]).collect::<Vec<_>>())?,
        Kind::Vector => EmpiricalMeasure::from_vectors(&rows)?,
        Kind::Matrix => {
            let n = (w as f64).sqrt().round() as usize;
            if n * n != w {
                return Err(bad(format!("matrix atoms need n² columns, got {w}")));
            }
            let ms = rows
                .iter()
                .map(|r| SymMatrix::from_dense(n, r))
                .collect::<Result<Vec<_>, _>>()?;
            EmpiricalMeasure::from_matrices(&ms)?
        }
    };
    Ok(m)
}

fn cmd_wasserstein(cli: &Cli, a: &WassersteinArgs) -> CliResult<String> {
    let (ma, mb) = (measure(&a.a, a.kind)?, measure(&a.b, a.kind)?);
    let kind = match a.kind {
        Kind::Scalar => "scalar",
        Kind::Vector => "vector",
        Kind::Matrix => "matrix",
    };
    if ma.kind() != mb.kind() {
        let (ka, kb) = (ma.kind().width(), mb.kind().width());
        return Err(CliError::data(format!("atoms have {ka} and {kb} coordinates")));
    }
    let metric = match ma.kind() {
        AtomKind::Matrix(_) => GroundMetric::Frobenius,
        _ => GroundMetric::Euclidean,
    };
    let out = if a.order == 1 {
        WassersteinOutput::Order1 {
            kind,
            atoms: ma.len(),
            w1: w1_assignment(&ma, &mb, metric)?,
        }
    } else {
        WassersteinOutput::Order2 {
            kind,
            atoms: ma.len(),
            upper: fm2_upper(&ma, &mb)?,
            lower: fm_lower_dictionary(&ma, &mb, 2)?,
        }
    };
    Ok(match cli.format {
        Format::Json => json_line(&out),
        Format::Csv => match out {
            WassersteinOutput::Order1 { w1, .. } => format!("w1\n{w1}\n"),
            WassersteinOutput::Order2 { lower, upper, .. } => format!("lower,upper\n{lower},{upper}\n"),
        },
    })
}

fn cmd_portfolio(cli: &Cli, a: &PortfolioArgs) -> CliResult<String> {
    let sigma = SymMatrix::from_rows(&read_matrix_csv(&a.sigma)?)?;
    let p = PortfolioProblem::new(a.mu.clone(), sigma, a.z)?;
    let sol = solve_markowitz(&p)?;
    let dual_bound = match dual_bound_check(&p) {
        Ok(Inequality { lhs, rhs }) => Some(DualBound {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + 1e-9) + 1e-12,
        }),
        Err(Error::DegenerateMu | Error::ZeroSigma) => None,
        Err(e) => return Err(e.into()),
    };
    let out = PortfolioOutput {
        z: a.z,
        w: sol.w,
        value: sol.value,
        duals: sol.duals,
        active_set: sol.active_set,
        dual_bound,
    };
    Ok(match cli.format {
        Format::Json => json_line(&out),
        Format::Csv => {
            let w: Vec<String> = out.w.iter().map(|v| format!("{v}")).collect();
            format!("value,{}\n{},{}\n", (1..=w.len()).map(|i| format!("w{i}")).collect::<Vec<_>>().join(","), out.value, w.join(","))
        }
    })
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => s += &format!("/{index}"),
            Segment::Map { key } => s += &format!("/{}", key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => s += &format!("/{variant}"),
            Segment::Unknown => {}
        }
    }
    if s.is_empty() {
        "/".into()
    } else {
        s
    }
}

#[allow(dead_code)]
mod mirror {
    //! Variant bodies of the tagged config enums, used only to locate errors inside them.

    use serde::Deserialize;

    use crate::linalg::SymMatrix;

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Continuous {
        pub mu: Vec<f64>,
        pub sigma: SymMatrix,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Discrete {
        pub atoms: Vec<Vec<f64>>,
        pub probs: Vec<f64>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Centered {
        pub centered: Option<bool>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Empty {}

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Precision {
        pub lambda: f64,
        pub centered: Option<bool>,
        pub kappa: Option<f64>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Portfolio {
        pub z: f64,
        pub c1: f64,
        pub c2: f64,
    }
}

fn locate<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Option<(String, String)> {
    serde_path_to_error::deserialize::<_, T>(v)
        .err()
        .map(|e| (json_pointer(e.path()), e.inner().to_string()))
}

/// Finds the field inside a tagged object at `pointer` that failed to parse.
fn refine(root: &serde_json::Value, pointer: &str) -> Option<(String, String)> {
    let mut obj = root.pointer(pointer)?.as_object()?.clone();
    let (tag_key, tag) = ["family", "kind"]
        .iter()
        .find_map(|k| obj.get(*k).and_then(|t| t.as_str()).map(|t| (*k, t.to_string())))?;
    obj.remove(tag_key);
    let body = serde_json::Value::Object(obj);
    let (inner, msg) = match (tag_key, tag.as_str()) {
        ("family", "gaussian" | "lognormal") => locate::<mirror::Continuous>(body),
        ("family", "discrete") => locate::<mirror::Discrete>(body),
        ("kind", "eigenvalues" | "covariance") => locate::<mirror::Centered>(body),
        ("kind", "mean_cov") => locate::<mirror::Empty>(body),
        ("kind", "precision") => locate::<mirror::Precision>(body),
        ("kind", "portfolio") => locate::<mirror::Portfolio>(body),
        _ => None,
    }?;
    let inner = if inner == "/" { String::new() } else { inner };
    Some((format!("{pointer}{inner}"), msg))
}

/// Parses and validates an experiment config; errors name the offending key as a JSON pointer.
pub fn load_config(text: &str) -> crate::Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        let message = e.inner().to_string();
        let refined = serde_json::from_str::<serde_json::Value>(text)
            .ok()
            .and_then(|root| refine(&root, &pointer));
        let (pointer, message) = refined.unwrap_or((pointer, message));
        Error::ConfigInvalid { pointer, message }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_experiment(cli: &Cli, a: &ExperimentArgs) -> CliResult<String> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| CliError::data(format!("{}: {e}", a.config.display())))?;
    let mut cfg = load_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let rep = run_stability_experiment(&cfg)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let axis = match a.x_axis {
        Axis::D1 => XAxis::D1Proxy,
        Axis::Dbar2 => XAxis::Dbar2,
        Axis::W2 => XAxis::W2Gaussian,
    };
    let csv = report::to_csv(&rep)?;
    let files = [
        ("report.json", json_line(&rep)),
        ("report.csv", csv.clone()),
        ("plot.svg", report::to_svg(&rep, axis)),
    ];
    let mut written = Vec::new();
    for (name, body) in &files {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
        written.push(p.display().to_string());
    }
    Ok(match cli.format {
        Format::Json => json_line(&ExperimentSummary {
            statistic: rep.statistic.clone(),
            rows: rep.rows.len(),
            all_pass: rep.all_pass,
            files: written,
            wall_time_s: rep.wall_time_s,
        }),
        Format::Csv => csv,
    })
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let text = match &cli.command {
        Command::Estimate(a) => cmd_estimate(cli, a)?,
        Command::Precision(a) => cmd_precision(cli, a)?,
        Command::Wasserstein(a) => cmd_wasserstein(cli, a)?,
        Command::Portfolio(a) => cmd_portfolio(cli, a)?,
        Command::Experiment(a) => return emit(None, &cmd_experiment(cli, a)?),
    };
    emit(cli.out.as_deref(), &text)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
