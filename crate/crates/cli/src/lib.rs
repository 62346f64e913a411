//! Command-line front end: `run`, `rhs`, `analytic` and `bench-list`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use agrf_core::flow::{agrf_rhs, analytic_cov, analytic_mean, FlowMode, GaussianState};
use agrf_core::linalg::SymMatrix;
use agrf_core::objective::{fmt_f64, parse_objective, Benchmark, Objective};
use agrf_core::ode::{integrate, SolverConfig, Trajectory};
use agrf_core::trace::{write_trace, TraceFormat};
use agrf_core::AgrfError;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const MAX_STEPS_ENV: &str = "AGRF_MAX_STEPS";

#[derive(Debug, Parser)]
#[command(name = "agrf", version, about = "Approximately Gaussian replicator flow optimizer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the flow and write a trace
    Run(RunArgs),
    /// Print the flow's vector field at a state
    Rhs(RhsArgs),
    /// Print the closed-form solution for a quadratic objective
    Analytic(AnalyticArgs),
    /// List built-in benchmarks
    BenchList,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ObjectiveArgs {
    /// Benchmark name (see bench-list)
    #[arg(long)]
    pub objective: Option<String>,
    /// Objective JSON file
    #[arg(long)]
    pub objective_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    /// Comma-separated mean, e.g. 3,2
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vector)]
    pub mean: std::vec::Vec<f64>,
    /// Covariance s·I
    #[arg(long, allow_negative_numbers = true, conflicts_with = "cov_file", required_unless_present = "cov_file")]
    pub cov: Option<f64>,
    /// Covariance as a JSON array of rows
    #[arg(long)]
    pub cov_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    Diag,
}

impl From<ModeArg> for FlowMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => FlowMode::Full,
            ModeArg::Diag => FlowMode::Diagonal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for TraceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => TraceFormat::Jsonl,
            FormatArg::Csv => TraceFormat::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, default_value_t = 30.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub det_eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub atol: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
    /// Trace output path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct RhsArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub state: StateArgs,
    /// Time at which to evaluate m(t), C(t)
    #[arg(long, allow_negative_numbers = true)]
    pub t: f64,
}

fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad number {v:?}: {e}")))
        .collect()
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<AgrfError> for CliError {
    fn from(e: AgrfError) -> Self {
        match e {
            AgrfError::NotPositiveDefinite | AgrfError::SingularAtTime { .. } | AgrfError::NonFinite(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_objective(args: &ObjectiveArgs, n: usize) -> Result<Objective, CliError> {
    if let Some(name) = &args.objective {
        let b = Benchmark::from_name(name).ok_or_else(|| usage(format!("unknown benchmark {name:?}")))?;
        return Ok(b.build(n)?);
    }
    let path = args.objective_file.as_ref().expect("clap enforces one objective source");
    let obj = parse_objective(&read_file(path)?)?;
    if obj.dim() != n {
        return Err(usage(format!("objective has dimension {}, mean has {n}", obj.dim())));
    }
    Ok(obj)
}

fn load_state(args: &StateArgs) -> Result<GaussianState, CliError> {
    let n = args.mean.len();
    let cov = match (args.cov, &args.cov_file) {
        (Some(s), _) => SymMatrix::scaled_identity(n, s),
        (None, Some(path)) => {
            let rows: Vec<Vec<f64>> = serde_json::from_str(&read_file(path)?)
                .map_err(|e| usage(format!("bad covariance file {}: {e}", path.display())))?;
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(usage(format!("covariance must be {n}×{n}")));
            }
            SymMatrix::from_rows(&rows)?
        }
        (None, None) => unreachable!("clap requires --cov or --cov-file"),
    };
    Ok(GaussianState::new(args.mean.clone(), cov)?)
}

fn fmt_vec(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(","))
}

fn fmt_mat(m: &SymMatrix) -> String {
    format!("[{}]", (0..m.dim()).map(|i| fmt_vec(m.row(i))).collect::<Vec<_>>().join(","))
}

fn max_steps_from_env() -> Result<usize, CliError> {
    match std::env::var(MAX_STEPS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| usage(format!("{MAX_STEPS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(SolverConfig::default().max_steps),
    }
}

pub fn summary_line(tr: &Trajectory) -> String {
    let p = tr.last();
    format!(
        "termination={} t={} mean={} f_at_mean={} expected_f={} accepted={} rejected={}",
        tr.termination,
        fmt_f64(p.t),
        fmt_vec(&p.mean),
        fmt_f64(p.f_at_mean),
        fmt_f64(p.expected_f),
        tr.accepted_steps,
        tr.rejected_steps
    )
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let state = load_state(&args.state)?;
    let obj = load_objective(&args.objective, state.dim())?;
    let config = SolverConfig {
        t_max: args.t_max,
        det_eps: args.det_eps,
        rtol: args.rtol,
        atol: args.atol,
        max_steps: max_steps_from_env()?,
        record_every_step: true,
    };
    let tr = integrate(&obj, &state, &config, args.mode.into())?;
    if let Some(path) = &args.out {
        let file = File::create(path).map_err(|e| usage(format!("cannot create {}: {e}", path.display())))?;
        write_trace(&tr.points, args.format.into(), BufWriter::new(file))
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    }
    writeln!(out, "{}", summary_line(&tr)).map_err(|e| usage(e.to_string()))?;
    Ok(if tr.termination.is_normal() { 0 } else { 2 })
}

pub fn cmd_rhs(args: &RhsArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let state = load_state(&args.state)?;
    let obj = load_objective(&args.objective, state.dim())?;
    let d = agrf_rhs(&obj, &state, args.mode.into())?;
    writeln!(out, "d_mean: {}\nd_cov: {}", fmt_vec(&d.d_mean), fmt_mat(&d.d_cov)).map_err(|e| usage(e.to_string()))?;
    Ok(0)
}

pub fn cmd_analytic(args: &AnalyticArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let state = load_state(&args.state)?;
    let obj = load_objective(&args.objective, state.dim())?;
    let qf = obj.as_quadratic().ok_or_else(|| usage("objective is not quadratic"))?;
    let m = analytic_mean(&qf, state.mean(), state.cov(), args.t)?;
    let c = analytic_cov(&qf, state.cov(), args.t)?;
    writeln!(out, "mean: {}\ncov: {}", fmt_vec(&m), fmt_mat(&c)).map_err(|e| usage(e.to_string()))?;
    Ok(0)
}

pub fn cmd_bench_list(out: &mut dyn Write) -> Result<i32, CliError> {
    let mut text = format!("{:<16} {:<4} {:<28} {}\n", "name", "dim", "minimizer", "minimizer_source");
    for b in Benchmark::ALL {
        let (dim, shown) = match b.fixed_dim() {
            Some(d) => (d.to_string(), b.minimizer(d).0),
            None => ("any".to_string(), b.minimizer(1).0),
        };
        let coords: Vec<String> = shown.iter().map(|v| format!("{v:.6}")).collect();
        let point = if b.fixed_dim().is_none() {
            format!("({},…)", coords[0])
        } else {
            format!("({})", coords.join(","))
        };
        let source = if b.minimizer(1).1 { "exact" } else { "numerical" };
        text.push_str(&format!("{:<16} {:<4} {:<28} {}\n", b.name(), dim, point, source));
    }
    out.write_all(text.as_bytes()).map_err(|e| usage(e.to_string()))?;
    Ok(0)
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Rhs(a) => cmd_rhs(a, out),
        Command::Analytic(a) => cmd_analytic(a, out),
        Command::BenchList => cmd_bench_list(out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}
