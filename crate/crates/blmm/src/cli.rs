//! Command-line commands: `fit`, `blocks`, `bench` and `synth`.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use blmm_core::fit::{conditional_modes, fit_with_progress};
use blmm_core::{parse_formula, Criterion, DataTable, FitOptions, LinearMixedModel, Optimizer};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::{load_csv, LoadError};
use crate::report::{render, FitReport};
use crate::synth::{save_csv, CrossedDesign};

#[derive(Debug, Parser)]
#[command(name = "blmm", version, about = "Fit linear mixed-effects models by profiled maximum likelihood")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and print its report.
    Fit(FitArgs),
    /// Show the block structure of A and L with storage counts.
    Blocks(ModelArgs),
    /// Time objective evaluations and a full fit.
    Bench(BenchArgs),
    /// Write a simulated data set with two crossed grouping factors.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model formula, e.g. "y ~ 1 + x + (1|g)".
    #[arg(long)]
    pub formula: String,
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Keep random-effects terms in formula order instead of sorting them.
    #[arg(long)]
    pub no_sort: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    TrustRegion,
    NelderMead,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Optimize the REML criterion.
    #[arg(long)]
    pub reml: bool,
    #[arg(long, default_value_t = 2000)]
    pub maxevals: usize,
    /// Absolute tolerance on the objective.
    #[arg(long, default_value_t = 1e-8)]
    pub ftol: f64,
    /// Write the report as JSON to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Include conditional modes of the random effects.
    #[arg(long)]
    pub modes: bool,
    /// Starting θ, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seed_theta: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Method::TrustRegion)]
    pub optimizer: Method,
    /// Log every evaluation to standard error.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of timed evaluations.
    #[arg(long, default_value_t = 50)]
    pub evals: usize,
    /// Time evaluations at the starting θ and skip the fit.
    #[arg(long)]
    pub no_fit: bool,
    /// Print CSV instead of text.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    /// Levels of the first factor, `a`.
    #[arg(long)]
    pub levels_a: usize,
    /// Levels of the second factor, `b`.
    #[arg(long)]
    pub levels_b: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Model(#[from] blmm_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NotConverged => 2,
        }
    }
}

fn load_model(args: &ModelArgs) -> Result<(LinearMixedModel, DataTable), CliError> {
    let formula = parse_formula(&args.formula)?;
    let table = load_csv(&args.data)?;
    let model = LinearMixedModel::with_order(&formula, &table, !args.no_sort)?;
    Ok((model, table))
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    if args.maxevals == 0 {
        return Err(CliError::Usage("--maxevals must be at least 1".into()));
    }
    let (mut model, _) = load_model(&args.model)?;
    let opts = FitOptions {
        criterion: if args.reml { Criterion::Reml } else { Criterion::Ml },
        optimizer: match args.optimizer {
            Method::TrustRegion => Optimizer::TrustRegion,
            Method::NelderMead => Optimizer::NelderMead,
        },
        max_evals: args.maxevals,
        ftol_abs: args.ftol,
        initial_theta: args.seed_theta.clone(),
        ..FitOptions::default()
    };
    let verbose = args.verbose;
    let res = fit_with_progress(&mut model, &opts, |k, theta, obj| {
        if verbose {
            eprintln!("eval {k:5}  objective {obj:.6}  theta {theta:?}");
        }
    })?;
    let mut report = FitReport::new(&model, &res);
    if args.modes {
        report = report.with_modes(&model, &conditional_modes(&model)?);
    }
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json() + "\n")?;
    }
    out.write_all(render(&report).as_bytes())?;
    if res.perfect_fit {
        eprintln!("warning: perfect fit, the residual variance is zero");
    }
    Ok(if res.converged { Status::Ok } else { Status::NotConverged })
}

/// Block table and storage counts of a model.
pub fn blocks_text(model: &LinearMixedModel) -> String {
    let mut s = String::new();
    s.push_str(&model.block_description());
    s.push('\n');
    s.push_str(&format!("nnz(A): {}\nnnz(L): {}\n\n", model.nnz_a(), model.nnz_l()));
    let names = model.gram().names();
    let mut rows = vec![vec!["block".to_string(), "A bytes".into(), "L bytes".into()]];
    for (i, j, a, l) in model.block_bytes() {
        rows.push(vec![format!("[{}, {}]", names[i], names[j]), a.to_string(), l.to_string()]);
    }
    let w0 = rows.iter().map(|r| r[0].chars().count()).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r[1].len()).max().unwrap_or(0);
    let w2 = rows.iter().map(|r| r[2].len()).max().unwrap_or(0);
    for r in &rows {
        s.push_str(&format!("{:<w0$}  {:>w1$}  {:>w2$}\n", r[0], r[1], r[2]));
    }
    s.push_str(&format!("total bytes: {}\n", model.footprint_bytes()));
    s
}

pub fn cmd_blocks(args: &ModelArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let (model, _) = load_model(args)?;
    out.write_all(blocks_text(&model).as_bytes())?;
    Ok(Status::Ok)
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    if args.evals == 0 {
        return Err(CliError::Usage("--evals must be at least 1".into()));
    }
    let (mut model, _) = load_model(&args.model)?;
    let (theta, fit_time, fit_evals) = if args.no_fit {
        (model.initial_theta(), None, 0)
    } else {
        let start = Instant::now();
        let res = blmm_core::fit(&mut model, &FitOptions::default())?;
        (res.theta, Some(start.elapsed()), res.n_evals)
    };
    let mut times = Vec::with_capacity(args.evals);
    for _ in 0..args.evals {
        let start = Instant::now();
        model.evaluate(&theta, Criterion::Ml)?;
        times.push(start.elapsed());
    }
    times.sort();
    let median = times[times.len() / 2];
    let min = times[0];
    let fit_ms = fit_time.map(millis);
    if args.csv {
        writeln!(out, "nnz_l,evals,median_ms,min_ms,fit_ms,fit_evals")?;
        writeln!(
            out,
            "{},{},{:.6},{:.6},{},{}",
            model.nnz_l(),
            args.evals,
            millis(median),
            millis(min),
            fit_ms.map_or(String::new(), |v| format!("{v:.3}")),
            fit_evals
        )?;
    } else {
        writeln!(out, "nnz(L): {}", model.nnz_l())?;
        writeln!(out, "evaluations timed: {}", args.evals)?;
        writeln!(out, "per evaluation: median {:.4} ms, min {:.4} ms", millis(median), millis(min))?;
        if let Some(ms) = fit_ms {
            writeln!(out, "fit: {ms:.1} ms over {fit_evals} evaluations")?;
        }
    }
    Ok(Status::Ok)
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    if args.n < args.levels_a.max(args.levels_b) || args.levels_a == 0 || args.levels_b == 0 {
        return Err(CliError::Usage("--n must be at least the larger level count, which must be positive".into()));
    }
    let table = CrossedDesign::new(args.n, args.levels_a, args.levels_b, args.seed).generate();
    save_csv(&table, &args.out)?;
    writeln!(out, "wrote {} rows to {}; fit with \"{}\"", args.n, args.out.display(), CrossedDesign::FORMULA)?;
    Ok(Status::Ok)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<Status, CliError> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Blocks(a) => cmd_blocks(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Synth(a) => cmd_synth(a, out),
    }
}

/// Parses `args` and runs the command, writing diagnostics to `err`.
/// Returns the process exit code: 0 on success, 2 when the optimizer did
/// not converge, 1 on any error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = write!(err, "{e}");
            return 1;
        }
    };
    match execute(&cli, out) {
        Ok(s) => s.code(),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
