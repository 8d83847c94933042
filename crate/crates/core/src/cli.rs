//! Command-line front end.
//!
//! ```text
//! goafem run --problem square-goal --max-elements 100000 --output sq.csv
//! goafem export-mesh --problem zshape --output z.mesh
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::bench::BenchmarkName;
use crate::driver::{run_benchmark, series, windowed, fit_slope, AdaptiveConfig, History, StoppingMode, Window, XField, YField};
use crate::marking::{MarkingConfig, MarkingStrategy};
use crate::mesh::write_mesh;
use crate::solver::SolverKind;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "goafem", version, about = "Goal-oriented adaptive FEM with inexact solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the adaptive algorithm on a benchmark and write its history.
    Run(RunConfig),
    /// Write the initial mesh of a benchmark.
    ExportMesh(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[arg(long)]
    pub problem: BenchmarkName,
    #[arg(long, default_value = "a")]
    pub strategy: MarkingStrategy,
    #[arg(long, default_value_t = 0.5)]
    pub vartheta: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub lambda_ctr: f64,
    #[arg(long, default_value = "ml-pcg")]
    pub solver: SolverKind,
    #[arg(long, default_value = "independent")]
    pub stopping: StoppingMode,
    #[arg(long)]
    pub max_elements: Option<usize>,
    #[arg(long)]
    pub max_work: Option<u64>,
    /// Record the quasi-error product (direct solves on every level).
    #[arg(long)]
    pub diagnostics: bool,
    #[arg(long, default_value_t = 200_000)]
    pub diag_max_dofs: usize,
    #[arg(long, default_value_t = 2)]
    pub quadrature_degree: u32,
    /// Also run with this solver and plot both histories together.
    #[arg(long)]
    pub compare: Option<SolverKind>,
    /// CSV path; the plot script goes next to it with extension `.gp`.
    #[arg(long, default_value = "history.csv")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub problem: BenchmarkName,
    /// Uniform refinements applied before writing.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    #[arg(long)]
    pub output: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: &str| Err(CliError::Usage(m.to_string()));
        if !(self.vartheta > 0.0 && self.vartheta <= 1.0) {
            return usage("--vartheta must lie in (0, 1]");
        }
        if !(self.lambda_ctr > 0.0 && self.lambda_ctr.is_finite()) {
            return usage("--lambda-ctr must be positive");
        }
        if self.max_elements == Some(0) || self.max_work == Some(0) {
            return usage("budgets must be positive");
        }
        if self.diag_max_dofs == 0 {
            return usage("--diag-max-dofs must be positive");
        }
        if !(1..=10).contains(&self.quadrature_degree) {
            return usage("--quadrature-degree must lie in 1..=10");
        }
        Ok(())
    }

    /// The driver configuration; without any budget the element budget
    /// defaults to 10⁵.
    pub fn adaptive_config(&self) -> AdaptiveConfig {
        let max_elements = match (self.max_elements, self.max_work) {
            (None, None) => Some(100_000),
            (e, _) => e,
        };
        AdaptiveConfig {
            marking: MarkingConfig {
                strategy: self.strategy,
                vartheta: self.vartheta,
            },
            lambda_ctr: self.lambda_ctr,
            solver: self.solver,
            stopping: self.stopping,
            max_elements,
            max_work: self.max_work,
            diagnostics: self.diagnostics,
            diag_max_dofs: self.diag_max_dofs,
            quadrature_degree: self.quadrature_degree,
            ..AdaptiveConfig::default()
        }
    }
}

pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

pub const CSV_HEADER: [&str; 17] = [
    "ell",
    "k",
    "m",
    "n",
    "num_elements",
    "work",
    "eta",
    "zeta",
    "du_energy",
    "dz_energy",
    "xi",
    "goal_raw",
    "corrector",
    "goal_discrete",
    "goal_error_abs",
    "lambda_diag",
    "wall_seconds",
];

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// Writes one row per step; floats with 17 significant digits.
pub fn write_csv<W: Write>(history: &History, out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &history.records {
        w.write_record([
            r.ell.to_string(),
            r.k.to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.num_elements.to_string(),
            r.work.to_string(),
            float(r.eta),
            float(r.zeta),
            float(r.du_energy),
            float(r.dz_energy),
            float(r.xi),
            float(r.goal_raw),
            float(r.corrector),
            float(r.goal_discrete),
            opt_float(r.goal_error),
            opt_float(r.lambda_diag),
            float(r.wall_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(history: &History, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    write_csv(history, BufWriter::new(file)).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// One history in a plot, read from `csv` (relative to the script).
pub struct PlotSeries<'a> {
    pub label: String,
    pub csv: String,
    pub history: &'a History,
}

fn x_range(all: &[PlotSeries<'_>], x: XField) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for s in all {
        for r in &s.history.records {
            let v = match x {
                XField::Work => r.work as f64,
                XField::Elements => r.num_elements as f64,
            };
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// Gnuplot script with log-log panels for `Ξ` over work and `η ζ` over
/// `#T`, each with a slope -1 reference line spanning the data.
pub fn write_plot_script<W: Write>(all: &[PlotSeries<'_>], mut out: W) -> std::io::Result<()> {
    let first = all.first().and_then(|s| s.history.records.first());
    let (Some(first), Some(s0)) = (first, all.first()) else {
        return Ok(());
    };
    let _ = s0;
    writeln!(out, "set datafile separator ','")?;
    writeln!(out, "set logscale xy")?;
    writeln!(out, "set key outside")?;
    writeln!(out, "set terminal pngcairo size 1400,500")?;
    writeln!(out, "set output 'history.png'")?;
    writeln!(out, "set multiplot layout 1,2")?;

    let (wlo, whi) = x_range(all, XField::Work);
    writeln!(out, "set xlabel 'work'; set ylabel 'Xi'")?;
    writeln!(out, "set xrange [{wlo}:{whi}]")?;
    let mut plots: Vec<String> = all
        .iter()
        .map(|s| format!("'{}' using 6:11 skip 1 with lines title 'Xi {}'", s.csv, s.label))
        .collect();
    let c = first.xi * first.work as f64;
    plots.push(format!("[{wlo}:{whi}] {c}/x dashtype 2 title 'O(work^-1)'"));
    writeln!(out, "plot {}", plots.join(", \\\n     "))?;

    let (elo, ehi) = x_range(all, XField::Elements);
    writeln!(out, "set xlabel 'number of elements'; set ylabel 'eta*zeta'")?;
    writeln!(out, "set xrange [{elo}:{ehi}]")?;
    let mut plots: Vec<String> = all
        .iter()
        .map(|s| format!("'{}' using 5:($7*$8) skip 1 with points title 'eta*zeta {}'", s.csv, s.label))
        .collect();
    let c = first.eta * first.zeta * first.num_elements as f64;
    plots.push(format!("[{elo}:{ehi}] {c}/x dashtype 2 title 'O(N^-1)'"));
    writeln!(out, "plot {}", plots.join(", \\\n     "))?;
    writeln!(out, "unset multiplot")?;
    Ok(())
}

/// Trailing-decade slopes of the standard series.
pub fn rate_report(history: &History) -> String {
    let mut lines = Vec::new();
    for (name, x, y) in [
        ("xi vs work", XField::Work, YField::Xi),
        ("eta*zeta vs elements", XField::Elements, YField::EtaZeta),
        ("goal error vs work", XField::Work, YField::GoalError),
    ] {
        let slope = series(history, x, y)
            .map_err(|e| e.to_string())
            .and_then(|pts| {
                let (xs, ys): (Vec<f64>, Vec<f64>) = windowed(&pts, Window::TrailingDecade).into_iter().unzip();
                fit_slope(&xs, &ys).map_err(|e| e.to_string())
            });
        match slope {
            Ok(s) => lines.push(format!("  {name:<22} {s:+.3}")),
            Err(e) => lines.push(format!("  {name:<22} n/a ({e})")),
        }
    }
    lines.join("\n")
}

fn run_command(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let bench = cfg.problem.build();
    let adaptive = cfg.adaptive_config();
    let runtime = |e: crate::driver::DriverError| CliError::Runtime(e.to_string());
    let main = run_benchmark(&bench, &adaptive).map_err(runtime)?;
    write_csv_file(&main, &cfg.output)?;

    let mut extra = None;
    if let Some(solver) = cfg.compare {
        let other = run_benchmark(
            &bench,
            &AdaptiveConfig {
                solver,
                ..adaptive.clone()
            },
        )
        .map_err(runtime)?;
        let path = cfg.output.with_extension(format!("{solver}.csv"));
        write_csv_file(&other, &path)?;
        extra = Some((solver, path, other));
    }

    let file_name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut plot = vec![PlotSeries {
        label: cfg.solver.to_string(),
        csv: file_name(&cfg.output),
        history: &main,
    }];
    if let Some((solver, path, h)) = &extra {
        plot.push(PlotSeries {
            label: solver.to_string(),
            csv: file_name(path),
            history: h,
        });
    }
    let script = cfg.output.with_extension("gp");
    let file = File::create(&script).map_err(|e| CliError::Runtime(format!("{}: {e}", script.display())))?;
    write_plot_script(&plot, BufWriter::new(file)).map_err(|e| CliError::Runtime(e.to_string()))?;

    let last = main.records.last().expect("runs record at least one step");
    println!(
        "{}: {} levels, {} steps, {} elements, work {}, termination {:?}",
        bench.name,
        main.levels.len(),
        main.records.len(),
        last.num_elements,
        last.work,
        main.termination
    );
    println!(
        "  G_l = {:.12e}  reference = {:.12e}  error = {:.3e}",
        last.goal_discrete,
        bench.reference,
        last.goal_error.unwrap_or(f64::NAN)
    );
    println!("rates ({}):\n{}", cfg.solver, rate_report(&main));
    if let Some((solver, _, h)) = &extra {
        println!("rates ({solver}):\n{}", rate_report(h));
    }
    println!("wrote {} and {}", cfg.output.display(), script.display());
    Ok(())
}

fn export_command(args: &ExportArgs) -> Result<(), CliError> {
    let mut mesh = args.problem.build().mesh;
    for _ in 0..args.refine {
        mesh = mesh.refine_uniform().map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let file = File::create(&args.output).map_err(|e| CliError::Runtime(format!("{}: {e}", args.output.display())))?;
    write_mesh(&mesh, BufWriter::new(file)).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(cfg) => run_command(cfg),
        Command::ExportMesh(args) => export_command(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
