//! Command-line front end: `build`, `check`, `sweep` and `simulate`.
//!
//! Machine-readable output (CSV) goes to stdout or `--out`; the effective
//! configuration and all diagnostics go to stderr. Exit status is 0 on
//! success, 1 when an analysis fails and 2 for bad input.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::csl::{check_property_series, parse_property, parse_property_file, CslProperty};
use crate::ctmc::{ProbabilityBound, DEFAULT_TOLERANCE};
use crate::model::{parse_model, SckModel};
use crate::ssa::{self, EventSchedule};
use crate::stategraph::{
    build_approximate_graph, build_bounded_reference, depth_indicator_sums, export, BuildOptions,
    SpeciesBounds, StateGraph, TerminationThreshold,
};

#[derive(Debug, Parser)]
#[command(name = "sckmc", version, about = "Bounded model checking of stochastic chemical kinetics models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a state graph and export it.
    Build(BuildArgs),
    /// Check a time-bounded property; prints `time,lower,upper,epsilon`.
    Check(CheckArgs),
    /// Check one property for several thresholds.
    Sweep(SweepArgs),
    /// Run stochastic simulations.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Termination-indicator approximation.
    Approximate,
    /// Bounded enumeration (needs `--bounds`).
    Reference,
    /// Monte-Carlo estimate by simulation.
    Ssa,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Initial count overrides, `species=count,...`.
    #[arg(long, value_delimiter = ',')]
    pub init: Vec<String>,
    /// Track reporter species even when nothing observes them.
    #[arg(long)]
    pub keep_reporters: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    #[arg(long, value_enum, default_value = "approximate")]
    pub mode: Mode,
    /// Termination threshold for approximate mode.
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    /// Population bounds for reference mode, `species=max,...`.
    #[arg(long, value_delimiter = ',')]
    pub bounds: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 10_000_000)]
    pub state_cap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Property whose species count as observed (string or `.csl` file).
    #[arg(long)]
    pub property: Option<String>,
    /// Output directory for `transitions.txt`, `states.csv`, `pi_trace.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PropertyArgs {
    /// Property string, or a `.csl` file with one property per line.
    #[arg(long)]
    pub property: String,
    /// Which property of a `.csl` file to use (1-based).
    #[arg(long, default_value_t = 1)]
    pub which: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TimeArgs {
    /// Time points (comma separated); default is the property's bound.
    #[arg(long, value_delimiter = ',', conflicts_with = "times")]
    pub time: Vec<f64>,
    /// Time range `start:end:step`.
    #[arg(long)]
    pub times: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub property: PropertyArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub runs: usize,
    /// Output CSV file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub property: PropertyArgs,
    /// Thresholds, comma separated.
    #[arg(long = "delta", value_delimiter = ',', required = true)]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 10_000_000)]
    pub state_cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Simulated time span in seconds.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Sampling interval in seconds.
    #[arg(long, default_value_t = 100.0)]
    pub interval: f64,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Perturbations `time:species=count,...`.
    #[arg(long, default_value = "")]
    pub events: String,
    /// Estimate this property instead of writing trajectories.
    #[arg(long)]
    pub property: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub which: usize,
    /// Output CSV file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Analysis(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn analysis(e: impl std::fmt::Display) -> CliError {
    CliError::Analysis(e.to_string())
}

fn parse_pairs(items: &[String], what: &str) -> Result<Vec<(String, u32)>, CliError> {
    items
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| input(format!("bad {what} `{item}`; expected species=count")))?;
            let value = value
                .trim()
                .parse::<u32>()
                .map_err(|_| input(format!("bad {what} `{item}`; expected species=count")))?;
            Ok((name.trim().to_string(), value))
        })
        .collect()
}

fn load_model(args: &ModelArgs) -> Result<SckModel, CliError> {
    let text = fs::read_to_string(&args.model)
        .map_err(|e| input(format!("{}: {e}", args.model.display())))?;
    let model = parse_model(&text).map_err(|e| input(format!("{}: {e}", args.model.display())))?;
    let init = parse_pairs(&args.init, "initial count")?;
    let refs: Vec<(&str, u32)> = init.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    model.with_initial(&refs).map_err(input)
}

/// Lumps unobserved reporters unless asked not to, noting what was dropped.
fn reduce(model: SckModel, args: &ModelArgs, observed: &[String]) -> Result<SckModel, CliError> {
    if args.keep_reporters {
        return Ok(model);
    }
    let refs: Vec<&str> = observed.iter().map(String::as_str).collect();
    let reduced = model.lump_reporters(&refs).map_err(input)?;
    if reduced.species_count() < model.species_count() {
        let kept = reduced.species_names();
        let dropped: Vec<String> = model
            .species_names()
            .into_iter()
            .filter(|s| !kept.contains(s))
            .collect();
        eprintln!("# lumped unobserved reporter species: {}", dropped.join(", "));
    }
    Ok(reduced)
}

fn load_property(arg: &str, which: usize) -> Result<CslProperty, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| input(format!("{arg}: {e}")))?;
        let props = parse_property_file(&text)
            .map_err(|(line, e)| input(format!("{arg}:{line}: {e}")))?;
        if which == 0 || which > props.len() {
            return Err(input(format!(
                "{arg} holds {} properties; --which {which} is out of range",
                props.len()
            )));
        }
        Ok(props[which - 1].clone())
    } else {
        parse_property(arg).map_err(|e| input(format!("property: {e}")))
    }
}

fn threshold(delta: f64) -> Result<TerminationThreshold, CliError> {
    TerminationThreshold::new(delta).map_err(input)
}

fn build_graph(
    model: &SckModel,
    args: &GraphArgs,
    dropped_ok: &SckModel,
) -> Result<StateGraph, CliError> {
    match args.mode {
        Mode::Approximate => {
            let options = BuildOptions {
                max_iterations: args.max_iterations,
                state_cap: args.state_cap,
                ..BuildOptions::default()
            };
            let g = build_approximate_graph(model, threshold(args.delta)?, &options)
                .map_err(analysis)?;
            if !g.report().converged {
                eprintln!(
                    "# warning: iteration limit {} reached before the state count settled",
                    args.max_iterations
                );
            }
            Ok(g)
        }
        Mode::Reference => {
            let pairs = parse_pairs(&args.bounds, "bound")?;
            if pairs.is_empty() {
                return Err(input("reference mode needs --bounds"));
            }
            let mut kept = Vec::new();
            for (name, v) in &pairs {
                if model.species_index(name).is_some() {
                    kept.push((name.as_str(), *v));
                } else if dropped_ok.species_index(name).is_some() {
                    eprintln!("# bound on lumped species {name} ignored");
                } else {
                    return Err(input(format!("unknown species `{name}` in --bounds")));
                }
            }
            let bounds = SpeciesBounds::new(model, &kept).map_err(input)?;
            build_bounded_reference(model, &bounds, args.state_cap).map_err(analysis)
        }
        Mode::Ssa => Err(input("ssa mode does not build a graph")),
    }
}

fn parse_times(args: &TimeArgs, default: f64) -> Result<Vec<f64>, CliError> {
    if let Some(spec) = &args.times {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| input(format!("bad --times `{spec}`; expected start:end:step")))?;
        let [start, end, step] = parts[..] else {
            return Err(input(format!("bad --times `{spec}`; expected start:end:step")));
        };
        if !(step > 0.0) || !(end >= start) || !(start >= 0.0) {
            return Err(input(format!("bad --times `{spec}`")));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    if args.time.is_empty() {
        return Ok(vec![default]);
    }
    if args.time.windows(2).any(|w| w[1] < w[0]) {
        return Err(input("--time values must be non-decreasing"));
    }
    Ok(args.time.clone())
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(e: io::Error) -> CliError {
    analysis(format!("write failed: {e}"))
}

fn header(command: &str, fields: &[(&str, String)]) {
    let mut line = format!("# sckmc {command}");
    for (k, v) in fields {
        let _ = write!(line, " --{k} {v}");
    }
    eprintln!("{line}");
}

fn model_fields(args: &ModelArgs) -> Vec<(&'static str, String)> {
    let mut f = vec![("model", args.model.display().to_string())];
    if !args.init.is_empty() {
        f.push(("init", args.init.join(",")));
    }
    if args.keep_reporters {
        f.push(("keep-reporters", String::new()));
    }
    f
}

fn graph_fields(args: &GraphArgs) -> Vec<(&'static str, String)> {
    let mut f = vec![(
        "mode",
        format!("{:?}", args.mode).to_lowercase(),
    )];
    match args.mode {
        Mode::Approximate => f.push(("delta", format!("{:e}", args.delta))),
        Mode::Reference => f.push(("bounds", args.bounds.join(","))),
        Mode::Ssa => {}
    }
    f
}

fn cmd_build(args: &BuildArgs) -> Result<(), CliError> {
    let full = load_model(&args.model)?;
    let observed = match &args.property {
        Some(p) => load_property(p, 1)?.species(),
        None => Vec::new(),
    };
    let model = reduce(full.clone(), &args.model, &observed)?;
    let mut fields = model_fields(&args.model);
    fields.extend(graph_fields(&args.graph));
    if let Some(p) = &args.property {
        fields.push(("property", format!("'{p}'")));
    }
    header("build", &fields);
    let start = Instant::now();
    let graph = build_graph(&model, &args.graph, &full)?;
    let seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
        let file = |name: &str| {
            fs::File::create(dir.join(name))
                .map(io::BufWriter::new)
                .map_err(|e| input(format!("{}: {e}", dir.join(name).display())))
        };
        export::write_transitions(&graph, file("transitions.txt")?).map_err(io_err)?;
        export::write_states_csv(&graph, &model.species_names(), file("states.csv")?)
            .map_err(io_err)?;
        if let Ok(trace) = depth_indicator_sums(&graph) {
            let mut w = file("pi_trace.csv")?;
            writeln!(w, "iteration,depth,pi_sum").map_err(io_err)?;
            for s in trace {
                writeln!(w, "{},{},{:e}", s.iteration, s.depth, s.sum).map_err(io_err)?;
            }
        }
    }
    let report = graph.report();
    let mut out = open_out(&None)?;
    writeln!(out, "states,transitions,iterations,converged,build_seconds").map_err(io_err)?;
    writeln!(
        out,
        "{},{},{},{},{:.3}",
        graph.state_count(),
        graph.transitions().len(),
        report.iterations,
        report.converged,
        seconds
    )
    .map_err(io_err)?;
    Ok(())
}

fn write_bounds(
    out: &mut dyn Write,
    times: &[f64],
    bounds: &[ProbabilityBound],
) -> Result<(), CliError> {
    writeln!(out, "time,lower,upper,epsilon").map_err(io_err)?;
    for (t, b) in times.iter().zip(bounds) {
        writeln!(out, "{t},{:.12e},{:.12e},{:.6e}", b.lower, b.upper, b.epsilon())
            .map_err(io_err)?;
    }
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<(), CliError> {
    let full = load_model(&args.model)?;
    let property = load_property(&args.property.property, args.property.which)?;
    let model = reduce(full.clone(), &args.model, &property.species())?;
    let bound = property
        .bound()
        .ok_or_else(|| analysis("the steady-state operator is not supported for checking"))?;
    let times = parse_times(&args.time, bound.upper)?;
    let mut fields = model_fields(&args.model);
    fields.push(("property", format!("'{property}'")));
    fields.extend(graph_fields(&args.graph));
    fields.push(("tolerance", format!("{:e}", args.time.tolerance)));
    fields.push((
        "time",
        times.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
    ));
    if args.graph.mode == Mode::Ssa {
        fields.push(("runs", args.runs.to_string()));
        fields.push(("seed", args.seed.to_string()));
    }
    header("check", &fields);
    let mut out = open_out(&args.out)?;
    if args.graph.mode == Mode::Ssa {
        writeln!(out, "time,estimate,std_error,runs").map_err(io_err)?;
        for &t in &times {
            let est = ssa::estimate_probability(&model, &property.with_upper(t), args.runs, args.seed)
                .map_err(analysis)?;
            writeln!(out, "{t},{:.12e},{:.6e},{}", est.estimate, est.std_error, est.runs)
                .map_err(io_err)?;
        }
        return Ok(());
    }
    let start = Instant::now();
    let graph = build_graph(&model, &args.graph, &full)?;
    let build = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let bounds = check_property_series(&model, &graph, &property, &times, args.time.tolerance)
        .map_err(analysis)?;
    eprintln!(
        "# states {} build {build:.3}s check {:.3}s",
        graph.state_count(),
        start.elapsed().as_secs_f64()
    );
    write_bounds(&mut out, &times, &bounds)?;
    out.flush().map_err(io_err)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    if args.deltas.is_empty() {
        return Err(input("--delta needs at least one threshold"));
    }
    let full = load_model(&args.model)?;
    let property = load_property(&args.property.property, args.property.which)?;
    let model = reduce(full, &args.model, &property.species())?;
    let mut fields = model_fields(&args.model);
    fields.push(("property", format!("'{property}'")));
    fields.push((
        "delta",
        args.deltas.iter().map(|d| format!("{d:e}")).collect::<Vec<_>>().join(","),
    ));
    fields.push(("tolerance", format!("{:e}", args.tolerance)));
    header("sweep", &fields);
    let thresholds: Vec<TerminationThreshold> =
        args.deltas.iter().map(|&d| threshold(d)).collect::<Result<_, _>>()?;
    let options = BuildOptions {
        max_iterations: args.max_iterations,
        state_cap: args.state_cap,
        ..BuildOptions::default()
    };
    let mut out = open_out(&args.out)?;
    writeln!(out, "delta,states,lower,upper,epsilon,build_seconds,check_seconds").map_err(io_err)?;
    for (delta, th) in args.deltas.iter().zip(thresholds) {
        let start = Instant::now();
        let graph = build_approximate_graph(&model, th, &options).map_err(analysis)?;
        let build = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let b = crate::csl::check_property(&model, &graph, &property, args.tolerance)
            .map_err(analysis)?;
        let check = start.elapsed().as_secs_f64();
        writeln!(
            out,
            "{delta:e},{},{:.12e},{:.12e},{:.6e},{build:.3},{check:.3}",
            graph.state_count(),
            b.lower,
            b.upper,
            b.epsilon()
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let schedule = EventSchedule::parse(&model, &args.events).map_err(input)?;
    let mut fields = model_fields(&args.model);
    fields.push(("runs", args.runs.to_string()));
    fields.push(("seed", args.seed.to_string()));
    if let Some(p) = &args.property {
        let property = load_property(p, args.which)?;
        fields.push(("property", format!("'{property}'")));
        header("simulate", &fields);
        let est = ssa::estimate_probability(&model, &property, args.runs, args.seed)
            .map_err(analysis)?;
        let mut out = open_out(&args.out)?;
        writeln!(out, "estimate,std_error,runs").map_err(io_err)?;
        writeln!(out, "{:.12e},{:.6e},{}", est.estimate, est.std_error, est.runs)
            .map_err(io_err)?;
        return out.flush().map_err(io_err);
    }
    let horizon = args
        .horizon
        .ok_or_else(|| input("--horizon is required without --property"))?;
    fields.push(("horizon", horizon.to_string()));
    fields.push(("interval", args.interval.to_string()));
    if !args.events.is_empty() {
        fields.push(("events", args.events.clone()));
    }
    header("simulate", &fields);
    let names = model.species_names();
    let mut out = open_out(&args.out)?;
    if args.runs == 1 {
        let tr = ssa::simulate(&model, horizon, &schedule, args.seed, args.interval)
            .map_err(analysis)?;
        ssa::write_trajectory_csv(&tr, &names, &mut out).map_err(io_err)?;
    } else {
        let avg = ssa::average_trajectories(
            &model,
            horizon,
            &schedule,
            args.seed,
            args.interval,
            args.runs,
        )
        .map_err(analysis)?;
        ssa::write_average_csv(&avg, &names, &mut out).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Runs one parsed command.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Check(a) => cmd_check(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
