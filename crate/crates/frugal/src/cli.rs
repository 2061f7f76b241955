//! Command-line interface: conversion, relevance precomputation,
//! single-query solving and benchmark runs.
//!
//! One binary, four subcommands. Every subcommand funnels its randomness
//! through a single `--seed` flag, expanded into per-component streams by
//! the crate's seed splitter, so identical invocations produce identical
//! non-timing output. Exit codes: 0 success, 2 usage, 3 parse error,
//! 4 validation or I/O error, 5 resource limit.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, EvidenceDist, Protocol, SetSpec, TableMode};
use crate::engine::{EngineConfig, ModeChoice, DEFAULT_CELL_BUDGET};
use crate::error::{Error, Result};
use crate::model::{fg_text, parse_bif, Assignment, FactorGraph, Network, VarId};
use crate::relevance::{
    on_the_fly_partition, partition_from_table, precompute_table, read_table, write_table,
    write_table_string, DEFAULT_RELEVANCE_THRESHOLD,
};
use crate::seed::split_seed;
use crate::solvers::{
    annealed_map, default_schedule, exact_map, sampled_mfe, AnnealSchedule, InnerSolver, MapQuery,
    MapResult, MfeOptions, SamplingMeasure, SolverKind,
};

#[derive(Parser)]
#[command(
    name = "frugal",
    version,
    about = "MAP inference on discrete Bayesian networks with frugal heuristics",
    after_help = "Network inputs: files ending in .fg are factor-graph text; \
                  anything else is parsed as a BIF Bayesian network."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a BIF network to factor-graph text.
    Convert(ConvertArgs),
    /// Precompute an intrinsic-relevance table for a query family.
    Relevance(RelevanceArgs),
    /// Solve a single MAP query with a chosen solver.
    Solve(SolveArgs),
    /// Run a benchmark protocol: timed solver runs plus error metrics.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Input BIF file.
    bif: PathBuf,
    /// Output factor-graph file.
    out: PathBuf,
    /// Replace deterministic (zero) CPT entries before converting.
    #[arg(long)]
    patch_determinism: bool,
    /// Epsilon for `--patch-determinism`.
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
}

/// Engine knobs shared by the inference-running subcommands.
#[derive(Args)]
struct EngineArgs {
    /// Numeric domain: auto (log for large networks), on, or off.
    #[arg(long, default_value = "auto", value_parser = parse_mode)]
    log_space: ModeChoice,
    /// Maximum factor cells a single elimination may allocate.
    #[arg(long, default_value_t = DEFAULT_CELL_BUDGET)]
    cell_budget: u64,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig { mode: self.log_space, cell_budget: self.cell_budget }
    }
}

#[derive(Args)]
struct RelevanceArgs {
    /// Network file (.bif, or .fg for pre-converted factor graphs).
    network: PathBuf,
    /// Hypothesis set: `natural`, `leaves`, `roots:<k>`, or `names A,B,...`
    /// (a bare comma-separated list also works).
    #[arg(long)]
    hypothesis: String,
    /// Observed variables without values; their states are drawn by one
    /// seeded ancestral sample (BIF inputs only).
    #[arg(long)]
    evidence_vars: Option<String>,
    /// Explicit evidence assignment `VAR=state,...`; overrides any drawn
    /// values for these variables.
    #[arg(long)]
    evidence: Option<String>,
    /// Samples per intermediate variable.
    #[arg(long, default_value_t = 1000)]
    samples: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output table path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Patch deterministic CPT entries before estimating (the usual
    /// setting when the table feeds the sampling heuristics).
    #[arg(long)]
    patch_determinism: bool,
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct SolveArgs {
    /// Network file (.bif, or .fg for pre-converted factor graphs).
    network: PathBuf,
    /// map, ann, mfe, mfe+ or mfe+a.
    #[arg(long)]
    solver: SolverKind,
    /// Hypothesis set: `natural`, `leaves`, `roots:<k>`, or `names A,B,...`
    /// (a bare comma-separated list also works).
    #[arg(long)]
    hypothesis: String,
    /// Evidence assignment `VAR=state,...` (state labels or indices).
    #[arg(long)]
    evidence: Option<String>,
    /// Relevance table file; required by mfe+ and mfe+a.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Relevance threshold applied to `--table`.
    #[arg(long, default_value_t = DEFAULT_RELEVANCE_THRESHOLD)]
    threshold: f64,
    /// Iterations of the sampling heuristic.
    #[arg(long, default_value_t = 1)]
    n_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// How irrelevant variables are drawn: uniform or prior.
    #[arg(long, default_value = "uniform", value_parser = parse_measure)]
    mfe_sampling: SamplingMeasure,
    /// Patch deterministic CPT entries before solving (recommended for
    /// the sampling heuristics on networks with hard zeros).
    #[arg(long)]
    patch_determinism: bool,
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    #[command(flatten)]
    anneal: AnnealArgs,
    #[command(flatten)]
    engine: EngineArgs,
}

/// Annealing schedule overrides; unset fields keep the size-derived
/// default schedule.
#[derive(Args)]
struct AnnealArgs {
    #[arg(long)]
    anneal_t0: Option<f64>,
    #[arg(long)]
    anneal_cooling: Option<f64>,
    #[arg(long)]
    anneal_steps: Option<usize>,
    #[arg(long)]
    anneal_tmin: Option<f64>,
    #[arg(long)]
    anneal_restarts: Option<usize>,
}

impl AnnealArgs {
    fn schedule(&self, n_hyp: usize) -> AnnealSchedule {
        let mut s = default_schedule(n_hyp);
        if let Some(v) = self.anneal_t0 {
            s.t0 = v;
        }
        if let Some(v) = self.anneal_cooling {
            s.cooling = v;
        }
        if let Some(v) = self.anneal_steps {
            s.steps_per_temp = v;
        }
        if let Some(v) = self.anneal_tmin {
            s.t_min = v;
        }
        if let Some(v) = self.anneal_restarts {
            s.restarts = v;
        }
        s
    }
}

#[derive(Args)]
struct BenchArgs {
    /// Protocol file; alternatively give the experiment inline via
    /// --network/--hypothesis/--evidence/--solvers.
    #[arg(long, required_unless_present = "network")]
    protocol: Option<PathBuf>,
    /// Network file (BIF) for an inline protocol.
    #[arg(long, conflicts_with = "protocol", requires = "solvers")]
    network: Option<PathBuf>,
    /// Inline hypothesis spec (`natural`, `leaves`, `roots:<k>`,
    /// `names A,B,...`).
    #[arg(long)]
    hypothesis: Option<String>,
    /// Inline evidence spec.
    #[arg(long)]
    evidence: Option<String>,
    /// Inline solver list, comma-separated.
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<SolverKind>>,
    /// Override the protocol's evidence draw count.
    #[arg(long)]
    draws: Option<usize>,
    /// Override the protocol's repetition count.
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    table_budget: Option<u32>,
    /// per-draw or shared.
    #[arg(long)]
    table_mode: Option<TableMode>,
    /// ancestral or uniform.
    #[arg(long)]
    evidence_dist: Option<EvidenceDist>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Serialize timed runs so wall times are contention-free. Disable
    /// to parallelize across evidence draws.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    strict_timing: bool,
}

fn parse_mode(s: &str) -> std::result::Result<ModeChoice, String> {
    match s {
        "auto" => Ok(ModeChoice::Auto),
        "on" => Ok(ModeChoice::Log),
        "off" => Ok(ModeChoice::Linear),
        _ => Err(format!("bad log-space setting `{s}` (expected auto, on or off)")),
    }
}

fn parse_measure(s: &str) -> std::result::Result<SamplingMeasure, String> {
    match s {
        "uniform" => Ok(SamplingMeasure::Uniform),
        "prior" => Ok(SamplingMeasure::Prior),
        _ => Err(format!("bad sampling measure `{s}` (expected uniform or prior)")),
    }
}

/// Run the CLI, returning the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Convert(a) => cmd_convert(&a),
        Cmd::Relevance(a) => cmd_relevance(&a),
        Cmd::Solve(a) => cmd_solve(&a),
        Cmd::Bench(a) => cmd_bench(&a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse { .. } => 3,
                Error::Validation(_) | Error::Io(_) => 4,
                Error::Resource(_) => 5,
            }
        }
    }
}

/// A loaded network: always a factor graph, plus the directed form when
/// the input was a BIF file (needed for ancestral sampling and priors).
struct Input {
    net: Option<Network>,
    fg: FactorGraph,
}

fn load_input(path: &Path, patch: bool, epsilon: f64) -> Result<Input> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "fg") {
        if patch {
            return Err(Error::validation(
                "--patch-determinism needs a BIF input (factor graphs carry no CPT rows)",
            ));
        }
        return Ok(Input { net: None, fg: fg_text::read_fg_string(&text)? });
    }
    let mut net = parse_bif(&text)?;
    if patch {
        net = net.patch_determinism(epsilon)?;
    }
    let fg = net.to_factor_graph();
    Ok(Input { net: Some(net), fg })
}

fn resolve_var(fg: &FactorGraph, token: &str) -> Result<VarId> {
    if let Some(v) = fg.var_by_name(token) {
        return Ok(v);
    }
    if let Ok(v) = token.parse::<usize>() {
        if v < fg.n_vars() {
            return Ok(v);
        }
    }
    Err(Error::validation(format!("no variable named `{token}`")))
}

fn resolve_state(fg: &FactorGraph, v: VarId, token: &str) -> Result<usize> {
    let var = &fg.variables()[v];
    if let Some(s) = var.states.iter().position(|s| s == token) {
        return Ok(s);
    }
    if let Ok(s) = token.parse::<usize>() {
        if s < var.states.len() {
            return Ok(s);
        }
    }
    Err(Error::validation(format!(
        "variable `{}` has no state `{token}` (states: {})",
        var.name,
        var.states.join(", ")
    )))
}

/// Parse `VAR=state,...` against the graph's names and state labels.
fn parse_evidence(fg: &FactorGraph, text: &str) -> Result<Assignment> {
    let mut a = Assignment::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (var, state) = part.split_once('=').ok_or_else(|| {
            Error::validation(format!("evidence term `{part}` is not VAR=state"))
        })?;
        let v = resolve_var(fg, var.trim())?;
        if a.contains(v) {
            return Err(Error::validation(format!("variable `{}` observed twice", var.trim())));
        }
        a.set(v, resolve_state(fg, v, state.trim())?);
    }
    Ok(a)
}

/// Resolve a hypothesis spec string; bare `A,B,C` is accepted as a name
/// list for convenience.
fn resolve_hypothesis(input: &Input, spec: &str) -> Result<Vec<VarId>> {
    let parsed: SetSpec = match spec.parse() {
        Ok(s) => s,
        Err(_) => SetSpec::Names(
            spec.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        ),
    };
    match (&parsed, &input.net) {
        (SetSpec::Names(names), _) => {
            names.iter().map(|n| resolve_var(&input.fg, n)).collect()
        }
        (_, Some(net)) => {
            let p = Protocol::new("", "", parsed.clone(), SetSpec::Leaves, vec![SolverKind::Map]);
            bench::resolve_sets(net, &p).map(|(h, _)| h)
        }
        (_, None) => Err(Error::validation(
            "structural hypothesis specs (natural/roots/leaves) need a BIF input",
        )),
    }
}

fn cmd_convert(a: &ConvertArgs) -> Result<()> {
    let text = fs::read_to_string(&a.bif)?;
    let mut net = parse_bif(&text)?;
    if a.patch_determinism {
        net = net.patch_determinism(a.epsilon)?;
    }
    fg_text::write_fg(&net.to_factor_graph(), &a.out)?;
    Ok(())
}

fn cmd_relevance(a: &RelevanceArgs) -> Result<()> {
    let input = load_input(&a.network, a.patch_determinism, a.epsilon)?;
    let hyp = resolve_hypothesis(&input, &a.hypothesis)?;

    let mut evidence = match &a.evidence {
        Some(text) => parse_evidence(&input.fg, text)?,
        None => Assignment::new(),
    };
    if let Some(vars_text) = &a.evidence_vars {
        let vars: Vec<VarId> = vars_text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|t| resolve_var(&input.fg, t))
            .collect::<Result<_>>()?;
        let missing: Vec<VarId> = vars.iter().copied().filter(|&v| !evidence.contains(v)).collect();
        if !missing.is_empty() {
            let net = input.net.as_ref().ok_or_else(|| {
                Error::validation(
                    "drawing evidence values needs a BIF input; give explicit --evidence instead",
                )
            })?;
            let drawn =
                bench::draw_evidence(net, &missing, 1, split_seed(a.seed, "evidence"))?.remove(0);
            evidence = evidence.merged(&drawn)?;
        }
    }

    let q = MapQuery::new(&input.fg, hyp, evidence)?;
    let cfg = a.engine.config();
    let table = precompute_table(&input.fg, &q, a.samples, a.seed, &cfg)?;
    match &a.out {
        Some(path) => write_table(path, &table)?,
        None => print!("{}", write_table_string(&table)),
    }
    Ok(())
}

fn print_result(fg: &FactorGraph, res: &MapResult) {
    println!("solver: {}", res.solver);
    println!("explanation: {}", res.explanation.display_with(fg.variables()));
    println!("score_ln: {:.6}", res.score.log());
    println!("wall_time_s: {:.6}", res.wall_time);
    for (k, v) in &res.meta {
        println!("meta.{k}: {v}");
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let input = load_input(&a.network, a.patch_determinism, a.epsilon)?;
    let hyp = resolve_hypothesis(&input, &a.hypothesis)?;
    let evidence = match &a.evidence {
        Some(text) => parse_evidence(&input.fg, text)?,
        None => Assignment::new(),
    };
    let q = MapQuery::new(&input.fg, hyp, evidence)?;
    let cfg = a.engine.config();
    let schedule = a.anneal.schedule(q.hypothesis.len());
    let opts = MfeOptions {
        n_samples: a.n_samples,
        inner: InnerSolver::Exact,
        measure: a.mfe_sampling,
        prior_net: input.net.as_ref(),
    };

    let mut res = match a.solver {
        SolverKind::Map => exact_map(&input.fg, &q, &cfg)?,
        SolverKind::Ann => {
            annealed_map(&input.fg, &q, &schedule, split_seed(a.seed, "ann"), &cfg)?
        }
        SolverKind::Mfe => {
            let part =
                on_the_fly_partition(&input.fg, &q, split_seed(a.seed, "mfe-otf"), &cfg)?;
            sampled_mfe(&input.fg, &q, &part, &opts, split_seed(a.seed, "mfe"), &cfg)?
        }
        SolverKind::MfePlus | SolverKind::MfePlusA => {
            let path = a.table.as_ref().ok_or_else(|| {
                Error::validation(format!("--solver {} needs --table", a.solver))
            })?;
            let table = read_table(path, Some(&input.fg.content_hash()))?;
            let part = partition_from_table(&table, &q, a.threshold)?;
            let (opts, label) = if a.solver == SolverKind::MfePlusA {
                (MfeOptions { inner: InnerSolver::Anneal(Some(schedule)), ..opts }, "mfe+a")
            } else {
                (opts, "mfe+")
            };
            sampled_mfe(&input.fg, &q, &part, &opts, split_seed(a.seed, label), &cfg)?
        }
    };
    // `sampled_mfe` labels by its inner solver; report the solver the
    // user asked for (mfe vs mfe+ differ only in where the partition
    // came from).
    res.solver = a.solver;
    print_result(&input.fg, &res);
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    if let Some(jobs) = a.jobs {
        // ignore the error if a pool already exists (tests, repeated calls)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let mut p = match &a.protocol {
        Some(path) => bench::load_protocol(path)?,
        None => {
            let network = a.network.clone().expect("clap enforces --network");
            let hyp: SetSpec = a
                .hypothesis
                .as_deref()
                .ok_or_else(|| Error::validation("inline protocols need --hypothesis"))?
                .parse()?;
            let ev: SetSpec = a
                .evidence
                .as_deref()
                .ok_or_else(|| Error::validation("inline protocols need --evidence"))?
                .parse()?;
            let solvers = a.solvers.clone().expect("clap enforces --solvers");
            let name = network
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "unnamed".into());
            Protocol::new(name, network, hyp, ev, solvers)
        }
    };
    if a.protocol.is_some() {
        if let Some(s) = a.solvers.clone() {
            p.solvers = s;
        }
    }
    if let Some(v) = a.draws {
        p.draws = v;
    }
    if let Some(v) = a.repetitions {
        p.repetitions = v;
    }
    if let Some(v) = a.seed {
        p.seed = v;
    }
    if let Some(v) = a.n_samples {
        p.n_samples = v;
    }
    if let Some(v) = a.threshold {
        p.threshold = v;
    }
    if let Some(v) = a.table_budget {
        p.table_budget = v;
    }
    if let Some(v) = a.table_mode {
        p.table_mode = v;
    }
    if let Some(v) = a.evidence_dist {
        p.evidence_dist = v;
    }
    if let Some(v) = a.epsilon {
        p.epsilon = v;
    }
    p.validate()?;

    let records = bench::run_protocol_with(&p, !a.strict_timing)?;
    let rep = bench::report(&records);
    match &a.out {
        Some(path) => {
            fs::write(path, &rep.csv)?;
            print!("{}", rep.table);
        }
        None => {
            print!("{}", rep.csv);
            eprint!("{}", rep.table);
        }
    }
    Ok(())
}
