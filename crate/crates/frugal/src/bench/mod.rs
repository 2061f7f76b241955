//! Benchmark harness: evidence generation, timed solver runs, the three
//! error measures against exact MAP, aggregation and CSV reporting.
//!
//! A [`Protocol`] names a network, a query family (hypothesis/evidence
//! specs), a solver line-up and every tunable; [`run_protocol`] executes
//! draws × repetitions × solvers and emits one [`BenchRecord`] per run in
//! deterministic order. Error metrics are computed per draw against an
//! untimed exact-MAP baseline on the *original* network; the MFE-family
//! solvers run on the determinism-patched graph, exactly the regime the
//! comparison is about.
//!
//! Timing accounting: the MFE record's wall time includes its on-the-fly
//! relevance estimation; MFE+ and MFE+A exclude table precomputation
//! (tables are built per draw outside the timed region).

mod protocol;

pub use protocol::{
    load_protocol, parse_protocol, AnnealOverrides, EvidenceDist, Protocol, SetSpec, TableMode,
};

use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::engine::{EngineConfig, JointTable, DEFAULT_CELL_BUDGET};
use crate::error::{Error, Result};
use crate::model::{parse_bif, Assignment, Network, VarId, Variable};
use crate::relevance::{on_the_fly_partition, partition_from_table, precompute_table};
use crate::seed::{rng_from, split_seed, split_seed_indexed};
use crate::solvers::{
    ancestral_sample, annealed_map, default_schedule, exact_map_full, sampled_mfe, AnnealSchedule,
    InnerSolver, MapQuery, MapResult, MfeOptions, Partition, SolverKind,
};

/// The conventional diagnostic partition of the 37-variable patient
/// monitoring network: 8 disease (hypothesis) variables and 16
/// measurement (evidence) variables; the remaining 13 are intermediate.
pub const MONITORING_HYPOTHESIS: [&str; 8] = [
    "HYPOVOLEMIA",
    "LVFAILURE",
    "ANAPHYLAXIS",
    "INSUFFANESTH",
    "PULMEMBOLUS",
    "INTUBATION",
    "KINKEDTUBE",
    "DISCONNECT",
];

pub const MONITORING_EVIDENCE: [&str; 16] = [
    "HISTORY", "CVP", "PCWP", "TPR", "BP", "CO", "HRBP", "HREKG", "HRSAT", "PAP", "SAO2", "FIO2",
    "PRESS", "EXPCO2", "MINVOL", "MINVOLSET",
];

/// One timed solver run. Metrics are `None` when either the run itself or
/// the exact-MAP baseline for its draw failed; the failure reason is then
/// in `meta`.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub network: String,
    pub solver: SolverKind,
    pub draw: usize,
    pub rep: usize,
    /// Wall-clock seconds of the solver call (plus on-the-fly relevance
    /// estimation for plain MFE).
    pub wall_time: f64,
    pub hamming: Option<usize>,
    pub ratio: Option<f64>,
    pub rank: Option<u64>,
    pub explanation: Option<Assignment>,
    /// `NAME=state;...` rendering of the explanation, empty on failure.
    pub explanation_text: String,
    pub meta: Vec<(String, String)>,
}

/// Per-(network, solver) aggregate over a record list.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub network: String,
    pub solver: SolverKind,
    /// All records for the pair, including failed ones.
    pub records: usize,
    pub failures: usize,
    pub mean_wall: f64,
    /// Sample standard deviation; 0 for a single record.
    pub std_wall: f64,
    pub mean_hamming: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub mean_rank: Option<f64>,
}

/// CSV plus an aligned human-readable summary of the same aggregates.
#[derive(Debug, Clone)]
pub struct Report {
    pub csv: String,
    pub table: String,
    pub summary: Vec<SummaryRow>,
}

/// Count of differing positions between two assignments over the same
/// variable set.
pub fn hamming(a: &Assignment, b: &Assignment) -> Result<usize> {
    if a.len() != b.len() || a.vars().ne(b.vars()) {
        return Err(Error::validation(format!(
            "hamming distance needs identical variable sets, got [{}] vs [{}]",
            a.vars().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            b.vars().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        )));
    }
    Ok(a.iter().zip(b.iter()).filter(|(x, y)| x.1 != y.1).count())
}

/// Draw `n` evidence assignments by forward-sampling the full network and
/// restricting each sample to `evidence_vars`. Every returned assignment
/// has positive probability. Deterministic given the seed.
pub fn draw_evidence(
    net: &Network,
    evidence_vars: &[VarId],
    n: usize,
    seed: u64,
) -> Result<Vec<Assignment>> {
    check_draw_args(net, evidence_vars, n)?;
    let mut rng = rng_from(seed);
    (0..n)
        .map(|_| {
            let full = ancestral_sample(net, &mut rng);
            Assignment::from_pairs(evidence_vars.iter().map(|&v| (v, full[v])))
        })
        .collect()
}

/// Like [`draw_evidence`] but each variable uniform over its states,
/// independently. May produce zero-probability evidence on networks with
/// deterministic structure; intended for sensitivity checks only.
pub fn draw_evidence_uniform(
    net: &Network,
    evidence_vars: &[VarId],
    n: usize,
    seed: u64,
) -> Result<Vec<Assignment>> {
    check_draw_args(net, evidence_vars, n)?;
    let mut rng = rng_from(seed);
    (0..n)
        .map(|_| {
            Assignment::from_pairs(
                evidence_vars
                    .iter()
                    .map(|&v| (v, rng.gen_range(0..net.cardinality(v)))),
            )
        })
        .collect()
}

fn check_draw_args(net: &Network, evidence_vars: &[VarId], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::validation("need at least one evidence draw"));
    }
    if evidence_vars.is_empty() {
        return Err(Error::validation("evidence variable set is empty"));
    }
    for &v in evidence_vars {
        if v >= net.n_vars() {
            return Err(Error::validation(format!(
                "evidence variable {v} out of range (network has {} variables)",
                net.n_vars()
            )));
        }
    }
    Ok(())
}

/// Exact-MAP baseline for one draw, reused for every metric of the draw.
struct Baseline {
    map: MapResult,
    table: JointTable,
}

impl Baseline {
    fn compute(
        fg: &crate::model::FactorGraph,
        q: &MapQuery,
        cfg: &EngineConfig,
    ) -> Result<Baseline> {
        let (map, table) = exact_map_full(fg, q, cfg)?;
        Ok(Baseline { map, table })
    }

    /// (hamming, ratio, rank) of `expl` against the baseline.
    fn metrics(&self, expl: &Assignment) -> Result<(usize, f64, u64)> {
        let ham = hamming(expl, &self.map.explanation)?;
        let idx = self.table.index_of(expl)?;
        let log_e = self.table.log_value(idx);
        let log_m = self.map.score.log();
        if log_m == f64::NEG_INFINITY {
            return Err(Error::validation(
                "evidence has zero probability; ratio undefined",
            ));
        }
        // Same table, same arithmetic: log_e <= log_m by construction, so
        // the ratio cannot exceed 1.
        let ratio = (log_e - log_m).exp();
        let val = self.table.values()[idx];
        let rank = 1 + self.table.values().iter().filter(|&&v| v > val).count() as u64;
        Ok((ham, ratio, rank))
    }
}

/// Probability ratio and tie-sharing rank of an explanation against the
/// exact MAP of the same query.
///
/// ratio = Pr(explanation, e) / Pr(map, e) ∈ (0, 1]; rank = 1 + number of
/// hypothesis assignments with strictly larger joint probability. Both
/// need the materialized joint table over Ω(H), so queries beyond the
/// cell budget fail with a resource error.
pub fn ratio_and_rank(
    fg: &crate::model::FactorGraph,
    q: &MapQuery,
    explanation: &Assignment,
    cfg: &EngineConfig,
) -> Result<(f64, u64)> {
    let base = Baseline::compute(fg, q, cfg)?;
    let (_, ratio, rank) = base.metrics(explanation)?;
    Ok((ratio, rank))
}

/// Resolve a hypothesis or evidence spec to concrete variable ids.
fn resolve_spec(net: &Network, spec: &SetSpec, role: &str) -> Result<Vec<VarId>> {
    match spec {
        SetSpec::Natural => {
            let names: &[&str] = match role {
                "hypothesis" => &MONITORING_HYPOTHESIS,
                _ => &MONITORING_EVIDENCE,
            };
            let ids = names.iter().map(|n| by_name(net, n)).collect::<Result<Vec<_>>>();
            ids.map_err(|_| {
                Error::validation(format!(
                    "`{role} natural` is only defined for the 37-variable monitoring network"
                ))
            })
        }
        SetSpec::Roots(k) => {
            let roots = net.roots();
            if roots.len() < *k {
                return Err(Error::validation(format!(
                    "requested first {k} roots but the network has {}",
                    roots.len()
                )));
            }
            Ok(roots[..*k].to_vec())
        }
        SetSpec::Leaves => {
            let leaves = net.leaves();
            if leaves.is_empty() {
                return Err(Error::validation("network has no leaves"));
            }
            Ok(leaves)
        }
        SetSpec::Names(names) => names.iter().map(|n| by_name(net, n)).collect(),
    }
}

fn by_name(net: &Network, name: &str) -> Result<VarId> {
    net.var_by_name(name)
        .ok_or_else(|| Error::validation(format!("no variable named `{name}`")))
}

/// Hypothesis and evidence variable sets of a protocol, checked disjoint.
pub fn resolve_sets(net: &Network, p: &Protocol) -> Result<(Vec<VarId>, Vec<VarId>)> {
    let hyp = resolve_spec(net, &p.hypothesis, "hypothesis")?;
    let ev = resolve_spec(net, &p.evidence, "evidence")?;
    for &h in &hyp {
        if ev.contains(&h) {
            return Err(Error::validation(format!(
                "variable `{}` is both hypothesis and evidence",
                net.variable(h).name
            )));
        }
    }
    Ok((hyp, ev))
}

fn resolve_schedule(n_hyp: usize, o: &AnnealOverrides) -> AnnealSchedule {
    let mut s = default_schedule(n_hyp);
    if let Some(v) = o.t0 {
        s.t0 = v;
    }
    if let Some(v) = o.cooling {
        s.cooling = v;
    }
    if let Some(v) = o.steps_per_temp {
        s.steps_per_temp = v;
    }
    if let Some(v) = o.t_min {
        s.t_min = v;
    }
    if let Some(v) = o.restarts {
        s.restarts = v;
    }
    s
}

/// Everything fixed across draws, shared by the per-draw workers.
struct RunCtx<'a> {
    p: &'a Protocol,
    net: Network,
    fg: crate::model::FactorGraph,
    fg_patched: crate::model::FactorGraph,
    vars: Vec<Variable>,
    hyp: Vec<VarId>,
    cfg: EngineConfig,
    schedule: AnnealSchedule,
    evidence: Vec<Assignment>,
    shared_table: Option<crate::relevance::RelevanceTable>,
}

/// Run a protocol sequentially (strict timing). Records come out ordered
/// by draw, then solver (protocol order), then repetition.
pub fn run_protocol(p: &Protocol) -> Result<Vec<BenchRecord>> {
    run_protocol_with(p, false)
}

/// Run a protocol, optionally parallelizing across evidence draws.
/// Parallel runs keep the same record order and the same explanations but
/// contend for cores, so wall times are only trustworthy sequentially.
pub fn run_protocol_with(p: &Protocol, parallel: bool) -> Result<Vec<BenchRecord>> {
    let ctx = prepare(p)?;
    let per_draw: Result<Vec<Vec<BenchRecord>>> = if parallel {
        (0..p.draws).into_par_iter().map(|d| run_draw(&ctx, d)).collect()
    } else {
        (0..p.draws).map(|d| run_draw(&ctx, d)).collect()
    };
    Ok(per_draw?.into_iter().flatten().collect())
}

fn prepare(p: &Protocol) -> Result<RunCtx<'_>> {
    p.validate()?;
    let text = fs::read_to_string(&p.network_path)?;
    let net = parse_bif(&text)?;
    let patched = net.patch_determinism(p.epsilon)?;
    let fg = net.to_factor_graph();
    let fg_patched = patched.to_factor_graph();
    let (hyp, ev) = resolve_sets(&net, p)?;
    let evidence = match p.evidence_dist {
        EvidenceDist::Ancestral => draw_evidence(&net, &ev, p.draws, split_seed(p.seed, "evidence"))?,
        EvidenceDist::Uniform => {
            draw_evidence_uniform(&net, &ev, p.draws, split_seed(p.seed, "evidence"))?
        }
    };
    let cfg = EngineConfig {
        mode: p.mode,
        cell_budget: p.cell_budget.unwrap_or(DEFAULT_CELL_BUDGET),
    };
    let schedule = resolve_schedule(hyp.len(), &p.anneal);
    let needs_table = p
        .solvers
        .iter()
        .any(|s| matches!(s, SolverKind::MfePlus | SolverKind::MfePlusA));
    let shared_table = if needs_table && p.table_mode == TableMode::Shared {
        let q0 = MapQuery::new(&fg_patched, hyp.clone(), evidence[0].clone())?;
        Some(precompute_table(
            &fg_patched,
            &q0,
            p.table_budget,
            split_seed_indexed(p.seed, "table", 0),
            &cfg,
        )?)
    } else {
        None
    };
    let vars = net.variables().to_vec();
    Ok(RunCtx {
        p,
        net,
        fg,
        fg_patched,
        vars,
        hyp,
        cfg,
        schedule,
        evidence,
        shared_table,
    })
}

fn run_draw(ctx: &RunCtx<'_>, draw: usize) -> Result<Vec<BenchRecord>> {
    let p = ctx.p;
    let q = MapQuery::new(&ctx.fg, ctx.hyp.clone(), ctx.evidence[draw].clone())?;

    // Untimed ground truth; a failure here (cell budget on large |H|) is
    // recorded on every record of the draw, not fatal.
    let (baseline, gt_note) = match Baseline::compute(&ctx.fg, &q, &ctx.cfg) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(format!("ground truth unavailable: {e}"))),
    };

    let needs_table = p
        .solvers
        .iter()
        .any(|s| matches!(s, SolverKind::MfePlus | SolverKind::MfePlusA));
    let table_partition: Option<Partition> = if needs_table {
        let built;
        let table = match (&ctx.shared_table, p.table_mode) {
            (Some(t), TableMode::Shared) => t,
            _ => {
                built = precompute_table(
                    &ctx.fg_patched,
                    &q,
                    p.table_budget,
                    split_seed_indexed(p.seed, "table", draw as u64),
                    &ctx.cfg,
                )?;
                &built
            }
        };
        Some(partition_from_table(table, &q, p.threshold)?)
    } else {
        None
    };

    let exact_opts = MfeOptions {
        n_samples: p.n_samples,
        inner: InnerSolver::Exact,
        measure: p.mfe_sampling,
        prior_net: Some(&ctx.net),
    };
    let anneal_opts = MfeOptions {
        inner: InnerSolver::Anneal(Some(ctx.schedule)),
        ..exact_opts
    };

    let mut records = Vec::with_capacity(p.solvers.len() * p.repetitions);
    for &kind in &p.solvers {
        for rep in 0..p.repetitions {
            let started = Instant::now();
            let outcome: Result<(MapResult, Vec<(String, String)>)> = match kind {
                SolverKind::Map => {
                    exact_map_full(&ctx.fg, &q, &ctx.cfg).map(|(r, _)| (r, Vec::new()))
                }
                SolverKind::Ann => annealed_map(
                    &ctx.fg,
                    &q,
                    &ctx.schedule,
                    split_seed_indexed(p.seed, "ann", draw as u64),
                    &ctx.cfg,
                )
                .map(|r| (r, Vec::new())),
                SolverKind::Mfe => {
                    let otf_started = Instant::now();
                    on_the_fly_partition(
                        &ctx.fg_patched,
                        &q,
                        split_seed_indexed(p.seed, "mfe-otf", draw as u64),
                        &ctx.cfg,
                    )
                    .and_then(|part| {
                        let otf = otf_started.elapsed().as_secs_f64();
                        sampled_mfe(
                            &ctx.fg_patched,
                            &q,
                            &part,
                            &exact_opts,
                            split_seed_indexed(p.seed, "mfe", draw as u64),
                            &ctx.cfg,
                        )
                        .map(|r| (r, vec![("otf_time_s".to_string(), format!("{otf:.6}"))]))
                    })
                }
                SolverKind::MfePlus => sampled_mfe(
                    &ctx.fg_patched,
                    &q,
                    table_partition.as_ref().expect("table built above"),
                    &exact_opts,
                    split_seed_indexed(p.seed, "mfe+", draw as u64),
                    &ctx.cfg,
                )
                .map(|r| (r, Vec::new())),
                SolverKind::MfePlusA => sampled_mfe(
                    &ctx.fg_patched,
                    &q,
                    table_partition.as_ref().expect("table built above"),
                    &anneal_opts,
                    split_seed_indexed(p.seed, "mfe+a", draw as u64),
                    &ctx.cfg,
                )
                .map(|r| (r, Vec::new())),
            };
            let wall = started.elapsed().as_secs_f64();
            records.push(make_record(
                ctx,
                kind,
                draw,
                rep,
                wall,
                outcome,
                baseline.as_ref(),
                gt_note.as_deref(),
            ));
        }
    }
    Ok(records)
}

#[allow(clippy::too_many_arguments)]
fn make_record(
    ctx: &RunCtx<'_>,
    kind: SolverKind,
    draw: usize,
    rep: usize,
    wall: f64,
    outcome: Result<(MapResult, Vec<(String, String)>)>,
    baseline: Option<&Baseline>,
    gt_note: Option<&str>,
) -> BenchRecord {
    let mut rec = BenchRecord {
        network: ctx.p.name.clone(),
        solver: kind,
        draw,
        rep,
        wall_time: wall,
        hamming: None,
        ratio: None,
        rank: None,
        explanation: None,
        explanation_text: String::new(),
        meta: Vec::new(),
    };
    if let Some(note) = gt_note {
        rec.meta.push(("gt".to_string(), note.to_string()));
    }
    match outcome {
        Ok((res, extra)) => {
            rec.explanation_text = res.explanation.display_with(&ctx.vars);
            rec.meta.push(("score_ln".to_string(), format!("{:.6}", res.score.log())));
            rec.meta.extend(res.meta.iter().cloned());
            rec.meta.extend(extra);
            if let Some(b) = baseline {
                match b.metrics(&res.explanation) {
                    Ok((h, ratio, rank)) => {
                        rec.hamming = Some(h);
                        rec.ratio = Some(ratio);
                        rec.rank = Some(rank);
                    }
                    Err(e) => rec.meta.push(("metric_error".to_string(), e.to_string())),
                }
            }
            rec.explanation = Some(res.explanation);
        }
        Err(e) => rec.meta.push(("error".to_string(), e.to_string())),
    }
    rec
}

/// Aggregate records per (network, solver) in first-appearance order.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut groups: Vec<Vec<&BenchRecord>> = Vec::new();
    for r in records {
        let pos = rows
            .iter()
            .position(|s| s.network == r.network && s.solver == r.solver);
        match pos {
            Some(i) => groups[i].push(r),
            None => {
                rows.push(SummaryRow {
                    network: r.network.clone(),
                    solver: r.solver,
                    records: 0,
                    failures: 0,
                    mean_wall: 0.0,
                    std_wall: 0.0,
                    mean_hamming: None,
                    mean_ratio: None,
                    mean_rank: None,
                });
                groups.push(vec![r]);
            }
        }
    }
    for (row, group) in rows.iter_mut().zip(&groups) {
        row.records = group.len();
        row.failures = group
            .iter()
            .filter(|r| r.meta.iter().any(|(k, _)| k == "error"))
            .count();
        let times: Vec<f64> = group.iter().map(|r| r.wall_time).collect();
        row.mean_wall = mean(&times);
        row.std_wall = sample_std(&times, row.mean_wall);
        row.mean_hamming = mean_opt(group.iter().filter_map(|r| r.hamming.map(|h| h as f64)));
        row.mean_ratio = mean_opt(group.iter().filter_map(|r| r.ratio));
        row.mean_rank = mean_opt(group.iter().filter_map(|r| r.rank.map(|k| k as f64)));
    }
    rows
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn sample_std(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

fn mean_opt(it: impl Iterator<Item = f64>) -> Option<f64> {
    let xs: Vec<f64> = it.collect();
    if xs.is_empty() {
        None
    } else {
        Some(mean(&xs))
    }
}

/// CSV fields never contain commas: list-valued cells join on `;` and
/// free-text meta has commas replaced.
fn csv_safe(s: &str) -> String {
    s.replace(',', ";").replace('\n', " ")
}

fn opt_cell<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn opt_num(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".to_string())
}

/// Render records as machine-readable CSV (one row per record, summary
/// appended as `#` comment lines) and an aligned text table of the same
/// summary.
pub fn report(records: &[BenchRecord]) -> Report {
    let mut csv = String::from(
        "network,solver,draw,rep,wall_time_s,hamming,ratio,rank,explanation,meta\n",
    );
    for r in records {
        let meta = r
            .meta
            .iter()
            .map(|(k, v)| format!("{}={}", csv_safe(k), csv_safe(v)))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.6},{},{},{},{},{}",
            csv_safe(&r.network),
            r.solver,
            r.draw,
            r.rep,
            r.wall_time,
            opt_cell(&r.hamming),
            opt_cell(&r.ratio),
            opt_cell(&r.rank),
            csv_safe(&r.explanation_text),
            meta,
        );
    }

    let summary = summarize(records);
    csv.push_str("# summary\n");
    csv.push_str(
        "# network,solver,records,failures,mean_wall_s,std_wall_s,mean_hamming,mean_ratio,mean_rank\n",
    );
    for s in &summary {
        let _ = writeln!(
            csv,
            "# {},{},{},{},{:.6},{:.6},{},{},{}",
            csv_safe(&s.network),
            s.solver,
            s.records,
            s.failures,
            s.mean_wall,
            s.std_wall,
            opt_cell(&s.mean_hamming.map(|v| format!("{v:.4}"))),
            opt_cell(&s.mean_ratio.map(|v| format!("{v:.6}"))),
            opt_cell(&s.mean_rank.map(|v| format!("{v:.4}"))),
        );
    }

    let mut table = String::new();
    let _ = writeln!(
        table,
        "{:<14} {:<6} {:>4} {:>5} {:>12} {:>12} {:>9} {:>9} {:>9}",
        "network", "solver", "runs", "fail", "RT mean (s)", "RT std (s)", "Hamming", "ratio", "rank"
    );
    for s in &summary {
        let _ = writeln!(
            table,
            "{:<14} {:<6} {:>4} {:>5} {:>12.6} {:>12.6} {:>9} {:>9} {:>9}",
            s.network,
            s.solver.to_string(),
            s.records,
            s.failures,
            s.mean_wall,
            s.std_wall,
            opt_num(s.mean_hamming, 3),
            opt_num(s.mean_ratio, 4),
            opt_num(s.mean_rank, 2),
        );
    }

    Report { csv, table, summary }
}
