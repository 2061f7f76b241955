//! Intrinsic relevance estimation and relevance-based partitioning.
//!
//! The intrinsic relevance of an intermediate variable `T` (with respect
//! to a hypothesis set and an evidence assignment) is the fraction of
//! joint states `i` of the *other* intermediates for which the best
//! hypothesis `argmax_h Pr(h, e, i, T = t)` is not the same for every
//! state `t` of `T`. Variables with relevance above a threshold are worth
//! marginalizing; the rest can be clamped to sampled states.
//!
//! Exact computation enumerates every `i`; estimation samples them
//! uniformly. Because every variable except the hypotheses is clamped
//! during an evaluation, only factors whose scope meets `H` can influence
//! the argmax — so when the hypothesis space is small the argmax is a
//! direct scan over `Ω(H)` with table lookups, and elimination is needed
//! only for hypothesis spaces too large to scan.

mod table_io;

pub use table_io::{read_table, read_table_string, write_table, write_table_string};

use rayon::prelude::*;

use crate::engine::algebra::{reduce, to_log_domain, NumericMode};
use crate::engine::{eliminate, EngineConfig};
use crate::error::{Error, Result};
use crate::model::{Assignment, Factor, FactorGraph, VarId};
use crate::seed::{rng_from, split_seed_indexed};
use crate::solvers::{MapQuery, Partition};
use rand::Rng;

/// Variables at or above this relevance go into the relevant set when
/// partitioning from a precomputed table.
pub const DEFAULT_RELEVANCE_THRESHOLD: f64 = 0.1;

/// Samples per variable for on-the-fly estimation (any flip counts).
pub const ON_THE_FLY_SAMPLES: u32 = 3;

/// Hypothesis spaces up to this size use the direct argmax scan.
pub const DIRECT_ARGMAX_LIMIT: u128 = 1 << 19;

/// Sampled relevance of one intermediate variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelevanceEstimate {
    pub var: VarId,
    /// Samples in which the best hypothesis varied across the target's
    /// states.
    pub flips: u32,
    pub samples: u32,
}

impl RelevanceEstimate {
    /// The estimated relevance, exactly `flips / samples`.
    pub fn relevance(&self) -> f64 {
        self.flips as f64 / self.samples as f64
    }
}

/// A precomputed relevance table for one (network, hypothesis set,
/// evidence variable set) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceTable {
    /// Content digest of the factor graph the table was computed on.
    pub network_hash: String,
    /// Hypothesis variable ids, ascending.
    pub hypothesis: Vec<VarId>,
    /// Evidence variable ids (values are not part of the key), ascending.
    pub evidence_vars: Vec<VarId>,
    /// Samples per variable used to build the table.
    pub budget: u32,
    /// Root seed the table was built with.
    pub seed: u64,
    /// Free-form creation note (evidence values, sampling measure).
    pub meta: String,
    /// One estimate per intermediate variable, ascending by id.
    pub rows: Vec<RelevanceEstimate>,
}

/// Argmax-over-hypotheses oracle with everything else clamped.
///
/// The fast path must agree with [`eliminate`] bit for bit — flip
/// detection compares tie-broken argmaxes, and under clamped queries
/// elimination degenerates to a left-fold of the factor values in
/// declaration order, which is what `Direct` replays.
struct ArgmaxOracle {
    hyp: Vec<VarId>,
    hyp_cards: Vec<usize>,
    kind: OracleKind,
}

enum OracleKind {
    /// Evidence-reduced copies of every factor (declaration order,
    /// mode-matched); the argmax is a scan over `Ω(H)` accumulating the
    /// factor values exactly as the assembly step of elimination would.
    /// Values of factors not touching `H` are constant across the scan
    /// and cached per evaluation.
    Direct {
        factors: Vec<Factor>,
        touches_hyp: Vec<bool>,
        mode: NumericMode,
    },
    /// Hypothesis space too large to scan: run elimination with all
    /// non-hypothesis variables observed and read the table argmax.
    Eliminate,
}

impl ArgmaxOracle {
    fn new(fg: &FactorGraph, q: &MapQuery, cfg: &EngineConfig) -> Result<ArgmaxOracle> {
        let hyp = q.hypothesis.clone();
        let hyp_cards: Vec<usize> = hyp.iter().map(|&v| fg.cardinality(v)).collect();
        let kind = if q.hypothesis_space(fg) <= DIRECT_ARGMAX_LIMIT {
            let mode = cfg.mode_for(fg);
            let mut factors = Vec::with_capacity(fg.factors().len());
            for f in fg.factors() {
                let r = reduce(f, &q.evidence)?;
                factors.push(if mode == NumericMode::Log {
                    to_log_domain(&r)
                } else {
                    r
                });
            }
            let touches_hyp = factors
                .iter()
                .map(|f| f.scope().iter().any(|v| hyp.contains(v)))
                .collect();
            OracleKind::Direct {
                factors,
                touches_hyp,
                mode,
            }
        } else {
            OracleKind::Eliminate
        };
        Ok(ArgmaxOracle {
            hyp,
            hyp_cards,
            kind,
        })
    }

    /// Linear index (hypothesis order, first variable most significant)
    /// of the best hypothesis given the clamped states in `full` /
    /// `clamped`. Ties resolve to the lowest index, matching the exact
    /// solver.
    fn best_hypothesis(
        &self,
        fg: &FactorGraph,
        full: &mut [usize],
        clamped: &Assignment,
        cfg: &EngineConfig,
    ) -> Result<usize> {
        match &self.kind {
            OracleKind::Direct {
                factors,
                touches_hyp,
                mode,
            } => {
                let k = self.hyp.len();
                let mut state = vec![0usize; k];
                for &v in &self.hyp {
                    full[v] = 0;
                }
                let constants: Vec<f64> = factors
                    .iter()
                    .zip(touches_hyp)
                    .map(|(f, &t)| if t { f64::NAN } else { f.value_at(full) })
                    .collect();
                let mut best_idx = 0usize;
                let mut best_score = f64::NEG_INFINITY;
                let cells: usize = self.hyp_cards.iter().product();
                for idx in 0..cells {
                    let mut score = mode.one();
                    for ((f, &t), &c) in factors.iter().zip(touches_hyp).zip(&constants) {
                        let v = if t { f.value_at(full) } else { c };
                        score = match mode {
                            NumericMode::Linear => score * v,
                            NumericMode::Log => score + v,
                        };
                    }
                    if score > best_score {
                        best_score = score;
                        best_idx = idx;
                    }
                    // advance hypothesis odometer, last variable fastest
                    for p in (0..k).rev() {
                        state[p] += 1;
                        if state[p] < self.hyp_cards[p] {
                            full[self.hyp[p]] = state[p];
                            break;
                        }
                        state[p] = 0;
                        full[self.hyp[p]] = 0;
                    }
                }
                Ok(best_idx)
            }
            OracleKind::Eliminate => {
                let table = eliminate(fg, clamped, &self.hyp, None, cfg)?;
                Ok(table.argmax().0)
            }
        }
    }
}

fn others_of(q: &MapQuery, target: VarId) -> Result<Vec<VarId>> {
    if !q.intermediates.contains(&target) {
        return Err(Error::validation(format!(
            "variable {target} is not an intermediate of this query"
        )));
    }
    Ok(q.intermediates
        .iter()
        .copied()
        .filter(|&v| v != target)
        .collect())
}

fn estimate_with_oracle(
    fg: &FactorGraph,
    q: &MapQuery,
    oracle: &ArgmaxOracle,
    target: VarId,
    samples: u32,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<RelevanceEstimate> {
    if samples == 0 {
        return Err(Error::validation("sample count must be positive".to_string()));
    }
    let others = others_of(q, target)?;
    let other_cards: Vec<usize> = others.iter().map(|&v| fg.cardinality(v)).collect();
    let target_card = fg.cardinality(target);
    let mut rng = rng_from(seed);
    let mut full = vec![0usize; fg.n_vars()];
    for (v, s) in q.evidence.iter() {
        full[v] = s;
    }
    let mut flips = 0u32;
    let needs_assignment = matches!(oracle.kind, OracleKind::Eliminate);
    for _ in 0..samples {
        let mut clamped = q.evidence.clone();
        for (pos, &v) in others.iter().enumerate() {
            let s = rng.gen_range(0..other_cards[pos]);
            full[v] = s;
            if needs_assignment {
                clamped.set(v, s);
            }
        }
        let mut first = 0usize;
        for t_state in 0..target_card {
            full[target] = t_state;
            if needs_assignment {
                clamped.set(target, t_state);
            }
            let arg = oracle.best_hypothesis(fg, &mut full, &clamped, cfg)?;
            if t_state == 0 {
                first = arg;
            } else if arg != first {
                flips += 1;
                break;
            }
        }
    }
    Ok(RelevanceEstimate {
        var: target,
        flips,
        samples,
    })
}

/// Estimate the intrinsic relevance of `target` by sampling joint states
/// of the other intermediates uniformly. Deterministic per seed.
pub fn estimate_relevance(
    fg: &FactorGraph,
    q: &MapQuery,
    target: VarId,
    samples: u32,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<RelevanceEstimate> {
    let oracle = ArgmaxOracle::new(fg, q, cfg)?;
    estimate_with_oracle(fg, q, &oracle, target, samples, seed, cfg)
}

/// Estimate the relevance of every intermediate variable (concurrently;
/// each variable draws from its own seed stream, so the result does not
/// depend on scheduling) and assemble the table.
pub fn precompute_table(
    fg: &FactorGraph,
    q: &MapQuery,
    samples_per_var: u32,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<RelevanceTable> {
    let oracle = ArgmaxOracle::new(fg, q, cfg)?;
    let rows: Vec<RelevanceEstimate> = q
        .intermediates
        .par_iter()
        .map(|&t| {
            estimate_with_oracle(
                fg,
                q,
                &oracle,
                t,
                samples_per_var,
                split_seed_indexed(seed, "relevance", t as u64),
                cfg,
            )
        })
        .collect::<Result<_>>()?;
    let mut hypothesis = q.hypothesis.clone();
    hypothesis.sort_unstable();
    let evidence_vars: Vec<VarId> = q.evidence.vars().collect();
    let meta = format!(
        "measure=uniform;evidence={}",
        q.evidence.to_string().replace(';', ",")
    );
    Ok(RelevanceTable {
        network_hash: fg.content_hash(),
        hypothesis,
        evidence_vars,
        budget: samples_per_var,
        seed,
        meta,
        rows,
    })
}

/// Split the query's intermediates by thresholding a precomputed table.
/// The table must have been built for the same hypothesis set, evidence
/// variables and intermediates.
pub fn partition_from_table(
    table: &RelevanceTable,
    q: &MapQuery,
    threshold: f64,
) -> Result<Partition> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::validation(format!(
            "relevance threshold must lie in [0, 1], got {threshold}"
        )));
    }
    let mut q_hyp = q.hypothesis.clone();
    q_hyp.sort_unstable();
    if q_hyp != table.hypothesis {
        return Err(Error::validation(
            "relevance table was built for a different hypothesis set".to_string(),
        ));
    }
    let q_ev: Vec<VarId> = q.evidence.vars().collect();
    if q_ev != table.evidence_vars {
        return Err(Error::validation(
            "relevance table was built for different evidence variables".to_string(),
        ));
    }
    let table_vars: Vec<VarId> = table.rows.iter().map(|r| r.var).collect();
    let mut q_int = q.intermediates.clone();
    q_int.sort_unstable();
    if table_vars != q_int {
        return Err(Error::validation(
            "relevance table does not cover the query's intermediates exactly".to_string(),
        ));
    }
    let mut relevant = Vec::new();
    let mut irrelevant = Vec::new();
    for row in &table.rows {
        if row.relevance() >= threshold {
            relevant.push(row.var);
        } else {
            irrelevant.push(row.var);
        }
    }
    Partition::new(relevant, irrelevant)
}

/// Partition by a quick estimate computed inside the solver call: three
/// samples per variable, and any observed flip marks the variable
/// relevant.
pub fn on_the_fly_partition(
    fg: &FactorGraph,
    q: &MapQuery,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<Partition> {
    let oracle = ArgmaxOracle::new(fg, q, cfg)?;
    let estimates: Vec<RelevanceEstimate> = q
        .intermediates
        .par_iter()
        .map(|&t| {
            estimate_with_oracle(
                fg,
                q,
                &oracle,
                t,
                ON_THE_FLY_SAMPLES,
                split_seed_indexed(seed, "relevance-otf", t as u64),
                cfg,
            )
        })
        .collect::<Result<_>>()?;
    let mut relevant = Vec::new();
    let mut irrelevant = Vec::new();
    for est in estimates {
        if est.flips > 0 {
            relevant.push(est.var);
        } else {
            irrelevant.push(est.var);
        }
    }
    Partition::new(relevant, irrelevant)
}

/// Exact intrinsic relevance by full enumeration of the other
/// intermediates' joint states. Guarded: refuses enumerations beyond
/// 2^20 joint states.
pub fn exact_relevance(
    fg: &FactorGraph,
    q: &MapQuery,
    target: VarId,
    cfg: &EngineConfig,
) -> Result<f64> {
    let others = others_of(q, target)?;
    let other_cards: Vec<usize> = others.iter().map(|&v| fg.cardinality(v)).collect();
    let states: u128 = other_cards.iter().map(|&c| c as u128).product();
    if states > 1 << 20 {
        return Err(Error::resource(format!(
            "exact relevance would enumerate {states} joint states (limit 2^20)"
        )));
    }
    let oracle = ArgmaxOracle::new(fg, q, cfg)?;
    let target_card = fg.cardinality(target);
    let mut full = vec![0usize; fg.n_vars()];
    for (v, s) in q.evidence.iter() {
        full[v] = s;
    }
    let needs_assignment = matches!(oracle.kind, OracleKind::Eliminate);
    let mut state = vec![0usize; others.len()];
    for &v in &others {
        full[v] = 0;
    }
    let mut flips = 0u64;
    let total = states as u64;
    for _ in 0..total {
        let mut clamped = q.evidence.clone();
        if needs_assignment {
            for (pos, &v) in others.iter().enumerate() {
                clamped.set(v, state[pos]);
            }
        }
        let mut first = 0usize;
        for t_state in 0..target_card {
            full[target] = t_state;
            if needs_assignment {
                clamped.set(target, t_state);
            }
            let arg = oracle.best_hypothesis(fg, &mut full, &clamped, cfg)?;
            if t_state == 0 {
                first = arg;
            } else if arg != first {
                flips += 1;
                break;
            }
        }
        for p in (0..others.len()).rev() {
            state[p] += 1;
            if state[p] < other_cards[p] {
                full[others[p]] = state[p];
                break;
            }
            state[p] = 0;
            full[others[p]] = 0;
        }
    }
    Ok(flips as f64 / total as f64)
}
