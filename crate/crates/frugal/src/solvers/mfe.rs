//! The sampled most-frugal-explanation solver.
//!
//! Given a partition of the intermediate variables into a relevant set
//! (marginalized exactly) and an irrelevant set (clamped to sampled
//! states), each iteration draws one joint state for the irrelevant
//! variables, solves the much smaller induced MAP problem, and tallies
//! the resulting explanation. The modal explanation over all iterations
//! is returned, scored by its true `Pr(h, e)` with *every* intermediate
//! marginalized.

use std::time::Instant;

use rand::Rng;

use crate::engine::{eliminate, EngineConfig};
use crate::error::{Error, Result};
use crate::model::{Assignment, FactorGraph, Network};
use crate::seed::{rng_from, split_seed_indexed};
use crate::solvers::{
    annealed_map, default_schedule, exact_map, AnnealSchedule, MapQuery, MapResult, Partition,
    Score, SolverKind,
};

/// Default number of sampling iterations.
pub const DEFAULT_MFE_SAMPLES: usize = 1;

/// How irrelevant-variable states are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMeasure {
    /// Each irrelevant variable uniform over its states, independently.
    Uniform,
    /// One ancestral sample of the whole network (evidence ignored),
    /// restricted to the irrelevant variables. Requires the originating
    /// network for its topological order and CPTs.
    Prior,
}

/// Which solver handles the induced (reduced) MAP problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSolver {
    Exact,
    /// Annealed inner solver; `None` means the stock schedule scaled to
    /// the hypothesis size.
    Anneal(Option<AnnealSchedule>),
}

/// Knobs for [`sampled_mfe`].
#[derive(Debug, Clone, Copy)]
pub struct MfeOptions<'a> {
    pub n_samples: usize,
    pub inner: InnerSolver,
    pub measure: SamplingMeasure,
    /// Needed only for [`SamplingMeasure::Prior`].
    pub prior_net: Option<&'a Network>,
}

impl Default for MfeOptions<'_> {
    fn default() -> Self {
        MfeOptions {
            n_samples: DEFAULT_MFE_SAMPLES,
            inner: InnerSolver::Exact,
            measure: SamplingMeasure::Uniform,
            prior_net: None,
        }
    }
}

/// Run the sampled most-frugal-explanation procedure.
///
/// Ties in the final tally resolve to the explanation that *reached* the
/// winning count first. Deterministic for fixed `(seed, options)`; each
/// inner annealing call draws from its own derived stream.
pub fn sampled_mfe(
    fg: &FactorGraph,
    q: &MapQuery,
    partition: &Partition,
    opts: &MfeOptions,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<MapResult> {
    if opts.n_samples == 0 {
        return Err(Error::validation("n_samples must be positive".to_string()));
    }
    partition.validate_for(q)?;
    if opts.measure == SamplingMeasure::Prior && opts.prior_net.is_none() {
        return Err(Error::validation(
            "prior sampling requires the originating network".to_string(),
        ));
    }
    let start = Instant::now();
    let irrelevant = partition.irrelevant();
    let cards: Vec<usize> = irrelevant.iter().map(|&v| fg.cardinality(v)).collect();
    let mut rng = rng_from(split_seed_indexed(seed, "mfe-draw", 0));

    // tally of distinct explanations (hypothesis states in query order)
    let mut tally: Vec<(Vec<usize>, usize)> = Vec::new();
    let mut leader = 0usize;

    for n in 0..opts.n_samples {
        let mut draw = Assignment::new();
        match opts.measure {
            SamplingMeasure::Uniform => {
                for (pos, &v) in irrelevant.iter().enumerate() {
                    draw.set(v, rng.gen_range(0..cards[pos]));
                }
            }
            SamplingMeasure::Prior => {
                let net = opts.prior_net.expect("checked above");
                let full = ancestral_sample(net, &mut rng);
                for &v in irrelevant {
                    draw.set(v, full[v]);
                }
            }
        }
        let inner_q = MapQuery {
            hypothesis: q.hypothesis.clone(),
            evidence: q.evidence.merged(&draw)?,
            intermediates: partition.relevant().to_vec(),
        };
        let inner_result = match opts.inner {
            InnerSolver::Exact => exact_map(fg, &inner_q, cfg)?,
            InnerSolver::Anneal(sched) => {
                let sched = sched.unwrap_or_else(|| default_schedule(q.hypothesis.len()));
                annealed_map(
                    fg,
                    &inner_q,
                    &sched,
                    split_seed_indexed(seed, "mfe-inner", n as u64),
                    cfg,
                )?
            }
        };
        let states: Vec<usize> = q
            .hypothesis
            .iter()
            .map(|&v| {
                inner_result
                    .explanation
                    .get(v)
                    .expect("inner solver answers the full hypothesis")
            })
            .collect();
        let slot = match tally.iter().position(|(s, _)| *s == states) {
            Some(i) => i,
            None => {
                tally.push((states, 0));
                tally.len() - 1
            }
        };
        tally[slot].1 += 1;
        // first explanation to reach the top count stays the leader
        if tally[slot].1 > tally[leader].1 {
            leader = slot;
        }
    }

    let (winner_states, winner_count) = tally[leader].clone();
    let mut explanation = Assignment::new();
    for (pos, &v) in q.hypothesis.iter().enumerate() {
        explanation.set(v, winner_states[pos]);
    }
    // true score of the winner: everything but H marginalized
    let full_evidence = q.evidence.merged(&explanation)?;
    let score_table = eliminate(fg, &full_evidence, &[], None, cfg)?;
    let score = if score_table.is_log() {
        Score::Log(score_table.values()[0])
    } else {
        Score::Linear(score_table.values()[0])
    };

    let solver = match opts.inner {
        InnerSolver::Exact => SolverKind::Mfe,
        InnerSolver::Anneal(_) => SolverKind::MfePlusA,
    };
    Ok(MapResult {
        explanation,
        score,
        solver,
        wall_time: start.elapsed().as_secs_f64(),
        meta: vec![
            ("n_samples".to_string(), opts.n_samples.to_string()),
            ("tally".to_string(), winner_count.to_string()),
            (
                "tally_frac".to_string(),
                format!("{}", winner_count as f64 / opts.n_samples as f64),
            ),
            ("relevant".to_string(), partition.relevant().len().to_string()),
            (
                "irrelevant".to_string(),
                partition.irrelevant().len().to_string(),
            ),
            (
                "inner".to_string(),
                match opts.inner {
                    InnerSolver::Exact => "exact".to_string(),
                    InnerSolver::Anneal(_) => "anneal".to_string(),
                },
            ),
        ],
    })
}

/// One forward sample of every variable, parents first.
pub(crate) fn ancestral_sample(net: &Network, rng: &mut impl Rng) -> Vec<usize> {
    let cards = net.all_cards();
    let mut full = vec![0usize; net.n_vars()];
    for &v in net.topological_order() {
        let row_idx = net.cpt(v).row_index(&cards, &full);
        let row = net.cpt(v).row(&cards, row_idx);
        full[v] = categorical(row, rng);
    }
    full
}

/// Draw an index proportionally to `weights` (which sum to 1).
pub(crate) fn categorical(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
