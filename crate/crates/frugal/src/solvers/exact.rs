//! Exact MAP by variable elimination.

use std::time::Instant;

use crate::engine::{eliminate_with_stats, EngineConfig, JointTable, NumericMode};
use crate::error::Result;
use crate::solvers::{MapQuery, MapResult, Score, SolverKind};
use crate::model::FactorGraph;

/// Solve the MAP query exactly and also return the joint table it was
/// read off from (callers use the table for error metrics) along with the
/// elimination stats.
pub fn exact_map_full(
    fg: &FactorGraph,
    q: &MapQuery,
    cfg: &EngineConfig,
) -> Result<(MapResult, JointTable)> {
    let start = Instant::now();
    let (table, stats) =
        eliminate_with_stats(fg, &q.evidence, &q.hypothesis, None, cfg)?;
    let (idx, value) = table.argmax();
    let explanation = table.assignment_at(idx);
    let score = if table.is_log() {
        Score::Log(value)
    } else {
        Score::Linear(value)
    };
    let wall_time = start.elapsed().as_secs_f64();
    let mode = cfg.mode_for(fg);
    let result = MapResult {
        explanation,
        score,
        solver: SolverKind::Map,
        wall_time,
        meta: vec![
            ("cells".to_string(), table.len().to_string()),
            ("max_cells".to_string(), stats.max_cells.to_string()),
            (
                "mode".to_string(),
                match mode {
                    NumericMode::Linear => "linear".to_string(),
                    NumericMode::Log => "log".to_string(),
                },
            ),
        ],
    };
    Ok((result, table))
}

/// Solve the MAP query exactly: maximize `Pr(H = h, e)` over the full
/// hypothesis space, marginalizing every intermediate variable. Ties
/// resolve to the explanation whose states come lexicographically first
/// in hypothesis order (first hypothesis variable most significant).
pub fn exact_map(fg: &FactorGraph, q: &MapQuery, cfg: &EngineConfig) -> Result<MapResult> {
    exact_map_full(fg, q, cfg).map(|(r, _)| r)
}
