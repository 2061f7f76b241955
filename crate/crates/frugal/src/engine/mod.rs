//! Exact inference engine: factor algebra, variable elimination and the
//! enumeration oracle.

pub mod algebra;
mod brute;
pub(crate) mod elim;

pub use algebra::{
    marginalize, max_out, multiply, reduce, sum_out, to_log_domain, try_combine, NumericMode,
};
pub use brute::{brute_force_joint, BRUTE_FORCE_STATE_LIMIT};
pub use elim::{
    eliminate, eliminate_with_stats, min_degree_order, ElimStats, EliminationOrder, EngineConfig,
    JointTable, ModeChoice, DEFAULT_CELL_BUDGET, LOG_MODE_VAR_THRESHOLD,
};
