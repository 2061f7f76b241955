//! Variable elimination over factor graphs.
//!
//! [`eliminate`] reduces all factors by the evidence, sums out every
//! variable that is neither retained nor observed (bucket by bucket,
//! following an elimination order), and assembles the remaining factors
//! into a dense [`JointTable`] over the retained variables. Each table
//! cell holds the unnormalized joint value `Pr(retain = x, evidence)` —
//! or its logarithm in log mode.
//!
//! Orders come from the caller or from iterated minimum degree on the
//! interaction graph; every intermediate allocation is checked against
//! the configured cell budget first.

use crate::engine::algebra::{
    check_budget, marginalize, reduce, to_log_domain, try_combine, NumericMode,
};
use crate::error::{Error, Result};
use crate::model::{Assignment, Factor, FactorGraph, VarId};

/// Default maximum number of cells any single table may allocate.
pub const DEFAULT_CELL_BUDGET: u64 = 500_000_000;

/// Networks larger than this default to log-domain arithmetic.
pub const LOG_MODE_VAR_THRESHOLD: usize = 100;

/// Engine-wide knobs threaded through every solver.
#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    pub mode: ModeChoice,
    pub cell_budget: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: ModeChoice::Auto,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

/// Numeric-domain selection: forced, or keyed on network size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    /// Log domain for graphs with more than [`LOG_MODE_VAR_THRESHOLD`]
    /// variables, linear otherwise.
    Auto,
    Linear,
    Log,
}

impl EngineConfig {
    /// The numeric mode this configuration selects for `fg`.
    pub fn mode_for(&self, fg: &FactorGraph) -> NumericMode {
        match self.mode {
            ModeChoice::Linear => NumericMode::Linear,
            ModeChoice::Log => NumericMode::Log,
            ModeChoice::Auto => {
                if fg.n_vars() > LOG_MODE_VAR_THRESHOLD {
                    NumericMode::Log
                } else {
                    NumericMode::Linear
                }
            }
        }
    }
}

/// An explicit variable elimination order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationOrder(pub Vec<VarId>);

/// Size measurements collected while eliminating.
#[derive(Debug, Clone, Copy, Default)]
pub struct ElimStats {
    /// Largest scope (variable count) of any intermediate factor.
    pub max_scope: usize,
    /// Largest cell count of any intermediate factor.
    pub max_cells: usize,
}

impl ElimStats {
    fn observe(&mut self, f: &Factor) {
        self.max_scope = self.max_scope.max(f.scope().len());
        self.max_cells = self.max_cells.max(f.len());
    }
}

/// Dense joint table produced by elimination.
#[derive(Debug, Clone)]
pub struct JointTable {
    factor: Factor,
    log_domain: bool,
    normalized: bool,
}

impl JointTable {
    pub(crate) fn from_factor(factor: Factor, log_domain: bool) -> JointTable {
        JointTable {
            factor,
            log_domain,
            normalized: false,
        }
    }

    pub fn scope(&self) -> &[VarId] {
        self.factor.scope()
    }

    pub fn cards(&self) -> &[usize] {
        self.factor.cards()
    }

    pub fn values(&self) -> &[f64] {
        self.factor.values()
    }

    pub fn len(&self) -> usize {
        self.factor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.is_empty()
    }

    pub fn is_log(&self) -> bool {
        self.log_domain
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Natural logarithm of the cell value at `idx`.
    pub fn log_value(&self, idx: usize) -> f64 {
        let v = self.factor.values()[idx];
        if self.log_domain {
            v
        } else {
            v.ln()
        }
    }

    /// Index of the maximal cell; ties resolve to the lowest linear
    /// index, i.e. the lexicographically first retained-variable states
    /// with the first retained variable most significant.
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = 0usize;
        let mut best_v = f64::NEG_INFINITY;
        for (i, &v) in self.factor.values().iter().enumerate() {
            if v > best_v {
                best = i;
                best_v = v;
            }
        }
        (best, best_v)
    }

    /// Decompose a linear index into an assignment of the scope.
    pub fn assignment_at(&self, idx: usize) -> Assignment {
        let states = self.factor.states_of(idx);
        let mut a = Assignment::new();
        for (pos, &v) in self.factor.scope().iter().enumerate() {
            a.set(v, states[pos]);
        }
        a
    }

    /// Linear index of an assignment that must bind the entire scope.
    pub fn index_of(&self, a: &Assignment) -> Result<usize> {
        let mut states = Vec::with_capacity(self.scope().len());
        for (pos, &v) in self.scope().iter().enumerate() {
            let s = a
                .get(v)
                .ok_or_else(|| Error::validation(format!("assignment misses variable {v}")))?;
            if s >= self.cards()[pos] {
                return Err(Error::validation(format!(
                    "state {s} out of range for variable {v}"
                )));
            }
            states.push(s);
        }
        Ok(self.factor.index_of(&states))
    }

    /// Total mass: `Pr(evidence)` in the table's domain (log-sum-exp when
    /// in log mode).
    pub fn total_mass(&self) -> f64 {
        if self.log_domain {
            let m = self
                .values()
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                m
            } else {
                m + self.values().iter().map(|v| (v - m).exp()).sum::<f64>().ln()
            }
        } else {
            self.values().iter().sum()
        }
    }

    /// Rescale so the table sums to one (in its domain).
    pub fn normalize(&mut self) {
        let total = self.total_mass();
        if self.log_domain {
            for v in self.factor.values_mut() {
                *v -= total;
            }
        } else {
            for v in self.factor.values_mut() {
                *v /= total;
            }
        }
        self.normalized = true;
    }
}

/// Iterated minimum-degree order for `eliminate_vars` on the interaction
/// graph induced by the factor scopes. Ties break toward the lowest
/// variable id, making the order deterministic.
pub fn min_degree_order(fg: &FactorGraph, eliminate_vars: &[VarId]) -> Result<EliminationOrder> {
    let scopes: Vec<Vec<VarId>> = fg.factors().iter().map(|f| f.scope().to_vec()).collect();
    min_degree_order_scopes(fg.n_vars(), &scopes, eliminate_vars)
}

pub(crate) fn min_degree_order_scopes(
    n_vars: usize,
    scopes: &[Vec<VarId>],
    eliminate_vars: &[VarId],
) -> Result<EliminationOrder> {
    let mut is_candidate = vec![false; n_vars];
    for &v in eliminate_vars {
        if v >= n_vars {
            return Err(Error::validation(format!(
                "cannot order undeclared variable {v}"
            )));
        }
        if is_candidate[v] {
            return Err(Error::validation(format!(
                "variable {v} listed twice in elimination set"
            )));
        }
        is_candidate[v] = true;
    }
    let mut adj: Vec<std::collections::BTreeSet<VarId>> = vec![Default::default(); n_vars];
    for scope in scopes {
        for (i, &a) in scope.iter().enumerate() {
            for &b in &scope[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }
    let mut order = Vec::with_capacity(eliminate_vars.len());
    let mut remaining: Vec<VarId> = eliminate_vars.to_vec();
    remaining.sort_unstable();
    while !remaining.is_empty() {
        let (&best, _) = remaining
            .iter()
            .map(|v| (v, adj[*v].len()))
            .min_by_key(|&(v, d)| (d, *v))
            .expect("remaining is non-empty");
        // connect the neighborhood (fill-in), then remove the variable
        let neighbors: Vec<VarId> = adj[best].iter().copied().collect();
        for (i, &a) in neighbors.iter().enumerate() {
            for &b in &neighbors[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        for &nb in &neighbors {
            adj[nb].remove(&best);
        }
        adj[best].clear();
        order.push(best);
        remaining.retain(|&v| v != best);
    }
    Ok(EliminationOrder(order))
}

/// Sum out each variable of `order` from the factor list, product-first.
/// Returns the surviving factors; scopes of survivors are disjoint from
/// the ordered variables.
pub(crate) fn run_buckets(
    mut factors: Vec<Factor>,
    order: &[VarId],
    mode: NumericMode,
    budget: u64,
    stats: &mut ElimStats,
) -> Result<Vec<Factor>> {
    for &v in order {
        let mut bucket = Vec::new();
        let mut rest = Vec::with_capacity(factors.len());
        for f in factors {
            if f.position(v).is_some() {
                bucket.push(f);
            } else {
                rest.push(f);
            }
        }
        let mut iter = bucket.into_iter();
        let first = match iter.next() {
            Some(f) => f,
            None => {
                // cannot happen for factor-graph inputs (every variable
                // occurs in some scope and survives until its own bucket)
                factors = rest;
                continue;
            }
        };
        let product = iter.try_fold(first, |acc, f| {
            let p = try_combine(&acc, &f, mode, budget)?;
            stats.observe(&p);
            Ok::<Factor, Error>(p)
        })?;
        let summed = marginalize(&product, v, mode)?;
        stats.observe(&summed);
        rest.push(summed);
        factors = rest;
    }
    Ok(factors)
}

/// Multiply `factors` (scopes must be subsets of `retain`) into a dense
/// table whose scope is exactly `retain`, in order.
pub(crate) fn assemble_over(
    factors: &[Factor],
    retain: &[VarId],
    retain_cards: &[usize],
    mode: NumericMode,
    budget: u64,
    stats: &mut ElimStats,
) -> Result<Factor> {
    check_budget(retain_cards, budget, "joint table over retained variables")?;
    let cells: usize = retain_cards.iter().product();
    let identity = Factor::from_raw_parts(retain.to_vec(), retain_cards.to_vec(), vec![
            mode.one();
            cells
        ]);
    let mut acc = identity;
    for f in factors {
        debug_assert!(f.scope().iter().all(|v| retain.contains(v)));
        acc = try_combine(&acc, f, mode, budget)?;
        stats.observe(&acc);
    }
    debug_assert_eq!(acc.scope(), retain);
    Ok(acc)
}

fn validate_query(
    fg: &FactorGraph,
    evidence: &Assignment,
    retain: &[VarId],
) -> Result<Vec<VarId>> {
    let n = fg.n_vars();
    for (v, s) in evidence.iter() {
        if v >= n {
            return Err(Error::validation(format!("evidence on undeclared variable {v}")));
        }
        if s >= fg.cardinality(v) {
            return Err(Error::validation(format!(
                "evidence state {s} out of range for {} (cardinality {})",
                fg.variables()[v].name,
                fg.cardinality(v)
            )));
        }
    }
    let mut seen = vec![false; n];
    for &v in retain {
        if v >= n {
            return Err(Error::validation(format!("cannot retain undeclared variable {v}")));
        }
        if seen[v] {
            return Err(Error::validation(format!(
                "variable {} retained twice",
                fg.variables()[v].name
            )));
        }
        if evidence.contains(v) {
            return Err(Error::validation(format!(
                "variable {} is both retained and observed",
                fg.variables()[v].name
            )));
        }
        seen[v] = true;
    }
    Ok((0..n)
        .filter(|&v| !seen[v] && !evidence.contains(v))
        .collect())
}

/// Eliminate every variable outside `retain` and the evidence, returning
/// the joint table over `retain` (in the given order) and size stats.
///
/// `order`, when supplied, must list exactly the eliminated variables;
/// `None` computes an iterated minimum-degree order on the
/// evidence-reduced interaction graph.
pub fn eliminate_with_stats(
    fg: &FactorGraph,
    evidence: &Assignment,
    retain: &[VarId],
    order: Option<&EliminationOrder>,
    cfg: &EngineConfig,
) -> Result<(JointTable, ElimStats)> {
    let to_eliminate = validate_query(fg, evidence, retain)?;
    let mode = cfg.mode_for(fg);
    let mut stats = ElimStats::default();

    let mut factors = Vec::with_capacity(fg.factors().len());
    for f in fg.factors() {
        let r = reduce(f, evidence)?;
        factors.push(if mode == NumericMode::Log {
            to_log_domain(&r)
        } else {
            r
        });
    }

    let order = match order {
        Some(o) => {
            let mut expected = to_eliminate.clone();
            expected.sort_unstable();
            let mut given = o.0.clone();
            given.sort_unstable();
            if expected != given {
                return Err(Error::validation(
                    "elimination order must cover exactly the eliminated variables".to_string(),
                ));
            }
            o.clone()
        }
        None => {
            let scopes: Vec<Vec<VarId>> =
                factors.iter().map(|f| f.scope().to_vec()).collect();
            min_degree_order_scopes(fg.n_vars(), &scopes, &to_eliminate)?
        }
    };

    let remaining = run_buckets(factors, &order.0, mode, cfg.cell_budget, &mut stats)?;
    let retain_cards: Vec<usize> = retain.iter().map(|&v| fg.cardinality(v)).collect();
    let table = assemble_over(
        &remaining,
        retain,
        &retain_cards,
        mode,
        cfg.cell_budget,
        &mut stats,
    )?;
    Ok((
        JointTable {
            factor: table,
            log_domain: mode == NumericMode::Log,
            normalized: false,
        },
        stats,
    ))
}

/// [`eliminate_with_stats`] without the measurements.
pub fn eliminate(
    fg: &FactorGraph,
    evidence: &Assignment,
    retain: &[VarId],
    order: Option<&EliminationOrder>,
    cfg: &EngineConfig,
) -> Result<JointTable> {
    eliminate_with_stats(fg, evidence, retain, order, cfg).map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_bif, Network};

    /// A -> B -> C chain with hand-computable numbers.
    fn chain() -> Network {
        parse_bif(
            "network chain { }
variable A { type discrete [ 2 ] { a0, a1 }; }
variable B { type discrete [ 2 ] { b0, b1 }; }
variable C { type discrete [ 2 ] { c0, c1 }; }
probability ( A ) { table 0.6, 0.4; }
probability ( B | A ) { (a0) 0.9, 0.1; (a1) 0.2, 0.8; }
probability ( C | B ) { (b0) 0.7, 0.3; (b1) 0.5, 0.5; }
",
        )
        .unwrap()
    }

    #[test]
    fn chain_marginal_matches_hand_computation() {
        let fg = chain().to_factor_graph();
        let t = eliminate(&fg, &Assignment::new(), &[2], None, &EngineConfig::default()).unwrap();
        // Pr(B=b0) = 0.6*0.9 + 0.4*0.2 = 0.62
        // Pr(C=c0) = 0.62*0.7 + 0.38*0.5 = 0.624
        assert_eq!(t.scope(), &[2]);
        assert!((t.values()[0] - 0.624).abs() < 1e-12);
        assert!((t.values()[1] - 0.376).abs() < 1e-12);
        assert!((t.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evidence_restricts_mass() {
        let fg = chain().to_factor_graph();
        let e = Assignment::from_pairs([(2, 0)]).unwrap();
        let t = eliminate(&fg, &e, &[0], None, &EngineConfig::default()).unwrap();
        // Pr(A=a0, C=c0) = 0.6 * (0.9*0.7 + 0.1*0.5) = 0.408
        // Pr(A=a1, C=c0) = 0.4 * (0.2*0.7 + 0.8*0.5) = 0.216
        assert!((t.values()[0] - 0.408).abs() < 1e-12);
        assert!((t.values()[1] - 0.216).abs() < 1e-12);
        // total = Pr(C=c0) = 0.624
        assert!((t.total_mass() - 0.624).abs() < 1e-12);
    }

    #[test]
    fn retain_empty_gives_evidence_probability() {
        let fg = chain().to_factor_graph();
        let e = Assignment::from_pairs([(0, 1), (2, 1)]).unwrap();
        let t = eliminate(&fg, &e, &[], None, &EngineConfig::default()).unwrap();
        assert_eq!(t.len(), 1);
        // Pr(A=a1, C=c1) = 0.4 * (0.2*0.3 + 0.8*0.5) = 0.184
        assert!((t.values()[0] - 0.184).abs() < 1e-12);
    }

    #[test]
    fn log_mode_agrees_with_linear() {
        let fg = chain().to_factor_graph();
        let e = Assignment::from_pairs([(2, 0)]).unwrap();
        let lin = eliminate(&fg, &e, &[0, 1], None, &EngineConfig::default()).unwrap();
        let log_cfg = EngineConfig {
            mode: ModeChoice::Log,
            ..Default::default()
        };
        let log = eliminate(&fg, &e, &[0, 1], None, &log_cfg).unwrap();
        assert!(log.is_log());
        for i in 0..lin.len() {
            assert!((lin.log_value(i) - log.log_value(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_order_must_cover_exactly() {
        let fg = chain().to_factor_graph();
        let cfg = EngineConfig::default();
        let order = EliminationOrder(vec![1]);
        assert!(eliminate(&fg, &Assignment::new(), &[0, 2], Some(&order), &cfg).is_ok());
        let wrong = EliminationOrder(vec![1, 2]);
        assert!(eliminate(&fg, &Assignment::new(), &[0, 2], Some(&wrong), &cfg).is_err());
        let empty = EliminationOrder(vec![]);
        assert!(eliminate(&fg, &Assignment::new(), &[0, 2], Some(&empty), &cfg).is_err());
    }

    #[test]
    fn order_choice_does_not_change_values() {
        let fg = chain().to_factor_graph();
        let cfg = EngineConfig::default();
        let a = eliminate(
            &fg,
            &Assignment::new(),
            &[2],
            Some(&EliminationOrder(vec![0, 1])),
            &cfg,
        )
        .unwrap();
        let b = eliminate(
            &fg,
            &Assignment::new(),
            &[2],
            Some(&EliminationOrder(vec![1, 0])),
            &cfg,
        )
        .unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn retained_and_observed_conflict_is_rejected() {
        let fg = chain().to_factor_graph();
        let e = Assignment::from_pairs([(1, 0)]).unwrap();
        let err = eliminate(&fg, &e, &[1], None, &EngineConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        // duplicate retain
        assert!(eliminate(&fg, &Assignment::new(), &[1, 1], None, &EngineConfig::default()).is_err());
    }

    #[test]
    fn budget_exceeded_is_a_resource_error() {
        let fg = chain().to_factor_graph();
        let cfg = EngineConfig {
            cell_budget: 3,
            ..Default::default()
        };
        let err = eliminate(&fg, &Assignment::new(), &[0, 1, 2], None, &cfg).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn min_degree_prefers_low_degree_and_low_id() {
        let fg = chain().to_factor_graph();
        // moral graph of the chain: A-B, B-C; degrees A=1, B=2, C=1.
        // A goes first (degree 1, lowest id); removing it drops B to
        // degree 1, so B then beats C on id.
        let order = min_degree_order(&fg, &[0, 1, 2]).unwrap();
        assert_eq!(order.0, vec![0, 1, 2]);
        // eliminating only the middle variable is allowed
        let mid = min_degree_order(&fg, &[1]).unwrap();
        assert_eq!(mid.0, vec![1]);
        assert!(min_degree_order(&fg, &[0, 0]).is_err());
        assert!(min_degree_order(&fg, &[7]).is_err());
    }

    #[test]
    fn argmax_breaks_ties_toward_lowest_index() {
        let t = JointTable {
            factor: Factor::new(vec![0, 1], vec![2, 2], vec![0.2, 0.4, 0.4, 0.0]).unwrap(),
            log_domain: false,
            normalized: false,
        };
        let (idx, v) = t.argmax();
        assert_eq!(idx, 1);
        assert_eq!(v, 0.4);
        let a = t.assignment_at(idx);
        assert_eq!(a.get(0), Some(0));
        assert_eq!(a.get(1), Some(1));
        assert_eq!(t.index_of(&a).unwrap(), 1);
    }

    #[test]
    fn normalize_in_both_domains() {
        let fg = chain().to_factor_graph();
        let e = Assignment::from_pairs([(2, 0)]).unwrap();
        for mode in [ModeChoice::Linear, ModeChoice::Log] {
            let cfg = EngineConfig {
                mode,
                ..Default::default()
            };
            let mut t = eliminate(&fg, &e, &[0], None, &cfg).unwrap();
            assert!(!t.is_normalized());
            t.normalize();
            assert!(t.is_normalized());
            let total = if t.is_log() {
                t.values().iter().map(|v| v.exp()).sum::<f64>()
            } else {
                t.values().iter().sum::<f64>()
            };
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
