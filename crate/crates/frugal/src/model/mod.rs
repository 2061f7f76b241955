//! Network representation: variables, CPTs, assignments and conversion to
//! factor graphs.
//!
//! A [`Network`] is a directed acyclic graph of discrete variables with one
//! conditional probability table per variable. Variable ids are positions
//! in declaration order (the order of `variable` blocks in the source
//! file); state indices are positions in each variable's declared state
//! list. Nothing is ever sorted or renamed, so ids and state indices are
//! stable across load/convert round trips.

mod bif;
mod factor;
pub mod fg_text;

pub use bif::parse_bif;
pub use factor::{Factor, FactorGraph};
pub use fg_text::{read_fg, write_fg};

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Variable identifier: the position of the variable in declaration order.
pub type VarId = usize;

/// Maximum tolerated deviation of a CPT row sum from 1 when loading.
/// Rows within tolerance are renormalized to sum to 1 exactly.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Default epsilon used when patching deterministic CPT rows.
pub const DEFAULT_PATCH_EPSILON: f64 = 1e-9;

/// A discrete variable: a name and an ordered list of state labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    /// Index of a state label, if declared.
    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// A partial assignment of states to variables.
///
/// Stored sorted by variable id with no duplicates; iteration order is
/// therefore deterministic regardless of insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pairs: Vec<(VarId, usize)>,
}

impl Assignment {
    pub fn new() -> Assignment {
        Assignment { pairs: Vec::new() }
    }

    /// Build from pairs, rejecting duplicate variables.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, usize)>) -> Result<Assignment> {
        let mut a = Assignment::new();
        for (v, s) in pairs {
            if a.get(v).is_some() {
                return Err(Error::validation(format!(
                    "variable {v} assigned more than once"
                )));
            }
            a.set(v, s);
        }
        Ok(a)
    }

    /// Set (or overwrite) the state of a variable.
    pub fn set(&mut self, v: VarId, state: usize) {
        match self.pairs.binary_search_by_key(&v, |p| p.0) {
            Ok(i) => self.pairs[i].1 = state,
            Err(i) => self.pairs.insert(i, (v, state)),
        }
    }

    pub fn get(&self, v: VarId) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&v, |p| p.0)
            .ok()
            .map(|i| self.pairs[i].1)
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.get(v).is_some()
    }

    /// Pairs in ascending variable order.
    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.pairs.iter().map(|p| p.0)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Union with another assignment; the variable sets must be disjoint.
    pub fn merged(&self, other: &Assignment) -> Result<Assignment> {
        let mut out = self.clone();
        for (v, s) in other.iter() {
            if out.contains(v) {
                return Err(Error::validation(format!(
                    "variable {v} present in both assignments"
                )));
            }
            out.set(v, s);
        }
        Ok(out)
    }

    /// Render as `name=state` pairs joined by `;`, using graph metadata.
    pub fn display_with(&self, vars: &[Variable]) -> String {
        let mut parts = Vec::with_capacity(self.pairs.len());
        for (v, s) in self.iter() {
            parts.push(format!("{}={}", vars[v].name, vars[v].states[s]));
        }
        parts.join(";")
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(v, s)| format!("{v}={s}")).collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// A conditional probability table `Pr(child | parents)`.
///
/// `table` is row-major: one row per parent configuration, each row listing
/// the child-state probabilities in declared state order. Parent
/// configurations are enumerated with the *last* parent varying fastest,
/// matching the row order of `probability` blocks in the source format.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub table: Vec<f64>,
}

impl Cpt {
    /// Number of parent configurations (rows).
    pub fn n_rows(&self, cards: &[usize]) -> usize {
        self.parents.iter().map(|&p| cards[p]).product()
    }

    /// Row index for a full dense assignment of the parents.
    pub fn row_index(&self, cards: &[usize], full: &[usize]) -> usize {
        let mut idx = 0usize;
        for &p in &self.parents {
            idx = idx * cards[p] + full[p];
        }
        idx
    }

    /// Probability of `child = state` under the parent states in `full`.
    pub fn prob(&self, cards: &[usize], full: &[usize], state: usize) -> f64 {
        let w = cards[self.child];
        self.table[self.row_index(cards, full) * w + state]
    }

    /// Borrow the row for a parent configuration index.
    pub fn row(&self, cards: &[usize], row_idx: usize) -> &[f64] {
        let w = cards[self.child];
        &self.table[row_idx * w..(row_idx + 1) * w]
    }
}

/// A discrete Bayesian network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
    topo: Vec<VarId>,
    children: Vec<Vec<VarId>>,
    by_name: HashMap<String, VarId>,
}

impl Network {
    /// Assemble and validate a network.
    ///
    /// `cpts` must contain exactly one table per variable (any order).
    /// Rows may deviate from unit sum by at most [`ROW_SUM_TOLERANCE`] and
    /// are renormalized to sum to 1 exactly.
    pub fn new(variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Network> {
        let n = variables.len();
        if n == 0 {
            return Err(Error::validation("network has no variables".to_string()));
        }
        for (i, var) in variables.iter().enumerate() {
            if var.id != i {
                return Err(Error::validation(format!(
                    "variable {} declared at position {}",
                    var.id, i
                )));
            }
            if var.states.is_empty() {
                return Err(Error::validation(format!(
                    "variable {} has no states",
                    var.name
                )));
            }
        }
        let mut by_name = HashMap::with_capacity(n);
        for var in &variables {
            if by_name.insert(var.name.clone(), var.id).is_some() {
                return Err(Error::validation(format!(
                    "duplicate variable name {}",
                    var.name
                )));
            }
        }
        let cards: Vec<usize> = variables.iter().map(|v| v.cardinality()).collect();

        let mut slots: Vec<Option<Cpt>> = (0..n).map(|_| None).collect();
        for cpt in cpts {
            let child = cpt.child;
            if child >= n {
                return Err(Error::validation(format!(
                    "probability table for undeclared variable {child}"
                )));
            }
            if slots[child].is_some() {
                return Err(Error::validation(format!(
                    "duplicate probability table for {}",
                    variables[child].name
                )));
            }
            for &p in &cpt.parents {
                if p >= n {
                    return Err(Error::validation(format!(
                        "table for {} names undeclared parent {p}",
                        variables[child].name
                    )));
                }
                if p == child {
                    return Err(Error::validation(format!(
                        "{} listed as its own parent",
                        variables[child].name
                    )));
                }
            }
            let mut ps = cpt.parents.clone();
            ps.sort_unstable();
            ps.dedup();
            if ps.len() != cpt.parents.len() {
                return Err(Error::validation(format!(
                    "table for {} repeats a parent",
                    variables[child].name
                )));
            }
            let rows = cpt.n_rows(&cards);
            let w = cards[child];
            if cpt.table.len() != rows * w {
                return Err(Error::validation(format!(
                    "table for {} has {} entries, expected {}",
                    variables[child].name,
                    cpt.table.len(),
                    rows * w
                )));
            }
            let mut cpt = cpt;
            for r in 0..rows {
                let row = &mut cpt.table[r * w..(r + 1) * w];
                let mut sum = 0.0;
                for &v in row.iter() {
                    if !v.is_finite() || v < 0.0 || v > 1.0 + ROW_SUM_TOLERANCE {
                        return Err(Error::validation(format!(
                            "table for {} row {} has entry {} outside [0, 1]",
                            variables[child].name, r, v
                        )));
                    }
                    sum += v;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::validation(format!(
                        "table for {} row {} sums to {} (deviation beyond {})",
                        variables[child].name, r, sum, ROW_SUM_TOLERANCE
                    )));
                }
                for v in row.iter_mut() {
                    *v /= sum;
                }
            }
            slots[child] = Some(cpt);
        }
        let mut tables = Vec::with_capacity(n);
        for (i, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(c) => tables.push(c),
                None => {
                    return Err(Error::validation(format!(
                        "no probability table for {}",
                        variables[i].name
                    )))
                }
            }
        }

        let mut children: Vec<Vec<VarId>> = vec![Vec::new(); n];
        for cpt in &tables {
            for &p in &cpt.parents {
                children[p].push(cpt.child);
            }
        }
        for ch in &mut children {
            ch.sort_unstable();
        }
        let topo = topological_order(n, &tables, &children, &variables)?;

        Ok(Network {
            variables,
            cpts: tables,
            topo,
            children,
            by_name,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v]
    }

    pub fn cardinality(&self, v: VarId) -> usize {
        self.variables[v].cardinality()
    }

    pub fn all_cards(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality()).collect()
    }

    pub fn cpt(&self, v: VarId) -> &Cpt {
        &self.cpts[v]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn parents(&self, v: VarId) -> &[VarId] {
        &self.cpts[v].parents
    }

    pub fn children(&self, v: VarId) -> &[VarId] {
        &self.children[v]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    /// Total number of arcs.
    pub fn arc_count(&self) -> usize {
        self.cpts.iter().map(|c| c.parents.len()).sum()
    }

    /// Parentless variables, in declaration order.
    pub fn roots(&self) -> Vec<VarId> {
        (0..self.n_vars())
            .filter(|&v| self.parents(v).is_empty())
            .collect()
    }

    /// Childless variables that have at least one parent, in declaration
    /// order. Isolated variables (no parents and no children) count as
    /// roots, not leaves.
    pub fn leaves(&self) -> Vec<VarId> {
        (0..self.n_vars())
            .filter(|&v| self.children(v).is_empty() && !self.parents(v).is_empty())
            .collect()
    }

    /// A topological order (parents before children), deterministic: among
    /// ready variables the lowest id is emitted first.
    pub fn topological_order(&self) -> &[VarId] {
        &self.topo
    }

    /// Joint probability of a full assignment (chain rule).
    pub fn joint_prob(&self, full: &[usize]) -> f64 {
        let cards = self.all_cards();
        let mut p = 1.0;
        for cpt in &self.cpts {
            p *= cpt.prob(&cards, full, full[cpt.child]);
        }
        p
    }

    /// Replace deterministic table entries: every 0 becomes `epsilon`, and
    /// the added mass is removed in equal parts from the row's maximal
    /// entries, so each row still sums to 1. Rows without zeros are
    /// untouched. Returns the patched network; `self` is unchanged.
    pub fn patch_determinism(&self, epsilon: f64) -> Result<Network> {
        if !(epsilon > 0.0) || epsilon >= 1e-3 {
            return Err(Error::validation(format!(
                "patch epsilon must be in (0, 1e-3), got {epsilon}"
            )));
        }
        let cards = self.all_cards();
        let mut out = self.clone();
        for cpt in &mut out.cpts {
            let w = cards[cpt.child];
            let rows = cpt.table.len() / w;
            for r in 0..rows {
                let row = &mut cpt.table[r * w..(r + 1) * w];
                let zeros = row.iter().filter(|&&v| v == 0.0).count();
                if zeros == 0 {
                    continue;
                }
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let n_max = row.iter().filter(|&&v| v == max).count();
                let added = epsilon * zeros as f64;
                let removed = added / n_max as f64;
                for v in row.iter_mut() {
                    if *v == 0.0 {
                        *v = epsilon;
                    } else if *v == max {
                        *v -= removed;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Convert to a factor graph: one factor per variable with scope
    /// `parents ++ [child]`. Because CPT rows enumerate parent
    /// configurations with the last parent fastest and each row lists child
    /// states in order, the CPT table is already laid out in the factor's
    /// linear-index order and is moved in unchanged.
    pub fn to_factor_graph(&self) -> FactorGraph {
        let cards = self.all_cards();
        let mut factors = Vec::with_capacity(self.n_vars());
        for cpt in &self.cpts {
            let mut scope = cpt.parents.clone();
            scope.push(cpt.child);
            let fc: Vec<usize> = scope.iter().map(|&v| cards[v]).collect();
            factors.push(
                Factor::new(scope, fc, cpt.table.clone())
                    .expect("CPT layout always forms a valid factor"),
            );
        }
        FactorGraph::new(self.variables.clone(), factors)
            .expect("network conversion always covers every variable")
    }

    /// Content digest of the converted factor graph.
    pub fn content_hash(&self) -> String {
        self.to_factor_graph().content_hash()
    }
}

fn topological_order(
    n: usize,
    cpts: &[Cpt],
    children: &[Vec<VarId>],
    variables: &[Variable],
) -> Result<Vec<VarId>> {
    let mut indeg: Vec<usize> = cpts.iter().map(|c| c.parents.len()).collect();
    let mut ready: std::collections::BTreeSet<VarId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != n {
        let stuck: Vec<&str> = (0..n)
            .filter(|&v| indeg[v] > 0)
            .map(|v| variables[v].name.as_str())
            .collect();
        return Err(Error::validation(format!(
            "network contains a cycle through {{{}}}",
            stuck.join(", ")
        )));
    }
    Ok(order)
}
