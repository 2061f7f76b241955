//! Dense factors over discrete variables and the factor-graph container.
//!
//! A [`Factor`] stores a non-negative table over an ordered scope of
//! variables. Linear indices enumerate the scope with the *last* scope
//! variable varying fastest, i.e. index `i` decomposes as a mixed-radix
//! number whose most significant digit belongs to the first scope variable.
//! All algebra (products, marginalization, reduction) lives in the engine
//! module; this file only defines representation and lookup.

use crate::error::{Error, Result};
use crate::model::{VarId, Variable};

/// A dense table over an ordered set of discrete variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    /// Build a factor, validating shape and non-negativity.
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Result<Factor> {
        if scope.len() != cards.len() {
            return Err(Error::validation(format!(
                "factor scope has {} variables but {} cardinalities",
                scope.len(),
                cards.len()
            )));
        }
        let mut seen = scope.to_vec();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != scope.len() {
            return Err(Error::validation(
                "factor scope contains a repeated variable".to_string(),
            ));
        }
        if cards.iter().any(|&c| c == 0) {
            return Err(Error::validation(
                "factor has a zero-cardinality variable".to_string(),
            ));
        }
        let cells: usize = cards.iter().product();
        if values.len() != cells {
            return Err(Error::validation(format!(
                "factor table has {} entries, expected {}",
                values.len(),
                cells
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::validation(
                "factor values must be finite and non-negative".to_string(),
            ));
        }
        Ok(Factor {
            scope,
            cards,
            values,
        })
    }

    /// Build a factor without value checks. Used by the engine for
    /// log-domain tables, whose entries are legitimately negative.
    pub(crate) fn from_raw_parts(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Factor {
        debug_assert_eq!(scope.len(), cards.len());
        debug_assert_eq!(values.len(), cards.iter().product::<usize>());
        Factor {
            scope,
            cards,
            values,
        }
    }

    /// A scalar (empty-scope) factor.
    pub fn scalar(value: f64) -> Factor {
        Factor {
            scope: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Number of table cells.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Position of `v` within the scope, if present.
    pub fn position(&self, v: VarId) -> Option<usize> {
        self.scope.iter().position(|&s| s == v)
    }

    /// Stride of the scope position `pos`: how far the linear index moves
    /// when that variable's state increments by one.
    pub fn stride(&self, pos: usize) -> usize {
        self.cards[pos + 1..].iter().product()
    }

    /// All strides, indexed by scope position.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.cards.len()];
        for i in (0..self.cards.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.cards[i + 1];
        }
        s
    }

    /// Linear index of a per-position state vector.
    pub fn index_of(&self, states: &[usize]) -> usize {
        debug_assert_eq!(states.len(), self.scope.len());
        let mut idx = 0usize;
        for (pos, &s) in states.iter().enumerate() {
            debug_assert!(s < self.cards[pos]);
            idx = idx * self.cards[pos] + s;
        }
        idx
    }

    /// Decompose a linear index into per-position states.
    pub fn states_of(&self, mut idx: usize) -> Vec<usize> {
        let mut states = vec![0usize; self.cards.len()];
        for pos in (0..self.cards.len()).rev() {
            states[pos] = idx % self.cards[pos];
            idx /= self.cards[pos];
        }
        states
    }

    /// Look up the value under a full dense assignment (`full[v]` is the
    /// state of variable `v`; entries outside the scope are ignored).
    pub fn value_at(&self, full: &[usize]) -> f64 {
        let mut idx = 0usize;
        for (pos, &v) in self.scope.iter().enumerate() {
            idx = idx * self.cards[pos] + full[v];
        }
        self.values[idx]
    }
}

/// A factor graph: shared variable metadata plus a list of factors.
///
/// Invariants established at construction: every factor scope refers to
/// declared variables with matching cardinalities, and every variable
/// occurs in at least one factor scope.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    variables: Vec<Variable>,
    factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn new(variables: Vec<Variable>, factors: Vec<Factor>) -> Result<FactorGraph> {
        let n = variables.len();
        for (i, var) in variables.iter().enumerate() {
            if var.id != i {
                return Err(Error::validation(format!(
                    "variable {} declared at position {}",
                    var.id, i
                )));
            }
        }
        let mut covered = vec![false; n];
        for (fi, f) in factors.iter().enumerate() {
            for (pos, &v) in f.scope().iter().enumerate() {
                if v >= n {
                    return Err(Error::validation(format!(
                        "factor {fi} refers to undeclared variable {v}"
                    )));
                }
                if f.cards()[pos] != variables[v].cardinality() {
                    return Err(Error::validation(format!(
                        "factor {fi} gives variable {v} cardinality {}, declared {}",
                        f.cards()[pos],
                        variables[v].cardinality()
                    )));
                }
                covered[v] = true;
            }
        }
        if let Some(v) = covered.iter().position(|&c| !c) {
            return Err(Error::validation(format!(
                "variable {v} appears in no factor scope"
            )));
        }
        Ok(FactorGraph { variables, factors })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn cardinality(&self, v: VarId) -> usize {
        self.variables[v].cardinality()
    }

    /// Cardinalities of all variables, indexed by id.
    pub fn all_cards(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality()).collect()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Hex digest identifying this graph's exact content (structure and
    /// numeric tables). Artifacts derived from a graph embed this digest so
    /// stale combinations are rejected at load time.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = crate::model::fg_text::write_fg_string(self);
        let digest = Sha256::digest(text.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}
