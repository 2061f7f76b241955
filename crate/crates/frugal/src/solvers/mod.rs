//! MAP solvers: exact, annealed, and the sampled most-frugal family.
//!
//! All solvers answer the same question: given evidence `e` over the
//! evidence variables and a designated hypothesis set `H`, find the joint
//! hypothesis assignment maximizing `Pr(H = h, e)`, marginalizing over the
//! remaining (intermediate) variables. They differ in how much of that
//! marginalization they actually perform.

mod anneal;
mod exact;
mod mfe;

pub use anneal::{annealed_map, default_schedule, AnnealSchedule};
pub use exact::{exact_map, exact_map_full};
pub use mfe::{sampled_mfe, InnerSolver, MfeOptions, SamplingMeasure, DEFAULT_MFE_SAMPLES};

pub(crate) use mfe::ancestral_sample;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Assignment, FactorGraph, VarId};

/// A MAP problem instance: hypothesis variables (in significance order),
/// an evidence assignment, and the derived intermediate set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapQuery {
    pub hypothesis: Vec<VarId>,
    pub evidence: Assignment,
    /// Every variable that is neither hypothesis nor evidence, ascending.
    pub intermediates: Vec<VarId>,
}

impl MapQuery {
    /// Validate a hypothesis set and evidence against a graph and derive
    /// the intermediate set.
    ///
    /// The hypothesis order is preserved: it defines explanation
    /// significance for tie-breaking (first variable most significant).
    pub fn new(fg: &FactorGraph, hypothesis: Vec<VarId>, evidence: Assignment) -> Result<MapQuery> {
        let n = fg.n_vars();
        if hypothesis.is_empty() {
            return Err(Error::validation("hypothesis set is empty".to_string()));
        }
        let mut in_h = vec![false; n];
        for &v in &hypothesis {
            if v >= n {
                return Err(Error::validation(format!(
                    "hypothesis names undeclared variable {v}"
                )));
            }
            if in_h[v] {
                return Err(Error::validation(format!(
                    "hypothesis variable {} repeated",
                    fg.variables()[v].name
                )));
            }
            if evidence.contains(v) {
                return Err(Error::validation(format!(
                    "variable {} is both hypothesis and evidence",
                    fg.variables()[v].name
                )));
            }
            in_h[v] = true;
        }
        for (v, s) in evidence.iter() {
            if v >= n {
                return Err(Error::validation(format!(
                    "evidence on undeclared variable {v}"
                )));
            }
            if s >= fg.cardinality(v) {
                return Err(Error::validation(format!(
                    "evidence state {s} out of range for {}",
                    fg.variables()[v].name
                )));
            }
        }
        let intermediates = (0..n)
            .filter(|&v| !in_h[v] && !evidence.contains(v))
            .collect();
        Ok(MapQuery {
            hypothesis,
            evidence,
            intermediates,
        })
    }

    /// Size of the hypothesis space `|Ω(H)|`.
    pub fn hypothesis_space(&self, fg: &FactorGraph) -> u128 {
        self.hypothesis
            .iter()
            .map(|&v| fg.cardinality(v) as u128)
            .product()
    }
}

/// A solver's objective value, kept in the numeric domain it was computed
/// in so linear-mode results stay exact and log-mode results stay finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Linear(f64),
    Log(f64),
}

impl Score {
    /// Natural logarithm of the score.
    pub fn log(&self) -> f64 {
        match *self {
            Score::Linear(v) => v.ln(),
            Score::Log(l) => l,
        }
    }

    /// The score as a plain probability (may underflow to 0 for deep
    /// log-domain values; use [`Score::log`] for comparisons).
    pub fn linear(&self) -> f64 {
        match *self {
            Score::Linear(v) => v,
            Score::Log(l) => l.exp(),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Score::Linear(v) => write!(f, "{v}"),
            Score::Log(l) => write!(f, "exp({l})"),
        }
    }
}

/// Which algorithm produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    /// Exact MAP by variable elimination.
    Map,
    /// Simulated-annealing MAP.
    Ann,
    /// Most frugal explanation with on-the-fly relevance estimation.
    Mfe,
    /// Most frugal explanation with a precomputed relevance table.
    MfePlus,
    /// MFE+ with an annealed inner solver.
    MfePlusA,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Map,
        SolverKind::Ann,
        SolverKind::Mfe,
        SolverKind::MfePlus,
        SolverKind::MfePlusA,
    ];
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolverKind::Map => "map",
            SolverKind::Ann => "ann",
            SolverKind::Mfe => "mfe",
            SolverKind::MfePlus => "mfe+",
            SolverKind::MfePlusA => "mfe+a",
        };
        f.write_str(s)
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<SolverKind> {
        match s {
            "map" => Ok(SolverKind::Map),
            "ann" => Ok(SolverKind::Ann),
            "mfe" => Ok(SolverKind::Mfe),
            "mfe+" => Ok(SolverKind::MfePlus),
            "mfe+a" => Ok(SolverKind::MfePlusA),
            other => Err(Error::validation(format!(
                "unknown solver `{other}` (expected map, ann, mfe, mfe+ or mfe+a)"
            ))),
        }
    }
}

/// The outcome of one solver invocation.
#[derive(Debug, Clone)]
pub struct MapResult {
    /// The explanation: one state per hypothesis variable.
    pub explanation: Assignment,
    /// The solver's claimed `Pr(explanation, evidence)`.
    pub score: Score,
    pub solver: SolverKind,
    /// Wall-clock seconds spent inside the solver call.
    pub wall_time: f64,
    /// Ordered diagnostic key-value pairs (deterministic content only).
    pub meta: Vec<(String, String)>,
}

/// A split of the intermediate variables into relevant (marginalized) and
/// irrelevant (sampled) sets. Both halves are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    relevant: Vec<VarId>,
    irrelevant: Vec<VarId>,
}

impl Partition {
    pub fn new(mut relevant: Vec<VarId>, mut irrelevant: Vec<VarId>) -> Result<Partition> {
        relevant.sort_unstable();
        irrelevant.sort_unstable();
        for w in relevant.windows(2) {
            if w[0] == w[1] {
                return Err(Error::validation(format!("variable {} relevant twice", w[0])));
            }
        }
        for w in irrelevant.windows(2) {
            if w[0] == w[1] {
                return Err(Error::validation(format!(
                    "variable {} irrelevant twice",
                    w[0]
                )));
            }
        }
        if relevant.iter().any(|v| irrelevant.binary_search(v).is_ok()) {
            return Err(Error::validation(
                "a variable appears on both sides of the partition".to_string(),
            ));
        }
        Ok(Partition {
            relevant,
            irrelevant,
        })
    }

    /// The degenerate partition that marginalizes everything.
    pub fn all_relevant(q: &MapQuery) -> Partition {
        Partition {
            relevant: q.intermediates.clone(),
            irrelevant: Vec::new(),
        }
    }

    pub fn relevant(&self) -> &[VarId] {
        &self.relevant
    }

    pub fn irrelevant(&self) -> &[VarId] {
        &self.irrelevant
    }

    /// Error unless the two halves are exactly the query's intermediates.
    pub fn validate_for(&self, q: &MapQuery) -> Result<()> {
        let mut union: Vec<VarId> = self
            .relevant
            .iter()
            .chain(self.irrelevant.iter())
            .copied()
            .collect();
        union.sort_unstable();
        let mut expected = q.intermediates.clone();
        expected.sort_unstable();
        if union != expected {
            return Err(Error::validation(
                "partition does not cover the query's intermediate variables exactly".to_string(),
            ));
        }
        Ok(())
    }
}
