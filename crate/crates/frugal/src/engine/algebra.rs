//! Factor algebra: reduction, products and marginalization.
//!
//! All operations work on dense [`Factor`] tables and come in linear and
//! log-domain flavors where the domain matters. Products and projections
//! walk result cells with a single mixed-radix odometer, maintaining
//! source indices incrementally, so every operation is linear in the size
//! of the tables it touches.

use crate::error::{Error, Result};
use crate::model::{Assignment, Factor, VarId};

/// Numeric domain for engine computations.
///
/// In [`NumericMode::Log`] factor values hold natural logarithms
/// (`ln 0 = -inf`), products become sums and marginalization uses
/// log-sum-exp. Log mode trades speed for immunity to underflow on
/// networks whose joint values fall below the double-precision range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericMode {
    Linear,
    Log,
}

impl NumericMode {
    /// The multiplicative identity in this domain.
    pub fn one(self) -> f64 {
        match self {
            NumericMode::Linear => 1.0,
            NumericMode::Log => 0.0,
        }
    }

    /// Map a linear-domain value into this domain.
    pub fn from_linear(self, v: f64) -> f64 {
        match self {
            NumericMode::Linear => v,
            NumericMode::Log => v.ln(),
        }
    }

    /// Map a value in this domain to its natural logarithm.
    pub fn to_log(self, v: f64) -> f64 {
        match self {
            NumericMode::Linear => v.ln(),
            NumericMode::Log => v,
        }
    }
}

/// Restrict a factor to the cells consistent with `evidence`.
///
/// Scope variables bound by the evidence are dropped; unbound variables
/// keep their order. Evidence on variables outside the scope is ignored.
/// Works identically in both numeric domains.
pub fn reduce(f: &Factor, evidence: &Assignment) -> Result<Factor> {
    let strides = f.strides();
    let mut offset = 0usize;
    let mut kept_scope = Vec::new();
    let mut kept_cards = Vec::new();
    let mut kept_strides = Vec::new();
    for (pos, &v) in f.scope().iter().enumerate() {
        match evidence.get(v) {
            Some(state) => {
                if state >= f.cards()[pos] {
                    return Err(Error::validation(format!(
                        "evidence state {state} out of range for variable {v} (cardinality {})",
                        f.cards()[pos]
                    )));
                }
                offset += state * strides[pos];
            }
            None => {
                kept_scope.push(v);
                kept_cards.push(f.cards()[pos]);
                kept_strides.push(strides[pos]);
            }
        }
    }
    let cells: usize = kept_cards.iter().product();
    let mut values = Vec::with_capacity(cells);
    let k = kept_scope.len();
    let mut state = vec![0usize; k];
    let mut src = offset;
    let fv = f.values();
    for _ in 0..cells {
        values.push(fv[src]);
        for p in (0..k).rev() {
            state[p] += 1;
            if state[p] < kept_cards[p] {
                src += kept_strides[p];
                break;
            }
            state[p] = 0;
            src -= kept_strides[p] * (kept_cards[p] - 1);
        }
    }
    Ok(Factor::from_raw_parts(kept_scope, kept_cards, values))
}

/// Pointwise product over the union scope (linear domain).
///
/// The result scope is `f`'s scope followed by the variables unique to
/// `g`, in their original orders.
pub fn multiply(f: &Factor, g: &Factor) -> Factor {
    try_combine(f, g, NumericMode::Linear, u64::MAX).expect("unbounded multiply cannot overflow")
}

/// Product with a cell budget; [`NumericMode::Log`] adds instead.
pub fn try_combine(f: &Factor, g: &Factor, mode: NumericMode, budget: u64) -> Result<Factor> {
    let mut scope = f.scope().to_vec();
    let mut cards = f.cards().to_vec();
    for (pos, &v) in g.scope().iter().enumerate() {
        if !scope.contains(&v) {
            scope.push(v);
            cards.push(g.cards()[pos]);
        }
    }
    check_budget(&cards, budget, "factor product")?;
    let cells: usize = cards.iter().product();
    let k = scope.len();
    let f_strides = f.strides();
    let g_strides = g.strides();
    let mut sf = vec![0usize; k];
    let mut sg = vec![0usize; k];
    for (p, &v) in scope.iter().enumerate() {
        if let Some(pf) = f.position(v) {
            sf[p] = f_strides[pf];
        }
        if let Some(pg) = g.position(v) {
            sg[p] = g_strides[pg];
        }
    }
    let mut values = Vec::with_capacity(cells);
    let mut state = vec![0usize; k];
    let (mut fi, mut gi) = (0usize, 0usize);
    let fv = f.values();
    let gv = g.values();
    let log = mode == NumericMode::Log;
    for _ in 0..cells {
        values.push(if log { fv[fi] + gv[gi] } else { fv[fi] * gv[gi] });
        for p in (0..k).rev() {
            state[p] += 1;
            if state[p] < cards[p] {
                fi += sf[p];
                gi += sg[p];
                break;
            }
            state[p] = 0;
            fi -= sf[p] * (cards[p] - 1);
            gi -= sg[p] * (cards[p] - 1);
        }
    }
    Ok(Factor::from_raw_parts(scope, cards, values))
}

enum Fold {
    Sum,
    Max,
    LogSumExp,
}

fn project(f: &Factor, var: VarId, fold: Fold) -> Result<Factor> {
    let pos = f
        .position(var)
        .ok_or_else(|| Error::validation(format!("variable {var} not in factor scope")))?;
    let strides = f.strides();
    let vstride = strides[pos];
    let vcard = f.cards()[pos];
    let mut scope = Vec::with_capacity(f.scope().len() - 1);
    let mut cards = Vec::with_capacity(f.scope().len() - 1);
    let mut kept_strides = Vec::with_capacity(f.scope().len() - 1);
    for (p, &v) in f.scope().iter().enumerate() {
        if p != pos {
            scope.push(v);
            cards.push(f.cards()[p]);
            kept_strides.push(strides[p]);
        }
    }
    let cells: usize = cards.iter().product();
    let mut values = Vec::with_capacity(cells);
    let k = scope.len();
    let mut state = vec![0usize; k];
    let mut base = 0usize;
    let fv = f.values();
    for _ in 0..cells {
        let v = match fold {
            Fold::Sum => {
                let mut acc = 0.0;
                for s in 0..vcard {
                    acc += fv[base + s * vstride];
                }
                acc
            }
            Fold::Max => {
                let mut acc = f64::NEG_INFINITY;
                for s in 0..vcard {
                    acc = acc.max(fv[base + s * vstride]);
                }
                acc
            }
            Fold::LogSumExp => {
                let mut m = f64::NEG_INFINITY;
                for s in 0..vcard {
                    m = m.max(fv[base + s * vstride]);
                }
                if m == f64::NEG_INFINITY {
                    m
                } else {
                    let mut acc = 0.0;
                    for s in 0..vcard {
                        acc += (fv[base + s * vstride] - m).exp();
                    }
                    m + acc.ln()
                }
            }
        };
        values.push(v);
        for p in (0..k).rev() {
            state[p] += 1;
            if state[p] < cards[p] {
                base += kept_strides[p];
                break;
            }
            state[p] = 0;
            base -= kept_strides[p] * (cards[p] - 1);
        }
    }
    Ok(Factor::from_raw_parts(scope, cards, values))
}

/// Marginalize `var` out by summation (linear domain).
pub fn sum_out(f: &Factor, var: VarId) -> Result<Factor> {
    project(f, var, Fold::Sum)
}

/// Marginalize `var` out by maximization (domain-independent, since `max`
/// commutes with `ln`).
pub fn max_out(f: &Factor, var: VarId) -> Result<Factor> {
    project(f, var, Fold::Max)
}

/// Marginalize `var` out in the requested domain: summation in linear
/// mode, log-sum-exp in log mode.
pub fn marginalize(f: &Factor, var: VarId, mode: NumericMode) -> Result<Factor> {
    match mode {
        NumericMode::Linear => project(f, var, Fold::Sum),
        NumericMode::Log => project(f, var, Fold::LogSumExp),
    }
}

/// Map a linear-domain factor into the log domain.
pub fn to_log_domain(f: &Factor) -> Factor {
    let values = f.values().iter().map(|&v| v.ln()).collect();
    Factor::from_raw_parts(f.scope().to_vec(), f.cards().to_vec(), values)
}

/// Error unless a table over `cards` fits in `budget` cells.
pub fn check_budget(cards: &[usize], budget: u64, what: &str) -> Result<()> {
    let cells: u128 = cards.iter().map(|&c| c as u128).product();
    if cells > budget as u128 {
        return Err(Error::resource(format!(
            "{what} would allocate {cells} cells, exceeding the budget of {budget}"
        )));
    }
    Ok(())
}
