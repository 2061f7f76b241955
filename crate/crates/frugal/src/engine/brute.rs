//! Brute-force joint computation by full enumeration.
//!
//! Deliberately naive and deliberately independent of the factor-graph
//! machinery: probabilities come straight from the network's CPTs via the
//! chain rule, one full assignment at a time. This is the ground-truth
//! oracle the elimination engine is checked against, and the reference
//! implementation for explanation ranks on small hypothesis spaces.

use crate::engine::elim::JointTable;
use crate::error::{Error, Result};
use crate::model::{Assignment, Factor, Network, VarId};

/// Enumeration guard: refuse instances with more free joint states.
pub const BRUTE_FORCE_STATE_LIMIT: u64 = 1 << 26;

/// Compute the unnormalized joint `Pr(retain = x, evidence)` by summing
/// chain-rule products over every assignment of the free variables.
pub fn brute_force_joint(
    net: &Network,
    evidence: &Assignment,
    retain: &[VarId],
) -> Result<JointTable> {
    let n = net.n_vars();
    let cards = net.all_cards();
    for (v, s) in evidence.iter() {
        if v >= n {
            return Err(Error::validation(format!(
                "evidence on undeclared variable {v}"
            )));
        }
        if s >= cards[v] {
            return Err(Error::validation(format!(
                "evidence state {s} out of range for {}",
                net.variable(v).name
            )));
        }
    }
    let mut seen = vec![false; n];
    for &v in retain {
        if v >= n {
            return Err(Error::validation(format!(
                "cannot retain undeclared variable {v}"
            )));
        }
        if seen[v] || evidence.contains(v) {
            return Err(Error::validation(format!(
                "variable {} retained twice or also observed",
                net.variable(v).name
            )));
        }
        seen[v] = true;
    }

    let free: Vec<VarId> = (0..n).filter(|&v| !evidence.contains(v)).collect();
    let states: u128 = free.iter().map(|&v| cards[v] as u128).product();
    if states > BRUTE_FORCE_STATE_LIMIT as u128 {
        return Err(Error::resource(format!(
            "brute force over {states} joint states exceeds the limit of {BRUTE_FORCE_STATE_LIMIT}"
        )));
    }

    let retain_cards: Vec<usize> = retain.iter().map(|&v| cards[v]).collect();
    let cells: usize = retain_cards.iter().product();
    let mut values = vec![0.0f64; cells];

    let mut full = vec![0usize; n];
    for (v, s) in evidence.iter() {
        full[v] = s;
    }
    let total = states as usize;
    for _ in 0..total {
        let mut cell = 0usize;
        for (pos, &v) in retain.iter().enumerate() {
            cell = cell * retain_cards[pos] + full[v];
        }
        values[cell] += net.joint_prob(&full);
        // odometer over the free variables, last one fastest
        for &v in free.iter().rev() {
            full[v] += 1;
            if full[v] < cards[v] {
                break;
            }
            full[v] = 0;
        }
    }

    Ok(JointTable::from_factor(
        Factor::from_raw_parts(retain.to_vec(), retain_cards, values),
        false,
    ))
}
