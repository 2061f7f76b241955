//! Shared integration-test helpers: seeded random networks and queries.
//!
//! The generator is intentionally simple and fully determined by its
//! seed: variable count, cardinalities, parent sets and CPT entries all
//! come from one `ChaCha8` stream, so failing cases can be replayed by
//! seed alone.

#![allow(dead_code)] // each integration test binary uses a subset

use std::path::{Path, PathBuf};

use frugal::model::{parse_bif, Assignment, Cpt, Network, VarId, Variable};
use frugal::seed::rng_from;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Absolute path of a vendored benchmark network, independent of the
/// working directory the test binary runs from.
pub fn network_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../networks")
        .join(name)
}

pub fn load_network(name: &str) -> Network {
    let text = std::fs::read_to_string(network_path(name))
        .unwrap_or_else(|e| panic!("reading {name}: {e}"));
    parse_bif(&text).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}

/// Protocol files shipped with the workspace.
pub fn protocol_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../protocols")
        .join(name)
}

#[derive(Debug, Clone)]
pub struct GenOpts {
    pub min_vars: usize,
    pub max_vars: usize,
    pub max_card: usize,
    /// Probability of an edge from each earlier variable (capped at
    /// `max_parents` parents).
    pub edge_prob: f64,
    pub max_parents: usize,
    /// Probability that a CPT entry is a hard zero before normalization;
    /// at least one entry per row always stays positive.
    pub zero_prob: f64,
}

impl Default for GenOpts {
    fn default() -> Self {
        GenOpts {
            min_vars: 2,
            max_vars: 12,
            max_card: 4,
            edge_prob: 0.35,
            max_parents: 3,
            zero_prob: 0.0,
        }
    }
}

/// A random DAG over `V0..Vn` with edges only from lower to higher ids.
pub fn random_network(seed: u64, opts: &GenOpts) -> Network {
    let mut rng = rng_from(seed);
    let n = rng.gen_range(opts.min_vars..=opts.max_vars);
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=opts.max_card)).collect();

    let mut variables = Vec::with_capacity(n);
    let mut cpts = Vec::with_capacity(n);
    for v in 0..n {
        let states = (0..cards[v]).map(|s| format!("s{s}")).collect();
        variables.push(Variable { id: v, name: format!("V{v}"), states });

        let mut parents: Vec<VarId> = Vec::new();
        for p in 0..v {
            if parents.len() < opts.max_parents && rng.gen_bool(opts.edge_prob) {
                parents.push(p);
            }
        }
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        let mut table = Vec::with_capacity(rows * cards[v]);
        for _ in 0..rows {
            let mut row: Vec<f64> = (0..cards[v])
                .map(|_| {
                    if opts.zero_prob > 0.0 && rng.gen_bool(opts.zero_prob) {
                        0.0
                    } else {
                        rng.gen_range(0.05..1.0)
                    }
                })
                .collect();
            if row.iter().all(|&x| x == 0.0) {
                let k = rng.gen_range(0..row.len());
                row[k] = 1.0;
            }
            let sum: f64 = row.iter().sum();
            for x in &mut row {
                *x /= sum;
            }
            table.extend(row);
        }
        cpts.push(Cpt { child: v, parents, table });
    }
    Network::new(variables, cpts).expect("generated network must validate")
}

/// A random MAP query on `net`: a non-empty hypothesis set, a disjoint
/// evidence assignment (states uniform), the rest intermediate.
pub fn random_query(net: &Network, seed: u64) -> (Vec<VarId>, Assignment) {
    let mut rng = rng_from(seed);
    let n = net.n_vars();
    let mut ids: Vec<VarId> = (0..n).collect();
    // Fisher-Yates so hypothesis/evidence picks are unbiased
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        ids.swap(i, j);
    }
    let n_hyp = rng.gen_range(1..=n.min(4));
    let n_ev = rng.gen_range(0..=(n - n_hyp).min(4));
    let hyp = ids[..n_hyp].to_vec();
    let ev = Assignment::from_pairs(
        ids[n_hyp..n_hyp + n_ev]
            .iter()
            .map(|&v| (v, rng.gen_range(0..net.cardinality(v)))),
    )
    .unwrap();
    (hyp, ev)
}

/// Deterministically derived per-case RNG for tests that need extra draws.
pub fn case_rng(seed: u64) -> StdRng {
    let mut chacha = rng_from(seed);
    StdRng::seed_from_u64(chacha.gen())
}

/// The eight disease variables of the monitoring network, in the
/// conventional significance order.
pub fn monitoring_hypothesis(net: &Network) -> Vec<VarId> {
    [
        "HYPOVOLEMIA",
        "LVFAILURE",
        "ANAPHYLAXIS",
        "INSUFFANESTH",
        "PULMEMBOLUS",
        "INTUBATION",
        "KINKEDTUBE",
        "DISCONNECT",
    ]
    .iter()
    .map(|n| net.var_by_name(n).expect("monitoring network variable"))
    .collect()
}

/// A fixed full observation of the sixteen measurement variables,
/// the worked diagnostic example used in the relevance analysis tests.
pub fn monitoring_case_evidence(net: &Network) -> Assignment {
    let state = |v: &str, s: &str| {
        let vid = net.var_by_name(v).expect("variable");
        let pos = net
            .variable(vid)
            .states
            .iter()
            .position(|x| x == s)
            .expect("state");
        (vid, pos)
    };
    Assignment::from_pairs([
        state("HISTORY", "FALSE"),
        state("CVP", "HIGH"),
        state("PCWP", "HIGH"),
        state("HRBP", "HIGH"),
        state("HREKG", "NORMAL"),
        state("HRSAT", "NORMAL"),
        state("TPR", "HIGH"),
        state("EXPCO2", "HIGH"),
        state("MINVOL", "ZERO"),
        state("FIO2", "LOW"),
        state("SAO2", "LOW"),
        state("PAP", "NORMAL"),
        state("PRESS", "NORMAL"),
        state("MINVOLSET", "LOW"),
        state("CO", "LOW"),
        state("BP", "LOW"),
    ])
    .unwrap()
}
