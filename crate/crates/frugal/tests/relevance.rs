//! Intrinsic-relevance estimation: soundness on constructed networks,
//! agreement with enumeration, and the monitoring-network case study.

mod common;

use common::{load_network, monitoring_case_evidence, monitoring_hypothesis, random_network,
    random_query, GenOpts};
use frugal::engine::EngineConfig;
use frugal::model::{Cpt, Network, Variable};
use frugal::relevance::{
    estimate_relevance, exact_relevance, partition_from_table, precompute_table,
    read_table_string, write_table_string, DEFAULT_RELEVANCE_THRESHOLD,
};
use frugal::solvers::MapQuery;

/// H -> M -> L where M copies H (almost) and L copies M: M decides the
/// best H, so its relevance is 1; an extra disconnected D has none.
fn probe_network() -> Network {
    let bin = |name: &str, id| Variable {
        id,
        name: name.into(),
        states: vec!["f".into(), "t".into()],
    };
    let vars = vec![bin("H", 0), bin("M", 1), bin("L", 2), bin("D", 3)];
    let cpts = vec![
        Cpt { child: 0, parents: vec![], table: vec![0.5, 0.5] },
        Cpt { child: 1, parents: vec![0], table: vec![0.99, 0.01, 0.01, 0.99] },
        Cpt { child: 2, parents: vec![1], table: vec![0.9, 0.1, 0.2, 0.8] },
        Cpt { child: 3, parents: vec![], table: vec![0.5, 0.5] },
    ];
    Network::new(vars, cpts).unwrap()
}

#[test]
fn decisive_and_disconnected_variables_bracket_the_scale() {
    let net = probe_network();
    let fg = net.to_factor_graph();
    let cfg = EngineConfig::default();
    let q = MapQuery::new(&fg, vec![0], frugal::model::Assignment::new()).unwrap();
    let m = estimate_relevance(&fg, &q, 1, 1000, 42, &cfg).unwrap();
    assert_eq!(m.relevance(), 1.0, "M decides the best H in every sample");
    let d = estimate_relevance(&fg, &q, 3, 1000, 42, &cfg).unwrap();
    assert_eq!(d.relevance(), 0.0, "D shares no factor with anything");
    assert_eq!(exact_relevance(&fg, &q, 1, &cfg).unwrap(), 1.0);
    assert_eq!(exact_relevance(&fg, &q, 3, &cfg).unwrap(), 0.0);
}

#[test]
fn sampling_tracks_enumeration_on_random_instances() {
    let cfg = EngineConfig::default();
    let opts = GenOpts { max_vars: 8, ..Default::default() };
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 30 {
        seed += 1;
        let net = random_network(seed, &opts);
        let fg = net.to_factor_graph();
        let (hyp, ev) = random_query(&net, seed ^ 0x5151);
        let q = match MapQuery::new(&fg, hyp, ev) {
            Ok(q) => q,
            Err(_) => continue,
        };
        let Some(&target) = q.intermediates.first() else {
            continue;
        };
        let exact = exact_relevance(&fg, &q, target, &cfg).unwrap();
        let est = estimate_relevance(&fg, &q, target, 1000, seed, &cfg).unwrap();
        assert!(
            (est.relevance() - exact).abs() <= 0.05,
            "seed {seed}: sampled {} vs exact {}",
            est.relevance(),
            exact
        );
        checked += 1;
    }
}

#[test]
fn estimates_are_reproducible_and_budget_exact() {
    let net = load_network("alarm.bif").patch_determinism(1e-9).unwrap();
    let fg = net.to_factor_graph();
    let cfg = EngineConfig::default();
    let q = MapQuery::new(&fg, monitoring_hypothesis(&net), monitoring_case_evidence(&net))
        .unwrap();
    let target = q.intermediates[0];
    let a = estimate_relevance(&fg, &q, target, 250, 9, &cfg).unwrap();
    let b = estimate_relevance(&fg, &q, target, 250, 9, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.samples, 250);
    assert!(a.flips <= a.samples);
}

/// The worked diagnostic case: with the full measurement evidence of the
/// case study, the four variables on the volume/ventilation pathways are
/// unambiguously relevant at the default threshold.
#[test]
fn monitoring_case_flags_the_ventilation_and_volume_pathways() {
    let net = load_network("alarm.bif").patch_determinism(1e-9).unwrap();
    let fg = net.to_factor_graph();
    let cfg = EngineConfig::default();
    let q = MapQuery::new(&fg, monitoring_hypothesis(&net), monitoring_case_evidence(&net))
        .unwrap();
    let table = precompute_table(&fg, &q, 1000, 20260823, &cfg).unwrap();
    let part = partition_from_table(&table, &q, DEFAULT_RELEVANCE_THRESHOLD).unwrap();
    for name in ["LVEDVOLUME", "STROKEVOLUME", "VENTTUBE", "VENTALV"] {
        let v = net.var_by_name(name).unwrap();
        assert!(
            part.relevant().contains(&v),
            "{name} must be relevant in the worked case"
        );
        let row = table.rows.iter().find(|r| r.var == v).unwrap();
        assert!(
            row.relevance() >= 0.5,
            "{name} relevance {} unexpectedly low",
            row.relevance()
        );
    }
    // never the whole intermediate set: sampling something is the point
    assert!(!part.irrelevant().is_empty());
}

/// Shape of the reduced problem in the worked case when exactly the four
/// pathway variables are marginalized: after instantiating evidence and
/// the sampled variables, the biggest remaining factor has 24 entries
/// over {INTUBATION, KINKEDTUBE, VENTTUBE}.
#[test]
fn monitoring_case_reduced_problem_shape() {
    let net = load_network("alarm.bif");
    let fg = net.to_factor_graph();
    let relevant: Vec<_> = ["LVEDVOLUME", "STROKEVOLUME", "VENTTUBE", "VENTALV"]
        .iter()
        .map(|n| net.var_by_name(n).unwrap())
        .collect();
    let hyp = monitoring_hypothesis(&net);
    let evidence = monitoring_case_evidence(&net);
    // clamped: evidence plus every intermediate outside the relevant set
    let clamped: Vec<bool> = (0..net.n_vars())
        .map(|v| {
            evidence.contains(v) || (!hyp.contains(&v) && !relevant.contains(&v))
        })
        .collect();
    let mut best_cells = 0usize;
    let mut best_scope: Vec<String> = vec![];
    for f in fg.factors() {
        let free: Vec<_> = f.scope().iter().copied().filter(|&v| !clamped[v]).collect();
        let cells: usize = free.iter().map(|&v| fg.cardinality(v)).product();
        if cells > best_cells {
            best_cells = cells;
            best_scope = free.iter().map(|&v| net.variable(v).name.clone()).collect();
        }
    }
    best_scope.sort();
    assert_eq!(best_cells, 24);
    assert_eq!(best_scope, ["INTUBATION", "KINKEDTUBE", "VENTTUBE"]);
}

#[test]
fn tables_round_trip_with_hash_validation() {
    let net = load_network("alarm.bif").patch_determinism(1e-9).unwrap();
    let fg = net.to_factor_graph();
    let cfg = EngineConfig::default();
    let q = MapQuery::new(&fg, monitoring_hypothesis(&net), monitoring_case_evidence(&net))
        .unwrap();
    let table = precompute_table(&fg, &q, 25, 5, &cfg).unwrap();
    let text = write_table_string(&table);
    let back = read_table_string(&text, Some(&fg.content_hash())).unwrap();
    assert_eq!(back, table);
    // a different graph's hash must be rejected
    let other = load_network("alarm.bif").to_factor_graph();
    assert_ne!(other.content_hash(), fg.content_hash());
    assert!(read_table_string(&text, Some(&other.content_hash())).is_err());
    // and a partition from the reloaded table matches the original
    assert_eq!(
        partition_from_table(&back, &q, 0.1).unwrap(),
        partition_from_table(&table, &q, 0.1).unwrap()
    );
}
