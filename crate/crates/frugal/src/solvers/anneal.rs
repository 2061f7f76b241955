//! MAP by simulated annealing over the hypothesis space.
//!
//! The walk lives on `Ω(H)`: a state is one joint hypothesis assignment,
//! and a proposal re-draws a single variable. The objective
//! `Pr(h, e)` is computed per evaluation by eliminating every
//! intermediate variable with the hypothesis clamped — evidence
//! reduction and the elimination order are prepared once per call, so an
//! evaluation only re-reduces the factors that actually touch `H`.
//!
//! Cooling is geometric. The returned explanation is the best state ever
//! *evaluated* (not the final state of the walk), so a run that wanders
//! through zero-probability territory still reports the best reachable
//! explanation it saw.

use std::time::Instant;

use rand::Rng;

use crate::engine::algebra::{reduce, to_log_domain, NumericMode};
use crate::engine::elim::{min_degree_order_scopes, run_buckets, ElimStats};
use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::model::{Assignment, Factor, FactorGraph, VarId};
use crate::seed::{rng_from, split_seed_indexed};
use crate::solvers::{MapQuery, MapResult, Score, SolverKind};

/// Geometric cooling schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    /// Initial temperature.
    pub t0: f64,
    /// Multiplicative cooling rate per level, in (0, 1).
    pub cooling: f64,
    /// Proposals evaluated at each temperature level.
    pub steps_per_temp: usize,
    /// The walk stops once the temperature falls below this.
    pub t_min: f64,
    /// Independent annealing runs; the best across runs is returned.
    pub restarts: usize,
}

impl AnnealSchedule {
    fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) || !(self.t_min > 0.0) || self.t_min > self.t0 {
            return Err(Error::validation(format!(
                "temperatures must satisfy 0 < t_min <= t0, got t0={} t_min={}",
                self.t0, self.t_min
            )));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::validation(format!(
                "cooling rate must lie in (0, 1), got {}",
                self.cooling
            )));
        }
        if self.steps_per_temp == 0 || self.restarts == 0 {
            return Err(Error::validation(
                "steps_per_temp and restarts must be positive".to_string(),
            ));
        }
        Ok(())
    }

    /// Number of temperature levels the schedule visits.
    pub fn levels(&self) -> usize {
        let mut t = self.t0;
        let mut n = 0usize;
        while t >= self.t_min {
            n += 1;
            t *= self.cooling;
        }
        n
    }
}

/// The stock schedule, scaled to the number of hypothesis variables:
/// `t0 = 2.0`, cooling `0.9` down to `t_min = 0.02`, `10 · |H|` proposals
/// per level, 2 restarts.
pub fn default_schedule(n_hyp_vars: usize) -> AnnealSchedule {
    AnnealSchedule {
        t0: 2.0,
        cooling: 0.9,
        steps_per_temp: 10 * n_hyp_vars.max(1),
        t_min: 0.02,
        restarts: 2,
    }
}

/// Prepared objective `h -> ln Pr(h, e)` for repeated evaluation.
pub(crate) struct Objective {
    untouched: Vec<Factor>,
    touched: Vec<Factor>,
    order: Vec<VarId>,
    mode: NumericMode,
    budget: u64,
    hyp: Vec<VarId>,
    cards: Vec<usize>,
}

impl Objective {
    pub(crate) fn new(fg: &FactorGraph, q: &MapQuery, cfg: &EngineConfig) -> Result<Objective> {
        let mode = cfg.mode_for(fg);
        let mut untouched = Vec::new();
        let mut touched = Vec::new();
        for f in fg.factors() {
            let r = reduce(f, &q.evidence)?;
            let r = if mode == NumericMode::Log {
                to_log_domain(&r)
            } else {
                r
            };
            if r.scope().iter().any(|v| q.hypothesis.contains(v)) {
                touched.push(r);
            } else {
                untouched.push(r);
            }
        }
        // order over the intermediates, computed on scopes as they look
        // during an evaluation (hypothesis variables clamped away)
        let scopes: Vec<Vec<VarId>> = untouched
            .iter()
            .map(|f| f.scope().to_vec())
            .chain(touched.iter().map(|f| {
                f.scope()
                    .iter()
                    .copied()
                    .filter(|v| !q.hypothesis.contains(v))
                    .collect()
            }))
            .collect();
        let order = min_degree_order_scopes(fg.n_vars(), &scopes, &q.intermediates)?;
        Ok(Objective {
            untouched,
            touched,
            order: order.0,
            mode,
            budget: cfg.cell_budget,
            hyp: q.hypothesis.clone(),
            cards: q.hypothesis.iter().map(|&v| fg.cardinality(v)).collect(),
        })
    }

    pub(crate) fn hyp_cards(&self) -> &[usize] {
        &self.cards
    }

    /// `ln Pr(h, e)` for the hypothesis states aligned with the query's
    /// hypothesis order.
    pub(crate) fn eval(&self, h_states: &[usize]) -> Result<f64> {
        let mut h = Assignment::new();
        for (pos, &v) in self.hyp.iter().enumerate() {
            h.set(v, h_states[pos]);
        }
        let mut worklist = self.untouched.clone();
        for f in &self.touched {
            worklist.push(reduce(f, &h)?);
        }
        let mut stats = ElimStats::default();
        let remaining = run_buckets(worklist, &self.order, self.mode, self.budget, &mut stats)?;
        let mut acc = self.mode.one();
        for f in &remaining {
            debug_assert!(f.scope().is_empty(), "non-scalar factor after elimination");
            let v = f.values()[0];
            acc = match self.mode {
                NumericMode::Linear => acc * v,
                NumericMode::Log => acc + v,
            };
        }
        Ok(self.mode.to_log(acc))
    }

    pub(crate) fn mode(&self) -> NumericMode {
        self.mode
    }
}

/// Approximate the MAP query by simulated annealing.
///
/// Deterministic for a fixed `(seed, schedule)`: every run draws from its
/// own derived RNG stream. Ties between equally-scored states keep the
/// state evaluated first.
pub fn annealed_map(
    fg: &FactorGraph,
    q: &MapQuery,
    schedule: &AnnealSchedule,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<MapResult> {
    schedule.validate()?;
    let start = Instant::now();
    let obj = Objective::new(fg, q, cfg)?;
    let cards = obj.hyp_cards().to_vec();
    // positions that can actually change state
    let mutable: Vec<usize> = (0..cards.len()).filter(|&p| cards[p] > 1).collect();

    let mut best_states: Option<Vec<usize>> = None;
    let mut best_log = f64::NEG_INFINITY;
    let mut evals = 0usize;

    for run in 0..schedule.restarts {
        let mut rng = rng_from(split_seed_indexed(seed, "anneal-run", run as u64));
        let mut cur: Vec<usize> = cards.iter().map(|&c| rng.gen_range(0..c)).collect();
        let mut cur_log = obj.eval(&cur)?;
        evals += 1;
        if cur_log > best_log || best_states.is_none() {
            best_log = cur_log;
            best_states = Some(cur.clone());
        }
        if mutable.is_empty() {
            continue; // single-point hypothesis space
        }
        let mut temp = schedule.t0;
        while temp >= schedule.t_min {
            for _ in 0..schedule.steps_per_temp {
                let pos = mutable[rng.gen_range(0..mutable.len())];
                let old_state = cur[pos];
                // draw a different state uniformly
                let r = rng.gen_range(0..cards[pos] - 1);
                cur[pos] = r + usize::from(r >= old_state);
                let new_log = obj.eval(&cur)?;
                evals += 1;
                if new_log > best_log {
                    best_log = new_log;
                    best_states = Some(cur.clone());
                }
                let accept = if new_log >= cur_log {
                    true
                } else {
                    rng.gen::<f64>() < ((new_log - cur_log) / temp).exp()
                };
                if accept {
                    cur_log = new_log;
                } else {
                    cur[pos] = old_state;
                }
            }
            temp *= schedule.cooling;
        }
    }

    let best_states = best_states.expect("at least one run evaluates a state");
    let mut explanation = Assignment::new();
    for (pos, &v) in q.hypothesis.iter().enumerate() {
        explanation.set(v, best_states[pos]);
    }
    let score = match obj.mode() {
        NumericMode::Linear => Score::Linear(best_log.exp()),
        NumericMode::Log => Score::Log(best_log),
    };
    Ok(MapResult {
        explanation,
        score,
        solver: SolverKind::Ann,
        wall_time: start.elapsed().as_secs_f64(),
        meta: vec![
            ("evals".to_string(), evals.to_string()),
            ("restarts".to_string(), schedule.restarts.to_string()),
            ("levels".to_string(), schedule.levels().to_string()),
            (
                "steps_per_temp".to_string(),
                schedule.steps_per_temp.to_string(),
            ),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_bif;
    use crate::solvers::exact_map;

    fn small() -> FactorGraph {
        parse_bif(
            "network s { }
variable A { type discrete [ 3 ] { a0, a1, a2 }; }
variable B { type discrete [ 2 ] { b0, b1 }; }
variable C { type discrete [ 2 ] { c0, c1 }; }
variable D { type discrete [ 3 ] { d0, d1, d2 }; }
probability ( A ) { table 0.5, 0.2, 0.3; }
probability ( B | A ) { (a0) 0.9, 0.1; (a1) 0.3, 0.7; (a2) 0.5, 0.5; }
probability ( C | A ) { (a0) 0.2, 0.8; (a1) 0.6, 0.4; (a2) 0.7, 0.3; }
probability ( D | B, C ) {
  (b0, c0) 0.1, 0.3, 0.6;
  (b0, c1) 0.5, 0.25, 0.25;
  (b1, c0) 0.3, 0.4, 0.3;
  (b1, c1) 0.2, 0.2, 0.6;
}
",
        )
        .unwrap()
        .to_factor_graph()
    }

    #[test]
    fn default_schedule_shape() {
        let s = default_schedule(8);
        assert_eq!(s.steps_per_temp, 80);
        assert_eq!(s.restarts, 2);
        // 2.0 * 0.9^43 = 0.0214 >= 0.02, one more step goes below
        assert_eq!(s.levels(), 44);
        assert!(s.validate().is_ok());
        assert!(AnnealSchedule {
            cooling: 1.5,
            ..default_schedule(1)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn finds_exact_optimum_on_small_space() {
        let fg = small();
        let cfg = EngineConfig::default();
        let e = Assignment::from_pairs([(3, 2)]).unwrap();
        let q = MapQuery::new(&fg, vec![0, 1], e).unwrap();
        let exact = exact_map(&fg, &q, &cfg).unwrap();
        // the space has 6 states and the walk takes thousands of steps:
        // it must find the optimum
        let ann = annealed_map(&fg, &q, &default_schedule(2), 11, &cfg).unwrap();
        assert_eq!(ann.explanation, exact.explanation);
        assert!((ann.score.log() - exact.score.log()).abs() < 1e-9);
        assert_eq!(ann.solver, SolverKind::Ann);
    }

    #[test]
    fn deterministic_per_seed() {
        let fg = small();
        let cfg = EngineConfig::default();
        let q = MapQuery::new(&fg, vec![0, 3], Assignment::from_pairs([(1, 0)]).unwrap()).unwrap();
        let s = default_schedule(2);
        let a = annealed_map(&fg, &q, &s, 123, &cfg).unwrap();
        let b = annealed_map(&fg, &q, &s, 123, &cfg).unwrap();
        assert_eq!(a.explanation, b.explanation);
        assert_eq!(a.score.log(), b.score.log());
        assert_eq!(a.meta, b.meta);
    }

    #[test]
    fn never_stuck_on_zero_probability_states() {
        // B is deterministic given A; evidence on B zeroes out half of
        // the hypothesis space, and some initial states score zero
        let fg = parse_bif(
            "network z { }
variable A { type discrete [ 2 ] { a0, a1 }; }
variable B { type discrete [ 2 ] { b0, b1 }; }
probability ( A ) { table 0.5, 0.5; }
probability ( B | A ) { (a0) 1.0, 0.0; (a1) 0.0, 1.0; }
",
        )
        .unwrap()
        .to_factor_graph();
        let cfg = EngineConfig::default();
        let e = Assignment::from_pairs([(1, 1)]).unwrap();
        let q = MapQuery::new(&fg, vec![0], e).unwrap();
        for seed in 0..20 {
            let r = annealed_map(&fg, &q, &default_schedule(1), seed, &cfg).unwrap();
            // only A=a1 has positive probability under B=b1
            assert_eq!(r.explanation.get(0), Some(1), "seed {seed}");
            assert!(r.score.linear() > 0.0);
        }
    }

    #[test]
    fn log_mode_matches_linear_mode() {
        let fg = small();
        let e = Assignment::from_pairs([(2, 0)]).unwrap();
        let q = MapQuery::new(&fg, vec![0, 1, 3], e).unwrap();
        let lin = annealed_map(&fg, &q, &default_schedule(3), 7, &EngineConfig::default()).unwrap();
        let log_cfg = EngineConfig {
            mode: crate::engine::ModeChoice::Log,
            ..Default::default()
        };
        let log = annealed_map(&fg, &q, &default_schedule(3), 7, &log_cfg).unwrap();
        // identical RNG stream and (up to rounding) identical objective
        assert_eq!(lin.explanation, log.explanation);
        assert!((lin.score.log() - log.score.log()).abs() < 1e-9);
    }
}
