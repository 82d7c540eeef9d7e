//! The SMDP as a shortest-path problem over open sets and the A* family
//! that solves it.

mod heuristics;
mod oracle;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::instance::Instance;
use crate::model::{evaluate_state, transition_time, EvaluationCache, ModelError, ProfitBoundTable, StateKey};

pub use heuristics::{
    build_delta_context, h_ah1, h_ah2, h_eh1, h_eh2, h_eh3, DeltaCandidate, DeltaLbContext, HeuristicEvaluator,
    HeuristicKind, WeightedBase,
};
pub use oracle::{cost_to_go, oracle_enumerate, ORACLE_MAX_CLOSED};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no schedule reaches the all-open state from {start}")]
    NoSchedule { start: StateKey },
    #[error("{0}")]
    InvalidKind(String),
    #[error("this heuristic needs a profit bound table")]
    MissingBounds,
    #[error("start state {start} is not usable: {reason}")]
    BadStart { start: StateKey, reason: String },
    #[error("the oracle enumerates at most {max} closed stations, got {closed}")]
    OracleGuard { closed: usize, max: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchNode {
    pub state: StateKey,
    pub g: f64,
    pub h: f64,
    pub f: f64,
    pub parent: Option<StateKey>,
    pub generation: u64,
}

/// Priority queue entry: smaller f first, then larger g, then older.
#[derive(Clone, Copy, Debug)]
struct QueueEntry(SearchNode);

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // BinaryHeap pops the greatest element.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .f
            .total_cmp(&self.0.f)
            .then(self.0.g.total_cmp(&other.0.g))
            .then(other.0.generation.cmp(&self.0.generation))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScheduleStep {
    pub state: StateKey,
    /// Station opened on arrival; `None` for the start state.
    pub opened: Option<usize>,
    /// Hours since the start.
    pub arrival: f64,
    pub fleet: f64,
    pub acquisition_cost: f64,
    pub profit: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SearchStats {
    /// Extractions from the queue, re-expansions included.
    pub expanded: u64,
    /// Live queue entries at termination.
    pub remaining: u64,
    /// State LPs solved during this run; cached states are free.
    pub evaluations: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub kind: HeuristicKind,
    pub optimal_time: f64,
    pub schedule: Vec<ScheduleStep>,
    pub stats: SearchStats,
    /// Expanded nodes in extraction order.
    #[serde(skip)]
    pub expansions: Vec<SearchNode>,
}

impl SearchResult {
    /// Plain-text schedule, one line per step.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>4}  {:>7}  {:>14}  {:>10}  {:>14}  state", "step", "opened", "arrival_h", "fleet", "cost");
        for (k, step) in self.schedule.iter().enumerate() {
            let opened = step.opened.map_or_else(|| "-".to_string(), |o| o.to_string());
            let _ = writeln!(
                out,
                "{k:>4}  {opened:>7}  {:>14.4}  {:>10.3}  {:>14.2}  {}",
                step.arrival, step.fleet, step.acquisition_cost, step.state
            );
        }
        let _ = writeln!(
            out,
            "total {:.6} h, expanded {}, remaining {}, evaluations {}, {} ms",
            self.optimal_time,
            self.stats.expanded,
            self.stats.remaining,
            self.stats.evaluations,
            self.stats.elapsed.as_millis()
        );
        out
    }
}

/// Successors of `s`: one per closed station, dropping states without
/// positive profit unless they are the all-open state.
pub fn successors(
    instance: &Instance,
    s: StateKey,
    cache: &mut EvaluationCache,
) -> Result<Vec<(StateKey, f64)>, SearchError> {
    let r = instance.stations;
    let full = StateKey::full(r);
    let mut out = Vec::with_capacity(r - s.len());
    for o in s.closed(r) {
        let t = s.with(o);
        if t != full && !evaluate_state(instance, t, cache)?.is_ok() {
            continue;
        }
        out.push((t, transition_time(instance, s, t, cache)?));
    }
    Ok(out)
}

/// Best-first search from `start` to the all-open state with
/// `f = g + h`, re-opening nodes whenever a cheaper path appears.
///
/// `bounds` is required by every kind except `Zero` and `Ah1`.
pub fn astar(
    instance: &Instance,
    start: StateKey,
    kind: HeuristicKind,
    bounds: Option<&ProfitBoundTable>,
    cache: &mut EvaluationCache,
) -> Result<SearchResult, SearchError> {
    let clock = Instant::now();
    let r = instance.stations;
    let full = StateKey::full(r);
    if start.is_empty() || !start.is_subset_of(full) {
        return Err(SearchError::BadStart { start, reason: "not a nonempty subset of the stations".into() });
    }
    let evals_before = cache.misses();
    let s0 = evaluate_state(instance, start, cache)?;
    if start != full && !s0.is_ok() {
        return Err(SearchError::BadStart { start, reason: format!("profit {} is not positive", s0.profit) });
    }
    let final_cost = evaluate_state(instance, full, cache)?.acquisition_cost;
    let heuristic = HeuristicEvaluator::new(instance, kind, start, final_cost, bounds)?;

    let mut generation = 0u64;
    let mut best: HashMap<StateKey, SearchNode> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let h0 = heuristic.evaluate(instance, start, s0.acquisition_cost, s0.profit)?;
    let root = SearchNode { state: start, g: 0.0, h: h0, f: h0, parent: None, generation };
    best.insert(start, root);
    heap.push(QueueEntry(root));

    let mut expansions = Vec::new();
    let mut goal = None;
    while let Some(QueueEntry(node)) = heap.pop() {
        if best[&node.state].generation != node.generation {
            continue;
        }
        expansions.push(node);
        if node.state == full {
            goal = Some(node);
            break;
        }
        for (t, tau) in successors(instance, node.state, cache)? {
            let g = node.g + tau;
            let h = match best.get(&t) {
                Some(prev) if prev.g <= g => continue,
                Some(prev) => prev.h,
                None => {
                    let e = evaluate_state(instance, t, cache)?;
                    heuristic.evaluate(instance, t, e.acquisition_cost, e.profit)?
                }
            };
            generation += 1;
            let child = SearchNode { state: t, g, h, f: g + h, parent: Some(node.state), generation };
            best.insert(t, child);
            heap.push(QueueEntry(child));
        }
    }
    let Some(goal) = goal else {
        return Err(SearchError::NoSchedule { start });
    };
    let remaining = heap.iter().filter(|e| best[&e.0.state].generation == e.0.generation).count() as u64;

    let mut path = vec![goal.state];
    let mut cursor = goal.parent;
    while let Some(s) = cursor {
        path.push(s);
        cursor = best[&s].parent;
    }
    path.reverse();
    let mut schedule = Vec::with_capacity(path.len());
    let mut prev: Option<StateKey> = None;
    for &s in &path {
        let e = evaluate_state(instance, s, cache)?;
        schedule.push(ScheduleStep {
            state: s,
            opened: prev.map(|p| p.added_in(s).next().expect("consecutive states differ")),
            arrival: best[&s].g,
            fleet: e.fleet,
            acquisition_cost: e.acquisition_cost,
            profit: e.profit,
        });
        prev = Some(s);
    }
    let stats = SearchStats {
        expanded: expansions.len() as u64,
        remaining,
        evaluations: cache.misses() - evals_before,
        elapsed: clock.elapsed(),
    };
    Ok(SearchResult { kind, optimal_time: goal.g, schedule, stats, expansions })
}

/// Total time of a schedule recomputed from transition times.
pub fn schedule_time(
    instance: &Instance,
    schedule: &[ScheduleStep],
    cache: &mut EvaluationCache,
) -> Result<f64, SearchError> {
    let mut total = 0.0;
    for pair in schedule.windows(2) {
        total += transition_time(instance, pair[0].state, pair[1].state, cache)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Balance, GenSpec, Layout};
    use crate::model::{initial_state, profit_bounds, BoundMode, DEFAULT_NODE_LIMIT};

    fn setup(layout: Layout, r: usize, seed: u64) -> (Instance, EvaluationCache, StateKey, ProfitBoundTable) {
        let inst = generate(&GenSpec::new(layout, r, Balance::Balanced, seed)).unwrap();
        let mut cache = EvaluationCache::default();
        let s0 = initial_state(&inst, &mut cache).unwrap().state;
        let tol = *cache.tolerances();
        let bounds = profit_bounds(&inst, BoundMode::LpRelaxation, s0.len(), &tol, DEFAULT_NODE_LIMIT).unwrap();
        (inst, cache, s0, bounds)
    }

    #[test]
    fn successor_counts() {
        let (inst, mut cache, s0, _) = setup(Layout::Quadratic, 9, 1);
        let full = StateKey::full(9);
        assert!(successors(&inst, full, &mut cache).unwrap().is_empty());
        let almost = StateKey(full.0 & !1);
        let succ = successors(&inst, almost, &mut cache).unwrap();
        assert_eq!(succ, vec![(full, transition_time(&inst, almost, full, &mut cache).unwrap())]);
        assert!(successors(&inst, s0, &mut cache).unwrap().len() <= 9 - s0.len());
        for (t, tau) in successors(&inst, s0, &mut cache).unwrap() {
            assert_eq!(t.len(), s0.len() + 1);
            assert!(tau > 0.0);
        }
    }

    #[test]
    fn queue_order_prefers_small_f_then_large_g_then_age() {
        let node = |f: f64, g: f64, generation| SearchNode {
            state: StateKey::EMPTY,
            g,
            h: f - g,
            f,
            parent: None,
            generation,
        };
        let mut heap = BinaryHeap::new();
        for n in [node(2.0, 1.0, 0), node(1.0, 0.5, 1), node(1.0, 0.7, 2), node(1.0, 0.7, 3)] {
            heap.push(QueueEntry(n));
        }
        let order: Vec<u64> = std::iter::from_fn(|| heap.pop().map(|e| e.0.generation)).collect();
        assert_eq!(order, vec![2, 3, 1, 0]);
    }

    #[test]
    fn start_at_the_goal() {
        let (inst, mut cache, _, bounds) = setup(Layout::Hexagonal, 7, 2);
        let full = StateKey::full(7);
        let res = astar(&inst, full, HeuristicKind::Eh2, Some(&bounds), &mut cache).unwrap();
        assert_eq!(res.optimal_time, 0.0);
        assert_eq!(res.stats.expanded, 1);
        assert_eq!(res.schedule.len(), 1);
        assert_eq!(res.schedule[0].opened, None);
    }

    #[test]
    fn exact_kinds_agree_and_schedules_are_consistent() {
        let (inst, mut cache, s0, bounds) = setup(Layout::Quadratic, 9, 4);
        let reference = oracle_enumerate(&inst, s0, &mut cache).unwrap();
        for kind in [HeuristicKind::Zero, HeuristicKind::Eh1, HeuristicKind::Eh2, HeuristicKind::Eh3] {
            let res = astar(&inst, s0, kind, Some(&bounds), &mut cache).unwrap();
            assert!((res.optimal_time - reference).abs() <= 1e-9 * reference, "{kind}");
            assert_eq!(res.schedule.first().unwrap().state, s0);
            assert_eq!(res.schedule.last().unwrap().state, StateKey::full(9));
            for w in res.schedule.windows(2) {
                assert_eq!(w[0].state.added_in(w[1].state).count(), 1);
                assert_eq!(w[1].state.len(), w[0].state.len() + 1);
                assert!(w[1].arrival > w[0].arrival);
            }
            let total = schedule_time(&inst, &res.schedule, &mut cache).unwrap();
            assert!((total - res.optimal_time).abs() <= 1e-9 * total);
        }
    }

    #[test]
    fn weighted_runs_stay_within_their_factor() {
        let (inst, mut cache, s0, bounds) = setup(Layout::Quadratic, 9, 6);
        let exact = astar(&inst, s0, HeuristicKind::Eh2, Some(&bounds), &mut cache).unwrap().optimal_time;
        for base in [WeightedBase::Eh2, WeightedBase::Eh3] {
            for w in [1.05, 1.1, 2.0] {
                let kind = HeuristicKind::Weighted { base, w };
                let t = astar(&inst, s0, kind, Some(&bounds), &mut cache).unwrap().optimal_time;
                assert!(t >= exact * (1.0 - 1e-12) && t <= w * exact * (1.0 + 1e-12), "{kind}: {t} vs {exact}");
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let (inst, _, s0, bounds) = setup(Layout::Circular, 7, 3);
        let run = || {
            let mut cache = EvaluationCache::default();
            let mut r = astar(&inst, s0, HeuristicKind::Ah2 { gamma: 0.5 }, Some(&bounds), &mut cache).unwrap();
            r.stats.elapsed = Duration::ZERO;
            r
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn bounded_kinds_need_a_table() {
        let (inst, mut cache, s0, _) = setup(Layout::Circular, 7, 3);
        assert_eq!(astar(&inst, s0, HeuristicKind::Eh1, None, &mut cache), Err(SearchError::MissingBounds));
        assert!(astar(&inst, s0, HeuristicKind::Ah1, None, &mut cache).is_ok());
        assert!(matches!(
            astar(&inst, StateKey::from_stations([0]), HeuristicKind::Zero, None, &mut cache),
            Err(SearchError::BadStart { .. })
        ));
    }

    #[test]
    fn report_lists_every_step() {
        let (inst, mut cache, s0, _) = setup(Layout::Circular, 7, 3);
        let res = astar(&inst, s0, HeuristicKind::Zero, None, &mut cache).unwrap();
        let text = res.report();
        assert_eq!(text.lines().count(), res.schedule.len() + 2);
        assert!(text.lines().last().unwrap().starts_with("total "));
    }
}
