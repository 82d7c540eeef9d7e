use fleetplan::instance::{generate, Balance, GenSpec, Instance, Layout};
use fleetplan::lp::Tolerances;
use fleetplan::model::{
    evaluate_state, initial_state, profit_bounds, BoundMode, EvaluationCache, ProfitBoundTable, StateKey,
    StateStatus, DEFAULT_NODE_LIMIT,
};
use fleetplan::search::{cost_to_go, HeuristicEvaluator, HeuristicKind};

struct Fixture {
    instance: Instance,
    cache: EvaluationCache,
    start: StateKey,
    bounds: ProfitBoundTable,
    final_cost: f64,
}

fn fixture(layout: Layout, r: usize, balance: Balance, seed: u64) -> Fixture {
    let instance = generate(&GenSpec::new(layout, r, balance, seed)).unwrap();
    let tol = Tolerances::default();
    let mut cache = EvaluationCache::new(tol);
    let start = initial_state(&instance, &mut cache).unwrap().state;
    let bounds = profit_bounds(&instance, BoundMode::LpRelaxation, start.len(), &tol, DEFAULT_NODE_LIMIT).unwrap();
    let final_cost = evaluate_state(&instance, StateKey::full(r), &mut cache).unwrap().acquisition_cost;
    Fixture { instance, cache, start, bounds, final_cost }
}

fn fixtures() -> Vec<Fixture> {
    let mut out = Vec::new();
    for seed in [1, 2, 3] {
        out.push(fixture(Layout::Circular, 7, Balance::Imbalanced, seed));
        out.push(fixture(Layout::Quadratic, 9, Balance::Balanced, seed));
    }
    out
}

impl Fixture {
    fn evaluator(&self, kind: HeuristicKind) -> HeuristicEvaluator {
        HeuristicEvaluator::new(&self.instance, kind, self.start, self.final_cost, Some(&self.bounds)).unwrap()
    }

    /// Reachable supersets of the start with positive profit, or the goal.
    fn states(&mut self) -> Vec<(StateKey, f64, f64)> {
        let r = self.instance.stations;
        let closed: Vec<usize> = self.start.closed(r).collect();
        let mut out = Vec::new();
        for mask in 0u32..1 << closed.len() {
            let s = closed.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).fold(self.start, |s, (_, &o)| s.with(o));
            let eval = evaluate_state(&self.instance, s, &mut self.cache).unwrap();
            if eval.status == StateStatus::Ok || s.len() == r {
                out.push((s, eval.acquisition_cost, eval.profit));
            }
        }
        out
    }
}

#[test]
fn ah1_dominates_eh1_pointwise() {
    for mut fx in fixtures() {
        let (eh1, ah1) = (fx.evaluator(HeuristicKind::Eh1), fx.evaluator(HeuristicKind::Ah1));
        for (s, cost, profit) in fx.states() {
            let a = ah1.evaluate(&fx.instance, s, cost, profit).unwrap();
            let e = eh1.evaluate(&fx.instance, s, cost, profit).unwrap();
            assert!(a >= e - 1e-9 * e.max(1.0), "{} {s}: ah1 {a} < eh1 {e}", fx.instance.name);
        }
    }
}

#[test]
fn eh3_is_weaker_than_eh2() {
    for mut fx in fixtures() {
        let (eh2, eh3) = (fx.evaluator(HeuristicKind::Eh2), fx.evaluator(HeuristicKind::Eh3));
        for (s, cost, profit) in fx.states() {
            let h2 = eh2.evaluate(&fx.instance, s, cost, profit).unwrap();
            let h3 = eh3.evaluate(&fx.instance, s, cost, profit).unwrap();
            assert!(h3 <= h2 + 1e-9 * h2.max(1.0), "{} {s}: eh3 {h3} > eh2 {h2}", fx.instance.name);
            if s == fx.start {
                assert_eq!(h2, h3);
            }
        }
    }
}

#[test]
fn ah1_overestimates_somewhere() {
    let mut witnesses = 0;
    for mut fx in fixtures() {
        let ah1 = fx.evaluator(HeuristicKind::Ah1);
        let truth = cost_to_go(&fx.instance, fx.start, &mut fx.cache).unwrap();
        for (s, cost, profit) in fx.states() {
            let t = truth[&s];
            if t.is_finite() && ah1.evaluate(&fx.instance, s, cost, profit).unwrap() > t + 1e-6 {
                witnesses += 1;
            }
        }
    }
    assert!(witnesses > 0);
}

#[test]
fn profit_grows_along_the_family_subset_lattice() {
    // Checked on the benchmark family instances up to R=16 over every
    // reachable superset of the start state.
    let mut violations = Vec::new();
    for spec in GenSpec::benchmark_family(1).into_iter().filter(|s| s.stations <= 16) {
        let mut fx = fixture(spec.layout, spec.stations, spec.balance, spec.seed);
        let r = fx.instance.stations;
        let states = fx.states();
        let profit: std::collections::HashMap<StateKey, f64> = states.iter().map(|&(s, _, p)| (s, p)).collect();
        for (&s, &p) in &profit {
            for o in s.closed(r) {
                if let Some(&q) = profit.get(&s.with(o)) {
                    if q < p - 1e-9 * p.abs().max(1.0) {
                        violations.push(format!("{} {s} + {o}: {p} -> {q}", fx.instance.name));
                    }
                }
            }
        }
    }
    assert!(violations.is_empty(), "{violations:#?}");
}
