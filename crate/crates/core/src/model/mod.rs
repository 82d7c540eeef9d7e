//! State economics: the per-state profit LP, evaluation cache, investment
//! volume and transition time between states, profit bounds per station
//! count and the budget-constrained initial state.

mod bounds;
mod state;
mod state_lp;

use std::collections::HashMap;

use log::warn;
use serde::Serialize;
use thiserror::Error;

use crate::instance::Instance;
use crate::lp::{solve_lexicographic, LpError, LpStatus, Tolerances};

pub use bounds::{
    build_selection_milp, initial_state, profit_bounds, BoundLevel, BoundMode, BoundSource, ProfitBoundTable,
    Selection, SelectionMilp, DEFAULT_NODE_LIMIT,
};
pub use state::StateKey;
pub use state_lp::{build_state_lp, profit_from_flows, residuals, Residuals, StateLp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state {state}: {source}")]
    Lp { state: StateKey, source: LpError },
    #[error("profit bound for {m} open stations: {source}")]
    Bound { m: usize, source: LpError },
    #[error("state {to} does not contain state {from}")]
    NotSubset { from: StateKey, to: StateKey },
    #[error("cannot leave state {state}: profit {profit} is not positive")]
    UndefinedTransition { state: StateKey, profit: f64 },
    #[error("the empty state has no profit LP")]
    EmptyState,
    #[error("budget {budget} cannot fund any open set with positive profit")]
    BudgetInfeasible { budget: f64 },
    #[error("profit bound P_{m} = {value} is not positive")]
    NonpositiveBound { m: usize, value: f64 },
    #[error("no profit bound for {m} open stations in the table")]
    MissingBound { m: usize },
}

impl ModelError {
    /// True for failures of the numerical machinery rather than the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            ModelError::Lp { source, .. } | ModelError::Bound { source, .. } => {
                !matches!(source, LpError::Malformed(_))
            }
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateStatus {
    Ok,
    Infeasible,
    NonpositiveProfit,
}

/// Economics of one open set. Flows are not kept here; see
/// [`evaluate_state_flows`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StateEvaluation {
    pub state: StateKey,
    /// Operational profit p(s) in $/hour.
    pub profit: f64,
    /// Acquisition cost c(s) in $.
    pub acquisition_cost: f64,
    /// Fleet size n(s).
    pub fleet: f64,
    pub status: StateStatus,
}

impl StateEvaluation {
    pub fn is_ok(&self) -> bool {
        self.status == StateStatus::Ok
    }
}

/// A state evaluation with the optimal flows as `R × R` matrices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateFlows {
    pub evaluation: StateEvaluation,
    /// Occupied vehicles in transit, `f[i][j]`.
    pub full: Vec<Vec<f64>>,
    /// Empty vehicles in transit (`i ≠ j`) or idle at `i` (`e[i][i]`).
    pub empty: Vec<Vec<f64>>,
}

/// Memoized state evaluations for one instance under fixed tolerances.
#[derive(Clone, Debug)]
pub struct EvaluationCache {
    tol: Tolerances<f64>,
    map: HashMap<StateKey, StateEvaluation>,
    hits: u64,
    misses: u64,
}

impl EvaluationCache {
    pub fn new(tol: Tolerances<f64>) -> Self {
        Self { tol, map: HashMap::new(), hits: 0, misses: 0 }
    }

    pub fn tolerances(&self) -> &Tolerances<f64> {
        &self.tol
    }

    pub fn get(&self, s: StateKey) -> Option<&StateEvaluation> {
        self.map.get(&s)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// LP solves performed through this cache.
    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn iter(&self) -> impl Iterator<Item = &StateEvaluation> {
        self.map.values()
    }
}

impl Default for EvaluationCache {
    fn default() -> Self {
        Self::new(Tolerances::default())
    }
}

fn solve_state(
    instance: &Instance,
    s: StateKey,
    tol: &Tolerances<f64>,
) -> Result<(StateEvaluation, Option<StateFlows>), ModelError> {
    if s.is_empty() {
        return Err(ModelError::EmptyState);
    }
    let lp = build_state_lp(instance, s);
    let sol = solve_lexicographic(&lp.program, tol).map_err(|source| ModelError::Lp { state: s, source })?;
    if sol.status != LpStatus::Optimal {
        let eval = StateEvaluation {
            state: s,
            profit: f64::NAN,
            acquisition_cost: f64::NAN,
            fleet: f64::NAN,
            status: StateStatus::Infeasible,
        };
        return Ok((eval, None));
    }
    let profit = sol.objective_value;
    let cost = sol.secondary_value.unwrap_or(f64::NAN);
    let station_costs: f64 = s.stations().map(|i| instance.station_cost[i]).sum();
    let fleet = (cost - station_costs) / instance.vehicle_cost;
    let status = if profit <= tol.optimality { StateStatus::NonpositiveProfit } else { StateStatus::Ok };
    let eval = StateEvaluation { state: s, profit, acquisition_cost: cost, fleet, status };
    let (full, empty) = lp.flows(instance.stations, &sol.values);
    Ok((eval, Some(StateFlows { evaluation: eval, full, empty })))
}

/// Evaluates `s` through the cache.
pub fn evaluate_state(
    instance: &Instance,
    s: StateKey,
    cache: &mut EvaluationCache,
) -> Result<StateEvaluation, ModelError> {
    if let Some(eval) = cache.map.get(&s) {
        cache.hits += 1;
        return Ok(*eval);
    }
    let (eval, _) = solve_state(instance, s, &cache.tol)?;
    cache.misses += 1;
    cache.map.insert(s, eval);
    Ok(eval)
}

/// Solves the state LP afresh and returns its flows. `None` for
/// infeasible programs.
pub fn evaluate_state_flows(
    instance: &Instance,
    s: StateKey,
    tol: &Tolerances<f64>,
) -> Result<Option<StateFlows>, ModelError> {
    Ok(solve_state(instance, s, tol)?.1)
}

/// Investment volume C(s, t) = c(t) − c(s), clamped at zero.
pub fn acquisition_delta(
    instance: &Instance,
    s: StateKey,
    t: StateKey,
    cache: &mut EvaluationCache,
) -> Result<f64, ModelError> {
    if !s.is_subset_of(t) {
        return Err(ModelError::NotSubset { from: s, to: t });
    }
    let cs = evaluate_state(instance, s, cache)?.acquisition_cost;
    let ct = evaluate_state(instance, t, cache)?.acquisition_cost;
    Ok(clamp_delta(s, t, ct - cs))
}

pub(crate) fn clamp_delta(s: StateKey, t: StateKey, delta: f64) -> f64 {
    if delta < 0.0 {
        warn!("acquisition cost drops by {} from {s} to {t}; clamped to 0", -delta);
        0.0
    } else {
        delta
    }
}

/// Transition time τ(s, t) = C(s, t) / p(s) in hours.
pub fn transition_time(
    instance: &Instance,
    s: StateKey,
    t: StateKey,
    cache: &mut EvaluationCache,
) -> Result<f64, ModelError> {
    let ps = evaluate_state(instance, s, cache)?.profit;
    if !(ps > cache.tol.optimality) {
        return Err(ModelError::UndefinedTransition { state: s, profit: ps });
    }
    Ok(acquisition_delta(instance, s, t, cache)? / ps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Balance, GenSpec, Layout};

    /// Two stations one km apart with symmetric demand `lam` each way.
    fn symmetric_pair(lam: f64) -> Instance {
        let t = 3.0 / 60.0 + 1.0 / 25.0;
        Instance {
            stations: 2,
            coords: vec![[0.0, 0.0], [1.0, 0.0]],
            lambda: vec![vec![0.0, lam], vec![lam, 0.0]],
            mu: vec![vec![20.0, 1.0 / t], vec![1.0 / t, 20.0]],
            margin: vec![vec![0.0, 0.3], vec![0.3, 0.0]],
            rebalance_cost: vec![vec![0.0, 0.3], vec![0.3, 0.0]],
            station_cost: vec![1200.0, 1700.0],
            vehicle_cost: 1.0,
            service_level: 0.5,
            budget: 1000.0,
            name: "pair".into(),
            seed: 0,
        }
    }

    #[test]
    fn single_station_has_no_profit() {
        let inst = symmetric_pair(50.0);
        let mut cache = EvaluationCache::default();
        let eval = evaluate_state(&inst, StateKey::from_stations([1]), &mut cache).unwrap();
        assert_eq!(eval.status, StateStatus::NonpositiveProfit);
        assert!(eval.profit.abs() < 1e-12);
        assert!((eval.fleet - 1.0).abs() < 1e-9);
        assert!((eval.acquisition_cost - 1701.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_pair_matches_hand_solution() {
        let lam = 50.0;
        let inst = symmetric_pair(lam);
        let mu = inst.mu[0][1];
        let s = StateKey::full(2);
        let flows = evaluate_state_flows(&inst, s, &Tolerances::default()).unwrap().unwrap();
        let eval = flows.evaluation;
        assert!((flows.full[0][1] - lam / mu).abs() < 1e-7);
        assert!((flows.full[1][0] - lam / mu).abs() < 1e-7);
        assert!(flows.empty[0][1].abs() < 1e-7 && flows.empty[1][0].abs() < 1e-7);
        assert!((flows.empty[0][0] - 1.0).abs() < 1e-7 && (flows.empty[1][1] - 1.0).abs() < 1e-7);
        assert!((eval.profit - 0.5 * 2.0 * lam * 0.3).abs() < 1e-7);
        let n = 2.0 * lam / mu + 2.0;
        assert!((eval.fleet - n).abs() < 1e-7);
        assert!((eval.acquisition_cost - (n + 2900.0)).abs() < 1e-7);
    }

    #[test]
    fn cache_is_transparent() {
        let inst = generate(&GenSpec::new(Layout::Circular, 7, Balance::Balanced, 3)).unwrap();
        let mut cache = EvaluationCache::default();
        let s = StateKey::from_stations([0, 2, 5]);
        let first = evaluate_state(&inst, s, &mut cache).unwrap();
        let second = evaluate_state(&inst, s, &mut cache).unwrap();
        let fresh = evaluate_state_flows(&inst, s, cache.tolerances()).unwrap().unwrap().evaluation;
        assert_eq!(first, second);
        assert_eq!(first, fresh);
        assert_eq!((cache.hits(), cache.misses()), (1, 1));
    }

    #[test]
    fn delta_identity_and_telescoping() {
        let inst = generate(&GenSpec::new(Layout::Hexagonal, 7, Balance::Balanced, 2)).unwrap();
        let mut cache = EvaluationCache::default();
        let s = StateKey::from_stations([0, 1]);
        let t = s.with(4);
        let u = t.with(6);
        assert_eq!(acquisition_delta(&inst, s, s, &mut cache).unwrap(), 0.0);
        let su = acquisition_delta(&inst, s, u, &mut cache).unwrap();
        let st = acquisition_delta(&inst, s, t, &mut cache).unwrap();
        let tu = acquisition_delta(&inst, t, u, &mut cache).unwrap();
        assert!((su - (st + tu)).abs() < 1e-9 * su.max(1.0));
        assert!(matches!(acquisition_delta(&inst, t, s, &mut cache), Err(ModelError::NotSubset { .. })));
    }

    #[test]
    fn single_station_addition_from_pair() {
        // Adding a third station at distance 1 from both: C = c^b_new + Δn·c^p.
        let mut inst = symmetric_pair(50.0);
        let t = 3.0 / 60.0 + 1.0 / 25.0;
        inst.stations = 3;
        inst.coords.push([0.5, 3f64.sqrt() / 2.0]);
        inst.lambda = vec![vec![0.0, 50.0, 50.0], vec![50.0, 0.0, 50.0], vec![50.0, 50.0, 0.0]];
        inst.mu = vec![vec![20.0, 1.0 / t, 1.0 / t], vec![1.0 / t, 20.0, 1.0 / t], vec![1.0 / t, 1.0 / t, 20.0]];
        inst.margin = vec![vec![0.0, 0.3, 0.3], vec![0.3, 0.0, 0.3], vec![0.3, 0.3, 0.0]];
        inst.rebalance_cost = inst.margin.clone();
        inst.station_cost.push(2100.0);
        inst.validate().unwrap();
        let mut cache = EvaluationCache::default();
        let pair = StateKey::from_stations([0, 1]);
        let all = StateKey::full(3);
        let n2 = 2.0 * 50.0 * t + 2.0;
        let n3 = 6.0 * 50.0 * t + 3.0;
        let expected = 2100.0 + (n3 - n2);
        let delta = acquisition_delta(&inst, pair, all, &mut cache).unwrap();
        assert!((delta - expected).abs() < 1e-7, "{delta} vs {expected}");
        let tau = transition_time(&inst, pair, all, &mut cache).unwrap();
        assert!((tau - expected / 15.0).abs() < 1e-9);
    }

    #[test]
    fn transition_out_of_unprofitable_state_is_undefined() {
        let inst = symmetric_pair(50.0);
        let mut cache = EvaluationCache::default();
        let err = transition_time(&inst, StateKey::from_stations([0]), StateKey::full(2), &mut cache).unwrap_err();
        assert!(matches!(err, ModelError::UndefinedTransition { .. }));
    }

    #[test]
    fn generated_states_satisfy_the_model() {
        let inst = generate(&GenSpec::new(Layout::Quadratic, 9, Balance::Balanced, 4)).unwrap();
        let tol = Tolerances::default();
        for mask in [0b11u64, 0b1_0101_0101, 0b1_1111_1111, 0b0_1100_0110] {
            let s = StateKey(mask);
            let flows = evaluate_state_flows(&inst, s, &tol).unwrap().unwrap();
            let res = residuals(&inst, s, &flows.full, &flows.empty, flows.evaluation.fleet);
            assert!(res.max() <= 1e-7, "{s}: {res:?}");
            let p = profit_from_flows(&inst, s, &flows.empty);
            assert!((p - flows.evaluation.profit).abs() <= 1e-6 * p.abs().max(1.0));
        }
    }
}
