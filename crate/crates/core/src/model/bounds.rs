use std::fmt;
use std::str::FromStr;

use log::debug;
use serde::Serialize;

use crate::instance::Instance;
use crate::lp::{
    solve_binary_bnb, solve_lexicographic, solve_lp, solve_lp_sequence, BinaryProgram, LexicographicProgram, LinearProgram, LpError,
    LpStatus, Objective, Relation, Sense, Tolerances,
};

use super::{build_state_lp, evaluate_state, EvaluationCache, ModelError, StateEvaluation, StateKey};

/// Branch-and-bound node budget per bound level.
pub const DEFAULT_NODE_LIMIT: usize = 20_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    ExactMilp,
    #[default]
    LpRelaxation,
}

impl BoundMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundMode::ExactMilp => "exact_milp",
            BoundMode::LpRelaxation => "lp_relaxation",
        }
    }
}

impl fmt::Display for BoundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "exact" | "exact_milp" | "milp" => Ok(BoundMode::ExactMilp),
            "relaxation" | "lp_relaxation" | "lp" => Ok(BoundMode::LpRelaxation),
            _ => Err(format!("unknown bound mode {s:?} (expected exact_milp or lp_relaxation)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    /// Proven MILP optimum (or the unique all-open state).
    Exact,
    Relaxation,
    /// Exact mode hit the node limit; the root relaxation is used instead.
    RelaxationFallback,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundLevel {
    pub m: usize,
    pub profit: f64,
    pub source: BoundSource,
}

/// Upper bounds `P_m` on the profit of any state with `m` open stations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfitBoundTable {
    pub mode: BoundMode,
    /// Ascending in `m`, contiguous.
    pub levels: Vec<BoundLevel>,
}

impl ProfitBoundTable {
    pub fn min_level(&self) -> Option<usize> {
        self.levels.first().map(|l| l.m)
    }

    pub fn get(&self, m: usize) -> Option<f64> {
        let first = self.min_level()?;
        self.levels.get(m.checked_sub(first)?).map(|l| l.profit)
    }

    /// `max_{k ≤ m} P_k` over the table: a bound on every state with at
    /// most `m` open stations and at least the table's first level.
    pub fn envelope(&self, m: usize) -> Option<f64> {
        let first = self.min_level()?;
        if m < first || m - first >= self.levels.len() {
            return None;
        }
        self.levels[..=m - first].iter().map(|l| l.profit).reduce(f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selection {
    /// Exactly this many open stations.
    Count(usize),
    /// Fleet and station costs within this budget.
    Budget(f64),
}

/// The station-selection MILP over all stations with its variable layout:
/// `y_i` (open), one `x_ij = x_ji` per unordered pair (both endpoints
/// open), then `e_ij`. Occupied flows are substituted as
/// `f_ij = (λ_ij / μ_ij) x_ij` and `x_ii` is identified with `y_i`.
#[derive(Clone, Debug)]
pub struct SelectionMilp {
    pub program: BinaryProgram<f64>,
    pub stations: usize,
    /// Indices of the rows `Σ y ≤ m` and `Σ y ≥ m` for a count selection.
    pub count_rows: Option<(usize, usize)>,
}

impl SelectionMilp {
    pub fn y(&self, i: usize) -> usize {
        i
    }

    pub fn x(&self, i: usize, j: usize) -> usize {
        x_index(self.stations, i, j)
    }

    pub fn e(&self, i: usize, j: usize) -> usize {
        e_index(self.stations, i, j)
    }

    pub fn open_set(&self, values: &[f64]) -> StateKey {
        StateKey::from_stations((0..self.stations).filter(|&i| values[i] > 0.5))
    }
}

fn x_index(r: usize, i: usize, j: usize) -> usize {
    debug_assert_ne!(i, j);
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    r + a * (2 * r - a - 1) / 2 + (b - a - 1)
}

fn e_index(r: usize, i: usize, j: usize) -> usize {
    r + r * (r - 1) / 2 + i * r + j
}

/// Builds the selection MILP. Big-M values are `λ_ij/μ_ij + Λ/μ_ij` for
/// `i ≠ j` and `α/(1−α) + Λ / min_j μ_ij` on the diagonal, `Λ` being the
/// total demand. Only the `y_i` are branched on: once they are integral the
/// linking rows force every `x_ij = y_i y_j`.
pub fn build_selection_milp(instance: &Instance, selection: Selection) -> SelectionMilp {
    let r = instance.stations;
    let alpha = instance.service_level;
    let n = r + r * (r - 1) / 2 + r * r;
    let (lam, mu) = (&instance.lambda, &instance.mu);
    let x = |i, j| x_index(r, i, j);
    let e = |i, j| e_index(r, i, j);
    let occupied = |i: usize, j: usize| lam[i][j] / mu[i][j];
    let total_demand: f64 = lam.iter().flatten().sum();

    let mut profit = vec![0.0; n];
    let mut cost = vec![0.0; n];
    for i in 0..r {
        cost[i] = instance.station_cost[i];
        for j in 0..r {
            profit[e(i, j)] = -alpha * instance.rebalance_cost[i][j] * mu[i][j];
            cost[e(i, j)] = instance.vehicle_cost;
            if i != j {
                profit[x(i, j)] += alpha * lam[i][j] * instance.margin[i][j];
                cost[x(i, j)] += instance.vehicle_cost * occupied(i, j);
            }
        }
    }
    let mut lp = LinearProgram::new(Objective::new(Sense::Maximize, profit));

    for i in 0..r {
        let others = || (0..r).filter(move |&j| j != i);
        let mut inflow: Vec<(usize, f64)> = others().map(|j| (e(j, i), mu[j][i])).collect();
        inflow.extend(others().map(|j| (x(i, j), -lam[i][j])));
        lp.add_constraint(inflow, Relation::Le, 0.0);

        let mut balance = Vec::with_capacity(4 * (r - 1));
        for j in others() {
            balance.push((x(i, j), lam[i][j]));
            balance.push((x(j, i), -lam[j][i]));
            balance.push((e(i, j), mu[i][j]));
            balance.push((e(j, i), -mu[j][i]));
        }
        lp.add_constraint(balance, Relation::Eq, 0.0);

        lp.add_constraint(vec![(e(i, i), 1.0), (i, -instance.safety_stock())], Relation::Ge, 0.0);
        let slowest = others().map(|j| mu[i][j]).fold(f64::INFINITY, f64::min);
        let diag_m = instance.safety_stock() + total_demand / slowest;
        lp.add_constraint(vec![(e(i, i), 1.0), (i, -diag_m)], Relation::Le, 0.0);
        lp.set_bounds(i, 0.0, Some(1.0));
    }
    for i in 0..r {
        for j in (0..r).filter(|&j| j != i) {
            let big_m = occupied(i, j) + total_demand / mu[i][j];
            lp.add_constraint(vec![(e(i, j), 1.0), (x(i, j), occupied(i, j) - big_m)], Relation::Le, 0.0);
        }
    }
    for i in 0..r {
        for j in i + 1..r {
            lp.add_constraint(vec![(x(i, j), 1.0), (i, -1.0)], Relation::Le, 0.0);
            lp.add_constraint(vec![(x(i, j), 1.0), (j, -1.0)], Relation::Le, 0.0);
            lp.add_constraint(vec![(i, 1.0), (j, 1.0), (x(i, j), -1.0)], Relation::Le, 1.0);
        }
    }
    let mut count_rows = None;
    match selection {
        Selection::Count(m) => {
            // Two inequalities rather than one equality so the level can be
            // moved along a warm-started sequence.
            let k = lp.constraints.len();
            let all: Vec<(usize, f64)> = (0..r).map(|i| (i, 1.0)).collect();
            lp.add_constraint(all.clone(), Relation::Le, m as f64);
            lp.add_constraint(all, Relation::Ge, m as f64);
            count_rows = Some((k, k + 1));
        }
        Selection::Budget(b) => {
            let terms = cost.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(v, &c)| (v, c)).collect();
            lp.add_constraint(terms, Relation::Le, b);
        }
    }

    let program = LexicographicProgram::new(lp, Objective::new(Sense::Minimize, cost));
    SelectionMilp { program: BinaryProgram { program, binaries: (0..r).collect() }, stations: r, count_rows }
}

/// Profit bounds for `m = min_m ..= R`. The all-open level is the state
/// LP of the full set, which is the unique state of that size.
pub fn profit_bounds(
    instance: &Instance,
    mode: BoundMode,
    min_m: usize,
    tol: &Tolerances<f64>,
    node_limit: usize,
) -> Result<ProfitBoundTable, ModelError> {
    let r = instance.stations;
    let min_m = min_m.clamp(1, r);
    let middle: Vec<usize> = (min_m.max(2)..r).collect();
    let mut relaxed = Vec::new();
    if mode == BoundMode::LpRelaxation && !middle.is_empty() {
        // One warm-started sequence over the levels: only the count rows move.
        let milp = build_selection_milp(instance, Selection::Count(middle[0]));
        let (le, ge) = milp.count_rows.expect("count selection");
        let steps: Vec<Vec<(usize, f64)>> = middle.iter().map(|&m| vec![(le, m as f64), (ge, m as f64)]).collect();
        let sols = solve_lp_sequence(&milp.program.program.program, &steps, tol)
            .map_err(|source| ModelError::Bound { m: middle[0], source })?;
        for (&m, sol) in middle.iter().zip(sols) {
            relaxed.push(relaxation_level(m, sol.status, sol.objective_value, BoundSource::Relaxation)?);
        }
    }
    let mut levels = Vec::with_capacity(r + 1 - min_m);
    for m in min_m..=r {
        let level = if m == r {
            let mut cache = EvaluationCache::new(*tol);
            let all = evaluate_state(instance, StateKey::full(r), &mut cache)?;
            BoundLevel { m, profit: all.profit.max(0.0), source: BoundSource::Exact }
        } else if m == 1 {
            BoundLevel { m, profit: 0.0, source: BoundSource::Exact }
        } else if mode == BoundMode::LpRelaxation {
            relaxed[m - middle[0]]
        } else {
            bound_level(instance, m, tol, node_limit)?
        };
        debug!("P_{m} = {} ({:?})", level.profit, level.source);
        levels.push(level);
    }
    Ok(ProfitBoundTable { mode, levels })
}

fn bound_level(instance: &Instance, m: usize, tol: &Tolerances<f64>, node_limit: usize) -> Result<BoundLevel, ModelError> {
    let milp = build_selection_milp(instance, Selection::Count(m));
    let wrap = |source: LpError| ModelError::Bound { m, source };
    match solve_binary_bnb(&milp.program, tol, node_limit) {
        Ok(out) if out.proven_optimal && out.solution.is_optimal() => {
            Ok(BoundLevel { m, profit: out.solution.objective_value, source: BoundSource::Exact })
        }
        Ok(out) if out.relaxation_bound.is_finite() => {
            relaxation_level(m, LpStatus::Optimal, out.relaxation_bound, BoundSource::RelaxationFallback)
        }
        Ok(out) => Err(wrap(LpError::NumericalBreakdown(format!(
            "branch-and-bound ended with status {:?}",
            out.solution.status
        )))),
        Err(LpError::NodeLimit(_)) => {
            let sol = solve_lp(&milp.program.program.program, tol).map_err(wrap)?;
            relaxation_level(m, sol.status, sol.objective_value, BoundSource::RelaxationFallback)
        }
        Err(e) => Err(wrap(e)),
    }
}

fn relaxation_level(m: usize, status: LpStatus, value: f64, source: BoundSource) -> Result<BoundLevel, ModelError> {
    if status != LpStatus::Optimal {
        return Err(ModelError::Bound {
            m,
            source: LpError::NumericalBreakdown(format!("selection relaxation ended with status {status:?}")),
        });
    }
    Ok(BoundLevel { m, profit: value, source })
}

/// The most profitable open set whose fleet and station costs fit the
/// budget (ties within the lexicographic tolerance go to the cheaper set),
/// returned with its unconstrained state evaluation.
///
/// Open sets are enumerated depth-first, pruned by the cost lower bound
/// `Σ c^b + c^p(|s| α/(1−α) + Σ λ/μ)`, and solved in order of the revenue
/// upper bound `α Σ λδ` until that bound drops below the incumbent.
pub fn initial_state(instance: &Instance, cache: &mut EvaluationCache) -> Result<StateEvaluation, ModelError> {
    let r = instance.stations;
    let tol = *cache.tolerances();
    let budget = instance.budget;
    let slack = budget.abs().max(1.0) * 1e-12;
    let alpha = instance.service_level;
    let pair_fleet = |i: usize, j: usize| instance.occupied_flow(i, j) + instance.occupied_flow(j, i);
    let pair_revenue =
        |i: usize, j: usize| alpha * (instance.lambda[i][j] * instance.margin[i][j] + instance.lambda[j][i] * instance.margin[j][i]);

    let mut candidates: Vec<(f64, StateKey)> = Vec::new();
    // (next station, set, cost lower bound, revenue upper bound)
    let mut stack = vec![(0usize, StateKey::EMPTY, 0.0f64, 0.0f64)];
    while let Some((next, s, lb, ub)) = stack.pop() {
        if s.len() >= 2 {
            candidates.push((ub, s));
        }
        for o in next..r {
            let mut add_cost = instance.station_cost[o] + instance.vehicle_cost * instance.safety_stock();
            let mut add_rev = 0.0;
            for j in s.stations() {
                add_cost += instance.vehicle_cost * pair_fleet(o, j);
                add_rev += pair_revenue(o, j);
            }
            if lb + add_cost <= budget + slack {
                stack.push((o + 1, s.with(o), lb + add_cost, ub + add_rev));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    debug!("{} affordable open sets under budget {budget}", candidates.len());

    let mut best: Option<(f64, f64, StateKey)> = None;
    for &(ub, s) in &candidates {
        if let Some((bp, _, _)) = best {
            if ub < bp - tol.lexicographic * bp.abs().max(1.0) {
                break;
            }
        }
        let mut lp = build_state_lp(instance, s);
        let station_costs: f64 = s.stations().map(|i| instance.station_cost[i]).sum();
        let fleet_terms = (0..lp.num_vars()).map(|v| (v, instance.vehicle_cost)).collect();
        lp.program.program.add_constraint(fleet_terms, Relation::Le, budget - station_costs);
        let sol = solve_lexicographic(&lp.program, &tol).map_err(|source| ModelError::Lp { state: s, source })?;
        if !sol.is_optimal() || sol.objective_value <= tol.optimality {
            continue;
        }
        let (p, c) = (sol.objective_value, sol.secondary_value.unwrap_or(f64::INFINITY));
        best = match best {
            None => Some((p, c, s)),
            Some((bp, bc, bs)) => {
                let eps = tol.lexicographic * bp.abs().max(1.0);
                if p > bp + eps || (p >= bp - eps && c < bc) {
                    Some((p.max(bp), c, s))
                } else {
                    Some((bp, bc, bs))
                }
            }
        };
    }
    let Some((_, _, s0)) = best else {
        return Err(ModelError::BudgetInfeasible { budget });
    };
    evaluate_state(instance, s0, cache)
}
