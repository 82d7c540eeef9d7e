use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::instance::Instance;
use crate::model::{ModelError, ProfitBoundTable, StateKey};

use super::SearchError;

/// Exact heuristic a weighted run scales.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightedBase {
    Eh2,
    Eh3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    /// `h = 0`, i.e. Dijkstra.
    Zero,
    Eh1,
    Eh2,
    Eh3,
    Ah1,
    Ah2 { gamma: f64 },
    Weighted { base: WeightedBase, w: f64 },
}

impl HeuristicKind {
    pub fn validate(&self) -> Result<(), SearchError> {
        match *self {
            HeuristicKind::Ah2 { gamma } if !(0.0..=1.0).contains(&gamma) => {
                Err(SearchError::InvalidKind(format!("ah2 needs gamma in [0, 1], got {gamma}")))
            }
            HeuristicKind::Weighted { w, .. } if !(w >= 1.0 && w.is_finite()) => {
                Err(SearchError::InvalidKind(format!("weighted A* needs a finite weight >= 1, got {w}")))
            }
            _ => Ok(()),
        }
    }

    /// Kinds that guarantee an optimal schedule.
    pub fn is_exact(&self) -> bool {
        matches!(self, HeuristicKind::Zero | HeuristicKind::Eh1 | HeuristicKind::Eh2 | HeuristicKind::Eh3)
    }

    /// Whether the run needs the profit bound table.
    pub fn needs_bounds(&self) -> bool {
        !matches!(self, HeuristicKind::Zero | HeuristicKind::Ah1)
    }

    pub fn label(&self) -> &'static str {
        match self {
            HeuristicKind::Zero => "dijkstra",
            HeuristicKind::Eh1 => "eh1",
            HeuristicKind::Eh2 => "eh2",
            HeuristicKind::Eh3 => "eh3",
            HeuristicKind::Ah1 => "ah1",
            HeuristicKind::Ah2 { .. } => "ah2",
            HeuristicKind::Weighted { base: WeightedBase::Eh2, .. } => "w-eh2",
            HeuristicKind::Weighted { base: WeightedBase::Eh3, .. } => "w-eh3",
        }
    }

    /// γ for ah2, w for weighted runs.
    pub fn param(&self) -> Option<f64> {
        match *self {
            HeuristicKind::Ah2 { gamma } => Some(gamma),
            HeuristicKind::Weighted { w, .. } => Some(w),
            _ => None,
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some(p) => write!(f, "{}:{p}", self.label()),
            None => f.write_str(self.label()),
        }
    }
}

/// Parses `dijkstra`, `zero`, `eh1`, `eh2`, `eh3`, `ah1`, `ah2:<γ>` and
/// `w-eh2:<w>` / `w-eh3:<w>`.
impl FromStr for HeuristicKind {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => {
                let v: f64 =
                    p.trim().parse().map_err(|_| SearchError::InvalidKind(format!("bad parameter in `{s}`")))?;
                (n.trim(), Some(v))
            }
            None => (s.trim(), None),
        };
        let need = |p: Option<f64>| p.ok_or_else(|| SearchError::InvalidKind(format!("`{name}` needs a parameter")));
        let kind = match name.to_ascii_lowercase().as_str() {
            "dijkstra" | "zero" => HeuristicKind::Zero,
            "eh1" => HeuristicKind::Eh1,
            "eh2" => HeuristicKind::Eh2,
            "eh3" => HeuristicKind::Eh3,
            "ah1" => HeuristicKind::Ah1,
            "ah2" => HeuristicKind::Ah2 { gamma: need(param)? },
            "w-eh2" => HeuristicKind::Weighted { base: WeightedBase::Eh2, w: need(param)? },
            "w-eh3" => HeuristicKind::Weighted { base: WeightedBase::Eh3, w: need(param)? },
            _ => return Err(SearchError::InvalidKind(format!("unknown heuristic `{s}`"))),
        };
        if param.is_some() && kind.param().is_none() {
            return Err(SearchError::InvalidKind(format!("`{name}` takes no parameter")));
        }
        kind.validate()?;
        Ok(kind)
    }
}

/// `max(0, (c(s_f) − c(s′)) / P_{R−1})`.
pub fn h_eh1(cost: f64, final_cost: f64, p_top: f64) -> Result<f64, SearchError> {
    if !(p_top > 0.0) {
        return Err(ModelError::NonpositiveBound { m: 0, value: p_top }.into());
    }
    Ok(((final_cost - cost) / p_top).max(0.0))
}

/// `max(0, (c(s_f) − c(s′)) / p(s′))`.
pub fn h_ah1(cost: f64, profit: f64, final_cost: f64) -> f64 {
    debug_assert!(profit > 0.0);
    ((final_cost - cost) / profit).max(0.0)
}

/// `γ·eh1 + (1 − γ)·ah1`.
pub fn h_ah2(gamma: f64, eh1: f64, ah1: f64) -> f64 {
    gamma * eh1 + (1.0 - gamma) * ah1
}

/// Lower-bound data for opening one station `o` outside the base set.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaCandidate {
    pub station: usize,
    /// `c^b_o + c^p Σ_{j ∈ base} (f_oj + f_jo)`.
    pub constant: f64,
    /// `f_oj + f_jo` over stations `j` outside the base and `≠ o`,
    /// ascending.
    pub sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl DeltaCandidate {
    /// Bound on the cost of opening `o` after `t` further stations.
    pub fn bound(&self, t: usize, vehicle_cost: f64) -> f64 {
        self.constant + vehicle_cost * self.prefix[t]
    }
}

/// Precomputed acquisition-cost increments relative to a base state.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaLbContext {
    pub base: StateKey,
    pub vehicle_cost: f64,
    /// One entry per closed station of `base`, ascending by station.
    pub candidates: Vec<DeltaCandidate>,
}

pub fn build_delta_context(instance: &Instance, base: StateKey) -> DeltaLbContext {
    let r = instance.stations;
    let pair = |o: usize, j: usize| instance.occupied_flow(o, j) + instance.occupied_flow(j, o);
    let candidates = base
        .closed(r)
        .map(|o| {
            let constant = instance.station_cost[o] + instance.vehicle_cost * base.stations().map(|j| pair(o, j)).sum::<f64>();
            let mut sorted: Vec<f64> = base.closed(r).filter(|&j| j != o).map(|j| pair(o, j)).collect();
            sorted.sort_by(f64::total_cmp);
            let mut prefix = Vec::with_capacity(sorted.len() + 1);
            prefix.push(0.0);
            for v in &sorted {
                prefix.push(prefix.last().unwrap() + v);
            }
            DeltaCandidate { station: o, constant, sorted, prefix }
        })
        .collect();
    DeltaLbContext { base, vehicle_cost: instance.vehicle_cost, candidates }
}

/// Stage bounds `Δ_i` for `i = 1..=R−|s|` from `ctx`, minimizing over the
/// candidates not in `s`. The prefix length at stage `i` is
/// `|s| − |base| + i − 1`.
fn stage_bounds(ctx: &DeltaLbContext, s: StateKey, r: usize) -> Vec<f64> {
    debug_assert!(ctx.base.is_subset_of(s));
    let offset = s.len() - ctx.base.len();
    (1..=r - s.len())
        .map(|i| {
            ctx.candidates
                .iter()
                .filter(|c| !s.contains(c.station))
                .map(|c| c.bound(offset + i - 1, ctx.vehicle_cost))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `Σ Δ_i / P_{|s|+i−1} + max(0, c(s_f) − c(s) − Σ Δ_i) / P̂`.
fn staged_time(
    deltas: &[f64],
    size: usize,
    cost: f64,
    final_cost: f64,
    bounds: &ProfitBoundTable,
    p_top: f64,
) -> Result<f64, SearchError> {
    let mut time = 0.0;
    let mut spent = 0.0;
    for (k, d) in deltas.iter().enumerate() {
        let m = size + k;
        let p = bounds.get(m).ok_or(ModelError::MissingBound { m })?;
        if !(p > 0.0) {
            return Err(ModelError::NonpositiveBound { m, value: p }.into());
        }
        time += d / p;
        spent += d;
    }
    Ok(time + (final_cost - cost - spent).max(0.0) / p_top)
}

/// eh2 at `s` with `ctx` built for `s` itself.
pub fn h_eh2(
    instance: &Instance,
    s: StateKey,
    cost: f64,
    ctx: &DeltaLbContext,
    bounds: &ProfitBoundTable,
    final_cost: f64,
    p_top: f64,
) -> Result<f64, SearchError> {
    debug_assert_eq!(ctx.base, s);
    let deltas = stage_bounds(ctx, s, instance.stations);
    staged_time(&deltas, s.len(), cost, final_cost, bounds, p_top)
}

/// eh3 at `s` with the context built once for the start state.
pub fn h_eh3(
    instance: &Instance,
    s: StateKey,
    cost: f64,
    ctx0: &DeltaLbContext,
    bounds: &ProfitBoundTable,
    final_cost: f64,
    p_top: f64,
) -> Result<f64, SearchError> {
    let deltas = stage_bounds(ctx0, s, instance.stations);
    staged_time(&deltas, s.len(), cost, final_cost, bounds, p_top)
}

/// Everything a run needs to price states under one heuristic kind.
#[derive(Clone, Debug)]
pub struct HeuristicEvaluator {
    pub kind: HeuristicKind,
    pub final_cost: f64,
    /// `max_{m ≤ R−1} P_m` over the bound table, used as `P_{R−1}`.
    pub p_top: f64,
    bounds: Option<ProfitBoundTable>,
    ctx0: Option<DeltaLbContext>,
}

impl HeuristicEvaluator {
    pub fn new(
        instance: &Instance,
        kind: HeuristicKind,
        start: StateKey,
        final_cost: f64,
        bounds: Option<&ProfitBoundTable>,
    ) -> Result<Self, SearchError> {
        kind.validate()?;
        let r = instance.stations;
        let (bounds, p_top) = if kind.needs_bounds() {
            let table = bounds.ok_or(SearchError::MissingBounds)?;
            let top = r.saturating_sub(1).max(1);
            let p_top = table.envelope(top).ok_or(ModelError::MissingBound { m: top })?;
            if table.min_level().is_none_or(|m| m > start.len().max(1)) {
                return Err(ModelError::MissingBound { m: start.len() }.into());
            }
            if !(p_top > 0.0) && start.len() < r {
                return Err(ModelError::NonpositiveBound { m: top, value: p_top }.into());
            }
            (Some(table.clone()), p_top)
        } else {
            (None, f64::NAN)
        };
        let ctx0 = match kind {
            HeuristicKind::Eh3 | HeuristicKind::Weighted { base: WeightedBase::Eh3, .. } => {
                Some(build_delta_context(instance, start))
            }
            _ => None,
        };
        Ok(Self { kind, final_cost, p_top, bounds, ctx0 })
    }

    pub fn bounds(&self) -> Option<&ProfitBoundTable> {
        self.bounds.as_ref()
    }

    /// Heuristic value at `s` given its cost and profit.
    pub fn evaluate(&self, instance: &Instance, s: StateKey, cost: f64, profit: f64) -> Result<f64, SearchError> {
        if s.len() == instance.stations {
            return Ok(0.0);
        }
        let table = || self.bounds.as_ref().ok_or(SearchError::MissingBounds);
        let eh1 = || h_eh1(cost, self.final_cost, self.p_top);
        let eh2 = || {
            let ctx = build_delta_context(instance, s);
            h_eh2(instance, s, cost, &ctx, table()?, self.final_cost, self.p_top)
        };
        let eh3 = || h_eh3(instance, s, cost, self.ctx0.as_ref().unwrap(), table()?, self.final_cost, self.p_top);
        Ok(match self.kind {
            HeuristicKind::Zero => 0.0,
            HeuristicKind::Eh1 => eh1()?,
            HeuristicKind::Eh2 => eh2()?,
            HeuristicKind::Eh3 => eh3()?,
            HeuristicKind::Ah1 => h_ah1(cost, profit, self.final_cost),
            HeuristicKind::Ah2 { gamma } => h_ah2(gamma, eh1()?, h_ah1(cost, profit, self.final_cost)),
            HeuristicKind::Weighted { base: WeightedBase::Eh2, w } => w * eh2()?,
            HeuristicKind::Weighted { base: WeightedBase::Eh3, w } => w * eh3()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Balance, GenSpec, Layout};
    use crate::model::{BoundLevel, BoundMode, BoundSource};

    fn table(levels: &[(usize, f64)]) -> ProfitBoundTable {
        ProfitBoundTable {
            mode: BoundMode::LpRelaxation,
            levels: levels.iter().map(|&(m, profit)| BoundLevel { m, profit, source: BoundSource::Relaxation }).collect(),
        }
    }

    #[test]
    fn simple_heuristic_arithmetic() {
        assert_eq!(h_eh1(500.0, 1500.0, 500.0).unwrap(), 2.0);
        assert_eq!(h_eh1(1500.0, 1500.0, 500.0).unwrap(), 0.0);
        assert_eq!(h_eh1(1600.0, 1500.0, 500.0).unwrap(), 0.0);
        assert!(h_eh1(0.0, 1.0, 0.0).is_err());
        assert_eq!(h_ah1(1500.0, 20.0, 1500.0), 0.0);
        assert_eq!(h_ah1(500.0, 250.0, 1500.0), 4.0);
        assert_eq!(h_ah2(0.5, 2.0, 4.0), 3.0);
        assert_eq!(h_ah2(1.0, 2.0, 4.0), 2.0);
        assert_eq!(h_ah2(0.0, 2.0, 4.0), 4.0);
    }

    #[test]
    fn kind_parsing_and_validation() {
        assert_eq!("dijkstra".parse::<HeuristicKind>().unwrap(), HeuristicKind::Zero);
        assert_eq!("EH2".parse::<HeuristicKind>().unwrap(), HeuristicKind::Eh2);
        assert_eq!("ah2:0.7".parse::<HeuristicKind>().unwrap(), HeuristicKind::Ah2 { gamma: 0.7 });
        assert_eq!(
            "w-eh3:1.05".parse::<HeuristicKind>().unwrap(),
            HeuristicKind::Weighted { base: WeightedBase::Eh3, w: 1.05 }
        );
        for bad in ["ah2:1.5", "ah2:-0.1", "ah2", "w-eh2:0.9", "eh1:2", "astar", "ah2:x"] {
            assert!(bad.parse::<HeuristicKind>().is_err(), "{bad}");
        }
        let k = HeuristicKind::Ah2 { gamma: 0.3 };
        assert_eq!(k.to_string().parse::<HeuristicKind>().unwrap(), k);
        assert!(HeuristicKind::Eh3.is_exact() && !HeuristicKind::Ah1.is_exact());
    }

    #[test]
    fn delta_bound_matches_subset_enumeration() {
        let inst = generate(&GenSpec::new(Layout::Quadratic, 4, Balance::Balanced, 3)).unwrap();
        let base = StateKey::from_stations([2]);
        let ctx = build_delta_context(&inst, base);
        assert_eq!(ctx.candidates.len(), 3);
        let pair = |o: usize, j: usize| inst.occupied_flow(o, j) + inst.occupied_flow(j, o);
        for cand in &ctx.candidates {
            let o = cand.station;
            let others: Vec<usize> = base.closed(4).filter(|&j| j != o).collect();
            let mut previous = f64::NEG_INFINITY;
            for t in 0..=others.len() {
                let brute = (0u32..1 << others.len())
                    .filter(|m| m.count_ones() as usize == t)
                    .map(|m| {
                        let open = base
                            .stations()
                            .chain(others.iter().enumerate().filter(|(k, _)| m >> k & 1 == 1).map(|(_, &j)| j));
                        inst.station_cost[o] + inst.vehicle_cost * open.map(|j| pair(o, j)).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                let bound = cand.bound(t, ctx.vehicle_cost);
                assert!((bound - brute).abs() < 1e-9, "o={o} t={t}: {bound} vs {brute}");
                assert!(bound >= previous);
                previous = bound;
            }
        }
    }

    #[test]
    fn eh2_and_eh3_coincide_at_the_start_and_vanish_at_the_end() {
        let inst = generate(&GenSpec::new(Layout::Quadratic, 4, Balance::Balanced, 3)).unwrap();
        let bounds = table(&[(1, 0.0), (2, 50.0), (3, 80.0), (4, 100.0)]);
        let s0 = StateKey::from_stations([0, 3]);
        let ctx0 = build_delta_context(&inst, s0);
        let (c0, cf) = (4000.0, 9000.0);
        let p_top = bounds.envelope(3).unwrap();
        let eh2 = h_eh2(&inst, s0, c0, &ctx0, &bounds, cf, p_top).unwrap();
        let eh3 = h_eh3(&inst, s0, c0, &ctx0, &bounds, cf, p_top).unwrap();
        assert_eq!(eh2, eh3);
        assert!(eh2 >= h_eh1(c0, cf, p_top).unwrap());

        let full = StateKey::full(4);
        let ctx = build_delta_context(&inst, full);
        assert_eq!(h_eh2(&inst, full, cf, &ctx, &bounds, cf, p_top).unwrap(), 0.0);
        assert_eq!(h_eh3(&inst, full, cf, &ctx0, &bounds, cf, p_top).unwrap(), 0.0);
    }

    #[test]
    fn missing_or_nonpositive_levels_are_configuration_errors() {
        let inst = generate(&GenSpec::new(Layout::Quadratic, 4, Balance::Balanced, 3)).unwrap();
        let s = StateKey::from_stations([0]);
        let ctx = build_delta_context(&inst, s);
        let short = table(&[(2, 50.0), (3, 80.0)]);
        assert!(matches!(
            h_eh2(&inst, s, 0.0, &ctx, &short, 10.0, 80.0),
            Err(SearchError::Model(ModelError::MissingBound { m: 1 }))
        ));
        let zero = table(&[(1, 0.0), (2, 50.0), (3, 80.0)]);
        assert!(matches!(
            h_eh2(&inst, s, 0.0, &ctx, &zero, 10.0, 80.0),
            Err(SearchError::Model(ModelError::NonpositiveBound { m: 1, .. }))
        ));
    }
}
