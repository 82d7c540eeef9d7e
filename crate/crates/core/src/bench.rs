//! Benchmark matrix runs and their CSV report.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::thread;

use log::{error, info};
use serde::Serialize;
use thiserror::Error;

use crate::instance::{generate, load, Balance, GenSpec, Instance, InstanceError, Layout};
use crate::lp::{LpError, Tolerances};
use crate::model::{initial_state, profit_bounds, BoundMode, EvaluationCache, ModelError, StateKey, DEFAULT_NODE_LIMIT};
use crate::search::{astar, HeuristicKind, SearchError, SearchResult, WeightedBase};

pub const CSV_HEADER: [&str; 11] =
    ["instance", "kind", "param", "opt", "gap_pct", "expanded", "remaining", "evaluations", "time_ms", "seed", "bound_mode"];

/// Marker written in the `opt` column of a failed cell.
pub const ERROR_MARKER: &str = "error";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("tolerance configuration: {0}")]
    Tolerance(LpError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("writing report: {0}")]
    Output(String),
}

impl BenchError {
    /// Process exit status: 2 invalid input, 3 no schedule, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Instance(_) | BenchError::Tolerance(_) | BenchError::Config(_) | BenchError::Output(_) => 2,
            BenchError::Model(e) => model_exit_code(e),
            BenchError::Search(e) => match e {
                SearchError::Model(m) => model_exit_code(m),
                SearchError::NoSchedule { .. } => 3,
                SearchError::InvalidKind(_)
                | SearchError::MissingBounds
                | SearchError::BadStart { .. }
                | SearchError::OracleGuard { .. } => 2,
            },
        }
    }
}

fn model_exit_code(e: &ModelError) -> i32 {
    match e {
        _ if e.is_numerical() => 4,
        ModelError::BudgetInfeasible { .. } | ModelError::UndefinedTransition { .. } => 3,
        ModelError::NonpositiveBound { .. } | ModelError::MissingBound { .. } => 4,
        _ => 2,
    }
}

/// Where an instance comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum InstanceSource {
    File(PathBuf),
    Generated(GenSpec),
}

impl InstanceSource {
    pub fn resolve(&self) -> Result<Instance, InstanceError> {
        match self {
            InstanceSource::File(path) => load(path),
            InstanceSource::Generated(spec) => generate(spec),
        }
    }
}

/// Parses `Q-9-BAL` or `Q-9-BAL-s3`; the seed defaults to `seed`.
pub fn parse_spec(text: &str, seed: u64) -> Result<GenSpec, InstanceError> {
    let parts: Vec<&str> = text.trim().split('-').collect();
    let bad = || InstanceError::InvalidSpec(format!("cannot parse instance spec {text:?} (expected e.g. Q-9-BAL-s1)"));
    let (layout, size, balance, seed) = match parts.as_slice() {
        [l, r, b] => (l, r, b, seed),
        [l, r, b, s] => {
            let s = s.strip_prefix('s').or_else(|| s.strip_prefix('S')).ok_or_else(bad)?;
            (l, r, b, s.parse().map_err(|_| bad())?)
        }
        _ => return Err(bad()),
    };
    let spec = GenSpec::new(Layout::from_str(layout)?, size.parse().map_err(|_| bad())?, Balance::from_str(balance)?, seed);
    spec.validate()?;
    Ok(spec)
}

/// Expands kinds, γ values and weights into the list of cells run per
/// instance: each γ adds `ah2:γ`, each weight adds `w-eh2:w` and `w-eh3:w`.
pub fn expand_kinds(kinds: &[HeuristicKind], gammas: &[f64], weights: &[f64]) -> Result<Vec<HeuristicKind>, SearchError> {
    let mut out: Vec<HeuristicKind> = kinds.to_vec();
    out.extend(gammas.iter().map(|&gamma| HeuristicKind::Ah2 { gamma }));
    for &w in weights {
        out.push(HeuristicKind::Weighted { base: WeightedBase::Eh2, w });
        out.push(HeuristicKind::Weighted { base: WeightedBase::Eh3, w });
    }
    for k in &out {
        k.validate()?;
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub instances: Vec<InstanceSource>,
    pub kinds: Vec<HeuristicKind>,
    pub bound_mode: BoundMode,
    pub node_limit: usize,
    /// Worker threads; instances are distributed across them.
    pub jobs: usize,
}

impl RunConfig {
    pub fn new(instances: Vec<InstanceSource>, kinds: Vec<HeuristicKind>) -> Self {
        RunConfig { instances, kinds, bound_mode: BoundMode::LpRelaxation, node_limit: DEFAULT_NODE_LIMIT, jobs: 1 }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.kinds.is_empty() {
            return Err(BenchError::Config("no heuristic kinds requested".into()));
        }
        for k in &self.kinds {
            k.validate()?;
        }
        if self.jobs == 0 {
            return Err(BenchError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One cell of the benchmark matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub kind: String,
    pub param: Option<f64>,
    pub opt: Option<f64>,
    pub gap_pct: Option<f64>,
    pub expanded: Option<u64>,
    pub remaining: Option<u64>,
    pub evaluations: Option<u64>,
    pub time_ms: Option<f64>,
    pub seed: u64,
    pub bound_mode: BoundMode,
    #[serde(skip)]
    pub error: Option<String>,
}

impl BenchRow {
    fn failed(instance: &str, seed: u64, kind: HeuristicKind, mode: BoundMode, message: String) -> Self {
        BenchRow {
            instance: instance.to_string(),
            kind: kind.label().to_string(),
            param: kind.param(),
            opt: None,
            gap_pct: None,
            expanded: None,
            remaining: None,
            evaluations: None,
            time_ms: None,
            seed,
            bound_mode: mode,
            error: Some(message),
        }
    }

    fn record(&self) -> [String; 11] {
        let num = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let int = |v: Option<u64>| v.map_or_else(String::new, |x| x.to_string());
        let opt = if self.error.is_some() { ERROR_MARKER.to_string() } else { num(self.opt) };
        [
            self.instance.clone(),
            self.kind.clone(),
            num(self.param),
            opt,
            num(self.gap_pct),
            int(self.expanded),
            int(self.remaining),
            int(self.evaluations),
            self.time_ms.map_or_else(String::new, |t| format!("{t:.3}")),
            self.seed.to_string(),
            self.bound_mode.to_string(),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| BenchError::Output(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.record()).map_err(io)?;
        }
        w.flush().map_err(|e| BenchError::Output(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn failures(&self) -> impl Iterator<Item = &BenchRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

/// Percentage gap of `value` over the exact optimum.
pub fn gap_pct(value: f64, best: f64) -> f64 {
    100.0 * (value - best) / best
}

/// Result of running a set of kinds on one instance that shares one
/// evaluation cache.
pub struct InstanceRun {
    pub start: Result<StateKey, BenchError>,
    pub results: Vec<(HeuristicKind, Result<SearchResult, BenchError>)>,
    /// Exact optimum used for gaps: the best exact-kind result, or a
    /// separate eh2 run when no exact kind was requested.
    pub reference: Option<f64>,
}

/// Runs every kind on `instance` from its budget-constrained start.
pub fn run_instance(
    instance: &Instance,
    kinds: &[HeuristicKind],
    mode: BoundMode,
    node_limit: usize,
    tol: Tolerances<f64>,
) -> InstanceRun {
    let mut cache = EvaluationCache::new(tol);
    let start = match initial_state(instance, &mut cache) {
        Ok(ev) => ev.state,
        Err(e) => {
            let msg = e.to_string();
            return InstanceRun {
                start: Err(e.into()),
                results: kinds.iter().map(|&k| (k, Err(BenchError::Config(msg.clone())))).collect(),
                reference: None,
            };
        }
    };
    info!("{}: start {start}", instance.name);
    let needs_bounds = kinds.iter().any(|k| k.needs_bounds()) || !kinds.iter().any(|k| k.is_exact());
    let bounds = if needs_bounds {
        Some(profit_bounds(instance, mode, start.len(), &tol, node_limit).map_err(|e| e.to_string()))
    } else {
        None
    };
    let mut run_kind = |kind: HeuristicKind| -> Result<SearchResult, BenchError> {
        let table = match (&bounds, kind.needs_bounds()) {
            (Some(Err(msg)), true) => return Err(BenchError::Config(format!("profit bounds: {msg}"))),
            (Some(Ok(t)), _) => Some(t),
            _ => None,
        };
        Ok(astar(instance, start, kind, table, &mut cache)?)
    };
    let results: Vec<_> = kinds.iter().map(|&k| (k, run_kind(k))).collect();
    let mut reference = results
        .iter()
        .filter(|(k, _)| k.is_exact())
        .filter_map(|(_, r)| r.as_ref().ok().map(|r| r.optimal_time))
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));
    if reference.is_none() && !kinds.iter().any(|k| k.is_exact()) {
        reference = run_kind(HeuristicKind::Eh2).ok().map(|r| r.optimal_time);
    }
    InstanceRun { start: Ok(start), results, reference }
}

fn rows_for(instance: &Instance, run: InstanceRun, mode: BoundMode) -> Vec<BenchRow> {
    run.results
        .into_iter()
        .map(|(kind, res)| match res {
            Ok(r) => BenchRow {
                instance: instance.name.clone(),
                kind: kind.label().to_string(),
                param: kind.param(),
                opt: Some(r.optimal_time),
                gap_pct: run.reference.map(|best| gap_pct(r.optimal_time, best)),
                expanded: Some(r.stats.expanded),
                remaining: Some(r.stats.remaining),
                evaluations: Some(r.stats.evaluations),
                time_ms: Some(r.stats.elapsed.as_secs_f64() * 1e3),
                seed: instance.seed,
                bound_mode: mode,
                error: None,
            },
            Err(e) => {
                error!("{} {kind}: {e}", instance.name);
                BenchRow::failed(&instance.name, instance.seed, kind, mode, e.to_string())
            }
        })
        .collect()
}

/// Runs the full instance × kind matrix. Failed cells become error rows and
/// the run continues; an unloadable instance is an error row per kind with
/// the source as instance name.
pub fn run_bench(config: &RunConfig) -> Result<BenchReport, BenchError> {
    config.validate()?;
    let tol = Tolerances::from_env().map_err(BenchError::Tolerance)?;
    let run_one = |src: &InstanceSource| -> Vec<BenchRow> {
        match src.resolve() {
            Ok(inst) => {
                let run = run_instance(&inst, &config.kinds, config.bound_mode, config.node_limit, tol);
                rows_for(&inst, run, config.bound_mode)
            }
            Err(e) => {
                error!("{src:?}: {e}");
                let (name, seed) = match src {
                    InstanceSource::File(p) => (p.display().to_string(), 0),
                    InstanceSource::Generated(s) => (s.name(), s.seed),
                };
                config.kinds.iter().map(|&k| BenchRow::failed(&name, seed, k, config.bound_mode, e.to_string())).collect()
            }
        }
    };

    let n = config.instances.len();
    let jobs = config.jobs.min(n.max(1));
    let mut per_instance: Vec<Vec<BenchRow>> = vec![Vec::new(); n];
    if jobs <= 1 {
        for (slot, src) in per_instance.iter_mut().zip(&config.instances) {
            *slot = run_one(src);
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let done = std::sync::Mutex::new(&mut per_instance);
        thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let rows = run_one(&config.instances[i]);
                    done.lock().expect("no worker panicked")[i] = rows;
                });
            }
        });
    }
    Ok(BenchReport { rows: per_instance.into_iter().flatten().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_strings() {
        let s = parse_spec("Q-9-BAL", 4).unwrap();
        assert_eq!(s, GenSpec::new(Layout::Quadratic, 9, Balance::Balanced, 4));
        let s = parse_spec("h-19-imb-s7", 4).unwrap();
        assert_eq!(s.name(), "H-19-IMB-s7");
        for bad in ["Q-9", "Q-x-BAL", "Q-9-BAL-7", "X-9-BAL", "Q-9-FOO"] {
            assert!(parse_spec(bad, 1).is_err(), "{bad}");
        }
    }

    #[test]
    fn kind_expansion() {
        let kinds = expand_kinds(&[HeuristicKind::Ah1], &[0.3, 0.7], &[1.05]).unwrap();
        assert_eq!(kinds.len(), 5);
        assert_eq!(kinds[2], HeuristicKind::Ah2 { gamma: 0.7 });
        assert_eq!(kinds[4], HeuristicKind::Weighted { base: WeightedBase::Eh3, w: 1.05 });
        assert!(expand_kinds(&[], &[1.5], &[]).is_err());
        assert!(expand_kinds(&[], &[], &[0.5]).is_err());
    }

    #[test]
    fn empty_instance_list_gives_header_only() {
        let report = run_bench(&RunConfig::new(vec![], vec![HeuristicKind::Eh2])).unwrap();
        assert_eq!(report.to_csv(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn no_kinds_is_a_configuration_error() {
        let err = run_bench(&RunConfig::new(vec![], vec![])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn small_matrix_rows() {
        let spec = GenSpec::new(Layout::Circular, 7, Balance::Balanced, 1);
        let kinds = vec![HeuristicKind::Zero, HeuristicKind::Eh2, HeuristicKind::Ah1];
        let report = run_bench(&RunConfig::new(vec![InstanceSource::Generated(spec)], kinds)).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.failures().count(), 0);
        let (d, e) = (&report.rows[0], &report.rows[1]);
        assert_eq!(d.opt, e.opt);
        assert_eq!(d.gap_pct, Some(0.0));
        assert!(report.rows[2].gap_pct.unwrap() >= -1e-9);
        assert!(d.evaluations.unwrap() > 0);
        assert_eq!(report.rows[2].kind, "ah1");
    }

    #[test]
    fn bad_sources_become_error_rows() {
        let srcs = vec![
            InstanceSource::File(PathBuf::from("/nonexistent/instance.json")),
            InstanceSource::Generated(GenSpec::new(Layout::Circular, 9, Balance::Balanced, 1)),
        ];
        let report = run_bench(&RunConfig::new(srcs, vec![HeuristicKind::Eh1, HeuristicKind::Eh2])).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.failures().count(), 4);
        let csv = report.to_csv();
        assert_eq!(csv.lines().filter(|l| l.contains(",error,")).count(), 4);
        assert!(csv.contains("C-9-BAL-s1,eh1,,error,"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(BenchError::from(SearchError::NoSchedule { start: StateKey::EMPTY }).exit_code(), 3);
        assert_eq!(BenchError::from(ModelError::BudgetInfeasible { budget: 1.0 }).exit_code(), 3);
        let numerical = ModelError::Lp { state: StateKey::EMPTY, source: LpError::NumericalBreakdown("x".into()) };
        assert_eq!(BenchError::from(numerical).exit_code(), 4);
        assert_eq!(BenchError::from(SearchError::InvalidKind("x".into())).exit_code(), 2);
    }
}
