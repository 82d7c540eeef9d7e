use std::collections::HashMap;

use crate::instance::Instance;
use crate::model::{evaluate_state, transition_time, EvaluationCache, StateKey};

use super::SearchError;

/// Largest number of closed stations `oracle_enumerate` accepts.
pub const ORACLE_MAX_CLOSED: usize = 9;

/// Minimum total time over every opening order of the closed stations,
/// by plain enumeration. Orders passing through a state without positive
/// profit (other than the all-open state) are skipped.
pub fn oracle_enumerate(instance: &Instance, start: StateKey, cache: &mut EvaluationCache) -> Result<f64, SearchError> {
    let r = instance.stations;
    let closed = r - start.len();
    if closed > ORACLE_MAX_CLOSED {
        return Err(SearchError::OracleGuard { closed, max: ORACLE_MAX_CLOSED });
    }
    // Evaluate every reachable state once so the enumeration below only
    // does cache lookups.
    let rest: Vec<usize> = start.closed(r).collect();
    let mut times: HashMap<(StateKey, usize), f64> = HashMap::new();
    for mask in 0u64..1 << closed {
        let s = StateKey(start.0 | spread(mask, &rest));
        let e = evaluate_state(instance, s, cache)?;
        if s.len() < r && !e.is_ok() {
            continue;
        }
        for &o in &rest {
            if !s.contains(o) {
                times.insert((s, o), f64::NAN);
            }
        }
    }
    let full = StateKey::full(r);
    for (&(s, o), tau) in times.iter_mut() {
        let t = s.with(o);
        let t_ok = t == full || cache.get(t).is_some_and(|e| e.is_ok());
        *tau = if t_ok { transition_time(instance, s, t, cache)? } else { f64::INFINITY };
    }
    if start.len() < r && !evaluate_state(instance, start, cache)?.is_ok() {
        return Err(SearchError::NoSchedule { start });
    }

    fn walk(s: StateKey, full: StateKey, elapsed: f64, times: &HashMap<(StateKey, usize), f64>, best: &mut f64) {
        if s == full {
            *best = best.min(elapsed);
            return;
        }
        for o in s.closed(64).filter(|&o| full.contains(o)) {
            let tau = times[&(s, o)];
            if tau.is_finite() {
                walk(s.with(o), full, elapsed + tau, times, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    walk(start, full, 0.0, &times, &mut best);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(SearchError::NoSchedule { start })
    }
}

/// Scatters the low bits of `mask` onto the stations in `targets`.
fn spread(mask: u64, targets: &[usize]) -> u64 {
    targets.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).fold(0, |acc, (_, &i)| acc | 1 << i)
}

/// Exact remaining time from every reachable superset of `start` to the
/// all-open state, by dynamic programming over subsets. Dead-end states
/// map to infinity.
pub fn cost_to_go(
    instance: &Instance,
    start: StateKey,
    cache: &mut EvaluationCache,
) -> Result<HashMap<StateKey, f64>, SearchError> {
    let r = instance.stations;
    let closed = r - start.len();
    if closed > 2 * ORACLE_MAX_CLOSED {
        return Err(SearchError::OracleGuard { closed, max: 2 * ORACLE_MAX_CLOSED });
    }
    let rest: Vec<usize> = start.closed(r).collect();
    let full = StateKey::full(r);
    let mut table = HashMap::with_capacity(1 << closed);
    // Larger sets first: descending popcount order over the closed bits.
    let mut masks: Vec<u64> = (0u64..1 << closed).collect();
    masks.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
    for mask in masks {
        let s = StateKey(start.0 | spread(mask, &rest));
        if s == full {
            table.insert(s, 0.0);
            continue;
        }
        if !evaluate_state(instance, s, cache)?.is_ok() {
            table.insert(s, f64::INFINITY);
            continue;
        }
        let mut value = f64::INFINITY;
        for o in s.closed(r) {
            let t = s.with(o);
            let rest_t = table[&t];
            if rest_t.is_finite() {
                value = value.min(transition_time(instance, s, t, cache)? + rest_t);
            }
        }
        table.insert(s, value);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Balance, GenSpec, Layout};

    #[test]
    fn one_and_two_closed_stations() {
        let inst = generate(&GenSpec::new(Layout::Quadratic, 9, Balance::Balanced, 1)).unwrap();
        let mut cache = EvaluationCache::default();
        let full = StateKey::full(9);
        let one = StateKey(full.0 & !(1 << 4));
        let direct = transition_time(&inst, one, full, &mut cache).unwrap();
        assert_eq!(oracle_enumerate(&inst, one, &mut cache).unwrap(), direct);

        let two = StateKey(full.0 & !(1 << 4) & !(1 << 7));
        let via = |mid: StateKey, cache: &mut EvaluationCache| {
            transition_time(&inst, two, mid, cache).unwrap() + transition_time(&inst, mid, full, cache).unwrap()
        };
        let expected = via(two.with(4), &mut cache).min(via(two.with(7), &mut cache));
        assert!((oracle_enumerate(&inst, two, &mut cache).unwrap() - expected).abs() <= 1e-12 * expected);
        let table = cost_to_go(&inst, two, &mut cache).unwrap();
        assert!((table[&two] - expected).abs() <= 1e-12 * expected);
        assert_eq!(table[&full], 0.0);
    }

    #[test]
    fn guard_refuses_large_enumerations() {
        let inst = generate(&GenSpec::new(Layout::Quadratic, 16, Balance::Balanced, 1)).unwrap();
        let mut cache = EvaluationCache::default();
        let s = StateKey::from_stations([0, 1, 2, 3]);
        assert_eq!(
            oracle_enumerate(&inst, s, &mut cache),
            Err(SearchError::OracleGuard { closed: 12, max: ORACLE_MAX_CLOSED })
        );
        assert!(cache.is_empty());
    }
}
