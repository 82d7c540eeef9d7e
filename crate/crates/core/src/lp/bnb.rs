use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{solve_lexicographic, solve_lp, LexicographicProgram, LpError, LpSolution, LpStatus, Scalar, Tolerances};

/// A lexicographic program in which the listed variables must be 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryProgram<T> {
    pub program: LexicographicProgram<T>,
    pub binaries: Vec<usize>,
}

impl<T: Scalar> BinaryProgram<T> {
    pub fn validate(&self) -> Result<(), LpError> {
        self.program.validate()?;
        let lp = &self.program.program;
        for &b in &self.binaries {
            if b >= lp.num_vars {
                return Err(LpError::Malformed(format!("binary index {b} >= {}", lp.num_vars)));
            }
            if lp.lower[b] != T::zero() || lp.upper[b] != Some(T::one()) {
                return Err(LpError::Malformed(format!("binary variable {b} must carry bounds [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnbOutcome<T> {
    /// Incumbent; stage two is optimized with its binaries fixed.
    pub solution: LpSolution<T>,
    /// Stage-one value of the root relaxation.
    pub relaxation_bound: T,
    /// False when the node limit stopped the search early.
    pub proven_optimal: bool,
    pub nodes: usize,
}

struct Node<T> {
    /// Parent relaxation value in maximization form.
    bound: T,
    depth: usize,
    seq: usize,
    fixings: Vec<(usize, T)>,
}

impl<T: Scalar> PartialEq for Node<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Node<T> {}

impl<T: Scalar> PartialOrd for Node<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Node<T> {
    // Max-heap: best bound, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .partial_cmp(&other.bound)
            .unwrap_or(Ordering::Equal)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Best-first branch-and-bound on the most fractional binary of the
/// stage-one relaxation, followed by stage two with the binaries fixed at
/// the incumbent.
pub fn solve_binary_bnb<T: Scalar>(
    bp: &BinaryProgram<T>,
    tol: &Tolerances<T>,
    node_limit: usize,
) -> Result<BnbOutcome<T>, LpError> {
    bp.validate()?;
    let base = &bp.program.program;
    let sign: T = base.objective.sense.sign();
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: T::infinity(), depth: 0, seq: 0, fixings: Vec::new() });
    let mut seq = 1usize;
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut root_bound: Option<T> = None;
    let mut incumbent: Option<(T, Vec<(usize, T)>)> = None;
    let mut proven = true;

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound <= *best + tol.optimality {
                break;
            }
        }
        if nodes >= node_limit {
            proven = false;
            break;
        }
        nodes += 1;
        let mut lp = base.clone();
        for &(v, val) in &node.fixings {
            lp.set_bounds(v, val, Some(val));
        }
        let sol = solve_lp(&lp, tol)?;
        iterations += sol.iterations;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Ok(BnbOutcome {
                    solution: LpSolution::without_point(LpStatus::Unbounded, iterations),
                    relaxation_bound: T::infinity(),
                    proven_optimal: true,
                    nodes,
                })
            }
            LpStatus::Optimal => {}
        }
        let value = sign * sol.objective_value;
        if root_bound.is_none() {
            root_bound = Some(sol.objective_value);
        }
        if let Some((best, _)) = &incumbent {
            if value <= *best + tol.optimality {
                continue;
            }
        }
        let branch = bp
            .binaries
            .iter()
            .map(|&b| (b, (sol.values[b] - sol.values[b].round()).abs()))
            .filter(|&(_, frac)| frac > tol.integrality)
            .fold(None::<(usize, T)>, |acc, (b, frac)| match acc {
                Some((_, bf)) if bf >= frac => acc,
                _ => Some((b, frac)),
            });
        match branch {
            None => {
                let assignment = bp.binaries.iter().map(|&b| (b, sol.values[b].round())).collect();
                incumbent = Some((value, assignment));
            }
            Some((b, _)) => {
                for val in [T::zero(), T::one()] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((b, val));
                    heap.push(Node { bound: value, depth: node.depth + 1, seq, fixings });
                    seq += 1;
                }
            }
        }
    }

    let Some(root) = root_bound else {
        return Ok(BnbOutcome {
            solution: LpSolution::without_point(LpStatus::Infeasible, iterations),
            relaxation_bound: T::nan(),
            proven_optimal: true,
            nodes,
        });
    };
    let Some((_, assignment)) = incumbent else {
        if !proven {
            return Err(LpError::NodeLimit(node_limit));
        }
        return Ok(BnbOutcome {
            solution: LpSolution::without_point(LpStatus::Infeasible, iterations),
            relaxation_bound: root,
            proven_optimal: true,
            nodes,
        });
    };

    let mut fixed = bp.program.clone();
    for &(v, val) in &assignment {
        fixed.program.set_bounds(v, val, Some(val));
    }
    let mut solution = solve_lexicographic(&fixed, tol)?;
    solution.iterations += iterations;
    Ok(BnbOutcome { solution, relaxation_bound: root, proven_optimal: proven, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LinearProgram, Objective, Relation, Sense};

    fn binary_lp(objective: Vec<f64>) -> LinearProgram<f64> {
        let n = objective.len();
        let mut lp = LinearProgram::new(Objective::new(Sense::Maximize, objective));
        for v in 0..n {
            lp.set_bounds(v, 0.0, Some(1.0));
        }
        lp
    }

    #[test]
    fn packing_picks_one() {
        let mut lp = binary_lp(vec![1.0, 1.0]);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.0);
        let bp = BinaryProgram {
            program: LexicographicProgram::new(lp, Objective::new(Sense::Minimize, vec![0.0, 0.0])),
            binaries: vec![0, 1],
        };
        let out = solve_binary_bnb(&bp, &Tolerances::default(), 100).unwrap();
        assert!(out.proven_optimal);
        assert!((out.solution.objective_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack_matches_enumeration() {
        let values = [10.0, 13.0, 7.0, 8.0, 9.0, 4.0];
        let weights = [5.0, 7.0, 4.0, 4.0, 5.0, 2.0];
        let cap = 13.0;
        let mut lp = binary_lp(values.to_vec());
        lp.add_constraint(weights.iter().copied().enumerate().collect(), Relation::Le, cap);
        let bp = BinaryProgram {
            program: LexicographicProgram::new(lp, Objective::new(Sense::Minimize, vec![0.0; 6])),
            binaries: (0..6).collect(),
        };
        let out = solve_binary_bnb(&bp, &Tolerances::default(), 10_000).unwrap();
        let brute = (0u32..64)
            .filter(|m| (0..6).filter(|i| m >> i & 1 == 1).map(|i| weights[i]).sum::<f64>() <= cap)
            .map(|m| (0..6).filter(|i| m >> i & 1 == 1).map(|i| values[i]).sum::<f64>())
            .fold(f64::MIN, f64::max);
        assert!((out.solution.objective_value - brute).abs() < 1e-9);
        assert!(out.relaxation_bound >= brute - 1e-9);
    }

    #[test]
    fn node_limit_without_incumbent_is_an_error() {
        let mut lp = binary_lp(vec![1.0, 1.0, 1.0]);
        lp.add_constraint(vec![(0, 2.0), (1, 2.0), (2, 2.0)], Relation::Le, 3.0);
        let bp = BinaryProgram {
            program: LexicographicProgram::new(lp, Objective::new(Sense::Minimize, vec![0.0; 3])),
            binaries: vec![0, 1, 2],
        };
        assert_eq!(solve_binary_bnb(&bp, &Tolerances::default(), 1), Err(LpError::NodeLimit(1)));
    }

    #[test]
    fn rejects_binary_without_unit_bounds() {
        let lp = LinearProgram::new(Objective::new(Sense::Maximize, vec![1.0]));
        let bp = BinaryProgram {
            program: LexicographicProgram::new(lp, Objective::new(Sense::Minimize, vec![0.0])),
            binaries: vec![0],
        };
        assert!(matches!(solve_binary_bnb(&bp, &Tolerances::default(), 10), Err(LpError::Malformed(_))));
    }
}
