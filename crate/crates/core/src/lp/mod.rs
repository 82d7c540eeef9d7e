//! Dense linear programming: two-phase primal simplex, lexicographic
//! (two-stage) objectives and best-first branch-and-bound over binary
//! variables.
//!
//! Everything here is generic over [`Scalar`], so the same solver runs in
//! `f32` or `f64`. The planner itself uses the `f64` aliases exported from
//! the crate root.

mod bnb;
mod lexicographic;
mod program;
mod simplex;

use std::fmt;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use thiserror::Error;

pub use bnb::{solve_binary_bnb, BinaryProgram, BnbOutcome};
pub use lexicographic::{solve_lexicographic, solve_lexicographic_cold, LexicographicProgram};
pub use program::{Constraint, LinearProgram, Objective, Relation, Sense};
pub use simplex::{solve_lp, solve_lp_sequence};

/// Floating point type the solver can run on.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + fmt::LowerExp + Default + Send + Sync + 'static
{
    /// Tolerances appropriate for the precision of the type.
    fn default_tolerances() -> Tolerances<Self>;

    /// Converts a literal. Panics only if the literal is not representable,
    /// which cannot happen for the finite constants used in this crate.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite literal")
    }
}

impl Scalar for f64 {
    fn default_tolerances() -> Tolerances<Self> {
        Tolerances {
            feasibility: 1e-7,
            optimality: 1e-7,
            integrality: 1e-6,
            lexicographic: 1e-6,
            pivot: 1e-9,
            degenerate_streak: 50,
            max_iterations: 200_000,
        }
    }
}

impl Scalar for f32 {
    fn default_tolerances() -> Tolerances<Self> {
        Tolerances {
            feasibility: 1e-3,
            optimality: 1e-4,
            integrality: 1e-3,
            lexicographic: 1e-4,
            pivot: 1e-5,
            degenerate_streak: 50,
            max_iterations: 200_000,
        }
    }
}

/// Numeric tolerances shared by every solve.
///
/// `lexicographic` is relative: the stage-one objective may degrade by at
/// most `lexicographic * max(1, |z1|)` while optimizing stage two.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances<T> {
    pub feasibility: T,
    pub optimality: T,
    pub integrality: T,
    pub lexicographic: T,
    pub pivot: T,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_streak: usize,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        T::default_tolerances()
    }
}

impl Tolerances<f64> {
    /// Default tolerances with overrides from `FLEETPLAN_EPS_FEAS`,
    /// `FLEETPLAN_EPS_OPT`, `FLEETPLAN_EPS_INT` and `FLEETPLAN_EPS_LEX`.
    pub fn from_env() -> Result<Self, LpError> {
        let mut tol = Self::default();
        let vars: [(&str, &mut f64); 4] = [
            ("FLEETPLAN_EPS_FEAS", &mut tol.feasibility),
            ("FLEETPLAN_EPS_OPT", &mut tol.optimality),
            ("FLEETPLAN_EPS_INT", &mut tol.integrality),
            ("FLEETPLAN_EPS_LEX", &mut tol.lexicographic),
        ];
        for (name, slot) in vars {
            if let Ok(raw) = std::env::var(name) {
                let value: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| LpError::Malformed(format!("{name}={raw:?} is not a number")))?;
                if !(value.is_finite() && value > 0.0) {
                    return Err(LpError::Malformed(format!("{name} must be positive, got {value}")));
                }
                *slot = value;
            }
        }
        Ok(tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a solve. For lexicographic programs `objective_value` is the
/// stage-one value and `secondary_value` the stage-two value.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub objective_value: T,
    pub secondary_value: Option<T>,
    pub values: Vec<T>,
    pub iterations: usize,
}

impl<T: Scalar> LpSolution<T> {
    pub(crate) fn without_point(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            objective_value: T::nan(),
            secondary_value: None,
            values: Vec::new(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("iteration limit of {0} simplex pivots exceeded")]
    IterationLimit(usize),
    #[error("node limit of {0} reached without an integer solution")]
    NodeLimit(usize),
}
