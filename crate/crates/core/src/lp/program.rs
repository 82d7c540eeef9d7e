use super::{LpError, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    /// Multiplier that turns the objective into a maximization.
    pub(crate) fn sign<T: Scalar>(self) -> T {
        match self {
            Sense::Maximize => T::one(),
            Sense::Minimize => -T::one(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// Dense objective `offset + coefficients · x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective<T> {
    pub sense: Sense,
    pub coefficients: Vec<T>,
    pub offset: T,
}

impl<T: Scalar> Objective<T> {
    pub fn new(sense: Sense, coefficients: Vec<T>) -> Self {
        Self { sense, coefficients, offset: T::zero() }
    }

    pub fn with_offset(mut self, offset: T) -> Self {
        self.offset = offset;
        self
    }

    pub fn value(&self, x: &[T]) -> T {
        self.coefficients
            .iter()
            .zip(x)
            .fold(self.offset, |acc, (&c, &v)| acc + c * v)
    }
}

/// Sparse row `Σ coef·x_var  (relation)  rhs`. Repeated indices are summed.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint<T> {
    pub terms: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

impl<T: Scalar> Constraint<T> {
    pub fn new(terms: Vec<(usize, T)>, relation: Relation, rhs: T) -> Self {
        Self { terms, relation, rhs }
    }

    pub fn activity(&self, x: &[T]) -> T {
        self.terms.iter().fold(T::zero(), |acc, &(v, c)| acc + c * x[v])
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[T]) -> T {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(T::zero()),
            Relation::Ge => (self.rhs - lhs).max(T::zero()),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A linear program over `num_vars` variables with finite lower bounds
/// (default zero) and optional upper bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    pub objective: Objective<T>,
    pub constraints: Vec<Constraint<T>>,
    pub lower: Vec<T>,
    pub upper: Vec<Option<T>>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(objective: Objective<T>) -> Self {
        let num_vars = objective.coefficients.len();
        Self {
            num_vars,
            objective,
            constraints: Vec::new(),
            lower: vec![T::zero(); num_vars],
            upper: vec![None; num_vars],
        }
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, T)>, relation: Relation, rhs: T) {
        self.constraints.push(Constraint::new(terms, relation, rhs));
    }

    pub fn set_bounds(&mut self, var: usize, lower: T, upper: Option<T>) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars;
        if self.objective.coefficients.len() != n {
            return Err(LpError::Malformed(format!(
                "objective has {} coefficients, expected {n}",
                self.objective.coefficients.len()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors do not match num_vars".into()));
        }
        if !self.objective.offset.is_finite() || self.objective.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("objective contains a non-finite value".into()));
        }
        for (row, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {row} has a non-finite right-hand side")));
            }
            for &(v, c) in &con.terms {
                if v >= n {
                    return Err(LpError::Malformed(format!("row {row} references variable {v} >= {n}")));
                }
                if !c.is_finite() {
                    return Err(LpError::Malformed(format!("row {row} has a non-finite coefficient")));
                }
            }
        }
        for v in 0..n {
            if !self.lower[v].is_finite() {
                return Err(LpError::Malformed(format!("variable {v} has a non-finite lower bound")));
            }
            if let Some(u) = self.upper[v] {
                if !u.is_finite() || u < self.lower[v] {
                    return Err(LpError::Malformed(format!("variable {v} has an invalid upper bound")));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(T::zero(), T::max);
        (0..self.num_vars).fold(rows, |acc, v| {
            let below = (self.lower[v] - x[v]).max(T::zero());
            let above = self.upper[v].map_or(T::zero(), |u| (x[v] - u).max(T::zero()));
            acc.max(below).max(above)
        })
    }
}
