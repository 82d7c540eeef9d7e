use super::simplex::{finish, StandardForm};
use super::{LinearProgram, LpError, LpSolution, LpStatus, Objective, Relation, Scalar, Sense, Tolerances};

/// Two-stage program: optimize `program.objective`, then `secondary` over
/// the (near-)optimal face of the first stage.
#[derive(Clone, Debug, PartialEq)]
pub struct LexicographicProgram<T> {
    pub program: LinearProgram<T>,
    pub secondary: Objective<T>,
}

impl<T: Scalar> LexicographicProgram<T> {
    pub fn new(program: LinearProgram<T>, secondary: Objective<T>) -> Self {
        Self { program, secondary }
    }

    pub fn validate(&self) -> Result<(), LpError> {
        self.program.validate()?;
        if self.secondary.coefficients.len() != self.program.num_vars {
            return Err(LpError::Malformed(format!(
                "secondary objective has {} coefficients, expected {}",
                self.secondary.coefficients.len(),
                self.program.num_vars
            )));
        }
        if self.secondary.coefficients.iter().any(|c| !c.is_finite()) || !self.secondary.offset.is_finite() {
            return Err(LpError::Malformed("secondary objective contains a non-finite value".into()));
        }
        Ok(())
    }
}

fn stage_one_slack<T: Scalar>(z1: T, tol: &Tolerances<T>) -> T {
    tol.lexicographic * z1.abs().max(T::one())
}

/// Constrain-and-reoptimize on a single tableau: after stage one the cut
/// `z1(x) ≥ z1* − ε_lex` is appended in terms of the current nonbasic
/// columns (so the optimal basis stays feasible) and stage two continues
/// from there.
pub fn solve_lexicographic<T: Scalar>(
    p: &LexicographicProgram<T>,
    tol: &Tolerances<T>,
) -> Result<LpSolution<T>, LpError> {
    p.validate()?;
    let lp = &p.program;
    let Some(mut form) = StandardForm::build(lp, tol)? else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    };
    if !form.phase_one(tol)? {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, form.tableau.iterations));
    }
    let costs = form.column_costs(&lp.objective);
    form.tableau.set_objective(&costs);
    if !form.tableau.optimize(tol)?.bounded()? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, form.tableau.iterations));
    }
    let z1 = lp.objective.value(&form.solution(lp, tol)?);
    form.append_objective_cut(&costs, stage_one_slack(z1, tol));

    let costs = form.column_costs(&p.secondary);
    form.tableau.set_objective(&costs);
    if !form.tableau.optimize(tol)?.bounded()? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, form.tableau.iterations));
    }
    let values = form.solution(lp, tol)?;
    let mut sol = finish(lp, values, form.tableau.iterations);
    sol.secondary_value = Some(p.secondary.value(&sol.values));
    Ok(sol)
}

/// Reference route: solve stage one, append the stage-one cut to the
/// program and solve stage two from scratch.
pub fn solve_lexicographic_cold<T: Scalar>(
    p: &LexicographicProgram<T>,
    tol: &Tolerances<T>,
) -> Result<LpSolution<T>, LpError> {
    p.validate()?;
    let first = super::solve_lp(&p.program, tol)?;
    if !first.is_optimal() {
        return Ok(first);
    }
    let z1 = first.objective_value;
    let slack = stage_one_slack(z1, tol);
    let mut second = p.program.clone();
    let terms: Vec<(usize, T)> = p
        .program
        .objective
        .coefficients
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != T::zero())
        .map(|(v, &c)| (v, c))
        .collect();
    let base = z1 - p.program.objective.offset;
    match p.program.objective.sense {
        Sense::Maximize => second.add_constraint(terms, Relation::Ge, base - slack),
        Sense::Minimize => second.add_constraint(terms, Relation::Le, base + slack),
    }
    second.objective = p.secondary.clone();
    let sol = super::solve_lp(&second, tol)?;
    if !sol.is_optimal() {
        return Ok(LpSolution { iterations: first.iterations + sol.iterations, ..sol });
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: p.program.objective.value(&sol.values),
        secondary_value: Some(sol.objective_value),
        iterations: first.iterations + sol.iterations,
        values: sol.values,
    })
}
