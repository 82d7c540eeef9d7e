//! Dense tableau two-phase primal simplex.
//!
//! Rows and columns are scaled by powers of two before the tableau is
//! built. Entering columns follow Dantzig's largest-coefficient rule until
//! a streak of degenerate pivots exceeds [`Tolerances::degenerate_streak`],
//! after which Bland's smallest-index rule is used until the next
//! non-degenerate pivot. The leaving row comes from a two-pass (Harris)
//! ratio test that prefers large pivots among near-ties. Equality rows with
//! a single free variable are presolved away before the tableau is built,
//! and the final point is recomputed from the scaled rows by an LU solve of
//! the basis whenever the tableau values have drifted.

use super::{LinearProgram, LpError, LpSolution, LpStatus, Objective, Relation, Scalar, Tolerances};

/// Programs with at most this many rows always get the basis re-solve.
const ALWAYS_POLISH_ROWS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
enum VarMap<T> {
    Fixed(T),
    /// `x = shift + scale * column`.
    Column { col: usize, shift: T, scale: T },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Unbounded,
    /// The dual simplex found a row that no pivot can make feasible.
    Infeasible,
}

impl Outcome {
    /// `Ok(false)` for an unbounded ray; a dual-infeasible row after a
    /// feasible phase one can only come from round-off.
    pub(crate) fn bounded(self) -> Result<bool, LpError> {
        match self {
            Outcome::Optimal => Ok(true),
            Outcome::Unbounded => Ok(false),
            Outcome::Infeasible => Err(LpError::NumericalBreakdown("feasibility lost during re-optimization".into())),
        }
    }
}

/// Relative size of the right-hand-side perturbation used against stalling.
const PERTURBATION: f64 = 1e-6;

/// Row-major tableau `B⁻¹[A | b]` plus the reduced-cost row of the current
/// (maximization) objective.
#[derive(Clone, Debug)]
pub(crate) struct Tableau<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    basis: Vec<usize>,
    enterable: Vec<bool>,
    costs: Vec<T>,
    reduced: Vec<T>,
    value: T,
    pub(crate) iterations: usize,
    /// Unperturbed right-hand side while a perturbation is active.
    shadow: Option<Vec<T>>,
    pivot_row: Vec<T>,
    nonzeros: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn rhs(&self, r: usize) -> T {
        self.data[r * self.width() + self.cols]
    }

    fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.width() + c]
    }

    /// Installs `costs` (one per column, maximization) and prices it
    /// against the current basis.
    pub(crate) fn set_objective(&mut self, costs: &[T]) {
        debug_assert_eq!(costs.len(), self.cols);
        let w = self.width();
        self.costs.clear();
        self.costs.extend_from_slice(costs);
        self.reduced.clear();
        self.reduced.extend_from_slice(costs);
        for r in 0..self.rows {
            let cb = costs[self.basis[r]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.data[r * w..(r + 1) * w];
            for (d, &a) in self.reduced.iter_mut().zip(row) {
                *d = *d - cb * a;
            }
        }
        for &b in &self.basis {
            self.reduced[b] = T::zero();
        }
        self.reprice_value();
    }

    fn reprice_value(&mut self) {
        self.value = (0..self.rows).fold(T::zero(), |acc, r| acc + self.costs[self.basis[r]] * self.rhs(r));
    }

    fn entering(&self, tol: &Tolerances<T>, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (j, &d) in self.reduced.iter().enumerate() {
            if !self.enterable[j] || d <= tol.optimality {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((j, d));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Two-pass ratio test. Returns the pivot row and the step length.
    fn leaving(&self, col: usize, tol: &Tolerances<T>, bland: bool) -> Option<(usize, T)> {
        let entry = |r: usize| (self.at(r, col), self.rhs(r).max(T::zero()));
        if bland {
            // Minimum ratio over pivots that are not negligible next to the
            // column's largest entry; near-ties go to the smallest basic index.
            let big = (0..self.rows).map(|r| self.at(r, col)).fold(T::zero(), T::max);
            let floor = tol.pivot.max(big * T::lit(1e-7));
            let mut best: Option<(usize, T)> = None;
            for r in 0..self.rows {
                let (a, b) = entry(r);
                if a <= floor {
                    continue;
                }
                let ratio = b / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        let tie = tol.pivot * (T::one() + bratio.abs());
                        if ratio < bratio - tie || (ratio <= bratio + tie && self.basis[r] < self.basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
            return best;
        }
        let mut bound: Option<T> = None;
        for r in 0..self.rows {
            let (a, b) = entry(r);
            if a > tol.pivot {
                let relaxed = (b + tol.feasibility) / a;
                bound = Some(bound.map_or(relaxed, |t: T| t.min(relaxed)));
            }
        }
        let bound = bound?;
        let mut best: Option<(usize, T, T)> = None;
        for r in 0..self.rows {
            let (a, b) = entry(r);
            if a <= tol.pivot {
                continue;
            }
            let ratio = b / a;
            if ratio <= bound && best.is_none_or(|(_, _, ba)| a > ba) {
                best = Some((r, ratio, a));
            }
        }
        best.map(|(r, ratio, _)| (r, ratio))
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let cols = self.cols;
        let inv = T::one() / self.data[r * w + c];
        self.pivot_row.clear();
        self.nonzeros.clear();
        for k in 0..w {
            let v = self.data[r * w + k] * inv;
            self.pivot_row.push(v);
            if v != T::zero() {
                self.nonzeros.push(k);
            }
        }
        self.pivot_row[c] = T::one();
        self.data[r * w..(r + 1) * w].copy_from_slice(&self.pivot_row);
        if let Some(shadow) = self.shadow.as_mut() {
            shadow[r] = shadow[r] * inv;
        }

        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            let f = row[c];
            if f == T::zero() {
                continue;
            }
            for &k in &self.nonzeros {
                row[k] = row[k] - f * self.pivot_row[k];
            }
            row[c] = T::zero();
            if let Some(shadow) = self.shadow.as_mut() {
                shadow[i] = shadow[i] - f * shadow[r];
            }
        }

        let f = self.reduced[c];
        if f != T::zero() {
            for &k in &self.nonzeros {
                if k < cols {
                    self.reduced[k] = self.reduced[k] - f * self.pivot_row[k];
                }
            }
            self.value = self.value + f * self.pivot_row[cols];
            self.reduced[c] = T::zero();
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    /// Raises every right-hand side by a small row-dependent amount so that
    /// ties in the ratio test disappear. The true values are tracked
    /// alongside and restored by [`Tableau::restore`].
    fn perturb(&mut self) {
        if self.shadow.is_some() {
            return;
        }
        let shadow: Vec<T> = (0..self.rows).map(|r| self.rhs(r)).collect();
        let w = self.width();
        for r in 0..self.rows {
            // Deterministic spread in [1, 2) from the golden-ratio sequence.
            let spread = T::one() + T::lit((r as f64 * 0.618_033_988_749_895).fract());
            let b = &mut self.data[r * w + self.cols];
            *b = b.max(T::zero()) + T::lit(PERTURBATION) * spread * (T::one() + b.abs());
        }
        self.shadow = Some(shadow);
        self.reprice_value();
    }

    fn restore(&mut self) {
        if let Some(shadow) = self.shadow.take() {
            let w = self.width();
            for (r, b) in shadow.into_iter().enumerate() {
                self.data[r * w + self.cols] = b;
            }
            self.reprice_value();
        }
    }

    fn primal_loop(&mut self, tol: &Tolerances<T>, allow_perturbation: bool) -> Result<Outcome, LpError> {
        let mut streak = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= tol.max_iterations {
                return Err(LpError::IterationLimit(tol.max_iterations));
            }
            let Some(col) = self.entering(tol, bland) else {
                return Ok(Outcome::Optimal);
            };
            let Some((row, ratio)) = self.leaving(col, tol, bland) else {
                return Ok(Outcome::Unbounded);
            };
            if ratio <= tol.feasibility {
                streak += 1;
                if streak > tol.degenerate_streak {
                    if allow_perturbation && self.shadow.is_none() {
                        self.perturb();
                        streak = 0;
                    } else if streak > 4 * tol.degenerate_streak {
                        bland = true;
                    }
                }
            } else {
                streak = 0;
                bland = false;
            }
            // A slightly negative basic value would make the step go backwards.
            let w = self.width();
            let b = &mut self.data[row * w + self.cols];
            if *b < T::zero() {
                *b = T::zero();
            }
            self.pivot(row, col);
        }
    }

    /// Dual simplex from a dual feasible basis until the right-hand side
    /// is nonnegative within tolerance.
    fn dual_loop(&mut self, tol: &Tolerances<T>) -> Result<Outcome, LpError> {
        loop {
            if self.iterations >= tol.max_iterations {
                return Err(LpError::IterationLimit(tol.max_iterations));
            }
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.rows {
                let b = self.rhs(r);
                if b < -tol.feasibility && leave.is_none_or(|(_, lb)| b < lb) {
                    leave = Some((r, b));
                }
            }
            let Some((row, _)) = leave else {
                return Ok(Outcome::Optimal);
            };
            let mut bound: Option<T> = None;
            for j in 0..self.cols {
                let a = self.at(row, j);
                if self.enterable[j] && a < -tol.pivot {
                    let relaxed = (self.reduced[j].min(T::zero()) - tol.optimality) / a;
                    bound = Some(bound.map_or(relaxed, |t: T| t.min(relaxed)));
                }
            }
            let Some(bound) = bound else {
                return Ok(Outcome::Infeasible);
            };
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.cols {
                let a = self.at(row, j);
                if !self.enterable[j] || a >= -tol.pivot {
                    continue;
                }
                let ratio = self.reduced[j].min(T::zero()) / a;
                if ratio <= bound && best.is_none_or(|(_, ba)| a.abs() > ba) {
                    best = Some((j, a.abs()));
                }
            }
            let (col, _) = best.expect("the bound is attained by some column");
            self.pivot(row, col);
        }
    }

    /// Optimizes the installed objective: primal simplex (perturbed when it
    /// stalls), then dual clean-up of whatever infeasibility removing the
    /// perturbation leaves behind.
    pub(crate) fn optimize(&mut self, tol: &Tolerances<T>) -> Result<Outcome, LpError> {
        let mut outcome = self.primal_loop(tol, true)?;
        self.restore();
        for _ in 0..8 {
            if outcome != Outcome::Optimal {
                return Ok(outcome);
            }
            match self.dual_loop(tol)? {
                Outcome::Optimal => {}
                other => return Ok(other),
            }
            if self.entering(tol, false).is_none() {
                return Ok(Outcome::Optimal);
            }
            outcome = self.primal_loop(tol, false)?;
        }
        Err(LpError::NumericalBreakdown("primal and dual clean-up did not settle".into()))
    }

    /// Restores feasibility after a right-hand-side change with the dual
    /// simplex and re-optimizes.
    pub(crate) fn reoptimize(&mut self, tol: &Tolerances<T>) -> Result<Outcome, LpError> {
        match self.dual_loop(tol)? {
            Outcome::Optimal => self.optimize(tol),
            other => Ok(other),
        }
    }

    /// Appends the row `coeffs · x + s = rhs` with a fresh basic slack `s`.
    /// `coeffs` must vanish on basic columns.
    fn append_row(&mut self, coeffs: &[T], rhs: T) {
        debug_assert_eq!(coeffs.len(), self.cols);
        debug_assert!(self.shadow.is_none());
        let old_w = self.width();
        let cols = self.cols + 1;
        let w = cols + 1;
        let mut data = Vec::with_capacity((self.rows + 1) * w);
        for r in 0..self.rows {
            let row = &self.data[r * old_w..(r + 1) * old_w];
            data.extend_from_slice(&row[..self.cols]);
            data.push(T::zero());
            data.push(row[self.cols]);
        }
        data.extend_from_slice(coeffs);
        data.push(T::one());
        data.push(rhs);
        self.basis.push(self.cols);
        self.costs.push(T::zero());
        self.reduced.push(T::zero());
        self.enterable.push(true);
        self.data = data;
        self.rows += 1;
        self.cols = cols;
    }

    /// Basic solution over all columns.
    fn point(&self) -> Vec<T> {
        let mut x = vec![T::zero(); self.cols];
        for (r, &b) in self.basis.iter().enumerate() {
            x[b] = self.rhs(r).max(T::zero());
        }
        x
    }
}

/// Solves the dense `n × n` system `a x = b` (row-major) by Gaussian
/// elimination with partial pivoting. `None` if numerically singular.
fn solve_dense<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>, n: usize, tiny: T) -> Option<Vec<T>> {
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().partial_cmp(&a[j * n + k].abs()).unwrap())?;
        if a[p * n + k].abs() <= tiny {
            return None;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let inv = T::one() / a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] * inv;
            if f == T::zero() {
                continue;
            }
            for c in k..n {
                a[i * n + c] = a[i * n + c] - f * a[k * n + c];
            }
            b[i] = b[i] - f * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for c in k + 1..n {
            acc = acc - a[k * n + c] * b[c];
        }
        b[k] = acc / a[k * n + k];
    }
    Some(b)
}

fn power_of_two_below<T: Scalar>(magnitude: T) -> T {
    // 2^-round(log2 m), so that the scaled magnitude lies in [1/√2, √2).
    let e = magnitude.log2().round();
    T::lit(2.0).powf(-e)
}

/// A program converted to `max c·x, Ax = b, x ≥ 0` with an initial basis.
#[derive(Clone, Debug)]
pub(crate) struct StandardForm<T> {
    pub(crate) tableau: Tableau<T>,
    var_map: Vec<VarMap<T>>,
    artificial_start: usize,
    /// Scaled rows `A` (slack columns included, artificials excluded) and
    /// `b`, aligned with the tableau rows.
    rows: Vec<(Vec<(usize, T)>, T)>,
    /// Per source constraint with a slack column: that column and the
    /// factor `σ k` turning an original right-hand-side change into a
    /// multiple of the slack column.
    rhs_handles: Vec<Option<(usize, T)>>,
}

/// Fixes variables determined by equality rows with one free variable.
/// Returns `None` when a fixing contradicts the variable's bounds.
fn presolve<T: Scalar>(lp: &LinearProgram<T>, tol: &Tolerances<T>) -> Option<Vec<Option<T>>> {
    let mut fixed: Vec<Option<T>> = (0..lp.num_vars)
        .map(|v| match lp.upper[v] {
            Some(u) if u == lp.lower[v] => Some(u),
            _ => None,
        })
        .collect();
    loop {
        let mut changed = false;
        for con in lp.constraints.iter().filter(|c| c.relation == Relation::Eq) {
            let mut free: Option<(usize, T)> = None;
            let mut singleton = true;
            let mut rhs = con.rhs;
            for &(v, c) in &con.terms {
                if let Some(val) = fixed[v] {
                    rhs = rhs - c * val;
                    continue;
                }
                match free {
                    None => free = Some((v, c)),
                    Some((fv, fc)) if fv == v => free = Some((fv, fc + c)),
                    Some(_) => {
                        singleton = false;
                        break;
                    }
                }
            }
            let Some((v, a)) = free else { continue };
            if !singleton || a.abs() <= tol.pivot {
                continue;
            }
            let mut value = rhs / a;
            if value < lp.lower[v] - tol.feasibility {
                return None;
            }
            if let Some(u) = lp.upper[v] {
                if value > u + tol.feasibility {
                    return None;
                }
                value = value.min(u);
            }
            fixed[v] = Some(value.max(lp.lower[v]));
            changed = true;
        }
        if !changed {
            return Some(fixed);
        }
    }
}

impl<T: Scalar> StandardForm<T> {
    /// Returns `Ok(None)` when presolve already proves infeasibility.
    pub(crate) fn build(lp: &LinearProgram<T>, tol: &Tolerances<T>) -> Result<Option<Self>, LpError> {
        let Some(fixed) = presolve(lp, tol) else {
            return Ok(None);
        };
        let mut columns: Vec<(usize, T)> = Vec::with_capacity(lp.num_vars);
        let mut col_of: Vec<Option<usize>> = Vec::with_capacity(lp.num_vars);
        for v in 0..lp.num_vars {
            if fixed[v].is_some() {
                col_of.push(None);
            } else {
                col_of.push(Some(columns.len()));
                columns.push((v, lp.lower[v]));
            }
        }
        let structural = columns.len();

        // (terms, relation, rhs, source constraint, accumulated row multiplier)
        let mut rows: Vec<(Vec<(usize, T)>, Relation, T, Option<usize>, T)> = Vec::with_capacity(lp.constraints.len());
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for (ci, con) in lp.constraints.iter().enumerate() {
            scratch.clear();
            let mut rhs = con.rhs;
            for &(v, c) in &con.terms {
                match (fixed[v], col_of[v]) {
                    (Some(val), _) => rhs = rhs - c * val,
                    (None, Some(col)) => {
                        scratch.push((col, c));
                        rhs = rhs - c * lp.lower[v];
                    }
                    (None, None) => unreachable!("free variable without a column"),
                }
            }
            scratch.sort_by_key(|&(col, _)| col);
            let mut terms: Vec<(usize, T)> = Vec::with_capacity(scratch.len());
            for &(col, c) in &scratch {
                match terms.last_mut() {
                    Some((last, acc)) if *last == col => *acc = *acc + c,
                    _ => terms.push((col, c)),
                }
            }
            terms.retain(|&(_, c)| c != T::zero());
            if terms.is_empty() {
                let violated = match con.relation {
                    Relation::Le => rhs < -tol.feasibility,
                    Relation::Ge => rhs > tol.feasibility,
                    Relation::Eq => rhs.abs() > tol.feasibility,
                };
                if violated {
                    return Ok(None);
                }
                continue;
            }
            rows.push((terms, con.relation, rhs, Some(ci), T::one()));
        }
        for (col, &(v, shift)) in columns.iter().enumerate() {
            if let Some(u) = lp.upper[v] {
                rows.push((vec![(col, T::one())], Relation::Le, u - shift, None, T::one()));
            }
        }

        // Equilibrate: rows to unit max magnitude, then columns.
        for (terms, _, rhs, _, mult) in rows.iter_mut() {
            let big = terms.iter().fold(T::zero(), |m, &(_, c)| m.max(c.abs()));
            let k = power_of_two_below(big);
            for (_, c) in terms.iter_mut() {
                *c = *c * k;
            }
            *rhs = *rhs * k;
            *mult = k;
        }
        let mut col_max = vec![T::zero(); structural];
        for (terms, ..) in &rows {
            for &(col, c) in terms {
                col_max[col] = col_max[col].max(c.abs());
            }
        }
        let col_scale: Vec<T> =
            col_max.iter().map(|&m| if m > T::zero() { power_of_two_below(m) } else { T::one() }).collect();
        for (terms, ..) in rows.iter_mut() {
            for (col, c) in terms.iter_mut() {
                *c = *c * col_scale[*col];
            }
        }
        let var_map = (0..lp.num_vars)
            .map(|v| match (fixed[v], col_of[v]) {
                (Some(val), _) => VarMap::Fixed(val),
                (None, Some(col)) => VarMap::Column { col, shift: lp.lower[v], scale: col_scale[col] },
                (None, None) => unreachable!("free variable without a column"),
            })
            .collect();

        for (terms, relation, rhs, _, mult) in rows.iter_mut() {
            if *rhs < T::zero() {
                for (_, c) in terms.iter_mut() {
                    *c = -*c;
                }
                *rhs = -*rhs;
                *mult = -*mult;
                *relation = match *relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let artificial_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let artificial_start = structural + slack_count;
        let cols = artificial_start + artificial_count;
        let w = cols + 1;
        let m = rows.len();
        let mut data = vec![T::zero(); m * w];
        let mut basis = Vec::with_capacity(m);
        let mut original = Vec::with_capacity(m);
        let mut rhs_handles = vec![None; lp.constraints.len()];
        let (mut next_slack, mut next_art) = (structural, artificial_start);
        for (r, (terms, relation, rhs, source, mult)) in rows.into_iter().enumerate() {
            if let Some(ci) = source {
                match relation {
                    Relation::Le => rhs_handles[ci] = Some((next_slack, mult)),
                    Relation::Ge => rhs_handles[ci] = Some((next_slack, -mult)),
                    Relation::Eq => {}
                }
            }
            let row = &mut data[r * w..(r + 1) * w];
            for &(col, c) in &terms {
                row[col] = c;
            }
            row[cols] = rhs;
            let mut kept = terms;
            match relation {
                Relation::Le => {
                    row[next_slack] = T::one();
                    kept.push((next_slack, T::one()));
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -T::one();
                    kept.push((next_slack, -T::one()));
                    next_slack += 1;
                    row[next_art] = T::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = T::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            original.push((kept, rhs));
        }

        Ok(Some(Self {
            tableau: Tableau {
                rows: m,
                cols,
                data,
                basis,
                enterable: vec![true; cols],
                costs: vec![T::zero(); cols],
                reduced: vec![T::zero(); cols],
                value: T::zero(),
                iterations: 0,
                shadow: None,
                pivot_row: Vec::with_capacity(w),
                nonzeros: Vec::with_capacity(w),
            },
            var_map,
            artificial_start,
            rows: original,
            rhs_handles,
        }))
    }

    /// Minimizes the sum of artificials, drives them out of the basis and
    /// drops their columns. Returns `false` if the program is infeasible.
    pub(crate) fn phase_one(&mut self, tol: &Tolerances<T>) -> Result<bool, LpError> {
        let start = self.artificial_start;
        let t = &mut self.tableau;
        if start == t.cols {
            return Ok(true);
        }
        let costs: Vec<T> = (0..t.cols).map(|j| if j >= start { -T::one() } else { T::zero() }).collect();
        t.set_objective(&costs);
        if t.optimize(tol)? != Outcome::Optimal {
            return Err(LpError::NumericalBreakdown("phase one lost feasibility".into()));
        }
        if -t.value > tol.feasibility {
            return Ok(false);
        }

        for j in start..t.cols {
            t.enterable[j] = false;
        }
        let w = t.width();
        let mut redundant = vec![false; t.rows];
        for r in 0..t.rows {
            if t.basis[r] < start {
                continue;
            }
            let row = &t.data[r * w..(r + 1) * w];
            let mut best: Option<(usize, T)> = None;
            for (j, &a) in row[..start].iter().enumerate() {
                if a.abs() > tol.pivot && best.is_none_or(|(_, ba)| a.abs() > ba) {
                    best = Some((j, a.abs()));
                }
            }
            match best {
                Some((j, _)) => t.pivot(r, j),
                None => redundant[r] = true,
            }
        }

        let keep_cols = start;
        let new_w = keep_cols + 1;
        let kept = redundant.iter().filter(|&&x| !x).count();
        let mut data = Vec::with_capacity(kept * new_w);
        let mut basis = Vec::with_capacity(kept);
        for r in 0..t.rows {
            if redundant[r] {
                continue;
            }
            let row = &t.data[r * w..(r + 1) * w];
            data.extend_from_slice(&row[..keep_cols]);
            data.push(row[t.cols]);
            basis.push(t.basis[r]);
        }
        let mut r = 0;
        self.rows.retain(|_| {
            r += 1;
            !redundant[r - 1]
        });
        t.rows = basis.len();
        t.cols = keep_cols;
        t.data = data;
        t.basis = basis;
        t.enterable = vec![true; keep_cols];
        t.costs = vec![T::zero(); keep_cols];
        t.reduced = vec![T::zero(); keep_cols];
        Ok(true)
    }

    /// Per-column maximization costs for `objective`.
    pub(crate) fn column_costs(&self, objective: &Objective<T>) -> Vec<T> {
        let sign: T = objective.sense.sign();
        let mut costs = vec![T::zero(); self.tableau.cols];
        for (v, map) in self.var_map.iter().enumerate() {
            if let VarMap::Column { col, scale, .. } = *map {
                costs[col] = sign * objective.coefficients[v] * scale;
            }
        }
        costs
    }

    /// After optimizing `costs`, adds the cut `costs · x ≥ z* − slack`
    /// that keeps the current optimum feasible.
    pub(crate) fn append_objective_cut(&mut self, costs: &[T], slack: T) {
        let t = &self.tableau;
        let is_basic: Vec<bool> = {
            let mut b = vec![false; t.cols];
            for &c in &t.basis {
                b[c] = true;
            }
            b
        };
        // costs · x = z* + Σ d_j x_j over nonbasic columns, d_j ≤ 0.
        let cut: Vec<T> = (0..t.cols).map(|j| if is_basic[j] { T::zero() } else { -t.reduced[j] }).collect();
        let z = t.value;
        let new_col = t.cols;
        let mut row: Vec<(usize, T)> =
            costs.iter().enumerate().filter(|(_, c)| **c != T::zero()).map(|(j, &c)| (j, -c)).collect();
        row.push((new_col, T::one()));
        self.rows.push((row, slack - z));
        self.tableau.append_row(&cut, slack);
    }

    /// Changes the right-hand side of inequality constraint `ci` by `delta`
    /// in place. The basis is kept; its values may turn negative, which
    /// [`Tableau::reoptimize`] repairs.
    pub(crate) fn shift_rhs(&mut self, ci: usize, delta: T) -> Result<(), LpError> {
        let Some((slack, factor)) = self.rhs_handles.get(ci).copied().flatten() else {
            return Err(LpError::Malformed(format!("constraint {ci} has no slack column to shift")));
        };
        let scaled = delta * factor;
        let t = &mut self.tableau;
        debug_assert!(t.shadow.is_none());
        let w = t.width();
        for r in 0..t.rows {
            let a = t.data[r * w + slack];
            if a != T::zero() {
                t.data[r * w + t.cols] = t.data[r * w + t.cols] + scaled * a;
            }
        }
        t.reprice_value();
        // The slack enters its own scaled row with coefficient σ = ±1.
        for (terms, rhs) in self.rows.iter_mut() {
            if let Some(&(_, sigma)) = terms.iter().find(|&&(col, _)| col == slack) {
                *rhs = *rhs + delta * factor * sigma;
                break;
            }
        }
        Ok(())
    }

    fn to_original(&self, x: &[T]) -> Vec<T> {
        self.var_map
            .iter()
            .map(|map| match *map {
                VarMap::Fixed(val) => val,
                VarMap::Column { col, shift, scale } => shift + scale * x[col],
            })
            .collect()
    }

    /// Basic solution recomputed from the scaled rows.
    fn polished_point(&self, tol: &Tolerances<T>) -> Option<Vec<T>> {
        let t = &self.tableau;
        let n = t.rows;
        let mut pos = vec![usize::MAX; t.cols];
        for (k, &c) in t.basis.iter().enumerate() {
            pos[c] = k;
        }
        let mut a = vec![T::zero(); n * n];
        let mut b = Vec::with_capacity(n);
        for (r, (terms, rhs)) in self.rows.iter().enumerate() {
            for &(col, c) in terms {
                if pos[col] != usize::MAX {
                    a[r * n + pos[col]] = c;
                }
            }
            b.push(*rhs);
        }
        let xb = solve_dense(a, b, n, tol.pivot * tol.pivot)?;
        let mut x = vec![T::zero(); t.cols];
        for (k, &c) in t.basis.iter().enumerate() {
            x[c] = xb[k].max(T::zero());
        }
        Some(x)
    }

    /// The optimal point in terms of the original variables, checked
    /// against `lp`.
    pub(crate) fn solution(&self, lp: &LinearProgram<T>, tol: &Tolerances<T>) -> Result<Vec<T>, LpError> {
        let mut values = self.to_original(&self.tableau.point());
        let mut violation = lp.max_violation(&values);
        if violation > tol.feasibility * T::lit(1e-3) || self.tableau.rows <= ALWAYS_POLISH_ROWS {
            if let Some(x) = self.polished_point(tol) {
                let polished = self.to_original(&x);
                let v = lp.max_violation(&polished);
                if v <= violation {
                    values = polished;
                    violation = v;
                }
            }
        }
        if violation > tol.feasibility {
            return Err(LpError::NumericalBreakdown(format!(
                "optimal basis violates the program by {violation:e} (tolerance {:e})",
                tol.feasibility
            )));
        }
        Ok(values)
    }
}

/// Packages a checked point.
pub(crate) fn finish<T: Scalar>(lp: &LinearProgram<T>, values: Vec<T>, iterations: usize) -> LpSolution<T> {
    LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective.value(&values),
        secondary_value: None,
        values,
        iterations,
    }
}

/// Solves `lp` with the two-phase simplex method.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>, tol: &Tolerances<T>) -> Result<LpSolution<T>, LpError> {
    lp.validate()?;
    Ok(cold_solve(lp, tol)?.0)
}

/// Solves `lp` once per entry of `steps`, where step `k` overrides the
/// right-hand sides listed in `steps[0..=k]` (later entries win). Only
/// inequality constraints may be overridden. Each step starts from the
/// previous optimal basis and repairs it with the dual simplex; a step
/// that fails that way is solved from scratch.
pub fn solve_lp_sequence<T: Scalar>(
    lp: &LinearProgram<T>,
    steps: &[Vec<(usize, T)>],
    tol: &Tolerances<T>,
) -> Result<Vec<LpSolution<T>>, LpError> {
    lp.validate()?;
    let mut current = lp.clone();
    for &(ci, _) in steps.iter().flatten() {
        match current.constraints.get(ci) {
            Some(c) if c.relation != Relation::Eq => {}
            _ => return Err(LpError::Malformed(format!("constraint {ci} cannot take a right-hand-side override"))),
        }
    }
    let mut warm: Option<StandardForm<T>> = None;
    let mut out = Vec::with_capacity(steps.len());
    for step in steps {
        let mut shifts = Vec::with_capacity(step.len());
        for &(ci, rhs) in step {
            shifts.push((ci, rhs - current.constraints[ci].rhs));
            current.constraints[ci].rhs = rhs;
        }
        let mut solved = None;
        if let Some(mut form) = warm.take() {
            if let Ok(sol) = warm_step(&mut form, &current, &shifts, tol) {
                solved = Some(sol);
                warm = Some(form);
            }
        }
        let sol = match solved {
            Some(sol) => sol,
            None => {
                let (sol, form) = cold_solve(&current, tol)?;
                warm = form;
                sol
            }
        };
        out.push(sol);
    }
    Ok(out)
}

fn warm_step<T: Scalar>(
    form: &mut StandardForm<T>,
    lp: &LinearProgram<T>,
    shifts: &[(usize, T)],
    tol: &Tolerances<T>,
) -> Result<LpSolution<T>, LpError> {
    let before = form.tableau.iterations;
    for &(ci, delta) in shifts {
        form.shift_rhs(ci, delta)?;
    }
    if !form.tableau.reoptimize(tol)?.bounded()? {
        return Err(LpError::NumericalBreakdown("warm start became unbounded".into()));
    }
    let values = form.solution(lp, tol)?;
    Ok(finish(lp, values, form.tableau.iterations - before))
}

/// Full two-phase solve that also hands back the optimal tableau.
fn cold_solve<T: Scalar>(
    lp: &LinearProgram<T>,
    tol: &Tolerances<T>,
) -> Result<(LpSolution<T>, Option<StandardForm<T>>), LpError> {
    let Some(mut form) = StandardForm::build(lp, tol)? else {
        return Ok((LpSolution::without_point(LpStatus::Infeasible, 0), None));
    };
    if !form.phase_one(tol)? {
        return Ok((LpSolution::without_point(LpStatus::Infeasible, form.tableau.iterations), None));
    }
    let costs = form.column_costs(&lp.objective);
    form.tableau.set_objective(&costs);
    if !form.tableau.optimize(tol)?.bounded()? {
        return Ok((LpSolution::without_point(LpStatus::Unbounded, form.tableau.iterations), None));
    }
    let values = form.solution(lp, tol)?;
    let iterations = form.tableau.iterations;
    Ok((finish(lp, values, iterations), Some(form)))
}
