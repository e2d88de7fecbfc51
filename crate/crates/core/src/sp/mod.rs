//! Two-stage stochastic programs with LP recourse: L-shaped decomposition,
//! regularized stochastic decomposition and statistical validation.
//!
//! The recourse problem is a fixed LP whose variable or row bounds are affine
//! in the first-stage decision `x` and the random vector `ξ`:
//! `bound = constant + Σ a_j x_j + Σ b_d ξ_d`. Dual information of an optimal
//! basis therefore yields an affine minorant of `Q(·, ·)` valid everywhere.

mod lshaped;
mod qp;
mod sd;
mod validate;

pub use lshaped::{solve_lshaped, LShapedOptions, LShapedSolution};
pub use qp::{solve_qp, QpProblem, QpSolution};
pub use sd::{solve_sd, FnSampler, ListSampler, Sampler, SdIteration, SdOptions, SdSolution, SdState};
pub use validate::{validate_statistical_optimality, ValidationOptions, ValidationReport};

use crate::error::{invalid, Error, Result};
use crate::lp::{LinearProgram, LpSolution, LpStatus, RowSense, SimplexOptions, SimplexSolver, VarStatus};
use crate::mip::MixedIntegerProgram;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingTarget {
    Var(usize),
    Row(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
    /// Both bounds (an equality).
    Both,
}

/// One recourse bound that moves with the first stage and/or the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<T> {
    pub target: CouplingTarget,
    pub side: BoundSide,
    pub constant: T,
    pub first_stage: Vec<(usize, T)>,
    pub random: Vec<(usize, T)>,
}

impl<T: Scalar> Coupling<T> {
    pub fn value(&self, x: &[T], xi: &[T]) -> T {
        self.constant
            + self.first_stage.iter().map(|&(j, a)| a * x[j]).sum::<T>()
            + self.random.iter().map(|&(d, b)| b * xi[d]).sum::<T>()
    }

    fn covers(&self, side: BoundSide) -> bool {
        self.side == BoundSide::Both || self.side == side
    }
}

#[derive(Debug, Clone)]
pub struct TwoStageProblem<T> {
    /// First-stage problem; `binaries` may be empty for an LP first stage.
    pub first_stage: MixedIntegerProgram<T>,
    pub recourse: LinearProgram<T>,
    pub couplings: Vec<Coupling<T>>,
    /// Length of the scenario vector `ξ`.
    pub xi_dim: usize,
}

/// Finite distribution of `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenarios<T> {
    pub xi: Vec<Vec<T>>,
    pub prob: Vec<T>,
}

impl<T: Scalar> Scenarios<T> {
    pub fn equiprobable(xi: Vec<Vec<T>>) -> Self {
        let p = T::one() / T::of(xi.len() as f64);
        let prob = vec![p; xi.len()];
        Self { xi, prob }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn mean(&self) -> Vec<T> {
        let d = self.xi.first().map_or(0, |v| v.len());
        let mut m = vec![T::zero(); d];
        for (p, v) in self.prob.iter().zip(&self.xi) {
            for (a, b) in m.iter_mut().zip(v) {
                *a += *p * *b;
            }
        }
        m
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.xi.is_empty() || self.xi.len() != self.prob.len() {
            return Err(invalid("scenario set is empty or has mismatched probabilities"));
        }
        if self.xi.iter().any(|v| v.len() != dim) {
            return Err(invalid(format!("scenario vectors must have length {dim}")));
        }
        let total: f64 = self.prob.iter().map(|p| p.as_f64()).sum();
        let slack = (T::epsilon().as_f64() * 4.0 * self.prob.len() as f64).max(1e-9);
        if (total - 1.0).abs() > slack || self.prob.iter().any(|p| *p < T::zero()) {
            return Err(invalid("scenario probabilities must be nonnegative and sum to one"));
        }
        Ok(())
    }
}

impl<T: Scalar> TwoStageProblem<T> {
    pub fn num_first_stage(&self) -> usize {
        self.first_stage.lp.num_vars()
    }

    pub fn validate(&self) -> Result<()> {
        self.first_stage.validate()?;
        self.recourse.validate()?;
        let n1 = self.num_first_stage();
        for (k, c) in self.couplings.iter().enumerate() {
            let in_range = match c.target {
                CouplingTarget::Var(j) => j < self.recourse.num_vars(),
                CouplingTarget::Row(i) => i < self.recourse.num_rows(),
            };
            if !in_range
                || c.first_stage.iter().any(|&(j, _)| j >= n1)
                || c.random.iter().any(|&(d, _)| d >= self.xi_dim)
            {
                return Err(invalid(format!("coupling {k} references an index out of range")));
            }
        }
        Ok(())
    }

    /// First-stage cost `cᵀx` (including the constant offset).
    pub fn first_stage_cost(&self, x: &[T]) -> T {
        self.first_stage.lp.objective_value(x)
    }
}

/// Affine minorant `Q(x, ξ) >= intercept + gradient·x + xi_gradient·ξ`
/// built from one dual-feasible recourse basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVertex<T> {
    pub intercept: T,
    pub gradient: Vec<(usize, T)>,
    pub xi_gradient: Vec<(usize, T)>,
}

impl<T: Scalar> DualVertex<T> {
    pub fn value(&self, x: &[T], xi: &[T]) -> T {
        self.intercept
            + self.gradient.iter().map(|&(j, a)| a * x[j]).sum::<T>()
            + self.xi_gradient.iter().map(|&(d, b)| b * xi[d]).sum::<T>()
    }

    /// Value at `xi` of the part that does not depend on `x`.
    pub fn xi_part(&self, xi: &[T]) -> T {
        self.intercept + self.xi_gradient.iter().map(|&(d, b)| b * xi[d]).sum::<T>()
    }
}

/// Optimality cut `θ >= intercept + gradient·x` on expected recourse.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityCut<T> {
    pub intercept: T,
    pub gradient: Vec<T>,
    /// Iteration (L-shaped round or SD sample count) that produced the cut.
    pub origin: usize,
}

impl<T: Scalar> OptimalityCut<T> {
    pub fn value(&self, x: &[T]) -> T {
        self.intercept + self.gradient.iter().zip(x).map(|(a, b)| *a * *b).sum::<T>()
    }
}

/// Reusable recourse solver: sets coupled bounds for `(x, ξ)` and re-solves
/// from the previous basis.
pub struct RecourseEvaluator<'a, T: Scalar> {
    problem: &'a TwoStageProblem<T>,
    solver: SimplexSolver<T>,
    /// For every column of the logical form (structurals then rows), the
    /// coupling driving its lower and upper bound.
    lower_src: Vec<Option<usize>>,
    upper_src: Vec<Option<usize>>,
    /// Columns whose two bounds coincide for every `(x, ξ)`.
    fixed: Vec<bool>,
    pub solves: usize,
    pub pivots: usize,
}

impl<'a, T: Scalar> RecourseEvaluator<'a, T> {
    pub fn new(problem: &'a TwoStageProblem<T>) -> Self {
        let n = problem.recourse.num_vars();
        let total = n + problem.recourse.num_rows();
        let mut lower_src = vec![None; total];
        let mut upper_src = vec![None; total];
        for (k, c) in problem.couplings.iter().enumerate() {
            let col = match c.target {
                CouplingTarget::Var(j) => j,
                CouplingTarget::Row(i) => n + i,
            };
            if c.covers(BoundSide::Lower) {
                lower_src[col] = Some(k);
            }
            if c.covers(BoundSide::Upper) {
                upper_src[col] = Some(k);
            }
        }
        let fixed = (0..total)
            .map(|col| match (lower_src[col], upper_src[col]) {
                (Some(a), Some(b)) => a == b,
                (None, None) => {
                    let (lo, hi) = if col < n {
                        (problem.recourse.lower[col], problem.recourse.upper[col])
                    } else {
                        (problem.recourse.rows[col - n].lo, problem.recourse.rows[col - n].hi)
                    };
                    lo == hi
                }
                _ => false,
            })
            .collect();
        Self {
            problem,
            solver: SimplexSolver::new(&problem.recourse, SimplexOptions::default()),
            lower_src,
            upper_src,
            fixed,
            solves: 0,
            pivots: 0,
        }
    }

    fn template_bounds(&self, col: usize) -> (T, T) {
        let lp = &self.problem.recourse;
        let n = lp.num_vars();
        if col < n {
            (lp.lower[col], lp.upper[col])
        } else {
            (lp.rows[col - n].lo, lp.rows[col - n].hi)
        }
    }

    fn set_bounds(&mut self, x: &[T], xi: &[T]) {
        let n = self.problem.recourse.num_vars();
        for col in 0..self.lower_src.len() {
            let (ls, us) = (self.lower_src[col], self.upper_src[col]);
            if ls.is_none() && us.is_none() {
                continue;
            }
            let (mut lo, mut hi) = self.template_bounds(col);
            if let Some(k) = ls {
                lo = self.problem.couplings[k].value(x, xi);
            }
            if let Some(k) = us {
                hi = self.problem.couplings[k].value(x, xi);
            }
            if col < n {
                self.solver.set_var_bounds(col, lo, hi);
            } else {
                self.solver.set_row_bounds(col - n, lo, hi);
            }
        }
    }

    fn solve_lp_at(&mut self, x: &[T], xi: &[T], scenario: usize) -> Result<LpSolution<T>> {
        self.set_bounds(x, xi);
        let mut sol = self.solver.solve();
        if sol.status != LpStatus::Optimal {
            // a fresh start rules out a drifted factorization
            self.solver = SimplexSolver::new(&self.problem.recourse, SimplexOptions::default());
            self.set_bounds(x, xi);
            sol = self.solver.solve();
        }
        self.solves += 1;
        self.pivots += sol.iterations;
        match sol.status {
            LpStatus::Optimal => Ok(sol),
            LpStatus::Infeasible => {
                let row = self.infeasible_row(&sol.row_activity);
                Err(Error::RecourseInfeasible { scenario, row })
            }
            other => Err(Error::Solver(format!("recourse LP for scenario {scenario} ended {other:?}"))),
        }
    }

    /// Solves `Q(x, ξ)` and returns its value and the dual vertex at optimum.
    pub fn solve(&mut self, x: &[T], xi: &[T], scenario: usize) -> Result<(T, DualVertex<T>)> {
        let sol = self.solve_lp_at(x, xi, scenario)?;
        let vertex = self.vertex(&sol.basis.status, &sol.reduced_costs, &sol.duals);
        Ok((sol.objective, vertex))
    }

    /// Solves `Q(x, ξ)` and returns its value and an optimal recourse point.
    pub fn solve_primal(&mut self, x: &[T], xi: &[T], scenario: usize) -> Result<(T, Vec<T>)> {
        let sol = self.solve_lp_at(x, xi, scenario)?;
        Ok((sol.objective, sol.x))
    }

    fn infeasible_row(&self, activity: &[T]) -> String {
        let tol = T::of(1e-6);
        let n = self.problem.recourse.num_vars();
        (0..activity.len())
            .find(|&i| {
                let (lo, hi) = self.solver.row_bounds(i);
                activity[i] < lo - tol || activity[i] > hi + tol
            })
            .or_else(|| (0..activity.len()).find(|&i| self.solver.row_bounds(i).0 > self.solver.row_bounds(i).1))
            .map(|i| self.solver.row_name(i).to_string())
            .unwrap_or_else(|| format!("unknown (of {} rows, {n} columns)", activity.len()))
    }

    fn vertex(&self, status: &[VarStatus], reduced: &[T], duals: &[T]) -> DualVertex<T> {
        let p = self.problem;
        let n = p.recourse.num_vars();
        let n1 = p.num_first_stage();
        let mut intercept = p.recourse.obj_offset;
        let mut grad = vec![T::zero(); n1];
        let mut xi_grad = vec![T::zero(); p.xi_dim];
        for (col, st) in status.iter().enumerate() {
            let d = if col < n { reduced[col] } else { duals[col - n] };
            if d == T::zero() {
                continue;
            }
            // a positive multiplier prices the lower bound and a negative one
            // the upper bound; a column pinned at this point serves both
            let side_lo = d > T::zero();
            let (lo, hi) = if col < n { self.solver.var_bounds(col) } else { self.solver.row_bounds(col - n) };
            let pinned = self.fixed[col] || lo == hi;
            let usable = match st {
                VarStatus::AtLower => side_lo || pinned,
                VarStatus::AtUpper => !side_lo || pinned,
                _ => false,
            };
            if !usable {
                continue;
            }
            let src = if side_lo { self.lower_src[col] } else { self.upper_src[col] };
            match src {
                Some(k) => {
                    let c = &p.couplings[k];
                    intercept += d * c.constant;
                    for &(j, a) in &c.first_stage {
                        grad[j] += d * a;
                    }
                    for &(e, b) in &c.random {
                        xi_grad[e] += d * b;
                    }
                }
                None => {
                    let (lo, hi) = self.template_bounds(col);
                    let b = if side_lo { lo } else { hi };
                    if b.is_finite() {
                        intercept += d * b;
                    }
                }
            }
        }
        DualVertex {
            intercept,
            gradient: grad.into_iter().enumerate().filter(|(_, v)| *v != T::zero()).collect(),
            xi_gradient: xi_grad.into_iter().enumerate().filter(|(_, v)| *v != T::zero()).collect(),
        }
    }
}

/// Expected recourse `Σ p_s Q(x, ξ_s)` and the aggregated cut at `x`.
pub fn expected_recourse<T: Scalar>(
    eval: &mut RecourseEvaluator<'_, T>,
    scenarios: &Scenarios<T>,
    x: &[T],
    origin: usize,
) -> Result<(T, OptimalityCut<T>)> {
    let n1 = eval.problem.num_first_stage();
    let mut total = T::zero();
    let mut cut = OptimalityCut { intercept: T::zero(), gradient: vec![T::zero(); n1], origin };
    for (s, (xi, p)) in scenarios.xi.iter().zip(&scenarios.prob).enumerate() {
        let (q, v) = eval.solve(x, xi, s)?;
        total += *p * q;
        cut.intercept += *p * v.xi_part(xi);
        for &(j, a) in &v.gradient {
            cut.gradient[j] += *p * a;
        }
    }
    Ok((total, cut))
}

/// Total expected cost `cᵀx + Σ p_s Q(x, ξ_s)` of a fixed first-stage point.
pub fn evaluate_first_stage<T: Scalar>(problem: &TwoStageProblem<T>, scenarios: &Scenarios<T>, x: &[T]) -> Result<T> {
    scenarios.check(problem.xi_dim)?;
    let mut eval = RecourseEvaluator::new(problem);
    let (q, _) = expected_recourse(&mut eval, scenarios, x, 0)?;
    Ok(problem.first_stage_cost(x) + q)
}

/// Appends a copy of the recourse problem for scenario `xi`, with coupled
/// bounds turned into rows over the first-stage columns `0..n1`.
/// Returns the index of the copy's first column.
pub(crate) fn append_recourse_copy<T: Scalar>(
    lp: &mut LinearProgram<T>,
    problem: &TwoStageProblem<T>,
    xi: &[T],
    weight: T,
    tag: &str,
) -> usize {
    let r = &problem.recourse;
    let base = lp.num_vars();
    let mut var_couplings: Vec<Vec<&Coupling<T>>> = vec![Vec::new(); r.num_vars()];
    let mut row_couplings: Vec<Vec<&Coupling<T>>> = vec![Vec::new(); r.num_rows()];
    for c in &problem.couplings {
        match c.target {
            CouplingTarget::Var(j) => var_couplings[j].push(c),
            CouplingTarget::Row(i) => row_couplings[i].push(c),
        }
    }
    for j in 0..r.num_vars() {
        let covered = |side| var_couplings[j].iter().any(|c| c.covers(side));
        let lo = if covered(BoundSide::Lower) { T::neg_infinity() } else { r.lower[j] };
        let hi = if covered(BoundSide::Upper) { T::infinity() } else { r.upper[j] };
        lp.add_var(format!("{tag}:{}", r.var_names[j]), lo, hi, weight * r.obj[j]);
    }
    lp.obj_offset += weight * r.obj_offset;
    let emit = |lp: &mut LinearProgram<T>, name: String, coeffs: Vec<(usize, T)>, c: &Coupling<T>| {
        let mut coeffs = coeffs;
        coeffs.extend(c.first_stage.iter().map(|&(j, a)| (j, -a)));
        let rhs = c.constant + c.random.iter().map(|&(d, b)| b * xi[d]).sum::<T>();
        let sense = match c.side {
            BoundSide::Lower => RowSense::Ge,
            BoundSide::Upper => RowSense::Le,
            BoundSide::Both => RowSense::Eq,
        };
        lp.add_row(name, coeffs, sense, rhs);
    };
    for (j, cs) in var_couplings.iter().enumerate() {
        for c in cs {
            emit(lp, format!("{tag}:bound:{}", r.var_names[j]), vec![(base + j, T::one())], c);
        }
    }
    for (i, row) in r.rows.iter().enumerate() {
        let coeffs: Vec<(usize, T)> = row.coeffs.iter().map(|&(j, a)| (base + j, a)).collect();
        let name = format!("{tag}:{}", row.name);
        let cs = &row_couplings[i];
        if cs.is_empty() {
            lp.add_range_row(name, coeffs, row.lo, row.hi);
            continue;
        }
        for c in cs {
            emit(lp, name.clone(), coeffs.clone(), c);
        }
        let covered = |side| cs.iter().any(|c| c.covers(side));
        if !covered(BoundSide::Lower) && row.lo.is_finite() {
            lp.add_row(name.clone(), coeffs.clone(), RowSense::Ge, row.lo);
        }
        if !covered(BoundSide::Upper) && row.hi.is_finite() {
            lp.add_row(name, coeffs, RowSense::Le, row.hi);
        }
    }
    base
}

/// Deterministic equivalent: first stage plus one probability-weighted
/// recourse copy per scenario.
pub fn extensive_form<T: Scalar>(problem: &TwoStageProblem<T>, scenarios: &Scenarios<T>) -> Result<MixedIntegerProgram<T>> {
    problem.validate()?;
    scenarios.check(problem.xi_dim)?;
    let mut lp = problem.first_stage.lp.clone();
    for (s, (xi, p)) in scenarios.xi.iter().zip(&scenarios.prob).enumerate() {
        append_recourse_copy(&mut lp, problem, xi, *p, &format!("s{s}"));
    }
    Ok(MixedIntegerProgram::new(lp, problem.first_stage.binaries.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve_lp;

    /// Newsvendor: order x at cost 1, sell min(x, d) at 3 (as recourse −3 y).
    fn newsvendor() -> TwoStageProblem<f64> {
        let mut first = LinearProgram::new();
        first.add_var("x", 0.0, 100.0, 1.0);
        let mut rec = LinearProgram::new();
        let y = rec.add_var("y", 0.0, f64::INFINITY, -3.0);
        let cap = rec.add_row("cap", vec![(y, 1.0)], RowSense::Le, 0.0);
        let dem = rec.add_row("dem", vec![(y, 1.0)], RowSense::Le, 0.0);
        TwoStageProblem {
            first_stage: MixedIntegerProgram::new(first, vec![]),
            recourse: rec,
            couplings: vec![
                Coupling { target: CouplingTarget::Row(cap), side: BoundSide::Upper, constant: 0.0, first_stage: vec![(0, 1.0)], random: vec![] },
                Coupling { target: CouplingTarget::Row(dem), side: BoundSide::Upper, constant: 0.0, first_stage: vec![], random: vec![(0, 1.0)] },
            ],
            xi_dim: 1,
        }
    }

    #[test]
    fn vertex_reproduces_value_and_minorizes() {
        let p = newsvendor();
        let mut ev = RecourseEvaluator::new(&p);
        let (q, v) = ev.solve(&[30.0], &[50.0], 0).unwrap();
        assert!((q + 90.0).abs() < 1e-9);
        assert!((v.value(&[30.0], &[50.0]) - q).abs() < 1e-9);
        for (x, d) in [(10.0, 50.0), (70.0, 20.0), (0.0, 0.0)] {
            let (qq, _) = ev.solve(&[x], &[d], 0).unwrap();
            assert!(v.value(&[x], &[d]) <= qq + 1e-9);
        }
    }

    #[test]
    fn extensive_form_matches_closed_form() {
        let p = newsvendor();
        let sc = Scenarios::equiprobable(vec![vec![20.0], vec![40.0], vec![60.0]]);
        let ef = extensive_form(&p, &sc).unwrap();
        let sol = solve_lp(&ef.lp, None).unwrap();
        // critical ratio (3-1)/3 = 2/3 → x* = 40, cost 40 - 3*(20+40+40)/3 = -60
        assert!((sol.objective + 60.0).abs() < 1e-9);
        assert!((evaluate_first_stage(&p, &sc, &[40.0]).unwrap() + 60.0).abs() < 1e-9);
    }
}
