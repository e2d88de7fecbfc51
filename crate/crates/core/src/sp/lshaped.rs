use crate::error::Result;
use crate::lp::RowSense;
use crate::mip::{solve_mip, Cut, MipOptions, MipSolution, MixedIntegerProgram};
use crate::scalar::Scalar;

use super::{append_recourse_copy, expected_recourse, OptimalityCut, RecourseEvaluator, Scenarios, TwoStageProblem};

#[derive(Debug, Clone)]
pub struct LShapedOptions<T> {
    pub mip: MipOptions<T>,
    /// Cuts are added when they exceed the epigraph value by more than
    /// `cut_tol · (1 + |θ|)`.
    pub cut_tol: T,
    /// Adds the recourse problem at the mean scenario to the master. Since the
    /// recourse value is convex in its bounds, this bounds `θ` from below
    /// before any cut exists.
    pub mean_value_block: bool,
    /// Lower bound on `θ` used when the mean-value block is off.
    pub theta_lower: T,
}

impl<T: Scalar> Default for LShapedOptions<T> {
    fn default() -> Self {
        Self { mip: MipOptions::default(), cut_tol: T::of(1e-6), mean_value_block: true, theta_lower: T::zero() }
    }
}

#[derive(Debug, Clone)]
pub struct LShapedSolution<T> {
    pub master: MipSolution<T>,
    /// First-stage decision.
    pub x: Vec<T>,
    /// `cᵀx + Σ p_s Q(x, ξ_s)` evaluated exactly at `x`.
    pub objective: T,
    pub first_stage_cost: T,
    pub expected_recourse: T,
    pub cuts: Vec<OptimalityCut<T>>,
    pub recourse_solves: usize,
}

pub fn solve_lshaped<T: Scalar>(
    problem: &TwoStageProblem<T>,
    scenarios: &Scenarios<T>,
    opts: &LShapedOptions<T>,
) -> Result<LShapedSolution<T>> {
    problem.validate()?;
    scenarios.check(problem.xi_dim)?;
    let n1 = problem.num_first_stage();
    let mut lp = problem.first_stage.lp.clone();
    let theta_lo = if opts.mean_value_block { T::neg_infinity() } else { opts.theta_lower };
    let theta = lp.add_var("theta", theta_lo, T::infinity(), T::one());
    if opts.mean_value_block {
        let mean = scenarios.mean();
        let start = append_recourse_copy(&mut lp, problem, &mean, T::zero(), "mean");
        let mut coeffs = vec![(theta, T::one())];
        for (j, c) in problem.recourse.obj.iter().enumerate() {
            if *c != T::zero() {
                coeffs.push((start + j, -*c));
            }
        }
        lp.add_row("theta_mean", coeffs, RowSense::Ge, problem.recourse.obj_offset);
    }
    let master = MixedIntegerProgram::new(lp, problem.first_stage.binaries.clone());

    let mut eval = RecourseEvaluator::new(problem);
    let mut cuts: Vec<OptimalityCut<T>> = Vec::new();
    let mut round = 0usize;
    let mut callback = |x: &[T]| -> Result<Vec<Cut<T>>> {
        round += 1;
        let (q, cut) = expected_recourse(&mut eval, scenarios, &x[..n1], round)?;
        let th = x[theta];
        if q - th <= opts.cut_tol * (T::one() + th.abs()) {
            return Ok(Vec::new());
        }
        let mut coeffs = vec![(theta, T::one())];
        coeffs.extend(cut.gradient.iter().enumerate().filter(|(_, a)| **a != T::zero()).map(|(j, a)| (j, -*a)));
        let row = Cut { name: format!("opt{round}"), coeffs, lo: cut.intercept, hi: T::infinity() };
        cuts.push(cut);
        Ok(vec![row])
    };
    let sol = solve_mip(&master, &opts.mip, Some(&mut callback))?;
    let x: Vec<T> = if sol.has_incumbent() { sol.x[..n1].to_vec() } else { Vec::new() };
    let (first_stage_cost, expected) = if x.is_empty() {
        (T::nan(), T::nan())
    } else {
        let (q, _) = expected_recourse(&mut eval, scenarios, &x, round + 1)?;
        (problem.first_stage_cost(&x), q)
    };
    Ok(LShapedSolution {
        objective: first_stage_cost + expected,
        first_stage_cost,
        expected_recourse: expected,
        master: sol,
        x,
        cuts,
        recourse_solves: eval.solves,
    })
}
