use crate::error::{Error, Result};
use crate::mip::{solve_mip, MipOptions, MipStatus};
use crate::scalar::Scalar;

use super::sd::Sampler;
use super::{extensive_form, RecourseEvaluator, Scenarios, TwoStageProblem};

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    /// Fresh samples used to estimate the candidate's cost.
    pub n_eval: usize,
    /// Number of independent sample-average lower-bound problems ...
    pub replications: usize,
    /// ... and the sample size of each.
    pub batch: usize,
    pub confidence: f64,
    /// Pass when the upper confidence limit of the gap is at most
    /// `abs_tol + rel_tol · |upper estimate|`.
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { n_eval: 1000, replications: 10, batch: 50, confidence: 0.95, rel_tol: 0.01, abs_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub pass: bool,
    /// Mean and half-width of the candidate cost estimate.
    pub upper: (f64, f64),
    /// Mean and half-width of the replicated lower bound.
    pub lower: (f64, f64),
    /// Point estimate and one-sided upper confidence limit of the gap.
    pub gap: f64,
    pub gap_upper: f64,
}

impl ValidationReport {
    /// Interval `[lower - h_L, upper + h_U]` covering the optimal value.
    pub fn interval(&self) -> (f64, f64) {
        (self.lower.0 - self.lower.1, self.upper.0 + self.upper.1)
    }
}

/// Standard normal quantile (Acklam's rational approximation).
pub(crate) fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [-39.69683028665376, 220.9460984245205, -275.9285104469687, 138.3577518672690, -30.66479806614716, 2.506628277459239];
    const B: [f64; 5] = [-54.47609879822406, 161.5858368580409, -155.6989798598866, 66.80131188771972, -13.28068155288572];
    const C: [f64; 6] = [-0.007784894002430293, -0.3223964580411365, -2.400758277161838, -2.549732539343734, 4.374664141464968, 2.938163982698783];
    const D: [f64; 4] = [0.007784695709041462, 0.3224671290700398, 2.445134137142996, 3.754408661907416];
    let tail = |q: f64| (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);
    if p < 0.02425 {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Student-t quantile via the Cornish–Fisher expansion around the normal.
pub(crate) fn t_quantile(p: f64, dof: f64) -> f64 {
    let z = normal_quantile(p);
    if !dof.is_finite() {
        return z;
    }
    let z3 = z.powi(3);
    let z5 = z.powi(5);
    let z7 = z.powi(7);
    z + (z3 + z) / (4.0 * dof)
        + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * dof * dof)
        + (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / (384.0 * dof.powi(3))
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v)
}

/// Estimates the optimality gap of `candidate`: its cost on `n_eval` fresh
/// samples against the mean of replicated sample-average lower bounds.
pub fn validate_statistical_optimality<T: Scalar>(
    problem: &TwoStageProblem<T>,
    candidate: &[T],
    sampler: &mut dyn Sampler<T>,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    let mut draw = |count: usize| -> Result<Vec<Vec<T>>> {
        (0..count)
            .map(|i| sampler.next_sample().ok_or(Error::SamplerExhausted { drawn: i, required: count }))
            .collect()
    };
    let first = problem.first_stage_cost(candidate).as_f64();
    let mut eval = RecourseEvaluator::new(problem);
    let eval_samples = draw(opts.n_eval)?;
    let mut costs = Vec::with_capacity(opts.n_eval);
    for (s, xi) in eval_samples.iter().enumerate() {
        let (q, _) = eval.solve(candidate, xi, s)?;
        costs.push(first + q.as_f64());
    }
    let (u_mean, u_var) = mean_var(&costs);

    let mut lows = Vec::with_capacity(opts.replications);
    let mip_opts = MipOptions { gap_tol: T::zero(), ..MipOptions::default() };
    for _ in 0..opts.replications {
        let batch = Scenarios::equiprobable(draw(opts.batch)?);
        let ef = extensive_form(problem, &batch)?;
        let sol = solve_mip(&ef, &mip_opts, None)?;
        if sol.status != MipStatus::Optimal {
            return Err(Error::Solver(format!("sample-average problem ended {:?}", sol.status)));
        }
        // the bound, not the incumbent, keeps the estimate a lower bound
        lows.push(sol.bound.as_f64().min(sol.objective.as_f64()));
    }
    let (l_mean, l_var) = mean_var(&lows);
    let alpha = 1.0 - opts.confidence;
    let tu = t_quantile(1.0 - alpha / 2.0, (opts.n_eval.max(2) - 1) as f64);
    let tl = t_quantile(1.0 - alpha / 2.0, (opts.replications.max(2) - 1) as f64);
    let hu = tu * (u_var / opts.n_eval as f64).sqrt();
    let hl = tl * (l_var / opts.replications as f64).sqrt();
    let gap = u_mean - l_mean;
    let z = normal_quantile(opts.confidence);
    let gap_upper = gap + z * (u_var / opts.n_eval as f64 + l_var / opts.replications as f64).sqrt();
    let pass = gap_upper <= opts.abs_tol + opts.rel_tol * u_mean.abs();
    Ok(ValidationReport { pass, upper: (u_mean, hu), lower: (l_mean, hl), gap, gap_upper })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-5);
        assert!((normal_quantile(0.5)).abs() < 1e-12);
        // t_{9, 0.975} = 2.262157
        assert!((t_quantile(0.975, 9.0) - 2.262157).abs() < 5e-3);
    }
}
