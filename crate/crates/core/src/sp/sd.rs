//! Regularized stochastic decomposition for two-stage LPs.

use std::collections::{HashSet, VecDeque};

use crate::error::{invalid, Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::scalar::Scalar;

use super::qp::{solve_qp, QpProblem};
use super::{DualVertex, RecourseEvaluator, TwoStageProblem};

/// Stream of scenario realizations.
pub trait Sampler<T> {
    fn next_sample(&mut self) -> Option<Vec<T>>;
}

/// Yields the stored samples once, in order.
#[derive(Debug, Clone)]
pub struct ListSampler<T> {
    items: VecDeque<Vec<T>>,
}

impl<T> ListSampler<T> {
    pub fn new(items: Vec<Vec<T>>) -> Self {
        Self { items: items.into() }
    }
}

impl<T> Sampler<T> for ListSampler<T> {
    fn next_sample(&mut self) -> Option<Vec<T>> {
        self.items.pop_front()
    }
}

/// Adapts a closure into a sampler.
pub struct FnSampler<F>(pub F);

impl<T, F: FnMut() -> Option<Vec<T>>> Sampler<T> for FnSampler<F> {
    fn next_sample(&mut self) -> Option<Vec<T>> {
        (self.0)()
    }
}

#[derive(Debug, Clone)]
pub struct SdOptions<T> {
    pub min_samples: usize,
    pub max_samples: usize,
    pub sigma_start: T,
    pub sigma_min: T,
    pub sigma_max: T,
    /// Accept the candidate when the realized model decrease is at least this
    /// fraction of the predicted one.
    pub accept_ratio: T,
    pub pool_cap: usize,
    /// Known lower bound on every recourse value; old cuts shrink toward it.
    pub recourse_lower: T,
    /// Stop once the incumbent estimate moved by at most this relative amount
    /// over the trailing quarter of iterations ...
    pub stability_tol: T,
    /// ... and the model gap between incumbent and master is at most this.
    pub gap_tol: T,
    /// Proximal weight on the epigraph variable relative to `σ`.
    pub eta_weight: T,
}

impl<T: Scalar> Default for SdOptions<T> {
    fn default() -> Self {
        Self {
            min_samples: 256,
            max_samples: 2048,
            sigma_start: T::one(),
            sigma_min: T::of(1e-4),
            sigma_max: T::of(1e4),
            accept_ratio: T::of(0.2),
            pool_cap: 5000,
            recourse_lower: T::zero(),
            stability_tol: T::of(0.01),
            gap_tol: T::of(0.01),
            eta_weight: T::of(1e-6),
        }
    }
}

#[derive(Debug, Clone)]
struct SdCut<T> {
    intercept: T,
    gradient: Vec<T>,
    /// Sample count when the cut was formed.
    formed_at: usize,
}

impl<T: Scalar> SdCut<T> {
    fn value(&self, x: &[T], k: usize, lower: T) -> T {
        let raw = self.intercept + self.gradient.iter().zip(x).map(|(a, b)| *a * *b).sum::<T>();
        let w = T::of(self.formed_at as f64 / k as f64);
        w * raw + (T::one() - w) * lower
    }
}

/// Algorithm state after termination.
#[derive(Debug, Clone)]
pub struct SdState<T> {
    pub incumbent: Vec<T>,
    pub sigma: T,
    pub samples: Vec<Vec<T>>,
    pub pool: Vec<DualVertex<T>>,
    pub cuts: usize,
    pub incumbent_updates: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SdIteration<T> {
    pub sample: usize,
    pub estimate: T,
    pub sigma: T,
    pub pool: usize,
    pub cuts: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct SdSolution<T> {
    pub x: Vec<T>,
    /// Model estimate of `cᵀx + E Q(x, ξ)` at the incumbent.
    pub objective_estimate: T,
    pub samples: usize,
    pub converged: bool,
    pub state: SdState<T>,
    pub log: Vec<SdIteration<T>>,
    pub recourse_solves: usize,
}

struct Pool<T> {
    vertices: VecDeque<DualVertex<T>>,
    keys: HashSet<Vec<u64>>,
    /// `xi_part[v][j]` caches the x-free value of vertex `v` at sample `j`.
    xi_part: VecDeque<Vec<T>>,
    cap: usize,
}

fn vertex_key<T: Scalar>(v: &DualVertex<T>) -> Vec<u64> {
    let mut key = vec![v.intercept.as_f64().to_bits()];
    for &(j, a) in &v.gradient {
        key.push(j as u64);
        key.push(a.as_f64().to_bits());
    }
    key.push(u64::MAX);
    for &(d, b) in &v.xi_gradient {
        key.push(d as u64);
        key.push(b.as_f64().to_bits());
    }
    key
}

impl<T: Scalar> Pool<T> {
    fn insert(&mut self, v: DualVertex<T>, samples: &[Vec<T>]) {
        if !self.keys.insert(vertex_key(&v)) {
            return;
        }
        if self.vertices.len() == self.cap {
            if let Some(old) = self.vertices.pop_front() {
                self.keys.remove(&vertex_key(&old));
                self.xi_part.pop_front();
            }
        }
        self.xi_part.push_back(samples.iter().map(|s| v.xi_part(s)).collect());
        self.vertices.push_back(v);
    }

    fn add_sample(&mut self, xi: &[T]) {
        for (v, cache) in self.vertices.iter().zip(self.xi_part.iter_mut()) {
            cache.push(v.xi_part(xi));
        }
    }

    /// Sample-average cut at `x`: for every stored sample the best vertex.
    fn cut_at(&self, x: &[T], k: usize) -> SdCut<T> {
        let n1 = x.len();
        let gx: Vec<T> = self
            .vertices
            .iter()
            .map(|v| v.gradient.iter().map(|&(j, a)| a * x[j]).sum::<T>())
            .collect();
        let mut counts = vec![0usize; self.vertices.len()];
        let mut intercept = T::zero();
        for j in 0..k {
            let mut best = 0;
            let mut best_val = T::neg_infinity();
            for (v, cache) in self.xi_part.iter().enumerate() {
                let val = cache[j] + gx[v];
                if val > best_val {
                    best_val = val;
                    best = v;
                }
            }
            counts[best] += 1;
            intercept += self.xi_part[best][j];
        }
        let mut gradient = vec![T::zero(); n1];
        for (v, &c) in counts.iter().enumerate() {
            if c > 0 {
                for &(j, a) in &self.vertices[v].gradient {
                    gradient[j] += T::of(c as f64) * a;
                }
            }
        }
        let inv = T::one() / T::of(k as f64);
        SdCut { intercept: intercept * inv, gradient: gradient.into_iter().map(|g| g * inv).collect(), formed_at: k }
    }
}

struct Master<'a, T> {
    lp: &'a LinearProgram<T>,
    n1: usize,
}

impl<T: Scalar> Master<'_, T> {
    fn model(&self, cuts: &[SdCut<T>], x: &[T], k: usize, lower: T) -> T {
        let eta = cuts.iter().map(|c| c.value(x, k, lower)).fold(lower, T::max);
        self.lp.objective_value(x) + eta
    }

    /// Proximal step: `min cᵀx + η + σ/2 |x - x̄|² + σ_η/2 (η - η̄)²`.
    fn step(
        &self,
        cuts: &[SdCut<T>],
        center: &[T],
        eta_center: T,
        sigma: T,
        eta_weight: T,
        k: usize,
        lower: T,
    ) -> Result<(Vec<T>, T, Vec<T>)> {
        let n1 = self.n1;
        let eta = n1;
        let mut qp = QpProblem {
            h: vec![sigma; n1 + 1],
            g: Vec::with_capacity(n1 + 1),
            eq: Vec::new(),
            ineq: Vec::new(),
        };
        qp.h[eta] = sigma * eta_weight;
        for j in 0..n1 {
            qp.g.push(self.lp.obj[j] - sigma * center[j]);
        }
        qp.g.push(T::one() - qp.h[eta] * eta_center);
        for row in &self.lp.rows {
            if row.lo == row.hi {
                qp.eq.push((row.coeffs.clone(), row.lo));
                continue;
            }
            if row.lo.is_finite() {
                qp.ineq.push((row.coeffs.clone(), row.lo));
            }
            if row.hi.is_finite() {
                qp.ineq.push((row.coeffs.iter().map(|&(j, a)| (j, -a)).collect(), -row.hi));
            }
        }
        for j in 0..n1 {
            let (lo, hi) = (self.lp.lower[j], self.lp.upper[j]);
            if lo == hi {
                qp.eq.push((vec![(j, T::one())], lo));
                continue;
            }
            if lo.is_finite() {
                qp.ineq.push((vec![(j, T::one())], lo));
            }
            if hi.is_finite() {
                qp.ineq.push((vec![(j, -T::one())], -hi));
            }
        }
        let first_cut = qp.ineq.len();
        qp.ineq.push((vec![(eta, T::one())], lower));
        for c in cuts {
            let w = T::of(c.formed_at as f64 / k as f64);
            let mut coeffs = vec![(eta, T::one())];
            coeffs.extend(c.gradient.iter().enumerate().filter(|(_, a)| **a != T::zero()).map(|(j, a)| (j, -w * *a)));
            qp.ineq.push((coeffs, w * c.intercept + (T::one() - w) * lower));
        }
        let sol = solve_qp(&qp)?;
        let mult = sol.ineq_multipliers[first_cut + 1..].to_vec();
        let x = sol.x[..n1].to_vec();
        Ok((x, sol.x[eta], mult))
    }
}

/// Regularized stochastic decomposition. Every iteration draws one sample,
/// solves the recourse LP at the candidate and at the incumbent, refreshes
/// the sample-average cuts from the dual-vertex pool and takes a proximal
/// master step.
pub fn solve_sd<T: Scalar>(
    problem: &TwoStageProblem<T>,
    sampler: &mut dyn Sampler<T>,
    opts: &SdOptions<T>,
) -> Result<SdSolution<T>> {
    problem.validate()?;
    if !problem.first_stage.binaries.is_empty() {
        return Err(invalid("stochastic decomposition needs a continuous first stage"));
    }
    if opts.min_samples == 0 || opts.max_samples < opts.min_samples {
        return Err(invalid("need 0 < min_samples <= max_samples"));
    }
    let n1 = problem.num_first_stage();
    let lower = opts.recourse_lower;
    let start = solve_lp(&problem.first_stage.lp, None)?;
    if start.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("first-stage LP is {:?}", start.status)));
    }
    let master = Master { lp: &problem.first_stage.lp, n1 };
    let mut eval = RecourseEvaluator::new(problem);
    let mut pool = Pool { vertices: VecDeque::new(), keys: HashSet::new(), xi_part: VecDeque::new(), cap: opts.pool_cap };
    let mut samples: Vec<Vec<T>> = Vec::new();
    let mut cuts: Vec<SdCut<T>> = Vec::new();
    let mut incumbent = start.x.clone();
    let mut incumbent_cut: Option<usize> = None;
    let mut candidate = start.x;
    let mut sigma = opts.sigma_start;
    let mut predicted: Option<T> = None;
    let mut log = Vec::new();
    let mut estimates: Vec<T> = Vec::new();
    let mut updates = 0usize;
    let mut converged = false;

    loop {
        let k = samples.len() + 1;
        let Some(xi) = sampler.next_sample() else {
            if samples.len() < opts.min_samples {
                return Err(Error::SamplerExhausted { drawn: samples.len(), required: opts.min_samples });
            }
            break;
        };
        if xi.len() != problem.xi_dim {
            return Err(invalid(format!("sample of length {} for dimension {}", xi.len(), problem.xi_dim)));
        }
        pool.add_sample(&xi);
        samples.push(xi);
        let xi = &samples[k - 1];
        let (_, v_cand) = eval.solve(&candidate, xi, k - 1)?;
        pool.insert(v_cand, &samples);
        let (_, v_inc) = eval.solve(&incumbent, xi, k - 1)?;
        pool.insert(v_inc, &samples);

        let cand_cut = pool.cut_at(&candidate, k);
        let inc_cut = pool.cut_at(&incumbent, k);
        if let Some(i) = incumbent_cut.take() {
            cuts.remove(i);
        }
        cuts.push(cand_cut);
        cuts.push(inc_cut);
        incumbent_cut = Some(cuts.len() - 1);

        let mut accepted = false;
        if let Some(pred) = predicted {
            let actual = master.model(&cuts, &incumbent, k, lower) - master.model(&cuts, &candidate, k, lower);
            if pred > T::zero() && actual >= opts.accept_ratio * pred {
                incumbent = candidate.clone();
                // the candidate cut becomes the incumbent cut
                let inc = cuts.len() - 1;
                cuts.remove(inc);
                incumbent_cut = Some(cuts.len() - 1);
                sigma = (sigma * T::of(0.5)).max(opts.sigma_min);
                accepted = true;
                updates += 1;
            } else {
                sigma = (sigma * T::of(2.0)).min(opts.sigma_max);
            }
        }

        let inc_eta = master.model(&cuts, &incumbent, k, lower) - problem.first_stage_cost(&incumbent);
        let (next, _eta, mult) = master.step(&cuts, &incumbent, inc_eta, sigma, opts.eta_weight, k, lower)?;
        let f_inc = master.model(&cuts, &incumbent, k, lower);
        let f_next = master.model(&cuts, &next, k, lower);
        predicted = Some(f_inc - f_next);

        // keep binding cuts and the incumbent cut
        let keep_inc = incumbent_cut;
        let mut kept = Vec::with_capacity(cuts.len());
        let mut new_inc = None;
        for (i, c) in cuts.drain(..).enumerate() {
            if Some(i) == keep_inc || mult[i] > T::zero() {
                if Some(i) == keep_inc {
                    new_inc = Some(kept.len());
                }
                kept.push(c);
            }
        }
        cuts = kept;
        incumbent_cut = new_inc;
        candidate = next;

        estimates.push(f_inc);
        log.push(SdIteration { sample: k, estimate: f_inc, sigma, pool: pool.vertices.len(), cuts: cuts.len(), accepted });
        if k >= opts.min_samples {
            let tail = &estimates[estimates.len() - estimates.len().div_ceil(4)..];
            let hi = tail.iter().copied().fold(T::neg_infinity(), T::max);
            let lo = tail.iter().copied().fold(T::infinity(), T::min);
            let scale = T::one().max(f_inc.abs());
            let stable = hi - lo <= opts.stability_tol * scale;
            let tight = f_inc - f_next <= opts.gap_tol * scale;
            if stable && tight {
                converged = true;
                break;
            }
            if k >= opts.max_samples {
                break;
            }
        }
    }
    let k = samples.len();
    let estimate = master.model(&cuts, &incumbent, k, lower);
    Ok(SdSolution {
        x: incumbent.clone(),
        objective_estimate: estimate,
        samples: k,
        converged,
        state: SdState {
            incumbent,
            sigma,
            pool: pool.vertices.into_iter().collect(),
            samples,
            cuts: cuts.len(),
            incumbent_updates: updates,
        },
        log,
        recourse_solves: eval.solves,
    })
}
