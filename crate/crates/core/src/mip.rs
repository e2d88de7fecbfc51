//! Best-bound branch and bound for mixed-binary programs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{invalid, Error, Result};
use crate::lp::{Basis, LinearProgram, LpStatus, SimplexOptions, SimplexSolver, VarStatus};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct MixedIntegerProgram<T> {
    pub lp: LinearProgram<T>,
    pub binaries: Vec<usize>,
}

impl<T: Scalar> MixedIntegerProgram<T> {
    pub fn new(lp: LinearProgram<T>, binaries: Vec<usize>) -> Self {
        Self { lp, binaries }
    }

    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        for &j in &self.binaries {
            if j >= self.lp.num_vars() {
                return Err(invalid(format!("binary index {j} out of range")));
            }
            if self.lp.lower[j] < T::zero() || self.lp.upper[j] > T::one() {
                return Err(invalid(format!("binary {} has bounds outside [0,1]", self.lp.var_names[j])));
            }
        }
        Ok(())
    }
}

/// A row added to the problem by a callback; valid for the whole tree.
#[derive(Clone, Debug)]
pub struct Cut<T> {
    pub name: String,
    pub coeffs: Vec<(usize, T)>,
    pub lo: T,
    pub hi: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MipStatus {
    /// Incumbent within the gap tolerance of the bound.
    Optimal,
    NodeLimit,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct MipLogEntry<T> {
    pub nodes: usize,
    pub bound: T,
    pub incumbent: Option<T>,
}

#[derive(Clone, Debug)]
pub struct MipSolution<T> {
    pub status: MipStatus,
    pub x: Vec<T>,
    pub objective: T,
    pub bound: T,
    pub gap: T,
    pub nodes: usize,
    pub branches: usize,
    pub cuts_added: usize,
    pub log: Vec<MipLogEntry<T>>,
}

impl<T: Scalar> MipSolution<T> {
    pub fn has_incumbent(&self) -> bool {
        !self.x.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct MipOptions<T> {
    pub gap_tol: T,
    pub node_limit: usize,
    pub int_tol: T,
    /// Node-log cadence (every `log_every` processed nodes).
    pub log_every: usize,
    pub simplex: SimplexOptions<T>,
}

impl<T: Scalar> Default for MipOptions<T> {
    fn default() -> Self {
        Self {
            gap_tol: T::of(1e-4),
            node_limit: 100_000,
            int_tol: T::of(1e-6),
            log_every: 100,
            simplex: SimplexOptions::default(),
        }
    }
}

/// Invoked on every integer-feasible candidate. Returning an empty vector
/// accepts the candidate; returning cuts rejects it and adds them globally.
pub type CutCallback<'a, T> = dyn FnMut(&[T]) -> Result<Vec<Cut<T>>> + 'a;

struct Node<T> {
    id: usize,
    bound: T,
    fixings: Vec<(usize, T)>,
    basis: Option<Basis>,
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
    // max-heap: smallest bound first, then smallest id
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .as_f64()
            .total_cmp(&self.bound.as_f64())
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn relative_gap<T: Scalar>(incumbent: T, bound: T) -> T {
    ((incumbent - bound) / incumbent.abs().max(T::one())).max(T::zero())
}

struct Search<'a, 'cb, T: Scalar> {
    mip: &'a MixedIntegerProgram<T>,
    opts: &'a MipOptions<T>,
    solver: SimplexSolver<T>,
    callback: Option<&'a mut CutCallback<'cb, T>>,
    incumbent: Option<(T, Vec<T>)>,
    cuts_added: usize,
    /// Smallest bound among nodes discarded by the gap test.
    pruned_floor: T,
}

enum NodeResult<T> {
    Pruned,
    Unbounded,
    Branch { var: usize, bound: T, basis: Basis, x: Vec<T> },
}

impl<T: Scalar> Search<'_, '_, T> {
    fn prune_at(&self, bound: T) -> bool {
        match &self.incumbent {
            Some((inc, _)) => {
                let slack = inc.abs().max(T::one()) * self.opts.gap_tol.max(T::of(1e-9));
                bound >= *inc - slack
            }
            None => false,
        }
    }

    fn apply(&mut self, fixings: &[(usize, T)], basis: Option<&Basis>) {
        for &j in &self.mip.binaries {
            self.solver.set_var_bounds(j, self.mip.lp.lower[j], self.mip.lp.upper[j]);
        }
        for &(j, v) in fixings {
            self.solver.set_var_bounds(j, v, v);
        }
        if let Some(b) = basis {
            let total = self.solver.num_vars() + self.solver.num_rows();
            let mut b = b.clone();
            b.status.resize(total, VarStatus::Basic);
            self.solver.load_basis(&b);
        }
    }

    fn most_fractional(&self, x: &[T]) -> Option<usize> {
        let half = T::of(0.5);
        let mut best: Option<(T, usize)> = None;
        for &j in &self.mip.binaries {
            let frac = x[j] - x[j].floor();
            if frac <= self.opts.int_tol || frac >= T::one() - self.opts.int_tol {
                continue;
            }
            let score = (frac - half).abs();
            if best.is_none_or(|(s, k)| score < s || (score == s && j < k)) {
                best = Some((score, j));
            }
        }
        best.map(|(_, j)| j)
    }

    /// Solves the current node, running the cut loop on integer candidates.
    fn process(&mut self) -> Result<NodeResult<T>> {
        loop {
            let sol = self.solver.solve();
            match sol.status {
                LpStatus::Infeasible => return Ok(NodeResult::Pruned),
                LpStatus::Unbounded => return Ok(NodeResult::Unbounded),
                LpStatus::IterationLimit => {
                    return Err(Error::Solver(format!("node LP stalled: {:?}", sol.log)));
                }
                LpStatus::Optimal => {}
            }
            if self.prune_at(sol.objective) {
                self.pruned_floor = self.pruned_floor.min(sol.objective);
                return Ok(NodeResult::Pruned);
            }
            if let Some(var) = self.most_fractional(&sol.x) {
                return Ok(NodeResult::Branch { var, bound: sol.objective, basis: sol.basis, x: sol.x });
            }
            if self.try_candidate(&sol.x, sol.objective)? {
                continue;
            }
            return Ok(NodeResult::Pruned);
        }
    }

    /// Returns true when cuts were added and the node must be re-solved.
    fn try_candidate(&mut self, x: &[T], objective: T) -> Result<bool> {
        let mut x = x.to_vec();
        for &j in &self.mip.binaries {
            x[j] = x[j].round();
        }
        if let Some(cb) = self.callback.as_mut() {
            let cuts = cb(&x)?;
            if !cuts.is_empty() {
                for cut in &cuts {
                    self.solver.add_row(cut.name.clone(), &cut.coeffs, cut.lo, cut.hi);
                }
                self.cuts_added += cuts.len();
                return Ok(true);
            }
        }
        if self.incumbent.as_ref().is_none_or(|(inc, _)| objective < *inc) {
            self.incumbent = Some((objective, x));
        }
        Ok(false)
    }

    /// Rounds the root relaxation and evaluates the completion.
    fn rounding_heuristic(&mut self, x: &[T], root_basis: &Basis) -> Result<()> {
        let fixings: Vec<(usize, T)> = self.mip.binaries.iter().map(|&j| (j, x[j].round())).collect();
        self.apply(&fixings, None);
        let sol = self.solver.solve();
        if sol.status == LpStatus::Optimal {
            self.try_candidate(&sol.x, sol.objective)?;
        }
        self.apply(&[], Some(root_basis));
        Ok(())
    }
}

/// Branch and bound with best-bound node selection and most-fractional
/// branching (ties to the lowest index).
pub fn solve_mip<T: Scalar>(
    mip: &MixedIntegerProgram<T>,
    opts: &MipOptions<T>,
    callback: Option<&mut CutCallback<'_, T>>,
) -> Result<MipSolution<T>> {
    mip.validate()?;
    let n = mip.lp.num_vars();
    let mut search = Search {
        mip,
        opts,
        solver: SimplexSolver::new(&mip.lp, opts.simplex.clone()),
        callback,
        incumbent: None,
        cuts_added: 0,
        pruned_floor: T::infinity(),
    };
    let mut heap = BinaryHeap::new();
    let mut next_id = 1usize;
    let mut nodes = 0usize;
    let mut branches = 0usize;
    let mut log = Vec::new();
    let mut unbounded = false;

    // root
    match search.process()? {
        NodeResult::Pruned => {}
        NodeResult::Unbounded => unbounded = true,
        NodeResult::Branch { var, bound, basis, x } => {
            search.rounding_heuristic(&x, &basis)?;
            branches += 1;
            for v in [T::zero(), T::one()] {
                heap.push(Node { id: next_id, bound, fixings: vec![(var, v)], basis: Some(basis.clone()) });
                next_id += 1;
            }
        }
    }
    nodes += 1;
    if unbounded {
        return Ok(MipSolution {
            status: MipStatus::Unbounded,
            x: Vec::new(),
            objective: T::neg_infinity(),
            bound: T::neg_infinity(),
            gap: T::infinity(),
            nodes,
            branches,
            cuts_added: search.cuts_added,
            log,
        });
    }

    let mut hit_limit = false;
    while let Some(node) = heap.pop() {
        if search.prune_at(node.bound) {
            search.pruned_floor = search.pruned_floor.min(node.bound);
            continue;
        }
        if nodes >= opts.node_limit {
            heap.push(node);
            hit_limit = true;
            break;
        }
        search.apply(&node.fixings, node.basis.as_ref());
        let result = search.process()?;
        nodes += 1;
        match result {
            NodeResult::Pruned => {}
            NodeResult::Unbounded => {
                return Err(Error::Solver("unbounded node below a bounded root".into()));
            }
            NodeResult::Branch { var, bound, basis, .. } => {
                branches += 1;
                for v in [T::zero(), T::one()] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((var, v));
                    heap.push(Node { id: next_id, bound, fixings, basis: Some(basis.clone()) });
                    next_id += 1;
                }
            }
        }
        if nodes % opts.log_every.max(1) == 0 {
            let open = heap.iter().map(|n| n.bound).fold(T::infinity(), T::min);
            let entry = MipLogEntry { nodes, bound: open.min(search.pruned_floor), incumbent: search.incumbent.as_ref().map(|i| i.0) };
            log::debug!("b&b nodes={} bound={:?} incumbent={:?}", entry.nodes, entry.bound, entry.incumbent);
            log.push(entry);
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(T::infinity(), T::min);
    let (status, x, objective) = match search.incumbent.take() {
        Some((obj, x)) => {
            let status = if hit_limit && relative_gap(obj, open_bound.min(obj)) > opts.gap_tol {
                MipStatus::NodeLimit
            } else {
                MipStatus::Optimal
            };
            (status, x, obj)
        }
        None if hit_limit => (MipStatus::NodeLimit, Vec::new(), T::infinity()),
        None => (MipStatus::Infeasible, Vec::new(), T::infinity()),
    };
    let bound = open_bound.min(search.pruned_floor).min(objective);
    let gap = if objective.is_finite() { relative_gap(objective, bound) } else { T::infinity() };
    log.push(MipLogEntry { nodes, bound, incumbent: objective.is_finite().then_some(objective) });
    debug_assert!(x.is_empty() || x.len() == n);
    Ok(MipSolution { status, x, objective, bound, gap, nodes, branches, cuts_added: search.cuts_added, log })
}
