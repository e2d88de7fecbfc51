use crate::error::{Error, Result};
use crate::lp::factor::EtaFile;
use crate::lp::model::LinearProgram;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Status of every structural column followed by every row logical.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct SimplexOptions<T> {
    pub feas_tol: T,
    pub opt_tol: T,
    pub pivot_tol: T,
    pub max_iter: usize,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_limit: usize,
    /// Pivots spent under Bland's rule before returning to Dantzig pricing.
    pub bland_span: usize,
}

impl<T: Scalar> Default for SimplexOptions<T> {
    fn default() -> Self {
        Self {
            feas_tol: T::feas_tol(),
            opt_tol: T::opt_tol(),
            pivot_tol: T::pivot_tol(),
            max_iter: 200_000,
            refactor_every: 96,
            stall_limit: 200,
            bland_span: 2_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Structural values.
    pub x: Vec<T>,
    /// Row activities `a_i.x`.
    pub row_activity: Vec<T>,
    /// Row multipliers; `duals[i]` is the rate of change of the optimal
    /// objective per unit increase of the binding side of row `i`.
    pub duals: Vec<T>,
    /// Reduced costs of the structural columns.
    pub reduced_costs: Vec<T>,
    pub objective: T,
    pub basis: Basis,
    pub iterations: usize,
    /// Diagnostic notes (stalls, rule switches, refactorizations on drift).
    pub log: Vec<String>,
}

impl<T: Scalar> LpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Row multipliers of an optimal solution.
pub fn extract_duals<T: Scalar>(sol: &LpSolution<T>) -> Result<Vec<T>> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("duals requested for {:?} solution", sol.status)));
    }
    Ok(sol.duals.clone())
}

/// Solves `lp`, optionally warm-starting from `warm`.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>, warm: Option<&Basis>) -> Result<LpSolution<T>> {
    lp.validate()?;
    let mut s = SimplexSolver::new(lp, SimplexOptions::default());
    if let Some(b) = warm {
        s.load_basis(b);
    }
    Ok(s.solve())
}

enum Pricing {
    Dantzig,
    Bland,
}

/// Bounded-variable revised simplex over `A x - r = 0` with one logical `r_i`
/// per row carrying the row bounds. Keeps its factorization between calls so
/// that bound changes can be re-solved from the previous basis.
#[derive(Clone, Debug)]
pub struct SimplexSolver<T> {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, T)>>,
    cost: Vec<T>,
    offset: T,
    lo: Vec<T>,
    hi: Vec<T>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    x: Vec<T>,
    factor: EtaFile<T>,
    factor_valid: bool,
    pub opts: SimplexOptions<T>,
    row_names: Vec<String>,
}

/// Appends row `i` to the column lists, merging repeated columns.
fn push_row<T: Scalar>(cols: &mut [Vec<(usize, T)>], i: usize, coeffs: &[(usize, T)]) {
    for &(j, a) in coeffs {
        match cols[j].last_mut() {
            Some(last) if last.0 == i => last.1 += a,
            _ => cols[j].push((i, a)),
        }
    }
    for &(j, _) in coeffs {
        if cols[j].last().is_some_and(|e| e.0 == i && e.1 == T::zero()) {
            cols[j].pop();
        }
    }
}

fn default_status<T: Scalar>(lo: T, hi: T) -> VarStatus {
    if lo.is_finite() {
        VarStatus::AtLower
    } else if hi.is_finite() {
        VarStatus::AtUpper
    } else {
        VarStatus::Free
    }
}

impl<T: Scalar> SimplexSolver<T> {
    pub fn new(lp: &LinearProgram<T>, opts: SimplexOptions<T>) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut cols = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            push_row(&mut cols, i, &row.coeffs);
        }
        let mut cost = lp.obj.clone();
        cost.extend(std::iter::repeat_n(T::zero(), m));
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        lo.extend(lp.rows.iter().map(|r| r.lo));
        hi.extend(lp.rows.iter().map(|r| r.hi));
        let mut status: Vec<VarStatus> = (0..n).map(|j| default_status(lo[j], hi[j])).collect();
        status.extend(std::iter::repeat_n(VarStatus::Basic, m));
        Self {
            n,
            m,
            cols,
            cost,
            offset: lp.obj_offset,
            lo,
            hi,
            status,
            head: (n..n + m).collect(),
            x: vec![T::zero(); n + m],
            factor: EtaFile::identity(m),
            factor_valid: true,
            opts,
            row_names: lp.rows.iter().map(|r| r.name.clone()).collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn set_var_bounds(&mut self, j: usize, lo: T, hi: T) {
        self.lo[j] = lo;
        self.hi[j] = hi;
    }

    pub fn var_bounds(&self, j: usize) -> (T, T) {
        (self.lo[j], self.hi[j])
    }

    pub fn set_row_bounds(&mut self, i: usize, lo: T, hi: T) {
        self.lo[self.n + i] = lo;
        self.hi[self.n + i] = hi;
    }

    pub fn row_bounds(&self, i: usize) -> (T, T) {
        (self.lo[self.n + i], self.hi[self.n + i])
    }

    pub fn set_cost(&mut self, j: usize, c: T) {
        self.cost[j] = c;
    }

    /// Appends a row; its logical enters the basis.
    pub fn add_row(&mut self, name: impl Into<String>, coeffs: &[(usize, T)], lo: T, hi: T) -> usize {
        let i = self.m;
        push_row(&mut self.cols, i, coeffs);
        self.m += 1;
        self.cost.push(T::zero());
        self.lo.push(lo);
        self.hi.push(hi);
        self.status.push(VarStatus::Basic);
        self.x.push(T::zero());
        self.row_names.push(name.into());
        self.factor = EtaFile::identity(self.m);
        self.factor_valid = false;
        i
    }

    pub fn basis(&self) -> Basis {
        Basis { status: self.status.clone() }
    }

    /// Installs `basis` if its dimensions match; otherwise keeps the current one.
    pub fn load_basis(&mut self, basis: &Basis) -> bool {
        if basis.status.len() != self.n + self.m {
            return false;
        }
        if basis.status != self.status {
            self.status = basis.status.clone();
            self.factor_valid = false;
        }
        true
    }

    fn column_into(&self, j: usize, out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                out[i] = a;
            }
        } else {
            out[j - self.n] = -T::one();
        }
    }

    fn dot_col(&self, y: &[T], j: usize) -> T {
        if j < self.n {
            self.cols[j].iter().map(|&(i, a)| a * y[i]).sum()
        } else {
            -y[j - self.n]
        }
    }

    fn sanitize_nonbasic(&mut self) {
        for j in 0..self.n + self.m {
            let (lo, hi) = (self.lo[j], self.hi[j]);
            let st = self.status[j];
            let fixed = match st {
                VarStatus::Basic => continue,
                VarStatus::AtLower if lo.is_finite() => st,
                VarStatus::AtUpper if hi.is_finite() => st,
                VarStatus::Free if !lo.is_finite() && !hi.is_finite() => st,
                _ => default_status(lo, hi),
            };
            self.status[j] = fixed;
            self.x[j] = match fixed {
                VarStatus::AtLower => lo,
                VarStatus::AtUpper => hi,
                _ => T::zero(),
            };
        }
    }

    fn reinvert(&mut self) {
        let (n, m) = (self.n, self.m);
        self.factor.clear();
        let mut free_row = vec![true; m];
        let mut head = vec![usize::MAX; m];
        for i in 0..m {
            if self.status[n + i] == VarStatus::Basic {
                free_row[i] = false;
                head[i] = n + i;
            }
        }
        let mut structural: Vec<usize> = (0..n).filter(|&j| self.status[j] == VarStatus::Basic).collect();
        structural.sort_by_key(|&j| (self.cols[j].len(), j));
        let mut v = vec![T::zero(); m];
        for j in structural {
            self.column_into(j, &mut v);
            self.factor.ftran(&mut v);
            let mut best = usize::MAX;
            let mut best_abs = T::zero();
            for i in 0..m {
                if free_row[i] && v[i].abs() > best_abs {
                    best_abs = v[i].abs();
                    best = i;
                }
            }
            if best == usize::MAX || best_abs < T::of(1e-9) {
                self.status[j] = default_status(self.lo[j], self.hi[j]);
                continue;
            }
            self.factor.push(best, &v);
            free_row[best] = false;
            head[best] = j;
        }
        for i in 0..m {
            if free_row[i] {
                head[i] = n + i;
                self.status[n + i] = VarStatus::Basic;
            }
        }
        self.head = head;
        self.factor.since_refactor = 0;
        self.factor_valid = true;
    }

    fn compute_basic_values(&mut self) {
        let mut rhs = vec![T::zero(); self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == T::zero() {
                continue;
            }
            if j < self.n {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * xj;
                }
            } else {
                rhs[j - self.n] += xj;
            }
        }
        self.factor.ftran(&mut rhs);
        for r in 0..self.m {
            self.x[self.head[r]] = rhs[r];
        }
    }

    fn infeasibility(&self, j: usize) -> T {
        let tol = self.opts.feas_tol;
        let v = self.x[j];
        if v < self.lo[j] - tol {
            self.lo[j] - v
        } else if v > self.hi[j] + tol {
            v - self.hi[j]
        } else {
            T::zero()
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.head.iter().any(|&j| self.infeasibility(j) > T::zero())
    }

    fn duals_for(&self, phase_one: bool) -> Vec<T> {
        let tol = self.opts.feas_tol;
        let mut y: Vec<T> = self
            .head
            .iter()
            .map(|&j| {
                if phase_one {
                    if self.x[j] < self.lo[j] - tol {
                        -T::one()
                    } else if self.x[j] > self.hi[j] + tol {
                        T::one()
                    } else {
                        T::zero()
                    }
                } else {
                    self.cost[j]
                }
            })
            .collect();
        self.factor.btran(&mut y);
        y
    }

    fn dual_feasible(&self, y: &[T]) -> bool {
        let tol = self.opts.opt_tol;
        (0..self.n + self.m).all(|j| {
            let d = self.cost[j] - self.dot_col(y, j);
            match self.status[j] {
                VarStatus::Basic => true,
                VarStatus::AtLower => self.lo[j] == self.hi[j] || d >= -tol,
                VarStatus::AtUpper => self.lo[j] == self.hi[j] || d <= tol,
                VarStatus::Free => d.abs() <= tol,
            }
        })
    }

    fn objective_internal(&self) -> T {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum::<T>() + self.offset
    }

    pub fn solve(&mut self) -> LpSolution<T> {
        let mut log = Vec::new();
        let mut iterations = 0usize;
        if !self.factor_valid {
            self.reinvert();
        }
        self.sanitize_nonbasic();
        self.compute_basic_values();

        let mut status = None;
        if self.primal_infeasible() {
            let y = self.duals_for(false);
            if self.dual_feasible(&y) {
                match self.dual_simplex(&mut iterations, &mut log) {
                    Some(LpStatus::Infeasible) => status = Some(LpStatus::Infeasible),
                    Some(LpStatus::IterationLimit) => status = Some(LpStatus::IterationLimit),
                    _ => {}
                }
            }
        }
        let status = match status {
            Some(s) => s,
            None => self.primal_simplex(&mut iterations, &mut log),
        };
        self.finish(status, iterations, log)
    }

    fn finish(&mut self, status: LpStatus, iterations: usize, log: Vec<String>) -> LpSolution<T> {
        let y = self.duals_for(false);
        let mut reduced = vec![T::zero(); self.n];
        for (j, d) in reduced.iter_mut().enumerate() {
            if self.status[j] != VarStatus::Basic {
                *d = self.cost[j] - self.dot_col(&y, j);
            }
        }
        LpSolution {
            status,
            x: self.x[..self.n].to_vec(),
            row_activity: self.x[self.n..].to_vec(),
            duals: y,
            reduced_costs: reduced,
            objective: self.objective_internal(),
            basis: self.basis(),
            iterations,
            log,
        }
    }

    fn refresh(&mut self) {
        self.reinvert();
        self.sanitize_nonbasic();
        self.compute_basic_values();
    }

    fn primal_simplex(&mut self, iterations: &mut usize, log: &mut Vec<String>) -> LpStatus {
        let total = self.n + self.m;
        let mut col = vec![T::zero(); self.m];
        let mut pricing = Pricing::Dantzig;
        let mut degenerate_run = 0usize;
        let mut bland_left = 0usize;
        let mut verified = false;
        loop {
            if *iterations >= self.opts.max_iter {
                log.push(format!("iteration limit {} reached", self.opts.max_iter));
                return LpStatus::IterationLimit;
            }
            if self.factor.since_refactor >= self.opts.refactor_every {
                self.refresh();
            }
            let phase_one = self.primal_infeasible();
            let y = self.duals_for(phase_one);

            // pricing
            let mut enter = usize::MAX;
            let mut enter_dir = T::zero();
            let mut best = T::zero();
            for j in 0..total {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let c = if phase_one { T::zero() } else { self.cost[j] };
                let d = c - self.dot_col(&y, j);
                let dir = match st {
                    VarStatus::AtLower if d < -self.opts.opt_tol => T::one(),
                    VarStatus::AtUpper if d > self.opts.opt_tol => -T::one(),
                    VarStatus::Free if d.abs() > self.opts.opt_tol => {
                        if d < T::zero() {
                            T::one()
                        } else {
                            -T::one()
                        }
                    }
                    _ => continue,
                };
                match pricing {
                    Pricing::Bland => {
                        enter = j;
                        enter_dir = dir;
                        break;
                    }
                    Pricing::Dantzig => {
                        if d.abs() > best {
                            best = d.abs();
                            enter = j;
                            enter_dir = dir;
                        }
                    }
                }
            }
            if enter == usize::MAX {
                // confirm against a fresh factorization before declaring
                if !verified {
                    verified = true;
                    self.refresh();
                    continue;
                }
                return if phase_one { LpStatus::Infeasible } else { LpStatus::Optimal };
            }
            verified = false;

            self.column_into(enter, &mut col);
            self.factor.ftran(&mut col);

            // ratio test
            let tol = self.opts.feas_tol;
            let mut t_max = self.hi[enter] - self.lo[enter];
            if !t_max.is_finite() {
                t_max = T::infinity();
            }
            let mut leave_row = usize::MAX;
            let mut leave_to_upper = false;
            for r in 0..self.m {
                let delta = -enter_dir * col[r];
                if delta.abs() < self.opts.pivot_tol {
                    continue;
                }
                let p = self.head[r];
                let xv = self.x[p];
                let (lo, hi) = (self.lo[p], self.hi[p]);
                let (limit, to_upper) = if xv < lo - tol {
                    if delta > T::zero() {
                        ((lo - xv) / delta, false)
                    } else {
                        continue;
                    }
                } else if xv > hi + tol {
                    if delta < T::zero() {
                        ((hi - xv) / delta, true)
                    } else {
                        continue;
                    }
                } else if delta > T::zero() {
                    if !hi.is_finite() {
                        continue;
                    }
                    (((hi - xv) / delta).max(T::zero()), true)
                } else {
                    if !lo.is_finite() {
                        continue;
                    }
                    (((lo - xv) / delta).max(T::zero()), false)
                };
                let better = limit < t_max - T::of(1e-12)
                    || (limit <= t_max + T::of(1e-12)
                        && leave_row != usize::MAX
                        && p < self.head[leave_row]);
                if better {
                    t_max = limit;
                    leave_row = r;
                    leave_to_upper = to_upper;
                }
            }
            if !t_max.is_finite() {
                if phase_one {
                    log.push("phase one ray; refactorizing".into());
                    self.refresh();
                    *iterations += 1;
                    continue;
                }
                return LpStatus::Unbounded;
            }

            // update
            let t = t_max;
            if t > T::zero() {
                self.x[enter] += enter_dir * t;
                for r in 0..self.m {
                    let p = self.head[r];
                    self.x[p] -= enter_dir * col[r] * t;
                }
            }
            if leave_row == usize::MAX {
                self.status[enter] = if enter_dir > T::zero() { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[enter] = if enter_dir > T::zero() { self.hi[enter] } else { self.lo[enter] };
            } else {
                let p = self.head[leave_row];
                if leave_to_upper {
                    self.status[p] = VarStatus::AtUpper;
                    self.x[p] = self.hi[p];
                } else {
                    self.status[p] = VarStatus::AtLower;
                    self.x[p] = self.lo[p];
                }
                self.status[enter] = VarStatus::Basic;
                self.head[leave_row] = enter;
                self.factor.push(leave_row, &col);
            }
            *iterations += 1;

            if t <= T::of(1e-12) {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            match pricing {
                Pricing::Dantzig if degenerate_run > self.opts.stall_limit => {
                    log.push(format!("stall after {} degenerate pivots; switching to Bland's rule", degenerate_run));
                    pricing = Pricing::Bland;
                    bland_left = self.opts.bland_span;
                    degenerate_run = 0;
                }
                Pricing::Bland => {
                    bland_left = bland_left.saturating_sub(1);
                    if bland_left == 0 {
                        pricing = Pricing::Dantzig;
                    }
                }
                _ => {}
            }
        }
    }

    /// Dual simplex from a dual feasible basis. Returns `Some(Infeasible)`
    /// when a row proves primal infeasibility and `None` otherwise, which
    /// leaves any remaining infeasibility to the primal phase.
    fn dual_simplex(&mut self, iterations: &mut usize, log: &mut Vec<String>) -> Option<LpStatus> {
        let total = self.n + self.m;
        let mut col = vec![T::zero(); self.m];
        let mut rho = vec![T::zero(); self.m];
        loop {
            if *iterations >= self.opts.max_iter {
                log.push("iteration limit in dual simplex".into());
                return Some(LpStatus::IterationLimit);
            }
            if self.factor.since_refactor >= self.opts.refactor_every {
                self.refresh();
            }
            // leaving row: largest infeasibility, lowest variable index on ties
            let mut leave_row = usize::MAX;
            let mut worst = T::zero();
            for r in 0..self.m {
                let p = self.head[r];
                let inf = self.infeasibility(p);
                if inf > worst || (inf == worst && inf > T::zero() && p < self.head[leave_row]) {
                    worst = inf;
                    leave_row = r;
                }
            }
            if leave_row == usize::MAX {
                return None;
            }
            let p = self.head[leave_row];
            let below = self.x[p] < self.lo[p];
            let target = if below { self.lo[p] } else { self.hi[p] };

            let y = self.duals_for(false);
            rho.iter_mut().for_each(|v| *v = T::zero());
            rho[leave_row] = T::one();
            self.factor.btran(&mut rho);

            let mut enter = usize::MAX;
            let mut best_ratio = T::infinity();
            let mut best_alpha = T::zero();
            for j in 0..total {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let alpha = self.dot_col(&rho, j);
                if alpha.abs() < self.opts.pivot_tol {
                    continue;
                }
                // x_p changes by -alpha per unit increase of x_j
                let can_inc = matches!(st, VarStatus::AtLower | VarStatus::Free);
                let can_dec = matches!(st, VarStatus::AtUpper | VarStatus::Free);
                let eligible = if below {
                    (can_inc && alpha < T::zero()) || (can_dec && alpha > T::zero())
                } else {
                    (can_inc && alpha > T::zero()) || (can_dec && alpha < T::zero())
                };
                if !eligible {
                    continue;
                }
                let d = self.cost[j] - self.dot_col(&y, j);
                let d_eff = match st {
                    VarStatus::AtLower => d.max(T::zero()),
                    VarStatus::AtUpper => (-d).max(T::zero()),
                    _ => d.abs(),
                };
                let ratio = d_eff / alpha.abs();
                let better = ratio < best_ratio - T::of(1e-12)
                    || (ratio <= best_ratio + T::of(1e-12) && alpha.abs() > best_alpha.abs() * T::of(1.0 + 1e-9));
                if better {
                    best_ratio = ratio;
                    best_alpha = alpha;
                    enter = j;
                }
            }
            if enter == usize::MAX {
                return Some(LpStatus::Infeasible);
            }
            self.column_into(enter, &mut col);
            self.factor.ftran(&mut col);
            let piv = col[leave_row];
            if piv.abs() < self.opts.pivot_tol {
                if self.factor.since_refactor == 0 {
                    log.push("unstable dual pivot on a fresh factorization; handing over to primal simplex".into());
                    return None;
                }
                log.push("unstable dual pivot; refactorizing".into());
                self.refresh();
                *iterations += 1;
                continue;
            }
            let step = (self.x[p] - target) / piv;
            self.x[enter] += step;
            for r in 0..self.m {
                let q = self.head[r];
                self.x[q] -= col[r] * step;
            }
            self.x[p] = target;
            self.status[p] = if below { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.status[enter] = VarStatus::Basic;
            self.head[leave_row] = enter;
            self.factor.push(leave_row, &col);
            *iterations += 1;
        }
    }

    pub fn row_name(&self, i: usize) -> &str {
        &self.row_names[i]
    }
}
