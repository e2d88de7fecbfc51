//! Dense strictly convex QP with a diagonal Hessian, solved by the
//! Goldfarb–Idnani dual active-set method.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// `min ½ Σ h_j x_j² + gᵀx` subject to `a·x = b` (equalities) and
/// `a·x >= b` (inequalities). Every `h_j` must be positive.
#[derive(Debug, Clone, Default)]
pub struct QpProblem<T> {
    pub h: Vec<T>,
    pub g: Vec<T>,
    pub eq: Vec<(Vec<(usize, T)>, T)>,
    pub ineq: Vec<(Vec<(usize, T)>, T)>,
}

#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Multipliers of the inequalities (zero when inactive).
    pub ineq_multipliers: Vec<T>,
    pub iterations: usize,
}

struct Work<T> {
    n: usize,
    j: Vec<Vec<T>>,
    r: Vec<Vec<T>>,
    iq: usize,
    r_norm: T,
}

impl<T: Scalar> Work<T> {
    fn jt_times(&self, np: &[T]) -> Vec<T> {
        (0..self.n).map(|c| (0..self.n).map(|k| self.j[k][c] * np[k]).sum()).collect()
    }

    fn step_dir(&self, d: &[T]) -> Vec<T> {
        (0..self.n).map(|k| (self.iq..self.n).map(|c| self.j[k][c] * d[c]).sum()).collect()
    }

    fn dual_dir(&self, d: &[T]) -> Vec<T> {
        let mut r = vec![T::zero(); self.iq];
        for i in (0..self.iq).rev() {
            let s: T = (i + 1..self.iq).map(|k| self.r[i][k] * r[k]).sum();
            r[i] = (d[i] - s) / self.r[i][i];
        }
        r
    }

    fn add(&mut self, d: &mut [T]) -> bool {
        let n = self.n;
        for jj in (self.iq + 1..n).rev() {
            let (cc, ss) = (d[jj - 1], d[jj]);
            let h = cc.hypot(ss);
            if h == T::zero() {
                continue;
            }
            d[jj] = T::zero();
            let (mut cc, mut ss) = (cc / h, ss / h);
            if cc < T::zero() {
                cc = -cc;
                ss = -ss;
                d[jj - 1] = -h;
            } else {
                d[jj - 1] = h;
            }
            let xny = ss / (T::one() + cc);
            for k in 0..n {
                let t1 = self.j[k][jj - 1];
                let t2 = self.j[k][jj];
                self.j[k][jj - 1] = t1 * cc + t2 * ss;
                self.j[k][jj] = xny * (t1 + self.j[k][jj - 1]) - t2;
            }
        }
        self.iq += 1;
        for i in 0..self.iq {
            self.r[i][self.iq - 1] = d[i];
        }
        let piv = d[self.iq - 1].abs();
        if piv <= T::epsilon() * self.r_norm * T::of(10.0) {
            return false;
        }
        self.r_norm = self.r_norm.max(piv);
        true
    }

    /// Removes active entry `qq`; `active` and `u` hold `iq + 1` entries
    /// (the last one is the constraint currently being added).
    fn delete(&mut self, qq: usize, active: &mut Vec<isize>, u: &mut Vec<T>) {
        let n = self.n;
        for i in qq..self.iq - 1 {
            for k in 0..n {
                self.r[k][i] = self.r[k][i + 1];
            }
        }
        active.remove(qq);
        u.remove(qq);
        for k in 0..n {
            self.r[k][self.iq - 1] = T::zero();
        }
        self.iq -= 1;
        if self.iq == 0 {
            return;
        }
        for jj in qq..self.iq {
            let cc = self.r[jj][jj];
            let ss = self.r[jj + 1][jj];
            let h = cc.hypot(ss);
            if h == T::zero() {
                continue;
            }
            let (mut cc, mut ss) = (cc / h, ss / h);
            self.r[jj + 1][jj] = T::zero();
            if cc < T::zero() {
                self.r[jj][jj] = -h;
                cc = -cc;
                ss = -ss;
            } else {
                self.r[jj][jj] = h;
            }
            let xny = ss / (T::one() + cc);
            for k in jj + 1..self.iq {
                let t1 = self.r[jj][k];
                let t2 = self.r[jj + 1][k];
                self.r[jj][k] = t1 * cc + t2 * ss;
                self.r[jj + 1][k] = xny * (t1 + self.r[jj][k]) - t2;
            }
            for k in 0..n {
                let t1 = self.j[k][jj];
                let t2 = self.j[k][jj + 1];
                self.j[k][jj] = t1 * cc + t2 * ss;
                self.j[k][jj + 1] = xny * (self.j[k][jj] + t1) - t2;
            }
        }
    }
}

fn dense<T: Scalar>(n: usize, a: &[(usize, T)]) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    for &(j, c) in a {
        v[j] += c;
    }
    v
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn solve_qp<T: Scalar>(p: &QpProblem<T>) -> Result<QpSolution<T>> {
    let n = p.h.len();
    if p.g.len() != n || p.h.iter().any(|h| !(*h > T::zero())) {
        return Err(invalid("QP needs a positive diagonal Hessian matching the linear term"));
    }
    let eq: Vec<(Vec<T>, T)> = p.eq.iter().map(|(a, b)| (dense(n, a), *b)).collect();
    let ineq: Vec<(Vec<T>, T)> = p.ineq.iter().map(|(a, b)| (dense(n, a), *b)).collect();
    let mut w = Work {
        n,
        j: (0..n).map(|k| (0..n).map(|c| if c == k { T::one() / p.h[k].sqrt() } else { T::zero() }).collect()).collect(),
        r: vec![vec![T::zero(); n]; n],
        iq: 0,
        r_norm: T::one(),
    };
    let mut x: Vec<T> = (0..n).map(|k| -p.g[k] / p.h[k]).collect();
    // active[i] >= 0 is an inequality index, -(e+1) the equality e
    let mut active: Vec<isize> = Vec::new();
    let mut u: Vec<T> = Vec::new();
    let inf = T::infinity();
    let tiny = T::epsilon() * T::of(100.0);

    for (e, (np, b)) in eq.iter().enumerate() {
        let mut d = w.jt_times(np);
        let z = w.step_dir(&d);
        let r = w.dual_dir(&d);
        let zn = dot(&z, np);
        let t2 = if zn.abs() > tiny { (*b - dot(np, &x)) / zn } else { T::zero() };
        for k in 0..n {
            x[k] += t2 * z[k];
        }
        for (ui, ri) in u.iter_mut().zip(&r) {
            *ui -= t2 * *ri;
        }
        u.push(t2);
        active.push(-(e as isize) - 1);
        if !w.add(&mut d) {
            if (dot(np, &x) - *b).abs() > T::of(1e-6) * (T::one() + b.abs()) {
                return Err(invalid(format!("QP equality {e} is inconsistent with earlier equalities")));
            }
            // redundant: drop it again
            let last = w.iq - 1;
            w.delete(last, &mut active, &mut u);
        }
    }
    let me = active.len();
    let mut is_active = vec![false; ineq.len()];
    let mut iterations = 0usize;
    let max_iter = 50 * (n + ineq.len() + 10);
    let viol_tol = |k: usize, x: &[T]| {
        let xn = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let an = ineq[k].0.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        T::epsilon().sqrt() * T::of(0.01) * (T::one() + ineq[k].1.abs() + an * xn)
    };

    'outer: loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(invalid("QP iteration limit reached"));
        }
        let saved = (x.clone(), u.clone(), active.clone(), w.j.clone(), w.r.clone(), w.iq, w.r_norm, is_active.clone());
        let mut excluded = vec![false; ineq.len()];
        loop {
            // most violated inactive inequality
            let mut pick = None;
            let mut worst = T::zero();
            for k in 0..ineq.len() {
                if is_active[k] || excluded[k] {
                    continue;
                }
                let s = dot(&ineq[k].0, &x) - ineq[k].1;
                if s < -viol_tol(k, &x) && s < worst {
                    worst = s;
                    pick = Some(k);
                }
            }
            let Some(pk) = pick else { break 'outer };
            let np = &ineq[pk].0;
            let mut s_p = worst;
            u.push(T::zero());
            active.push(pk as isize);
            loop {
                let mut d = w.jt_times(np);
                let z = w.step_dir(&d);
                let r = w.dual_dir(&d);
                let mut t1 = inf;
                let mut l = usize::MAX;
                for k in me..w.iq {
                    if r[k] > T::zero() {
                        let ratio = u[k] / r[k];
                        if ratio < t1 {
                            t1 = ratio;
                            l = k;
                        }
                    }
                }
                let zn = dot(&z, np);
                let znorm = z.iter().fold(T::zero(), |m, v| m.max(v.abs()));
                let t2 = if znorm > tiny && zn > T::zero() { -s_p / zn } else { inf };
                let t = t1.min(t2);
                if t == inf {
                    return Err(invalid("QP is infeasible"));
                }
                if t2 == inf {
                    for k in 0..w.iq {
                        u[k] -= t * r[k];
                    }
                    u[w.iq] += t;
                    is_active[active[l] as usize] = false;
                    w.delete(l, &mut active, &mut u);
                    continue;
                }
                for k in 0..n {
                    x[k] += t * z[k];
                }
                for k in 0..w.iq {
                    u[k] -= t * r[k];
                }
                u[w.iq] += t;
                if t == t2 {
                    if w.add(&mut d) {
                        is_active[pk] = true;
                        continue 'outer;
                    }
                    // numerically dependent on the active set: roll back and skip it
                    x = saved.0.clone();
                    u = saved.1.clone();
                    active = saved.2.clone();
                    w.j = saved.3.clone();
                    w.r = saved.4.clone();
                    w.iq = saved.5;
                    w.r_norm = saved.6;
                    is_active = saved.7.clone();
                    excluded[pk] = true;
                    break;
                }
                is_active[active[l] as usize] = false;
                w.delete(l, &mut active, &mut u);
                s_p = dot(np, &x) - ineq[pk].1;
            }
        }
    }
    let mut ineq_multipliers = vec![T::zero(); ineq.len()];
    for (k, &a) in active.iter().enumerate() {
        if a >= 0 {
            ineq_multipliers[a as usize] = u[k];
        }
    }
    let objective = (0..n).map(|k| T::of(0.5) * p.h[k] * x[k] * x[k] + p.g[k] * x[k]).sum();
    Ok(QpSolution { x, objective, ineq_multipliers, iterations })
}
