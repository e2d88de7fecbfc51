#![allow(dead_code)]
//! Independent oracles shared by the integration tests.

pub mod audit;
pub mod grids;
pub mod stochastic;

use nalgebra::{DMatrix, DVector};
use shp_core::lp::{LinearProgram, RowSense};

/// Minimum of `lp` by enumerating every basic point of its constraint
/// system. Only meaningful for bounded feasible regions of small dimension.
pub fn vertex_enumeration(lp: &LinearProgram<f64>) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            a[j] += v;
        }
        if row.lo.is_finite() {
            planes.push((a.clone(), row.lo));
        }
        if row.hi.is_finite() && row.hi != row.lo {
            planes.push((a, row.hi));
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if lp.lower[j].is_finite() {
            planes.push((e.clone(), lp.lower[j]));
        }
        if lp.upper[j].is_finite() && lp.upper[j] != lp.lower[j] {
            planes.push((e, lp.upper[j]));
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    if planes.len() < n {
        return None;
    }
    loop {
        let a = DMatrix::from_fn(n, n, |r, c| planes[idx[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| planes[idx[r]].1);
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            if x.iter().all(|v| v.is_finite()) && lp.max_violation(&x) <= 1e-7 {
                let obj = lp.objective_value(&x);
                if best.as_ref().is_none_or(|(b, _)| obj < *b - 1e-12) {
                    best = Some((obj, x));
                }
            }
        }
        // next combination
        let k = planes.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for t in i + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Exhaustive minimum over all 0/1 assignments of `binaries`, solving the
/// remaining LP for each assignment.
pub fn binary_enumeration(lp: &LinearProgram<f64>, binaries: &[usize]) -> Option<(f64, Vec<f64>)> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u64..(1u64 << binaries.len()) {
        let mut fixed = lp.clone();
        for (k, &j) in binaries.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            if v < fixed.lower[j] || v > fixed.upper[j] {
                continue;
            }
            fixed.lower[j] = v;
            fixed.upper[j] = v;
        }
        if binaries.iter().any(|&j| fixed.lower[j] != fixed.upper[j]) {
            continue;
        }
        let sol = shp_core::lp::solve_lp(&fixed, None).unwrap();
        if sol.is_optimal() && best.as_ref().is_none_or(|(b, _)| sol.objective < *b) {
            best = Some((sol.objective, sol.x));
        }
    }
    best
}

/// Small random MIP over `n_bin` binaries and `n_cont` bounded continuous
/// variables, with coefficients drawn by cycling through `vals` (in [0, 1)).
pub fn random_mip(vals: &[f64], n_bin: usize, n_cont: usize, m: usize) -> (LinearProgram<f64>, Vec<usize>) {
    let mut it = vals.iter().copied().cycle();
    let mut next = move || it.next().unwrap();
    let mut lp = LinearProgram::new();
    let mut bins = Vec::new();
    for j in 0..n_bin {
        bins.push(lp.add_var(format!("b{j}"), 0.0, 1.0, (-10.0 + 20.0 * next()).round()));
    }
    for j in 0..n_cont {
        lp.add_var(format!("c{j}"), 0.0, 1.0 + 4.0 * next(), -5.0 + 10.0 * next());
    }
    let n = n_bin + n_cont;
    for i in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, (-4.0 + 8.0 * next()).round())).collect();
        let sense = if next() < 0.7 { RowSense::Le } else { RowSense::Ge };
        lp.add_row(format!("r{i}"), coeffs, sense, (-2.0 + 6.0 * next()).round());
    }
    (lp, bins)
}
