use std::fmt;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
    /// Two-sided row `lo <= a.x <= hi`.
    Range,
}

#[derive(Clone, Debug)]
pub struct Row<T> {
    pub name: String,
    pub coeffs: Vec<(usize, T)>,
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Row<T> {
    pub fn sense(&self) -> RowSense {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) if self.lo == self.hi => RowSense::Eq,
            (true, true) => RowSense::Range,
            (false, true) => RowSense::Le,
            (true, false) => RowSense::Ge,
            (false, false) => RowSense::Range,
        }
    }

    pub fn activity(&self, x: &[T]) -> T {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// Linear program `min c.x + offset` over rows `lo_i <= a_i.x <= hi_i` and
/// variable bounds `l_j <= x_j <= u_j`. Infinite bounds are allowed.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram<T> {
    pub obj: Vec<T>,
    pub obj_offset: T,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub var_names: Vec<String>,
    pub rows: Vec<Row<T>>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new() -> Self {
        Self {
            obj: Vec::new(),
            obj_offset: T::zero(),
            lower: Vec::new(),
            upper: Vec::new(),
            var_names: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lo: T, hi: T, cost: T) -> usize {
        self.obj.push(cost);
        self.lower.push(lo);
        self.upper.push(hi);
        self.var_names.push(name.into());
        self.obj.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, T)>, sense: RowSense, rhs: T) -> usize {
        let (lo, hi) = match sense {
            RowSense::Le => (T::neg_infinity(), rhs),
            RowSense::Ge => (rhs, T::infinity()),
            RowSense::Eq | RowSense::Range => (rhs, rhs),
        };
        self.add_range_row(name, coeffs, lo, hi)
    }

    pub fn add_range_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, T)>, lo: T, hi: T) -> usize {
        self.rows.push(Row { name: name.into(), coeffs, lo, hi });
        self.rows.len() - 1
    }

    pub fn set_var_bounds(&mut self, j: usize, lo: T, hi: T) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    pub fn set_row_bounds(&mut self, i: usize, lo: T, hi: T) {
        self.rows[i].lo = lo;
        self.rows[i].hi = hi;
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.obj.iter().zip(x).map(|(&c, &v)| c * v).sum::<T>() + self.obj_offset
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for row in &self.rows {
            let a = row.activity(x);
            worst = worst.max(row.lo - a).max(a - row.hi);
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.var_names.len() != n {
            return Err(invalid("inconsistent variable dimensions"));
        }
        for j in 0..n {
            if !self.obj[j].is_finite() {
                return Err(invalid(format!("non-finite cost on {}", self.var_names[j])));
            }
            if self.lower[j] > self.upper[j] || self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(invalid(format!("inverted bounds on {}", self.var_names[j])));
            }
        }
        for row in &self.rows {
            if row.lo > row.hi {
                return Err(invalid(format!("inverted bounds on row {}", row.name)));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(invalid(format!("row {} references column {j} of {n}", row.name)));
                }
                if !a.is_finite() {
                    return Err(invalid(format!("non-finite coefficient in row {}", row.name)));
                }
            }
        }
        Ok(())
    }
}

fn fmt_bound<T: Scalar>(v: T) -> String {
    if v == T::infinity() {
        "+inf".into()
    } else if v == T::neg_infinity() {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Plain-text dump, one item per line:
///
/// ```text
/// min: <offset> + <c> <var> + ...
/// row <name>: <lo> <= <a> <var> + ... <= <hi>
/// bound <var>: <lo> <= x <= <hi>
/// ```
impl<T: Scalar> fmt::Display for LinearProgram<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "min: {}", self.obj_offset)?;
        for (j, &c) in self.obj.iter().enumerate() {
            if c != T::zero() {
                write!(f, " + {} {}", c, self.var_names[j])?;
            }
        }
        writeln!(f)?;
        for row in &self.rows {
            write!(f, "row {}: {} <=", row.name, fmt_bound(row.lo))?;
            for (k, &(j, a)) in row.coeffs.iter().enumerate() {
                if k > 0 {
                    write!(f, " +")?;
                }
                write!(f, " {} {}", a, self.var_names[j])?;
            }
            writeln!(f, " <= {}", fmt_bound(row.hi))?;
        }
        for j in 0..self.num_vars() {
            writeln!(
                f,
                "bound {}: {} <= x <= {}",
                self.var_names[j],
                fmt_bound(self.lower[j]),
                fmt_bound(self.upper[j])
            )?;
        }
        Ok(())
    }
}

/// Objective of the dual solution `(duals, reduced_costs)`: each multiplier is
/// paired with the bound its sign selects. Equals the primal objective at an
/// optimal basis.
pub fn dual_objective<T: Scalar>(lp: &LinearProgram<T>, duals: &[T], reduced: &[T]) -> T {
    let pick = |m: T, lo: T, hi: T| -> T {
        if m > T::zero() {
            m * lo
        } else if m < T::zero() {
            m * hi
        } else {
            T::zero()
        }
    };
    let rows: T = lp.rows.iter().zip(duals).map(|(r, &y)| pick(y, r.lo, r.hi)).sum();
    let cols: T = (0..lp.num_vars()).map(|j| pick(reduced[j], lp.lower[j], lp.upper[j])).sum();
    rows + cols + lp.obj_offset
}
