use crate::scalar::Scalar;

/// Column eta of the product-form inverse.
#[derive(Clone, Debug)]
struct Eta<T> {
    row: usize,
    pivot: T,
    entries: Vec<(usize, T)>,
}

/// Product-form basis inverse `B^-1 = E_k ... E_1 B0^-1` where `B0 = -I` is
/// the all-logical basis.
#[derive(Clone, Debug)]
pub(crate) struct EtaFile<T> {
    m: usize,
    etas: Vec<Eta<T>>,
    pub(crate) since_refactor: usize,
}

impl<T: Scalar> EtaFile<T> {
    pub(crate) fn identity(m: usize) -> Self {
        Self { m, etas: Vec::new(), since_refactor: 0 }
    }

    /// Solves `B v = rhs` in place.
    pub(crate) fn ftran(&self, v: &mut [T]) {
        debug_assert_eq!(v.len(), self.m);
        for x in v.iter_mut() {
            *x = -*x;
        }
        for eta in &self.etas {
            let xr = v[eta.row];
            if xr == T::zero() {
                continue;
            }
            let xr = xr / eta.pivot;
            v[eta.row] = xr;
            for &(i, a) in &eta.entries {
                v[i] -= a * xr;
            }
        }
    }

    /// Solves `y B = rhs` in place.
    pub(crate) fn btran(&self, y: &mut [T]) {
        for eta in self.etas.iter().rev() {
            let mut acc = y[eta.row];
            for &(i, a) in &eta.entries {
                acc -= a * y[i];
            }
            y[eta.row] = acc / eta.pivot;
        }
        for x in y.iter_mut() {
            *x = -*x;
        }
    }

    /// Appends the eta for a pivot on `row` with the already transformed
    /// column `col = B^-1 a_q`.
    pub(crate) fn push(&mut self, row: usize, col: &[T]) {
        let pivot = col[row];
        let tiny = T::of(1e-14);
        let entries = col
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != row && a.abs() > tiny)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta { row, pivot, entries });
        self.since_refactor += 1;
    }

    pub(crate) fn clear(&mut self) {
        self.etas.clear();
        self.since_refactor = 0;
    }
}
