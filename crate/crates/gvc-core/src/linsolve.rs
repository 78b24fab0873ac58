//! Sparse linear solving over the exact rationals, used by the bounded
//! undetermined-coefficient searches. Finds one solution of `A x = b` (free
//! variables set to zero) or reports inconsistency.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::kernel::Rational;

#[derive(Debug, Default)]
pub struct SparseSystem {
    rows: Vec<BTreeMap<usize, Rational>>,
    rhs: Vec<Rational>,
    ncols: usize,
}

impl SparseSystem {
    pub fn new(ncols: usize) -> Self {
        SparseSystem { rows: Vec::new(), rhs: Vec::new(), ncols }
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn push_row(&mut self, coeffs: BTreeMap<usize, Rational>, rhs: Rational) {
        debug_assert!(coeffs.keys().all(|&c| c < self.ncols));
        let mut coeffs = coeffs;
        coeffs.retain(|_, v| !v.is_zero());
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    /// Gaussian elimination with smallest-row pivoting. Returns any solution,
    /// or `None` when the system is inconsistent.
    pub fn solve_any(mut self) -> Option<Vec<Rational>> {
        let mut pivots: Vec<(usize, BTreeMap<usize, Rational>, Rational)> = Vec::new();
        loop {
            // Pick the unprocessed row with the fewest nonzeros.
            let mut best: Option<usize> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row.is_empty() {
                    continue;
                }
                if best.map_or(true, |b| row.len() < self.rows[b].len()) {
                    best = Some(i);
                }
            }
            let Some(i) = best else { break };
            let row = std::mem::take(&mut self.rows[i]);
            let rhs = std::mem::replace(&mut self.rhs[i], Rational::zero());
            let (&col, pivot) = row.iter().next().unwrap();
            let pivot = pivot.clone();
            let row: BTreeMap<usize, Rational> = row.iter().map(|(c, v)| (*c, v / &pivot)).collect();
            let rhs = rhs / &pivot;
            for (j, other) in self.rows.iter_mut().enumerate() {
                if let Some(f) = other.get(&col).cloned() {
                    for (c, v) in &row {
                        let entry = other.entry(*c).or_insert_with(Rational::zero);
                        *entry -= &f * v;
                        if entry.is_zero() {
                            other.remove(c);
                        }
                    }
                    self.rhs[j] -= &f * &rhs;
                }
            }
            pivots.push((col, row, rhs));
        }
        // Remaining rows are all empty; nonzero right-hand side means no solution.
        if self.rhs.iter().any(|r| !r.is_zero()) {
            return None;
        }
        let mut x = vec![Rational::zero(); self.ncols];
        for (col, row, rhs) in pivots.into_iter().rev() {
            let mut v = rhs;
            for (c, coeff) in &row {
                if *c != col {
                    v -= coeff * &x[*c];
                }
            }
            x[col] = v;
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::rat;

    #[test]
    fn solves_square_system() {
        // x + y = 3, x - y = 1 -> x = 2, y = 1
        let mut s = SparseSystem::new(2);
        s.push_row(BTreeMap::from([(0, rat(1, 1)), (1, rat(1, 1))]), rat(3, 1));
        s.push_row(BTreeMap::from([(0, rat(1, 1)), (1, rat(-1, 1))]), rat(1, 1));
        let x = s.solve_any().unwrap();
        assert_eq!(x, vec![rat(2, 1), rat(1, 1)]);
    }

    #[test]
    fn underdetermined_picks_some_solution() {
        let mut s = SparseSystem::new(3);
        s.push_row(BTreeMap::from([(0, rat(1, 1)), (2, rat(2, 1))]), rat(4, 1));
        let x = s.solve_any().unwrap();
        assert_eq!(&x[0] + rat(2, 1) * &x[2], rat(4, 1));
    }

    #[test]
    fn inconsistent_detected() {
        let mut s = SparseSystem::new(2);
        s.push_row(BTreeMap::from([(0, rat(1, 1))]), rat(1, 1));
        s.push_row(BTreeMap::from([(0, rat(2, 1))]), rat(3, 1));
        assert!(s.solve_any().is_none());
    }

    #[test]
    fn overdetermined_consistent() {
        let mut s = SparseSystem::new(1);
        s.push_row(BTreeMap::from([(0, rat(2, 1))]), rat(4, 1));
        s.push_row(BTreeMap::from([(0, rat(3, 1))]), rat(6, 1));
        assert_eq!(s.solve_any().unwrap(), vec![rat(2, 1)]);
    }
}
