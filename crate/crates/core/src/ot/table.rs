use crate::error::Result;
use crate::scalar::{lit, Real};
use crate::sphere::{cost_from_dot, UnitVector};

use super::FeasibleInterval;

/// Costs `c(x_i, z_j)` between a fixed point set and the current atoms,
/// stored one column per atom so atoms can be swapped, added and removed
/// without recomputing the rest.
#[derive(Clone, Debug)]
pub struct CostTable<T> {
    points: Vec<Vec<T>>,
    columns: Vec<Vec<T>>,
}

impl<T: Real> CostTable<T> {
    pub fn new(points: &[UnitVector<T>], atoms: &[UnitVector<T>]) -> Self {
        let points: Vec<Vec<T>> = points.iter().map(|p| p.as_slice().to_vec()).collect();
        let mut t = Self { points, columns: Vec::with_capacity(atoms.len() + 1) };
        for a in atoms {
            let col = t.column_for(a);
            t.columns.push(col);
        }
        t
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.columns[j]
    }

    /// Costs from every point to `atom`.
    pub fn column_for(&self, atom: &UnitVector<T>) -> Vec<T> {
        let z = atom.as_slice();
        self.points
            .iter()
            .map(|x| cost_from_dot(x.iter().zip(z).fold(T::zero(), |s, (&a, &b)| s + a * b)))
            .collect()
    }

    pub fn push_column(&mut self, col: Vec<T>) {
        debug_assert_eq!(col.len(), self.points.len());
        self.columns.push(col);
    }

    pub fn replace_column(&mut self, j: usize, col: Vec<T>) -> Vec<T> {
        std::mem::replace(&mut self.columns[j], col)
    }

    pub fn remove_column(&mut self, j: usize) -> Vec<T> {
        self.columns.remove(j)
    }

    pub fn insert_column(&mut self, j: usize, col: Vec<T>) {
        self.columns.insert(j, col);
    }

    /// Laguerre assignment of every point, lowest index on ties.
    pub fn assign(&self, psi: &[T]) -> Vec<usize> {
        debug_assert_eq!(psi.len(), self.k());
        let mut best = vec![0usize; self.n_points()];
        let mut best_v: Vec<T> = self.columns[0].iter().map(|&c| c - psi[0]).collect();
        for (j, col) in self.columns.iter().enumerate().skip(1) {
            let pj = psi[j];
            for ((b, bv), &c) in best.iter_mut().zip(best_v.iter_mut()).zip(col) {
                let v = c - pj;
                if v < *bv {
                    *bv = v;
                    *b = j;
                }
            }
        }
        best
    }

    pub fn counts(&self, psi: &[T]) -> Vec<usize> {
        let mut counts = vec![0usize; self.k()];
        for a in self.assign(psi) {
            counts[a] += 1;
        }
        counts
    }

    pub fn is_feasible(&self, psi: &[T]) -> bool {
        self.counts(psi).iter().all(|&c| c > 0)
    }

    /// Unclamped cloud bounds `(lower, upper)` for potential `j`. With a
    /// single atom both are infinite; if some other cell is already empty
    /// without atom `j`, `upper` is `−∞`.
    pub fn conditional_bounds(&self, psi: &[T], j: usize) -> (T, T) {
        let k = self.k();
        if k == 1 {
            return (T::neg_infinity(), T::infinity());
        }
        let n = self.n_points();
        // Best competitor among l ≠ j for every point.
        let first = if j == 0 { 1 } else { 0 };
        let mut arg = vec![first; n];
        let mut best: Vec<T> = self.columns[first].iter().map(|&c| c - psi[first]).collect();
        for l in (first + 1)..k {
            if l == j {
                continue;
            }
            let pl = psi[l];
            for ((a, b), &c) in arg.iter_mut().zip(best.iter_mut()).zip(&self.columns[l]) {
                let v = c - pl;
                if v < *b {
                    *b = v;
                    *a = l;
                }
            }
        }
        let cj = &self.columns[j];
        let mut lower = T::infinity();
        let mut cell_max = vec![T::neg_infinity(); k];
        for ((&a, &b), &c) in arg.iter().zip(&best).zip(cj) {
            let v = c - b;
            if v < lower {
                lower = v;
            }
            if v > cell_max[a] {
                cell_max[a] = v;
            }
        }
        let upper = cell_max
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != j)
            .fold(T::infinity(), |u, (_, &v)| u.min(v));
        (lower, upper)
    }

    /// Box-clamped conditional feasible interval for potential `j`.
    pub fn conditional_interval(&self, psi: &[T], j: usize) -> Result<FeasibleInterval<T>> {
        let (lo, hi) = self.conditional_bounds(psi, j);
        FeasibleInterval::clamp_to_box(lo, hi)
    }

    /// Cloud average of `min_j c(x, z_j) − ψ_j`.
    pub fn mean_min_reduced_cost(&self, psi: &[T]) -> T {
        let n = self.n_points();
        let mut acc = 0.0f64;
        for i in 0..n {
            let mut m = T::infinity();
            for (col, &p) in self.columns.iter().zip(psi) {
                m = m.min(col[i] - p);
            }
            acc += m.to_f64().unwrap();
        }
        lit(acc / n as f64)
    }
}
