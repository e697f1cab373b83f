//! Rotations of `ℝ^{p+1}`: Haar sampling and the skew-exponential random walk.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, symmetric_eigen, Matrix};
use crate::scalar::{lit, Real};
use crate::sphere::UnitVector;

/// An element of `SO(p+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationMatrix<T> {
    m: Matrix<T>,
}

impl<T: Real> RotationMatrix<T> {
    pub fn identity(dim: usize) -> Self {
        Self { m: Matrix::identity(dim) }
    }

    /// Validates orthogonality and unit determinant to `1e-10` (or a few ulps
    /// for narrow scalar types).
    pub fn from_row_major(dim: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        let r = Self { m: Matrix::from_row_major(dim, entries) };
        if !r.is_valid() {
            return Err(Error::InvalidVector("matrix is not a proper rotation".into()));
        }
        Ok(r)
    }

    /// Nearest-by-Gram–Schmidt rotation, removing round-off drift after long
    /// products of small steps.
    pub fn orthonormalized(&self) -> Self {
        let n = self.dim();
        let mut rows: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| self.m.get(i, j)).collect()).collect();
        for i in 0..n {
            for _ in 0..2 {
                for q in 0..i {
                    let d = dot(&rows[i], &rows[q]);
                    let prev = rows[q].clone();
                    rows[i].iter_mut().zip(&prev).for_each(|(a, &b)| *a = *a - d * b);
                }
            }
            let nv = dot(&rows[i], &rows[i]).sqrt();
            rows[i].iter_mut().for_each(|a| *a = *a / nv);
        }
        Self { m: Matrix::from_row_major(n, rows.into_iter().flatten().collect()) }
    }

    /// Rotation by `theta` in the plane spanned by axes `i` and `j`
    /// (`e_i ↦ cos θ e_i + sin θ e_j`).
    pub fn plane(dim: usize, i: usize, j: usize, theta: T) -> Self {
        let mut m = Matrix::identity(dim);
        let (s, c) = theta.sin_cos();
        m.set(i, i, c);
        m.set(j, j, c);
        m.set(j, i, s);
        m.set(i, j, -s);
        Self { m }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.m
    }

    pub fn entries(&self) -> &[T] {
        self.m.as_slice()
    }

    pub fn is_valid(&self) -> bool {
        let tol = lit::<T>(1e-10).max(T::geometric_tol() * lit(16.0));
        let n = self.dim();
        let g = self.m.transpose().matmul(&self.m);
        let orth = g.add(&Matrix::identity(n).scale(-T::one())).max_abs() <= tol;
        orth && (self.m.det() - T::one()).abs() <= tol
    }

    pub fn apply(&self, v: &UnitVector<T>) -> UnitVector<T> {
        UnitVector::from_normalized(self.m.matvec(v.as_slice()))
    }

    pub fn apply_slice(&self, v: &[T]) -> Vec<T> {
        self.m.matvec(v)
    }

    /// `Rᵀ v`.
    pub fn apply_inverse_slice(&self, v: &[T]) -> Vec<T> {
        self.m.tmatvec(v)
    }

    /// `self · other`
    pub fn compose(&self, other: &Self) -> Self {
        Self { m: self.m.matmul(&other.m) }
    }

    pub fn inverse(&self) -> Self {
        Self { m: self.m.transpose() }
    }
}

impl<T: Real> Serialize for RotationMatrix<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.m.get(i, j).to_f64().unwrap()).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for RotationMatrix<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let n = rows.len();
        let flat: Vec<T> = rows.into_iter().flatten().map(lit).collect();
        Self::from_row_major(n, flat).map_err(serde::de::Error::custom)
    }
}

/// Rotation maximizing `tr(Rᵀ H)`, i.e. the least-squares fit of
/// `R a_i ≈ b_i` for `H = Σ w_i b_i a_iᵀ` (Kabsch, with the determinant
/// forced to `+1`).
pub fn procrustes_rotation<T: Real>(h: &Matrix<T>) -> RotationMatrix<T> {
    let n = h.dim();
    let (vals, v) = symmetric_eigen(&h.transpose().matmul(h));
    let scale = vals[0].abs().max(T::min_positive_value());
    // Left singular vectors u_i = H v_i / σ_i, completed to a basis where σ_i vanishes.
    let mut u: Vec<Vec<T>> = Vec::with_capacity(n);
    for i in 0..n {
        let vi: Vec<T> = (0..n).map(|r| v.get(r, i)).collect();
        let mut ui = if vals[i] > scale * lit(1e-20) { h.matvec(&vi) } else { vec![T::zero(); n] };
        for _ in 0..2 {
            for q in &u {
                let d = dot(&ui, q);
                ui.iter_mut().zip(q).for_each(|(a, &b)| *a = *a - d * b);
            }
        }
        let mut nu = norm(&ui);
        if nu <= lit(1e-12) {
            for axis in 0..n {
                let mut e = vec![T::zero(); n];
                e[axis] = T::one();
                for _ in 0..2 {
                    for q in &u {
                        let d = dot(&e, q);
                        e.iter_mut().zip(q).for_each(|(a, &b)| *a = *a - d * b);
                    }
                }
                if norm(&e) > lit(0.5) {
                    ui = e;
                    break;
                }
            }
            nu = norm(&ui);
        }
        ui.iter_mut().for_each(|a| *a = *a / nu);
        u.push(ui);
    }
    let build = |u: &[Vec<T>]| {
        let mut m = Matrix::zeros(n);
        for (i, ui) in u.iter().enumerate() {
            for r in 0..n {
                for c in 0..n {
                    m.set(r, c, m.get(r, c) + ui[r] * v.get(c, i));
                }
            }
        }
        m
    };
    let mut m = build(&u);
    if m.det() < T::zero() {
        u[n - 1].iter_mut().for_each(|a| *a = -*a);
        m = build(&u);
    }
    RotationMatrix { m }.orthonormalized()
}

/// Number of free parameters of a skew-symmetric `dim × dim` matrix.
pub fn skew_param_count(dim: usize) -> usize {
    dim * (dim - 1) / 2
}

/// Builds `Ω(ε)`. For `dim = 3` the layout is the cross-product matrix
/// `[[0, −ε₃, ε₂], [ε₃, 0, −ε₁], [−ε₂, ε₁, 0]]`; otherwise the strictly
/// lower-triangular entries `(i, j), i > j` are filled row by row.
pub fn skew_matrix<T: Real>(dim: usize, eps: &[T]) -> Matrix<T> {
    assert_eq!(eps.len(), skew_param_count(dim), "skew parameter count");
    let mut m = Matrix::zeros(dim);
    if dim == 3 {
        m.set(0, 1, -eps[2]);
        m.set(0, 2, eps[1]);
        m.set(1, 0, eps[2]);
        m.set(1, 2, -eps[0]);
        m.set(2, 0, -eps[1]);
        m.set(2, 1, eps[0]);
        return m;
    }
    let mut k = 0;
    for i in 1..dim {
        for j in 0..i {
            m.set(i, j, eps[k]);
            m.set(j, i, -eps[k]);
            k += 1;
        }
    }
    m
}

/// `exp(Ω(ε))`: Rodrigues in three dimensions, Padé otherwise.
pub fn skew_exp<T: Real>(dim: usize, eps: &[T]) -> Matrix<T> {
    let omega = skew_matrix(dim, eps);
    if dim != 3 {
        return omega.expm();
    }
    let theta = dot(eps, eps).sqrt();
    let mut out = Matrix::identity(3);
    if theta == T::zero() {
        return out;
    }
    let w2 = omega.matmul(&omega);
    let (a, b) = if theta < lit(1e-4) {
        let t2 = theta * theta;
        (T::one() - t2 / lit(6.0), lit::<T>(0.5) - t2 / lit(24.0))
    } else {
        (theta.sin() / theta, (T::one() - theta.cos()) / (theta * theta))
    };
    out = out.add(&omega.scale(a)).add(&w2.scale(b));
    out
}

/// Left-multiplies `r` by `exp(Ω(ε))`.
pub fn skew_exponential_step<T: Real>(r: &RotationMatrix<T>, eps: &[T]) -> RotationMatrix<T> {
    let g = skew_exp(r.dim(), eps);
    RotationMatrix { m: g.matmul(&r.m) }
}

/// Haar-uniform rotation: Gram–Schmidt QR of a Gaussian matrix (which leaves
/// the triangular factor with a positive diagonal), then one column flipped
/// if the determinant is negative.
pub fn sample_haar_rotation<T: Real, R: Rng + ?Sized>(p: usize, rng: &mut R) -> RotationMatrix<T> {
    assert!(p >= 1);
    let n = p + 1;
    'retry: loop {
        // cols[j] is column j of Q.
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        for _ in 0..n {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            // Two passes of modified Gram–Schmidt for orthogonality to working precision.
            for _ in 0..2 {
                for q in &cols {
                    let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
                }
            }
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nv < 1e-8 {
                continue 'retry;
            }
            v.iter_mut().for_each(|a| *a /= nv);
            cols.push(v);
        }
        let mut m = Matrix::<f64>::zeros(n);
        for (j, c) in cols.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        if m.det() < 0.0 {
            for i in 0..n {
                m.set(i, 0, -m.get(i, 0));
            }
        }
        let data = m.as_slice().iter().map(|&x| lit(x)).collect();
        return RotationMatrix { m: Matrix::from_row_major(n, data) };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::sample_uniform_sphere;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_draws_are_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in 1..6 {
            for _ in 0..200 {
                let r: RotationMatrix<f64> = sample_haar_rotation(p, &mut rng);
                assert!(r.is_valid(), "p = {p}");
            }
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r: RotationMatrix<f64> = sample_haar_rotation(2, &mut rng);
        let s = skew_exponential_step(&r, &[0.0, 0.0, 0.0]);
        assert_eq!(s, r);
    }

    #[test]
    fn third_component_rotates_first_two_axes() {
        let theta = 0.7f64;
        let r = skew_exponential_step(&RotationMatrix::identity(3), &[0.0, 0.0, theta]);
        let expected = RotationMatrix::plane(3, 0, 1, theta);
        let diff = r.matrix().add(&expected.matrix().scale(-1.0)).max_abs();
        assert!(diff < 1e-14, "{diff}");
    }

    #[test]
    fn step_round_trip_all_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in 1..5 {
            let dim = p + 1;
            let r: RotationMatrix<f64> = sample_haar_rotation(p, &mut rng);
            let eps: Vec<f64> = (0..skew_param_count(dim)).map(|i| 0.3 * (i as f64 + 1.0) - 0.5).collect();
            let neg: Vec<f64> = eps.iter().map(|e| -e).collect();
            let fwd = skew_exponential_step(&r, &eps);
            assert!(fwd.is_valid());
            let back = skew_exponential_step(&fwd, &neg);
            let diff = back.matrix().add(&r.matrix().scale(-1.0)).max_abs();
            assert!(diff < 1e-9, "p={p} diff={diff}");
        }
    }

    #[test]
    fn rodrigues_matches_pade() {
        let eps = [0.4f64, -1.3, 2.2];
        let a = skew_exp(3, &eps);
        let b = skew_matrix(3, &eps).expm();
        assert!(a.add(&b.scale(-1.0)).max_abs() < 1e-12);
    }

    #[test]
    fn rotations_are_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let r: RotationMatrix<f64> = sample_haar_rotation(2, &mut rng);
            let a = sample_uniform_sphere::<f64, _>(2, &mut rng);
            let b = sample_uniform_sphere::<f64, _>(2, &mut rng);
            let d0 = crate::sphere::geodesic_distance(&a, &b).unwrap();
            let d1 = crate::sphere::geodesic_distance(&r.apply(&a), &r.apply(&b)).unwrap();
            assert!((d0 - d1).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_reflection() {
        let refl = vec![-1.0f64, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert!(RotationMatrix::from_row_major(3, refl).is_err());
    }

    #[test]
    fn procrustes_recovers_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in 1..5 {
            for k in [1usize, 2, 5] {
                let r: RotationMatrix<f64> = sample_haar_rotation(p, &mut rng);
                let n = p + 1;
                let mut h = Matrix::zeros(n);
                for _ in 0..k {
                    let a = sample_uniform_sphere::<f64, _>(p, &mut rng);
                    let b = r.apply(&a);
                    for i in 0..n {
                        for j in 0..n {
                            h.set(i, j, h.get(i, j) + b.as_slice()[i] * a.as_slice()[j]);
                        }
                    }
                }
                let fit = procrustes_rotation(&h);
                assert!(fit.is_valid());
                if k > p {
                    assert!(fit.matrix().add(&r.matrix().scale(-1.0)).max_abs() < 1e-9, "p={p} k={k}");
                }
                // Exact fit on the supplied directions regardless of rank.
                let score: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| fit.matrix().get(i, j) * h.get(i, j)).sum();
                let best: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| r.matrix().get(i, j) * h.get(i, j)).sum();
                assert!(score >= best - 1e-9, "p={p} k={k}");
            }
        }
    }
}
