//! Minimal dense vector and square-matrix helpers. Dimensions here are tiny
//! (the ambient dimension is usually 3), so everything is row-major `Vec`.

use crate::scalar::{lit, Real};

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Square matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    pub(crate) n: usize,
    pub(crate) data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * n, "matrix data length");
        Self { n, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        assert_eq!(n, other.n);
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n).map(|i| dot(&self.data[i * n..(i + 1) * n], v)).collect()
    }

    /// `selfᵀ v`
    pub fn tmatvec(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            let vi = v[i];
            for j in 0..n {
                out[j] = out[j] + self.data[i * n + j] * vi;
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { n: self.n, data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect() }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// One-norm (maximum absolute column sum).
    pub fn norm1(&self) -> T {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).fold(T::zero(), |s, i| s + self.data[i * n + j].abs()))
            .fold(T::zero(), T::max)
    }

    /// Determinant by partial-pivoting LU.
    pub fn det(&self) -> T {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = T::one();
        for c in 0..n {
            let mut piv = c;
            for r in c + 1..n {
                if a[r * n + c].abs() > a[piv * n + c].abs() {
                    piv = r;
                }
            }
            if a[piv * n + c] == T::zero() {
                return T::zero();
            }
            if piv != c {
                for j in 0..n {
                    a.swap(c * n + j, piv * n + j);
                }
                det = -det;
            }
            let d = a[c * n + c];
            det = det * d;
            for r in c + 1..n {
                let f = a[r * n + c] / d;
                for j in c..n {
                    a[r * n + j] = a[r * n + j] - f * a[c * n + j];
                }
            }
        }
        det
    }

    /// Solve `self · X = rhs` for square `rhs` with Gaussian elimination.
    pub fn solve(&self, rhs: &Self) -> Self {
        let n = self.n;
        let mut a = self.data.clone();
        let mut b = rhs.data.clone();
        for c in 0..n {
            let mut piv = c;
            for r in c + 1..n {
                if a[r * n + c].abs() > a[piv * n + c].abs() {
                    piv = r;
                }
            }
            if piv != c {
                for j in 0..n {
                    a.swap(c * n + j, piv * n + j);
                    b.swap(c * n + j, piv * n + j);
                }
            }
            let d = a[c * n + c];
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = a[r * n + c] / d;
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    a[r * n + j] = a[r * n + j] - f * a[c * n + j];
                    b[r * n + j] = b[r * n + j] - f * b[c * n + j];
                }
            }
        }
        for r in 0..n {
            let d = a[r * n + r];
            for j in 0..n {
                b[r * n + j] = b[r * n + j] / d;
            }
        }
        Self { n, data: b }
    }

    /// Matrix exponential by scaling and squaring with a diagonal Padé(6)
    /// approximant.
    pub fn expm(&self) -> Self {
        const PADE6: [f64; 7] = [
            1.0,
            0.5,
            5.0 / 44.0,
            1.0 / 66.0,
            1.0 / 792.0,
            1.0 / 15840.0,
            1.0 / 665280.0,
        ];
        let n = self.n;
        let norm = self.norm1().to_f64().unwrap_or(0.0);
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
        let a = self.scale(lit::<T>(0.5f64.powi(squarings)));
        let mut num = Self::identity(n);
        let mut den = Self::identity(n);
        let mut power = Self::identity(n);
        for (k, &c) in PADE6.iter().enumerate().skip(1) {
            power = power.matmul(&a);
            let term = power.scale(lit(c));
            num = num.add(&term);
            den = if k % 2 == 0 { den.add(&term) } else { den.add(&term.scale(-T::one())) };
        }
        let mut out = den.solve(&num);
        for _ in 0..squarings {
            out = out.matmul(&out);
        }
        out
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in decreasing order and the matching eigenvectors as
/// the columns of the second matrix.
pub fn symmetric_eigen<T: Real>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _ in 0..100 {
        let off: T = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).fold(T::zero(), |s, (i, j)| s + m.get(i, j) * m.get(i, j));
        if off <= T::epsilon() * T::epsilon() * m.data.iter().fold(T::zero(), |s, &x| s + x * x) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (lit::<T>(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m.get(k, p), m.get(k, q));
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let (mpk, mqk) = (m.get(p, k), m.get(q, k));
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vecs = Matrix::zeros(n);
    for (c, &i) in order.iter().enumerate() {
        for r in 0..n {
            vecs.set(r, c, v.get(r, i));
        }
    }
    (values, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal_matches_scalar_exp() {
        let m = Matrix::from_row_major(2, vec![1.0f64, 0.0, 0.0, -2.5]);
        let e = m.expm();
        assert!((e.get(0, 0) - 1f64.exp()).abs() < 1e-13);
        assert!((e.get(1, 1) - (-2.5f64).exp()).abs() < 1e-13);
        assert!(e.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn expm_of_planar_skew_is_rotation() {
        let t = 2.7f64;
        let m = Matrix::from_row_major(2, vec![0.0, -t, t, 0.0]);
        let e = m.expm();
        assert!((e.get(0, 0) - t.cos()).abs() < 1e-12);
        assert!((e.get(1, 0) - t.sin()).abs() < 1e-12);
    }

    #[test]
    fn det_and_solve() {
        let m = Matrix::from_row_major(3, vec![2.0f64, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        assert!((m.det() - 18.0).abs() < 1e-12);
        let inv = m.solve(&Matrix::identity(3));
        let id = m.matmul(&inv);
        assert!(id.add(&Matrix::identity(3).scale(-1.0)).max_abs() < 1e-14);
    }

    #[test]
    fn symmetric_eigen_reconstructs() {
        let a = Matrix::from_row_major(3, vec![4.0f64, 1.0, -2.0, 1.0, 2.0, 0.5, -2.0, 0.5, 3.0]);
        let (vals, vecs) = symmetric_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let mut d = Matrix::zeros(3);
        for i in 0..3 {
            d.set(i, i, vals[i]);
        }
        let back = vecs.matmul(&d).matmul(&vecs.transpose());
        assert!(back.add(&a.scale(-1.0)).max_abs() < 1e-12);
        assert!(vecs.transpose().matmul(&vecs).add(&Matrix::identity(3).scale(-1.0)).max_abs() < 1e-12);
        assert!((vals.iter().sum::<f64>() - 9.0).abs() < 1e-12);
    }
}
