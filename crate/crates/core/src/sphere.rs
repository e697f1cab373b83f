//! Points, tangent vectors and geodesics on the unit sphere `S^p ⊂ ℝ^{p+1}`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::scalar::{lit, Real};

/// A point on `S^p`, stored as its `p + 1` ambient coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitVector<T> {
    coords: Vec<T>,
}

impl<T: Real> UnitVector<T> {
    /// Normalizes `coords` onto the sphere, leaving vectors that are already
    /// unit to within a few ulps untouched. Fails for fewer than two
    /// coordinates, non-finite entries, or a zero vector.
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidVector(format!("ambient dimension {} < 2", coords.len())));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidVector("non-finite coordinate".into()));
        }
        let n = norm(&coords);
        if n <= T::min_positive_value() {
            return Err(Error::InvalidVector("zero vector".into()));
        }
        if (n - T::one()).abs() <= T::epsilon() * lit(4.0) {
            return Ok(Self { coords });
        }
        Ok(Self { coords: coords.into_iter().map(|c| c / n).collect() })
    }

    /// Standard basis vector `e_{axis}` in ambient dimension `dim`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        assert!(dim >= 2 && axis < dim);
        let mut coords = vec![T::zero(); dim];
        coords[axis] = T::one();
        Self { coords }
    }

    /// Wraps coordinates that are already unit length.
    pub(crate) fn from_normalized(coords: Vec<T>) -> Self {
        debug_assert!((norm(&coords) - T::one()).abs() < lit(1e-6));
        Self { coords }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Sphere dimension `p` (one less than the ambient dimension).
    #[inline]
    pub fn sphere_dim(&self) -> usize {
        self.coords.len() - 1
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coords
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        dot(&self.coords, &other.coords)
    }

    pub fn antipode(&self) -> Self {
        Self { coords: self.coords.iter().map(|&c| -c).collect() }
    }

    pub fn is_unit(&self) -> bool {
        (norm(&self.coords) - T::one()).abs() <= T::geometric_tol()
    }

    pub fn cast<U: Real>(&self) -> UnitVector<U> {
        UnitVector { coords: self.coords.iter().map(|c| lit(c.to_f64().unwrap())).collect() }
    }
}

/// A vector in the tangent space at `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector<T> {
    base: UnitVector<T>,
    vec: Vec<T>,
}

impl<T: Real> TangentVector<T> {
    pub fn new(base: UnitVector<T>, vec: Vec<T>) -> Result<Self> {
        if vec.len() != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: vec.len() });
        }
        let tol = lit::<T>(1e-10).max(T::geometric_tol()) * T::one().max(norm(&vec));
        if dot(base.as_slice(), &vec).abs() > tol {
            return Err(Error::InvalidVector("tangent vector not orthogonal to its base".into()));
        }
        Ok(Self { base, vec })
    }

    pub fn zero(base: UnitVector<T>) -> Self {
        let vec = vec![T::zero(); base.dim()];
        Self { base, vec }
    }

    pub fn base(&self) -> &UnitVector<T> {
        &self.base
    }

    pub fn as_slice(&self) -> &[T] {
        &self.vec
    }

    pub fn norm(&self) -> T {
        norm(&self.vec)
    }
}

fn check_dims<T>(a: &UnitVector<T>, b: &UnitVector<T>) -> Result<()> {
    if a.coords.len() != b.coords.len() {
        return Err(Error::DimensionMismatch { expected: a.coords.len(), got: b.coords.len() });
    }
    Ok(())
}

/// Arc length for a raw inner product, clamped into `[-1, 1]`.
#[inline]
pub fn arc_from_dot<T: Real>(d: T) -> T {
    d.max(-T::one()).min(T::one()).acos()
}

/// Half squared arc length for a raw inner product.
#[inline]
pub fn cost_from_dot<T: Real>(d: T) -> T {
    let a = arc_from_dot(d);
    a * a * lit(0.5)
}

/// Arc length between unit coordinate slices, `2 atan2(|a − b|, |a + b|)`,
/// accurate near both `0` and `π`.
#[inline]
pub fn arc_between<T: Real>(a: &[T], b: &[T]) -> T {
    let (mut minus, mut plus) = (T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        minus = minus + (x - y) * (x - y);
        plus = plus + (x + y) * (x + y);
    }
    lit::<T>(2.0) * minus.sqrt().atan2(plus.sqrt())
}

/// Great-circle distance `arccos(aᵀb)` in `[0, π]`.
pub fn geodesic_distance<T: Real>(a: &UnitVector<T>, b: &UnitVector<T>) -> Result<T> {
    check_dims(a, b)?;
    Ok(arc_between(&a.coords, &b.coords))
}

/// Transport cost `d(a, b)² / 2`.
pub fn cost<T: Real>(a: &UnitVector<T>, b: &UnitVector<T>) -> Result<T> {
    check_dims(a, b)?;
    Ok(cost_from_dot(a.dot(b)))
}

/// Riemannian exponential: follow the great circle from the base point along
/// the tangent direction for arc length `‖v‖`.
pub fn exp_map<T: Real>(t: &TangentVector<T>) -> UnitVector<T> {
    let len = t.norm();
    if len <= T::epsilon() {
        return t.base.clone();
    }
    let (s, c) = len.sin_cos();
    let coords = t
        .base
        .coords
        .iter()
        .zip(&t.vec)
        .map(|(&x, &v)| c * x + s * v / len)
        .collect();
    UnitVector::new(coords).expect("great-circle point is nonzero")
}

/// Inverse of [`exp_map`]. Undefined at the antipode.
pub fn log_map<T: Real>(x: &UnitVector<T>, y: &UnitVector<T>) -> Result<TangentVector<T>> {
    check_dims(x, y)?;
    let d = x.dot(y);
    if d <= -T::one() + lit(1e-12) {
        return Err(Error::Antipodal);
    }
    // Component of y orthogonal to x.
    let mut perp: Vec<T> = y.coords.iter().zip(&x.coords).map(|(&yi, &xi)| yi - d * xi).collect();
    let pn = norm(&perp);
    if pn <= T::epsilon() {
        return Ok(TangentVector::zero(x.clone()));
    }
    let theta = pn.atan2(d);
    for v in perp.iter_mut() {
        *v = *v * theta / pn;
    }
    Ok(TangentVector { base: x.clone(), vec: perp })
}

/// Uniform draw on `S^p` by normalizing a standard Gaussian vector.
pub fn sample_uniform_sphere<T: Real, R: Rng + ?Sized>(p: usize, rng: &mut R) -> UnitVector<T> {
    assert!(p >= 1, "sphere dimension must be at least 1");
    loop {
        let v: Vec<T> = (0..=p).map(|_| lit(rng.sample::<f64, _>(StandardNormal))).collect();
        if let Ok(u) = UnitVector::new(v) {
            return u;
        }
    }
}

/// Longitude/latitude in degrees to a point on `S²`.
pub fn lonlat_to_unit<T: Real>(lon_deg: T, lat_deg: T) -> UnitVector<T> {
    let lon = lon_deg.to_radians();
    let lat = lat_deg.to_radians();
    let (sl, cl) = lat.sin_cos();
    let (so, co) = lon.sin_cos();
    UnitVector::new(vec![cl * co, cl * so, sl]).expect("spherical coordinates are unit")
}

/// Inverse of [`lonlat_to_unit`]; longitude in `[-180, 180)`.
pub fn unit_to_lonlat<T: Real>(u: &UnitVector<T>) -> (T, T) {
    let c = u.as_slice();
    let lat = c[2].max(-T::one()).min(T::one()).asin().to_degrees();
    let mut lon = c[1].atan2(c[0]).to_degrees();
    if lon >= lit(180.0) {
        lon = lon - lit(360.0);
    }
    (lon, lat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn e(i: usize) -> UnitVector<f64> {
        UnitVector::basis(3, i)
    }

    #[test]
    fn geodesic_examples() {
        assert_eq!(geodesic_distance(&e(0), &e(0)).unwrap(), 0.0);
        assert!((geodesic_distance(&e(0), &e(0).antipode()).unwrap() - PI).abs() < 1e-15);
        assert!((geodesic_distance(&e(0), &e(1)).unwrap() - PI / 2.0).abs() < 1e-15);
        let other = UnitVector::<f64>::basis(4, 0);
        assert!(matches!(geodesic_distance(&e(0), &other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cost_examples() {
        assert_eq!(cost(&e(0), &e(0)).unwrap(), 0.0);
        assert!((cost(&e(0), &e(0).antipode()).unwrap() - PI * PI / 2.0).abs() < 1e-14);
        assert!((cost(&e(0), &e(1)).unwrap() - PI * PI / 8.0).abs() < 1e-14);
    }

    #[test]
    fn exp_map_examples() {
        let z = TangentVector::zero(e(0));
        assert_eq!(exp_map(&z), e(0));
        let half = TangentVector::new(e(0), vec![0.0, PI / 2.0, 0.0]).unwrap();
        let got = exp_map(&half);
        assert!((got.dot(&e(1)) - 1.0).abs() < 1e-15);
        let full = TangentVector::new(e(0), vec![0.0, PI, 0.0]).unwrap();
        let got = exp_map(&full);
        assert!((got.dot(&e(0)) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_map_examples() {
        let z = log_map(&e(0), &e(0)).unwrap();
        assert_eq!(z.norm(), 0.0);
        let v = log_map(&e(0), &e(1)).unwrap();
        assert!((v.as_slice()[1] - PI / 2.0).abs() < 1e-15);
        assert!(v.as_slice()[0].abs() < 1e-15 && v.as_slice()[2].abs() < 1e-15);
        assert!(matches!(log_map(&e(0), &e(0).antipode()), Err(Error::Antipodal)));
    }

    #[test]
    fn tangent_rejects_non_orthogonal() {
        assert!(TangentVector::new(e(0), vec![1.0, 0.0, 0.0]).is_err());
        assert!(TangentVector::new(e(0), vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn unit_vector_rejects_degenerate_input() {
        assert!(UnitVector::<f64>::new(vec![1.0]).is_err());
        assert!(UnitVector::<f64>::new(vec![0.0, 0.0]).is_err());
        assert!(UnitVector::<f64>::new(vec![f64::NAN, 1.0]).is_err());
        let u = UnitVector::new(vec![3.0f64, 4.0]).unwrap();
        assert!(u.is_unit());
    }

    #[test]
    fn uniform_sphere_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut mean = [0.0f64; 3];
        let mut north = 0usize;
        let cos0 = (PI / 3.0).cos();
        let mut cap = 0usize;
        for _ in 0..n {
            let u: UnitVector<f64> = sample_uniform_sphere(2, &mut rng);
            assert!(u.is_unit());
            for (m, c) in mean.iter_mut().zip(u.as_slice()) {
                *m += c;
            }
            north += (u.as_slice()[0] > 0.0) as usize;
            cap += (u.as_slice()[0] > cos0) as usize;
        }
        for m in mean {
            assert!((m / n as f64).abs() < 0.01);
        }
        assert!((north as f64 / n as f64 - 0.5).abs() < 0.01);
        // Cap of colatitude π/3 has mass (1 − cos θ₀)/2 = 0.25.
        let frac = cap as f64 / n as f64;
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((frac - 0.25).abs() < 4.0 * se);
    }

    #[test]
    fn lonlat_round_trip() {
        let u = lonlat_to_unit(90.0f64, 0.0);
        assert!((u.dot(&e(1)) - 1.0).abs() < 1e-15);
        for &(lon, lat) in &[(-179.5f64, 12.0), (45.0, -60.0), (120.25, 89.0), (0.0, 0.0)] {
            let (lo, la) = unit_to_lonlat(&lonlat_to_unit(lon, lat));
            assert!((lo - lon).abs() < 1e-9 && (la - lat).abs() < 1e-9, "{lon} {lat}");
        }
    }
}
