//! Semi-discrete optimal transport from the uniform law on `S^p` to a finite
//! target: Laguerre cells, cloud-based cell masses, feasibility, conditional
//! feasible intervals for one potential, and dual ascent for prescribed
//! weights.

mod dual;
mod table;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{half_pi_sq, lit, Real};
use crate::sphere::{arc_from_dot, cost_from_dot, sample_uniform_sphere, UnitVector};

pub use dual::{dual_objective, solve_dual_potentials, DualSolverReport};
pub use table::CostTable;

/// Finite target `Σ_j ν_j δ_{z_j}` represented by its atoms and dual
/// potentials. Weights are implied by the Laguerre cell masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct TargetMeasure<T> {
    atoms: Vec<UnitVector<T>>,
    psi: Vec<T>,
}

impl<T: Real> TargetMeasure<T> {
    /// Checks the structural invariants: nonempty, matching dimensions,
    /// distinct atoms, each potential in `[−π²/2, π²/2]` and a potential
    /// range of at most `π²/2`. Feasibility needs a cloud; see [`is_feasible`].
    pub fn new(atoms: Vec<UnitVector<T>>, psi: Vec<T>) -> Result<Self> {
        let m = Self { atoms, psi };
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn from_parts_unchecked(atoms: Vec<UnitVector<T>>, psi: Vec<T>) -> Self {
        Self { atoms, psi }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.atoms.len();
        if k == 0 {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if self.psi.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: self.psi.len() });
        }
        let dim = self.atoms[0].dim();
        for a in &self.atoms {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.dim() });
            }
        }
        for i in 0..k {
            for j in 0..i {
                if arc_from_dot(self.atoms[i].dot(&self.atoms[j])) <= lit(1e-9) {
                    return Err(Error::InvalidMeasure(format!("atoms {j} and {i} coincide")));
                }
            }
        }
        let bound = half_pi_sq::<T>() + lit(1e-9);
        if let Some(p) = self.psi.iter().find(|p| !(p.abs() <= bound)) {
            return Err(Error::InvalidMeasure(format!("potential {p} outside [-pi^2/2, pi^2/2]")));
        }
        let (lo, hi) = self.psi_range();
        if hi - lo > bound {
            return Err(Error::InvalidMeasure(format!("potential range {} exceeds pi^2/2", hi - lo)));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.atoms.len()
    }

    /// Ambient dimension `p + 1`.
    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn atoms(&self) -> &[UnitVector<T>] {
        &self.atoms
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    pub fn psi_range(&self) -> (T, T) {
        let lo = self.psi.iter().copied().fold(T::infinity(), T::min);
        let hi = self.psi.iter().copied().fold(T::neg_infinity(), T::max);
        (lo, hi)
    }

    /// Same atoms with every potential shifted by `c`.
    pub fn shifted(&self, c: T) -> Self {
        Self { atoms: self.atoms.clone(), psi: self.psi.iter().map(|&p| p + c).collect() }
    }
}

/// Frozen uniform sample on the sphere used for every Monte Carlo cell
/// computation within a run.
#[derive(Clone, Debug)]
pub struct ReferenceCloud<T> {
    points: Vec<UnitVector<T>>,
    seed: u64,
}

impl<T: Real> ReferenceCloud<T> {
    pub fn sample(p: usize, size: usize, seed: u64) -> Self {
        assert!(size >= 1, "reference cloud needs at least one point");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..size).map(|_| sample_uniform_sphere(p, &mut rng)).collect();
        Self { points, seed }
    }

    pub fn from_points(points: Vec<UnitVector<T>>, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("empty reference cloud".into()));
        }
        if let Some(bad) = points.iter().position(|p| !p.is_unit()) {
            return Err(Error::InvalidVector(format!("cloud point {bad} is not unit length")));
        }
        Ok(Self { points, seed })
    }

    pub fn points(&self) -> &[UnitVector<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }
}

/// Open interval `(lower, upper)` of admissible values for one potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibleInterval<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Real> FeasibleInterval<T> {
    pub fn length(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, v: T) -> bool {
        v > self.lower && v < self.upper
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        loop {
            let u: f64 = rng.random();
            let v = self.lower + self.length() * lit(u);
            if self.contains(v) {
                return v;
            }
        }
    }

    /// Intersection with `[−π²/2, π²/2]`; `EmptyInterval` if nothing remains.
    pub fn clamp_to_box(lower: T, upper: T) -> Result<Self> {
        let b = half_pi_sq::<T>();
        let lo = lower.max(-b);
        let hi = upper.min(b);
        if !(lo < hi) {
            return Err(Error::EmptyInterval { lower: lo.to_f64().unwrap(), upper: hi.to_f64().unwrap() });
        }
        Ok(Self { lower: lo, upper: hi })
    }

    pub(crate) fn clamp_to_box_pair((lower, upper): (T, T)) -> Option<Self> {
        Self::clamp_to_box(lower, upper).ok()
    }
}

/// Index of the cell containing `x`: `argmin_j c(x, z_j) − ψ_j`, lowest
/// index on ties.
pub fn transport_map_eval<T: Real>(measure: &TargetMeasure<T>, x: &UnitVector<T>) -> usize {
    argmin_cell(measure.atoms(), measure.psi(), x)
}

pub(crate) fn argmin_cell<T: Real>(atoms: &[UnitVector<T>], psi: &[T], x: &UnitVector<T>) -> usize {
    let mut best = 0;
    let mut best_v = T::infinity();
    for (j, (z, &p)) in atoms.iter().zip(psi).enumerate() {
        let v = cost_from_dot(x.dot(z)) - p;
        if v < best_v {
            best_v = v;
            best = j;
        }
    }
    best
}

/// Nearest-atom assignment (constant potentials).
pub fn voronoi_assign<T: Real>(atoms: &[UnitVector<T>], x: &UnitVector<T>) -> usize {
    let mut best = 0;
    let mut best_d = T::neg_infinity();
    for (j, z) in atoms.iter().enumerate() {
        let d = x.dot(z);
        if d > best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Fraction of cloud points in each Laguerre cell.
pub fn cell_mass_estimate<T: Real>(measure: &TargetMeasure<T>, cloud: &ReferenceCloud<T>) -> Vec<T> {
    let table = CostTable::new(cloud.points(), measure.atoms());
    let counts = table.counts(measure.psi());
    let m: T = lit(cloud.len() as f64);
    counts.into_iter().map(|c| lit::<T>(c as f64) / m).collect()
}

/// Every Laguerre cell receives at least one cloud point.
pub fn is_feasible<T: Real>(measure: &TargetMeasure<T>, cloud: &ReferenceCloud<T>) -> bool {
    CostTable::new(cloud.points(), measure.atoms()).is_feasible(measure.psi())
}

/// Cloud approximation of the set of values `ψ_j` can take with the other
/// atoms and potentials held fixed, intersected with `[−π²/2, π²/2]`.
///
/// Lower bound: the smallest `c(x, z_j) − min_{l≠j}(c(x, z_l) − ψ_l)` over
/// the cloud, below which cell `j` is empty. Upper bound: for each other
/// cell `l` (computed without atom `j`), the largest value of the same
/// quantity over its points; the minimum over `l` is where the first
/// neighbouring cell would be emptied.
pub fn conditional_feasible_interval<T: Real>(
    measure: &TargetMeasure<T>,
    j: usize,
    cloud: &ReferenceCloud<T>,
) -> Result<FeasibleInterval<T>> {
    if j >= measure.k() {
        return Err(Error::InvalidMeasure(format!("atom index {j} out of range")));
    }
    CostTable::new(cloud.points(), measure.atoms()).conditional_interval(measure.psi(), j)
}
