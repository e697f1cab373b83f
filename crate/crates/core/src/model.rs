//! The regression model `f = R ∘ S_ν`, its priors, likelihood and data
//! simulation.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::{is_feasible, solve_dual_potentials, transport_map_eval, CostTable, ReferenceCloud, TargetMeasure};
use crate::rotation::{sample_haar_rotation, RotationMatrix};
use crate::scalar::{half_pi_sq, lit, Real};
use crate::sphere::{sample_uniform_sphere, UnitVector};
use crate::vmf::{vmf_log_normalizer, vmf_sample, VmfParams};

/// The map applied before the rotation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
#[serde(rename_all = "snake_case")]
pub enum Transport<T> {
    /// Semi-discrete optimal transport onto a finite measure.
    Laguerre(TargetMeasure<T>),
    /// No transport; the model reduces to `f(x) = R x`.
    Identity,
}

/// Everything that defines the regression map and the likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ModelState<T> {
    pub transport: Transport<T>,
    pub rotation: RotationMatrix<T>,
    pub kappa: T,
}

impl<T: Real> ModelState<T> {
    pub fn new(measure: TargetMeasure<T>, rotation: RotationMatrix<T>, kappa: T) -> Result<Self> {
        let s = Self { transport: Transport::Laguerre(measure), rotation, kappa };
        s.validate()?;
        Ok(s)
    }

    pub fn rotation_only(rotation: RotationMatrix<T>, kappa: T) -> Result<Self> {
        let s = Self { transport: Transport::Identity, rotation, kappa };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > T::zero()) || !self.kappa.is_finite() {
            return Err(Error::NonPositiveConcentration(self.kappa.to_f64().unwrap_or(f64::NAN)));
        }
        if let Transport::Laguerre(m) = &self.transport {
            m.validate()?;
            if m.dim() != self.rotation.dim() {
                return Err(Error::DimensionMismatch { expected: m.dim(), got: self.rotation.dim() });
            }
        }
        if !self.rotation.is_valid() {
            return Err(Error::InvalidVector("rotation is not in SO(p+1)".into()));
        }
        Ok(())
    }

    pub fn measure(&self) -> Option<&TargetMeasure<T>> {
        match &self.transport {
            Transport::Laguerre(m) => Some(m),
            Transport::Identity => None,
        }
    }

    /// Number of atoms, zero for the rotation-only model.
    pub fn k(&self) -> usize {
        self.measure().map_or(0, TargetMeasure::k)
    }

    pub fn dim(&self) -> usize {
        self.rotation.dim()
    }

    /// Feasibility of the measure on `cloud` (always true without transport).
    pub fn is_feasible(&self, cloud: &ReferenceCloud<T>) -> bool {
        self.measure().is_none_or(|m| is_feasible(m, cloud))
    }
}

/// A map from the sphere to itself.
pub trait SphereMap<T: Real> {
    fn map(&self, x: &UnitVector<T>) -> UnitVector<T>;
}

impl<T: Real> SphereMap<T> for ModelState<T> {
    fn map(&self, x: &UnitVector<T>) -> UnitVector<T> {
        regression_map_eval(self, x)
    }
}

impl<T: Real, F: Fn(&UnitVector<T>) -> UnitVector<T>> SphereMap<T> for F {
    fn map(&self, x: &UnitVector<T>) -> UnitVector<T> {
        self(x)
    }
}

/// `R ∘ S_ν(x)`.
pub fn regression_map_eval<T: Real>(state: &ModelState<T>, x: &UnitVector<T>) -> UnitVector<T> {
    match &state.transport {
        Transport::Laguerre(m) => state.rotation.apply(&m.atoms()[transport_map_eval(m, x)]),
        Transport::Identity => state.rotation.apply(x),
    }
}

/// Paired covariates and responses on a common sphere.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset<T> {
    pairs: Vec<(UnitVector<T>, UnitVector<T>)>,
}

impl<T: Real> Dataset<T> {
    pub fn new(pairs: Vec<(UnitVector<T>, UnitVector<T>)>) -> Result<Self> {
        if let Some((x0, _)) = pairs.first() {
            let dim = x0.dim();
            for (x, y) in &pairs {
                if x.dim() != dim || y.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: x.dim().max(y.dim()) });
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn empty() -> Self {
        Self { pairs: Vec::new() }
    }

    pub fn pairs(&self) -> &[(UnitVector<T>, UnitVector<T>)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.pairs.first().map(|(x, _)| x.dim())
    }

    pub fn covariates(&self) -> Vec<UnitVector<T>> {
        self.pairs.iter().map(|(x, _)| x.clone()).collect()
    }

    pub fn responses(&self) -> Vec<UnitVector<T>> {
        self.pairs.iter().map(|(_, y)| y.clone()).collect()
    }

    /// Concatenation with another dataset.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut pairs = self.pairs.clone();
        pairs.extend(other.pairs.iter().cloned());
        Self::new(pairs)
    }

    /// First `n` pairs and the rest.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.pairs.len());
        (Self { pairs: self.pairs[..n].to_vec() }, Self { pairs: self.pairs[n..].to_vec() })
    }
}

/// `Σ_i ln g(y_i; R ∘ S_ν(x_i), κ)`, including the κ-dependent normalizer.
/// Zero for an empty dataset.
pub fn log_likelihood<T: Real>(state: &ModelState<T>, data: &Dataset<T>) -> T {
    if data.is_empty() {
        return T::zero();
    }
    let m = state.dim();
    let log_c = vmf_log_normalizer(m, state.kappa).expect("state kappa is positive");
    let align = data
        .pairs()
        .iter()
        .fold(T::zero(), |s, (x, y)| s + regression_map_eval(state, x).dot(y));
    log_c * lit(data.len() as f64) + state.kappa * align
}

/// Prior hyperparameters for the number of atoms and the Monte Carlo cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig<T> {
    /// Rate of the zero-truncated Poisson prior on the number of atoms.
    pub lambda: T,
    /// Sphere dimension.
    pub p: usize,
    pub cloud_size: usize,
    pub k_max: usize,
    /// Attempts allowed per prior draw before giving up.
    pub rejection_budget: usize,
}

impl<T: Real> Default for PriorConfig<T> {
    fn default() -> Self {
        Self { lambda: lit(5.0), p: 2, cloud_size: 10_000, k_max: 100, rejection_budget: 100_000 }
    }
}

impl<T: Real> PriorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > T::zero()) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if self.k_max < 1 || self.p < 1 || self.cloud_size < 1 || self.rejection_budget < 1 {
            return Err(Error::Config("k_max, p, cloud_size and rejection_budget must be at least 1".into()));
        }
        Ok(())
    }

    /// Unnormalized `ln π_k(k)` of the zero-truncated Poisson, `−∞` outside
    /// `1..=k_max`.
    pub fn log_prior_k(&self, k: usize) -> T {
        if k == 0 || k > self.k_max {
            return T::neg_infinity();
        }
        let lam = self.lambda.to_f64().unwrap();
        lit(k as f64 * lam.ln() - crate::bessel::ln_gamma(k as f64 + 1.0))
    }

    /// Draw from the zero-truncated Poisson restricted to `1..=k_max`.
    pub fn sample_k<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let lam = self.lambda.to_f64().unwrap();
        let mut w = Vec::with_capacity(self.k_max);
        let mut lw = 0.0f64;
        for k in 1..=self.k_max {
            lw += lam.ln() - (k as f64).ln();
            w.push(lw);
        }
        let top = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = w.iter().map(|l| (l - top).exp()).sum();
        let mut u = rng.random::<f64>() * total;
        for (i, l) in w.iter().enumerate() {
            u -= (l - top).exp();
            if u <= 0.0 {
                return i + 1;
            }
        }
        self.k_max
    }
}

/// Atoms uniform on the sphere and potentials uniform on
/// `[−π²/2, π²/2]^k`, retried until every Laguerre cell is occupied on the
/// cloud. Returns the measure and the number of attempts used.
pub fn sample_dual_measure<T: Real, R: Rng + ?Sized>(
    k: usize,
    p: usize,
    cloud: &ReferenceCloud<T>,
    budget: usize,
    rng: &mut R,
) -> Result<(TargetMeasure<T>, usize)> {
    let b = half_pi_sq::<T>().to_f64().unwrap();
    for attempt in 1..=budget {
        match try_dual_measure(k, p, b, cloud, rng) {
            Some(m) => return Ok((m, attempt)),
            None => continue,
        }
    }
    Err(Error::RejectionBudgetExceeded(budget))
}

/// A simulation truth: `k` atoms and potentials drawn as in
/// [`sample_dual_measure`], a Haar rotation, and the given concentration.
pub fn sample_truth<T: Real, R: Rng + ?Sized>(
    k: usize,
    kappa: T,
    cloud: &ReferenceCloud<T>,
    budget: usize,
    rng: &mut R,
) -> Result<ModelState<T>> {
    let p = cloud.dim() - 1;
    let (measure, _) = sample_dual_measure(k, p, cloud, budget, rng)?;
    ModelState::new(measure, sample_haar_rotation(p, rng), kappa)
}

fn try_dual_measure<T: Real, R: Rng + ?Sized>(
    k: usize,
    p: usize,
    b: f64,
    cloud: &ReferenceCloud<T>,
    rng: &mut R,
) -> Option<TargetMeasure<T>> {
    let atoms: Vec<UnitVector<T>> = (0..k).map(|_| sample_uniform_sphere(p, rng)).collect();
    let psi: Vec<T> = (0..k).map(|_| lit(rng.random_range(-b..=b))).collect();
    let m = TargetMeasure::new(atoms, psi).ok()?;
    is_feasible(&m, cloud).then_some(m)
}

/// Initial concentration for chain starts under the flat prior on κ.
pub fn sample_initial_kappa<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    lit(rng.random_range(1.0..200.0))
}

/// Joint rejection draw from the dual-formulation prior: `k` from the
/// truncated Poisson, atoms and box-uniform potentials, accepted when every
/// cell is occupied; Haar rotation; κ from the chain-start rule.
pub fn sample_prior_dual<T: Real, R: Rng + ?Sized>(
    config: &PriorConfig<T>,
    cloud: &ReferenceCloud<T>,
    rng: &mut R,
) -> Result<ModelState<T>> {
    config.validate()?;
    let b = half_pi_sq::<T>().to_f64().unwrap();
    for _ in 0..config.rejection_budget {
        let k = config.sample_k(rng);
        if let Some(measure) = try_dual_measure(k, config.p, b, cloud, rng) {
            let rotation = sample_haar_rotation(config.p, rng);
            let kappa = sample_initial_kappa(rng);
            return Ok(ModelState { transport: Transport::Laguerre(measure), rotation, kappa });
        }
    }
    Err(Error::RejectionBudgetExceeded(config.rejection_budget))
}

/// Draw from the direct prior: uniform atoms, `Dir(α, …, α)` weights realized
/// through the dual solver. Returns the state and the drawn weights.
#[allow(clippy::too_many_arguments)]
pub fn sample_prior_direct<T: Real, R: Rng + ?Sized>(
    config: &PriorConfig<T>,
    k: usize,
    alpha: T,
    cloud: &ReferenceCloud<T>,
    tol: T,
    max_iter: usize,
    rng: &mut R,
) -> Result<(ModelState<T>, Vec<T>)> {
    config.validate()?;
    let a = alpha.to_f64().unwrap();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Config(format!("Dirichlet parameter {a} must lie in (0, 1)")));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let atoms: Vec<UnitVector<T>> = (0..k).map(|_| sample_uniform_sphere(config.p, rng)).collect();
    let gamma = Gamma::new(a, 1.0).expect("valid gamma shape");
    let weights: Vec<T> = loop {
        let g: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let s: f64 = g.iter().sum();
        if s > 0.0 && g.iter().all(|&x| x / s > 0.0) {
            break g.iter().map(|&x| lit(x / s)).collect();
        }
    };
    let report = solve_dual_potentials(&atoms, &weights, cloud, tol, max_iter)?;
    let measure = TargetMeasure::new(atoms, report.psi)?;
    let rotation = sample_haar_rotation(config.p, rng);
    let kappa = sample_initial_kappa(rng);
    Ok((ModelState { transport: Transport::Laguerre(measure), rotation, kappa }, weights))
}

/// `n` pairs with uniform covariates and vMF responses around `f(x)`.
pub fn simulate_dataset<T: Real, R: Rng + ?Sized>(state: &ModelState<T>, n: usize, rng: &mut R) -> Dataset<T> {
    let p = state.dim() - 1;
    let pairs = (0..n)
        .map(|_| {
            let x = sample_uniform_sphere(p, rng);
            let mean = regression_map_eval(state, &x);
            let y = vmf_sample(&VmfParams::new(mean, state.kappa).expect("positive kappa"), rng);
            (x, y)
        })
        .collect();
    Dataset { pairs }
}

/// Assignment of every covariate to its cell, used by callers that need the
/// fitted partition.
pub fn assign_covariates<T: Real>(measure: &TargetMeasure<T>, data: &Dataset<T>) -> Vec<usize> {
    CostTable::new(&data.covariates(), measure.atoms()).assign(measure.psi())
}

#[cfg(test)]
mod tests;
