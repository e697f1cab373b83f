//! Distances between regression maps, Wasserstein-1 between discrete
//! measures, the transport stability probe and held-out predictive scores.

mod w1;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::ChainTrace;
use crate::model::{log_likelihood, Dataset, ModelState, SphereMap};
use crate::ot::{cell_mass_estimate, CostTable, ReferenceCloud, TargetMeasure};
use crate::scalar::{lit, Real};
use crate::sphere::{arc_between, sample_uniform_sphere, UnitVector};

pub use w1::wasserstein1_discrete;

/// Monte Carlo estimate of a map distance with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapDistanceEstimate<T> {
    pub value: T,
    pub std_error: T,
    pub n_points: usize,
}

/// Root of the mean of `values` with the standard error of that mean carried
/// through the square root by the delta method.
fn root_mean<T: Real>(values: &[f64]) -> MapDistanceEstimate<T> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let se_sq = (var / n as f64).sqrt();
    let value = mean.max(0.0).sqrt();
    let std_error = if value > 0.0 { se_sq / (2.0 * value) } else { 0.0 };
    MapDistanceEstimate { value: lit(value), std_error: lit(std_error), n_points: n }
}

/// `d̃(f₁, f₂)` on fixed probe points.
pub fn integrated_l2_distance_on<T: Real, F1: SphereMap<T> + ?Sized, F2: SphereMap<T> + ?Sized>(
    f1: &F1,
    f2: &F2,
    points: &[UnitVector<T>],
) -> MapDistanceEstimate<T> {
    let sq: Vec<f64> = points
        .iter()
        .map(|x| arc_between(f1.map(x).as_slice(), f2.map(x).as_slice()).to_f64().unwrap().powi(2))
        .collect();
    root_mean(&sq)
}

/// `d̃(f₁, f₂) = (∫ d²(f₁(x), f₂(x)) dμ(x))^{1/2}` by Monte Carlo over
/// `n_points` uniform draws on `S^p`.
pub fn integrated_l2_distance<T: Real, F1: SphereMap<T> + ?Sized, F2: SphereMap<T> + ?Sized, R: Rng + ?Sized>(
    f1: &F1,
    f2: &F2,
    p: usize,
    n_points: usize,
    rng: &mut R,
) -> MapDistanceEstimate<T> {
    let points: Vec<UnitVector<T>> = (0..n_points).map(|_| sample_uniform_sphere(p, rng)).collect();
    integrated_l2_distance_on(f1, f2, &points)
}

/// `d̂(f₁, f₂)` on fixed probe points.
pub fn dhat_distance_on<T: Real, F1: SphereMap<T> + ?Sized, F2: SphereMap<T> + ?Sized>(
    f1: &F1,
    f2: &F2,
    points: &[UnitVector<T>],
) -> MapDistanceEstimate<T> {
    let v: Vec<f64> = points
        .iter()
        .map(|x| {
            // 1 − aᵀb = |a − b|² / 2 for unit vectors, without cancellation.
            let (a, b) = (f1.map(x), f2.map(x));
            0.5 * a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| (*p - *q).to_f64().unwrap().powi(2)).sum::<f64>()
        })
        .collect();
    root_mean(&v)
}

/// `d̂(f₁, f₂) = (∫ (1 − f₁(x)ᵀ f₂(x)) dμ(x))^{1/2}` by Monte Carlo.
pub fn dhat_distance<T: Real, F1: SphereMap<T> + ?Sized, F2: SphereMap<T> + ?Sized, R: Rng + ?Sized>(
    f1: &F1,
    f2: &F2,
    p: usize,
    n_points: usize,
    rng: &mut R,
) -> MapDistanceEstimate<T> {
    let points: Vec<UnitVector<T>> = (0..n_points).map(|_| sample_uniform_sphere(p, rng)).collect();
    dhat_distance_on(f1, f2, &points)
}

/// Posterior mean and standard deviation of `d̃(f, truth)` over `states`,
/// each distance evaluated on the same probe points.
pub fn posterior_distance_summary<T: Real, F: SphereMap<T> + ?Sized>(
    states: &[ModelState<T>],
    truth: &F,
    points: &[UnitVector<T>],
) -> (T, T) {
    let d: Vec<f64> = states
        .iter()
        .map(|s| integrated_l2_distance_on(s, truth, points).value.to_f64().unwrap())
        .collect();
    let (mean, sd) = mean_sd(&d);
    (lit(mean), lit(sd))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// `d̃` between the two transport maps on the cloud points and `W₁` between
/// the measures with weights given by their cloud cell masses. Atoms whose
/// cell is empty on the cloud carry no mass and are dropped.
pub fn stability_probe<T: Real>(
    measure1: &TargetMeasure<T>,
    measure2: &TargetMeasure<T>,
    cloud: &ReferenceCloud<T>,
) -> Result<(T, T)> {
    if measure1.dim() != measure2.dim() || measure1.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: measure1.dim(), got: measure2.dim() });
    }
    let a1 = CostTable::new(cloud.points(), measure1.atoms()).assign(measure1.psi());
    let a2 = CostTable::new(cloud.points(), measure2.atoms()).assign(measure2.psi());
    let sq: Vec<f64> = a1
        .iter()
        .zip(&a2)
        .map(|(&i, &j)| arc_between(measure1.atoms()[i].as_slice(), measure2.atoms()[j].as_slice()).to_f64().unwrap().powi(2))
        .collect();
    let d = root_mean::<T>(&sq).value;
    let weighted = |m: &TargetMeasure<T>| -> Vec<(UnitVector<T>, T)> {
        m.atoms()
            .iter()
            .cloned()
            .zip(cell_mass_estimate(m, cloud))
            .filter(|(_, w)| *w > T::zero())
            .collect()
    };
    let w = wasserstein1_discrete(&weighted(measure1), &weighted(measure2))?;
    Ok((d, w))
}

/// Posterior mean direction at `x`: the normalized average of `f(x)` over
/// the draws. `None` without draws or when the average vanishes.
pub fn posterior_mean_direction<T: Real>(states: &[ModelState<T>], x: &UnitVector<T>) -> Option<UnitVector<T>> {
    let mut acc = vec![T::zero(); x.dim()];
    for s in states {
        acc.iter_mut().zip(s.map(x).as_slice()).for_each(|(a, &v)| *a = *a + v);
    }
    UnitVector::new(acc).ok()
}

/// Average per-observation log-likelihood of `test` under each state, then
/// the mean over states and its Monte Carlo standard error.
pub fn held_out_log_likelihood_states<T: Real>(states: &[ModelState<T>], test: &Dataset<T>) -> Result<(T, T)> {
    if states.is_empty() || test.is_empty() {
        return Err(Error::Config("held-out scoring needs a nonempty trace and test set".into()));
    }
    let n = test.len() as f64;
    let per: Vec<f64> = states.iter().map(|s| log_likelihood(s, test).to_f64().unwrap() / n).collect();
    let (mean, sd) = mean_sd(&per);
    Ok((lit(mean), lit(sd / (per.len() as f64).sqrt())))
}

/// [`held_out_log_likelihood_states`] over the records of a trace.
pub fn held_out_log_likelihood<T: Real>(trace: &ChainTrace<T>, test: &Dataset<T>) -> Result<(T, T)> {
    held_out_log_likelihood_states(&trace.states()?, test)
}

#[cfg(test)]
mod tests;
