use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::sphere::UnitVector;

use super::{CostTable, ReferenceCloud};

fn check_target<T: Real>(k: usize, target: &[T]) -> Result<()> {
    if target.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: target.len() });
    }
    if target.iter().any(|&t| !(t > T::zero())) {
        return Err(Error::Weights("target probabilities must be positive".into()));
    }
    let s: f64 = target.iter().map(|t| t.to_f64().unwrap()).sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::Weights(format!("target probabilities sum to {s}")));
    }
    Ok(())
}

/// Kantorovich dual functional `∫ min_z (c(x,z) − ψ̃(z)) dμ + Σ ψ̃(z) ν(z)`
/// with the integral replaced by a cloud average. Concave in `ψ̃` and
/// invariant under a common shift.
pub fn dual_objective<T: Real>(
    atoms: &[UnitVector<T>],
    psi_tilde: &[T],
    target_probs: &[T],
    cloud: &ReferenceCloud<T>,
) -> Result<T> {
    if psi_tilde.len() != atoms.len() {
        return Err(Error::DimensionMismatch { expected: atoms.len(), got: psi_tilde.len() });
    }
    check_target(atoms.len(), target_probs)?;
    let table = CostTable::new(cloud.points(), atoms);
    Ok(objective(&table, psi_tilde, target_probs))
}

fn objective<T: Real>(table: &CostTable<T>, psi: &[T], target: &[T]) -> T {
    // Shift-invariant: evaluate at ψ − ψ̄ so both terms stay O(1).
    let mean = psi.iter().copied().sum::<T>() / lit(psi.len() as f64);
    let centered: Vec<T> = psi.iter().map(|&p| p - mean).collect();
    let linear = centered.iter().zip(target).fold(T::zero(), |s, (&p, &t)| s + p * t);
    table.mean_min_reduced_cost(&centered) + linear
}

/// Diagnostics from [`solve_dual_potentials`].
#[derive(Clone, Debug)]
pub struct DualSolverReport<T> {
    pub psi: Vec<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Damped supergradient ascent on the dual functional:
/// `ψ ← ψ + η (ν − G(ψ))`, `η` halved whenever the objective would drop,
/// gauge fixed to `ψ_k = 0`. Converged once every cell mass is within `tol`
/// of its target and no cell is empty.
pub fn solve_dual_potentials<T: Real>(
    atoms: &[UnitVector<T>],
    target_probs: &[T],
    cloud: &ReferenceCloud<T>,
    tol: T,
    max_iter: usize,
) -> Result<DualSolverReport<T>> {
    let k = atoms.len();
    if k == 0 {
        return Err(Error::InvalidMeasure("no atoms".into()));
    }
    check_target(k, target_probs)?;
    let table = CostTable::new(cloud.points(), atoms);
    let m: T = lit(cloud.len() as f64);
    let masses = |psi: &[T]| -> (Vec<T>, bool) {
        let counts = table.counts(psi);
        let nonempty = counts.iter().all(|&c| c > 0);
        (counts.into_iter().map(|c| lit::<T>(c as f64) / m).collect(), nonempty)
    };
    let residual = |g: &[T]| g.iter().zip(target_probs).fold(T::zero(), |r, (&a, &b)| r.max((a - b).abs()));

    let mut psi = vec![T::zero(); k];
    let mut eta = T::one();
    let (mut g, mut nonempty) = masses(&psi);
    let mut phi = objective(&table, &psi, target_probs);
    for iter in 0..max_iter {
        let res = residual(&g);
        if res <= tol && nonempty {
            return Ok(DualSolverReport { psi, iterations: iter, residual: res });
        }
        let last = psi[k - 1];
        let mut cand: Vec<T> =
            psi.iter().zip(target_probs).zip(&g).map(|((&p, &t), &gj)| p + eta * (t - gj)).collect();
        let shift = cand[k - 1];
        cand.iter_mut().for_each(|p| *p = *p - shift);
        debug_assert!(last == T::zero());
        let cand_phi = objective(&table, &cand, target_probs);
        if cand_phi >= phi {
            psi = cand;
            phi = cand_phi;
            (g, nonempty) = masses(&psi);
        } else {
            eta = eta * lit(0.5);
        }
    }
    Err(Error::NotConverged { iters: max_iter, residual: residual(&g).to_f64().unwrap() })
}
