use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{dot, norm, Matrix};
use crate::model::{log_likelihood, sample_initial_kappa, sample_prior_dual, Dataset, ModelState, PriorConfig};
use crate::ot::{solve_dual_potentials, CostTable, ReferenceCloud, TargetMeasure};
use crate::rotation::{procrustes_rotation, sample_haar_rotation, skew_exponential_step, skew_param_count, RotationMatrix};
use crate::scalar::{lit, Real};
use crate::sphere::UnitVector;

use super::smooth::{smooth_fit, SmoothFit};

/// Settings for the data-driven chain start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitConfig<T> {
    /// Largest number of clusters tried.
    pub k_max: usize,
    /// k-means restarts per cluster count.
    pub restarts: usize,
    /// Tolerance and iteration cap for fitting cluster masses.
    pub dual_tol: T,
    pub dual_max_iter: usize,
    /// Coordinate-ascent rounds per candidate.
    pub search_steps: usize,
    /// Gradient steps per temperature in the smoothed fit.
    pub smooth_steps: usize,
}

impl<T: Real> Default for InitConfig<T> {
    fn default() -> Self {
        Self { k_max: 10, restarts: 4, dual_tol: lit(2e-3), dual_max_iter: 3000, search_steps: 30, smooth_steps: 80 }
    }
}

struct Context<'a, T> {
    xs: Vec<UnitVector<T>>,
    xs_raw: Vec<Vec<T>>,
    ys: Vec<Vec<T>>,
    dim: usize,
    cloud: &'a ReferenceCloud<T>,
    init: &'a InitConfig<T>,
}

/// Chain start from the data. For each cluster count, responses (alone or
/// joined with Procrustes-rotated covariates) are clustered by spherical
/// k-means; the cluster means `c_j` serve as fitted values, `R` is the
/// Procrustes fit of covariate onto response centroids, and the atoms are
/// `Rᵀ c_j` with potentials that reproduce the cluster proportions. Each
/// candidate is refined by an annealed smooth fit and a feasible coordinate
/// ascent. `κ` comes from the mean resultant of the alignment and the
/// cluster count from BIC. Falls back to a prior draw without data.
pub fn initialize_from_data<T: Real, R: Rng + ?Sized>(
    data: &Dataset<T>,
    cloud: &ReferenceCloud<T>,
    prior: &PriorConfig<T>,
    init: &InitConfig<T>,
    rng: &mut R,
) -> Result<ModelState<T>> {
    if data.is_empty() {
        return sample_prior_dual(prior, cloud, rng);
    }
    let n = data.len();
    let dim = cloud.dim();
    let xs = data.covariates();
    let ctx = Context {
        xs_raw: xs.iter().map(|x| x.as_slice().to_vec()).collect(),
        xs,
        ys: data.pairs().iter().map(|(_, y)| y.as_slice().to_vec()).collect(),
        dim,
        cloud,
        init,
    };
    let mut h = Matrix::zeros(dim);
    for (x, y) in ctx.xs_raw.iter().zip(&ctx.ys) {
        for a in 0..dim {
            for b in 0..dim {
                h.set(a, b, h.get(a, b) + y[a] * x[b]);
            }
        }
    }
    let r0 = procrustes_rotation(&h);
    let joint: Vec<Vec<T>> =
        ctx.xs_raw.iter().zip(&ctx.ys).map(|(x, y)| r0.apply_slice(x).into_iter().chain(y.iter().copied()).collect()).collect();
    let mut best: Option<(f64, ModelState<T>)> = None;
    for k in 1..=init.k_max.min(prior.k_max).min(n) {
        for r in 0..init.restarts.max(1) {
            let labels = if r % 2 == 0 { spherical_kmeans(&joint, k, rng) } else { spherical_kmeans(&ctx.ys, k, rng) };
            let Some(state) = candidate(&ctx, &labels, k, rng) else { continue };
            let ll = log_likelihood(&state, data).to_f64().unwrap();
            let bic = ll - 0.5 * (k * dim) as f64 * (n as f64).ln();
            if best.as_ref().is_none_or(|(b, _)| bic > *b) {
                best = Some((bic, state));
            }
        }
    }
    match best {
        Some((_, s)) => Ok(s),
        None => sample_prior_dual(prior, cloud, rng),
    }
}

/// Chain start for the rotation-only model: the least-squares rotation
/// maximizing `Σ y_iᵀ R x_i`, with `κ` from the mean resultant of the
/// alignment. Without data, a Haar rotation and a `U(1, 200)` concentration.
pub fn initialize_rotation_only<T: Real, R: Rng + ?Sized>(data: &Dataset<T>, p: usize, rng: &mut R) -> Result<ModelState<T>> {
    if data.is_empty() {
        return ModelState::rotation_only(sample_haar_rotation(p, rng), sample_initial_kappa(rng));
    }
    let dim = data.dim().expect("nonempty");
    let mut h = Matrix::zeros(dim);
    for (x, y) in data.pairs() {
        for a in 0..dim {
            for b in 0..dim {
                h.set(a, b, h.get(a, b) + y.as_slice()[a] * x.as_slice()[b]);
            }
        }
    }
    let rotation = procrustes_rotation(&h);
    let total: f64 = data.pairs().iter().map(|(x, y)| dot(&rotation.apply_slice(x.as_slice()), y.as_slice()).to_f64().unwrap()).sum();
    let kappa = concentration_from_resultant(total / data.len() as f64, dim);
    ModelState::rotation_only(rotation, lit(kappa))
}

fn normalized_sum<T: Real>(vs: &[Vec<T>], labels: &[usize], j: usize, dim: usize) -> Option<Vec<T>> {
    let mut s = vec![T::zero(); dim];
    for (v, _) in vs.iter().zip(labels).filter(|(_, &l)| l == j) {
        s.iter_mut().zip(v).for_each(|(a, &b)| *a = *a + b);
    }
    let nv = norm(&s);
    (nv > lit(1e-12)).then(|| s.into_iter().map(|a| a / nv).collect())
}

fn atoms_for<T: Real>(r: &RotationMatrix<T>, centers: &[Vec<T>]) -> Option<Vec<UnitVector<T>>> {
    centers.iter().map(|c| UnitVector::new(r.apply_inverse_slice(c))).collect::<Result<_>>().ok()
}

fn potentials<T: Real>(atoms: &[UnitVector<T>], weights: &[T], cloud: &ReferenceCloud<T>, tol: T, max_iter: usize) -> Vec<T> {
    match solve_dual_potentials(atoms, weights, cloud, tol, max_iter) {
        Ok(r) => r.psi,
        Err(_) => vec![T::zero(); atoms.len()],
    }
}

fn candidate<T: Real, R: Rng + ?Sized>(ctx: &Context<'_, T>, labels: &[usize], k: usize, rng: &mut R) -> Option<ModelState<T>> {
    let (n, dim) = (ctx.ys.len(), ctx.dim);
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    let mut centers = Vec::with_capacity(k);
    let mut h = Matrix::zeros(dim);
    for (j, &cj) in counts.iter().enumerate() {
        let c = normalized_sum(&ctx.ys, labels, j, dim)?;
        let m = normalized_sum(&ctx.xs_raw, labels, j, dim).unwrap_or_else(|| c.clone());
        let w: T = lit(cj as f64);
        for a in 0..dim {
            for b in 0..dim {
                h.set(a, b, h.get(a, b) + w * c[a] * m[b]);
            }
        }
        centers.push(c);
    }
    let weights: Vec<T> = counts.iter().map(|&c| lit(c as f64 / n as f64)).collect();
    let rotation = procrustes_rotation(&h);
    let atoms = atoms_for(&rotation, &centers)?;
    let psi = potentials(&atoms, &weights, ctx.cloud, ctx.init.dual_tol, ctx.init.dual_max_iter);
    let to64 = |v: &[T]| v.iter().map(|a| a.to_f64().unwrap()).collect::<Vec<f64>>();
    let smooth = smooth_fit(
        &ctx.xs_raw.iter().map(|v| to64(v)).collect::<Vec<_>>(),
        &ctx.ys.iter().map(|v| to64(v)).collect::<Vec<_>>(),
        SmoothFit { rotation: to64(rotation.entries()), centers: centers.iter().map(|c| to64(c)).collect(), psi: to64(&psi) },
        ctx.init.smooth_steps,
    );
    let from64 = |v: &[f64]| v.iter().map(|&a| lit(a)).collect::<Vec<T>>();
    let rotation = RotationMatrix::from_row_major(dim, from64(&smooth.rotation)).ok()?;
    let (centers, psi) = prune(ctx, &rotation, smooth.centers.iter().map(|c| from64(c)).collect(), from64(&smooth.psi))?;
    let fit = polish(ctx, Fit::new(ctx, rotation, centers, psi)?, rng);
    let kappa = concentration_from_resultant(fit.score / n as f64, dim);
    let measure = TargetMeasure::new(fit.atoms, fit.psi).ok()?;
    ModelState::new(measure, fit.rotation, lit(kappa)).ok()
}

/// Drops atoms whose cells are empty on the cloud; removing atoms never
/// empties another cell.
fn prune<T: Real>(
    ctx: &Context<'_, T>,
    rotation: &RotationMatrix<T>,
    centers: Vec<Vec<T>>,
    psi: Vec<T>,
) -> Option<(Vec<Vec<T>>, Vec<T>)> {
    let atoms = atoms_for(rotation, &centers)?;
    let counts = CostTable::new(ctx.cloud.points(), &atoms).counts(&psi);
    let keep: Vec<usize> = (0..centers.len()).filter(|&j| counts[j] > 0).collect();
    let centers: Vec<Vec<T>> = keep.iter().map(|&j| centers[j].clone()).collect();
    let mut psi: Vec<T> = keep.iter().map(|&j| psi[j]).collect();
    let mean = psi.iter().fold(T::zero(), |s, &p| s + p) / lit(psi.len() as f64);
    psi.iter_mut().for_each(|p| *p = *p - mean);
    Some((centers, psi))
}

/// A point estimate: fitted values `c_j`, atoms `Rᵀ c_j`, potentials, and
/// the alignment score `Σ_i y_iᵀ c_{cell(x_i)}`.
struct Fit<T> {
    rotation: RotationMatrix<T>,
    centers: Vec<Vec<T>>,
    atoms: Vec<UnitVector<T>>,
    psi: Vec<T>,
    cloud_table: CostTable<T>,
    score: f64,
}

impl<T: Real> Fit<T> {
    /// `None` unless the potentials are feasible on the cloud.
    fn new(ctx: &Context<'_, T>, rotation: RotationMatrix<T>, centers: Vec<Vec<T>>, psi: Vec<T>) -> Option<Self> {
        let atoms = atoms_for(&rotation, &centers)?;
        let cloud_table = CostTable::new(ctx.cloud.points(), &atoms);
        if !cloud_table.is_feasible(&psi) {
            return None;
        }
        let score = alignment(ctx, &centers, &atoms, &psi);
        Some(Self { rotation, centers, atoms, psi, cloud_table, score })
    }
}

/// `Σ_i y_iᵀ c_{cell(x_i)}` for the Laguerre cells of `(atoms, psi)`.
fn alignment<T: Real>(ctx: &Context<'_, T>, centers: &[Vec<T>], atoms: &[UnitVector<T>], psi: &[T]) -> f64 {
    alignment_with(ctx, centers, &CostTable::new(&ctx.xs, atoms).assign(psi))
}

fn alignment_with<T: Real>(ctx: &Context<'_, T>, centers: &[Vec<T>], cells: &[usize]) -> f64 {
    cells
        .iter()
        .zip(&ctx.ys)
        .map(|(&a, y)| centers[a].iter().zip(y).fold(0.0, |s, (&p, &q)| s + (p * q).to_f64().unwrap()))
        .sum()
}

/// Coordinate ascent on the alignment score, which for any fixed `κ` is
/// the likelihood up to constants. Each round sweeps the potentials over a
/// grid of their conditional feasible intervals, moves the fitted values to
/// the mean responses of their cells, and tries random rotation steps of
/// shrinking size. Every accepted change keeps the measure feasible.
fn polish<T: Real, R: Rng + ?Sized>(ctx: &Context<'_, T>, mut fit: Fit<T>, rng: &mut R) -> Fit<T> {
    const GRID: usize = 24;
    let k = fit.centers.len();
    let rounds = ctx.init.search_steps;
    for round in 0..rounds {
        let step = 0.3 * (0.01f64 / 0.3).powf(round as f64 / (rounds.max(2) - 1) as f64);
        if k > 1 {
            let data_table = CostTable::new(&ctx.xs, &fit.atoms);
            for j in 0..k {
                let Ok(iv) = fit.cloud_table.conditional_interval(&fit.psi, j) else { continue };
                let (lo, hi) = (iv.lower.to_f64().unwrap(), iv.upper.to_f64().unwrap());
                let mut psi = fit.psi.clone();
                for g in 0..GRID {
                    psi[j] = lit(lo + (hi - lo) * (g as f64 + 0.5) / GRID as f64);
                    let sc = alignment_with(ctx, &fit.centers, &data_table.assign(&psi));
                    if sc > fit.score {
                        fit.score = sc;
                        fit.psi[j] = psi[j];
                    }
                }
            }
            let cells = data_table.assign(&fit.psi);
            let means: Vec<Vec<T>> = (0..k)
                .map(|j| normalized_sum(&ctx.ys, &cells, j, ctx.dim).unwrap_or_else(|| fit.centers[j].clone()))
                .collect();
            let rotation = fit.rotation.clone();
            try_replace(ctx, &mut fit, rotation, means);
        } else {
            let means = vec![normalized_sum(&ctx.ys, &vec![0; ctx.ys.len()], 0, ctx.dim).unwrap_or_else(|| fit.centers[0].clone())];
            let rotation = fit.rotation.clone();
            try_replace(ctx, &mut fit, rotation, means);
            break;
        }
        for _ in 0..8 {
            let eps: Vec<T> = (0..skew_param_count(fit.rotation.dim()))
                .map(|_| lit(step * rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let rotation = skew_exponential_step(&fit.rotation, &eps).orthonormalized();
            let centers = fit.centers.clone();
            try_replace(ctx, &mut fit, rotation, centers);
        }
    }
    let mean = fit.psi.iter().fold(0.0, |s, p| s + p.to_f64().unwrap()) / k as f64;
    fit.psi.iter_mut().for_each(|p| *p = *p - lit(mean));
    fit
}

fn try_replace<T: Real>(ctx: &Context<'_, T>, fit: &mut Fit<T>, rotation: RotationMatrix<T>, centers: Vec<Vec<T>>) {
    let Some(atoms) = atoms_for(&rotation, &centers) else { return };
    if alignment(ctx, &centers, &atoms, &fit.psi) <= fit.score {
        return;
    }
    if let Some(next) = Fit::new(ctx, rotation, centers, fit.psi.clone()) {
        *fit = next;
    }
}

/// Approximate inverse of the mean resultant length (Banerjee et al.),
/// clamped to `[0.1, 1e6]`.
fn concentration_from_resultant(rbar: f64, dim: usize) -> f64 {
    if rbar <= 0.0 {
        return 0.1;
    }
    let r = rbar.min(1.0 - 1e-12);
    (r * (dim as f64 - r * r) / (1.0 - r * r)).clamp(0.1, 1e6)
}

/// Spherical k-means with k-means++ seeding; returns the label of every
/// point. Clusters that empty out are reseeded at the worst-fit point.
fn spherical_kmeans<T: Real, R: Rng + ?Sized>(points: &[Vec<T>], k: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(0.0, |s, (&p, &q)| s + (p * q).to_f64().unwrap());
    let mut centers: Vec<Vec<T>> = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| 1.0 - dot(p, c)).fold(f64::INFINITY, f64::min).max(0.0))
            .collect();
        let total: f64 = d.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            d.iter().position(|&w| {
                u -= w;
                u <= 0.0
            })
            .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[idx].clone());
    }
    let dim = points[0].len();
    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (p, l) in points.iter().zip(labels.iter_mut()) {
            let best = (0..k)
                .max_by(|&a, &b| dot(p, &centers[a]).partial_cmp(&dot(p, &centers[b])).unwrap())
                .unwrap();
            if best != *l {
                *l = best;
                changed = true;
            }
        }
        for j in 0..k {
            match normalized_sum(points, &labels, j, dim) {
                Some(m) => centers[j] = m,
                None => {
                    let worst = (0..n)
                        .min_by(|&a, &b| {
                            dot(&points[a], &centers[labels[a]]).partial_cmp(&dot(&points[b], &centers[labels[b]])).unwrap()
                        })
                        .unwrap();
                    centers[j] = points[worst].clone();
                    labels[worst] = j;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    labels
}
