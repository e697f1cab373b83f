use super::*;
use crate::model::{regression_map_eval, sample_dual_measure, sample_prior_dual, simulate_dataset, PriorConfig};
use crate::mcmc::{run_chain, SamplerConfig};
use crate::rotation::{sample_haar_rotation, RotationMatrix};
use crate::sphere::{exp_map, geodesic_distance, TangentVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn e(i: usize) -> UnitVector<f64> {
    UnitVector::basis(3, i)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_measure(k: usize, r: &mut ChaCha8Rng) -> (TargetMeasure<f64>, Vec<(UnitVector<f64>, f64)>) {
    let atoms: Vec<UnitVector<f64>> = (0..k).map(|_| sample_uniform_sphere(2, r)).collect();
    let raw: Vec<f64> = (0..k).map(|_| r.random::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    let w: Vec<(UnitVector<f64>, f64)> = atoms.iter().cloned().zip(raw.iter().map(|x| x / s)).collect();
    (TargetMeasure::new(atoms, vec![0.0; k]).unwrap(), w)
}

#[test]
fn map_distance_examples() {
    let mut r = rng(1);
    let f = |x: &UnitVector<f64>| x.clone();
    let anti = |x: &UnitVector<f64>| x.antipode();
    let zero = integrated_l2_distance(&f, &f, 2, 1000, &mut r);
    assert_eq!((zero.value, zero.std_error), (0.0, 0.0));
    let pi = integrated_l2_distance(&f, &anti, 2, 1000, &mut r);
    assert!((pi.value - PI).abs() < 1e-6 && pi.std_error < 1e-6);
    let c1 = |_: &UnitVector<f64>| e(0);
    let c2 = |_: &UnitVector<f64>| e(1);
    let half = integrated_l2_distance(&c1, &c2, 2, 100, &mut r);
    assert!((half.value - PI / 2.0).abs() < 1e-12);
    assert_eq!(half.n_points, 100);

    assert_eq!(dhat_distance(&f, &f, 2, 500, &mut r).value, 0.0);
    assert!((dhat_distance(&f, &anti, 2, 500, &mut r).value - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn dtilde_and_dhat_are_equivalent() {
    let mut r = rng(2);
    let cloud = ReferenceCloud::sample(2, 1000, 3);
    for _ in 0..10 {
        let a = sample_prior_dual(&PriorConfig::default(), &cloud, &mut r).unwrap();
        let b = sample_prior_dual(&PriorConfig::default(), &cloud, &mut r).unwrap();
        let pts: Vec<UnitVector<f64>> = (0..20_000).map(|_| sample_uniform_sphere(2, &mut r)).collect();
        let dt = integrated_l2_distance_on(&a, &b, &pts);
        let dh = dhat_distance_on(&a, &b, &pts);
        let (t2, h2) = (dt.value.powi(2), dh.value.powi(2));
        let (se_t2, se_h2) = (2.0 * dt.value * dt.std_error, 2.0 * dh.value * dh.std_error);
        assert!(2.0 * h2 <= t2 + 3.0 * (se_t2 + 2.0 * se_h2));
        assert!(t2 <= 6.0 * h2 + 3.0 * (se_t2 + 6.0 * se_h2));
    }
}

#[test]
fn dhat_is_rotation_invariant() {
    let mut r = rng(4);
    let cloud = ReferenceCloud::sample(2, 1000, 5);
    let a = sample_prior_dual(&PriorConfig::default(), &cloud, &mut r).unwrap();
    let mut b = sample_prior_dual(&PriorConfig::default(), &cloud, &mut r).unwrap();
    b.rotation = a.rotation.clone();
    let q: RotationMatrix<f64> = sample_haar_rotation(2, &mut r);
    let (mut qa, mut qb) = (a.clone(), b.clone());
    qa.rotation = q.compose(&a.rotation);
    qb.rotation = q.compose(&b.rotation);
    let pts: Vec<UnitVector<f64>> = (0..5000).map(|_| sample_uniform_sphere(2, &mut r)).collect();
    let d0 = dhat_distance_on(&a, &b, &pts).value;
    let d1 = dhat_distance_on(&qa, &qb, &pts).value;
    assert!((d0 - d1).abs() < 1e-9);
}

#[test]
fn w1_examples() {
    let mut r = rng(6);
    let (_, mu) = random_measure(6, &mut r);
    assert!(wasserstein1_discrete(&mu, &mu).unwrap().abs() < 1e-12);
    let d = wasserstein1_discrete(&[(e(0), 1.0)], &[(e(1), 1.0)]).unwrap();
    assert!((d - PI / 2.0).abs() < 1e-12);
    let a = [(e(0), 0.5), (e(1), 0.5)];
    let b = [(e(1), 0.5), (e(0), 0.5)];
    assert!(wasserstein1_discrete(&a, &b).unwrap().abs() < 1e-12);
    assert!(matches!(wasserstein1_discrete(&[(e(0), 0.7)], &[(e(1), 1.0)]), Err(Error::Weights(_))));
    assert!(wasserstein1_discrete(&[(e(0), -0.5), (e(1), 1.5)], &[(e(1), 1.0)]).is_err());
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn w1_matches_assignment_brute_force() {
    let mut r = rng(7);
    for n in 1..=6 {
        let xs: Vec<UnitVector<f64>> = (0..n).map(|_| sample_uniform_sphere(2, &mut r)).collect();
        let ys: Vec<UnitVector<f64>> = (0..n).map(|_| sample_uniform_sphere(2, &mut r)).collect();
        let w = 1.0 / n as f64;
        let best = permutations(n)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| geodesic_distance(&xs[i], &ys[j]).unwrap() * w).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let mu: Vec<_> = xs.iter().cloned().map(|x| (x, w)).collect();
        let nu: Vec<_> = ys.iter().cloned().map(|y| (y, w)).collect();
        let got = wasserstein1_discrete(&mu, &nu).unwrap();
        assert!((got - best).abs() < 1e-12, "n={n}: {got} vs {best}");
    }
}

#[test]
fn w1_metric_axioms_and_sandwich() {
    let mut r = rng(8);
    for _ in 0..20 {
        let ka = r.random_range(1..8);
        let kb = r.random_range(1..8);
        let kc = r.random_range(1..8);
        let (_, a) = random_measure(ka, &mut r);
        let (_, b) = random_measure(kb, &mut r);
        let (_, c) = random_measure(kc, &mut r);
        let ab = wasserstein1_discrete(&a, &b).unwrap();
        assert_eq!(ab, wasserstein1_discrete(&b, &a).unwrap());
        let bc = wasserstein1_discrete(&b, &c).unwrap();
        let ac = wasserstein1_discrete(&a, &c).unwrap();
        assert!(ac <= ab + bc + 1e-9);
        let indep: f64 = a
            .iter()
            .flat_map(|(x, p)| b.iter().map(move |(y, q)| p * q * geodesic_distance(x, y).unwrap()))
            .sum();
        assert!(ab <= indep + 1e-12);
        // Kantorovich–Rubinstein: any 1-Lipschitz potential bounds W₁ below.
        let z0 = sample_uniform_sphere(2, &mut r);
        let g = |m: &[(UnitVector<f64>, f64)]| m.iter().map(|(x, w)| w * geodesic_distance(x, &z0).unwrap()).sum::<f64>();
        assert!(ab >= (g(&a) - g(&b)).abs() - 1e-12);
    }
}

#[test]
fn w1_handles_the_largest_supported_size() {
    let mut r = rng(9);
    let (_, a) = random_measure(200, &mut r);
    let (_, b) = random_measure(200, &mut r);
    let d = wasserstein1_discrete(&a, &b).unwrap();
    assert!(d > 0.0 && d < PI);
}

fn perturbed(m: &TargetMeasure<f64>, delta: f64, r: &mut ChaCha8Rng) -> TargetMeasure<f64> {
    let z = &m.atoms()[0];
    let v = sample_uniform_sphere::<f64, _>(2, r);
    let d = v.dot(z);
    let t: Vec<f64> = v.as_slice().iter().zip(z.as_slice()).map(|(a, b)| a - d * b).collect();
    let n = crate::linalg::norm(&t);
    let t: Vec<f64> = t.iter().map(|c| c * delta / n).collect();
    let moved = exp_map(&TangentVector::new(z.clone(), t).unwrap());
    let mut atoms = m.atoms().to_vec();
    atoms[0] = moved;
    TargetMeasure::new(atoms, m.psi().to_vec()).unwrap()
}

#[test]
fn stability_probe_examples() {
    let mut r = rng(10);
    let cloud = ReferenceCloud::sample(2, 50_000, 11);
    let (m, _) = sample_dual_measure::<f64, _>(5, 2, &cloud, 10_000, &mut r).unwrap();
    assert_eq!(stability_probe(&m, &m, &cloud).unwrap(), (0.0, 0.0));
    let small = perturbed(&m, 1e-3, &mut r);
    let (d, w) = stability_probe(&m, &small, &cloud).unwrap();
    assert!(d <= 0.2 && w < 0.05, "{d} {w}");
    let mut last = (0.0, 0.0);
    for delta in [1e-3, 1e-2, 1e-1] {
        let (d, w) = stability_probe(&m, &perturbed(&m, delta, &mut rng(12)), &cloud).unwrap();
        assert!(d >= last.0 && w >= last.1, "{delta}: {d} {w}");
        last = (d, w);
    }
}

#[test]
fn held_out_examples() {
    let s = ModelState::new(TargetMeasure::new(vec![e(0)], vec![0.0]).unwrap(), RotationMatrix::identity(3), 1.0).unwrap();
    let test = Dataset::new(vec![(e(2), regression_map_eval(&s, &e(2)))]).unwrap();
    let (m, se) = held_out_log_likelihood_states(std::slice::from_ref(&s), &test).unwrap();
    assert!((m.exp() - 0.18407).abs() < 1e-5);
    assert_eq!(se, 0.0);

    let mut r = rng(13);
    let cloud = ReferenceCloud::sample(2, 1000, 14);
    let truth = sample_prior_dual(&PriorConfig::default(), &cloud, &mut r).unwrap();
    let data = simulate_dataset(&truth, 100, &mut r);
    let test = simulate_dataset(&truth, 50, &mut r);
    let c = SamplerConfig { iters: 300, burn_in: 100, thin: 10, prior: PriorConfig { cloud_size: 1000, ..PriorConfig::default() }, ..SamplerConfig::default() };
    let trace = run_chain(truth, &c, &cloud, &data, &mut r).unwrap();
    let (a, _): (f64, f64) = held_out_log_likelihood(&trace, &test).unwrap();
    let (b, _) = held_out_log_likelihood(&trace, &test.concat(&test).unwrap()).unwrap();
    assert!((a - b).abs() < 1e-12);
    assert!(held_out_log_likelihood_states(&[], &test).is_err());
}
