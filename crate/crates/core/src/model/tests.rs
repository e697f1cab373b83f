use super::*;
use crate::bessel::bessel_ratio;
use crate::sphere::geodesic_distance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::PI;

fn e(i: usize) -> UnitVector<f64> {
    UnitVector::basis(3, i)
}

fn state(atoms: Vec<UnitVector<f64>>, psi: Vec<f64>, r: RotationMatrix<f64>, kappa: f64) -> ModelState<f64> {
    ModelState::new(TargetMeasure::new(atoms, psi).unwrap(), r, kappa).unwrap()
}

#[test]
fn map_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let single = state(vec![e(2)], vec![0.0], RotationMatrix::identity(3), 1.0);
    for _ in 0..100 {
        let x = sample_uniform_sphere(2, &mut rng);
        assert_eq!(regression_map_eval(&single, &x), e(2));
    }
    let quarter = RotationMatrix::plane(3, 0, 1, PI / 2.0);
    let anti = state(vec![e(0), e(0).antipode()], vec![0.0, 0.0], quarter, 1.0);
    let y = regression_map_eval(&anti, &e(0));
    assert!((y.dot(&e(1)) - 1.0).abs() < 1e-15);
}

#[test]
fn likelihood_examples() {
    let s = state(vec![e(0)], vec![0.0], RotationMatrix::identity(3), 1.0);
    let d = Dataset::new(vec![(e(2), e(0))]).unwrap();
    let ll = log_likelihood(&s, &d);
    assert!((ll - (1f64.exp() / (4.0 * PI * 1f64.sinh())).ln()).abs() < 1e-14);
    assert!((ll.exp() - 0.18407).abs() < 1e-5);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let truth: ModelState<f64> = sample_prior_dual(&PriorConfig::default(), &ReferenceCloud::sample(2, 2000, 3), &mut rng).unwrap();
    let data = simulate_dataset(&truth, 50, &mut rng);
    let twice = data.concat(&data).unwrap();
    let (l2, l1) = (log_likelihood(&truth, &twice), log_likelihood(&truth, &data));
    assert!((l2 - 2.0 * l1).abs() < 1e-10 * l1.abs().max(1.0));
    assert_eq!(log_likelihood(&truth, &Dataset::empty()), 0.0);
}

#[test]
fn likelihood_invariant_under_joint_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cloud = ReferenceCloud::sample(2, 2000, 5);
    let truth: ModelState<f64> = sample_prior_dual(&PriorConfig::default(), &cloud, &mut rng).unwrap();
    let data = simulate_dataset(&truth, 100, &mut rng);
    let q: RotationMatrix<f64> = sample_haar_rotation(2, &mut rng);
    let rotated = Dataset::new(data.pairs().iter().map(|(x, y)| (x.clone(), q.apply(y))).collect()).unwrap();
    let mut turned = truth.clone();
    turned.rotation = q.compose(&truth.rotation);
    let a = log_likelihood(&truth, &data);
    let b = log_likelihood(&turned, &rotated);
    assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
}

#[test]
fn likelihood_depends_only_on_the_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cloud = ReferenceCloud::sample(2, 2000, 7);
    let truth: ModelState<f64> = sample_prior_dual(&PriorConfig::default(), &cloud, &mut rng).unwrap();
    let data = simulate_dataset(&truth, 200, &mut rng);
    let probes: Vec<UnitVector<f64>> = (0..1000).map(|_| sample_uniform_sphere(2, &mut rng)).collect();

    // Gauge-shifted potentials give the same map.
    let m = truth.measure().unwrap();
    let (lo, hi) = m.psi_range();
    let c = -0.5 * (lo + hi);
    let shifted = ModelState::new(m.shifted(c), truth.rotation.clone(), truth.kappa).unwrap();
    // One atom, with the rotation absorbed: R z = (R Q)(Qᵀ z).
    let q: RotationMatrix<f64> = sample_haar_rotation(2, &mut rng);
    let z = m.atoms()[0].clone();
    let one_a = state(vec![z.clone()], vec![0.0], truth.rotation.clone(), truth.kappa);
    let one_b = state(vec![q.inverse().apply(&z)], vec![0.0], truth.rotation.compose(&q), truth.kappa);

    for (a, b) in [(&truth, &shifted), (&one_a, &one_b)] {
        for x in &probes {
            let (fa, fb) = (regression_map_eval(a, x), regression_map_eval(b, x));
            assert!(geodesic_distance(&fa, &fb).unwrap() < 1e-7);
        }
        let (la, lb) = (log_likelihood(a, &data), log_likelihood(b, &data));
        assert!((la - lb).abs() < 1e-8 * la.abs().max(1.0), "{la} vs {lb}");
    }
}

#[test]
fn true_state_beats_random_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cloud = ReferenceCloud::sample(2, 2000, 9);
    let mut wins = 0;
    for _ in 0..100 {
        let mut truth: ModelState<f64> = sample_prior_dual(&PriorConfig::default(), &cloud, &mut rng).unwrap();
        truth.kappa = 100.0;
        let data = simulate_dataset(&truth, 200, &mut rng);
        let mut other = truth.clone();
        other.rotation = sample_haar_rotation(2, &mut rng);
        wins += (log_likelihood(&truth, &data) > log_likelihood(&other, &data)) as usize;
    }
    assert!(wins >= 99, "{wins}");
}

#[test]
fn single_atom_prior_draw_needs_one_attempt() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cloud = ReferenceCloud::sample(2, 1000, 11);
    for _ in 0..50 {
        let (_, attempts) = sample_dual_measure::<f64, _>(1, 2, &cloud, 10, &mut rng).unwrap();
        assert_eq!(attempts, 1);
    }
}

#[test]
fn rejection_budget_is_enforced() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cloud = ReferenceCloud::sample(2, 1000, 13);
    let r = sample_dual_measure::<f64, _>(40, 2, &cloud, 3, &mut rng);
    assert!(matches!(r, Err(Error::RejectionBudgetExceeded(3))));
}

#[test]
fn prior_k_marginal_matches_truncated_poisson_times_acceptance() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let cloud = ReferenceCloud::sample(2, 2000, 15);
    let config = PriorConfig { lambda: 3.0, cloud_size: 2000, ..PriorConfig::default() };
    let draws = 1000;
    let mut counts = [0usize; 5];
    for _ in 0..draws {
        let s: ModelState<f64> = sample_prior_dual(&config, &cloud, &mut rng).unwrap();
        let m = s.measure().unwrap();
        let (lo, hi) = m.psi_range();
        assert!(hi - lo <= PI * PI / 2.0 && lo >= -PI * PI / 2.0 && hi <= PI * PI / 2.0);
        counts[(s.k() - 1).min(4)] += 1;
    }
    // Oracle: per-k acceptance rates from independent fixed-k attempts.
    let b = PI * PI / 2.0;
    let accept = |k: usize, rng: &mut ChaCha8Rng| -> f64 {
        let trials = 4000;
        let ok = (0..trials).filter(|_| try_dual_measure::<f64, _>(k, 2, b, &cloud, rng).is_some()).count();
        ok as f64 / trials as f64
    };
    let lam: f64 = 3.0;
    let mut w = vec![0.0; 5];
    for k in 1..=12usize {
        let pk = lam.powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
        w[(k - 1).min(4)] += pk * accept(k, &mut rng);
    }
    let total: f64 = w.iter().sum();
    let mut chi2 = 0.0;
    for (c, wk) in counts.iter().zip(&w) {
        let expected = draws as f64 * wk / total;
        chi2 += (*c as f64 - expected).powi(2) / expected;
    }
    let crit = ChiSquared::new(4.0).unwrap().inverse_cdf(0.99);
    assert!(chi2 < crit, "chi2 = {chi2}, counts = {counts:?}, weights = {w:?}");
}

#[test]
fn direct_prior_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let cloud = ReferenceCloud::sample(2, 100_000, 17);
    let fresh = ReferenceCloud::sample(2, 100_000, 18);
    let config = PriorConfig::default();
    let (single, w) = sample_prior_direct(&config, 1, 0.5, &cloud, 1e-3, 1000, &mut rng).unwrap();
    assert_eq!(single.k(), 1);
    assert_eq!(w, vec![1.0]);
    let tol = 2e-3;
    for _ in 0..3 {
        let (s, w) = sample_prior_direct(&config, 5, 0.5, &cloud, tol, 20_000, &mut rng).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let masses = crate::ot::cell_mass_estimate(s.measure().unwrap(), &fresh);
        for (g, t) in masses.iter().zip(&w) {
            let se = (t * (1.0 - t) / 1e5).sqrt();
            assert!((g - t).abs() < 4.0 * (tol + se), "{g} vs {t}");
        }
    }
    assert!(sample_prior_direct(&config, 3, 1.5, &cloud, tol, 10, &mut rng).is_err());
}

#[test]
fn simulation_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let cloud = ReferenceCloud::sample(2, 2000, 20);
    let mut s: ModelState<f64> = sample_prior_dual(&PriorConfig::default(), &cloud, &mut rng).unwrap();
    s.kappa = 1e6;
    let d = simulate_dataset(&s, 500, &mut rng);
    assert_eq!(d.len(), 500);
    for (x, y) in d.pairs() {
        assert!(x.is_unit() && y.is_unit());
        assert!(geodesic_distance(y, &regression_map_eval(&s, x)).unwrap() < 0.01);
    }

    let kappa = 5.0;
    let one = state(vec![e(1)], vec![0.0], RotationMatrix::identity(3), kappa);
    let n = 1000;
    let d = simulate_dataset(&one, n, &mut rng);
    let mut mean = [0.0f64; 3];
    for (_, y) in d.pairs() {
        mean.iter_mut().zip(y.as_slice()).for_each(|(m, c)| *m += c / n as f64);
    }
    let a: f64 = bessel_ratio(3, kappa).unwrap();
    // Per-coordinate variance is at most 1/n.
    let se = (1.0 / n as f64).sqrt();
    assert!((mean[1] - a).abs() < 4.0 * se && mean[0].abs() < 4.0 * se && mean[2].abs() < 4.0 * se);
}

#[test]
fn ztp_sampler_matches_pmf() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let config = PriorConfig::<f64> { lambda: 2.0, k_max: 6, ..PriorConfig::default() };
    let n = 50_000;
    let mut counts = [0usize; 6];
    for _ in 0..n {
        counts[config.sample_k(&mut rng) - 1] += 1;
    }
    let w: Vec<f64> = (1..=6).map(|k| config.log_prior_k(k).exp()).collect();
    let tot: f64 = w.iter().sum();
    for (c, wk) in counts.iter().zip(&w) {
        let p = wk / tot;
        assert!((*c as f64 / n as f64 - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }
    assert_eq!(config.log_prior_k(0), f64::NEG_INFINITY);
    assert_eq!(config.log_prior_k(7), f64::NEG_INFINITY);
}

#[test]
fn state_validation() {
    let m = TargetMeasure::new(vec![e(0)], vec![0.0]).unwrap();
    assert!(ModelState::new(m.clone(), RotationMatrix::identity(3), 0.0).is_err());
    assert!(ModelState::new(m.clone(), RotationMatrix::identity(4), 1.0).is_err());
    assert!(ModelState::new(m, RotationMatrix::identity(3), 1.0).is_ok());
    assert!(ModelState::rotation_only(RotationMatrix::<f64>::identity(3), 2.0).unwrap().k() == 0);
}
