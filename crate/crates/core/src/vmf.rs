//! von Mises–Fisher distribution on `S^p`.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::bessel::{ln_bessel_i, ln_gamma};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::sphere::UnitVector;

#[derive(Clone, Debug, PartialEq)]
pub struct VmfParams<T> {
    mean_direction: UnitVector<T>,
    kappa: T,
}

impl<T: Real> VmfParams<T> {
    pub fn new(mean_direction: UnitVector<T>, kappa: T) -> Result<Self> {
        if !(kappa > T::zero()) || !kappa.is_finite() {
            return Err(Error::NonPositiveConcentration(kappa.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { mean_direction, kappa })
    }

    pub fn mean_direction(&self) -> &UnitVector<T> {
        &self.mean_direction
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }
}

/// `ln C_m(κ)` with `C_m(κ) = κ^{m/2−1} / ((2π)^{m/2} I_{m/2−1}(κ))`.
pub fn vmf_log_normalizer<T: Real>(m: usize, kappa: T) -> Result<T> {
    let k = kappa.to_f64().unwrap_or(f64::NAN);
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::NonPositiveConcentration(k));
    }
    Ok(lit(log_normalizer_f64(m, k)))
}

pub(crate) fn log_normalizer_f64(m: usize, k: f64) -> f64 {
    use std::f64::consts::PI;
    match m {
        3 => {
            // κ / (4π sinh κ)
            let ln_sinh = if k < 1.0 {
                k.sinh().ln()
            } else {
                k - std::f64::consts::LN_2 + (-(-2.0 * k).exp()).ln_1p()
            };
            k.ln() - (4.0 * PI).ln() - ln_sinh
        }
        _ => {
            let nu = 0.5 * m as f64 - 1.0;
            if k < 1e-8 {
                // Uniform limit: 1 / |S^{m−1}| = Γ(m/2) / (2 π^{m/2}).
                return ln_gamma(0.5 * m as f64) - std::f64::consts::LN_2 - 0.5 * m as f64 * PI.ln();
            }
            nu * k.ln() - 0.5 * m as f64 * (2.0 * PI).ln() - ln_bessel_i(nu, k)
        }
    }
}

/// Log density of `y` under `vMF(μ, κ)` with respect to surface measure.
pub fn vmf_log_density<T: Real>(y: &UnitVector<T>, params: &VmfParams<T>) -> Result<T> {
    let mu = &params.mean_direction;
    if y.dim() != mu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: y.dim() });
    }
    Ok(vmf_log_normalizer(mu.dim(), params.kappa)? + params.kappa * mu.dot(y))
}

/// Wood's rejection sampler: draw the cosine `w = μᵀy` from its marginal via
/// a Beta envelope, then a uniform tangent direction.
pub fn vmf_sample<T: Real, R: Rng + ?Sized>(params: &VmfParams<T>, rng: &mut R) -> UnitVector<T> {
    let mu: Vec<f64> = params.mean_direction.as_slice().iter().map(|c| c.to_f64().unwrap()).collect();
    let kappa = params.kappa.to_f64().unwrap();
    let coords = sample_f64(&mu, kappa, rng);
    UnitVector::new(coords.into_iter().map(lit).collect()).expect("vMF draw is on the sphere")
}

pub(crate) fn sample_f64<R: Rng + ?Sized>(mu: &[f64], kappa: f64, rng: &mut R) -> Vec<f64> {
    let m = mu.len();
    let d1 = (m - 1) as f64;
    // b = (−2κ + √(4κ² + (m−1)²)) / (m−1), rationalized.
    let b = d1 / (2.0 * kappa + (4.0 * kappa * kappa + d1 * d1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + d1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(0.5 * d1, 0.5 * d1).expect("valid beta shape");
    let (w, one_minus_w) = loop {
        let z: f64 = beta.sample(rng);
        let den = 1.0 - (1.0 - b) * z;
        let omw = 2.0 * b * z / den;
        let w = 1.0 - omw;
        let u: f64 = rng.random();
        if kappa * w + d1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            break (w, omw);
        }
    };
    let sin = (one_minus_w * (2.0 - one_minus_w)).max(0.0).sqrt();
    // Uniform unit direction orthogonal to μ.
    let v = loop {
        let mut g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let proj: f64 = g.iter().zip(mu).map(|(a, b)| a * b).sum();
        g.iter_mut().zip(mu).for_each(|(a, b)| *a -= proj * b);
        let n = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-10 {
            g.iter_mut().for_each(|a| *a /= n);
            break g;
        }
    };
    mu.iter().zip(&v).map(|(&a, &b)| w * a + sin * b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_ratio;
    use crate::sphere::{geodesic_distance, sample_uniform_sphere};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn e1() -> UnitVector<f64> {
        UnitVector::basis(3, 0)
    }

    #[test]
    fn density_at_mean_on_two_sphere() {
        let p = VmfParams::new(e1(), 1.0).unwrap();
        let got = vmf_log_density(&e1(), &p).unwrap();
        let want = (1f64.exp() / (4.0 * PI * 1f64.sinh())).ln();
        assert!((got - want).abs() < 1e-14);
        assert!((got.exp() - 0.18407).abs() < 1e-5);
        let anti = vmf_log_density(&e1().antipode(), &p).unwrap();
        assert!((got - anti - 2.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_limit() {
        let p = VmfParams::new(e1(), 1e-9).unwrap();
        let got = vmf_log_density(&UnitVector::basis(3, 2), &p).unwrap();
        assert!((got - (1.0 / (4.0 * PI)).ln()).abs() < 1e-8);
        assert!((got + 2.5310).abs() < 1e-4);
    }

    #[test]
    fn general_normalizer_agrees_with_two_sphere_closed_form() {
        // The generic Bessel route evaluated at m = 3.
        for &k in &[0.01f64, 1.0, 30.0, 60.0, 500.0] {
            let nu = 0.5;
            let generic = nu * k.ln() - 1.5 * (2.0 * PI).ln() - ln_bessel_i(nu, k);
            assert!((generic - log_normalizer_f64(3, k)).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn circle_normalizer() {
        // m = 2: 1 / (2π I₀(κ)); I₀(1) = 1.2660658777520084
        let got = log_normalizer_f64(2, 1.0);
        assert!((got - (1.0 / (2.0 * PI * 1.266_065_877_752_008_4)).ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_kappa() {
        assert!(VmfParams::new(e1(), 0.0).is_err());
        assert!(vmf_log_normalizer(3, -2.0f64).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &kappa in &[0.5f64, 5.0, 50.0] {
            let p = VmfParams::new(e1(), kappa).unwrap();
            let n = 200_000;
            let area = 4.0 * PI;
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let y = sample_uniform_sphere(2, &mut rng);
                let f = vmf_log_density(&y, &p).unwrap().exp() * area;
                s += f;
                s2 += f * f;
            }
            let mean = s / n as f64;
            let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - 1.0).abs() < 3.0 * se, "kappa={kappa} mean={mean} se={se}");
        }
    }

    #[test]
    fn sampler_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = VmfParams::new(e1(), 100.0).unwrap();
        let mut mean = [0.0f64; 3];
        for _ in 0..10_000 {
            let y = vmf_sample(&p, &mut rng);
            assert!(y.is_unit());
            mean.iter_mut().zip(y.as_slice()).for_each(|(m, c)| *m += c);
        }
        let dir = UnitVector::new(mean.to_vec()).unwrap();
        assert!(geodesic_distance(&dir, &e1()).unwrap() < 0.05);
    }

    #[test]
    fn sampler_mean_resultant_matches_bessel_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for &(m, kappa) in &[(3usize, 2.0f64), (2, 3.0), (5, 10.0)] {
            let mut mu = vec![0.0; m];
            mu[m - 1] = 1.0;
            let p = VmfParams::new(UnitVector::new(mu).unwrap(), kappa).unwrap();
            let n = 100_000;
            let mut sum = vec![0.0; m];
            for _ in 0..n {
                let y = vmf_sample(&p, &mut rng);
                sum.iter_mut().zip(y.as_slice()).for_each(|(a, b)| *a += b);
            }
            let r = sum.iter().map(|a| a * a).sum::<f64>().sqrt() / n as f64;
            let a: f64 = bessel_ratio(m, kappa).unwrap();
            assert!((r - a).abs() < 0.01, "m={m} kappa={kappa}: {r} vs {a}");
        }
    }

    #[test]
    fn huge_concentration_stays_on_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = VmfParams::new(e1(), 1e6).unwrap();
        for _ in 0..1000 {
            let y = vmf_sample(&p, &mut rng);
            assert!(geodesic_distance(&y, &e1()).unwrap() < 0.01);
        }
    }
}
