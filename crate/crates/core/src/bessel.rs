//! Modified Bessel functions of the first kind, as needed by the vMF
//! normalizer and mean resultant length. Internally `f64`.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Crossover between the power series and the large-argument methods.
const SERIES_LIMIT: f64 = 50.0;

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `Σ_k (x²/4)^k / (k! (ν+1)_k)`, the hypergeometric part of `I_ν`.
fn series_sum(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (nu + k));
        sum += term;
        if term < sum * 1e-17 || k > 10_000.0 {
            return sum;
        }
    }
}

/// `ln I_ν(x)` for `ν ≥ 0`, `x > 0`.
pub fn ln_bessel_i(nu: f64, x: f64) -> f64 {
    debug_assert!(nu >= 0.0 && x > 0.0);
    if x <= SERIES_LIMIT.max(nu * nu) {
        return ln_bessel_i_series(nu, x);
    }
    // Hankel expansion: I_ν(x) ~ eˣ/√(2πx) Σ (−1)^k a_k(ν) / x^k.
    let mu = 4.0 * nu * nu;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
}

fn ln_bessel_i_series(nu: f64, x: f64) -> f64 {
    // Terms can overflow for large x; sum in log space around the peak.
    let half = 0.5 * x;
    if x < 600.0 {
        return nu * half.ln() - ln_gamma(nu + 1.0) + series_sum(nu, x).ln();
    }
    let ln_q = 2.0 * half.ln();
    let ln_term = |k: f64| k * ln_q - ln_gamma(k + 1.0) - ln_gamma(k + nu + 1.0);
    // Peak where q / (k (ν + k)) ≈ 1.
    let q = half * half;
    let kstar = (0.5 * (-nu + (nu * nu + 4.0 * q).sqrt())).floor().max(0.0);
    let peak = ln_term(kstar);
    let mut sum = 0.0;
    let mut k = kstar;
    loop {
        let t = (ln_term(k) - peak).exp();
        sum += t;
        if t < 1e-18 {
            break;
        }
        k += 1.0;
    }
    k = kstar - 1.0;
    while k >= 0.0 {
        let t = (ln_term(k) - peak).exp();
        sum += t;
        if t < 1e-18 {
            break;
        }
        k -= 1.0;
    }
    nu * half.ln() + peak + sum.ln()
}

/// Mean resultant length `A_m(κ) = I_{m/2}(κ) / I_{m/2−1}(κ)` of a vMF law
/// in ambient dimension `m`.
pub fn bessel_ratio<T: Real>(m: usize, kappa: T) -> Result<T> {
    let k = kappa.to_f64().unwrap_or(f64::NAN);
    if !(k > 0.0) {
        return Err(Error::NonPositiveConcentration(k));
    }
    assert!(m >= 2, "ambient dimension must be at least 2");
    let nu = 0.5 * m as f64 - 1.0;
    let r = if k <= SERIES_LIMIT {
        // A = (x/2)/(ν+1) · S(ν+1)/S(ν)
        0.5 * k / (nu + 1.0) * series_sum(nu + 1.0, k) / series_sum(nu, k)
    } else {
        ratio_continued_fraction(nu, k)
    };
    Ok(lit(r))
}

/// `I_{ν+1}(x)/I_ν(x) = 1/(2(ν+1)/x + 1/(2(ν+2)/x + …))`, modified Lentz.
fn ratio_continued_fraction(nu: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for i in 1..1_000_000 {
        let b = 2.0 * (nu + i as f64) / x;
        d = b + d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + 1.0 / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}
