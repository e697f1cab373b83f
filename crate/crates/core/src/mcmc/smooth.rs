//! Gradient ascent on a softened alignment score: Laguerre assignments are
//! replaced by a softmax at temperature `τ`, which is annealed towards the
//! hard assignment. Works in f64 on row-major `dim × dim` rotations.

#[derive(Clone)]
pub(crate) struct SmoothFit {
    pub rotation: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
}

const TEMPERATURES: [f64; 6] = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005];

fn dotf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dotf(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
}

fn mat_vec(m: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|a| dotf(&m[a * d..(a + 1) * d], x)).collect()
}

/// Skew generator index pairs `(i, j)`, `i > j`, in the order used by the
/// rotation step parameterization.
fn skew_pairs(d: usize) -> Vec<(usize, usize)> {
    if d == 3 {
        return vec![(2, 1), (0, 2), (1, 0)];
    }
    (1..d).flat_map(|i| (0..i).map(move |j| (i, j))).collect()
}

struct Gradient {
    value: f64,
    rotation: Vec<f64>,
    centers: Vec<Vec<f64>>,
    psi: Vec<f64>,
}

fn gradient(xs: &[Vec<f64>], ys: &[Vec<f64>], fit: &SmoothFit, tau: f64, pairs: &[(usize, usize)]) -> Gradient {
    let d = ys[0].len();
    let k = fit.centers.len();
    let mut g = vec![0.0; d * d];
    let mut gc = vec![vec![0.0; d]; k];
    let mut gpsi = vec![0.0; k];
    let mut value = 0.0;
    let (mut w, mut s, mut a) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for (x, y) in xs.iter().zip(ys) {
        let u = mat_vec(&fit.rotation, x);
        for j in 0..k {
            let c = dotf(&u, &fit.centers[j]).clamp(-1.0, 1.0);
            let theta = c.acos();
            w[j] = if theta < 1e-6 { 1.0 } else { theta / theta.sin().max(1e-6) };
            s[j] = (fit.psi[j] - 0.5 * theta * theta) / tau;
            a[j] = dotf(y, &fit.centers[j]);
        }
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = s.iter().map(|v| (v - m).exp()).sum();
        let p: Vec<f64> = s.iter().map(|v| (v - m).exp() / z).collect();
        let abar: f64 = p.iter().zip(&a).map(|(p, a)| p * a).sum();
        value += abar;
        let mut gu = vec![0.0; d];
        for j in 0..k {
            let b = p[j] * (a[j] - abar) / tau;
            gpsi[j] += b;
            for t in 0..d {
                gc[j][t] += p[j] * y[t] + b * w[j] * u[t];
                gu[t] += b * w[j] * fit.centers[j][t];
            }
        }
        for r in 0..d {
            for c in 0..d {
                g[r * d + c] += gu[r] * u[c];
            }
        }
    }
    let rotation = pairs.iter().map(|&(i, j)| g[i * d + j] - g[j * d + i]).collect();
    for (gcj, c) in gc.iter_mut().zip(&fit.centers) {
        let r = dotf(gcj, c);
        gcj.iter_mut().zip(c).for_each(|(g, &c)| *g -= r * c);
    }
    Gradient { value, rotation, centers: gc, psi: gpsi }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, grad: &[f64], lr: f64) -> Vec<f64> {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let (c1, c2) = (1.0 - B1.powi(self.t), 1.0 - B2.powi(self.t));
        grad.iter()
            .enumerate()
            .map(|(i, &g)| {
                self.m[i] = B1 * self.m[i] + (1.0 - B1) * g;
                self.v[i] = B2 * self.v[i] + (1.0 - B2) * g * g;
                lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-12)
            })
            .collect()
    }
}

/// Annealed ascent from `fit`; `steps` Adam iterations per temperature.
pub(crate) fn smooth_fit(xs: &[Vec<f64>], ys: &[Vec<f64>], mut fit: SmoothFit, steps: usize) -> SmoothFit {
    let d = ys[0].len();
    let k = fit.centers.len();
    let pairs = skew_pairs(d);
    let n_params = pairs.len() + k * d + k;
    for &tau in &TEMPERATURES {
        let mut adam = Adam::new(n_params);
        let lr = 0.02;
        let mut best: Option<(f64, SmoothFit)> = None;
        for _ in 0..steps {
            let g = gradient(xs, ys, &fit, tau, &pairs);
            if best.as_ref().is_none_or(|(v, _)| g.value > *v) {
                best = Some((g.value, fit.clone()));
            }
            let flat: Vec<f64> = g
                .rotation
                .iter()
                .chain(g.centers.iter().flatten())
                .chain(&g.psi)
                .map(|v| -v)
                .collect();
            let delta = adam.step(&flat, lr);
            let (dr, rest) = delta.split_at(pairs.len());
            let (dc, dpsi) = rest.split_at(k * d);
            let mut omega = vec![0.0; d * d];
            for (&(i, j), &e) in pairs.iter().zip(dr) {
                omega[i * d + j] -= e;
                omega[j * d + i] += e;
            }
            fit.rotation = left_exp_step(&omega, &fit.rotation, d);
            for (j, c) in fit.centers.iter_mut().enumerate() {
                c.iter_mut().zip(&dc[j * d..(j + 1) * d]).for_each(|(c, e)| *c -= e);
                normalize(c);
            }
            fit.psi.iter_mut().zip(dpsi).for_each(|(p, e)| *p -= e);
            let mean = fit.psi.iter().sum::<f64>() / k as f64;
            fit.psi.iter_mut().for_each(|p| *p -= mean);
        }
        if let Some((v, b)) = best {
            if v > gradient(xs, ys, &fit, tau, &pairs).value {
                fit = b;
            }
        }
    }
    fit
}

/// `exp(Ω) R` via a truncated series, followed by row Gram–Schmidt.
fn left_exp_step(omega: &[f64], r: &[f64], d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d * d];
    let mut term = vec![0.0; d * d];
    for i in 0..d {
        e[i * d + i] = 1.0;
        term[i * d + i] = 1.0;
    }
    for n in 1..8 {
        let mut next = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                next[i * d + j] = (0..d).map(|l| omega[i * d + l] * term[l * d + j]).sum::<f64>() / n as f64;
            }
        }
        e.iter_mut().zip(&next).for_each(|(a, b)| *a += b);
        term = next;
    }
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = (0..d).map(|l| e[i * d + l] * r[l * d + j]).sum();
        }
    }
    for i in 0..d {
        for _ in 0..2 {
            for p in 0..i {
                let proj: f64 = (0..d).map(|c| out[i * d + c] * out[p * d + c]).sum();
                for c in 0..d {
                    out[i * d + c] -= proj * out[p * d + c];
                }
            }
        }
        normalize(&mut out[i * d..(i + 1) * d]);
    }
    out
}
