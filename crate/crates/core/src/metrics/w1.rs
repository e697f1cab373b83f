use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::sphere::{arc_between, UnitVector};

const CAP_EPS: f64 = 1e-15;

/// Exact `W₁` between two finitely supported measures with the geodesic
/// ground metric, by successive shortest paths on the transportation
/// network. Weights must be nonnegative and sum to one. The pair is put in a
/// canonical order first so the result is exactly symmetric.
pub fn wasserstein1_discrete<T: Real>(mu: &[(UnitVector<T>, T)], nu: &[(UnitVector<T>, T)]) -> Result<T> {
    let a = to_f64(mu)?;
    let b = to_f64(nu)?;
    if let (Some(x), Some(y)) = (a.first(), b.first()) {
        if x.0.len() != y.0.len() {
            return Err(Error::DimensionMismatch { expected: x.0.len(), got: y.0.len() });
        }
    }
    let value = if canonical_le(&a, &b) { transport(&a, &b) } else { transport(&b, &a) };
    Ok(lit(value))
}

type Weighted = Vec<(Vec<f64>, f64)>;

fn to_f64<T: Real>(m: &[(UnitVector<T>, T)]) -> Result<Weighted> {
    if m.is_empty() {
        return Err(Error::Weights("empty measure".into()));
    }
    let out: Weighted = m
        .iter()
        .map(|(z, w)| (z.as_slice().iter().map(|c| c.to_f64().unwrap()).collect(), w.to_f64().unwrap()))
        .collect();
    if out.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Weights("weights must be nonnegative".into()));
    }
    let s: f64 = out.iter().map(|(_, w)| w).sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::Weights(format!("weights sum to {s}, not 1")));
    }
    Ok(out)
}

fn canonical_le(a: &Weighted, b: &Weighted) -> bool {
    let key = |m: &Weighted| -> Vec<u64> {
        m.iter().flat_map(|(z, w)| z.iter().chain(std::iter::once(w)).map(|v| v.to_bits())).collect()
    };
    key(a) <= key(b)
}

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

fn transport(a: &Weighted, b: &Weighted) -> f64 {
    let (n, m) = (a.len(), b.len());
    let (s, t) = (n + m, n + m + 1);
    let v = n + m + 2;
    let mut edges: Vec<Edge> = Vec::with_capacity(2 * (n * m + n + m));
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); v];
    let mut add = |edges: &mut Vec<Edge>, u: usize, w: usize, cap: f64, cost: f64| {
        adj[u].push(edges.len());
        edges.push(Edge { to: w, cap, cost });
        adj[w].push(edges.len());
        edges.push(Edge { to: u, cap: 0.0, cost: -cost });
    };
    for (i, (_, w)) in a.iter().enumerate() {
        add(&mut edges, s, i, *w, 0.0);
    }
    for (j, (_, w)) in b.iter().enumerate() {
        add(&mut edges, n + j, t, *w, 0.0);
    }
    for (i, (x, _)) in a.iter().enumerate() {
        for (j, (y, _)) in b.iter().enumerate() {
            let d = arc_between(x, y);
            add(&mut edges, i, n + j, f64::INFINITY, d);
        }
    }

    let mut h = vec![0.0f64; v];
    let mut remaining: f64 = a.iter().map(|(_, w)| w).sum::<f64>().min(b.iter().map(|(_, w)| w).sum());
    let mut total = 0.0;
    while remaining > CAP_EPS {
        // Dense Dijkstra on reduced costs.
        let mut dist = vec![f64::INFINITY; v];
        let mut prev = vec![usize::MAX; v];
        let mut done = vec![false; v];
        dist[s] = 0.0;
        loop {
            let mut u = usize::MAX;
            for x in 0..v {
                if !done[x] && dist[x].is_finite() && (u == usize::MAX || dist[x] < dist[u]) {
                    u = x;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            for &e in &adj[u] {
                let ed = &edges[e];
                if ed.cap <= CAP_EPS || done[ed.to] {
                    continue;
                }
                let nd = dist[u] + (ed.cost + h[u] - h[ed.to]).max(0.0);
                if nd < dist[ed.to] {
                    dist[ed.to] = nd;
                    prev[ed.to] = e;
                }
            }
        }
        if !dist[t].is_finite() {
            break;
        }
        for x in 0..v {
            if dist[x].is_finite() {
                h[x] += dist[x];
            }
        }
        let mut push = remaining;
        let mut x = t;
        while x != s {
            let e = prev[x];
            push = push.min(edges[e].cap);
            x = edges[e ^ 1].to;
        }
        let mut x = t;
        while x != s {
            let e = prev[x];
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            total += push * edges[e].cost;
            x = edges[e ^ 1].to;
        }
        remaining -= push;
    }
    total.max(0.0)
}
