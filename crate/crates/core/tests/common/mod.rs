//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's numerical kernels.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Piecewise truncation written out from its three branches.
pub fn truncation(r: f64, delta: f64) -> f64 {
    if r <= delta {
        2.0 * delta
    } else if r < 3.0 * delta {
        2.0 * delta + (r - delta) * (r - delta) / (4.0 * delta)
    } else {
        r
    }
}

/// `1 / (1 + φ⁴(t))` with `φ(t) = 1 / T(1 − t)`, i.e. `T⁴ / (T⁴ + 1)`.
fn sandwich_in_t(t: f64, delta: f64) -> f64 {
    let tt = truncation(1.0 - t, delta).powi(4);
    tt / (tt + 1.0)
}

const GL5_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * acc
}

/// Integrate `f` in `t = √r` over `[0, √s]`, split at the kinks
/// `t = 1 − 3δ` and `t = 1 − δ`, with `panels` panels per piece.
fn barrier_like(s: f64, delta: f64, panels: usize, f: &dyn Fn(f64) -> f64) -> f64 {
    let top = s.sqrt();
    let mut pts = vec![0.0];
    for k in [1.0 - 3.0 * delta, 1.0 - delta] {
        if k < top {
            pts.push(k);
        }
    }
    pts.push(top);
    pts.windows(2)
        .map(|w| gauss_legendre(f, w[0], w[1], panels))
        .sum()
}

/// `B_δ(s)` after the substitution `r = t²`: `∫ 2t / ((1 + t¹⁰)(1 + φ⁴(t))) dt`.
pub fn barrier(s: f64, delta: f64) -> f64 {
    barrier_like(s, delta, 10_000, &|t| {
        2.0 * t * sandwich_in_t(t, delta) / (1.0 + t.powi(10))
    })
}

/// `∫₀^s dr / (1 + φ⁴(√r))`.
pub fn sandwich(s: f64, delta: f64) -> f64 {
    barrier_like(s, delta, 10_000, &|t| 2.0 * t * sandwich_in_t(t, delta))
}

/// Closed form of the integrand on `r ≤ (1 − 3δ)²`, where it no longer
/// depends on `δ`: `(1 − √r)⁴ / ((1 − √r)⁴ + 1)`.
pub fn barrier_untruncated(s: f64) -> f64 {
    let f = |t: f64| {
        let q = (1.0 - t).powi(4);
        2.0 * t * q / ((q + 1.0) * (1.0 + t.powi(10)))
    };
    gauss_legendre(&f, 0.0, s.sqrt(), 10_000)
}

pub fn t0(eps: f64, delta: f64, c3: f64, horizon: f64) -> f64 {
    let gap = barrier((1.0 - 3.0 * delta).powi(2), delta) - barrier(eps * eps, delta);
    (gap * delta.powi(10) / c3).powi(3).min(horizon)
}

/// Projected Gauss–Seidel for one damage step on a uniform 1D grid with
/// `ψ(r) = r² − w r`:
/// `(z − z̄)/τ − z'' + 2z − w − ℓ + ξ = 0`, `z ≤ z̄`, `ξ ≥ 0`, `ξ(z̄ − z) = 0`,
/// with mirrored ghost nodes at both ends.
pub fn projected_gauss_seidel(z_prev: &[f64], load: &[f64], tau: f64, w: f64, h: f64) -> Vec<f64> {
    let n = z_prev.len();
    let c = 1.0 / (h * h);
    let mut z = z_prev.to_vec();
    for _ in 0..2_000_000 {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let (left, right) = match i {
                0 => (z[1], z[1]),
                _ if i == n - 1 => (z[n - 2], z[n - 2]),
                _ => (z[i - 1], z[i + 1]),
            };
            let diag = 1.0 / tau + 2.0 * c + 2.0;
            let rhs = z_prev[i] / tau + c * (left + right) + w + load[i];
            let v = (rhs / diag).min(z_prev[i]);
            change = change.max((v - z[i]).abs());
            z[i] = v;
        }
        if change < 1e-15 {
            return z;
        }
    }
    panic!("projected Gauss-Seidel did not converge");
}

/// A reproducible step instance: smooth `z̄ ∈ [0.6, 1]` and a load in
/// `[−4, 0]` with a few bumps, so that both active and inactive nodes occur.
pub struct StepInstance {
    pub z_prev: Vec<f64>,
    pub load: Vec<f64>,
    pub tau: f64,
    pub w: f64,
}

pub fn random_step_instance(seed: u64, n: usize) -> StepInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let centers: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
    let heights: Vec<f64> = (0..3).map(|_| rng.gen_range(1.0..4.0)).collect();
    let x = |i: usize| i as f64 / (n - 1) as f64;
    let mut z_prev: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(m, a)| a * ((m + 1) as f64 * std::f64::consts::PI * x(i)).cos())
                .sum();
            s
        })
        .collect();
    let (lo, hi) = z_prev
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    for v in &mut z_prev {
        *v = 0.6 + 0.4 * (*v - lo) / (hi - lo).max(1e-12);
    }
    let load = (0..n)
        .map(|i| {
            -centers
                .iter()
                .zip(&heights)
                .map(|(c, a)| a * (-(x(i) - c).powi(2) / 0.01).exp())
                .sum::<f64>()
                .min(4.0)
        })
        .collect();
    StepInstance {
        z_prev,
        load,
        tau: rng.gen_range(5e-3..2e-2),
        w: rng.gen_range(2.0..3.0),
    }
}

/// Nodal max error and observed orders `log₂(e_k / e_{k+1})`.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
