//! Independent reference solvers used by the integration and acceptance tests.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Eigenvalues of `-psi'' + V psi = E psi` with `psi = 0` at both ends of
/// `[a, b]`, found by Numerov shooting on `intervals` steps. The `n`-th
/// eigenvalue is bracketed by counting nodes and refined by bisection.
pub struct Numerov<'a> {
    pub a: f64,
    pub b: f64,
    pub intervals: usize,
    pub potential: &'a dyn Fn(f64) -> f64,
}

impl Numerov<'_> {
    /// Nodes of the shooting solution in `(a, b]`, equal to the number of
    /// eigenvalues below `e`.
    pub fn count_below(&self, e: f64) -> usize {
        let h = (self.b - self.a) / self.intervals as f64;
        let g = |j: usize| 1.0 + h * h / 12.0 * (e - (self.potential)(self.a + j as f64 * h));
        let (mut prev, mut cur) = (0.0f64, 1e-6f64);
        let (mut g_prev, mut g_cur) = (g(0), g(1));
        let mut nodes = 0;
        for j in 1..self.intervals {
            let g_next = g(j + 1);
            let next = ((12.0 - 10.0 * g_cur) * cur - g_prev * prev) / g_next;
            if next == 0.0 || next.signum() != cur.signum() {
                nodes += 1;
            }
            prev = cur;
            cur = next;
            g_prev = g_cur;
            g_cur = g_next;
            if cur.abs() > 1e150 {
                prev *= 1e-150;
                cur *= 1e-150;
            }
        }
        nodes
    }

    /// The `n`-th eigenvalue (0-based) within `[lo, hi]`.
    pub fn eigenvalue(&self, n: usize, mut lo: f64, mut hi: f64) -> f64 {
        assert!(self.count_below(lo) <= n && self.count_below(hi) > n, "bracket misses level {n}");
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > n {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `r sin^2 x + (s / pi) x`, written out independently of the library.
pub fn washboard(r: f64, s: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| r * x.sin() * x.sin() + s * x / PI
}

/// Position of the tilted minima relative to `k pi`.
pub fn minimum_offset(r: f64, s: f64) -> f64 {
    -0.5 * (s / (PI * r)).asin()
}

/// Populations of a fitted cosine recovered by brute force: the value of
/// `offset + amp cos(w t + phase)` least-squares over a dense phase scan.
/// Used to cross-check the normal-equation fit.
pub fn brute_force_phase(samples: &[(f64, f64)], w: f64) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..20_000 {
        let phase = i as f64 / 20_000.0 * 2.0 * PI;
        // offset and amplitude are linear given the phase
        let n = samples.len() as f64;
        let c: Vec<f64> = samples.iter().map(|(t, _)| (w * t + phase).cos()).collect();
        let sc: f64 = c.iter().sum();
        let scc: f64 = c.iter().map(|v| v * v).sum();
        let sp: f64 = samples.iter().map(|s| s.1).sum();
        let spc: f64 = samples.iter().zip(&c).map(|(s, v)| s.1 * v).sum();
        let det = n * scc - sc * sc;
        let amp = (n * spc - sc * sp) / det;
        let off = (sp - amp * sc) / n;
        if amp < 0.0 {
            continue;
        }
        let sse: f64 = samples.iter().zip(&c).map(|(s, v)| (s.1 - off - amp * v).powi(2)).sum();
        if sse < best.0 {
            best = (sse, phase);
        }
    }
    best.1
}
