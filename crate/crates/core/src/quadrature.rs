//! One-dimensional quadrature: adaptive Simpson on finite intervals, tail
//! truncation for rapidly decaying integrands, and Gauss–Hermite rules for
//! Gaussian expectations.

use crate::error::{Error, Result};

/// Value and estimated absolute error of an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

const MAX_DEPTH: u32 = 48;
const PANELS: usize = 64;

/// Adaptive Simpson on `[a, b]` with relative tolerance `rel_tol`.
///
/// The interval is first cut into equal panels so that narrow features are
/// not missed by the initial five-point sample.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Quad {
    if a == b {
        return Quad { value: 0.0, error: 0.0 };
    }
    let width = (b - a) / PANELS as f64;
    let panels: Vec<(f64, f64, f64, f64, f64, f64)> = (0..PANELS)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == PANELS { b } else { lo + width };
            let mid = 0.5 * (lo + hi);
            let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
            let s = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
            (lo, hi, flo, fmid, fhi, s)
        })
        .collect();
    let rough: f64 = panels.iter().map(|p| p.5.abs()).sum();
    let abs_tol = (rel_tol * rough).max(f64::MIN_POSITIVE);
    let mut value = 0.0;
    let mut error = 0.0;
    for &(lo, hi, flo, fmid, fhi, s) in &panels {
        let (v, e) = simpson_rec(&f, lo, hi, flo, fmid, fhi, s, abs_tol / PANELS as f64, MAX_DEPTH);
        value += v;
        error += e;
    }
    Quad { value, error }
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return (left + right + diff / 15.0, diff.abs() / 15.0);
    }
    let (lv, le) = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let (rv, re) = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    (lv + rv, le + re)
}

/// Smallest interval inside `[lo, hi]` outside of which `f` (sampled on a
/// grid of `n` points) stays below `cutoff · max f`. One grid cell of margin
/// is kept on each side.
pub fn truncated_support<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, cutoff: f64) -> Result<(f64, f64)> {
    if !(hi > lo) || n < 3 {
        return Err(Error::InvalidArgument(format!("bad search interval [{lo}, {hi}] with {n} points")));
    }
    let dx = (hi - lo) / (n - 1) as f64;
    let vals: Vec<f64> = (0..n).map(|i| f(lo + dx * i as f64)).collect();
    let max = vals.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::InvalidArgument("integrand has no positive finite values on the search grid".into()));
    }
    let thr = cutoff * max;
    let first = vals.iter().position(|v| *v >= thr).unwrap_or(0);
    let last = vals.iter().rposition(|v| *v >= thr).unwrap_or(n - 1);
    let a = lo + dx * first.saturating_sub(1) as f64;
    let b = lo + dx * (last + 1).min(n - 1) as f64;
    Ok((a, b))
}

/// Probabilists' Gauss–Hermite rule: `Σ wᵢ p(xᵢ) = E[p(Z)]`, `Z ~ N(0,1)`,
/// exact for polynomials of degree `< 2n`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "at least one node");
        let (x, w) = physicists_rule(n);
        let pi = std::f64::consts::PI;
        GaussHermite {
            nodes: x.iter().map(|v| v * std::f64::consts::SQRT_2).collect(),
            weights: w.iter().map(|v| v / pi.sqrt()).collect(),
        }
    }

    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

// Nodes and weights for the weight exp(-x²), by Newton iteration on the
// orthonormal Hermite recurrence.
fn physicists_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
