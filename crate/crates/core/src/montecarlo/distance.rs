//! Distances between an empirical law and `N(0, 1)`.

use super::EmpiricalCdf;
use crate::normal::{cdf, cdf_integral, pdf, quantile, sf, sf_integral};

const TAIL_SPAN: f64 = 40.0;
const QUADRATURE_TOL: f64 = 1e-8;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// `sup_t |F̂(t) − Φ(t)|`.
pub fn kolmogorov_distance(cdf_hat: &EmpiricalCdf) -> f64 {
    let n = cdf_hat.len() as f64;
    cdf_hat
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = cdf(x);
            ((i + 1) as f64 / n - p).abs().max((i as f64 / n - p).abs())
        })
        .fold(0.0, f64::max)
}

/// Distinct sample values with `F̂` just after each.
fn steps(cdf_hat: &EmpiricalCdf) -> Vec<(f64, f64)> {
    let n = cdf_hat.len() as f64;
    let xs = cdf_hat.samples();
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = (i + 1) as f64 / n,
            _ => out.push((x, (i + 1) as f64 / n)),
        }
    }
    out
}

/// Pieces `[a, b]` on which `F̂ ≡ c`, including the two infinite tails.
fn pieces(cdf_hat: &EmpiricalCdf) -> Vec<(f64, f64, f64)> {
    let s = steps(cdf_hat);
    let mut out = Vec::with_capacity(s.len() + 1);
    out.push((f64::NEG_INFINITY, s[0].0, 0.0));
    for w in s.windows(2) {
        out.push((w[0].0, w[1].0, w[0].1));
    }
    let last = s[s.len() - 1];
    out.push((last.0, f64::INFINITY, 1.0));
    out
}

fn weight(t: f64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        1.0 + t.abs().powf(s)
    }
}

/// Maximizes `g` on `[a, b]` by a grid scan refined with golden sections.
fn maximize(g: &impl Fn(f64) -> f64, a: f64, b: f64, grid: usize) -> f64 {
    let h = (b - a) / grid as f64;
    let (mut best_i, mut best) = (0, g(a));
    for i in 1..=grid {
        let v = g(a + i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = (a + (best_i.max(1) - 1) as f64 * h, (a + (best_i + 1) as f64 * h).min(b));
    for _ in 0..60 {
        let m1 = hi - GOLDEN * (hi - lo);
        let m2 = lo + GOLDEN * (hi - lo);
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            break;
        }
    }
    best.max(g(0.5 * (lo + hi)))
}

/// `sup_t (1 + |t|^s)|F̂(t) − Φ(t)|`; `s = 0` uses weight 1 and coincides
/// with the Kolmogorov distance.
pub fn weighted_sup_distance(cdf_hat: &EmpiricalCdf, s: f64) -> f64 {
    assert!(s >= 0.0 && s.is_finite(), "weight exponent must be finite and nonnegative");
    if s == 0.0 {
        return kolmogorov_distance(cdf_hat);
    }
    let mut best: f64 = 0.0;
    let ps = pieces(cdf_hat);
    // Endpoints first: they give a good lower bound for pruning.
    for &(a, b, c) in &ps {
        for t in [a, b] {
            if t.is_finite() {
                best = best.max(weight(t, s) * (c - cdf(t)).abs());
            }
        }
    }
    for &(a, b, c) in &ps {
        if a == f64::NEG_INFINITY {
            // w(t)Φ(t) on t < b is w(u)Q(u) on u > −b.
            let lo = -b;
            best = best.max(maximize(&|u| weight(u, s) * sf(u), lo, lo.max(0.0) + TAIL_SPAN, 256));
            continue;
        }
        if b == f64::INFINITY {
            best = best.max(maximize(&|u| weight(u, s) * sf(u), a, a.max(0.0) + TAIL_SPAN, 256));
            continue;
        }
        let bound = weight(a.abs().max(b.abs()), s) * (c - cdf(a)).abs().max((c - cdf(b)).abs());
        if bound <= best {
            continue;
        }
        let mut cuts = vec![a];
        let cross = quantile(c);
        for t in [0.0, cross] {
            if t > a && t < b {
                cuts.push(t);
            }
        }
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            best = best.max(maximize(&|t| weight(t, s) * (c - cdf(t)).abs(), w[0], w[1], 16));
        }
    }
    best
}

/// `c·(b − a)` with the convention `0·∞ = 0`.
fn lin(c: f64, a: f64, b: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * (b - a)
    }
}

/// `∫_a^b (Φ(t) − c) dt` for `a < b` on one side of zero.
fn signed_area(c: f64, a: f64, b: f64) -> f64 {
    if b <= 0.0 {
        cdf_integral(b) - cdf_integral(a) - lin(c, a, b)
    } else {
        lin(1.0 - c, a, b) - (sf_integral(a) - sf_integral(b))
    }
}

fn abs_area(c: f64, a: f64, b: f64) -> f64 {
    let mut cuts = vec![a];
    let cross = quantile(c);
    for t in [0.0, cross] {
        if t > a && t < b {
            cuts.push(t);
        }
    }
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| signed_area(c, w[0], w[1]).abs()).sum()
}

fn simpson(g: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(g: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (g(lm), g(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        // Wide intervals always split a few times so narrow peaks are not skipped.
        if depth == 0 || ((depth < MAX_DEPTH - MIN_DEPTH || b - a < 0.25) && delta.abs() <= 15.0 * tol) {
            return left + right + delta / 15.0;
        }
        rec(g, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(g, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (g(a), g(0.5 * (a + b)), g(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(g, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

const MAX_DEPTH: u32 = 40;
const MIN_DEPTH: u32 = 6;

/// `(∫ |F̂(t) − Φ(t)|^q dt)^{1/q}`; exact for `q = 1`, adaptive Simpson
/// with total tolerance `1e-8` otherwise.
pub fn lq_distance(cdf_hat: &EmpiricalCdf, q: f64) -> f64 {
    assert!(q > 0.0 && q.is_finite(), "q must be positive");
    let ps = pieces(cdf_hat);
    if q == 1.0 {
        return ps.iter().map(|&(a, b, c)| abs_area(c, a, b)).sum();
    }
    let tol = (QUADRATURE_TOL / ps.len() as f64).max(1e-16);
    // Φ(t)^q ≤ e^{−q t²/2} is below 1e-17 past this span.
    let span = (80.0 / q).sqrt().max(12.0);
    let mut total = 0.0;
    for &(a, b, c) in &ps {
        let a = if a.is_finite() { a } else { b.min(0.0) - span };
        let b = if b.is_finite() { b } else { a.max(0.0) + span };
        let mut cuts = vec![a];
        let cross = quantile(c);
        if cross > a && cross < b {
            cuts.push(cross);
        }
        cuts.push(b);
        for w in cuts.windows(2) {
            total += simpson(&|t| (c - cdf(t)).abs().powf(q), w[0], w[1], tol);
        }
    }
    total.powf(1.0 / q)
}

/// `∫_a^b φ`, `∫_a^b zφ`, `∫_a^b z²φ`.
fn normal_moments(a: f64, b: f64) -> (f64, f64, f64) {
    let m0 = if a >= 0.0 { sf(a) - sf(b) } else { cdf(b) - cdf(a) };
    let zphi = |z: f64| if z.is_finite() { z * pdf(z) } else { 0.0 };
    let m1 = pdf(a) - pdf(b);
    let m2 = m0 - (zphi(b) - zphi(a));
    (m0, m1, m2)
}

/// `W_p` between the empirical law and `N(0, 1)`, integrating
/// `|F̂⁻¹(u) − Φ⁻¹(u)|^p` cell by cell in `z = Φ⁻¹(u)`; exact for `p = 1, 2`.
pub fn wasserstein(cdf_hat: &EmpiricalCdf, p: f64) -> f64 {
    assert!(p >= 1.0 && p.is_finite(), "p must be at least 1");
    let xs = cdf_hat.samples();
    let n = xs.len();
    let tol = (QUADRATURE_TOL / n as f64).max(1e-16);
    let mut lower = f64::NEG_INFINITY;
    let mut total = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let upper = if i + 1 == n { f64::INFINITY } else { quantile((i + 1) as f64 / n as f64) };
        total += if p == 1.0 {
            let (m0l, m1l, _) = normal_moments(lower, x.clamp(lower, upper));
            let (m0r, m1r, _) = normal_moments(x.clamp(lower, upper), upper);
            (x * m0l - m1l) + (m1r - x * m0r)
        } else if p == 2.0 {
            let (m0, m1, m2) = normal_moments(lower, upper);
            (x * x * m0 - 2.0 * x * m1 + m2).max(0.0)
        } else {
            let span = 12.0 + 2.0 * p.sqrt();
            let a = if lower.is_finite() { lower } else { x.min(upper) - span };
            let b = if upper.is_finite() { upper } else { x.max(lower) + span };
            let g = |z: f64| (x - z).abs().powf(p) * pdf(z);
            let mid = x.clamp(a, b);
            simpson(&g, a, mid, tol) + simpson(&g, mid, b, tol)
        };
        lower = upper;
    }
    total.max(0.0).powf(1.0 / p)
}
