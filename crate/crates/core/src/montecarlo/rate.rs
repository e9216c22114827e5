//! Log-log rate fits and moderate-deviation probes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{EmpiricalCdf, MonteCarloError};
use crate::normal::quantile;
use crate::parallel::{map_indexed, Execution};
use crate::rng;

/// Points with distance below `3 · 0.6/√N` are dominated by sampling error.
pub fn noise_floor(paths: usize) -> f64 {
    3.0 * 0.6 / (paths as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    /// `(σ_n, distance)`.
    pub pairs: Vec<(f64, f64)>,
    pub included: Vec<bool>,
    pub noise_floor: f64,
    pub fitted_slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

impl RateEstimate {
    /// `slope ± z·stderr`.
    pub fn slope_interval(&self, z: f64) -> (f64, f64) {
        (self.fitted_slope - z * self.slope_stderr, self.fitted_slope + z * self.slope_stderr)
    }
}

/// OLS of `log distance` on `log σ_n` over points above `noise_floor`.
pub fn fit_rate(pairs: &[(f64, f64)], noise_floor: f64) -> Result<RateEstimate, MonteCarloError> {
    let included: Vec<bool> = pairs.iter().map(|&(s, d)| s > 0.0 && d > 0.0 && d >= noise_floor).collect();
    let pts: Vec<(f64, f64)> = pairs.iter().zip(&included).filter(|(_, k)| **k).map(|(&(s, d), _)| (s.ln(), d.ln())).collect();
    if pts.is_empty() {
        return Err(MonteCarloError::AllPointsBelowNoise { floor: noise_floor });
    }
    if pts.len() < 3 {
        return Err(MonteCarloError::InsufficientPoints { found: pts.len() });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(MonteCarloError::InsufficientPoints { found: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(RateEstimate {
        pairs: pairs.to_vec(),
        included,
        noise_floor,
        fitted_slope: slope,
        intercept,
        slope_stderr: (sse / (k - 2.0) / sxx).sqrt(),
    })
}

/// One horizon of a moderate-deviation probe: the event `W_n / a_n ∈ Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpRow {
    pub n: usize,
    pub a_n: f64,
    pub hits: usize,
    pub paths: usize,
    pub probability: f64,
    /// 95% Wilson interval for the probability.
    pub probability_ci: (f64, f64),
    /// `a_n⁻² · ln P̂`; `None` when there are no hits.
    pub value: Option<f64>,
    pub value_ci: Option<(f64, f64)>,
    /// `−inf_{x∈Γ} x²/2`.
    pub target: f64,
}

fn wilson(hits: usize, n: usize, z: f64) -> (f64, f64) {
    let (k, n) = (hits as f64, n as f64);
    let p = k / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// `a_n = n^ρ`; `interval = (lo, hi)`, either end may be infinite.
pub fn mdp_probe(cdfs: &[EmpiricalCdf], rho: f64, interval: (f64, f64)) -> Vec<MdpRow> {
    let (lo, hi) = interval;
    let target = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { -0.5 * lo.abs().min(hi.abs()).powi(2) };
    cdfs.iter()
        .map(|c| {
            let a = (c.n as f64).powf(rho);
            let xs = c.samples();
            let left = if lo == f64::NEG_INFINITY { 0 } else { xs.partition_point(|x| *x < a * lo) };
            let right = if hi == f64::INFINITY { xs.len() } else { xs.partition_point(|x| *x <= a * hi) };
            let hits = right.saturating_sub(left);
            let p = hits as f64 / xs.len() as f64;
            let ci = wilson(hits, xs.len(), 1.96);
            let a2 = a * a;
            let value = (hits > 0).then(|| p.ln() / a2);
            let value_ci = (hits > 0).then(|| (ci.0.ln() / a2, ci.1.ln() / a2));
            MdpRow { n: c.n, a_n: a, hits, paths: xs.len(), probability: p, probability_ci: ci, value, value_ci, target }
        })
        .collect()
}

/// Exact `N(0, 1)` samples labelled with the given horizons.
pub fn gaussian_surrogate(horizons: &[usize], paths: usize, seed: u64, execution: Execution) -> Vec<EmpiricalCdf> {
    horizons
        .iter()
        .enumerate()
        .map(|(h, &n)| {
            let blocks = paths.div_ceil(4096);
            let samples: Vec<f64> = map_indexed(execution, blocks, |b| {
                let mut r = rng::stream(seed, rng::SURROGATE, ((h as u64) << 32) | b as u64);
                let count = (paths - b * 4096).min(4096);
                (0..count)
                    .map(|_| loop {
                        let u: f64 = r.random();
                        if u > 0.0 {
                            break quantile(u);
                        }
                    })
                    .collect::<Vec<f64>>()
            })
            .concat();
            EmpiricalCdf::new(samples, n, 1.0).expect("nonempty sample")
        })
        .collect()
}

/// Weighted extrapolation of the probe values to `a → ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub intercept: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Fits `value ≈ c₀ + c₁·ln a/a² + c₂/a²` (the Gaussian-tail expansion)
/// with binomial weights; `c₀` estimates the limit.
pub fn extrapolate_limit(rows: &[MdpRow]) -> Option<Extrapolation> {
    let usable: Vec<&MdpRow> = rows.iter().filter(|r| r.hits > 0 && r.hits < r.paths).collect();
    if usable.len() < 4 {
        return None;
    }
    let k = usable.len();
    let mut x = DMatrix::zeros(k, 3);
    let mut y = DVector::zeros(k);
    let mut w = DVector::zeros(k);
    for (i, r) in usable.iter().enumerate() {
        let a2 = r.a_n * r.a_n;
        x[(i, 0)] = 1.0;
        x[(i, 1)] = r.a_n.ln() / a2;
        x[(i, 2)] = 1.0 / a2;
        y[i] = r.value.expect("hits > 0");
        let var = (1.0 - r.probability) / (r.hits as f64) / (a2 * a2);
        w[i] = 1.0 / var;
    }
    let xtw = x.transpose() * DMatrix::from_diagonal(&w);
    let cov = (&xtw * &x).try_inverse()?;
    let beta = &cov * (&xtw * &y);
    let resid = &y - &x * &beta;
    let chi2: f64 = resid.iter().zip(w.iter()).map(|(r, w)| r * r * w).sum();
    let scale = (chi2 / (k - 3).max(1) as f64).max(1.0);
    Some(Extrapolation { intercept: beta[0], stderr: (cov[(0, 0)] * scale).sqrt(), points: k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_power_laws() {
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0].iter().map(|s| (*s, 3.0 / s)).collect();
        let r = fit_rate(&pts, 0.0).unwrap();
        assert_abs_diff_eq!(r.fitted_slope, -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.intercept, 3f64.ln(), epsilon = 1e-10);
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0].iter().map(|s| (*s, 3.0 / (s * s))).collect();
        assert_abs_diff_eq!(fit_rate(&pts, 0.0).unwrap().fitted_slope, -2.0, epsilon = 1e-10);
    }

    #[test]
    fn fit_errors() {
        let pts = [(1.0, 0.001), (2.0, 0.0005), (4.0, 0.00025)];
        assert_eq!(fit_rate(&pts, 0.01), Err(MonteCarloError::AllPointsBelowNoise { floor: 0.01 }));
        let pts = [(1.0, 0.1), (2.0, 0.05), (4.0, 0.00025)];
        assert_eq!(fit_rate(&pts, 0.01), Err(MonteCarloError::InsufficientPoints { found: 2 }));
        assert_abs_diff_eq!(noise_floor(1_000_000), 1.8e-3, epsilon = 1e-15);
    }

    #[test]
    fn full_line_has_zero_value() {
        let cdfs = gaussian_surrogate(&[10, 100], 1000, 3, Execution::Sequential);
        for row in mdp_probe(&cdfs, 0.1, (f64::NEG_INFINITY, f64::INFINITY)) {
            assert_eq!(row.value, Some(0.0));
            assert_eq!(row.target, 0.0);
        }
    }

    #[test]
    fn symmetric_intervals_agree() {
        let cdfs = gaussian_surrogate(&[64, 1024], 200_000, 5, Execution::Parallel);
        let right = mdp_probe(&cdfs, 0.1, (2.0, 3.0));
        let left = mdp_probe(&cdfs, 0.1, (-3.0, -2.0));
        for (r, l) in right.iter().zip(&left) {
            assert_eq!(r.target, l.target);
            let (rc, lc) = (r.value_ci.unwrap(), l.value_ci.unwrap());
            assert!(rc.0 <= lc.1 && lc.0 <= rc.1, "{rc:?} vs {lc:?}");
        }
    }

    #[test]
    fn surrogate_is_deterministic_across_modes() {
        let a = gaussian_surrogate(&[5], 10_000, 11, Execution::Sequential);
        let b = gaussian_surrogate(&[5], 10_000, 11, Execution::Parallel);
        assert_eq!(a, b);
    }
}
