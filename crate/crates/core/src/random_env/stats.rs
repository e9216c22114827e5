//! Quenched variance, quenched CLT rates and skew-product correlations.

use super::{equivariant_measure, Environment, GoodSetSpec, RandomEnvError, RandomKernelAssignment};
use crate::decomposition::{exact_variance, variance_classification, ObservableFamily, Truncation, VarianceClass};
use crate::family::IndexedFamily;
use crate::kernel::{dot, ProbabilityVector};
use crate::montecarlo::kolmogorov_distance;
use crate::montecarlo::{fit_rate, noise_floor, RateEstimate};
use crate::montecarlo::{simulate_sums, EmpiricalCdf, SimulationPlan, MIN_SIGMA};
use crate::parallel::{map_indexed, Execution};
use crate::sequential::ChainSpec;

/// Chain with kernels `P_{ω_k}` for `k ∈ [start, start+len)`, started at
/// `law` at time `start`.
pub fn realized_chain(
    env: &Environment,
    assignment: &RandomKernelAssignment,
    start: i64,
    len: usize,
    law: ProbabilityVector,
) -> Result<ChainSpec, RandomEnvError> {
    assignment.check_environment(env)?;
    let kernels = (start..start + len as i64)
        .map(|k| Ok(assignment.kernel(env.symbol(k)?).clone()))
        .collect::<Result<Vec<_>, RandomEnvError>>()?;
    Ok(ChainSpec::with_law_index(IndexedFamily::window(start, kernels), law, start)?)
}

/// `f_{ω_k}` for `k ∈ [start, start+len)` from the assignment's observables.
pub fn realized_observable(
    env: &Environment,
    assignment: &RandomKernelAssignment,
    start: i64,
    len: usize,
) -> Result<ObservableFamily, RandomEnvError> {
    let values = (start..start + len as i64)
        .map(|k| {
            let s = env.symbol(k)?;
            assignment
                .observable(s)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| RandomEnvError::InvalidAssignment("no observables assigned".into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ObservableFamily::new(IndexedFamily::window(start, values))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuenchedVariance {
    /// `Var(S_n)/n`, entry 0 unused.
    pub per_step: Vec<f64>,
    pub sigma_sq_n: Vec<f64>,
    /// Mean increment of `Var(S_n)` over the last half; 0 when bounded.
    pub sigma_sq: f64,
    pub class: Option<VarianceClass>,
}

impl QuenchedVariance {
    pub fn degenerate(&self) -> bool {
        self.class == Some(VarianceClass::Bounded) || self.sigma_sq <= MIN_SIGMA
    }
}

/// `Var(S_n^ω)/n` for `n ≤ horizon` on an explicit realized chain.
pub fn quenched_variance_of(chain: &ChainSpec, f: &ObservableFamily, horizon: usize) -> Result<QuenchedVariance, RandomEnvError> {
    let profile = exact_variance(chain, f, horizon)?;
    let class = variance_classification(chain, f, horizon, Truncation::default()).ok().map(|r| r.classification);
    let mut sigma_sq = profile.asymptotic_slope.unwrap_or(0.0).max(0.0);
    if class == Some(VarianceClass::Bounded) {
        sigma_sq = 0.0;
    }
    let per_step = profile.sigma_sq.iter().enumerate().map(|(n, v)| if n == 0 { 0.0 } else { v / n as f64 }).collect();
    Ok(QuenchedVariance { per_step, sigma_sq_n: profile.sigma_sq, sigma_sq, class })
}

/// [`quenched_variance_of`] for the assignment's observables from time 0.
pub fn quenched_variance(
    env: &Environment,
    assignment: &RandomKernelAssignment,
    law: ProbabilityVector,
    horizon: usize,
) -> Result<QuenchedVariance, RandomEnvError> {
    let chain = realized_chain(env, assignment, 0, horizon + 1, law)?;
    let f = realized_observable(env, assignment, 0, horizon + 1)?;
    quenched_variance_of(&chain, &f, horizon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuenchedClt {
    pub horizons: Vec<usize>,
    pub sigma_sq: f64,
    /// Kolmogorov distances with `(S_n − E S_n)/Σ_{ω,n}`.
    pub exact_scaled: Vec<f64>,
    /// Kolmogorov distances with `(S_n − E S_n)/(Σ√n)`.
    pub asymptotic_scaled: Vec<f64>,
    /// Fits of `log distance` on `log n`.
    pub exact_fit: RateEstimate,
    pub asymptotic_fit: Option<RateEstimate>,
}

/// Monte Carlo Kolmogorov distances under both standardizations.
pub fn quenched_clt_of(
    chain: &ChainSpec,
    f: &ObservableFamily,
    horizons: &[usize],
    paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<QuenchedClt, RandomEnvError> {
    let plan = SimulationPlan { chain: chain.clone(), observable: f.clone(), horizons: horizons.to_vec(), paths, seed };
    plan.validate()?;
    let variance = quenched_variance_of(chain, f, plan.max_horizon())?;
    if variance.degenerate() || horizons.iter().any(|&n| variance.sigma_sq_n[n].sqrt() < MIN_SIGMA) {
        return Err(RandomEnvError::DegenerateVariance);
    }
    let profile = exact_variance(chain, f, plan.max_horizon())?;
    let raw = simulate_sums(&plan, execution)?;
    let mut exact_scaled = Vec::with_capacity(horizons.len());
    let mut asymptotic_scaled = Vec::with_capacity(horizons.len());
    for (&n, sums) in horizons.iter().zip(&raw.sums) {
        let exact = EmpiricalCdf::from_sums(sums, n, profile.means[n], profile.sigma(n))?;
        exact_scaled.push(kolmogorov_distance(&exact));
        let asym = EmpiricalCdf::from_sums(sums, n, profile.means[n], (variance.sigma_sq * n as f64).sqrt())?;
        asymptotic_scaled.push(kolmogorov_distance(&asym));
    }
    let floor = noise_floor(paths);
    let pairs = |d: &[f64]| -> Vec<(f64, f64)> { horizons.iter().zip(d).map(|(&n, &d)| (n as f64, d)).collect() };
    Ok(QuenchedClt {
        horizons: horizons.to_vec(),
        sigma_sq: variance.sigma_sq,
        exact_fit: fit_rate(&pairs(&exact_scaled), floor)?,
        asymptotic_fit: fit_rate(&pairs(&asymptotic_scaled), floor).ok(),
        exact_scaled,
        asymptotic_scaled,
    })
}

/// [`quenched_clt_of`] for the assignment's observables from time 0.
#[allow(clippy::too_many_arguments)]
pub fn quenched_clt_check(
    env: &Environment,
    assignment: &RandomKernelAssignment,
    law: ProbabilityVector,
    horizons: &[usize],
    paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<QuenchedClt, RandomEnvError> {
    let len = horizons.last().copied().unwrap_or(0) + 1;
    let chain = realized_chain(env, assignment, 0, len, law)?;
    let f = realized_observable(env, assignment, 0, len)?;
    quenched_clt_of(&chain, &f, horizons, paths, seed, execution)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewReport {
    /// Lags `0..=max_lag`.
    pub correlation: Vec<f64>,
    /// Part of the correlation carried by `ω ↦ (μ_ω(f), μ_{θⁿω}(g))`.
    pub environment_covariance: Vec<f64>,
    /// Ensemble mean of `sup|f|·osc(g)·∏_{k<n} δ(P_{ω_k})`, which bounds
    /// `|correlation − environment_covariance|`.
    pub audited_bound: Vec<f64>,
    /// `−slope` of `ln|correlation|` against the lag, over lags ≥ 1 with
    /// `|correlation| > 1e-14`.
    pub decay_rate: Option<f64>,
    pub decay_intercept: Option<f64>,
}

struct Orbit {
    inner: Vec<f64>,
    a: f64,
    b: Vec<f64>,
    audit: Vec<f64>,
}

/// `E_μ[(f∘π₀)(g∘πₙ)] − E_μ[f∘π₀]E_μ[g∘πₙ]` for the skew product with
/// fibre measures `μ_ω`, averaged over `envs`.
#[allow(clippy::too_many_arguments)]
pub fn skew_correlation(
    envs: &[Environment],
    assignment: &RandomKernelAssignment,
    good: &GoodSetSpec,
    f: &[Vec<f64>],
    g: &[Vec<f64>],
    max_lag: usize,
    tolerance: f64,
    execution: Execution,
) -> Result<SkewReport, RandomEnvError> {
    let s = assignment.state_count();
    for obs in [f, g] {
        if obs.len() != assignment.symbol_count() || obs.iter().any(|v| v.len() != s) {
            return Err(RandomEnvError::InvalidAssignment("one observable vector per symbol required".into()));
        }
    }
    if envs.is_empty() {
        return Err(RandomEnvError::InvalidModel("empty ensemble".into()));
    }
    let sup_f = f.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let osc_g = g
        .iter()
        .map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(0.0f64, f64::max);

    let orbits = map_indexed(execution, envs.len(), |i| -> Result<Orbit, RandomEnvError> {
        let env = &envs[i];
        let mu0 = equivariant_measure(env, assignment, good, 0, tolerance)?.measure.into_inner();
        let f0 = &f[env.symbol(0)?];
        let mut nu: Vec<f64> = mu0.iter().zip(f0).map(|(m, v)| m * v).collect();
        let mut mu = mu0.clone();
        let mut contraction = 1.0;
        let mut orbit = Orbit { inner: Vec::new(), a: dot(&mu0, f0), b: Vec::new(), audit: Vec::new() };
        for n in 0..=max_lag {
            let gn = &g[env.symbol(n as i64)?];
            orbit.inner.push(dot(&nu, gn));
            orbit.b.push(dot(&mu, gn));
            orbit.audit.push(sup_f * osc_g * contraction);
            let p = assignment.kernel(env.symbol(n as i64)?);
            nu = p.push_forward(&nu);
            mu = p.push_forward(&mu);
            contraction *= p.dobrushin_coefficient();
        }
        Ok(orbit)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let count = orbits.len() as f64;
    let mean_a = orbits.iter().map(|o| o.a).sum::<f64>() / count;
    let mut correlation = Vec::with_capacity(max_lag + 1);
    let mut environment_covariance = Vec::with_capacity(max_lag + 1);
    let mut audited_bound = Vec::with_capacity(max_lag + 1);
    for n in 0..=max_lag {
        let mean_inner = orbits.iter().map(|o| o.inner[n]).sum::<f64>() / count;
        let mean_b = orbits.iter().map(|o| o.b[n]).sum::<f64>() / count;
        let mean_ab = orbits.iter().map(|o| o.a * o.b[n]).sum::<f64>() / count;
        correlation.push(mean_inner - mean_a * mean_b);
        environment_covariance.push(mean_ab - mean_a * mean_b);
        audited_bound.push(orbits.iter().map(|o| o.audit[n]).sum::<f64>() / count);
    }

    let pts: Vec<(f64, f64)> =
        correlation.iter().enumerate().skip(1).filter(|(_, c)| c.abs() > 1e-14).map(|(n, c)| (n as f64, c.abs().ln())).collect();
    let (decay_rate, decay_intercept) = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        (Some(-slope), Some(my - slope * mx))
    } else {
        (None, None)
    };
    Ok(SkewReport { correlation, environment_covariance, audited_bound, decay_rate, decay_intercept })
}
