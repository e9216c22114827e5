//! Per-environment (quenched) contraction, equivariant measures and mixing.

use super::{hit_bound, Environment, GoodSetSpec, RandomEnvError, RandomKernelAssignment};
use crate::kernel::{tv, ProbabilityVector, StochasticKernel};
use crate::parallel::{map_indexed, Execution};

/// Backward composition stops after this many steps.
pub const MAX_PAST_DEPTH: usize = 1 << 16;

/// TV values at or below this are treated as numerically zero.
pub const TV_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct EquivariantMeasure {
    pub measure: ProbabilityVector,
    pub certified_error: f64,
    pub depth: usize,
}

/// `μ_{θ^t ω}` as the row average of `P_{θ^{t−d}ω, d}`.
///
/// The error after `d` steps is the smaller of `∏(1 − γ_{ω_k})` over the
/// composed kernels and the hit-count bound for `θ^{t−d}ω` at horizon `d`;
/// the latter is evaluated at `d = 1, 2, 4, …`.
pub fn equivariant_measure(
    env: &Environment,
    assignment: &RandomKernelAssignment,
    good: &GoodSetSpec,
    t: i64,
    tolerance: f64,
) -> Result<EquivariantMeasure, RandomEnvError> {
    assignment.check_environment(env)?;
    let mut composed: Option<StochasticKernel> = None;
    let mut log_one_step = 0.0f64;
    let mut best = 1.0f64;
    let mut next_check = 1usize;
    for d in 1..=MAX_PAST_DEPTH {
        let k = t - d as i64;
        let Some(symbol) = env.get(k) else { break };
        let p = assignment.kernel(symbol);
        composed = Some(match composed.take() {
            None => p.clone(),
            Some(w) => p.compose_unchecked(&w),
        });
        log_one_step += (1.0 - assignment.certificate(symbol).gamma).ln();
        let mut error = log_one_step.exp();
        if d == next_check {
            next_check *= 2;
            if let Ok(bound) = hits_from(env, assignment, good, k, d) {
                error = error.min(bound);
            }
        }
        best = best.min(error);
        if error <= tolerance {
            let w = composed.expect("at least one step");
            return Ok(EquivariantMeasure { measure: ProbabilityVector::from_raw(w.row_average()), certified_error: error, depth: d });
        }
    }
    Err(RandomEnvError::InsufficientPastDepth { best_bound: best })
}

/// Hit-count bound for `θ^{anchor}ω` at horizon `n`.
fn hits_from(env: &Environment, a: &RandomKernelAssignment, good: &GoodSetSpec, anchor: i64, n: usize) -> Result<f64, RandomEnvError> {
    let mut count = 0;
    for j in 1..n / good.m {
        if good.contains(env, a, anchor + (j * good.m) as i64)? {
            count += 1;
        }
    }
    Ok(hit_bound(good.delta, count))
}

/// Forward orbit of one environment from time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QuenchedReport {
    pub omega_id: u64,
    /// Indexed by `n = 0..=horizon`.
    pub hit_counts: Vec<usize>,
    pub bounds: Vec<f64>,
    /// `sup_x TV(P_{ω,n}(x,·), μ_{θⁿω})`.
    pub tv_actual: Vec<f64>,
    pub measure: ProbabilityVector,
    pub measure_error: f64,
    pub measure_depth: usize,
    /// False when the past was too short and `μ_ω` fell back to an
    /// uncertified row average.
    pub measure_certified: bool,
}

impl QuenchedReport {
    pub fn horizon(&self) -> usize {
        self.tv_actual.len() - 1
    }

    /// `max_n (tv_actual(n) − bounds(n))`; nonpositive when sound.
    pub fn soundness_gap(&self) -> f64 {
        self.tv_actual.iter().zip(&self.bounds).map(|(t, b)| t - b).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact `sup_x TV(P_{ω,n}(x,·), μ_{θⁿω})` for `n ≤ horizon`, with
/// `μ_{θⁿω} = μ_ω P_{ω,n}`, next to the hit-count bounds.
pub fn forward_contraction(
    env: &Environment,
    assignment: &RandomKernelAssignment,
    good: &GoodSetSpec,
    horizon: usize,
    tolerance: f64,
) -> Result<QuenchedReport, RandomEnvError> {
    assignment.check_environment(env)?;
    if env.end() < horizon as i64 {
        return Err(RandomEnvError::WindowUnavailable { time: env.end() });
    }
    let (measure, measure_error, measure_depth, measure_certified) =
        match equivariant_measure(env, assignment, good, 0, tolerance) {
            Ok(m) => (m.measure, m.certified_error, m.depth, true),
            Err(RandomEnvError::InsufficientPastDepth { best_bound }) => {
                let mut w = StochasticKernel::identity(assignment.state_count());
                let mut depth = 0;
                for k in (env.first()..0).rev() {
                    w = assignment.kernel(env.symbol(k)?).compose_unchecked(&w);
                    depth += 1;
                }
                (ProbabilityVector::from_raw(w.row_average()), best_bound, depth, false)
            }
            Err(e) => return Err(e),
        };

    let blocks = horizon / good.m;
    let mut indicators = vec![false; blocks.max(1)];
    for (j, slot) in indicators.iter_mut().enumerate().skip(1) {
        *slot = good.contains(env, assignment, (j * good.m) as i64)?;
    }
    let mut hit_counts = Vec::with_capacity(horizon + 1);
    let mut bounds = Vec::with_capacity(horizon + 1);
    let mut cumulative = vec![0usize; blocks.max(1)];
    for j in 1..cumulative.len() {
        cumulative[j] = cumulative[j - 1] + indicators[j] as usize;
    }
    for n in 0..=horizon {
        let b = n / good.m;
        let c = if b >= 1 { cumulative[b - 1] } else { 0 };
        hit_counts.push(c);
        bounds.push(hit_bound(good.delta, c));
    }

    let s = assignment.state_count();
    let mut forward = StochasticKernel::identity(s);
    let mut mu = measure.as_slice().to_vec();
    let mut tv_actual = Vec::with_capacity(horizon + 1);
    tv_actual.push(sup_tv(&forward, &mu));
    for n in 0..horizon {
        let p = assignment.kernel(env.symbol(n as i64)?);
        forward = forward.compose_unchecked(p);
        mu = p.push_forward(&mu);
        tv_actual.push(sup_tv(&forward, &mu));
    }
    Ok(QuenchedReport {
        omega_id: env.id,
        hit_counts,
        bounds,
        tv_actual,
        measure,
        measure_error,
        measure_depth,
        measure_certified,
    })
}

fn sup_tv(k: &StochasticKernel, mu: &[f64]) -> f64 {
    k.row_iter().map(|r| tv(r, mu)).fold(0.0, f64::max)
}

/// Declared decay `a_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateRegime {
    /// `a_n = n^{−β}`
    Polynomial(f64),
    /// `a_n = e^{−n^κ}`
    Stretched(f64),
}

impl RateRegime {
    pub fn log_rate(&self, n: usize) -> f64 {
        let n = n as f64;
        match *self {
            Self::Polynomial(beta) => -beta * n.ln(),
            Self::Stretched(kappa) => -n.powf(kappa),
        }
    }

    pub fn rate(&self, n: usize) -> f64 {
        self.log_rate(n).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateStatus {
    /// `tv_actual` fell below [`TV_FLOOR`] inside the horizon.
    Certified,
    /// Still decaying at the horizon; the sup may grow with a longer run.
    Truncated,
    /// No decay at all; `K = ∞`.
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstant {
    pub value: f64,
    pub argmax: usize,
    pub status: RateStatus,
}

/// `K(ω) = sup_{n ≥ 1} tv_actual(n)/a_n` over the computed horizon,
/// skipping values at or below [`TV_FLOOR`].
pub fn rate_constant(report: &QuenchedReport, regime: RateRegime) -> RateConstant {
    let tv = &report.tv_actual;
    let last = report.horizon();
    if last == 0 || (tv[last] > TV_FLOOR && tv[last] >= tv[1]) {
        return RateConstant { value: f64::INFINITY, argmax: last, status: RateStatus::Divergent };
    }
    let mut value = 0.0;
    let mut argmax = 1;
    for (n, t) in tv.iter().enumerate().skip(1) {
        if *t <= TV_FLOOR {
            continue;
        }
        let k = (t.ln() - regime.log_rate(n)).exp();
        if k > value {
            value = k;
            argmax = n;
        }
    }
    let status = if tv[last] <= TV_FLOOR { RateStatus::Certified } else { RateStatus::Truncated };
    RateConstant { value, argmax, status }
}

/// `N_ε = min{n ≥ 1 : 2·tv_actual(n) ≤ ε}`.
pub fn mixing_time(report: &QuenchedReport, epsilon: f64) -> Result<usize, RandomEnvError> {
    (1..report.tv_actual.len())
        .find(|&n| 2.0 * report.tv_actual[n] <= epsilon)
        .ok_or(RandomEnvError::NotCrossed { horizon: report.horizon() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub size: usize,
    pub horizon: usize,
    pub past: usize,
    pub seed: u64,
    pub tolerance: f64,
}

/// One [`QuenchedReport`] per environment `id ∈ 0..size`, in id order.
pub fn run_ensemble(
    model: &super::EnvironmentModel,
    assignment: &RandomKernelAssignment,
    good: &GoodSetSpec,
    config: &EnsembleConfig,
    execution: Execution,
) -> Result<Vec<QuenchedReport>, RandomEnvError> {
    good.validate(assignment)?;
    map_indexed(execution, config.size, |i| {
        let env = model.sample(config.horizon + good.m, config.past, config.seed, i as u64);
        forward_contraction(&env, assignment, good, config.horizon, config.tolerance)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub n: usize,
    pub empirical: f64,
    pub bound: f64,
}

/// Empirical `P(N_ε > N)` against `E[K_op^p] ε^{−p} a_N^p`, where
/// `K_op = 2K` is the constant for the operator norm `2·sup_x TV`.
pub fn mixing_tail(reports: &[QuenchedReport], epsilon: f64, p: f64, regime: RateRegime) -> Vec<TailRow> {
    if reports.is_empty() {
        return Vec::new();
    }
    let horizon = reports.iter().map(QuenchedReport::horizon).min().unwrap_or(0);
    let times: Vec<Option<usize>> = reports.iter().map(|r| mixing_time(r, epsilon).ok()).collect();
    let moment = reports
        .iter()
        .map(|r| (2.0 * rate_constant(r, regime).value).powf(p))
        .sum::<f64>()
        / reports.len() as f64;
    (1..=horizon)
        .map(|n| {
            let over = times.iter().filter(|t| t.is_none_or(|t| t > n)).count();
            TailRow {
                n,
                empirical: over as f64 / reports.len() as f64,
                bound: moment * epsilon.powf(-p) * (p * regime.log_rate(n)).exp(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::tests::{gb, good};
    use super::super::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    fn env(first: i64, symbols: Vec<usize>) -> Environment {
        Environment::new(first, symbols)
    }

    #[test]
    fn equivariant_measure_examples() {
        let mixed = env(-300, (0..600).map(|i| (i * 7 % 3 == 0) as usize).collect());
        let m = equivariant_measure(&mixed, &gb(), &good(), 0, 1e-13).unwrap();
        assert!(m.certified_error <= 1e-13);
        assert_abs_diff_eq!(m.measure[0], 2.0 / 3.0, epsilon = 1e-13);

        let u = ProbabilityVector::uniform(2);
        let rank_one = RandomKernelAssignment::new(vec![StochasticKernel::rank_one(2, &u)], None).unwrap();
        let g1 = GoodSetSpec::new(0.5, 1, Membership::Symbols(vec![true])).unwrap();
        let m = equivariant_measure(&env(-5, vec![0; 10]), &rank_one, &g1, 0, 1e-12).unwrap();
        assert_eq!((m.depth, m.certified_error), (1, 0.0));
        assert_eq!(m.measure.as_slice(), &[0.5, 0.5]);

        let bad = env(-50, vec![1; 100]);
        assert!(matches!(
            equivariant_measure(&bad, &gb(), &good(), 0, 1e-12),
            Err(RandomEnvError::InsufficientPastDepth { best_bound }) if best_bound == 1.0
        ));
    }

    #[test]
    fn all_good_forward_contraction() {
        let e = env(-200, vec![0; 260]);
        let r = forward_contraction(&e, &gb(), &good(), 40, 1e-14).unwrap();
        for n in 0..=40 {
            assert_abs_diff_eq!(r.tv_actual[n], 2.0 / 3.0 * 0.7f64.powi(n as i32), epsilon = 1e-13);
        }
        assert!(r.soundness_gap() <= 1e-12);
        assert_eq!(mixing_time(&r, 0.01).unwrap(), 14);
        assert_eq!(mixing_time(&r, 2.0).unwrap(), 1);

        let k = rate_constant(&r, RateRegime::Stretched(0.5));
        let oracle = (1..=40).map(|n| 2.0 / 3.0 * 0.7f64.powi(n) * (n as f64).sqrt().exp()).fold(0.0, f64::max);
        assert_abs_diff_eq!(k.value, oracle, epsilon = 1e-12);
        assert_eq!(k.argmax, 2);
        assert_eq!(k.status, RateStatus::Truncated);
    }

    #[test]
    fn all_bad_environment_does_not_mix() {
        let e = env(-20, vec![1; 60]);
        let r = forward_contraction(&e, &gb(), &good(), 30, 1e-12).unwrap();
        assert!(!r.measure_certified);
        assert!(r.tv_actual.iter().all(|t| *t == 0.5));
        assert_eq!(rate_constant(&r, RateRegime::Polynomial(1.0)).status, RateStatus::Divergent);
        assert!(rate_constant(&r, RateRegime::Polynomial(1.0)).value.is_infinite());
        assert_eq!(mixing_time(&r, 0.5), Err(RandomEnvError::NotCrossed { horizon: 30 }));
    }

    #[test]
    fn mixed_environment_audit() {
        let model = EnvironmentModel::iid(vec!["g".into(), "b".into()], vec![0.5, 0.5]).unwrap();
        for id in 0..20 {
            let e = model.sample(101, 400, 11, id);
            let r = forward_contraction(&e, &gb(), &good(), 100, 1e-13).unwrap();
            let mut goods = 0;
            for n in 0..=100 {
                assert!(r.tv_actual[n] <= 0.7f64.powi(goods) + 1e-12);
                if n < 100 && e.symbols()[400 + n] == 0 {
                    goods += 1;
                }
            }
            assert!(r.soundness_gap() <= 1e-12);
            assert!(r.hit_counts.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn equivariance_and_shift_consistency() {
        let model = EnvironmentModel::iid(vec!["g".into(), "b".into()], vec![0.5, 0.5]).unwrap();
        let e = model.sample(80, 600, 3, 1);
        let m0 = equivariant_measure(&e, &gb(), &good(), 0, 1e-13).unwrap();
        let m1 = equivariant_measure(&e, &gb(), &good(), 1, 1e-13).unwrap();
        let pushed = gb().kernel(e.get(0).unwrap()).push_forward(m0.measure.as_slice());
        assert!(tv(&pushed, m1.measure.as_slice()) <= m0.certified_error + m1.certified_error);

        let shifted = e.shift(1);
        let s1 = equivariant_measure(&shifted, &gb(), &good(), 0, 1e-13).unwrap();
        assert_eq!(s1, m1);
        for t in 0..60 {
            assert_eq!(good().contains(&shifted, &gb(), t).unwrap(), good().contains(&e, &gb(), t + 1).unwrap());
        }
    }

    #[test]
    fn mixing_time_is_monotone_in_epsilon() {
        let model = EnvironmentModel::iid(vec!["g".into(), "b".into()], vec![0.5, 0.5]).unwrap();
        let e = model.sample(200, 400, 5, 2);
        let r = forward_contraction(&e, &gb(), &good(), 200, 1e-13).unwrap();
        let times: Vec<usize> = [0.5, 0.2, 0.1, 0.05, 0.01, 0.001].iter().map(|eps| mixing_time(&r, *eps).unwrap()).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn tail_is_dominated() {
        let model = EnvironmentModel::iid(vec!["g".into(), "b".into()], vec![0.5, 0.5]).unwrap();
        let cfg = EnsembleConfig { size: 200, horizon: 128, past: 512, seed: 1, tolerance: 1e-13 };
        let reports = run_ensemble(&model, &gb(), &good(), &cfg, Execution::Sequential).unwrap();
        let rows = mixing_tail(&reports, 0.05, 4.0, RateRegime::Stretched(0.5));
        assert_eq!(rows.len(), 128);
        assert!(rows.iter().all(|r| r.empirical <= r.bound));
        assert!(rows[0].empirical > 0.0 && rows[127].empirical == 0.0);
        let par = run_ensemble(&model, &gb(), &good(), &cfg, Execution::Parallel).unwrap();
        assert_eq!(par, reports);
    }
}
