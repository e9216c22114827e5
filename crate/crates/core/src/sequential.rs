//! Time-inhomogeneous chains: window compositions `P_{j,n}`, one-step and
//! scheduled contraction ledgers, and limit measures `μ_j` reached by
//! composing further and further into the past.
//!
//! Indexing: kernel `i` maps the state space at time `i` to the state space
//! at time `i + 1`. A window `P_{j,n}` is `P_j ∘ P_{j+1} ∘ … ∘ P_{j+n-1}`.
//! Products of `(1 − γ)` factors are carried in log-space so long windows do
//! not underflow.

use thiserror::Error;

use crate::family::IndexedFamily;
use crate::kernel::{tv, KernelError, MinorizationCertificate, ProbabilityVector, StochasticKernel};

/// Default cap on the number of composed steps for generator-rule chains.
pub const DEFAULT_HORIZON_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("kernel at index {index} has {found} source states, expected {expected}")]
    DimensionMismatch { index: i64, expected: usize, found: usize },
    #[error("index {index} is outside the chain")]
    IndexOutOfRange { index: i64 },
    #[error("window of {requested} steps exceeds the horizon cap {cap}")]
    HorizonCap { requested: usize, cap: usize },
    #[error("contraction bound does not vanish (best bound {best_bound})")]
    BoundDoesNotVanish { best_bound: f64 },
    #[error("minorization schedule exhausted after {depth_reached} windows")]
    WindowExhausted { depth_reached: usize },
    #[error("tolerance {0} must be positive")]
    BadTolerance(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// An inhomogeneous chain: kernels indexed by time plus the initial law at
/// `law_index`.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    kernels: IndexedFamily<StochasticKernel>,
    initial_law: ProbabilityVector,
    law_index: i64,
    horizon_cap: usize,
}

impl ChainSpec {
    /// The initial law lives at the lowest index of a window chain and at
    /// index 0 of a periodic one.
    pub fn new(kernels: IndexedFamily<StochasticKernel>, initial_law: ProbabilityVector) -> Result<Self, ChainError> {
        let law_index = kernels.first_index().unwrap_or(0);
        Self::with_law_index(kernels, initial_law, law_index)
    }

    pub fn with_law_index(
        kernels: IndexedFamily<StochasticKernel>,
        initial_law: ProbabilityVector,
        law_index: i64,
    ) -> Result<Self, ChainError> {
        let items = kernels.items();
        if items.is_empty() {
            return Err(KernelError::Empty.into());
        }
        let base = kernels.first_index().unwrap_or(0);
        for (i, pair) in items.windows(2).enumerate() {
            if pair[0].target_size() != pair[1].source_size() {
                return Err(ChainError::DimensionMismatch {
                    index: base + i as i64 + 1,
                    expected: pair[0].target_size(),
                    found: pair[1].source_size(),
                });
            }
        }
        if kernels.period().is_some() {
            let (last, first) = (&items[items.len() - 1], &items[0]);
            if last.target_size() != first.source_size() {
                return Err(ChainError::DimensionMismatch {
                    index: items.len() as i64,
                    expected: last.target_size(),
                    found: first.source_size(),
                });
            }
        }
        let chain = Self { kernels, initial_law, law_index, horizon_cap: DEFAULT_HORIZON_CAP };
        let size = chain.space_size(law_index).ok_or(ChainError::IndexOutOfRange { index: law_index })?;
        if size != chain.initial_law.len() {
            return Err(ChainError::DimensionMismatch {
                index: law_index,
                expected: size,
                found: chain.initial_law.len(),
            });
        }
        Ok(chain)
    }

    /// A time-homogeneous chain.
    pub fn constant(kernel: StochasticKernel, initial_law: ProbabilityVector) -> Result<Self, ChainError> {
        Self::new(IndexedFamily::constant(kernel), initial_law)
    }

    pub fn with_horizon_cap(mut self, cap: usize) -> Self {
        self.horizon_cap = cap;
        self
    }

    pub fn horizon_cap(&self) -> usize {
        self.horizon_cap
    }

    pub fn kernels(&self) -> &IndexedFamily<StochasticKernel> {
        &self.kernels
    }

    pub fn initial_law(&self) -> &ProbabilityVector {
        &self.initial_law
    }

    pub fn law_index(&self) -> i64 {
        self.law_index
    }

    pub fn kernel(&self, index: i64) -> Result<&StochasticKernel, ChainError> {
        self.kernels.get(index).ok_or(ChainError::IndexOutOfRange { index })
    }

    /// Number of states at time `index`, if that time is part of the chain.
    pub fn space_size(&self, index: i64) -> Option<usize> {
        self.kernels
            .get(index)
            .map(StochasticKernel::source_size)
            .or_else(|| self.kernels.get(index - 1).map(StochasticKernel::target_size))
    }

    /// Last time index with a state space, `None` for unbounded chains.
    pub fn last_time(&self) -> Option<i64> {
        self.kernels.end_index()
    }

    /// One-step certificate of kernel `index`.
    pub fn certificate(&self, index: i64) -> Result<MinorizationCertificate, ChainError> {
        Ok(MinorizationCertificate::extract(self.kernel(index)?, 1))
    }

    /// Laws of `X_k` for `k = law_index ..= to`, propagated forward from the
    /// initial law.
    pub fn laws_until(&self, to: i64) -> Result<Vec<Vec<f64>>, ChainError> {
        if to < self.law_index {
            return Err(ChainError::IndexOutOfRange { index: to });
        }
        let mut laws = Vec::with_capacity((to - self.law_index + 1) as usize);
        let mut law = self.initial_law.as_slice().to_vec();
        for k in self.law_index..to {
            let next = self.kernel(k)?.push_forward(&law);
            laws.push(std::mem::replace(&mut law, next));
        }
        laws.push(law);
        Ok(laws)
    }
}

/// `P_{j,n}`; the empty window is the identity on the space at `j`.
pub fn window_kernel(chain: &ChainSpec, start: i64, length: usize) -> Result<StochasticKernel, ChainError> {
    if length > chain.horizon_cap {
        return Err(ChainError::HorizonCap { requested: length, cap: chain.horizon_cap });
    }
    let size = chain.space_size(start).ok_or(ChainError::IndexOutOfRange { index: start })?;
    let mut acc = StochasticKernel::identity(size);
    for i in 0..length as i64 {
        acc = acc.compose_unchecked(chain.kernel(start + i)?);
    }
    acc.renormalize_rows();
    Ok(acc)
}

/// State of the one-step ledger for the window `P_{j-n,n}`.
#[derive(Debug, Clone)]
pub struct ContractionLedger {
    pub target: i64,
    pub length: usize,
    /// `∏_{k=j-n}^{j-1} (1 − γ_k)`.
    pub bound: f64,
    pub log_bound: f64,
    /// The positive measure `A_{j,n}`; its mass is `1 − bound`.
    pub accumulated_measure: Vec<f64>,
    /// `max_{x,y} |P_{j-n,n}(x,y) − A_{j,n}(y) − bound·Q_{j-n,n}(x,y)|`.
    pub consistency_residual: f64,
    /// Exact limit `μ_j`, available once some kernel in the window has
    /// `γ = 1` (the bound is then zero).
    pub limit_measure: Option<ProbabilityVector>,
}

impl ContractionLedger {
    pub fn accumulated_mass(&self) -> f64 {
        self.accumulated_measure.iter().sum()
    }
}

/// Ledgers for `n = 1 ..= max_length`, built with the inductive
/// decomposition `P_{j-n,n} = A_{j,n} + (∏(1−γ))·Q_{j-n,n}`.
pub fn ledger_series(chain: &ChainSpec, target: i64, max_length: usize) -> Result<Vec<ContractionLedger>, ChainError> {
    if max_length == 0 {
        return Ok(Vec::new());
    }
    if max_length > chain.horizon_cap {
        return Err(ChainError::HorizonCap { requested: max_length, cap: chain.horizon_cap });
    }
    let mut out = Vec::with_capacity(max_length);
    let first = chain.kernel(target - 1)?;
    let cert = MinorizationCertificate::extract(first, 1);
    let mut accumulated = scaled_minorizer(&cert, 1.0, first.target_size());
    let mut log_bound = (1.0 - cert.gamma).ln();
    let mut residual_window = cert.residual;
    let mut window = first.clone();
    out.push(snapshot(target, 1, log_bound, &accumulated, &residual_window, &window));

    for n in 1..max_length {
        let k = target - n as i64 - 1;
        let kernel = chain.kernel(k)?;
        let cert = MinorizationCertificate::extract(kernel, 1);
        if cert.gamma > 0.0 {
            // C_n = γ_k · ∏(1−γ) · (m_k Q_{k+1,n}), the mass coupled at step k.
            let weight = cert.gamma * log_bound.exp();
            if weight > 0.0 {
                let pushed = residual_window.push_forward(cert.minorizer.as_ref().expect("gamma > 0").as_slice());
                for (a, p) in accumulated.iter_mut().zip(pushed) {
                    *a += weight * p;
                }
            }
        }
        residual_window = cert.residual.compose_unchecked(&residual_window);
        window = kernel.compose_unchecked(&window);
        log_bound += (1.0 - cert.gamma).ln();
        out.push(snapshot(target, n + 1, log_bound, &accumulated, &residual_window, &window));
    }
    Ok(out)
}

fn scaled_minorizer(cert: &MinorizationCertificate, weight: f64, size: usize) -> Vec<f64> {
    match &cert.minorizer {
        Some(m) => m.as_slice().iter().map(|v| weight * cert.gamma * v).collect(),
        None => vec![0.0; size],
    }
}

fn snapshot(
    target: i64,
    length: usize,
    log_bound: f64,
    accumulated: &[f64],
    residual_window: &StochasticKernel,
    window: &StochasticKernel,
) -> ContractionLedger {
    let bound = log_bound.exp();
    let mut residual: f64 = 0.0;
    for x in 0..window.source_size() {
        for (y, a) in accumulated.iter().enumerate() {
            let d = window.get(x, y) - a - bound * residual_window.get(x, y);
            residual = residual.max(d.abs());
        }
    }
    let limit_measure = (bound == 0.0).then(|| {
        let mass: f64 = accumulated.iter().sum();
        ProbabilityVector::from_raw(accumulated.iter().map(|a| a / mass).collect())
    });
    ContractionLedger {
        target,
        length,
        bound,
        log_bound,
        accumulated_measure: accumulated.to_vec(),
        consistency_residual: residual,
        limit_measure,
    }
}

/// The ledger for the single window `P_{j-n,n}`.
pub fn one_step_ledger(chain: &ChainSpec, target: i64, length: usize) -> Result<ContractionLedger, ChainError> {
    if length == 0 {
        let size = chain.space_size(target).ok_or(ChainError::IndexOutOfRange { index: target })?;
        return Ok(ContractionLedger {
            target,
            length: 0,
            bound: 1.0,
            log_bound: 0.0,
            accumulated_measure: vec![0.0; size],
            consistency_residual: 0.0,
            limit_measure: None,
        });
    }
    Ok(ledger_series(chain, target, length)?.pop().expect("nonempty series"))
}

/// Approximation of `μ_j` with a certified total-variation error.
#[derive(Debug, Clone)]
pub struct LimitMeasure {
    /// Row average of `P_{j-n,n}`.
    pub measure: ProbabilityVector,
    /// Ledger bound at the depth used; bounds `sup_x TV(P_{j-n,n}(x,·), μ_j)`.
    pub certified_error: f64,
    pub depth: usize,
    /// Largest TV distance between two rows of `P_{j-n,n}`.
    pub row_spread: f64,
}

/// Composes backwards from `target` until the one-step ledger bound drops
/// to `tolerance`.
pub fn limit_measure(chain: &ChainSpec, target: i64, tolerance: f64) -> Result<LimitMeasure, ChainError> {
    if !(tolerance > 0.0) {
        return Err(ChainError::BadTolerance(tolerance));
    }
    let log_tol = tolerance.ln();
    let period = chain.kernels.period();
    let mut window: Option<StochasticKernel> = None;
    let mut log_bound: f64 = 0.0;
    let mut period_start_log = 0.0;
    for depth in 1..=chain.horizon_cap {
        let k = target - depth as i64;
        let Some(kernel) = chain.kernels.get(k) else {
            return Err(ChainError::BoundDoesNotVanish { best_bound: log_bound.exp() });
        };
        let gamma = MinorizationCertificate::extract(kernel, 1).gamma;
        log_bound += (1.0 - gamma).ln();
        window = Some(match window {
            None => kernel.clone(),
            Some(w) => kernel.compose_unchecked(&w),
        });
        if log_bound <= log_tol {
            let mut w = window.expect("window set above");
            w.renormalize_rows();
            let certified_error = log_bound.exp();
            let row_spread = w.dobrushin_coefficient();
            debug_assert!(row_spread <= 2.0 * certified_error + 1e-12);
            return Ok(LimitMeasure {
                measure: ProbabilityVector::from_raw(w.row_average()),
                certified_error,
                depth,
                row_spread,
            });
        }
        if let Some(p) = period {
            // A full period without any contraction means none will ever come.
            if depth % p == 0 {
                if log_bound == period_start_log {
                    return Err(ChainError::BoundDoesNotVanish { best_bound: log_bound.exp() });
                }
                period_start_log = log_bound;
            }
        }
    }
    Err(ChainError::BoundDoesNotVanish { best_bound: log_bound.exp() })
}

/// Sequential minorization schedule: for each window end index `e`, a lag
/// `ℓ_e` and the `γ` certified for `P_{e-ℓ_e, ℓ_e}`.
///
/// Recursion depths are cumulative: `N_{j,1} = ℓ_j` and
/// `N_{j,k} = N_{j,k-1} + ℓ_{j - N_{j,k-1}}`, so window `k` ends at
/// `j − N_{j,k-1}` and the windows tile `[j − N_{j,k}, j]` without overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct MinorizationSchedule {
    first_end: i64,
    lags: Vec<usize>,
    gammas: Vec<f64>,
}

impl MinorizationSchedule {
    pub fn new(first_end: i64, lags: Vec<usize>, gammas: Vec<f64>) -> Self {
        assert_eq!(lags.len(), gammas.len());
        assert!(lags.iter().all(|&l| l >= 1), "lags must be positive");
        Self { first_end, lags, gammas }
    }

    /// The same lag and `γ` at every end index in `first_end..=last_end`.
    pub fn uniform(first_end: i64, last_end: i64, lag: usize, gamma: f64) -> Self {
        let n = (last_end - first_end + 1).max(0) as usize;
        Self::new(first_end, vec![lag; n], vec![gamma; n])
    }

    /// Lag 1 everywhere, with the one-step certificates of the chain.
    pub fn one_step(chain: &ChainSpec, first_end: i64, last_end: i64) -> Result<Self, ChainError> {
        let gammas = (first_end..=last_end)
            .map(|e| chain.certificate(e - 1).map(|c| c.gamma))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(first_end, vec![1; gammas.len()], gammas))
    }

    /// For each end index, the smallest lag `≤ max_lag` whose window
    /// certificate reaches `threshold`; lag 1 with its own `γ` otherwise.
    pub fn search(
        chain: &ChainSpec,
        first_end: i64,
        last_end: i64,
        threshold: f64,
        max_lag: usize,
    ) -> Result<Self, ChainError> {
        let mut lags = Vec::new();
        let mut gammas = Vec::new();
        for e in first_end..=last_end {
            let mut window: Option<StochasticKernel> = None;
            let mut chosen = None;
            for lag in 1..=max_lag.max(1) {
                let Some(k) = chain.kernels.get(e - lag as i64) else { break };
                let w = match window.take() {
                    None => k.clone(),
                    Some(w) => k.compose_unchecked(&w),
                };
                let gamma = MinorizationCertificate::extract(&w, lag).gamma;
                if lag == 1 {
                    chosen = Some((1, gamma));
                }
                if gamma >= threshold {
                    chosen = Some((lag, gamma));
                    break;
                }
                window = Some(w);
            }
            let (lag, gamma) = chosen.ok_or(ChainError::IndexOutOfRange { index: e - 1 })?;
            lags.push(lag);
            gammas.push(gamma);
        }
        Ok(Self::new(first_end, lags, gammas))
    }

    fn slot(&self, end: i64) -> Option<usize> {
        let o = usize::try_from(end.checked_sub(self.first_end)?).ok()?;
        (o < self.lags.len()).then_some(o)
    }

    pub fn lag(&self, end: i64) -> Option<usize> {
        self.slot(end).map(|o| self.lags[o])
    }

    pub fn gamma(&self, end: i64) -> Option<f64> {
        self.slot(end).map(|o| self.gammas[o])
    }

    /// `N_{j,1}, …, N_{j,depth}`.
    pub fn recursion_depths(&self, target: i64, depth: usize) -> Result<Vec<usize>, ChainError> {
        let mut out = Vec::with_capacity(depth);
        let mut consumed = 0usize;
        for k in 0..depth {
            let end = target - consumed as i64;
            let lag = self.lag(end).ok_or(ChainError::WindowExhausted { depth_reached: k })?;
            consumed += lag;
            out.push(consumed);
        }
        Ok(out)
    }

    /// `∏_{k=1}^{m-1} (1 − γ_k)` over the first `m − 1` scheduled windows
    /// behind `target`; valid for `P_{j-n,n}` whenever `n ≥ N_{j,m-1}`.
    pub fn bound(&self, target: i64, m: usize) -> Result<f64, ChainError> {
        let windows = m.saturating_sub(1);
        let mut log = 0.0;
        let mut consumed = 0i64;
        for k in 0..windows {
            let end = target - consumed;
            let slot = self.slot(end).ok_or(ChainError::WindowExhausted { depth_reached: k })?;
            log += (1.0 - self.gammas[slot]).ln();
            consumed += self.lags[slot] as i64;
        }
        Ok(log.exp())
    }

    /// Best scheduled bound for the window `P_{j-n,n}`: every scheduled
    /// window that fits inside `[j − n, j]` contributes its factor.
    pub fn bound_for_window(&self, target: i64, length: usize) -> f64 {
        let mut log = 0.0;
        let mut consumed = 0usize;
        while let Some(slot) = self.slot(target - consumed as i64) {
            let lag = self.lags[slot];
            if consumed + lag > length {
                break;
            }
            log += (1.0 - self.gammas[slot]).ln();
            consumed += lag;
        }
        log.exp()
    }
}

/// Free-function form of [`MinorizationSchedule::bound`].
pub fn schedule_bound(schedule: &MinorizationSchedule, target: i64, depth: usize) -> Result<f64, ChainError> {
    schedule.bound(target, depth)
}

/// `sup_x TV(row_x, μ)` for a kernel and a law on its target.
pub fn sup_tv_to(kernel: &StochasticKernel, law: &[f64]) -> f64 {
    kernel.row_iter().map(|r| tv(r, law)).fold(0.0, f64::max)
}
