//! Markov chains driven by a stationary random environment `ω ∈ 𝒴^ℤ`.
//!
//! The kernel used at time `k` is `P_{θ^k ω}`, which here depends on the
//! coordinate `ω_k` only. A realized environment covers the coordinate
//! window `[first, end)`; shifting relabels coordinates without copying.

mod quenched;
mod stats;

pub use quenched::{
    equivariant_measure, forward_contraction, mixing_tail, mixing_time, rate_constant, run_ensemble, EnsembleConfig,
    EquivariantMeasure, QuenchedReport, RateConstant, RateRegime, RateStatus, TailRow,
};
pub use stats::{
    quenched_clt_check, quenched_variance, realized_chain, realized_observable, skew_correlation, QuenchedClt,
    QuenchedVariance, SkewReport,
};

use rand::Rng;
use thiserror::Error;

use crate::decomposition::DecompositionError;
use crate::kernel::{KernelError, MinorizationCertificate, ProbabilityVector, StochasticKernel};
use crate::montecarlo::MonteCarloError;
use crate::rng;
use crate::sequential::ChainError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RandomEnvError {
    #[error("invalid environment model: {0}")]
    InvalidModel(String),
    #[error("invalid kernel assignment: {0}")]
    InvalidAssignment(String),
    #[error("invalid good set: {0}")]
    InvalidGoodSet(String),
    #[error("environment coordinate {time} is outside the sampled window")]
    WindowUnavailable { time: i64 },
    #[error("sampled past too short: best certified error {best_bound}")]
    InsufficientPastDepth { best_bound: f64 },
    #[error("threshold not crossed within horizon {horizon}")]
    NotCrossed { horizon: usize },
    #[error("asymptotic variance vanishes")]
    DegenerateVariance,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    MonteCarlo(#[from] MonteCarloError),
}

/// Law of the symbol sequence `(ω_k)`.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseProcess {
    Iid { law: ProbabilityVector },
    /// Symbol-level Markov chain; `start = None` starts from the unique
    /// stationary law.
    Markov { kernel: StochasticKernel, start: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentModel {
    alphabet: Vec<String>,
    base: BaseProcess,
    start_law: ProbabilityVector,
}

impl EnvironmentModel {
    pub fn new(alphabet: Vec<String>, base: BaseProcess) -> Result<Self, RandomEnvError> {
        if alphabet.is_empty() {
            return Err(RandomEnvError::InvalidModel("alphabet is empty".into()));
        }
        let size = alphabet.len();
        let start_law = match &base {
            BaseProcess::Iid { law } => {
                if law.len() != size {
                    return Err(RandomEnvError::InvalidModel(format!("symbol law has {} entries for {size} symbols", law.len())));
                }
                law.clone()
            }
            BaseProcess::Markov { kernel, start } => {
                if kernel.source_size() != size || kernel.target_size() != size {
                    return Err(RandomEnvError::InvalidModel("symbol kernel does not match the alphabet".into()));
                }
                match start {
                    Some(s) if *s < size => ProbabilityVector::point_mass(size, *s),
                    Some(s) => return Err(RandomEnvError::InvalidModel(format!("start symbol {s} out of range"))),
                    None => kernel.stationary().map_err(|_| {
                        RandomEnvError::InvalidModel("symbol kernel has no unique stationary law; give a start symbol".into())
                    })?,
                }
            }
        };
        Ok(Self { alphabet, base, start_law })
    }

    /// I.i.d. symbols with the given probabilities.
    pub fn iid(alphabet: Vec<String>, probabilities: Vec<f64>) -> Result<Self, RandomEnvError> {
        Self::new(alphabet, BaseProcess::Iid { law: ProbabilityVector::new(probabilities)? })
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn base(&self) -> &BaseProcess {
        &self.base
    }

    pub fn symbol(&self, label: &str) -> Option<usize> {
        self.alphabet.iter().position(|a| a == label)
    }

    /// Coordinates `ω_k` for `k ∈ [−past, horizon)`.
    pub fn sample(&self, horizon: usize, past: usize, seed: u64, id: u64) -> Environment {
        let mut r = rng::stream(seed, rng::ENVIRONMENT, id);
        let len = horizon + past;
        let mut symbols = Vec::with_capacity(len);
        let draw = |law: &[f64], u: f64| -> usize {
            let mut acc = 0.0;
            for (s, p) in law.iter().enumerate() {
                acc += p;
                if u < acc {
                    return s;
                }
            }
            law.iter().rposition(|p| *p > 0.0).unwrap_or(0)
        };
        match &self.base {
            BaseProcess::Iid { law } => {
                for _ in 0..len {
                    symbols.push(draw(law.as_slice(), r.random()));
                }
            }
            BaseProcess::Markov { kernel, .. } => {
                for i in 0..len {
                    let s = if i == 0 {
                        draw(self.start_law.as_slice(), r.random())
                    } else {
                        draw(kernel.row(symbols[i - 1]), r.random())
                    };
                    symbols.push(s);
                }
            }
        }
        Environment { first: -(past as i64), symbols, id }
    }
}

/// `ω` restricted to the window `[−past, horizon)` with seed `seed`.
pub fn sample_environment(model: &EnvironmentModel, horizon: usize, past: usize, seed: u64) -> Environment {
    model.sample(horizon, past, seed, 0)
}

/// A realized window of symbols; coordinate `k` is `ω_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Environment {
    first: i64,
    symbols: Vec<usize>,
    pub id: u64,
}

impl Environment {
    pub fn new(first: i64, symbols: Vec<usize>) -> Self {
        Self { first, symbols, id: 0 }
    }

    pub fn get(&self, k: i64) -> Option<usize> {
        let o = usize::try_from(k.checked_sub(self.first)?).ok()?;
        self.symbols.get(o).copied()
    }

    pub fn symbol(&self, k: i64) -> Result<usize, RandomEnvError> {
        self.get(k).ok_or(RandomEnvError::WindowUnavailable { time: k })
    }

    pub fn first(&self) -> i64 {
        self.first
    }

    /// One past the last sampled coordinate.
    pub fn end(&self) -> i64 {
        self.first + self.symbols.len() as i64
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    /// `θ^k ω`: coordinate `i` of the result is `ω_{i+k}`.
    pub fn shift(&self, k: i64) -> Self {
        Self { first: self.first - k, symbols: self.symbols.clone(), id: self.id }
    }
}

/// Kernels (and optionally observables) indexed by symbol.
#[derive(Debug, Clone)]
pub struct RandomKernelAssignment {
    kernels: Vec<StochasticKernel>,
    observables: Option<Vec<Vec<f64>>>,
    certificates: Vec<MinorizationCertificate>,
}

impl RandomKernelAssignment {
    pub fn new(kernels: Vec<StochasticKernel>, observables: Option<Vec<Vec<f64>>>) -> Result<Self, RandomEnvError> {
        let Some(first) = kernels.first() else {
            return Err(RandomEnvError::InvalidAssignment("no kernels".into()));
        };
        let size = first.source_size();
        for (s, k) in kernels.iter().enumerate() {
            if k.source_size() != size || k.target_size() != size {
                return Err(RandomEnvError::InvalidAssignment(format!("kernel for symbol {s} is not {size}×{size}")));
            }
        }
        if let Some(obs) = &observables {
            if obs.len() != kernels.len() {
                return Err(RandomEnvError::InvalidAssignment("one observable per symbol required".into()));
            }
            if let Some((s, _)) = obs.iter().enumerate().find(|(_, v)| v.len() != size || v.iter().any(|x| !x.is_finite())) {
                return Err(RandomEnvError::InvalidAssignment(format!("observable for symbol {s} is malformed")));
            }
        }
        let certificates = kernels.iter().map(|k| MinorizationCertificate::extract(k, 1)).collect();
        Ok(Self { kernels, observables, certificates })
    }

    pub fn state_count(&self) -> usize {
        self.kernels[0].source_size()
    }

    pub fn symbol_count(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernel(&self, symbol: usize) -> &StochasticKernel {
        &self.kernels[symbol]
    }

    pub fn kernels(&self) -> &[StochasticKernel] {
        &self.kernels
    }

    pub fn certificate(&self, symbol: usize) -> &MinorizationCertificate {
        &self.certificates[symbol]
    }

    pub fn observable(&self, symbol: usize) -> Option<&[f64]> {
        self.observables.as_ref().map(|o| o[symbol].as_slice())
    }

    pub fn with_observables(mut self, observables: Vec<Vec<f64>>) -> Result<Self, RandomEnvError> {
        let kernels = std::mem::take(&mut self.kernels);
        Self::new(kernels, Some(observables))
    }

    fn check_environment(&self, env: &Environment) -> Result<(), RandomEnvError> {
        match env.symbols.iter().find(|s| **s >= self.kernels.len()) {
            Some(s) => Err(RandomEnvError::InvalidAssignment(format!("symbol {s} has no kernel"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    /// `θ^t ω ∈ A` iff `ω_t` is flagged good; each good symbol's kernel
    /// must have `γ ≥ δ`.
    Symbols(Vec<bool>),
    /// `θ^t ω ∈ A` iff some window `P_{θ^t ω, ℓ}`, `ℓ ≤ M`, has `γ ≥ δ`.
    Certified,
}

/// The good set `A_{δ,M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodSetSpec {
    pub delta: f64,
    pub m: usize,
    pub membership: Membership,
}

impl GoodSetSpec {
    pub fn new(delta: f64, m: usize, membership: Membership) -> Result<Self, RandomEnvError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(RandomEnvError::InvalidGoodSet(format!("delta {delta} must lie in (0, 1)")));
        }
        if m == 0 {
            return Err(RandomEnvError::InvalidGoodSet("M must be positive".into()));
        }
        Ok(Self { delta, m, membership })
    }

    /// Checks that every flagged symbol really certifies `γ ≥ δ`.
    pub fn validate(&self, assignment: &RandomKernelAssignment) -> Result<(), RandomEnvError> {
        if let Membership::Symbols(flags) = &self.membership {
            if flags.len() != assignment.symbol_count() {
                return Err(RandomEnvError::InvalidGoodSet("one flag per symbol required".into()));
            }
            for (s, _) in flags.iter().enumerate().filter(|(_, f)| **f) {
                let gamma = assignment.certificate(s).gamma;
                if gamma < self.delta {
                    return Err(RandomEnvError::InvalidGoodSet(format!(
                        "symbol {s} is flagged good but its kernel has gamma {gamma} < delta {}",
                        self.delta
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether `θ^t ω ∈ A`.
    pub fn contains(&self, env: &Environment, assignment: &RandomKernelAssignment, t: i64) -> Result<bool, RandomEnvError> {
        match &self.membership {
            Membership::Symbols(flags) => Ok(flags[env.symbol(t)?]),
            Membership::Certified => {
                let mut window: Option<StochasticKernel> = None;
                for l in 0..self.m as i64 {
                    let k = assignment.kernel(env.symbol(t + l)?);
                    let w = match window.take() {
                        None => k.clone(),
                        Some(w) => w.compose_unchecked(k),
                    };
                    if MinorizationCertificate::extract(&w, l as usize + 1).gamma >= self.delta {
                        return Ok(true);
                    }
                    window = Some(w);
                }
                Ok(false)
            }
        }
    }
}

/// `Σ_{j=1}^{[n/M]−1} 1(θ^{jM} ω ∈ A)` and `(1 − δ)` to that power.
pub fn hit_count_bound(
    env: &Environment,
    assignment: &RandomKernelAssignment,
    good: &GoodSetSpec,
    horizon: usize,
) -> Result<(usize, f64), RandomEnvError> {
    assignment.check_environment(env)?;
    let blocks = horizon / good.m;
    let mut count = 0;
    for j in 1..blocks {
        if good.contains(env, assignment, (j * good.m) as i64)? {
            count += 1;
        }
    }
    Ok((count, hit_bound(good.delta, count)))
}

fn hit_bound(delta: f64, count: usize) -> f64 {
    (count as f64 * (1.0 - delta).ln()).exp()
}
