//! Path simulation of additive functionals and distances between the
//! standardized empirical law and the standard normal.

mod distance;
mod rate;

pub use distance::{kolmogorov_distance, lq_distance, wasserstein, weighted_sup_distance};
pub use rate::{extrapolate_limit, fit_rate, gaussian_surrogate, mdp_probe, noise_floor, Extrapolation, MdpRow, RateEstimate};

use rand::Rng;
use thiserror::Error;

use crate::decomposition::{exact_variance, DecompositionError, ObservableFamily};
use crate::parallel::{map_indexed, Execution};
use crate::rng;
use crate::sequential::{ChainError, ChainSpec};

/// Smallest `σ_n` accepted for standardization.
pub const MIN_SIGMA: f64 = 1e-12;
const PATH_BLOCK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("variance vanishes at horizon {0}")]
    ZeroVariance(usize),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("need at least 3 points above the noise floor, found {found}")]
    InsufficientPoints { found: usize },
    #[error("every point is below the noise floor {floor}")]
    AllPointsBelowNoise { floor: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub chain: ChainSpec,
    pub observable: ObservableFamily,
    /// Strictly increasing horizons `n ≥ 1`.
    pub horizons: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<(), MonteCarloError> {
        if self.paths == 0 {
            return Err(MonteCarloError::InvalidPlan("paths must be at least 1".into()));
        }
        if self.horizons.is_empty() || self.horizons[0] == 0 {
            return Err(MonteCarloError::InvalidPlan("horizons must be nonempty and positive".into()));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MonteCarloError::InvalidPlan("horizons must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn max_horizon(&self) -> usize {
        *self.horizons.last().expect("validated plan")
    }
}

/// Standardized samples `(S_n − E S_n)/σ_n`, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted_samples: Vec<f64>,
    pub n: usize,
    pub sigma_n: f64,
}

impl EmpiricalCdf {
    /// Sorts `samples`; they must already be standardized.
    pub fn new(mut samples: Vec<f64>, n: usize, sigma_n: f64) -> Result<Self, MonteCarloError> {
        if samples.is_empty() {
            return Err(MonteCarloError::EmptySample);
        }
        if !(sigma_n > 0.0) {
            return Err(MonteCarloError::ZeroVariance(n));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted_samples: samples, n, sigma_n })
    }

    /// Standardizes raw sums with the given center and scale.
    pub fn from_sums(sums: &[f64], n: usize, mean: f64, sigma: f64) -> Result<Self, MonteCarloError> {
        if !(sigma >= MIN_SIGMA) {
            return Err(MonteCarloError::ZeroVariance(n));
        }
        Self::new(sums.iter().map(|s| (s - mean) / sigma).collect(), n, sigma)
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted_samples
    }

    pub fn len(&self) -> usize {
        self.sorted_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_samples.is_empty()
    }

    /// `F̂(t) = #{x_i ≤ t}/N`.
    pub fn eval(&self, t: f64) -> f64 {
        self.sorted_samples.partition_point(|x| *x <= t) as f64 / self.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted_samples.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance (0 for a single sample).
    pub fn variance(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.sorted_samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
    }
}

/// Raw sums `S_n` per horizon, indexed by path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSums {
    pub horizons: Vec<usize>,
    pub sums: Vec<Vec<f64>>,
}

struct Sampler {
    cols: Vec<usize>,
    cumulative: Vec<Vec<f64>>,
    kernel_slot: Vec<usize>,
    values: Vec<Vec<f64>>,
    value_slot: Vec<usize>,
    initial: Vec<f64>,
}

fn cumulative_rows(rows: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut out = Vec::new();
    for row in rows {
        let mut acc = 0.0;
        let len = row.len();
        for (y, p) in row.into_iter().enumerate() {
            acc += p;
            out.push(if y + 1 == len { f64::INFINITY } else { acc });
        }
    }
    out
}

impl Sampler {
    fn new(chain: &ChainSpec, f: &ObservableFamily, horizon: usize) -> Result<Self, MonteCarloError> {
        let l = chain.law_index();
        let mut kernel_slot = Vec::with_capacity(horizon);
        let mut value_slot = Vec::with_capacity(horizon);
        for i in 0..horizon as i64 {
            let j = l + i;
            let slot = f.values().slot(j).ok_or(DecompositionError::ObservableOutOfRange { index: j })?;
            let size = chain.space_size(j).ok_or(ChainError::IndexOutOfRange { index: j })?;
            let found = f.values().items()[slot].len();
            if found != size {
                return Err(DecompositionError::DimensionMismatch { index: j, expected: size, found }.into());
            }
            value_slot.push(slot);
            if (i as usize) + 1 < horizon {
                kernel_slot.push(chain.kernels().slot(j).ok_or(ChainError::IndexOutOfRange { index: j })?);
            }
        }
        let items = chain.kernels().items();
        Ok(Self {
            cols: items.iter().map(|k| k.target_size()).collect(),
            cumulative: items.iter().map(|k| cumulative_rows(k.to_rows().into_iter())).collect(),
            kernel_slot,
            values: f.values().items().to_vec(),
            value_slot,
            initial: cumulative_rows(std::iter::once(chain.initial_law().as_slice().to_vec())),
        })
    }

    #[inline]
    fn draw(cum: &[f64], u: f64) -> usize {
        cum.iter().position(|c| u < *c).unwrap_or(cum.len() - 1)
    }

    fn path(&self, rng: &mut impl Rng, horizons: &[usize], out: &mut [f64]) {
        let mut x = Self::draw(&self.initial, rng.random::<f64>());
        let mut s = 0.0;
        let mut next = 0;
        let last = *horizons.last().expect("nonempty");
        for i in 0..last {
            s += self.values[self.value_slot[i]][x];
            if i + 1 == horizons[next] {
                out[next] = s;
                next += 1;
            }
            if i + 1 < last {
                let k = self.kernel_slot[i];
                let c = self.cols[k];
                x = Self::draw(&self.cumulative[k][x * c..(x + 1) * c], rng.random::<f64>());
            }
        }
    }
}

/// Raw path sums, identical for every execution mode and thread count.
pub fn simulate_sums(plan: &SimulationPlan, execution: Execution) -> Result<PathSums, MonteCarloError> {
    plan.validate()?;
    let sampler = Sampler::new(&plan.chain, &plan.observable, plan.max_horizon())?;
    let h = plan.horizons.len();
    let blocks = plan.paths.div_ceil(PATH_BLOCK);
    let results = map_indexed(execution, blocks, |b| {
        let lo = b * PATH_BLOCK;
        let hi = (lo + PATH_BLOCK).min(plan.paths);
        let mut out = vec![0.0; (hi - lo) * h];
        for (p, chunk) in (lo..hi).zip(out.chunks_mut(h)) {
            let mut rng = rng::stream(plan.seed, rng::PATHS, p as u64);
            sampler.path(&mut rng, &plan.horizons, chunk);
        }
        out
    });
    let mut sums = vec![Vec::with_capacity(plan.paths); h];
    for block in &results {
        for row in block.chunks(h) {
            for (col, v) in sums.iter_mut().zip(row) {
                col.push(*v);
            }
        }
    }
    Ok(PathSums { horizons: plan.horizons.clone(), sums })
}

/// Empirical laws of `(S_n − E S_n)/σ_n` with exact moments.
pub fn simulate(plan: &SimulationPlan, execution: Execution) -> Result<Vec<EmpiricalCdf>, MonteCarloError> {
    plan.validate()?;
    let profile = exact_variance(&plan.chain, &plan.observable, plan.max_horizon())?;
    for &n in &plan.horizons {
        if profile.sigma(n) < MIN_SIGMA {
            return Err(MonteCarloError::ZeroVariance(n));
        }
    }
    let raw = simulate_sums(plan, execution)?;
    raw.horizons
        .iter()
        .zip(raw.sums)
        .map(|(&n, sums)| EmpiricalCdf::from_sums(&sums, n, profile.means[n], profile.sigma(n)))
        .collect()
}
