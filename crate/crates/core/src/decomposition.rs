//! Martingale–coboundary decomposition of bounded observables and exact
//! variance of additive functionals on finite spaces.
//!
//! For an observable `f_j` with centered version `f̃_j = f_j − E f_j(X_j)`,
//! `h_j = Σ_{k>j} E[f̃_k(X_k) | X_j]` and
//! `M_j(x, y) = f̃_j(y) + h_j(y) − h_{j-1}(x)`. Truncating the series at a
//! horizon `E` is certified by Dobrushin contraction over blocks of the
//! chain's period.

use thiserror::Error;

use crate::family::IndexedFamily;
use crate::kernel::{dot, StochasticKernel};
use crate::sequential::{window_kernel, ChainError, ChainSpec};

/// Default certified tail for adaptive truncation.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;
/// Constant in the variance-bridge allowance `C·‖h‖(‖h‖ + ‖M‖)`.
pub const BRIDGE_CONSTANT: f64 = 8.0;
const MAX_CONTRACTION_BLOCKS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecompositionError {
    #[error("observable is not defined at index {index}")]
    ObservableOutOfRange { index: i64 },
    #[error("observable at index {index} has {found} entries, state space has {expected}")]
    DimensionMismatch { index: i64, expected: usize, found: usize },
    #[error("index {index} precedes the initial law at {law_index}")]
    BeforeInitialLaw { index: i64, law_index: i64 },
    #[error("observable values must be finite")]
    NonFinite,
    #[error("empty index range {first}..={last}")]
    EmptyRange { first: i64, last: i64 },
    #[error("variance trend is inconclusive at horizon {horizon}")]
    Inconclusive { horizon: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Real-valued functions `f_j` on the state spaces of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableFamily {
    values: IndexedFamily<Vec<f64>>,
    sup_bound: f64,
}

impl ObservableFamily {
    pub fn new(values: IndexedFamily<Vec<f64>>) -> Result<Self, DecompositionError> {
        let mut sup_bound: f64 = 0.0;
        for v in values.items().iter().flatten() {
            if !v.is_finite() {
                return Err(DecompositionError::NonFinite);
            }
            sup_bound = sup_bound.max(v.abs());
        }
        Ok(Self { values, sup_bound })
    }

    /// The same function at every index.
    pub fn constant(values: Vec<f64>) -> Result<Self, DecompositionError> {
        Self::new(IndexedFamily::constant(values))
    }

    /// Indicator of `state` on a space of `size` states, at every index.
    pub fn indicator(size: usize, state: usize) -> Self {
        let mut v = vec![0.0; size];
        v[state] = 1.0;
        Self { values: IndexedFamily::constant(v), sup_bound: 1.0 }
    }

    pub fn get(&self, index: i64) -> Option<&[f64]> {
        self.values.get(index).map(Vec::as_slice)
    }

    pub fn values(&self) -> &IndexedFamily<Vec<f64>> {
        &self.values
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Largest `max f_j − min f_j` over all indices.
    pub fn oscillation(&self) -> f64 {
        self.values.items().iter().map(|v| oscillation(v)).fold(0.0, f64::max)
    }

    fn checked(&self, chain: &ChainSpec, index: i64) -> Result<&[f64], DecompositionError> {
        let v = self.get(index).ok_or(DecompositionError::ObservableOutOfRange { index })?;
        let size = chain.space_size(index).ok_or(ChainError::IndexOutOfRange { index })?;
        if v.len() != size {
            return Err(DecompositionError::DimensionMismatch { index, expected: size, found: v.len() });
        }
        Ok(v)
    }
}

fn oscillation(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if v.is_empty() {
        0.0
    } else {
        max - min
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Sum exactly `K` terms of the series for every index.
    Fixed(usize),
    /// Extend the series until the certified tail is below the tolerance.
    Adaptive(f64),
}

impl Default for Truncation {
    fn default() -> Self {
        Self::Adaptive(DEFAULT_TAIL_TOLERANCE)
    }
}

/// Block length `L` (a multiple of the period) and
/// `ρ = max_phase δ(P_{r,L}) < 1`, so that `δ(P_{k,n}) ≤ ρ^{⌊n/L⌋}` for all `k`.
pub fn block_contraction(chain: &ChainSpec) -> Option<(usize, f64)> {
    let period = chain.kernels().period()?;
    let blocks: Vec<StochasticKernel> = (0..period as i64)
        .map(|r| window_kernel(chain, r, period))
        .collect::<Result<_, _>>()
        .ok()?;
    let mut powers = blocks.clone();
    for m in 1..=MAX_CONTRACTION_BLOCKS {
        if m > 1 {
            // P_{r, mp} = P_{r,p} ∘ P_{r+p, (m-1)p} and the second factor has phase r.
            powers = blocks.iter().zip(&powers).map(|(b, p)| b.compose_unchecked(p)).collect();
        }
        let rho = powers.iter().map(StochasticKernel::dobrushin_coefficient).fold(0.0, f64::max);
        if rho < 1.0 - 1e-12 {
            return Some((m * period, rho));
        }
    }
    None
}

/// `h_j` vectors for a contiguous range of indices plus the certified tail.
#[derive(Debug, Clone)]
struct CoboundaryRange {
    first: i64,
    h: Vec<Vec<f64>>,
    tail: f64,
    terms: usize,
}

/// Last index `k` for which both `f_k` and `P_{k-1}` exist.
fn last_term(chain: &ChainSpec, f: &ObservableFamily) -> Option<i64> {
    match (chain.last_time(), f.values.end_index()) {
        (None, None) => None,
        (Some(a), None) => Some(a),
        (None, Some(b)) => Some(b - 1),
        (Some(a), Some(b)) => Some(a.min(b - 1)),
    }
}

struct Centered<'a> {
    chain: &'a ChainSpec,
    f: &'a ObservableFamily,
    laws: Vec<Vec<f64>>,
}

impl<'a> Centered<'a> {
    fn new(chain: &'a ChainSpec, f: &'a ObservableFamily) -> Self {
        Self { chain, f, laws: vec![chain.initial_law().as_slice().to_vec()] }
    }

    fn law(&mut self, index: i64) -> Result<&[f64], DecompositionError> {
        let law_index = self.chain.law_index();
        if index < law_index {
            return Err(DecompositionError::BeforeInitialLaw { index, law_index });
        }
        let offset = (index - law_index) as usize;
        while self.laws.len() <= offset {
            let k = law_index + self.laws.len() as i64 - 1;
            let next = self.chain.kernel(k)?.push_forward(self.laws.last().expect("nonempty"));
            self.laws.push(next);
        }
        Ok(&self.laws[offset])
    }

    fn mean(&mut self, index: i64) -> Result<f64, DecompositionError> {
        let f = self.f.checked(self.chain, index)?;
        Ok(dot(self.law(index)?, f))
    }

    fn centered(&mut self, index: i64) -> Result<Vec<f64>, DecompositionError> {
        let mean = self.mean(index)?;
        let f = self.f.checked(self.chain, index)?;
        Ok(f.iter().map(|v| v - mean).collect())
    }
}

fn coboundary_range(
    chain: &ChainSpec,
    f: &ObservableFamily,
    lo: i64,
    hi: i64,
    truncation: Truncation,
    centered: &mut Centered<'_>,
) -> Result<CoboundaryRange, DecompositionError> {
    if hi < lo {
        return Err(DecompositionError::EmptyRange { first: lo, last: hi });
    }
    if lo < chain.law_index() {
        return Err(DecompositionError::BeforeInitialLaw { index: lo, law_index: chain.law_index() });
    }
    let osc = f.oscillation();
    let last = last_term(chain, f);
    let block = if osc == 0.0 { None } else { block_contraction(chain) };
    // Terms after E are each at most osc·δ(P_{j,E−j})·δ(P_{E,i}), and
    // Σ_{i≥1} δ(P_{E,i}) ≤ L/(1−ρ); a finite chain also caps the count.
    let tail_factor = |delta: f64, remaining: Option<i64>| -> Result<f64, DecompositionError> {
        if osc == 0.0 || delta == 0.0 || remaining.is_some_and(|r| r <= 0) {
            return Ok(0.0);
        }
        let terms = match (block, remaining) {
            (Some((l, rho)), Some(r)) => (l as f64 / (1.0 - rho)).min(r as f64),
            (Some((l, rho)), None) => l as f64 / (1.0 - rho),
            (None, Some(r)) => r as f64,
            (None, None) => return Err(ChainError::BoundDoesNotVanish { best_bound: delta }.into()),
        };
        Ok(osc * delta * terms)
    };

    match truncation {
        Truncation::Adaptive(tol) => {
            if !(tol > 0.0) {
                return Err(ChainError::BadTolerance(tol).into());
            }
            // Extend E past `hi` until the tail certified at `hi` meets `tol`.
            let cap = chain.horizon_cap();
            let mut window = StochasticKernel::identity(chain.space_size(hi).ok_or(ChainError::IndexOutOfRange { index: hi })?);
            let mut end = hi;
            let mut tail = tail_factor(1.0, last.map(|l| l - hi))?;
            while tail > tol {
                if (end - hi) as usize >= cap {
                    return Err(ChainError::HorizonCap { requested: cap + 1, cap }.into());
                }
                window = window.compose_unchecked(chain.kernel(end)?);
                end += 1;
                tail = tail_factor(window.dobrushin_coefficient(), last.map(|l| l - end))?;
            }
            let end = last.map_or(end, |l| end.min(l)).max(lo);
            // Backward recursion h_{k-1} = P_{k-1}(f̃_k + h_k) from h_E = 0.
            let zeros = |k: i64| -> Result<Vec<f64>, DecompositionError> {
                Ok(vec![0.0; chain.space_size(k).ok_or(ChainError::IndexOutOfRange { index: k })?])
            };
            let mut h = zeros(end)?;
            let mut out = vec![Vec::new(); (hi - lo + 1) as usize];
            for k in end.max(lo)..=hi {
                out[(k - lo) as usize] = zeros(k)?;
            }
            for k in (lo + 1..=end).rev() {
                let ft = centered.centered(k)?;
                let v: Vec<f64> = ft.iter().zip(&h).map(|(a, b)| a + b).collect();
                h = chain.kernel(k - 1)?.apply(&v);
                if k - 1 <= hi {
                    out[(k - 1 - lo) as usize] = h.clone();
                }
            }
            Ok(CoboundaryRange { first: lo, h: out, tail, terms: (end - hi).max(0) as usize })
        }
        Truncation::Fixed(terms) => {
            let mut out = Vec::with_capacity((hi - lo + 1) as usize);
            let mut worst: f64 = 0.0;
            for j in lo..=hi {
                let stop = match last {
                    Some(l) => (j + terms as i64).min(l),
                    None => j + terms as i64,
                };
                let mut h = vec![0.0; chain.space_size(stop.max(j)).ok_or(ChainError::IndexOutOfRange { index: stop })?];
                for k in (j + 1..=stop).rev() {
                    let ft = centered.centered(k)?;
                    let v: Vec<f64> = ft.iter().zip(&h).map(|(a, b)| a + b).collect();
                    h = chain.kernel(k - 1)?.apply(&v);
                }
                let remaining = last.map(|l| l - j - terms as i64);
                if remaining.is_none_or(|r| r > 0) && osc > 0.0 {
                    let delta = window_kernel(chain, j, terms)?.dobrushin_coefficient();
                    worst = worst.max(tail_factor(delta, remaining)?);
                }
                out.push(h);
            }
            Ok(CoboundaryRange { first: lo, h: out, tail: worst, terms })
        }
    }
}

/// `h_j` and the certified bound on the discarded tail of its series.
pub fn coboundary(
    chain: &ChainSpec,
    f: &ObservableFamily,
    index: i64,
    truncation: Truncation,
) -> Result<(Vec<f64>, f64), DecompositionError> {
    let mut centered = Centered::new(chain, f);
    let r = coboundary_range(chain, f, index, index, truncation, &mut centered)?;
    Ok((r.h.into_iter().next().expect("one index"), r.tail))
}

/// `M_j(x, y)` for `x` in the space at `j − 1` and `y` in the space at `j`.
pub fn martingale_part(
    chain: &ChainSpec,
    f: &ObservableFamily,
    index: i64,
    truncation: Truncation,
) -> Result<Vec<Vec<f64>>, DecompositionError> {
    let d = decompose(chain, f, index, index, truncation)?;
    Ok(d.martingale(index).expect("index in range").to_vec())
}

/// Decomposition over `first ..= last`: `h` for `first − 1 ..= last` and
/// `M` for `first ..= last`.
#[derive(Debug, Clone)]
pub struct CoboundaryDecomposition {
    first: i64,
    h: Vec<Vec<f64>>,
    martingale: Vec<Vec<Vec<f64>>>,
    centered: Vec<Vec<f64>>,
    centering: Vec<f64>,
    sup_martingale: f64,
    pub truncation_tail: f64,
    pub terms: usize,
}

impl CoboundaryDecomposition {
    pub fn first(&self) -> i64 {
        self.first
    }

    pub fn last(&self) -> i64 {
        self.first + self.martingale.len() as i64 - 1
    }

    fn slot(&self, index: i64, offset: i64, len: usize) -> Option<usize> {
        let o = usize::try_from(index - self.first + offset).ok()?;
        (o < len).then_some(o)
    }

    /// `h_j` for `j ∈ first − 1 ..= last`.
    pub fn h(&self, index: i64) -> Option<&[f64]> {
        self.slot(index, 1, self.h.len()).map(|o| self.h[o].as_slice())
    }

    /// `M_j` rows indexed by the state at `j − 1`.
    pub fn martingale(&self, index: i64) -> Option<&[Vec<f64>]> {
        self.slot(index, 0, self.martingale.len()).map(|o| self.martingale[o].as_slice())
    }

    /// `E f_j(X_j)` for `j ∈ first − 1 ..= last`.
    pub fn centering(&self, index: i64) -> Option<f64> {
        self.slot(index, 1, self.centering.len()).map(|o| self.centering[o])
    }

    pub fn sup_h(&self) -> f64 {
        self.h.iter().map(|v| sup_norm(v)).fold(0.0, f64::max)
    }

    /// `sup |M_j(x, y)|` over transitions with `P_{j-1}(x, y) > 0`.
    pub fn sup_martingale(&self) -> f64 {
        self.sup_martingale
    }

    /// `max |f̃_j(y) − M_j(x,y) − h_{j-1}(x) + h_j(y)|` over `(x, y)` with
    /// `P_{j-1}(x, y) > 0`.
    pub fn identity_residual(&self, chain: &ChainSpec) -> Result<f64, ChainError> {
        let mut worst: f64 = 0.0;
        for j in self.first..=self.last() {
            let p = chain.kernel(j - 1)?;
            let (hp, hj) = (self.h(j - 1).expect("range"), self.h(j).expect("range"));
            let ft = &self.centered[(j - self.first) as usize];
            let m = self.martingale(j).expect("range");
            for (x, row) in m.iter().enumerate() {
                for (y, mv) in row.iter().enumerate() {
                    if p.get(x, y) > 0.0 {
                        worst = worst.max((ft[y] - mv - hp[x] + hj[y]).abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// `max_x |Σ_y P_{j-1}(x,y) M_j(x,y)|` over the range.
    pub fn martingale_residual(&self, chain: &ChainSpec) -> Result<f64, ChainError> {
        let mut worst: f64 = 0.0;
        for j in self.first..=self.last() {
            let p = chain.kernel(j - 1)?;
            for (x, row) in self.martingale(j).expect("range").iter().enumerate() {
                worst = worst.max(dot(p.row(x), row).abs());
            }
        }
        Ok(worst)
    }
}

pub fn decompose(
    chain: &ChainSpec,
    f: &ObservableFamily,
    first: i64,
    last: i64,
    truncation: Truncation,
) -> Result<CoboundaryDecomposition, DecompositionError> {
    if last < first {
        return Err(DecompositionError::EmptyRange { first, last });
    }
    let mut centered = Centered::new(chain, f);
    let range = coboundary_range(chain, f, first - 1, last, truncation, &mut centered)?;
    debug_assert_eq!(range.first, first - 1);
    let mut martingale = Vec::with_capacity((last - first + 1) as usize);
    let mut centered_values = Vec::with_capacity(martingale.capacity());
    let mut centering = vec![centered.mean(first - 1)?];
    let mut sup_martingale: f64 = 0.0;
    for j in first..=last {
        let ft = centered.centered(j)?;
        centering.push(centered.mean(j)?);
        let (hp, hj) = (&range.h[(j - first) as usize], &range.h[(j - first + 1) as usize]);
        let m: Vec<Vec<f64>> = hp.iter().map(|hx| ft.iter().zip(hj).map(|(a, b)| a + b - hx).collect()).collect();
        let p = chain.kernel(j - 1)?;
        for (x, row) in m.iter().enumerate() {
            for (y, v) in row.iter().enumerate() {
                if p.get(x, y) > 0.0 {
                    sup_martingale = sup_martingale.max(v.abs());
                }
            }
        }
        martingale.push(m);
        centered_values.push(ft);
    }
    Ok(CoboundaryDecomposition {
        first,
        h: range.h,
        martingale,
        centered: centered_values,
        centering,
        sup_martingale,
        truncation_tail: range.tail,
        terms: range.terms,
    })
}

/// Exact moments of `S_n = Σ_{i<n} f_{l+i}(X_{l+i})`, `l` the law index.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile {
    /// `Var(S_n)` for `n = 0 ..= horizon`.
    pub sigma_sq: Vec<f64>,
    /// `E S_n` for `n = 0 ..= horizon`.
    pub means: Vec<f64>,
    /// `(σ²_n − σ²_{⌊n/2⌋}) / (n − ⌊n/2⌋)` at the horizon.
    pub asymptotic_slope: Option<f64>,
}

impl VarianceProfile {
    pub fn horizon(&self) -> usize {
        self.sigma_sq.len() - 1
    }

    pub fn sigma(&self, n: usize) -> f64 {
        self.sigma_sq[n].max(0.0).sqrt()
    }
}

/// Forward propagation of the law of `X_j` and of
/// `g_j(x) = E[(S_j − E S_j)·1{X_j = x}]`; cost `O(n·|state|²)`.
pub fn exact_variance(chain: &ChainSpec, f: &ObservableFamily, horizon: usize) -> Result<VarianceProfile, DecompositionError> {
    let start = chain.law_index();
    let mut law = chain.initial_law().as_slice().to_vec();
    let mut g = vec![0.0; law.len()];
    let mut sigma_sq = Vec::with_capacity(horizon + 1);
    let mut means = Vec::with_capacity(horizon + 1);
    let (mut var, mut mean) = (0.0, 0.0);
    sigma_sq.push(0.0);
    means.push(0.0);
    for i in 0..horizon {
        let j = start + i as i64;
        let fj = f.checked(chain, j)?;
        let mu = dot(&law, fj);
        let ft: Vec<f64> = fj.iter().map(|v| v - mu).collect();
        let cross = dot(&g, &ft);
        let own: f64 = law.iter().zip(&ft).map(|(p, v)| p * v * v).sum();
        var += 2.0 * cross + own;
        mean += mu;
        sigma_sq.push(var.max(0.0));
        means.push(mean);
        if i + 1 < horizon {
            let p = chain.kernel(j)?;
            let carried: Vec<f64> = g.iter().zip(&law).zip(&ft).map(|((gx, px), fx)| gx + px * fx).collect();
            g = p.push_forward(&carried);
            law = p.push_forward(&law);
        }
    }
    let asymptotic_slope = (horizon >= 2).then(|| {
        let half = horizon / 2;
        (sigma_sq[horizon] - sigma_sq[half]) / (horizon - half) as f64
    });
    Ok(VarianceProfile { sigma_sq, means, asymptotic_slope })
}

/// Comparison of `Var(S_n)` with `Σ_j Var(M_j)`.
#[derive(Debug, Clone)]
pub struct VarianceBridge {
    pub sigma_sq: Vec<f64>,
    /// Partial sums `Σ_{i<n} Var(M_{l+i})`, `n = 0 ..= horizon`; the first
    /// term is `Var(f̃_l + h_l)`.
    pub martingale_variance: Vec<f64>,
    pub sup_h: f64,
    pub sup_martingale: f64,
    pub max_gap: f64,
    pub allowance: f64,
    pub truncation_tail: f64,
}

impl VarianceBridge {
    pub fn holds(&self) -> bool {
        self.max_gap <= self.allowance
    }
}

pub fn variance_bridge(
    chain: &ChainSpec,
    f: &ObservableFamily,
    horizon: usize,
    truncation: Truncation,
) -> Result<VarianceBridge, DecompositionError> {
    let profile = exact_variance(chain, f, horizon)?;
    let l = chain.law_index();
    let mut martingale_variance = vec![0.0];
    let (mut sup_h, mut sup_m, mut tail) = (0.0f64, 0.0f64, 0.0f64);
    if horizon >= 1 {
        let mut centered = Centered::new(chain, f);
        let h0 = coboundary_range(chain, f, l, l, truncation, &mut centered)?;
        let start: Vec<f64> = centered.centered(l)?.iter().zip(&h0.h[0]).map(|(a, b)| a + b).collect();
        let law = centered.law(l)?.to_vec();
        let mean = dot(&law, &start);
        let v0: f64 = law.iter().zip(&start).map(|(p, v)| p * (v - mean) * (v - mean)).sum();
        martingale_variance.push(v0);
        sup_h = sup_norm(&h0.h[0]);
        sup_m = sup_norm(&start);
        tail = h0.tail;
    }
    if horizon >= 2 {
        let d = decompose(chain, f, l + 1, l + horizon as i64 - 1, truncation)?;
        let mut centered = Centered::new(chain, f);
        let mut acc = *martingale_variance.last().expect("nonempty");
        for j in d.first()..=d.last() {
            let law = centered.law(j - 1)?.to_vec();
            let p = chain.kernel(j - 1)?;
            let m = d.martingale(j).expect("range");
            let v: f64 = law
                .iter()
                .zip(m)
                .enumerate()
                .map(|(x, (px, row))| px * row.iter().enumerate().map(|(y, v)| p.get(x, y) * v * v).sum::<f64>())
                .sum();
            acc += v;
            martingale_variance.push(acc);
        }
        sup_h = sup_h.max(d.sup_h());
        sup_m = sup_m.max(d.sup_martingale());
        tail = tail.max(d.truncation_tail);
    }
    let max_gap = profile
        .sigma_sq
        .iter()
        .zip(&martingale_variance)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(VarianceBridge {
        sigma_sq: profile.sigma_sq,
        martingale_variance,
        sup_h,
        sup_martingale: sup_m,
        max_gap,
        allowance: BRIDGE_CONSTANT * sup_h * (sup_h + sup_m),
        truncation_tail: tail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceClass {
    Bounded,
    Growing,
}

#[derive(Debug, Clone)]
pub struct VarianceReport {
    pub sigma_sq: Vec<f64>,
    pub martingale_variance_sum: f64,
    pub sup_h: f64,
    pub sup_martingale: f64,
    pub truncation_tail: f64,
    pub classification: VarianceClass,
    pub asymptotic_slope: Option<f64>,
}

/// Finite-horizon bounded/growing classification of `Var(S_n)`.
///
/// Growing: the median increment `m` over the last quartile is positive and
/// `σ²_k > 0.5·k·m` on the whole last half. Bounded: otherwise, if the
/// martingale variances stop accumulating over the last half and `σ²`
/// stays inside the bridge allowance.
pub fn variance_classification(
    chain: &ChainSpec,
    f: &ObservableFamily,
    horizon: usize,
    truncation: Truncation,
) -> Result<VarianceReport, DecompositionError> {
    if horizon < 4 {
        return Err(DecompositionError::Inconclusive { horizon });
    }
    let bridge = variance_bridge(chain, f, horizon, truncation)?;
    let s = &bridge.sigma_sq;
    let scale = f.sup_bound().max(1.0).powi(2);
    let floor = 1e-9 * scale;

    let mut increments: Vec<f64> = (3 * horizon / 4 + 1..=horizon).map(|k| s[k] - s[k - 1]).collect();
    increments.sort_by(f64::total_cmp);
    let median = increments[increments.len() / 2];
    let growing = median > floor && (horizon / 2..=horizon).all(|k| s[k] > 0.5 * k as f64 * median);

    let asymptotic_slope = {
        let half = horizon / 2;
        Some((s[horizon] - s[half]) / (horizon - half) as f64)
    };
    let mv = &bridge.martingale_variance;
    let classification = if growing {
        VarianceClass::Growing
    } else {
        let stalled = (mv[horizon] - mv[horizon / 2]).abs() <= floor + 2.0 * bridge.truncation_tail * scale;
        let contained = s.iter().all(|v| *v <= bridge.allowance + floor);
        if stalled && contained {
            VarianceClass::Bounded
        } else {
            return Err(DecompositionError::Inconclusive { horizon });
        }
    };
    Ok(VarianceReport {
        sigma_sq: bridge.sigma_sq.clone(),
        martingale_variance_sum: mv[horizon],
        sup_h: bridge.sup_h,
        sup_martingale: bridge.sup_martingale,
        truncation_tail: bridge.truncation_tail,
        classification,
        asymptotic_slope,
    })
}

/// The pair chain `Z_j = (X_j, X_{j+1})` on `s_j × s_{j+1}` states, pair
/// `(a, b)` encoded as `a·s_{j+1} + b`.
pub fn lift_pairs(chain: &ChainSpec) -> Result<ChainSpec, ChainError> {
    let lift = |i: i64| -> Result<StochasticKernel, ChainError> {
        let (p, q) = (chain.kernel(i)?, chain.kernel(i + 1)?);
        let (sa, sb, sc) = (p.source_size(), p.target_size(), q.target_size());
        let mut rows = vec![vec![0.0; sb * sc]; sa * sb];
        for a in 0..sa {
            for b in 0..sb {
                for c in 0..sc {
                    rows[a * sb + b][b * sc + c] = q.get(b, c);
                }
            }
        }
        Ok(StochasticKernel::new(rows)?)
    };
    let kernels = match chain.kernels() {
        IndexedFamily::Periodic { items } => {
            IndexedFamily::periodic((0..items.len() as i64).map(lift).collect::<Result<_, _>>()?)
        }
        IndexedFamily::Window { start, items } => {
            let n = items.len().saturating_sub(1) as i64;
            IndexedFamily::window(*start, (*start..*start + n).map(lift).collect::<Result<_, _>>()?)
        }
    };
    let l = chain.law_index();
    let p = chain.kernel(l)?;
    let law = chain.initial_law();
    let mut start = Vec::with_capacity(p.source_size() * p.target_size());
    for a in 0..p.source_size() {
        for b in 0..p.target_size() {
            start.push(law[a] * p.get(a, b));
        }
    }
    let start = crate::kernel::ProbabilityVector::new(start)?;
    ChainSpec::with_law_index(kernels, start, l)
}

/// `f_j(a, b) = g_j(a) − g_{j+1}(b)` on the pair chain, so that
/// `S_n = g_l(X_l) − g_{l+n}(X_{l+n})`.
pub fn telescoping_observable(g: &IndexedFamily<Vec<f64>>) -> Result<ObservableFamily, DecompositionError> {
    let pair = |i: i64| -> Result<Vec<f64>, DecompositionError> {
        let a = g.get(i).ok_or(DecompositionError::ObservableOutOfRange { index: i })?;
        let b = g.get(i + 1).ok_or(DecompositionError::ObservableOutOfRange { index: i + 1 })?;
        Ok(a.iter().flat_map(|ga| b.iter().map(move |gb| ga - gb)).collect())
    };
    let values = match g {
        IndexedFamily::Periodic { items } => {
            IndexedFamily::periodic((0..items.len() as i64).map(pair).collect::<Result<_, _>>()?)
        }
        IndexedFamily::Window { start, items } => {
            let n = items.len().saturating_sub(1) as i64;
            IndexedFamily::window(*start, (*start..*start + n).map(pair).collect::<Result<_, _>>()?)
        }
    };
    ObservableFamily::new(values)
}
