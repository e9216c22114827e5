//! Finite-state stochastic kernels.
//!
//! Kernels are dense row-major matrices: row `x` is the law of the next
//! state given the current state `x`. Everything here is pure; values are
//! immutable once constructed.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Row sums within this distance of 1 are accepted as-is.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Row sums within this distance of 1 are silently renormalized; anything
/// further away is rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("matrix has no rows")]
    Empty,
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, not 1")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("kernel is {rows}x{cols}, expected a square kernel")]
    NotSquare { rows: usize, cols: usize },
    #[error("threshold {0} must lie in (0, 1)")]
    BadThreshold(f64),
    #[error("no lag up to {cap} reaches the threshold (best gamma {best_gamma})")]
    CapExceeded { cap: usize, best_gamma: f64 },
    #[error("stationary law is not unique")]
    NoUniqueStationary,
}

/// A finite state space. Labels are cosmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    size: usize,
    labels: Option<Vec<String>>,
}

impl StateSpace {
    pub fn new(size: usize) -> Result<Self, KernelError> {
        if size == 0 {
            return Err(KernelError::Empty);
        }
        Ok(Self { size, labels: None })
    }

    pub fn labelled(labels: Vec<String>) -> Result<Self, KernelError> {
        if labels.is_empty() {
            return Err(KernelError::Empty);
        }
        Ok(Self { size: labels.len(), labels: Some(labels) })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self, state: usize) -> Option<&str> {
        self.labels.as_ref().and_then(|l| l.get(state)).map(String::as_str)
    }
}

/// Checks one row against the stochasticity tolerances, renormalizing small
/// drift in place.
fn check_row(row_index: usize, row: &mut [f64]) -> Result<(), KernelError> {
    for (col, &v) in row.iter().enumerate() {
        if !v.is_finite() {
            return Err(KernelError::NonFinite { row: row_index, col });
        }
        if v < 0.0 {
            return Err(KernelError::NegativeEntry { row: row_index, col, value: v });
        }
    }
    let sum: f64 = row.iter().sum();
    let dev = (sum - 1.0).abs();
    if dev > RENORMALIZE_TOL {
        return Err(KernelError::RowSumViolation { row: row_index, sum });
    }
    if dev > STOCHASTIC_TOL {
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(())
}

/// A probability vector over a finite state space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(mut weights: Vec<f64>) -> Result<Self, KernelError> {
        if weights.is_empty() {
            return Err(KernelError::Empty);
        }
        check_row(0, &mut weights)?;
        Ok(Self(weights))
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0, "empty state space");
        Self(vec![1.0 / size as f64; size])
    }

    pub fn point_mass(size: usize, state: usize) -> Self {
        let mut w = vec![0.0; size];
        w[state] = 1.0;
        Self(w)
    }

    /// Wraps weights that are known to be a probability vector up to
    /// floating-point drift (e.g. a row of a computed product).
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Expectation of a function over the states.
    pub fn expect(&self, f: &[f64]) -> f64 {
        dot(&self.0, f)
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Total variation between two weight vectors of equal length: half the
/// L1 distance, which on a finite space is the largest discrepancy over
/// events.
pub(crate) fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Total variation distance between two laws on the same space.
pub fn tv_distance(a: &ProbabilityVector, b: &ProbabilityVector) -> Result<f64, KernelError> {
    if a.len() != b.len() {
        return Err(KernelError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    Ok(tv(a.as_slice(), b.as_slice()).min(1.0))
}

/// A row-stochastic matrix mapping laws on `source` to laws on `target`.
#[derive(Clone, PartialEq)]
pub struct StochasticKernel {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for StochasticKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.row_iter()).finish()
    }
}

impl StochasticKernel {
    /// Validates a rectangular matrix as a stochastic kernel.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, KernelError> {
        let n = rows.len();
        if n == 0 {
            return Err(KernelError::Empty);
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(KernelError::Empty);
        }
        let mut data = Vec::with_capacity(n * cols);
        for (i, mut row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(KernelError::Ragged { row: i, expected: cols, found: row.len() });
            }
            check_row(i, &mut row)?;
            data.extend_from_slice(&row);
        }
        Ok(Self { rows: n, cols, data })
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        Self { rows: size, cols: size, data }
    }

    /// Every row equal to `law`.
    pub fn rank_one(rows: usize, law: &ProbabilityVector) -> Self {
        let mut data = Vec::with_capacity(rows * law.len());
        for _ in 0..rows {
            data.extend_from_slice(law.as_slice());
        }
        Self { rows, cols: law.len(), data }
    }

    /// Builds a kernel from row-major data that is stochastic up to
    /// floating-point drift.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn source_size(&self) -> usize {
        self.rows
    }

    pub fn target_size(&self) -> usize {
        self.cols
    }

    pub fn source(&self) -> StateSpace {
        StateSpace { size: self.rows, labels: None }
    }

    pub fn target(&self) -> StateSpace {
        StateSpace { size: self.cols, labels: None }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.cols + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.cols..(x + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.row_iter().map(<[f64]>::to_vec).collect()
    }

    /// Matrix product `self ∘ second`: first take a step with `self`, then
    /// with `second`.
    pub fn compose(&self, second: &StochasticKernel) -> Result<StochasticKernel, KernelError> {
        if self.cols != second.rows {
            return Err(KernelError::DimensionMismatch { left: self.cols, right: second.rows });
        }
        Ok(self.compose_unchecked(second))
    }

    pub(crate) fn compose_unchecked(&self, second: &StochasticKernel) -> StochasticKernel {
        let (n, m, k) = (self.rows, second.cols, self.cols);
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            let out = &mut data[i * m..(i + 1) * m];
            for z in 0..k {
                let a = self.data[i * k + z];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(second.row(z)) {
                    *o += a * b;
                }
            }
        }
        StochasticKernel { rows: n, cols: m, data }
    }

    /// `n`-th matrix power of a square kernel; the zeroth power is the
    /// identity.
    pub fn power(&self, n: usize) -> Result<StochasticKernel, KernelError> {
        if !self.is_square() {
            return Err(KernelError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let mut acc = StochasticKernel::identity(self.rows);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose_unchecked(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.compose_unchecked(&base);
            }
        }
        Ok(acc)
    }

    /// Pushes a law forward one step (`μ ↦ μP`).
    pub fn push_forward(&self, law: &[f64]) -> Vec<f64> {
        assert_eq!(law.len(), self.rows, "law has the wrong dimension");
        let mut out = vec![0.0; self.cols];
        for (x, &w) in law.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.row(x)) {
                *o += w * p;
            }
        }
        out
    }

    /// Conditional expectation of a function of the next state
    /// (`g ↦ Pg`).
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.cols, "function has the wrong dimension");
        self.row_iter().map(|r| dot(r, g)).collect()
    }

    /// Rescales every row to sum to exactly one (up to rounding).
    pub(crate) fn renormalize_rows(&mut self) {
        for row in self.data.chunks_exact_mut(self.cols) {
            let s: f64 = row.iter().sum();
            if s > 0.0 && s != 1.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
    }

    /// Largest total variation distance between two rows. This is the
    /// exact worst-case contraction factor of the kernel acting on laws.
    pub fn dobrushin_coefficient(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.rows {
            for b in a + 1..self.rows {
                worst = worst.max(tv(self.row(a), self.row(b)));
            }
        }
        worst.min(1.0)
    }

    /// Row average, a law on the target space.
    pub fn row_average(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in self.row_iter() {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        let inv = 1.0 / self.rows as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        out
    }

    /// Stationary law of an irreducible square kernel, via a dense linear
    /// solve of `π(P − I) = 0, Σπ = 1`.
    pub fn stationary(&self) -> Result<ProbabilityVector, KernelError> {
        if !self.is_square() {
            return Err(KernelError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let n = self.rows;
        // Rows 0..n of the system are (P^T - I) π = 0; the extra row pins the mass.
        let mut a = DMatrix::<f64>::zeros(n + 1, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = self.get(j, i) - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..n {
            a[(n, j)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(n + 1);
        b[n] = 1.0;
        let svd = a.svd(true, true);
        let smallest = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if smallest < 1e-10 {
            return Err(KernelError::NoUniqueStationary);
        }
        let pi = svd.solve(&b, 1e-14).map_err(|_| KernelError::NoUniqueStationary)?;
        let mut w: Vec<f64> = pi.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        Ok(ProbabilityVector(w))
    }
}

/// A Doeblin certificate `P = γ·(1 ⊗ m) + (1 − γ)·Q` for a kernel `P`
/// (itself the `lag`-step composition of some chain).
#[derive(Debug, Clone, PartialEq)]
pub struct MinorizationCertificate {
    pub gamma: f64,
    /// `None` exactly when `gamma == 0`: no common mass, no minorizer.
    pub minorizer: Option<ProbabilityVector>,
    pub residual: StochasticKernel,
    pub lag: usize,
}

impl MinorizationCertificate {
    /// Extracts the maximal certificate from columnwise minima.
    ///
    /// Any feasible `γ'·m'` must sit below every row, hence below the
    /// columnwise minimum, so `γ = Σ_y min_x P(x, y)` cannot be beaten.
    pub fn extract(kernel: &StochasticKernel, lag: usize) -> Self {
        let (rows, cols) = (kernel.rows, kernel.cols);
        let mut colmin = vec![f64::INFINITY; cols];
        for r in kernel.row_iter() {
            for (c, &v) in colmin.iter_mut().zip(r) {
                *c = c.min(v);
            }
        }
        let mass: f64 = colmin.iter().sum();
        let gamma = mass.min(1.0);
        let minorizer = (mass > 0.0)
            .then(|| ProbabilityVector(colmin.iter().map(|c| c / mass).collect()));
        if gamma >= 1.0 {
            return Self { gamma: 1.0, minorizer, residual: StochasticKernel::identity(rows).resized(rows, cols), lag };
        }
        let mut data = Vec::with_capacity(rows * cols);
        for (x, r) in kernel.row_iter().enumerate() {
            let excess: Vec<f64> = r.iter().zip(&colmin).map(|(p, c)| p - c).collect();
            let total: f64 = excess.iter().sum();
            if total > 0.0 {
                // Normalizing by the realized excess keeps the residual exactly
                // stochastic and the reconstruction error at the input's row-sum drift.
                data.extend(excess.iter().map(|e| e / total));
            } else {
                data.extend((0..cols).map(|y| if y == x % cols { 1.0 } else { 0.0 }));
            }
        }
        Self { gamma, minorizer, residual: StochasticKernel::from_raw(rows, cols, data), lag }
    }

    pub fn has_minorization(&self) -> bool {
        self.gamma > 0.0
    }

    /// `γ·(1 ⊗ m) + (1 − γ)·Q`, which must reproduce the certified kernel.
    pub fn reconstruct(&self) -> StochasticKernel {
        let (rows, cols) = (self.residual.rows, self.residual.cols);
        let mut data = Vec::with_capacity(rows * cols);
        for r in self.residual.row_iter() {
            for (y, q) in r.iter().enumerate() {
                let m = self.minorizer.as_ref().map_or(0.0, |m| m[y]);
                data.push(self.gamma * m + (1.0 - self.gamma) * q);
            }
        }
        StochasticKernel::from_raw(rows, cols, data)
    }
}

impl StochasticKernel {
    /// Identity-like kernel with the requested shape: state `x` maps to
    /// `x mod cols`. Square kernels get the identity.
    fn resized(self, rows: usize, cols: usize) -> StochasticKernel {
        if self.rows == rows && self.cols == cols {
            return self;
        }
        let mut data = vec![0.0; rows * cols];
        for x in 0..rows {
            data[x * cols + x % cols] = 1.0;
        }
        StochasticKernel { rows, cols, data }
    }
}

/// Maximal Doeblin certificate of `kernel`, labelled with the lag it
/// represents.
pub fn doeblin_extract(kernel: &StochasticKernel, lag: usize) -> MinorizationCertificate {
    MinorizationCertificate::extract(kernel, lag)
}

/// Smallest `n ≤ cap` whose `n`-step kernel carries a certificate with
/// `gamma ≥ threshold`.
pub fn minimal_doeblin_lag(
    kernel: &StochasticKernel,
    threshold: f64,
    cap: usize,
) -> Result<(usize, MinorizationCertificate), KernelError> {
    if !kernel.is_square() {
        return Err(KernelError::NotSquare { rows: kernel.rows, cols: kernel.cols });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(KernelError::BadThreshold(threshold));
    }
    let mut power = kernel.clone();
    let mut best: f64 = 0.0;
    for lag in 1..=cap {
        if lag > 1 {
            power = power.compose_unchecked(kernel);
        }
        let cert = MinorizationCertificate::extract(&power, lag);
        if cert.gamma >= threshold {
            return Ok((lag, cert));
        }
        best = best.max(cert.gamma);
    }
    Err(KernelError::CapExceeded { cap, best_gamma: best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k() -> StochasticKernel {
        StochasticKernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    fn assert_kernel_eq(a: &StochasticKernel, b: &[[f64; 2]; 2], tol: f64) {
        for x in 0..2 {
            for y in 0..2 {
                assert_abs_diff_eq!(a.get(x, y), b[x][y], epsilon = tol);
            }
        }
    }

    #[test]
    fn validation_accepts_and_rejects() {
        assert!(StochasticKernel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_ok());
        assert!(StochasticKernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).is_ok());
        match StochasticKernel::new(vec![vec![0.5, 0.6], vec![0.2, 0.8]]) {
            Err(KernelError::RowSumViolation { row: 0, sum }) => assert_abs_diff_eq!(sum, 1.1, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            StochasticKernel::new(vec![vec![1.2, -0.2], vec![0.5, 0.5]]),
            Err(KernelError::NegativeEntry { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            StochasticKernel::new(vec![vec![1.0], vec![0.5, 0.5]]),
            Err(KernelError::Ragged { row: 1, .. })
        ));
        assert!(matches!(StochasticKernel::new(vec![]), Err(KernelError::Empty)));
        assert!(matches!(
            StochasticKernel::new(vec![vec![f64::NAN, 1.0]]),
            Err(KernelError::NonFinite { .. })
        ));
    }

    #[test]
    fn small_drift_is_renormalized() {
        let kern = StochasticKernel::new(vec![vec![0.5 + 5e-10, 0.5]]).unwrap();
        assert_abs_diff_eq!(kern.row(0).iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(StochasticKernel::new(vec![vec![0.5 + 5e-9, 0.5]]).is_err());
    }

    #[test]
    fn compose_examples() {
        let id = StochasticKernel::identity(2);
        assert_eq!(id.compose(&k()).unwrap(), k());
        let half = StochasticKernel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_kernel_eq(&half.compose(&k()).unwrap(), &[[0.55, 0.45], [0.55, 0.45]], 1e-15);
        assert_kernel_eq(&k().compose(&k()).unwrap(), &[[0.83, 0.17], [0.34, 0.66]], 1e-15);
        let tall = StochasticKernel::new(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(tall.compose(&k()), Err(KernelError::DimensionMismatch { left: 3, right: 2 })));
    }

    #[test]
    fn power_matches_repeated_composition() {
        let p5 = k().power(5).unwrap();
        let mut slow = StochasticKernel::identity(2);
        for _ in 0..5 {
            slow = slow.compose(&k()).unwrap();
        }
        for x in 0..2 {
            for y in 0..2 {
                assert_abs_diff_eq!(p5.get(x, y), slow.get(x, y), epsilon = 1e-15);
            }
        }
        assert_eq!(k().power(0).unwrap(), StochasticKernel::identity(2));
    }

    #[test]
    fn tv_examples() {
        let a = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let b = ProbabilityVector::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        let c = ProbabilityVector::new(vec![0.7, 0.3]).unwrap();
        let d = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(tv_distance(&c, &d).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(tv_distance(&c, &c).unwrap(), 0.0);
        let e = ProbabilityVector::uniform(3);
        assert!(tv_distance(&c, &e).is_err());
    }

    #[test]
    fn extract_reference_kernel() {
        let cert = doeblin_extract(&k(), 1);
        assert_abs_diff_eq!(cert.gamma, 0.3, epsilon = 1e-15);
        let m = cert.minorizer.as_ref().unwrap();
        assert_abs_diff_eq!(m[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_kernel_eq(&cert.residual, &[[1.0, 0.0], [0.0, 1.0]], 1e-15);
    }

    #[test]
    fn extract_degenerate_cases() {
        let cert = doeblin_extract(&StochasticKernel::identity(2), 1);
        assert_eq!(cert.gamma, 0.0);
        assert!(cert.minorizer.is_none());
        let half = StochasticKernel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let cert = doeblin_extract(&half, 1);
        assert_eq!(cert.gamma, 1.0);
        assert_eq!(cert.minorizer.unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(cert.residual, StochasticKernel::identity(2));
    }

    #[test]
    fn extract_rectangular_rank_one() {
        let law = ProbabilityVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let cert = doeblin_extract(&StochasticKernel::rank_one(2, &law), 1);
        assert_eq!(cert.gamma, 1.0);
        assert_eq!(cert.residual.source_size(), 2);
        assert_eq!(cert.residual.target_size(), 3);
    }

    #[test]
    fn minimal_lag_examples() {
        let (lag, cert) = minimal_doeblin_lag(&k(), 0.25, 8).unwrap();
        assert_eq!(lag, 1);
        assert_abs_diff_eq!(cert.gamma, 0.3, epsilon = 1e-15);
        let flip = StochasticKernel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(
            minimal_doeblin_lag(&flip, 0.1, 8),
            Err(KernelError::CapExceeded { cap: 8, best_gamma: 0.0 })
        );
        assert!(matches!(
            minimal_doeblin_lag(&StochasticKernel::identity(2), 0.1, 8),
            Err(KernelError::CapExceeded { cap: 8, .. })
        ));
        // Every column of K has a zero, but K^2 is strictly positive.
        let lazy = StochasticKernel::new(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]]).unwrap();
        let (lag, cert) = minimal_doeblin_lag(&lazy, 0.4, 8).unwrap();
        assert_eq!(lag, 2);
        assert_abs_diff_eq!(cert.gamma, 0.75, epsilon = 1e-15);
        assert!(minimal_doeblin_lag(&k(), 1.0, 8).is_err());
    }

    #[test]
    fn stationary_of_reference_kernel() {
        let pi = k().stationary().unwrap();
        assert_abs_diff_eq!(pi[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(StochasticKernel::identity(2).stationary(), Err(KernelError::NoUniqueStationary));
    }

    #[test]
    fn dobrushin_examples() {
        assert_abs_diff_eq!(k().dobrushin_coefficient(), 0.7, epsilon = 1e-15);
        assert_eq!(StochasticKernel::identity(3).dobrushin_coefficient(), 1.0);
    }
}
