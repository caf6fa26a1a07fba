//! Dense third-order tensors with deterministic reductions.
//!
//! `Tensor3` carries every grid-shaped quantity in this crate: transport
//! plans, cost tensors, prox centers, capacity bounds and dual tensors.
//! Data is stored flat in row-major order (entry `(r, s, t)` lives at
//! `(r * n2 + s) * n3 + t`) and every reduction walks the buffer in
//! ascending flat-index order, so repeated evaluations are bit-identical.
//! Matrix problems use `n3 == 1`.
//!
//! Entries equal to `f64::INFINITY` are valid and act as "no upper bound"
//! sentinels; `exp`/`log`/`min` treat them as limits.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tensor dimensions `(n1, n2, n3)`, all positive.
pub type Dims = (usize, usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dims: Dims,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(Error::ZeroDim(dims));
        }
        let want = dims.0 * dims.1 * dims.2;
        if data.len() != want {
            return Err(Error::DataLength {
                dims,
                len: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn full(dims: Dims, value: f64) -> Self {
        Self::new(dims, vec![value; dims.0 * dims.1 * dims.2]).expect("positive dims")
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::full(dims, 0.0)
    }

    pub fn ones(dims: Dims) -> Self {
        Self::full(dims, 1.0)
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for r in 0..dims.0 {
            for s in 0..dims.1 {
                for t in 0..dims.2 {
                    data.push(f(r, s, t));
                }
            }
        }
        Self { dims, data }
    }

    /// Outer product of two vectors as an `(|a|, |b|, 1)` tensor.
    pub fn outer2(a: &[f64], b: &[f64]) -> Self {
        Self::from_fn((a.len(), b.len(), 1), |r, s, _| a[r] * b[s])
    }

    /// Outer product of three vectors.
    pub fn outer3(a: &[f64], b: &[f64], c: &[f64]) -> Self {
        Self::from_fn((a.len(), b.len(), c.len()), |r, s, t| a[r] * b[s] * c[t])
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn flat_index(&self, r: usize, s: usize, t: usize) -> usize {
        (r * self.dims.1 + s) * self.dims.2 + t
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        Ok(())
    }

    /// `sum_{r,s,t} X_{rst} Y_{rst}`, accumulated in ascending flat order.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_dims(other)?;
        let mut acc = 0.0;
        for (x, y) in self.data.iter().zip(&other.data) {
            acc += x * y;
        }
        Ok(acc)
    }

    pub fn sum(&self) -> f64 {
        let mut acc = 0.0;
        for x in &self.data {
            acc += x;
        }
        acc
    }

    pub fn norm_fro(&self) -> f64 {
        let mut acc = 0.0;
        for x in &self.data {
            acc += x * x;
        }
        acc.sqrt()
    }

    pub fn norm1(&self) -> f64 {
        let mut acc = 0.0;
        for x in &self.data {
            acc += x.abs();
        }
        acc
    }

    pub fn max_entry(&self) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for &x in &self.data {
            if x > m {
                m = x;
            }
        }
        m
    }

    pub fn min_entry(&self) -> f64 {
        let mut m = f64::INFINITY;
        for &x in &self.data {
            if x < m {
                m = x;
            }
        }
        m
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_dims(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(Self {
            dims: self.dims,
            data,
        })
    }

    /// Hadamard (entrywise) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x * y)
    }

    /// Entrywise quotient; every divisor entry must be nonzero.
    pub fn quotient(&self, other: &Self) -> Result<Self> {
        self.check_dims(other)?;
        if let Some(index) = other.data.iter().position(|&y| y == 0.0) {
            return Err(Error::DivisionByZero { index });
        }
        self.zip_with(other, |x, y| x / y)
    }

    /// Entrywise minimum.
    pub fn entrywise_min(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, f64::min)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Entrywise `exp(x / epsilon)`.
    pub fn exp_scaled(&self, epsilon: f64) -> Self {
        self.map(|x| (x / epsilon).exp())
    }

    /// Entrywise `epsilon * ln x`. Entries must be positive; the `+inf`
    /// sentinel maps to `+inf`.
    pub fn log_scaled(&self, epsilon: f64) -> Result<Self> {
        for (index, &x) in self.data.iter().enumerate() {
            if !(x > 0.0) {
                return Err(Error::LogDomain { index, value: x });
            }
        }
        Ok(self.map(|x| {
            if x == f64::INFINITY {
                f64::INFINITY
            } else {
                epsilon * x.ln()
            }
        }))
    }

    /// Entrywise `min(x, c)`.
    pub fn min_scalar(&self, c: f64) -> Self {
        self.map(|x| x.min(c))
    }

    /// Entrywise `max(x, 0)`.
    pub fn clamp_nonneg(&self) -> Self {
        self.map(|x| x.max(0.0))
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }
}

impl std::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    #[inline]
    fn index(&self, (r, s, t): (usize, usize, usize)) -> &f64 {
        &self.data[self.flat_index(r, s, t)]
    }
}

impl std::ops::IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (r, s, t): (usize, usize, usize)) -> &mut f64 {
        let i = self.flat_index(r, s, t);
        &mut self.data[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_of_ones() {
        let x = Tensor3::ones((2, 2, 1));
        assert_eq!(x.inner(&x).unwrap(), 4.0);
    }

    #[test]
    fn inner_annihilates_on_zeros() {
        let x = Tensor3::from_fn((3, 2, 2), |r, s, t| (r + 2 * s + 5 * t) as f64);
        let z = Tensor3::zeros((3, 2, 2));
        assert_eq!(x.inner(&z).unwrap(), 0.0);
    }

    #[test]
    fn inner_small_matrix() {
        let x = Tensor3::new((2, 2, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(x.inner(&x).unwrap(), 30.0);
    }

    #[test]
    fn inner_dim_mismatch() {
        let x = Tensor3::ones((2, 2, 1));
        let y = Tensor3::ones((2, 2, 2));
        assert!(matches!(x.inner(&y), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn product_identity_and_quotient_self() {
        let x = Tensor3::new((2, 2, 1), vec![1.5, 2.0, 0.25, 4.0]).unwrap();
        assert_eq!(x.hadamard(&Tensor3::ones(x.dims())).unwrap(), x);
        assert_eq!(x.quotient(&x).unwrap(), Tensor3::ones(x.dims()));
    }

    #[test]
    fn min_with_zeros() {
        let x = Tensor3::new((2, 1, 1), vec![0.5, 2.0]).unwrap();
        let z = Tensor3::zeros(x.dims());
        assert_eq!(x.entrywise_min(&z).unwrap(), z);
    }

    #[test]
    fn quotient_rejects_zero_divisor() {
        let x = Tensor3::ones((2, 1, 1));
        let y = Tensor3::new((2, 1, 1), vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            x.quotient(&y),
            Err(Error::DivisionByZero { index: 1 })
        ));
    }

    #[test]
    fn exp_scaled_of_zeros_is_ones() {
        let z = Tensor3::zeros((2, 3, 1));
        assert_eq!(z.exp_scaled(0.05), Tensor3::ones((2, 3, 1)));
    }

    #[test]
    fn log_exp_round_trip() {
        let eps = 0.05;
        let x = Tensor3::from_fn((3, 3, 2), |r, s, t| {
            // spread exponents across [-50 eps, 50 eps]
            -50.0 * eps + 100.0 * eps * ((r * 6 + s * 2 + t) as f64) / 17.0
        });
        let back = x.exp_scaled(eps).log_scaled(eps).unwrap();
        for (a, b) in x.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn min_scalar_zero_keeps_nonpositive() {
        let x = Tensor3::new((2, 1, 1), vec![-1.0, 0.0]).unwrap();
        assert_eq!(x.min_scalar(0.0), x);
    }

    #[test]
    fn log_scaled_rejects_nonpositive_and_maps_infinity() {
        let bad = Tensor3::new((2, 1, 1), vec![1.0, 0.0]).unwrap();
        assert!(matches!(bad.log_scaled(1.0), Err(Error::LogDomain { .. })));
        let inf = Tensor3::new((1, 1, 1), vec![f64::INFINITY]).unwrap();
        assert_eq!(inf.log_scaled(1.0).unwrap().data()[0], f64::INFINITY);
    }

    #[test]
    fn repeated_reductions_are_bit_identical() {
        let x = Tensor3::from_fn((5, 4, 3), |r, s, t| {
            ((r * 31 + s * 17 + t * 7) as f64).sin() * 1e3
        });
        let y = Tensor3::from_fn((5, 4, 3), |r, s, t| {
            ((r * 13 + s * 11 + t * 5) as f64).cos()
        });
        let a = x.inner(&y).unwrap();
        let b = x.inner(&y).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(x.sum().to_bits(), x.sum().to_bits());
    }

    #[test]
    fn new_validates_shape() {
        assert!(matches!(
            Tensor3::new((2, 2, 1), vec![0.0; 3]),
            Err(Error::DataLength { .. })
        ));
        assert!(matches!(
            Tensor3::new((0, 2, 1), vec![]),
            Err(Error::ZeroDim(_))
        ));
    }
}
