//! Dense multiway arrays.
//!
//! Storage is generalized column-major: the first mode varies fastest, so
//! the element at multi-index `(i_1, .., i_N)` lives at
//! `i_1 + I_1 * (i_2 + I_2 * (i_3 + ..))`.
//!
//! Modes are numbered from 1, as in the usual `×ₙ` notation. The mode-n
//! unfolding is an `I_n × (∏_{k≠n} I_k)` matrix whose column index cycles
//! the remaining modes with the lower-numbered ones fastest. Because of the
//! storage order, the mode-1 unfolding is the raw buffer read as a
//! column-major matrix.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Highest tensor order supported.
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape)?;
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} holds {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        check_shape(&shape)?;
        let len = shape.iter().product();
        Ok(Self {
            shape,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        check_shape(&shape)?;
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, &shape);
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &n) in index.iter().zip(&self.shape) {
            debug_assert!(i < n);
            off += i * stride;
            stride *= n;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "cannot subtract shape {:?} from {:?}",
                other.shape, self.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn scale(&self, alpha: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    /// Drops size-1 modes. A tensor whose every mode is 1 keeps a single mode.
    pub fn squeeze(&self) -> DenseTensor {
        let mut shape: Vec<usize> = self.shape.iter().copied().filter(|&n| n != 1).collect();
        if shape.is_empty() {
            shape.push(1);
        }
        DenseTensor {
            shape,
            data: self.data.clone(),
        }
    }

    /// Same data under a different shape with the same element count.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<DenseTensor> {
        DenseTensor::new(shape, self.data.clone())
    }

    /// Keeps the leading `keep` indices along `mode`.
    pub fn leading_slices(&self, mode: usize, keep: usize) -> Result<DenseTensor> {
        let (left, n, right) = self.split_at_mode(mode)?;
        if keep == 0 || keep > n {
            return Err(Error::IndexOutOfRange {
                index: keep,
                len: n,
            });
        }
        let mut data = Vec::with_capacity(left * keep * right);
        for r in 0..right {
            let base = r * left * n;
            data.extend_from_slice(&self.data[base..base + left * keep]);
        }
        let mut shape = self.shape.clone();
        shape[mode - 1] = keep;
        Ok(DenseTensor { shape, data })
    }

    /// `(∏ modes before, size of mode, ∏ modes after)`.
    pub(crate) fn split_at_mode(&self, mode: usize) -> Result<(usize, usize, usize)> {
        check_mode(mode, self.order())?;
        let left = self.shape[..mode - 1].iter().product();
        let right = self.shape[mode..].iter().product();
        Ok((left, self.shape[mode - 1], right))
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > MAX_ORDER {
        return Err(Error::InvalidShape(format!(
            "order must be in 1..={MAX_ORDER}, got {}",
            shape.len()
        )));
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape(format!(
            "every mode must have size >= 1, got {shape:?}"
        )));
    }
    Ok(())
}

pub(crate) fn check_mode(mode: usize, order: usize) -> Result<()> {
    if mode == 0 || mode > order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    Ok(())
}

fn increment(idx: &mut [usize], shape: &[usize]) {
    for (i, &n) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < n {
            return;
        }
        *i = 0;
    }
}

/// Mode-`mode` unfolding of `t`.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    let (left, n, right) = t.split_at_mode(mode)?;
    // Column `l + left * r` holds the fiber t[l, :, r].
    Ok(Matrix::from_fn(n, left * right, |i, col| {
        let l = col % left;
        let r = col / left;
        t.data[l + left * (i + n * r)]
    }))
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
    check_shape(shape)?;
    check_mode(mode, shape.len())?;
    let n = shape[mode - 1];
    let left: usize = shape[..mode - 1].iter().product();
    let right: usize = shape[mode..].iter().product();
    if m.nrows() != n || m.ncols() != left * right {
        return Err(Error::DimensionMismatch(format!(
            "a {}x{} matrix cannot be folded along mode {mode} into {shape:?}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut data = vec![0.0; n * left * right];
    for r in 0..right {
        for i in 0..n {
            for l in 0..left {
                data[l + left * (i + n * r)] = m[(i, l + left * r)];
            }
        }
    }
    Ok(DenseTensor {
        shape: shape.to_vec(),
        data,
    })
}

/// n-mode product `t ×ₙ m`: every mode-n fiber `x` is replaced by `m · x`.
///
/// A `1 × I_n` multiplier contracts the mode to size 1; callers squeeze it
/// away when they want the lower-order tensor.
pub fn mode_product(t: &DenseTensor, m: &Matrix, mode: usize) -> Result<DenseTensor> {
    let (left, n, right) = t.split_at_mode(mode)?;
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "multiplier has {} columns but mode {mode} has size {n}",
            m.ncols()
        )));
    }
    let rows = m.nrows();
    let mut data = vec![0.0; left * rows * right];
    let mut shape = t.shape.clone();
    shape[mode - 1] = rows;
    if left == 1 {
        // The tensor is an n×right column-major matrix X; the result is m · X.
        let x = DMatrixView::from_slice(&t.data, n, right);
        let mut out = DMatrixViewMut::from_slice(&mut data, rows, right);
        out.gemm(1.0, m, &x, 0.0);
        return Ok(DenseTensor { shape, data });
    }
    let mt = m.transpose();
    // Each block t[:, :, r] is a left×n column-major matrix X; the matching
    // output block is X · mᵀ.
    for r in 0..right {
        let x = DMatrixView::from_slice(&t.data[r * left * n..(r + 1) * left * n], left, n);
        let mut out = DMatrixViewMut::from_slice(
            &mut data[r * left * rows..(r + 1) * left * rows],
            left,
            rows,
        );
        out.gemm(1.0, &x, &mt, 0.0);
    }
    Ok(DenseTensor { shape, data })
}

/// Contracts mode `mode` with the vector `v`, removing that mode.
///
/// Contracting the only mode of an order-1 tensor yields a 1-element tensor.
pub fn contract(t: &DenseTensor, v: &[f64], mode: usize) -> Result<DenseTensor> {
    let (left, n, right) = t.split_at_mode(mode)?;
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} cannot contract mode {mode} of size {n}",
            v.len()
        )));
    }
    let mut data = vec![0.0; left * right];
    for r in 0..right {
        let out = &mut data[r * left..(r + 1) * left];
        for (i, &w) in v.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let src = &t.data[left * (i + n * r)..left * (i + n * r) + left];
            for (o, s) in out.iter_mut().zip(src) {
                *o += w * s;
            }
        }
    }
    let mut shape = t.shape.clone();
    shape.remove(mode - 1);
    if shape.is_empty() {
        shape.push(1);
    }
    Ok(DenseTensor { shape, data })
}

/// Tensor (outer) product of the given vectors.
pub fn outer(vectors: &[&[f64]]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return Err(Error::InvalidShape("outer product of no vectors".into()));
    }
    let shape: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    check_shape(&shape)?;
    let mut data = vectors[0].to_vec();
    for v in &vectors[1..] {
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &b in v.iter() {
            next.extend(data.iter().map(|a| a * b));
        }
        data = next;
    }
    Ok(DenseTensor { shape, data })
}
