//! Mean-centering and the higher-order SVD of the order-5 latent tensor.
//!
//! `T − T̄ = S ×₁ U₁ ×₂ U₂ ×₃ U₃ ×₄ U₄ ×₅ U₅`, where `T̄` replicates the mean
//! latent along every non-latent mode and each `Uₙ` holds the left singular
//! vectors of the mode-n unfolding of the centered tensor.
//!
//! Factor bases are computed per mode from whichever side of the unfolding
//! is smaller:
//!
//! * wide unfoldings (`Iₙ ≤ ∏ other modes`, always the case for the
//!   person/expression/intensity/rotation modes) use the symmetric
//!   eigendecomposition of the `Iₙ × Iₙ` Gram matrix, giving a square
//!   orthogonal factor;
//! * tall unfoldings (the latent mode when `D` exceeds the number of grid
//!   cells) use a Householder QR followed by an SVD of the small triangular
//!   factor, giving an economy factor with `∏ other modes` columns.
//!
//! Singular vectors are ordered by descending singular value and signed so
//! that each column's largest-magnitude entry is positive (lowest index wins
//! ties). Both backends are deterministic, so repeated fits of the same data
//! are bitwise identical.

use nalgebra::{DMatrixView, DVector};

use crate::error::{Error, Result};
use crate::tensor::{mode_product, outer, DenseTensor, Matrix};

pub const LATENT_MODE: usize = 1;
pub const PERSON_MODE: usize = 2;
pub const EXPRESSION_MODE: usize = 3;
pub const INTENSITY_MODE: usize = 4;
pub const ROTATION_MODE: usize = 5;

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct HosvdResult {
    core: DenseTensor,
    factors: Vec<Matrix>,
    mean_latent: DVector<f64>,
    singular_values: Vec<Vec<f64>>,
    numerical_rank: Vec<usize>,
    degenerate: bool,
}

impl HosvdResult {
    /// Core tensor `S`, shaped by the factor column counts.
    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    /// Factor matrices `[U₁, .., U₅]` with orthonormal columns.
    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    /// Factor for a 1-based mode.
    pub fn factor(&self, mode: usize) -> &Matrix {
        &self.factors[mode - 1]
    }

    pub fn mean_latent(&self) -> &DVector<f64> {
        &self.mean_latent
    }

    /// Singular values of each mode's unfolding, descending.
    pub fn singular_values(&self) -> &[Vec<f64>] {
        &self.singular_values
    }

    /// Number of singular values above `RANK_TOLERANCE · σ_max` per mode.
    /// Factor columns past this count complete the basis and carry no data.
    pub fn numerical_rank(&self) -> &[usize] {
        &self.numerical_rank
    }

    /// True when the centered tensor was identically zero.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Shape of the decomposed data tensor.
    pub fn data_shape(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.nrows()).collect()
    }

    /// `S ×₁ U₁ ×₂ .. ×₅ U₅`, the approximation of the centered tensor.
    pub fn recompose_centered(&self) -> Result<DenseTensor> {
        let mut t = self.core.clone();
        // Expand the small modes first; the latent mode is the large one.
        for mode in (1..=self.factors.len()).rev() {
            t = mode_product(&t, &self.factors[mode - 1], mode)?;
        }
        Ok(t)
    }

    /// Recomposed data tensor including the mean.
    pub fn recompose(&self) -> Result<DenseTensor> {
        let centered = self.recompose_centered()?;
        let mean = mean_tensor(&self.mean_latent, &self.data_shape())?;
        let data = centered
            .data()
            .iter()
            .zip(mean.data())
            .map(|(a, b)| a + b)
            .collect();
        DenseTensor::new(centered.shape().to_vec(), data)
    }

    /// Keeps the leading `rank` columns of one factor and the matching core
    /// slices. Since the factors are orthonormal, those slices are exactly
    /// the projection of the centered data through the retained bases.
    pub fn truncate_factor(&self, mode: usize, rank: usize) -> Result<HosvdResult> {
        crate::tensor::check_mode(mode, self.factors.len())?;
        let available = self.factors[mode - 1].ncols();
        if rank == 0 || rank > available {
            return Err(Error::RankOutOfRange {
                mode,
                rank,
                available,
            });
        }
        let mut factors = self.factors.clone();
        factors[mode - 1] = self.factors[mode - 1].columns(0, rank).into_owned();
        let mut numerical_rank = self.numerical_rank.clone();
        numerical_rank[mode - 1] = numerical_rank[mode - 1].min(rank);
        Ok(HosvdResult {
            core: self.core.leading_slices(mode, rank)?,
            factors,
            mean_latent: self.mean_latent.clone(),
            singular_values: self.singular_values.clone(),
            numerical_rank,
            degenerate: self.degenerate,
        })
    }
}

/// `w̄ ⊗ 1 ⊗ .. ⊗ 1` with the given data shape.
pub fn mean_tensor(mean_latent: &DVector<f64>, shape: &[usize]) -> Result<DenseTensor> {
    if shape.first() != Some(&mean_latent.len()) {
        return Err(Error::DimensionMismatch(format!(
            "mean latent of length {} does not match shape {shape:?}",
            mean_latent.len()
        )));
    }
    let ones: Vec<Vec<f64>> = shape[1..].iter().map(|&n| vec![1.0; n]).collect();
    let mut vectors: Vec<&[f64]> = vec![mean_latent.as_slice()];
    vectors.extend(ones.iter().map(|v| v.as_slice()));
    outer(&vectors)
}

/// Subtracts the mean latent (the average mode-1 fiber) from every fiber.
pub fn mean_center(t: &DenseTensor) -> Result<(DenseTensor, DVector<f64>)> {
    if t.order() != 5 {
        return Err(Error::InvalidShape(format!(
            "expected an order-5 latent tensor, got order {}",
            t.order()
        )));
    }
    let d = t.shape()[0];
    let cells = t.len() / d;
    let mut mean = DVector::zeros(d);
    for fiber in t.data().chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(fiber) {
            *m += v;
        }
    }
    mean /= cells as f64;
    let mut data = t.data().to_vec();
    for fiber in data.chunks_exact_mut(d) {
        for (v, m) in fiber.iter_mut().zip(mean.iter()) {
            *v -= m;
        }
    }
    Ok((DenseTensor::new(t.shape().to_vec(), data)?, mean))
}

/// Mean-centers `t` and computes its HOSVD.
pub fn hosvd(t: &DenseTensor) -> Result<HosvdResult> {
    let (centered, mean_latent) = mean_center(t)?;
    if let Some(v) = centered.data().iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("data tensor contains {v}")));
    }
    let shape = centered.shape().to_vec();
    let total: usize = shape.iter().product();

    let degenerate = centered.data().iter().all(|&v| v == 0.0);
    let mut factors = Vec::with_capacity(5);
    let mut singular_values = Vec::with_capacity(5);
    let mut numerical_rank = Vec::with_capacity(5);
    for mode in 1..=5 {
        let rows = shape[mode - 1];
        let cols = total / rows;
        let basis = if degenerate {
            LeftBasis {
                u: Matrix::identity(rows, rows.min(cols)),
                sigma: vec![0.0; rows.min(cols)],
            }
        } else {
            left_singular_basis(&centered, mode)
        };
        let sigma_max = basis.sigma.first().copied().unwrap_or(0.0);
        let rank = basis
            .sigma
            .iter()
            .filter(|&&s| sigma_max > 0.0 && s > RANK_TOLERANCE * sigma_max)
            .count();
        if rank < basis.u.ncols() {
            log::debug!(
                "mode {mode}: numerical rank {rank} of {} columns; remaining columns complete the basis",
                basis.u.ncols()
            );
        }
        factors.push(basis.u);
        singular_values.push(basis.sigma);
        numerical_rank.push(rank);
    }
    if degenerate {
        log::warn!("centered data tensor is identically zero; HOSVD is degenerate");
    }

    let mut core = mode_product(&centered, &factors[0].transpose(), 1)?;
    for mode in 2..=5 {
        core = mode_product(&core, &factors[mode - 1].transpose(), mode)?;
    }

    Ok(HosvdResult {
        core,
        factors,
        mean_latent,
        singular_values,
        numerical_rank,
        degenerate,
    })
}

struct LeftBasis {
    u: Matrix,
    sigma: Vec<f64>,
}

fn left_singular_basis(t: &DenseTensor, mode: usize) -> LeftBasis {
    let (left, n, right) = t.split_at_mode(mode).expect("mode checked by caller");
    let cols = left * right;
    // Both branches take eigenvectors of a symmetric Gram matrix and measure
    // each singular value directly as ‖Aᵀuₖ‖, which stays accurate for
    // small values where the square root of an eigenvalue would not.
    let (u, sigma) = if n <= cols {
        let eig = mode_gram(t, left, n, right).symmetric_eigen();
        let projected =
            mode_product(t, &eig.eigenvectors.transpose(), mode).expect("square factor");
        let sigma: Vec<f64> = slice_energies(&projected, mode)
            .expect("valid mode")
            .into_iter()
            .map(f64::sqrt)
            .collect();
        (eig.eigenvectors, sigma)
    } else {
        // Tall unfolding: A = QR, then the left singular vectors of R.
        let qr = crate::tensor::unfold(t, mode)
            .expect("mode checked by caller")
            .qr();
        let (q, r) = (qr.q(), qr.r());
        let eig = (&r * r.transpose()).symmetric_eigen();
        let rt_u = r.tr_mul(&eig.eigenvectors);
        let sigma = rt_u.column_iter().map(|c| c.norm()).collect();
        (q * eig.eigenvectors, sigma)
    };
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    // Stable sort keeps the solver's order for equal values.
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let mut u = Matrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, order[j])]);
    let sigma = order.iter().map(|&j| sigma[j]).collect();
    fix_signs(&mut u);
    LeftBasis { u, sigma }
}

/// Gram matrix `A Aᵀ` of the mode unfolding `A`, accumulated block by block
/// without materializing `A`.
fn mode_gram(t: &DenseTensor, left: usize, n: usize, right: usize) -> Matrix {
    let mut gram = Matrix::zeros(n, n);
    if left == 1 {
        let a = DMatrixView::from_slice(t.data(), n, right);
        gram.gemm(1.0, &a, &a.transpose(), 0.0);
        return gram;
    }
    for r in 0..right {
        let x = DMatrixView::from_slice(&t.data()[r * left * n..(r + 1) * left * n], left, n);
        gram.gemm(1.0, &x.transpose(), &x, 1.0);
    }
    gram
}

/// Makes the largest-magnitude entry of every column positive.
pub(crate) fn fix_signs(u: &mut Matrix) {
    for mut col in u.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Largest absolute entry of `UᵀU − I`.
pub fn orthonormality_deviation(u: &Matrix) -> f64 {
    let gram = u.transpose() * u;
    let mut worst: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// All-orthogonality of a core tensor: the largest inner product between
/// distinct slices along any mode, relative to the squared core norm.
pub fn all_orthogonality_deviation(core: &DenseTensor) -> f64 {
    (1..=core.order())
        .map(|mode| mode_orthogonality_deviation(core, mode).expect("valid mode"))
        .fold(0.0, f64::max)
}

/// Largest inner product between distinct slices along `mode`, relative to
/// the squared core norm.
pub fn mode_orthogonality_deviation(core: &DenseTensor, mode: usize) -> Result<f64> {
    let (left, n, right) = core.split_at_mode(mode)?;
    let norm2 = core.frobenius_norm().powi(2);
    if norm2 == 0.0 {
        return Ok(0.0);
    }
    let gram = mode_gram(core, left, n, right);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(gram[(i, j)].abs() / norm2);
            }
        }
    }
    Ok(worst)
}

/// Squared Frobenius norms of the core slices along `mode`.
pub fn slice_energies(core: &DenseTensor, mode: usize) -> Result<Vec<f64>> {
    let (left, n, right) = core.split_at_mode(mode)?;
    let mut energy = vec![0.0; n];
    for r in 0..right {
        for (i, e) in energy.iter_mut().enumerate() {
            let base = left * (i + n * r);
            *e += core.data()[base..base + left]
                .iter()
                .map(|v| v * v)
                .sum::<f64>();
        }
    }
    Ok(energy)
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute error when `b` is zero.
pub fn relative_error(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    let diff = a.sub(b)?.frobenius_norm();
    let norm = b.frobenius_norm();
    Ok(if norm > 0.0 { diff / norm } else { diff })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded(shape: Vec<usize>, seed: u64) -> DenseTensor {
        let mut state = seed;
        DenseTensor::from_fn(shape, |_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .unwrap()
    }

    #[test]
    fn rejects_wrong_order() {
        let t = DenseTensor::zeros(vec![2, 2, 2]).unwrap();
        assert!(matches!(mean_center(&t), Err(Error::InvalidShape(_))));
        assert!(hosvd(&t).is_err());
    }

    #[test]
    fn constant_fibers_center_to_zero() {
        let v = [1.0, -2.0, 3.5];
        let t = DenseTensor::from_fn(vec![3, 2, 2, 2, 2], |idx| v[idx[0]]).unwrap();
        let (c, mean) = mean_center(&t).unwrap();
        assert_eq!(mean.as_slice(), &v);
        assert!(c.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn opposite_fibers_have_zero_mean() {
        let v = [0.5, -1.5];
        let t = DenseTensor::from_fn(vec![2, 2, 1, 1, 1], |idx| {
            if idx[1] == 0 {
                v[idx[0]]
            } else {
                -v[idx[0]]
            }
        })
        .unwrap();
        let (c, mean) = mean_center(&t).unwrap();
        assert!(mean.iter().all(|&m| m == 0.0));
        assert_eq!(c, t);
    }

    #[test]
    fn zero_tensor_is_degenerate() {
        let t = DenseTensor::zeros(vec![4, 3, 2, 2, 2]).unwrap();
        let h = hosvd(&t).unwrap();
        assert!(h.is_degenerate());
        assert!(h.core().data().iter().all(|&x| x == 0.0));
        for u in h.factors() {
            assert!(orthonormality_deviation(u) < 1e-12);
        }
        assert_eq!(h.numerical_rank(), &[0, 0, 0, 0, 0]);
    }

    #[test]
    fn economy_factor_for_tall_latent_mode() {
        let t = seeded(vec![40, 2, 3, 2, 2], 3);
        let h = hosvd(&t).unwrap();
        assert_eq!(h.factor(1).shape(), (40, 24));
        assert_eq!(h.factor(2).shape(), (2, 2));
        assert_eq!(h.core().shape(), &[24, 2, 3, 2, 2]);
        let rel = relative_error(&h.recompose().unwrap(), &t).unwrap();
        assert!(rel < 1e-12, "{rel}");
    }

    #[test]
    fn truncate_rank_errors() {
        let h = hosvd(&seeded(vec![5, 2, 3, 4, 2], 1)).unwrap();
        assert!(matches!(
            h.truncate_factor(4, 0),
            Err(Error::RankOutOfRange { .. })
        ));
        assert!(matches!(
            h.truncate_factor(4, 5),
            Err(Error::RankOutOfRange { .. })
        ));
        assert!(matches!(
            h.truncate_factor(6, 1),
            Err(Error::ModeOutOfRange { .. })
        ));
        let full = h.truncate_factor(4, 4).unwrap();
        assert_eq!(full, h);
    }

    #[test]
    fn signs_follow_largest_entry() {
        let mut u = Matrix::from_column_slice(3, 2, &[0.1, -0.9, 0.2, 0.5, -0.5, 0.1]);
        fix_signs(&mut u);
        assert_eq!(u.column(0).as_slice(), &[-0.1, 0.9, -0.2]);
        // Tie between 0.5 and -0.5 resolves to the lower index.
        assert_eq!(u.column(1).as_slice(), &[0.5, -0.5, 0.1]);
    }
}
