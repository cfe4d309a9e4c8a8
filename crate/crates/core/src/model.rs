//! The fitted multilinear model and its reconstruction formulas.
//!
//! With `C = S ×₁ U₁`, a latent is reconstructed as
//! `ŵ = w̄ + C ×₂ q₂ᵀ ×₃ q₃ᵀ ×₄ q₄ᵀ ×₅ q₅ᵀ`. The compact parameters `qᵢ` are
//! the images of canonical parameters `q'ᵢ` (one-hot rows selecting a
//! dataset entry, or mixtures of them) under the factors: `qᵢᵀ = q'ᵢᵀ Uᵢ`.

use nalgebra::{DMatrixView, DVector};

use crate::dataset::{AxisLabels, LatentLayout};
use crate::decomposition::{HosvdResult, INTENSITY_MODE};
use crate::error::{Error, Result};
use crate::tensor::{contract, mode_product, DenseTensor, Matrix};

/// Fitted tensor model: mean latent, core `C` and factors `U₂..U₅`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorModel {
    mean_latent: DVector<f64>,
    core: DenseTensor,
    factors: [Matrix; 4],
    labels: AxisLabels,
    layout: LatentLayout,
}

impl TensorModel {
    pub fn new(
        mean_latent: DVector<f64>,
        core: DenseTensor,
        factors: [Matrix; 4],
        labels: AxisLabels,
        layout: LatentLayout,
    ) -> Result<Self> {
        if core.order() != 5 {
            return Err(Error::InvalidShape(format!(
                "model core must have order 5, got {:?}",
                core.shape()
            )));
        }
        if core.shape()[0] != mean_latent.len() {
            return Err(Error::DimensionMismatch(format!(
                "core latent size {} differs from mean latent length {}",
                core.shape()[0],
                mean_latent.len()
            )));
        }
        if layout.dim() != mean_latent.len() {
            return Err(Error::DimensionMismatch(format!(
                "layout {}x{} does not cover latent dimension {}",
                layout.num_style_vectors,
                layout.style_dim,
                mean_latent.len()
            )));
        }
        let counts = labels.counts();
        for (i, u) in factors.iter().enumerate() {
            if u.ncols() != core.shape()[i + 1] {
                return Err(Error::DimensionMismatch(format!(
                    "factor U{} has {} columns but core mode {} has size {}",
                    i + 2,
                    u.ncols(),
                    i + 2,
                    core.shape()[i + 1]
                )));
            }
            if u.nrows() != counts[i] {
                return Err(Error::DimensionMismatch(format!(
                    "factor U{} has {} rows but the axis has {} labels",
                    i + 2,
                    u.nrows(),
                    counts[i]
                )));
            }
        }
        Ok(Self {
            mean_latent,
            core,
            factors,
            labels,
            layout,
        })
    }

    /// Builds the model from a decomposition: `C = S ×₁ U₁`.
    pub fn from_hosvd(h: &HosvdResult, labels: AxisLabels, layout: LatentLayout) -> Result<Self> {
        let core = mode_product(h.core(), h.factor(1), 1)?;
        let f = h.factors();
        Self::new(
            h.mean_latent().clone(),
            core,
            [f[1].clone(), f[2].clone(), f[3].clone(), f[4].clone()],
            labels,
            layout,
        )
    }

    pub fn mean_latent(&self) -> &DVector<f64> {
        &self.mean_latent
    }

    /// Core `C`, shape `D × k₂ × k₃ × k₄ × k₅`.
    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    /// Factor `Uᵢ` for mode `i ∈ 2..=5`.
    pub fn factor(&self, mode: usize) -> Result<&Matrix> {
        check_param_mode(mode)?;
        Ok(&self.factors[mode - 2])
    }

    pub fn factors(&self) -> &[Matrix; 4] {
        &self.factors
    }

    pub fn labels(&self) -> &AxisLabels {
        &self.labels
    }

    pub fn layout(&self) -> LatentLayout {
        self.layout
    }

    pub fn latent_dim(&self) -> usize {
        self.mean_latent.len()
    }

    /// Dataset axis lengths `[P, E, I, R]` (canonical parameter lengths).
    pub fn axis_sizes(&self) -> [usize; 4] {
        self.factors.each_ref().map(|u| u.nrows())
    }

    /// Compact parameter lengths `[k₂, k₃, k₄, k₅]`.
    pub fn param_sizes(&self) -> [usize; 4] {
        self.factors.each_ref().map(|u| u.ncols())
    }

    /// `qᵢ = Uᵢᵀ q'ᵢ`.
    pub fn canonical_to_compact(&self, mode: usize, canonical: &[f64]) -> Result<DVector<f64>> {
        let u = self.factor(mode)?;
        if canonical.len() != u.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "canonical parameter for mode {mode} has length {}, expected {}",
                canonical.len(),
                u.nrows()
            )));
        }
        Ok(u.tr_mul(&DVector::from_column_slice(canonical)))
    }

    /// Compact parameter of the uniform canonical mixture, `(1/Nᵢ)·Uᵢᵀ 1`.
    pub fn mean_params(&self, mode: usize) -> Result<DVector<f64>> {
        let u = self.factor(mode)?;
        let n = u.nrows() as f64;
        Ok(DVector::from_iterator(
            u.ncols(),
            u.column_iter().map(|c| c.sum() / n),
        ))
    }

    /// `ŵ = w̄ + C ×₂ q₂ᵀ ×₃ q₃ᵀ ×₄ q₄ᵀ ×₅ q₅ᵀ`.
    pub fn reconstruct_compact(&self, q: [&[f64]; 4]) -> Result<DVector<f64>> {
        for (i, (v, k)) in q.iter().zip(self.param_sizes()).enumerate() {
            if v.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "compact parameter for mode {} has length {}, expected {k}",
                    i + 2,
                    v.len()
                )));
            }
        }
        // Contract from the last mode so each step shrinks the working tensor.
        let mut t = contract(&self.core, q[3], 5)?;
        t = contract(&t, q[2], 4)?;
        t = contract(&t, q[1], 3)?;
        t = contract(&t, q[0], 2)?;
        Ok(&self.mean_latent + DVector::from_vec(t.into_data()))
    }

    /// Reconstruction from canonical parameters `q'₂..q'₅`.
    pub fn reconstruct_canonical(&self, canonical: [&[f64]; 4]) -> Result<DVector<f64>> {
        let q: Vec<DVector<f64>> = canonical
            .iter()
            .enumerate()
            .map(|(i, c)| self.canonical_to_compact(i + 2, c))
            .collect::<Result<_>>()?;
        self.reconstruct_compact([
            q[0].as_slice(),
            q[1].as_slice(),
            q[2].as_slice(),
            q[3].as_slice(),
        ])
    }

    /// Reconstruction of the in-sample grid cell `(p, e, i, r)`.
    pub fn reconstruct_cell(&self, cell: [usize; 4]) -> Result<DVector<f64>> {
        let sizes = self.axis_sizes();
        let one_hots: Vec<Vec<f64>> = cell
            .iter()
            .zip(sizes)
            .map(|(&idx, n)| one_hot(n, idx))
            .collect::<Result<_>>()?;
        self.reconstruct_canonical([&one_hots[0], &one_hots[1], &one_hots[2], &one_hots[3]])
    }

    /// `ŵᵢ = w̄ᵢ + Σ C_{ijklm} Q_{jklm}` for an arbitrary parameter tensor.
    pub fn reconstruct_full_rank(&self, q: &DenseTensor) -> Result<DVector<f64>> {
        if q.shape() != &self.core.shape()[1..] {
            return Err(Error::DimensionMismatch(format!(
                "parameter tensor shape {:?} does not match {:?}",
                q.shape(),
                &self.core.shape()[1..]
            )));
        }
        let d = self.latent_dim();
        let unfolded = DMatrixView::from_slice(self.core.data(), d, q.len());
        Ok(&self.mean_latent + unfolded * DVector::from_column_slice(q.data()))
    }

    /// The intensity-truncated model: the dominant intensity singular vector
    /// and the matching core slice.
    pub fn truncate_intensity(&self) -> Result<TruncatedModel> {
        let u4 = &self.factors[INTENSITY_MODE - 2];
        let slice = self.core.leading_slices(INTENSITY_MODE, 1)?;
        let s = self.core.shape();
        let core = slice.reshape(vec![s[0], s[1], s[2], s[4]])?;
        TruncatedModel::new(
            self.mean_latent.clone(),
            core,
            u4.column(0).into_owned(),
            [
                self.factors[0].clone(),
                self.factors[1].clone(),
                self.factors[3].clone(),
            ],
        )
    }
}

/// Model with the intensity subspace reduced to one dimension, so the
/// intensity parameter becomes a scalar gain: `ŵ = w̄ + q₄ (C̃ ×₂ q₂ᵀ ×₃ q₃ᵀ ×₅ q₅ᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedModel {
    mean_latent: DVector<f64>,
    core: DenseTensor,
    u4: DVector<f64>,
    factors: [Matrix; 3],
}

impl TruncatedModel {
    pub fn new(
        mean_latent: DVector<f64>,
        core: DenseTensor,
        u4: DVector<f64>,
        factors: [Matrix; 3],
    ) -> Result<Self> {
        if core.order() != 4 || core.shape()[0] != mean_latent.len() {
            return Err(Error::DimensionMismatch(format!(
                "truncated core {:?} incompatible with latent dimension {}",
                core.shape(),
                mean_latent.len()
            )));
        }
        for (u, &k) in factors.iter().zip(&core.shape()[1..]) {
            if u.ncols() != k {
                return Err(Error::DimensionMismatch(format!(
                    "factor with {} columns does not match core mode of size {k}",
                    u.ncols()
                )));
            }
        }
        let norm = u4.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidShape(format!(
                "intensity basis vector must have unit norm, got {norm}"
            )));
        }
        Ok(Self {
            mean_latent,
            core,
            u4,
            factors,
        })
    }

    /// Builds the truncated model from a decomposition whose intensity factor
    /// was truncated to rank 1: `C̃ = S̃ ×₁ U₁` with the singleton mode dropped.
    pub fn from_hosvd(h: &HosvdResult) -> Result<Self> {
        let u4 = h.factor(INTENSITY_MODE);
        if u4.ncols() != 1 {
            return Err(Error::InvalidShape(format!(
                "intensity factor must be truncated to rank 1, has {} columns",
                u4.ncols()
            )));
        }
        let c = mode_product(h.core(), h.factor(1), 1)?;
        let s = c.shape().to_vec();
        let core = c.reshape(vec![s[0], s[1], s[2], s[4]])?;
        let f = h.factors();
        Self::new(
            h.mean_latent().clone(),
            core,
            u4.column(0).into_owned(),
            [f[1].clone(), f[2].clone(), f[4].clone()],
        )
    }

    pub fn mean_latent(&self) -> &DVector<f64> {
        &self.mean_latent
    }

    /// `C̃`, shape `D × k₂ × k₃ × k₅`.
    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    /// Dominant intensity singular vector `ũ₄`.
    pub fn u4(&self) -> &DVector<f64> {
        &self.u4
    }

    /// Mean intensity gain `(1/I)·1ᵀũ₄`.
    pub fn mean_intensity(&self) -> f64 {
        self.u4.sum() / self.u4.len() as f64
    }

    /// Intensity gain of a canonical intensity parameter, `q'₄ᵀ ũ₄`.
    pub fn intensity_gain(&self, canonical: &[f64]) -> Result<f64> {
        if canonical.len() != self.u4.len() {
            return Err(Error::DimensionMismatch(format!(
                "canonical intensity parameter has length {}, expected {}",
                canonical.len(),
                self.u4.len()
            )));
        }
        Ok(self.u4.iter().zip(canonical).map(|(a, b)| a * b).sum())
    }

    /// `C̃` contracted with `q₂, q₃, q₅`: the latent offset per unit intensity.
    pub fn offset(&self, q2: &[f64], q3: &[f64], q5: &[f64]) -> Result<DVector<f64>> {
        let mut t = contract(&self.core, q5, 4)?;
        t = contract(&t, q3, 3)?;
        t = contract(&t, q2, 2)?;
        Ok(DVector::from_vec(t.into_data()))
    }

    pub fn reconstruct(&self, q2: &[f64], q3: &[f64], q4: f64, q5: &[f64]) -> Result<DVector<f64>> {
        Ok(&self.mean_latent + self.offset(q2, q3, q5)? * q4)
    }

    /// `U₂`, `U₃` or `U₅`.
    pub fn factor(&self, mode: usize) -> Result<&Matrix> {
        match mode {
            2 => Ok(&self.factors[0]),
            3 => Ok(&self.factors[1]),
            5 => Ok(&self.factors[2]),
            _ => Err(Error::ModeOutOfRange { mode, order: 5 }),
        }
    }
}

fn check_param_mode(mode: usize) -> Result<()> {
    if !(2..=5).contains(&mode) {
        return Err(Error::ModeOutOfRange { mode, order: 5 });
    }
    Ok(())
}

pub fn one_hot(len: usize, index: usize) -> Result<Vec<f64>> {
    if index >= len {
        return Err(Error::IndexOutOfRange { index, len });
    }
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    Ok(v)
}
