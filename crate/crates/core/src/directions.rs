//! Global semantic edit directions.
//!
//! An expression direction contracts the truncated core `C̃` with the mean
//! person parameter, the chosen row of `U₃` and the mean rotation parameter.
//! The yaw direction contracts it with the mean person and expression
//! parameters and the normalized difference of the two rows of `U₅`, scaled
//! by the mean intensity gain. Both are fixed vectors in latent space, so an
//! edit is the affine map `w ↦ w + s·n` for any latent `w`.

use nalgebra::DVector;

use crate::container::model_fingerprint;
use crate::decomposition::{EXPRESSION_MODE, INTENSITY_MODE, PERSON_MODE, ROTATION_MODE};
use crate::error::{Error, Result};
use crate::model::{TensorModel, TruncatedModel};
use crate::tensor::Matrix;

pub const YAW: &str = "yaw";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionKind {
    Expression,
    Rotation,
}

impl DirectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectionKind::Expression => "expression",
            DirectionKind::Rotation => "rotation",
        }
    }
}

/// A named latent-space direction tied to the model that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticDirection {
    name: String,
    kind: DirectionKind,
    vector: DVector<f64>,
    model_fingerprint: u64,
}

impl SemanticDirection {
    pub fn new(
        name: impl Into<String>,
        kind: DirectionKind,
        vector: DVector<f64>,
        model_fingerprint: u64,
    ) -> Result<Self> {
        let name = name.into();
        if vector.is_empty() {
            return Err(Error::Degenerate(format!("direction {name:?} is empty")));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "direction {name:?} has non-finite entries"
            )));
        }
        if vector.iter().all(|&v| v == 0.0) {
            return Err(Error::Degenerate(format!(
                "direction {name:?} is the zero vector"
            )));
        }
        Ok(Self {
            name,
            kind,
            vector,
            model_fingerprint,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> DirectionKind {
        self.kind
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.vector
    }

    pub fn model_fingerprint(&self) -> u64 {
        self.model_fingerprint
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// One edit: move `latent` by `strength` along `direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct EditRequest<'a> {
    pub latent: &'a DVector<f64>,
    pub direction: &'a SemanticDirection,
    /// Intensity `q₄` for expressions, `β` for yaw.
    pub strength: f64,
}

/// `w + s·n`. A zero strength returns the latent unchanged.
pub fn apply_edit(req: &EditRequest<'_>) -> Result<DVector<f64>> {
    if !req.strength.is_finite() {
        return Err(Error::NonFinite(format!("edit strength {}", req.strength)));
    }
    if req.latent.len() != req.direction.dim() {
        return Err(Error::DimensionMismatch(format!(
            "latent of length {} cannot be edited along a direction of length {}",
            req.latent.len(),
            req.direction.dim()
        )));
    }
    if req.strength == 0.0 {
        return Ok(req.latent.clone());
    }
    Ok(req.latent + req.direction.vector() * req.strength)
}

fn check_pair(tm: &TruncatedModel, m: &TensorModel) -> Result<()> {
    if tm.mean_latent() != m.mean_latent()
        || tm.factor(EXPRESSION_MODE)? != m.factor(EXPRESSION_MODE)?
    {
        return Err(Error::DimensionMismatch(
            "truncated model was not derived from this tensor model".into(),
        ));
    }
    Ok(())
}

fn row(u: &Matrix, index: usize) -> Result<Vec<f64>> {
    if index >= u.nrows() {
        return Err(Error::IndexOutOfRange {
            index,
            len: u.nrows(),
        });
    }
    Ok(u.row(index).iter().copied().collect())
}

fn nonzero(n: &DVector<f64>, reference: f64, what: &str) -> Result<()> {
    if n.norm() <= f64::EPSILON * reference {
        return Err(Error::Degenerate(format!("{what} direction vanishes")));
    }
    Ok(())
}

/// Direction for the expression at `expression_index`.
///
/// The sign is chosen so that a positive strength moves towards the
/// model's in-sample high-intensity rendition of the expression (the
/// mean-person, mean-rotation difference between the last and first
/// intensity), which leaves the convention independent of singular-vector
/// signs.
pub fn expression_direction(
    tm: &TruncatedModel,
    m: &TensorModel,
    expression_index: usize,
) -> Result<SemanticDirection> {
    check_pair(tm, m)?;
    let u3 = m.factor(EXPRESSION_MODE)?;
    let q3 = row(u3, expression_index)?;
    let q2 = m.mean_params(PERSON_MODE)?;
    let q5 = m.mean_params(ROTATION_MODE)?;
    let mut n = tm.offset(q2.as_slice(), &q3, q5.as_slice())?;
    nonzero(&n, tm.core().frobenius_norm(), "expression")?;

    let u4 = m.factor(INTENSITY_MODE)?;
    let levels = u4.nrows();
    if levels > 1 {
        let ramp: Vec<f64> = (0..u4.ncols())
            .map(|k| u4[(levels - 1, k)] - u4[(0, k)])
            .collect();
        let towards =
            m.reconstruct_compact([q2.as_slice(), &q3, &ramp, q5.as_slice()])? - m.mean_latent();
        if n.dot(&towards) < 0.0 {
            n.neg_mut();
        }
    }
    SemanticDirection::new(
        m.labels().expressions[expression_index].clone(),
        DirectionKind::Expression,
        n,
        model_fingerprint(m),
    )
}

/// Rotation parameter `(1/√2)·[1, −1] U₅`: the normalized difference of the
/// first (left) and second (right) rotation rows.
pub fn rotation_parameter(u5: &Matrix) -> Result<DVector<f64>> {
    if u5.nrows() != 2 {
        return Err(Error::Unsupported(format!(
            "the yaw direction needs exactly 2 rotations, the model has {}",
            u5.nrows()
        )));
    }
    Ok((u5.row(0) - u5.row(1)).transpose() * std::f64::consts::FRAC_1_SQRT_2)
}

/// Yaw direction: positive strength moves from the second rotation label
/// towards the first.
pub fn rotation_direction(tm: &TruncatedModel, m: &TensorModel) -> Result<SemanticDirection> {
    check_pair(tm, m)?;
    let q5 = rotation_parameter(m.factor(ROTATION_MODE)?)?;
    let q2 = m.mean_params(PERSON_MODE)?;
    let q3 = m.mean_params(EXPRESSION_MODE)?;
    let n = tm.offset(q2.as_slice(), q3.as_slice(), q5.as_slice())? * tm.mean_intensity();
    nonzero(&n, tm.core().frobenius_norm(), "rotation")?;
    SemanticDirection::new(YAW, DirectionKind::Rotation, n, model_fingerprint(m))
}

/// Every expression direction followed by yaw (when the model has two
/// rotations).
pub fn all_directions(tm: &TruncatedModel, m: &TensorModel) -> Result<Vec<SemanticDirection>> {
    let mut dirs = (0..m.axis_sizes()[1])
        .map(|e| expression_direction(tm, m, e))
        .collect::<Result<Vec<_>>>()?;
    if m.axis_sizes()[3] == 2 {
        dirs.push(rotation_direction(tm, m)?);
    }
    Ok(dirs)
}

/// Pairwise cosine similarities between directions.
pub fn direction_orthogonality_report(dirs: &[SemanticDirection]) -> Result<Matrix> {
    if let Some(first) = dirs.first() {
        if let Some(bad) = dirs.iter().find(|d| d.dim() != first.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "direction {:?} has length {}, expected {}",
                bad.name(),
                bad.dim(),
                first.dim()
            )));
        }
    }
    let n = dirs.len();
    let norms: Vec<f64> = dirs.iter().map(|d| d.vector().norm()).collect();
    let mut report = Matrix::identity(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let c = dirs[i].vector().dot(dirs[j].vector()) / (norms[i] * norms[j]);
            report[(i, j)] = c;
            report[(j, i)] = c;
        }
    }
    Ok(report)
}
