//! Recovering model parameters for latents outside the training grid.
//!
//! Two parameterizations are supported:
//!
//! * **rank-one**: four canonical vectors `q'₂..q'₅`, minimizing
//!   `‖ŵ(q) − w‖² + Σᵢ [λ₁ᵢ‖q'ᵢ‖² + λ₂ᵢ(q'ᵢᵀ1 − 1)²]` with `qᵢ = Uᵢᵀq'ᵢ`;
//! * **full-rank**: one parameter tensor `Q` in place of `q₂⊗q₃⊗q₄⊗q₅`,
//!   minimizing `‖ŵ(Q) − w‖²`. The reconstruction is linear in `Q`, so this
//!   is a linear least-squares problem in the mode-1 unfolding `C₍₁₎` of the
//!   core and is solved in closed form unless it is too large, in which case
//!   gradient descent is used.
//!
//! The rank-one problem is solved by gradient descent started from the
//! uniform canonical vectors `q'ᵢ = 1/Nᵢ`. Each step tries a
//! Barzilai-Borwein step length (alternating the two classic variants) and
//! halves it until the objective does not increase, so accepted iterates are
//! monotone.

use nalgebra::{DMatrixView, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::TensorModel;
use crate::tensor::{contract, DenseTensor, Matrix};

/// Optimizer and regularization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    /// Tikhonov weights `λ₁ᵢ` for modes 2..=5.
    pub lambda1: [f64; 4],
    /// Sum-constraint weights `λ₂ᵢ` for modes 2..=5.
    pub lambda2: [f64; 4],
    pub max_iters: usize,
    /// Step length of the first iteration.
    pub learning_rate: f64,
    /// Stop once the relative objective improvement drops below this.
    pub tolerance: f64,
    /// Largest `P·E·I·R` solved in closed form for the full-rank problem.
    pub closed_form_max_params: usize,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            lambda1: [0.1; 4],
            lambda2: [0.1; 4],
            max_iters: 2000,
            learning_rate: 1e-3,
            tolerance: 1e-9,
            closed_form_max_params: 4096,
        }
    }
}

impl RecoveryConfig {
    pub fn unregularized() -> Self {
        Self {
            lambda1: [0.0; 4],
            lambda2: [0.0; 4],
            ..Self::default()
        }
    }

    pub fn with_lambdas(mut self, lambda1: f64, lambda2: f64) -> Self {
        self.lambda1 = [lambda1; 4];
        self.lambda2 = [lambda2; 4];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .lambda1
            .iter()
            .chain(&self.lambda2)
            .any(|l| !l.is_finite() || *l < 0.0)
        {
            return Err(Error::InvalidConfig(
                "regularization weights must be finite and non-negative".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig(
                "tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Sets one field from its text form. `lambda1`/`lambda2` accept a single
    /// value for all modes or four comma-separated values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidConfig(format!("{key}: invalid {what} {value:?}"));
        let real = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("number"));
        let weights = |s: &str| -> Result<[f64; 4]> {
            let parts: Vec<f64> = s.split(',').map(real).collect::<Result<_>>()?;
            match parts.as_slice() {
                [v] => Ok([*v; 4]),
                [a, b, c, d] => Ok([*a, *b, *c, *d]),
                _ => Err(bad("weight list (1 or 4 values)")),
            }
        };
        match key.trim() {
            "lambda1" => self.lambda1 = weights(value)?,
            "lambda2" => self.lambda2 = weights(value)?,
            "max_iters" => self.max_iters = value.trim().parse().map_err(|_| bad("integer"))?,
            "learning_rate" => self.learning_rate = real(value)?,
            "tolerance" => self.tolerance = real(value)?,
            "closed_form_max_params" => {
                self.closed_form_max_params = value.trim().parse().map_err(|_| bad("integer"))?
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown recovery key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key=value, got {line:?}", n + 1))
            })?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamForm {
    RankOne,
    FullRank,
}

impl std::str::FromStr for ParamForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank-one" => Ok(ParamForm::RankOne),
            "full-rank" => Ok(ParamForm::FullRank),
            other => Err(Error::InvalidConfig(format!(
                "unknown parameter form {other:?} (rank-one | full-rank)"
            ))),
        }
    }
}

impl std::fmt::Display for ParamForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParamForm::RankOne => "rank-one",
            ParamForm::FullRank => "full-rank",
        })
    }
}

/// Model parameters in one of the two forms.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    /// Canonical vectors `q'₂..q'₅`.
    RankOne([DVector<f64>; 4]),
    /// Compact parameter tensor `Q`, shape `k₂ × k₃ × k₄ × k₅`.
    FullRank(DenseTensor),
}

impl Params {
    pub fn form(&self) -> ParamForm {
        match self {
            Params::RankOne(_) => ParamForm::RankOne,
            Params::FullRank(_) => ParamForm::FullRank,
        }
    }

    /// Number of free values: `P+E+I+R` or `P·E·I·R`.
    pub fn num_params(&self) -> usize {
        match self {
            Params::RankOne(q) => q.iter().map(|v| v.len()).sum(),
            Params::FullRank(t) => t.len(),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Params::RankOne(q) => q.iter().all(|v| v.iter().all(|x| x.is_finite())),
            Params::FullRank(t) => t.data().iter().all(|x| x.is_finite()),
        }
    }
}

/// Result of a recovery run.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredParams {
    pub params: Params,
    /// `‖ŵ − w‖²` at the returned parameters.
    pub final_loss: f64,
    /// Loss plus regularizer (equal to the loss for the full-rank form).
    pub objective: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Objective at the start point and after every accepted step.
    pub history: Vec<f64>,
}

impl RecoveredParams {
    pub fn form(&self) -> ParamForm {
        self.params.form()
    }
}

/// Reconstruction for either parameter form.
pub fn reconstruct(m: &TensorModel, params: &Params) -> Result<DVector<f64>> {
    match params {
        Params::RankOne(q) => m.reconstruct_canonical([
            q[0].as_slice(),
            q[1].as_slice(),
            q[2].as_slice(),
            q[3].as_slice(),
        ]),
        Params::FullRank(t) => m.reconstruct_full_rank(t),
    }
}

/// `‖ŵ(params) − w‖²`.
pub fn loss(m: &TensorModel, params: &Params, w: &DVector<f64>) -> Result<f64> {
    check_latent(m, w)?;
    Ok((reconstruct(m, params)? - w).norm_squared())
}

/// `Σᵢ λ₁ᵢ‖q'ᵢ‖² + λ₂ᵢ(q'ᵢᵀ1 − 1)²` over the rank-one canonical vectors.
pub fn regularizer(params: &Params, cfg: &RecoveryConfig) -> Result<f64> {
    match params {
        Params::RankOne(q) => Ok(q
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let s = v.sum() - 1.0;
                cfg.lambda1[i] * v.norm_squared() + cfg.lambda2[i] * s * s
            })
            .sum()),
        Params::FullRank(_) => Err(Error::Unsupported(
            "the regularizer is defined for rank-one parameters only".into(),
        )),
    }
}

fn check_latent(m: &TensorModel, w: &DVector<f64>) -> Result<()> {
    if w.len() != m.latent_dim() {
        return Err(Error::DimensionMismatch(format!(
            "latent of length {} for a model of dimension {}",
            w.len(),
            m.latent_dim()
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(
            "target latent has non-finite entries".into(),
        ));
    }
    Ok(())
}

/// Normal-equation operator for `‖C₍₁₎x − d‖²`, either through the cached
/// Gram matrix `C₍₁₎ᵀC₍₁₎` or by applying the unfolding directly.
enum Normal {
    Gram {
        gram: Matrix,
        eigen: SymmetricEigen<f64, nalgebra::Dyn>,
    },
    Direct,
}

/// A model prepared for repeated recoveries. Holds the Gram matrix of the
/// core unfolding when the parameter tensor is small enough.
pub struct Recoverer<'m> {
    model: &'m TensorModel,
    normal: Normal,
}

/// Per-target quantities: `d = w − w̄`, `b = C₍₁₎ᵀd`, `‖d‖²`.
struct Target {
    d: DVector<f64>,
    b: DVector<f64>,
    dd: f64,
}

impl<'m> Recoverer<'m> {
    pub fn new(model: &'m TensorModel, cfg: &RecoveryConfig) -> Result<Self> {
        cfg.validate()?;
        let n: usize = model.param_sizes().iter().product();
        let normal = if n <= cfg.closed_form_max_params {
            let a = Self::unfolding_of(model);
            let gram = a.tr_mul(&a);
            let eigen = gram.clone().symmetric_eigen();
            Normal::Gram { gram, eigen }
        } else {
            Normal::Direct
        };
        Ok(Self { model, normal })
    }

    pub fn model(&self) -> &TensorModel {
        self.model
    }

    fn unfolding_of(model: &TensorModel) -> DMatrixView<'_, f64> {
        let d = model.latent_dim();
        DMatrixView::from_slice(model.core().data(), d, model.core().len() / d)
    }

    fn unfolding(&self) -> DMatrixView<'_, f64> {
        Self::unfolding_of(self.model)
    }

    fn target(&self, w: &DVector<f64>) -> Result<Target> {
        check_latent(self.model, w)?;
        let d = w - self.model.mean_latent();
        let b = self.unfolding().tr_mul(&d);
        let dd = d.norm_squared();
        Ok(Target { d, b, dd })
    }

    /// `‖C₍₁₎x − d‖²` and its gradient `2(C₍₁₎ᵀC₍₁₎x − b)`. The Gram form
    /// loses absolute accuracy of about `ε‖d‖²` to cancellation; `precise`
    /// forces the residual form.
    fn data_term(&self, x: &DVector<f64>, t: &Target, precise: bool) -> (f64, DVector<f64>) {
        match &self.normal {
            Normal::Gram { gram, .. } if !precise => {
                let gx = gram * x;
                let value = x.dot(&gx) - 2.0 * t.b.dot(x) + t.dd;
                (value.max(0.0), (gx - &t.b) * 2.0)
            }
            _ => {
                let r = self.unfolding() * x - &t.d;
                (r.norm_squared(), self.unfolding().tr_mul(&r) * 2.0)
            }
        }
    }

    fn data_value(&self, x: &DVector<f64>, t: &Target, precise: bool) -> f64 {
        match &self.normal {
            Normal::Gram { gram, .. } if !precise => {
                (x.dot(&(gram * x)) - 2.0 * t.b.dot(x) + t.dd).max(0.0)
            }
            _ => (self.unfolding() * x - &t.d).norm_squared(),
        }
    }

    fn compact(&self, canonical: &[DVector<f64>; 4]) -> [DVector<f64>; 4] {
        let f = self.model.factors();
        [0, 1, 2, 3].map(|i| f[i].tr_mul(&canonical[i]))
    }

    /// `vec(q₂ ⊗ q₃ ⊗ q₄ ⊗ q₅)` in tensor storage order.
    fn kron(q: &[DVector<f64>; 4]) -> DVector<f64> {
        let t = crate::tensor::outer(&[
            q[0].as_slice(),
            q[1].as_slice(),
            q[2].as_slice(),
            q[3].as_slice(),
        ])
        .expect("parameter vectors are non-empty");
        DVector::from_vec(t.into_data())
    }

    /// Objective `L + R` at canonical parameters, and optionally its gradient.
    fn rank_one_objective(
        &self,
        canonical: &[DVector<f64>; 4],
        t: &Target,
        cfg: &RecoveryConfig,
        want_grad: bool,
        precise: bool,
    ) -> (f64, Option<[DVector<f64>; 4]>) {
        let q = self.compact(canonical);
        let x = Self::kron(&q);
        let reg = regularizer(&Params::RankOne(canonical.clone()), cfg).expect("rank-one");
        if !want_grad {
            return (self.data_value(&x, t, precise) + reg, None);
        }
        let (value, gx) = self.data_term(&x, t, precise);
        let shape = self.model.param_sizes().to_vec();
        let g = DenseTensor::new(shape, gx.data.into()).expect("gradient shape");
        let f = self.model.factors();
        let grads = [0, 1, 2, 3].map(|i| {
            // Contract every mode except i, highest mode first.
            let mut acc = g.clone();
            for j in (0..4).rev() {
                if j != i {
                    acc = contract(&acc, q[j].as_slice(), j + 1).expect("shapes agree");
                }
            }
            let gq = DVector::from_vec(acc.into_data());
            let s = canonical[i].sum() - 1.0;
            &f[i] * gq
                + &canonical[i] * (2.0 * cfg.lambda1[i])
                + DVector::from_element(canonical[i].len(), 2.0 * cfg.lambda2[i] * s)
        });
        (value + reg, Some(grads))
    }

    /// Gradient descent on the rank-one problem.
    pub fn rank_one(&self, w: &DVector<f64>, cfg: &RecoveryConfig) -> Result<RecoveredParams> {
        cfg.validate()?;
        let t = self.target(w)?;
        let sizes = self.model.axis_sizes();
        let mut p: [DVector<f64>; 4] =
            [0, 1, 2, 3].map(|i| DVector::from_element(sizes[i], 1.0 / sizes[i] as f64));

        // Below this objective the Gram evaluation is too noisy to rank
        // trial points, so the residual form takes over for good.
        let precise_below = PRECISE_SWITCH * t.dd;
        let mut precise = false;
        let (mut f, g) = self.rank_one_objective(&p, &t, cfg, true, precise);
        let mut g = g.expect("gradient requested");
        let mut history = vec![f];
        let mut step = cfg.learning_rate;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < cfg.max_iters {
            iterations += 1;
            if !precise && f < precise_below {
                precise = true;
                let (fp, gp) = self.rank_one_objective(&p, &t, cfg, true, true);
                f = fp;
                g = gp.expect("gradient requested");
            }
            let gnorm2: f64 = g.iter().map(|v| v.norm_squared()).sum();
            if gnorm2 == 0.0 {
                converged = true;
                break;
            }
            // Backtrack until the objective does not increase.
            let (trial, f_trial) = loop {
                let trial: [DVector<f64>; 4] = [0, 1, 2, 3].map(|i| &p[i] - &g[i] * step);
                let (ft, _) = self.rank_one_objective(&trial, &t, cfg, false, precise);
                if !ft.is_finite() {
                    if step < f64::MIN_POSITIVE {
                        return Err(non_finite(iterations, f, step));
                    }
                } else if ft <= f {
                    break (trial, ft);
                }
                step *= 0.5;
                if step < f64::MIN_POSITIVE {
                    break (p.clone(), f);
                }
            };
            if step < f64::MIN_POSITIVE {
                // No descent along the gradient at machine precision.
                converged = true;
                break;
            }
            let improvement = (f - f_trial) / f.abs().max(f64::MIN_POSITIVE);
            let (_, g_new) = self.rank_one_objective(&trial, &t, cfg, true, precise);
            let g_new = g_new.expect("gradient requested");
            if !g_new.iter().all(|v| v.iter().all(|x| x.is_finite())) {
                return Err(non_finite(iterations, f_trial, step));
            }
            let (mut ss, mut sy, mut yy) = (0.0, 0.0, 0.0);
            for i in 0..4 {
                let s = &trial[i] - &p[i];
                let y = &g_new[i] - &g[i];
                ss += s.norm_squared();
                sy += s.dot(&y);
                yy += y.norm_squared();
            }
            p = trial;
            f = f_trial;
            g = g_new;
            history.push(f);
            // ss == 0: the step no longer moves the iterate.
            if improvement < cfg.tolerance || ss == 0.0 {
                converged = true;
                break;
            }
            step = bb_step(step, iterations, ss, sy, yy);
        }

        let params = Params::RankOne(p);
        let final_loss = loss(self.model, &params, w)?;
        let objective = final_loss + regularizer(&params, cfg)?;
        Ok(RecoveredParams {
            params,
            final_loss,
            objective,
            iterations_used: iterations,
            converged,
            history,
        })
    }

    /// Full-rank least squares: closed-form minimum-norm solution when the
    /// Gram matrix is available, gradient descent otherwise.
    pub fn full_rank(&self, w: &DVector<f64>, cfg: &RecoveryConfig) -> Result<RecoveredParams> {
        cfg.validate()?;
        let t = self.target(w)?;
        let shape = self.model.param_sizes().to_vec();
        let (x, iterations, converged, history) = match &self.normal {
            Normal::Gram { eigen, .. } => {
                (self.pseudo_inverse_solve(eigen, &t), 0, true, Vec::new())
            }
            Normal::Direct => self.full_rank_descent(&t, cfg)?,
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(
                "full-rank solution has non-finite entries".into(),
            ));
        }
        let params = Params::FullRank(DenseTensor::new(shape, x.data.into())?);
        let final_loss = loss(self.model, &params, w)?;
        Ok(RecoveredParams {
            params,
            final_loss,
            objective: final_loss,
            iterations_used: iterations,
            converged,
            history,
        })
    }

    /// `x = (C₍₁₎ᵀC₍₁₎)⁺ C₍₁₎ᵀ d` with two rounds of iterative refinement
    /// against the residual computed from `C₍₁₎` itself.
    fn pseudo_inverse_solve(
        &self,
        eigen: &SymmetricEigen<f64, nalgebra::Dyn>,
        t: &Target,
    ) -> DVector<f64> {
        let lmax = eigen.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l));
        let cutoff = lmax * f64::EPSILON * eigen.eigenvalues.len() as f64;
        let apply_pinv = |rhs: &DVector<f64>| -> DVector<f64> {
            let mut coeff = eigen.eigenvectors.tr_mul(rhs);
            for (c, &l) in coeff.iter_mut().zip(eigen.eigenvalues.iter()) {
                *c = if l > cutoff { *c / l } else { 0.0 };
            }
            &eigen.eigenvectors * coeff
        };
        let a = self.unfolding();
        let mut x = apply_pinv(&t.b);
        for _ in 0..2 {
            let r = &t.d - a * &x;
            x += apply_pinv(&a.tr_mul(&r));
        }
        x
    }

    fn full_rank_descent(
        &self,
        t: &Target,
        cfg: &RecoveryConfig,
    ) -> Result<(DVector<f64>, usize, bool, Vec<f64>)> {
        let sizes = self.model.param_sizes();
        let axes = self.model.axis_sizes();
        // Start from the outer product of the uniform canonical vectors.
        let start: [DVector<f64>; 4] = [0, 1, 2, 3].map(|i| {
            self.model.factors()[i].tr_mul(&DVector::from_element(axes[i], 1.0 / axes[i] as f64))
        });
        debug_assert_eq!(
            start.iter().map(|v| v.len()).collect::<Vec<_>>(),
            sizes.to_vec()
        );
        let mut x = Self::kron(&start);
        let (mut f, mut g) = self.data_term(&x, t, true);
        let mut history = vec![f];
        let mut step = cfg.learning_rate;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < cfg.max_iters {
            iterations += 1;
            if g.norm_squared() == 0.0 {
                converged = true;
                break;
            }
            let (trial, f_trial) = loop {
                let trial = &x - &g * step;
                let ft = self.data_value(&trial, t, true);
                if !ft.is_finite() && step < f64::MIN_POSITIVE {
                    return Err(non_finite(iterations, f, step));
                }
                if ft <= f {
                    break (trial, ft);
                }
                step *= 0.5;
                if step < f64::MIN_POSITIVE {
                    break (x.clone(), f);
                }
            };
            if step < f64::MIN_POSITIVE {
                converged = true;
                break;
            }
            let improvement = (f - f_trial) / f.abs().max(f64::MIN_POSITIVE);
            let (_, g_new) = self.data_term(&trial, t, true);
            let s = &trial - &x;
            let y = &g_new - &g;
            let (ss, sy, yy) = (s.norm_squared(), s.dot(&y), y.norm_squared());
            x = trial;
            f = f_trial;
            g = g_new;
            history.push(f);
            if improvement < cfg.tolerance || ss == 0.0 {
                converged = true;
                break;
            }
            step = bb_step(step, iterations, ss, sy, yy);
        }
        Ok((x, iterations, converged, history))
    }

    /// Recovery in the requested form.
    pub fn recover(
        &self,
        w: &DVector<f64>,
        form: ParamForm,
        cfg: &RecoveryConfig,
    ) -> Result<RecoveredParams> {
        match form {
            ParamForm::RankOne => self.rank_one(w, cfg),
            ParamForm::FullRank => self.full_rank(w, cfg),
        }
    }

    /// Recovers every latent independently, in parallel.
    pub fn recover_batch(
        &self,
        latents: &[DVector<f64>],
        form: ParamForm,
        cfg: &RecoveryConfig,
    ) -> Vec<Result<RecoveredParams>> {
        latents
            .par_iter()
            .map(|w| self.recover(w, form, cfg))
            .collect()
    }

    /// Analytic gradient of `L + R` (rank-one) or `L` (full-rank).
    pub fn gradient(
        &self,
        params: &Params,
        w: &DVector<f64>,
        cfg: &RecoveryConfig,
    ) -> Result<Vec<f64>> {
        let t = self.target(w)?;
        match params {
            Params::RankOne(q) => {
                self.check_rank_one(q)?;
                let (_, g) = self.rank_one_objective(q, &t, cfg, true, true);
                Ok(g.expect("gradient requested")
                    .iter()
                    .flat_map(|v| v.iter().copied())
                    .collect())
            }
            Params::FullRank(q) => {
                self.check_full_rank(q)?;
                let x = DVector::from_column_slice(q.data());
                // Gradient straight from the unfolding, independent of the Gram cache.
                let r = self.unfolding() * x - &t.d;
                Ok((self.unfolding().tr_mul(&r) * 2.0).data.into())
            }
        }
    }

    fn check_rank_one(&self, q: &[DVector<f64>; 4]) -> Result<()> {
        for (i, (v, n)) in q.iter().zip(self.model.axis_sizes()).enumerate() {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "canonical parameter for mode {} has length {}, expected {n}",
                    i + 2,
                    v.len()
                )));
            }
        }
        Ok(())
    }

    fn check_full_rank(&self, q: &DenseTensor) -> Result<()> {
        if q.shape() != self.model.param_sizes() {
            return Err(Error::DimensionMismatch(format!(
                "parameter tensor shape {:?}, expected {:?}",
                q.shape(),
                self.model.param_sizes()
            )));
        }
        Ok(())
    }
}

/// Next trial step: the two Barzilai-Borwein lengths `sᵀs/sᵀy` and
/// `sᵀy/yᵀy` on alternate iterations, keeping the current step when the
/// curvature estimate is not positive.
fn bb_step(current: f64, iteration: usize, ss: f64, sy: f64, yy: f64) -> f64 {
    if !(sy > 0.0 && ss > 0.0 && yy > 0.0) {
        return current;
    }
    if iteration % 2 == 0 {
        ss / sy
    } else {
        sy / yy
    }
}

fn non_finite(iteration: usize, objective: f64, step: f64) -> Error {
    Error::NonFinite(format!(
        "optimizer diverged at iteration {iteration} (last objective {objective:e}, step {step:e})"
    ))
}

/// Rank-one recovery of a single latent.
pub fn recover_rank_one(
    m: &TensorModel,
    w: &DVector<f64>,
    cfg: &RecoveryConfig,
) -> Result<RecoveredParams> {
    Recoverer::new(m, cfg)?.rank_one(w, cfg)
}

/// Full-rank recovery of a single latent.
pub fn recover_full_rank(
    m: &TensorModel,
    w: &DVector<f64>,
    cfg: &RecoveryConfig,
) -> Result<RecoveredParams> {
    Recoverer::new(m, cfg)?.full_rank(w, cfg)
}

/// Step used by [`gradient_check`].
/// Fraction of `‖w − w̄‖²` below which rank-one descent evaluates the
/// objective from the residual instead of the Gram matrix.
const PRECISE_SWITCH: f64 = 1e-6;

pub const GRADIENT_CHECK_STEP: f64 = 1e-5;

/// Largest `|analytic − numeric| / (|numeric| + 1e-8)` over all parameter
/// coordinates, with central differences of the directly evaluated objective.
pub fn gradient_check(
    m: &TensorModel,
    params: &Params,
    w: &DVector<f64>,
    cfg: &RecoveryConfig,
) -> Result<f64> {
    if !params.is_finite() {
        return Err(Error::NonFinite("parameters are not finite".into()));
    }
    let analytic = Recoverer::new(m, cfg)?.gradient(params, w, cfg)?;
    let objective = |p: &Params| -> Result<f64> {
        let l = loss(m, p, w)?;
        Ok(match p {
            Params::RankOne(_) => l + regularizer(p, cfg)?,
            Params::FullRank(_) => l,
        })
    };
    let h = GRADIENT_CHECK_STEP;
    let mut worst: f64 = 0.0;
    let mut k = 0;
    let perturb = |delta: f64, idx: usize| -> Params {
        let mut p = params.clone();
        match &mut p {
            Params::RankOne(q) => {
                let mut rem = idx;
                for v in q.iter_mut() {
                    if rem < v.len() {
                        v[rem] += delta;
                        break;
                    }
                    rem -= v.len();
                }
            }
            Params::FullRank(t) => {
                let mut data = t.data().to_vec();
                data[idx] += delta;
                *t = DenseTensor::new(t.shape().to_vec(), data).expect("same shape");
            }
        }
        p
    };
    while k < analytic.len() {
        let numeric = (objective(&perturb(h, k))? - objective(&perturb(-h, k))?) / (2.0 * h);
        worst = worst.max((analytic[k] - numeric).abs() / (numeric.abs() + 1e-8));
        k += 1;
    }
    Ok(worst)
}
