//! Structured latent datasets and a synthetic generator with planted ground
//! truth.
//!
//! A dataset is an order-5 tensor `D × P × E × I × R`: one latent code of
//! dimension `D` for every (person, expression, intensity, rotation) cell.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Expression labels of the BU-3DFE grid, in canonical order.
pub const BU3DFE_EXPRESSIONS: [&str; 6] = [
    "anger",
    "disgust",
    "fear",
    "happiness",
    "sadness",
    "surprise",
];
/// Intensity labels: slot 0 holds the replicated neutral face.
pub const BU3DFE_INTENSITIES: [&str; 5] = ["0", "1", "2", "3", "4"];
pub const BU3DFE_ROTATIONS: [&str; 2] = ["left", "right"];

/// Style-vector layout of a latent code; `num_style_vectors · style_dim = D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatentLayout {
    pub num_style_vectors: usize,
    pub style_dim: usize,
}

impl LatentLayout {
    /// 18 style vectors of width 512 (a 1024² StyleGAN2 generator in W+).
    pub const STYLEGAN2_1024: LatentLayout = LatentLayout {
        num_style_vectors: 18,
        style_dim: 512,
    };

    pub fn flat(dim: usize) -> Self {
        Self {
            num_style_vectors: 1,
            style_dim: dim,
        }
    }

    /// The W+ layout for `D = 9216`, a single flat vector otherwise.
    pub fn infer(dim: usize) -> Self {
        if dim == Self::STYLEGAN2_1024.dim() {
            Self::STYLEGAN2_1024
        } else {
            Self::flat(dim)
        }
    }

    pub fn dim(&self) -> usize {
        self.num_style_vectors * self.style_dim
    }
}

/// Names for the entries of the four dataset axes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisLabels {
    pub persons: Vec<String>,
    pub expressions: Vec<String>,
    pub intensities: Vec<String>,
    pub rotations: Vec<String>,
}

impl AxisLabels {
    /// Generic labels `person0.., expression0.., ..`.
    pub fn numbered(p: usize, e: usize, i: usize, r: usize) -> Self {
        let names = |prefix: &str, n: usize| (0..n).map(|k| format!("{prefix}{k}")).collect();
        Self {
            persons: names("person", p),
            expressions: names("expression", e),
            intensities: names("intensity", i),
            rotations: names("rotation", r),
        }
    }

    /// Labels for a synthetic grid: BU-3DFE names wherever the axis length
    /// matches the canonical layout.
    pub fn for_grid(p: usize, e: usize, i: usize, r: usize) -> Self {
        let mut labels = Self::numbered(p, e, i, r);
        labels.persons = (0..p).map(|k| format!("person{k:03}")).collect();
        if e == BU3DFE_EXPRESSIONS.len() {
            labels.expressions = BU3DFE_EXPRESSIONS.iter().map(|s| s.to_string()).collect();
        }
        if i == BU3DFE_INTENSITIES.len() {
            labels.intensities = BU3DFE_INTENSITIES.iter().map(|s| s.to_string()).collect();
        }
        if r == BU3DFE_ROTATIONS.len() {
            labels.rotations = BU3DFE_ROTATIONS.iter().map(|s| s.to_string()).collect();
        }
        labels
    }

    pub fn counts(&self) -> [usize; 4] {
        [
            self.persons.len(),
            self.expressions.len(),
            self.intensities.len(),
            self.rotations.len(),
        ]
    }

    /// Labels of axis `mode ∈ 2..=5`.
    pub fn axis(&self, mode: usize) -> Option<&[String]> {
        match mode {
            2 => Some(&self.persons),
            3 => Some(&self.expressions),
            4 => Some(&self.intensities),
            5 => Some(&self.rotations),
            _ => None,
        }
    }

    /// Resolves a label (or a decimal index) on axis `mode`.
    pub fn resolve(&self, mode: usize, key: &str) -> Result<usize> {
        let labels = self
            .axis(mode)
            .ok_or(Error::ModeOutOfRange { mode, order: 5 })?;
        if let Some(pos) = labels.iter().position(|l| l == key) {
            return Ok(pos);
        }
        match key.parse::<usize>() {
            Ok(idx) if idx < labels.len() => Ok(idx),
            _ => Err(Error::Layout(format!(
                "unknown label {key:?} on axis {mode} (known: {})",
                labels.join(", ")
            ))),
        }
    }
}

/// Latent codes on a (person, expression, intensity, rotation) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDataset {
    latents: DenseTensor,
    labels: AxisLabels,
    layout: LatentLayout,
}

impl LatentDataset {
    pub fn new(latents: DenseTensor, labels: AxisLabels, layout: LatentLayout) -> Result<Self> {
        if latents.order() != 5 {
            return Err(Error::InvalidShape(format!(
                "latent tensor must have order 5, got shape {:?}",
                latents.shape()
            )));
        }
        let shape = latents.shape();
        if labels.counts() != [shape[1], shape[2], shape[3], shape[4]] {
            return Err(Error::Layout(format!(
                "label counts {:?} do not match tensor shape {shape:?}",
                labels.counts()
            )));
        }
        if layout.dim() != shape[0] {
            return Err(Error::Layout(format!(
                "{} style vectors of dimension {} do not make D = {}",
                layout.num_style_vectors, layout.style_dim, shape[0]
            )));
        }
        if let Some(v) = latents.data().iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("dataset contains {v}")));
        }
        Ok(Self {
            latents,
            labels,
            layout,
        })
    }

    pub fn latents(&self) -> &DenseTensor {
        &self.latents
    }

    pub fn labels(&self) -> &AxisLabels {
        &self.labels
    }

    pub fn layout(&self) -> LatentLayout {
        self.layout
    }

    /// `[D, P, E, I, R]`.
    pub fn dims(&self) -> [usize; 5] {
        let s = self.latents.shape();
        [s[0], s[1], s[2], s[3], s[4]]
    }

    /// The latent at grid cell `(p, e, i, r)`.
    pub fn latent(&self, cell: [usize; 4]) -> Result<DVector<f64>> {
        let dims = self.dims();
        for (&idx, &len) in cell.iter().zip(&dims[1..]) {
            if idx >= len {
                return Err(Error::IndexOutOfRange { index: idx, len });
            }
        }
        let start = self
            .latents
            .offset(&[0, cell[0], cell[1], cell[2], cell[3]]);
        Ok(DVector::from_column_slice(
            &self.latents.data()[start..start + dims[0]],
        ))
    }

    /// Every cell in storage order (person fastest) with its latent.
    pub fn cells(&self) -> impl Iterator<Item = ([usize; 4], &[f64])> + '_ {
        let [d, p, e, i, _] = self.dims();
        self.latents
            .data()
            .chunks_exact(d)
            .enumerate()
            .map(move |(k, fiber)| {
                let cell = [k % p, (k / p) % e, (k / (p * e)) % i, k / (p * e * i)];
                (cell, fiber)
            })
    }

    /// Splits off one person: the dataset without them, and their latents.
    pub fn hold_out_person(&self, person: usize) -> Result<(LatentDataset, LatentDataset)> {
        let [d, p, e, i, r] = self.dims();
        if person >= p {
            return Err(Error::IndexOutOfRange {
                index: person,
                len: p,
            });
        }
        if p < 2 {
            return Err(Error::InvalidShape(
                "cannot hold out the only person in the dataset".into(),
            ));
        }
        let mut kept = Vec::with_capacity(d * (p - 1) * e * i * r);
        let mut held = Vec::with_capacity(d * e * i * r);
        for (cell, fiber) in self.cells() {
            if cell[0] == person {
                held.extend_from_slice(fiber);
            } else {
                kept.extend_from_slice(fiber);
            }
        }
        let mut kept_labels = self.labels.clone();
        kept_labels.persons.remove(person);
        let mut held_labels = self.labels.clone();
        held_labels.persons = vec![self.labels.persons[person].clone()];
        Ok((
            LatentDataset::new(
                DenseTensor::new(vec![d, p - 1, e, i, r], kept)?,
                kept_labels,
                self.layout,
            )?,
            LatentDataset::new(
                DenseTensor::new(vec![d, 1, e, i, r], held)?,
                held_labels,
                self.layout,
            )?,
        ))
    }

    /// All latents as a named batch, names `person/expression/intensity/rotation`.
    pub fn to_batch(&self) -> LatentBatch {
        let names = self
            .cells()
            .map(|(c, _)| {
                format!(
                    "{}/{}/{}/{}",
                    self.labels.persons[c[0]],
                    self.labels.expressions[c[1]],
                    self.labels.intensities[c[2]],
                    self.labels.rotations[c[3]]
                )
            })
            .collect();
        let [d, ..] = self.dims();
        LatentBatch {
            names,
            latents: self
                .latents
                .data()
                .chunks_exact(d)
                .map(DVector::from_column_slice)
                .collect(),
            layout: self.layout,
        }
    }
}

/// A list of named latent vectors sharing one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    pub names: Vec<String>,
    pub latents: Vec<DVector<f64>>,
    pub layout: LatentLayout,
}

impl LatentBatch {
    pub fn new(
        names: Vec<String>,
        latents: Vec<DVector<f64>>,
        layout: LatentLayout,
    ) -> Result<Self> {
        if names.len() != latents.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} latents",
                names.len(),
                latents.len()
            )));
        }
        if let Some(w) = latents.iter().find(|w| w.len() != layout.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "latent of length {} in a batch of dimension {}",
                w.len(),
                layout.dim()
            )));
        }
        if latents
            .iter()
            .flat_map(|w| w.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite(
                "latent batch contains non-finite values".into(),
            ));
        }
        Ok(Self {
            names,
            latents,
            layout,
        })
    }

    pub fn single(
        name: impl Into<String>,
        latent: DVector<f64>,
        layout: LatentLayout,
    ) -> Result<Self> {
        Self::new(vec![name.into()], vec![latent], layout)
    }

    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }
}

/// Which label grid a dataset file must follow when loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridLayout {
    /// 6 expressions × 5 intensities × 2 rotations with canonical labels.
    #[default]
    Bu3dfe,
    /// Any grid; only the generic dataset invariants are checked.
    Any,
}

/// Checks that a dataset follows the BU-3DFE grid: the six basic emotions
/// in canonical order, intensities 0-4 with the neutral face in slot 0, and
/// left/right views.
pub fn validate_bu3dfe(ds: &LatentDataset) -> Result<()> {
    check_axis("expression", &ds.labels.expressions, &BU3DFE_EXPRESSIONS)?;
    check_axis("intensity", &ds.labels.intensities, &BU3DFE_INTENSITIES)?;
    check_axis("rotation", &ds.labels.rotations, &BU3DFE_ROTATIONS)?;
    Ok(())
}

fn check_axis(axis: &str, found: &[String], expected: &[&str]) -> Result<()> {
    if found.len() != expected.len() {
        return Err(Error::Layout(format!(
            "{axis} axis has {} entries, the BU-3DFE layout has {} ({})",
            found.len(),
            expected.len(),
            expected.join(", ")
        )));
    }
    for (k, (f, e)) in found.iter().zip(expected).enumerate() {
        if f != e {
            return Err(Error::Layout(format!(
                "{axis} label {f:?} at position {k} does not match the BU-3DFE layout (expected {e:?})"
            )));
        }
    }
    Ok(())
}

/// Reads a dataset container and validates it against `layout`.
pub fn load_dataset(path: &std::path::Path, layout: GridLayout) -> Result<LatentDataset> {
    let ds = crate::container::read_dataset(path)?;
    if layout == GridLayout::Bu3dfe {
        validate_bu3dfe(&ds)?;
    }
    Ok(ds)
}

/// Reads a dataset container that must follow the BU-3DFE grid.
pub fn load_bu3dfe_layout(path: &std::path::Path) -> Result<LatentDataset> {
    load_dataset(path, GridLayout::Bu3dfe)
}

/// Parameters of a synthetic dataset with planted structure:
///
/// `w(p, e, i, r) = base + person_p + ramp(i)·d_e + s(r)·d_rot + noise`
///
/// where `s(r)` runs linearly from +1 (first rotation) to −1 (last) and is 0
/// for a single rotation. Expression offsets are centered across
/// expressions when there is more than one, so the average expression
/// coincides with the neutral face.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// `[D, P, E, I, R]`.
    pub dims: [usize; 5],
    pub noise_sigma: f64,
    pub seed: u64,
    pub base_scale: f64,
    pub person_scale: f64,
    pub expression_scale: f64,
    pub rotation_scale: f64,
    /// Per-intensity gain; defaults to `0, 1, .., I−1`.
    pub intensity_ramp: Option<Vec<f64>>,
}

impl SyntheticSpec {
    pub fn new(dims: [usize; 5], seed: u64) -> Self {
        Self {
            dims,
            noise_sigma: 0.0,
            seed,
            base_scale: 1.0,
            person_scale: 1.0,
            expression_scale: 1.0,
            rotation_scale: 1.0,
            intensity_ramp: None,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "synthetic dims must be >= 1, got {:?}",
                self.dims
            )));
        }
        let scales = [
            self.noise_sigma,
            self.base_scale,
            self.person_scale,
            self.expression_scale,
            self.rotation_scale,
        ];
        if scales.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidConfig(
                "synthetic scales must be finite and non-negative".into(),
            ));
        }
        if let Some(ramp) = &self.intensity_ramp {
            if ramp.len() != self.dims[3] || ramp.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "intensity ramp needs {} finite entries",
                    self.dims[3]
                )));
            }
        }
        Ok(())
    }

    pub fn ramp(&self) -> Vec<f64> {
        self.intensity_ramp
            .clone()
            .unwrap_or_else(|| (0..self.dims[3]).map(|i| i as f64).collect())
    }
}

/// The planted components of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub base: DVector<f64>,
    pub person_offsets: Vec<DVector<f64>>,
    /// Expression offsets `d_e`, centered across expressions.
    pub expression_offsets: Vec<DVector<f64>>,
    pub rotation_offset: DVector<f64>,
    pub intensity_ramp: Vec<f64>,
    pub rotation_signs: Vec<f64>,
}

impl SyntheticTruth {
    /// The truth as a latent batch: `expression:<label>` entries followed by
    /// `rotation`.
    pub fn to_batch(&self, labels: &AxisLabels, layout: LatentLayout) -> Result<LatentBatch> {
        let mut names: Vec<String> = labels
            .expressions
            .iter()
            .map(|l| format!("expression:{l}"))
            .collect();
        names.push("rotation".into());
        let mut latents = self.expression_offsets.clone();
        latents.push(self.rotation_offset.clone());
        LatentBatch::new(names, latents, layout)
    }
}

/// Draws a synthetic dataset. Identical specs give identical datasets.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(LatentDataset, SyntheticTruth)> {
    spec.validate()?;
    let [d, p, e, i, r] = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut draw = |scale: f64| -> DVector<f64> {
        DVector::from_fn(d, |_, _| scale * std_normal.sample(&mut rng))
    };

    let base = draw(spec.base_scale);
    let person_offsets: Vec<_> = (0..p).map(|_| draw(spec.person_scale)).collect();
    let mut expression_offsets: Vec<_> = (0..e).map(|_| draw(spec.expression_scale)).collect();
    if e > 1 {
        let mean = expression_offsets
            .iter()
            .fold(DVector::zeros(d), |acc, v| acc + v)
            / e as f64;
        for v in &mut expression_offsets {
            *v -= &mean;
        }
    }
    let rotation_offset = draw(spec.rotation_scale);
    let ramp = spec.ramp();
    let rotation_signs: Vec<f64> = (0..r)
        .map(|k| {
            if r == 1 {
                0.0
            } else {
                1.0 - 2.0 * k as f64 / (r - 1) as f64
            }
        })
        .collect();

    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut data = Vec::with_capacity(d * p * e * i * r);
    for &sign in &rotation_signs {
        for &amp in &ramp {
            for expr in &expression_offsets {
                for person in &person_offsets {
                    for k in 0..d {
                        let mut v = base[k] + person[k] + amp * expr[k] + sign * rotation_offset[k];
                        if spec.noise_sigma > 0.0 {
                            v += noise.sample(&mut rng);
                        }
                        data.push(v);
                    }
                }
            }
        }
    }
    let dataset = LatentDataset::new(
        DenseTensor::new(vec![d, p, e, i, r], data)?,
        AxisLabels::for_grid(p, e, i, r),
        LatentLayout::infer(d),
    )?;
    Ok((
        dataset,
        SyntheticTruth {
            base,
            person_offsets,
            expression_offsets,
            rotation_offset,
            intensity_ramp: ramp,
            rotation_signs,
        },
    ))
}
