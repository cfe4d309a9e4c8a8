//! The LTC1 container format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "LTC1"
//! 4       1     format version (1)
//! 5       1     record kind: 1 dataset, 2 model, 3 direction, 4 latent batch
//! 6       1     value type: 1 = f32, 2 = f64
//! 7       1     reserved (0)
//! 8       8     payload length in bytes (u64)
//! 16      n     payload
//! 16+n    8     FNV-1a 64 checksum of bytes [0, 16+n) (u64)
//! ```
//!
//! All integers are little-endian. Inside the payload, counts and sizes are
//! `u32`, strings are a `u32` byte length followed by UTF-8, and arrays are a
//! `u32` order, `order` × `u32` dimensions and the values in tensor storage
//! order (first index fastest). Values are promoted to `f64` on read.
//! See `docs/format.md` for the per-kind payload layout.

use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use nalgebra::DVector;

use crate::dataset::{AxisLabels, LatentBatch, LatentDataset, LatentLayout};
use crate::directions::{DirectionKind, SemanticDirection};
use crate::error::{Error, Result};
use crate::model::TensorModel;
use crate::tensor::{DenseTensor, Matrix};

pub const MAGIC: [u8; 4] = *b"LTC1";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 16;
const CHECKSUM_LEN: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("not an LTC1 container (bad magic bytes)")]
    BadMagic,
    #[error("unsupported container version {found} (expected {VERSION})")]
    VersionMismatch { found: u8 },
    #[error("truncated container: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("payload holds a non-finite value in {0}")]
    NonFinite(String),
    #[error("unknown record kind {0}")]
    UnknownKind(u8),
    #[error("unknown value type {0}")]
    UnknownValueType(u8),
    #[error("expected a {expected} record, found a {found} record")]
    WrongKind {
        expected: RecordKind,
        found: RecordKind,
    },
    #[error("malformed payload: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum RecordKind {
    Dataset = 1,
    Model = 2,
    Direction = 3,
    Latents = 4,
}

impl RecordKind {
    fn from_byte(b: u8) -> std::result::Result<Self, ContainerError> {
        match b {
            1 => Ok(Self::Dataset),
            2 => Ok(Self::Model),
            3 => Ok(Self::Direction),
            4 => Ok(Self::Latents),
            other => Err(ContainerError::UnknownKind(other)),
        }
    }
}

impl std::fmt::Display for RecordKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dataset => "dataset",
            Self::Model => "model",
            Self::Direction => "direction",
            Self::Latents => "latent batch",
        })
    }
}

/// Stored width of real values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Precision {
    F32 = 1,
    F64 = 2,
}

impl Precision {
    fn from_byte(b: u8) -> std::result::Result<Self, ContainerError> {
        match b {
            1 => Ok(Self::F32),
            2 => Ok(Self::F64),
            other => Err(ContainerError::UnknownValueType(other)),
        }
    }

    fn width(self) -> usize {
        match self {
            Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

/// Any payload an LTC1 file can carry.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Dataset(LatentDataset),
    Model(TensorModel),
    Direction(SemanticDirection),
    Latents(LatentBatch),
}

impl Record {
    pub fn kind(&self) -> RecordKind {
        match self {
            Record::Dataset(_) => RecordKind::Dataset,
            Record::Model(_) => RecordKind::Model,
            Record::Direction(_) => RecordKind::Direction,
            Record::Latents(_) => RecordKind::Latents,
        }
    }

    /// Latent codes are stored as 32-bit reals, as produced by GAN
    /// encoders. Models and directions keep full precision so that they
    /// round-trip bitwise.
    pub fn default_precision(&self) -> Precision {
        match self {
            Record::Dataset(_) | Record::Latents(_) => Precision::F32,
            Record::Model(_) | Record::Direction(_) => Precision::F64,
        }
    }
}

impl From<LatentDataset> for Record {
    fn from(v: LatentDataset) -> Self {
        Record::Dataset(v)
    }
}
impl From<TensorModel> for Record {
    fn from(v: TensorModel) -> Self {
        Record::Model(v)
    }
}
impl From<SemanticDirection> for Record {
    fn from(v: SemanticDirection) -> Self {
        Record::Direction(v)
    }
}
impl From<LatentBatch> for Record {
    fn from(v: LatentBatch) -> Self {
        Record::Latents(v)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

// ---------------------------------------------------------------------------
// Encoding

struct Encoder {
    buf: Vec<u8>,
    precision: Precision,
}

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("container sizes fit in u32");
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn string(&mut self, s: &str) {
        self.u32(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn labels(&mut self, labels: &[String]) {
        self.u32(labels.len());
        for l in labels {
            self.string(l);
        }
    }

    fn axis_labels(&mut self, labels: &AxisLabels) {
        self.labels(&labels.persons);
        self.labels(&labels.expressions);
        self.labels(&labels.intensities);
        self.labels(&labels.rotations);
    }

    fn layout(&mut self, layout: LatentLayout) {
        self.u32(layout.num_style_vectors);
        self.u32(layout.style_dim);
    }

    fn array(&mut self, shape: &[usize], values: &[f64]) {
        self.u32(shape.len());
        for &n in shape {
            self.u32(n);
        }
        self.buf.reserve(values.len() * self.precision.width());
        match self.precision {
            Precision::F32 => {
                for &v in values {
                    self.buf.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            Precision::F64 => {
                for &v in values {
                    self.buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }

    fn matrix(&mut self, m: &Matrix) {
        self.array(&[m.nrows(), m.ncols()], m.as_slice());
    }
}

fn encode_model_payload(enc: &mut Encoder, m: &TensorModel) {
    enc.layout(m.layout());
    enc.axis_labels(m.labels());
    enc.array(&[m.latent_dim()], m.mean_latent().as_slice());
    enc.array(m.core().shape(), m.core().data());
    for u in m.factors() {
        enc.matrix(u);
    }
}

fn encode_payload(record: &Record, precision: Precision) -> Vec<u8> {
    let mut enc = Encoder {
        buf: Vec::new(),
        precision,
    };
    match record {
        Record::Dataset(ds) => {
            enc.layout(ds.layout());
            enc.axis_labels(ds.labels());
            enc.array(ds.latents().shape(), ds.latents().data());
        }
        Record::Model(m) => encode_model_payload(&mut enc, m),
        Record::Direction(d) => {
            enc.string(d.name());
            enc.u8(match d.kind() {
                DirectionKind::Expression => 0,
                DirectionKind::Rotation => 1,
            });
            enc.u64(d.model_fingerprint());
            enc.array(&[d.dim()], d.vector().as_slice());
        }
        Record::Latents(b) => {
            enc.layout(b.layout);
            enc.labels(&b.names);
            let d = b.layout.dim();
            let mut values = Vec::with_capacity(d * b.len());
            for w in &b.latents {
                values.extend_from_slice(w.as_slice());
            }
            enc.array(&[d, b.len()], &values);
        }
    }
    enc.buf
}

/// Serializes a record. Identical records give identical bytes.
pub fn encode(record: &Record, precision: Precision) -> Vec<u8> {
    let payload = encode_payload(record, precision);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CHECKSUM_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(record.kind() as u8);
    out.push(precision as u8);
    out.push(0);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

/// Content hash of a model: FNV-1a 64 over its full-precision payload.
pub fn model_fingerprint(m: &TensorModel) -> u64 {
    let mut enc = Encoder {
        buf: Vec::new(),
        precision: Precision::F64,
    };
    encode_model_payload(&mut enc, m);
    fnv1a(&enc.buf)
}

// ---------------------------------------------------------------------------
// Decoding

struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
    precision: Precision,
}

type DecodeResult<T> = std::result::Result<T, ContainerError>;

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> DecodeResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(ContainerError::Malformed(format!(
                "payload ends after {} bytes while reading {n} more at offset {}",
                self.bytes.len(),
                self.pos
            ))),
        }
    }

    fn u8(&mut self) -> DecodeResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> DecodeResult<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> DecodeResult<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> DecodeResult<String> {
        let n = self.u32()?;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec())
            .map_err(|_| ContainerError::Malformed("label is not valid UTF-8".into()))
    }

    fn labels(&mut self) -> DecodeResult<Vec<String>> {
        let n = self.u32()?;
        (0..n).map(|_| self.string()).collect()
    }

    fn axis_labels(&mut self) -> DecodeResult<AxisLabels> {
        Ok(AxisLabels {
            persons: self.labels()?,
            expressions: self.labels()?,
            intensities: self.labels()?,
            rotations: self.labels()?,
        })
    }

    fn layout(&mut self) -> DecodeResult<LatentLayout> {
        Ok(LatentLayout {
            num_style_vectors: self.u32()?,
            style_dim: self.u32()?,
        })
    }

    fn array(&mut self, what: &str) -> DecodeResult<(Vec<usize>, Vec<f64>)> {
        let order = self.u32()?;
        if order == 0 || order > crate::tensor::MAX_ORDER {
            return Err(ContainerError::Malformed(format!(
                "{what}: array order {order}"
            )));
        }
        let shape = (0..order)
            .map(|_| self.u32())
            .collect::<DecodeResult<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| {
                ContainerError::Malformed(format!("{what}: shape {shape:?} overflows"))
            })?;
        let width = self.precision.width();
        let raw = self.take(len.checked_mul(width).ok_or_else(|| {
            ContainerError::Malformed(format!("{what}: shape {shape:?} overflows"))
        })?)?;
        let values: Vec<f64> = match self.precision {
            Precision::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect(),
            Precision::F64 => raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ContainerError::NonFinite(what.to_string()));
        }
        Ok((shape, values))
    }

    fn tensor(&mut self, what: &str) -> Result<DenseTensor> {
        let (shape, values) = self.array(what)?;
        DenseTensor::new(shape, values).map_err(|e| malformed(what, e))
    }

    fn matrix(&mut self, what: &str) -> Result<Matrix> {
        let (shape, values) = self.array(what)?;
        if shape.len() != 2 {
            return Err(ContainerError::Malformed(format!(
                "{what}: expected a matrix, got {shape:?}"
            ))
            .into());
        }
        Ok(Matrix::from_vec(shape[0], shape[1], values))
    }

    fn vector(&mut self, what: &str) -> Result<DVector<f64>> {
        let (shape, values) = self.array(what)?;
        if shape.len() != 1 {
            return Err(ContainerError::Malformed(format!(
                "{what}: expected a vector, got {shape:?}"
            ))
            .into());
        }
        Ok(DVector::from_vec(values))
    }
}

fn malformed(what: &str, e: Error) -> Error {
    ContainerError::Malformed(format!("{what}: {e}")).into()
}

/// Parses container bytes.
pub fn decode(bytes: &[u8]) -> Result<Record> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        if bytes.len() < 4 && MAGIC.starts_with(bytes) {
            return Err(ContainerError::Truncated {
                needed: HEADER_LEN + CHECKSUM_LEN,
                available: bytes.len(),
            }
            .into());
        }
        return Err(ContainerError::BadMagic.into());
    }
    if bytes.len() < HEADER_LEN {
        return Err(ContainerError::Truncated {
            needed: HEADER_LEN + CHECKSUM_LEN,
            available: bytes.len(),
        }
        .into());
    }
    if bytes[4] != VERSION {
        return Err(ContainerError::VersionMismatch { found: bytes[4] }.into());
    }
    let payload_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let needed = usize::try_from(payload_len)
        .ok()
        .and_then(|n| n.checked_add(HEADER_LEN + CHECKSUM_LEN))
        .ok_or(ContainerError::Truncated {
            needed: usize::MAX,
            available: bytes.len(),
        })?;
    if bytes.len() < needed {
        return Err(ContainerError::Truncated {
            needed,
            available: bytes.len(),
        }
        .into());
    }
    if bytes.len() > needed {
        return Err(ContainerError::Malformed(format!(
            "{} trailing bytes after the checksum",
            bytes.len() - needed
        ))
        .into());
    }
    let body_end = needed - CHECKSUM_LEN;
    let stored = u64::from_le_bytes(bytes[body_end..].try_into().expect("8 bytes"));
    let computed = fnv1a(&bytes[..body_end]);
    if stored != computed {
        return Err(ContainerError::ChecksumMismatch { stored, computed }.into());
    }
    let kind = RecordKind::from_byte(bytes[5])?;
    let precision = Precision::from_byte(bytes[6])?;
    let mut dec = Decoder {
        bytes: &bytes[HEADER_LEN..body_end],
        pos: 0,
        precision,
    };
    let record = match kind {
        RecordKind::Dataset => {
            let layout = dec.layout()?;
            let labels = dec.axis_labels()?;
            let latents = dec.tensor("dataset latents")?;
            Record::Dataset(
                LatentDataset::new(latents, labels, layout).map_err(|e| malformed("dataset", e))?,
            )
        }
        RecordKind::Model => {
            let layout = dec.layout()?;
            let labels = dec.axis_labels()?;
            let mean = dec.vector("model mean latent")?;
            let core = dec.tensor("model core")?;
            let factors = [
                dec.matrix("model factor U2")?,
                dec.matrix("model factor U3")?,
                dec.matrix("model factor U4")?,
                dec.matrix("model factor U5")?,
            ];
            Record::Model(
                TensorModel::new(mean, core, factors, labels, layout)
                    .map_err(|e| malformed("model", e))?,
            )
        }
        RecordKind::Direction => {
            let name = dec.string()?;
            let kind = match dec.u8()? {
                0 => DirectionKind::Expression,
                1 => DirectionKind::Rotation,
                other => {
                    return Err(ContainerError::Malformed(format!("direction kind {other}")).into())
                }
            };
            let fingerprint = dec.u64()?;
            let vector = dec.vector("direction vector")?;
            Record::Direction(
                SemanticDirection::new(name, kind, vector, fingerprint)
                    .map_err(|e| malformed("direction", e))?,
            )
        }
        RecordKind::Latents => {
            let layout = dec.layout()?;
            let names = dec.labels()?;
            let m = dec.matrix("latent batch")?;
            if m.nrows() != layout.dim() {
                return Err(ContainerError::Malformed(format!(
                    "latent batch rows {} do not match layout dimension {}",
                    m.nrows(),
                    layout.dim()
                ))
                .into());
            }
            let latents = m.column_iter().map(|c| c.into_owned()).collect();
            Record::Latents(
                LatentBatch::new(names, latents, layout)
                    .map_err(|e| malformed("latent batch", e))?,
            )
        }
    };
    if dec.pos != dec.bytes.len() {
        return Err(ContainerError::Malformed(format!(
            "{} unread payload bytes",
            dec.bytes.len() - dec.pos
        ))
        .into());
    }
    Ok(record)
}

/// Writes `record` at its default precision.
pub fn write_container(record: &Record, path: &Path) -> Result<()> {
    write_container_with(record, path, record.default_precision())
}

pub fn write_container_with(record: &Record, path: &Path, precision: Precision) -> Result<()> {
    std::fs::write(path, encode(record, precision)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_container(path: &Path) -> Result<Record> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

fn wrong_kind(expected: RecordKind, found: &Record) -> Error {
    ContainerError::WrongKind {
        expected,
        found: found.kind(),
    }
    .into()
}

pub fn read_dataset(path: &Path) -> Result<LatentDataset> {
    match read_container(path)? {
        Record::Dataset(d) => Ok(d),
        other => Err(wrong_kind(RecordKind::Dataset, &other)),
    }
}

pub fn read_model(path: &Path) -> Result<TensorModel> {
    match read_container(path)? {
        Record::Model(m) => Ok(m),
        other => Err(wrong_kind(RecordKind::Model, &other)),
    }
}

pub fn read_direction(path: &Path) -> Result<SemanticDirection> {
    match read_container(path)? {
        Record::Direction(d) => Ok(d),
        other => Err(wrong_kind(RecordKind::Direction, &other)),
    }
}

/// Reads latents from either a latent batch or a dataset container.
pub fn read_latents(path: &Path) -> Result<LatentBatch> {
    match read_container(path)? {
        Record::Latents(b) => Ok(b),
        Record::Dataset(d) => Ok(d.to_batch()),
        other => Err(wrong_kind(RecordKind::Latents, &other)),
    }
}
