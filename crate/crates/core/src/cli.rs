//! The `latentfactor` command line.
//!
//! Every subcommand reads and writes LTC1 containers; nothing is cached
//! between invocations. Failures print one machine-readable line on stderr,
//!
//! ```text
//! lf-error: exit=<code> kind=<args|file|numeric|invariant> message=<text>
//! ```
//!
//! and exit with 2 (bad arguments), 3 (file errors), 4 (numeric failure) or
//! 5 (invariant violation).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use crate::container::{
    read_container, read_direction, read_model, write_container, write_container_with, Precision,
    Record,
};
use crate::dataset::{
    generate_synthetic, load_dataset, AxisLabels, GridLayout, LatentBatch, LatentDataset,
    SyntheticSpec,
};
use crate::decomposition::{
    mode_orthogonality_deviation, orthonormality_deviation, relative_error, ROTATION_MODE,
};
use crate::directions::{
    apply_edit, direction_orthogonality_report, rotation_parameter, EditRequest, SemanticDirection,
};
use crate::error::{Error, ErrorCategory};
use crate::model::TensorModel;
use crate::pipeline::fit;
use crate::recovery::{ParamForm, Recoverer, RecoveryConfig};

/// Tolerance used by `diagnose` for orthonormality and all-orthogonality.
pub const DIAGNOSE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "latentfactor",
    version,
    about = "Multilinear models of structured GAN latent datasets",
    long_about = "Fits a mean-centered HOSVD model to a person × expression × intensity × \
                  rotation grid of latent codes, recovers model parameters for new latents \
                  and extracts global expression and yaw edit directions.\n\n\
                  Log verbosity is read from the LF_LOG environment variable \
                  (error, warn, info, debug, trace)."
)]
pub struct Cli {
    /// Text file of key=value recovery settings (lambda1, lambda2, max_iters,
    /// learning_rate, tolerance, closed_form_max_params). Flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with planted structure.
    Synth(SynthArgs),
    /// Fit a model to a dataset.
    Fit(FitArgs),
    /// Reconstruct the latent of one grid cell from a model.
    Reconstruct(ReconstructArgs),
    /// Recover model parameters for latents.
    Recover(RecoverArgs),
    /// Extract expression and yaw directions from a model.
    Direction(DirectionArgs),
    /// Move latents along a direction.
    Edit(EditArgs),
    /// Check model invariants and report direction orthogonality.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid size as D,P,E,I,R.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    /// Standard deviation of additive noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub base_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub person_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub expression_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rotation_scale: f64,
    /// Per-intensity gains, one per intensity [default: 0,1,..,I-1].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ramp: Option<Vec<f64>>,
    /// Also write the planted offsets as a latent batch.
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridArg {
    /// 6 expressions, intensities 0-4, left/right views, canonical labels.
    Bu3dfe,
    /// Any grid.
    Any,
}

impl From<GridArg> for GridLayout {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Bu3dfe => GridLayout::Bu3dfe,
            GridArg::Any => GridLayout::Any,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset container.
    pub dataset: PathBuf,
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    /// Label grid the dataset must follow.
    #[arg(long, value_enum, default_value_t = GridArg::Bu3dfe)]
    pub grid: GridArg,
    /// Leave this person (label or index) out of the fit.
    #[arg(long, value_name = "PERSON")]
    pub exclude_person: Option<String>,
    /// Where to write the excluded person's latents.
    #[arg(long, value_name = "FILE", requires = "exclude_person")]
    pub held_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Model container.
    pub model: PathBuf,
    /// Cell as person,expression,intensity,rotation (labels or indices).
    #[arg(long, value_delimiter = ',', required = true)]
    pub cell: Vec<String>,
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F32)]
    pub precision: PrecisionArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormArg {
    RankOne,
    FullRank,
}

impl From<FormArg> for ParamForm {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::RankOne => ParamForm::RankOne,
            FormArg::FullRank => ParamForm::FullRank,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        }
    }
}

#[derive(Debug, Args)]
pub struct RecoveryFlags {
    /// Tikhonov weight, one value or four comma-separated [default: 0.1].
    #[arg(long)]
    pub lambda1: Option<String>,
    /// Sum-to-one weight, one value or four comma-separated [default: 0.1].
    #[arg(long)]
    pub lambda2: Option<String>,
    /// Iteration cap [default: 2000].
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// First step length [default: 0.001].
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Relative-improvement stopping threshold [default: 1e-9].
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Largest P·E·I·R solved in closed form [default: 4096].
    #[arg(long)]
    pub closed_form_max_params: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LatentInput {
    /// Latent batch or dataset container.
    #[arg(long, value_name = "FILE")]
    pub latent: PathBuf,
    /// With a dataset input: the single cell person,expression,intensity,rotation.
    #[arg(long, value_delimiter = ',')]
    pub cell: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Model container.
    pub model: PathBuf,
    #[command(flatten)]
    pub input: LatentInput,
    #[arg(long, value_enum, default_value_t = FormArg::RankOne)]
    pub form: FormArg,
    #[command(flatten)]
    pub recovery: RecoveryFlags,
    /// Write the reconstructions as a latent batch.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DirectionArgs {
    /// Model container.
    pub model: PathBuf,
    /// Output directory, created if missing; one `<name>.ltc` per direction.
    #[arg(short, long, value_name = "DIR")]
    pub output: PathBuf,
    /// Only write these directions (expression labels or `yaw`).
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    /// Direction container.
    #[arg(long, value_name = "FILE")]
    pub direction: PathBuf,
    #[command(flatten)]
    pub input: LatentInput,
    /// Edit strength s in w + s·n.
    #[arg(long, allow_hyphen_values = true)]
    pub strength: f64,
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F32)]
    pub precision: PrecisionArg,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Model container.
    pub model: PathBuf,
    /// Dataset to check in-sample reconstruction against.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Grid checked for `--dataset`.
    #[arg(long, value_enum, default_value_t = GridArg::Any)]
    pub grid: GridArg,
}

/// A CLI failure with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Args(String),
    #[error("{0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Args(_) => 2,
            CliError::Invariant(_) => 5,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Args => 2,
                ErrorCategory::File => 3,
                ErrorCategory::Numeric => 4,
                ErrorCategory::Invariant => 5,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "args",
            3 => "file",
            4 => "numeric",
            _ => "invariant",
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Reports go to `out`, errors to stderr.
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = e.print();
            let first = e.to_string().lines().next().unwrap_or_default().to_string();
            report(&CliError::Args(first));
            return 2;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

fn report(e: &CliError) {
    let message = e.to_string().replace('\n', " ");
    eprintln!(
        "lf-error: exit={} kind={} message={message}",
        e.exit_code(),
        e.kind()
    );
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Synth(a) => synth(a, out),
        Command::Fit(a) => fit_cmd(a, out),
        Command::Reconstruct(a) => reconstruct(a, out),
        Command::Recover(a) => recover(a, cli.config.as_deref(), out),
        Command::Direction(a) => direction(a, out),
        Command::Edit(a) => edit(a, out),
        Command::Diagnose(a) => diagnose(a, out),
    }
}

fn emit(out: &mut dyn Write, line: impl std::fmt::Display) -> CliResult {
    writeln!(out, "{line}").map_err(|e| {
        CliError::Core(Error::Io {
            path: "<stdout>".into(),
            source: e,
        })
    })
}

fn require_file(path: &Path) -> CliResult {
    if !path.is_file() {
        return Err(CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        }));
    }
    Ok(())
}

/// The output's directory must exist and the output must not be an input.
fn check_output(output: &Path, inputs: &[&Path]) -> CliResult {
    let parent = output.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            return Err(CliError::Core(Error::Io {
                path: dir.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory"),
            }));
        }
    }
    if let Ok(o) = output.canonicalize() {
        for input in inputs {
            if input.canonicalize().map(|i| i == o).unwrap_or(false) {
                return Err(CliError::Args(format!(
                    "output {} would overwrite an input file",
                    output.display()
                )));
            }
        }
    }
    Ok(())
}

fn synth(a: &SynthArgs, out: &mut dyn Write) -> CliResult {
    let dims: [usize; 5] = a
        .dims
        .clone()
        .try_into()
        .map_err(|_| CliError::Args("--dims needs exactly 5 values".into()))?;
    check_output(&a.output, &[])?;
    if let Some(t) = &a.truth {
        check_output(t, &[])?;
    }
    let mut spec = SyntheticSpec::new(dims, a.seed).with_noise(a.noise);
    spec.base_scale = a.base_scale;
    spec.person_scale = a.person_scale;
    spec.expression_scale = a.expression_scale;
    spec.rotation_scale = a.rotation_scale;
    spec.intensity_ramp = a.ramp.clone();
    let (ds, truth) = generate_synthetic(&spec)?;
    if let Some(path) = &a.truth {
        let batch = truth.to_batch(ds.labels(), ds.layout())?;
        write_container(&Record::Latents(batch), path)?;
    }
    write_container(&Record::Dataset(ds), &a.output)?;
    emit(
        out,
        format_args!(
            "wrote synthetic dataset D={} P={} E={} I={} R={} seed={} noise={} to {}",
            dims[0],
            dims[1],
            dims[2],
            dims[3],
            dims[4],
            a.seed,
            a.noise,
            a.output.display()
        ),
    )
}

fn fit_cmd(a: &FitArgs, out: &mut dyn Write) -> CliResult {
    require_file(&a.dataset)?;
    check_output(&a.output, &[&a.dataset])?;
    if let Some(h) = &a.held_out {
        check_output(h, &[&a.dataset])?;
    }
    let mut ds = load_dataset(&a.dataset, a.grid.into())?;
    if let Some(key) = &a.exclude_person {
        let person = ds.labels().resolve(2, key)?;
        let (train, held) = ds.hold_out_person(person)?;
        emit(
            out,
            format_args!(
                "excluded person {} ({} latents)",
                held.labels().persons[0],
                held.to_batch().len()
            ),
        )?;
        if let Some(path) = &a.held_out {
            write_container(&Record::Dataset(held), path)?;
        }
        ds = train;
    }
    let f = fit(&ds)?;
    let dec = &f.decomposition;
    for (mode, (sv, rank)) in dec
        .singular_values()
        .iter()
        .zip(dec.numerical_rank())
        .enumerate()
    {
        let max = sv.first().copied().unwrap_or(0.0);
        let min = sv.last().copied().unwrap_or(0.0);
        emit(
            out,
            format_args!(
                "mode {}: size={} rank={} sigma_max={:.6e} sigma_min={:.6e}",
                mode + 1,
                dec.data_shape()[mode],
                rank,
                max,
                min
            ),
        )?;
    }
    let residual = relative_error(&dec.recompose()?, ds.latents())?;
    emit(out, format_args!("residual={residual:.3e}"))?;
    write_container(&Record::Model(f.model), &a.output)?;
    emit(out, format_args!("wrote model to {}", a.output.display()))
}

fn parse_cell(labels: &AxisLabels, cell: &[String]) -> CliResult<[usize; 4]> {
    if cell.len() != 4 {
        return Err(CliError::Args(format!(
            "--cell needs person,expression,intensity,rotation; got {} value(s)",
            cell.len()
        )));
    }
    let mut idx = [0; 4];
    for (k, key) in cell.iter().enumerate() {
        idx[k] = labels.resolve(k + 2, key.trim())?;
    }
    Ok(idx)
}

fn reconstruct(a: &ReconstructArgs, out: &mut dyn Write) -> CliResult {
    require_file(&a.model)?;
    check_output(&a.output, &[&a.model])?;
    let m = read_model(&a.model)?;
    let cell = parse_cell(m.labels(), &a.cell)?;
    let w = m.reconstruct_cell(cell)?;
    let batch = LatentBatch::single(a.cell.join("/"), w, m.layout())?;
    write_container_with(&Record::Latents(batch), &a.output, a.precision.into())?;
    emit(
        out,
        format_args!("wrote reconstruction to {}", a.output.display()),
    )
}

fn read_input_latents(input: &LatentInput) -> CliResult<LatentBatch> {
    require_file(&input.latent)?;
    match (read_container(&input.latent)?, &input.cell) {
        (Record::Dataset(ds), Some(cell)) => cell_of(&ds, cell),
        (Record::Dataset(ds), None) => Ok(ds.to_batch()),
        (Record::Latents(b), None) => Ok(b),
        (Record::Latents(_), Some(_)) => Err(CliError::Args(
            "--cell applies only to dataset inputs".into(),
        )),
        (other, _) => Err(CliError::Core(Error::Container(
            crate::container::ContainerError::WrongKind {
                expected: crate::container::RecordKind::Latents,
                found: other.kind(),
            },
        ))),
    }
}

fn cell_of(ds: &LatentDataset, cell: &[String]) -> CliResult<LatentBatch> {
    let idx = parse_cell(ds.labels(), cell)?;
    Ok(LatentBatch::single(
        cell.join("/"),
        ds.latent(idx)?,
        ds.layout(),
    )?)
}

fn recovery_config(config: Option<&Path>, flags: &RecoveryFlags) -> CliResult<RecoveryConfig> {
    let mut cfg = match config {
        Some(path) => {
            require_file(path)?;
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            RecoveryConfig::from_kv_str(&text)?
        }
        None => RecoveryConfig::default(),
    };
    if let Some(v) = &flags.lambda1 {
        cfg.set("lambda1", v)?;
    }
    if let Some(v) = &flags.lambda2 {
        cfg.set("lambda2", v)?;
    }
    if let Some(v) = flags.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = flags.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = flags.tolerance {
        cfg.tolerance = v;
    }
    if let Some(v) = flags.closed_form_max_params {
        cfg.closed_form_max_params = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn recover(a: &RecoverArgs, config: Option<&Path>, out: &mut dyn Write) -> CliResult {
    require_file(&a.model)?;
    let cfg = recovery_config(config, &a.recovery)?;
    if let Some(o) = &a.output {
        check_output(o, &[&a.model, &a.input.latent])?;
    }
    let m = read_model(&a.model)?;
    let batch = read_input_latents(&a.input)?;
    let form: ParamForm = a.form.into();
    let recoverer = Recoverer::new(&m, &cfg)?;
    let results = recoverer.recover_batch(&batch.latents, form, &cfg);
    let mut recons = Vec::with_capacity(results.len());
    for (name, r) in batch.names.iter().zip(results) {
        let r = r?;
        emit(
            out,
            format_args!(
                "{name} form={form} final_loss={:.9e} objective={:.9e} iterations={} converged={}",
                r.final_loss, r.objective, r.iterations_used, r.converged
            ),
        )?;
        recons.push(crate::recovery::reconstruct(&m, &r.params)?);
    }
    if let Some(o) = &a.output {
        let b = LatentBatch::new(batch.names.clone(), recons, m.layout())?;
        write_container(&Record::Latents(b), o)?;
    }
    Ok(())
}

fn direction(a: &DirectionArgs, out: &mut dyn Write) -> CliResult {
    require_file(&a.model)?;
    let m = read_model(&a.model)?;
    let tm = m.truncate_intensity()?;
    let dirs = crate::directions::all_directions(&tm, &m)?;
    let selected: Vec<&SemanticDirection> = match &a.only {
        None => dirs.iter().collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                dirs.iter().find(|d| d.name() == n.trim()).ok_or_else(|| {
                    let known: Vec<&str> = dirs.iter().map(|d| d.name()).collect();
                    CliError::Args(format!(
                        "unknown direction {n:?} (known: {})",
                        known.join(", ")
                    ))
                })
            })
            .collect::<CliResult<_>>()?,
    };
    std::fs::create_dir_all(&a.output).map_err(|source| Error::Io {
        path: a.output.clone(),
        source,
    })?;
    for d in selected {
        let path = a.output.join(format!("{}.ltc", d.name()));
        write_container(&Record::Direction(d.clone()), &path)?;
        emit(
            out,
            format_args!(
                "{} kind={} norm={:.6e} -> {}",
                d.name(),
                d.kind().as_str(),
                d.vector().norm(),
                path.display()
            ),
        )?;
    }
    Ok(())
}

fn edit(a: &EditArgs, out: &mut dyn Write) -> CliResult {
    require_file(&a.direction)?;
    check_output(&a.output, &[&a.direction, &a.input.latent])?;
    let dir = read_direction(&a.direction)?;
    let batch = read_input_latents(&a.input)?;
    let edited = batch
        .latents
        .iter()
        .map(|w| {
            apply_edit(&EditRequest {
                latent: w,
                direction: &dir,
                strength: a.strength,
            })
        })
        .collect::<crate::error::Result<Vec<DVector<f64>>>>()?;
    let n = edited.len();
    let result = LatentBatch::new(batch.names, edited, batch.layout)?;
    write_container_with(&Record::Latents(result), &a.output, a.precision.into())?;
    emit(
        out,
        format_args!(
            "edited {n} latent(s) along {} with strength {} -> {}",
            dir.name(),
            a.strength,
            a.output.display()
        ),
    )
}

fn diagnose(a: &DiagnoseArgs, out: &mut dyn Write) -> CliResult {
    require_file(&a.model)?;
    let m = read_model(&a.model)?;
    let mut violations = Vec::new();

    for (k, u) in m.factors().iter().enumerate() {
        let dev = orthonormality_deviation(u);
        emit(
            out,
            format_args!("factor U{} orthonormality_deviation={dev:.3e}", k + 2),
        )?;
        if dev > DIAGNOSE_TOLERANCE {
            violations.push(format!("U{} is not orthonormal", k + 2));
        }
    }
    // The stored core has the latent factor absorbed, so all-orthogonality
    // holds for the dataset modes only.
    for mode in 2..=5 {
        let dev = mode_orthogonality_deviation(m.core(), mode)?;
        emit(
            out,
            format_args!("core mode {mode} all_orthogonality_deviation={dev:.3e}"),
        )?;
        if dev > DIAGNOSE_TOLERANCE {
            violations.push(format!("core slices along mode {mode} are not orthogonal"));
        }
    }
    if m.axis_sizes()[3] == 2 {
        let q5 = rotation_parameter(m.factor(ROTATION_MODE)?)?;
        let dev = (q5.norm() - 1.0).abs();
        emit(
            out,
            format_args!("rotation parameter norm_deviation={dev:.3e}"),
        )?;
        if dev > 1e-10 {
            violations.push("rotation parameter is not unit norm".into());
        }
    }

    let tm = m.truncate_intensity()?;
    let dirs = crate::directions::all_directions(&tm, &m)?;
    let report = direction_orthogonality_report(&dirs)?;
    let names: Vec<&str> = dirs.iter().map(|d| d.name()).collect();
    emit(
        out,
        format_args!("direction cosine similarity ({})", names.join(", ")),
    )?;
    for (i, name) in names.iter().enumerate() {
        let row: Vec<String> = (0..names.len())
            .map(|j| format!("{:+.4}", report[(i, j)]))
            .collect();
        emit(out, format_args!("  {name:>12} {}", row.join(" ")))?;
    }

    if let Some(path) = &a.dataset {
        require_file(path)?;
        let ds = load_dataset(path, a.grid.into())?;
        let worst = in_sample_error(&m, &ds)?;
        emit(
            out,
            format_args!("in-sample max relative error={worst:.3e}"),
        )?;
        if worst > 1e-6 {
            violations.push(format!(
                "in-sample reconstruction error {worst:.3e} exceeds 1e-6"
            ));
        }
    }

    if violations.is_empty() {
        emit(out, "invariants: ok")
    } else {
        emit(
            out,
            format_args!("invariants: {} violation(s)", violations.len()),
        )?;
        Err(CliError::Invariant(violations.join("; ")))
    }
}

fn in_sample_error(m: &TensorModel, ds: &LatentDataset) -> CliResult<f64> {
    if ds.dims()[1..] != m.axis_sizes()[..] || ds.dims()[0] != m.latent_dim() {
        return Err(CliError::Core(Error::DimensionMismatch(format!(
            "dataset grid {:?} does not match the model",
            ds.dims()
        ))));
    }
    let mut worst: f64 = 0.0;
    for (cell, w) in ds.cells() {
        let w = DVector::from_column_slice(w);
        let err = (m.reconstruct_cell(cell)? - &w).norm() / w.norm().max(f64::MIN_POSITIVE);
        worst = worst.max(err);
    }
    Ok(worst)
}
