//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tdict_core::ktsvd::{self, TrainConfig};
use tdict_core::patches::{self, PatchShape, VolumeStack};
use tdict_core::sparse;
use tdict_core::synth;
use tdict_core::Tensor3;

use crate::error::{CliError, Result};
use crate::format::{self, CsvValue, DictMeta};
use crate::pipeline::{self, CodingParams, CompletionConfig, DenoiseConfig};

#[derive(Debug, Parser)]
#[command(name = "tdict", version, about = "Tensor dictionary learning with K-TSVD")]
pub struct Cli {
    /// Worker threads for patch coding. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted dictionary model or a planted volume.
    Synth(SynthArgs),
    /// Learn a dictionary from a data tensor or from volume patches.
    Train(TrainArgs),
    /// Add fixed-location noise or dead pixels to a volume.
    Corrupt(CorruptArgs),
    /// Fill the unobserved pixels of a volume.
    Complete(CompleteArgs),
    /// Remove noise from a volume.
    Denoise(DenoiseArgs),
    /// Compare a volume against a reference.
    Eval(EvalArgs),
    /// Stack a directory of PGM images into a volume.
    Import(ImportArgs),
    /// Write each band of a volume as a PGM image.
    Export(ExportArgs),
}

/// Settings shared by all subcommands.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Patch height.
    #[arg(long, default_value_t = 8)]
    pub p: usize,
    /// Patch width.
    #[arg(long, default_value_t = 8)]
    pub q: usize,
    /// Patch grid stride [default: p for completion, 1 for denoising].
    #[arg(long)]
    pub stride: Option<usize>,
    /// Number of atoms [default: 256 for train, 32 for synth].
    #[arg(long)]
    pub k: Option<usize>,
    /// Sparsity weight [default: value stored with the dictionary, else 0.05*sqrt(n3)].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// ADMM penalty.
    #[arg(long, default_value_t = sparse::DEFAULT_RHO)]
    pub rho: f64,
    /// ADMM residual tolerance.
    #[arg(long, default_value_t = sparse::DEFAULT_TOL)]
    pub tol: f64,
    /// ADMM iteration cap.
    #[arg(long, default_value_t = sparse::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// K-TSVD sweeps.
    #[arg(long, default_value_t = 10)]
    pub sweeps: usize,
    /// Fidelity weight of the noisy input when averaging patches [default: 30/sigma, else 0.5].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Noise standard deviation in intensity units.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Fraction of pixel sites hit by noise.
    #[arg(long)]
    pub sparsity: Option<f64>,
    /// Fraction of dead pixels.
    #[arg(long)]
    pub missing_fraction: Option<f64>,
    /// Seed for every random step.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// `d x n x n3` data with a planted dictionary and tubal-sparse codes.
    Tensor,
    /// `height x width x bands` volume whose disjoint p x p blocks are sparse.
    Volume,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub cfg: RunConfig,
    #[arg(long, value_enum, default_value_t = SynthKind::Tensor)]
    pub kind: SynthKind,
    /// Atom length.
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    /// Tube length.
    #[arg(long, default_value_t = 4)]
    pub n3: usize,
    /// Number of signals.
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    /// Non-zero tubes per signal.
    #[arg(long, default_value_t = 3)]
    pub t: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 8)]
    pub bands: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: RunConfig,
    /// Treat the input as a volume and train on this many random patches.
    #[arg(long)]
    pub patches: Option<usize>,
    /// Keep only training patches fully observed under this mask.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Per-sweep CSV [default: <output>.csv].
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Update atoms with a full t-SVD instead of power iteration.
    #[arg(long)]
    pub full_tsvd: bool,
    /// Run every sweep even when the error stops improving.
    #[arg(long)]
    pub no_early_exit: bool,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[command(flatten)]
    pub cfg: RunConfig,
    /// Where to write the mask [default: <output>.mask.tns]. Noise masks mark
    /// corrupted sites, dead-pixel masks mark surviving ones.
    #[arg(long)]
    pub mask_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[command(flatten)]
    pub cfg: RunConfig,
    /// Dictionary tensor file.
    #[arg(long)]
    pub dict: PathBuf,
    /// Observation mask (1 = observed).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Clean volume for scoring.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Write `re,psnr_db` here when a truth volume is given.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Corrupt the truth volume at each of --fractions and write a CSV of errors to --output.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])]
    pub fractions: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub cfg: RunConfig,
    /// Dictionary tensor file.
    #[arg(long)]
    pub dict: PathBuf,
    /// Clean volume for scoring.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Write `re,psnr_db` here when a truth volume is given.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub cfg: RunConfig,
    /// Clean volume.
    #[arg(long)]
    pub reference: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[command(flatten)]
    pub cfg: RunConfig,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub cfg: RunConfig,
}

fn fraction_ok(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.p == 0 || self.q == 0 {
            return bad(format!("patch size must be positive, got {}x{}", self.p, self.q));
        }
        if self.stride == Some(0) {
            return bad("stride must be >= 1".into());
        }
        if self.k == Some(0) {
            return bad("k must be >= 1".into());
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!("lambda must be > 0, got {l}"));
            }
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be > 0, got {}", self.rho));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad(format!("tol must be > 0, got {}", self.tol));
        }
        if self.max_iters == 0 || self.sweeps == 0 {
            return bad("max-iters and sweeps must be >= 1".into());
        }
        if let Some(b) = self.beta {
            if b.is_nan() || b < 0.0 {
                return bad(format!("beta must be >= 0, got {b}"));
            }
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("sigma must be >= 0, got {s}"));
            }
        }
        for (name, v) in [("sparsity", self.sparsity), ("missing-fraction", self.missing_fraction)] {
            if let Some(v) = v {
                if !fraction_ok(v) {
                    return bad(format!("{name} must lie in [0, 1], got {v}"));
                }
            }
        }
        Ok(())
    }

    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| CliError::Config("--seed is required for this command".into()))
    }

    fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Config("--input is required".into()))
    }

    fn output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::Config("--output is required".into()))
    }

    fn coding(&self, lambda: f64) -> CodingParams {
        CodingParams {
            lambda,
            rho: self.rho,
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match cli.threads {
        Some(0) => Err(CliError::Config("threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
            pool.install(|| dispatch(&cli.command))
        }
        None => dispatch(&cli.command),
    }
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Corrupt(a) => cmd_corrupt(a),
        Command::Complete(a) => cmd_complete(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Import(a) => cmd_import(a),
        Command::Export(a) => cmd_export(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_dict(path: &Path, atoms: &Tensor3, lambda: f64, seed: u64, sweeps: usize) -> Result<()> {
    format::write_tensor(path, atoms)?;
    format::write_meta(
        path,
        &DictMeta {
            k: atoms.n2(),
            d: atoms.n1(),
            n3: atoms.n3(),
            lambda,
            seed,
            sweeps,
        },
    )
}

/// Reads a dictionary and the sparsity weight it was trained with, if its
/// sidecar is present.
fn read_dict(path: &Path) -> Result<(Tensor3, Option<f64>)> {
    let atoms = format::read_tensor(path)?;
    if !format::meta_path(path).exists() {
        return Ok((atoms, None));
    }
    let meta = format::read_meta(path)?;
    if (meta.d, meta.k, meta.n3) != atoms.dims() {
        return Err(CliError::format(
            format::meta_path(path),
            format!(
                "metadata describes {}x{}x{}, tensor is {:?}",
                meta.d,
                meta.k,
                meta.n3,
                atoms.dims()
            ),
        ));
    }
    Ok((atoms, (meta.lambda > 0.0).then_some(meta.lambda)))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = &a.cfg;
    cfg.validate()?;
    let seed = cfg.seed()?;
    let out = cfg.output()?;
    let k = cfg.k.unwrap_or(32);
    create_dir(out)?;
    match a.kind {
        SynthKind::Tensor => {
            let m = synth::planted_model(a.d, k, a.n3, a.n, a.t, seed)?;
            write_dict(&out.join("dict.tns"), &m.dict, 0.0, seed, 0)?;
            format::write_tensor(&out.join("codes.tns"), &m.codes)?;
            format::write_tensor(&out.join("y.tns"), &m.y)?;
            println!("wrote dict.tns, codes.tns and y.tns to {}", out.display());
        }
        SynthKind::Volume => {
            if cfg.p != cfg.q {
                return Err(CliError::Config("planted volumes need square blocks (p = q)".into()));
            }
            let v = synth::planted_volume(a.height, a.width, a.bands, cfg.p, k, a.t, seed)?;
            write_dict(&out.join("dict.tns"), &v.dict, 0.0, seed, 0)?;
            format::write_volume(&out.join("volume.tns"), &v.volume)?;
            println!("wrote dict.tns and volume.tns to {}", out.display());
        }
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = &a.cfg;
    cfg.validate()?;
    let seed = cfg.seed()?;
    let out = cfg.output()?;
    let data = format::read_tensor(cfg.input()?)?;
    let y = match a.patches {
        Some(count) => {
            let mask = a.mask.as_deref().map(format::read_mask).transpose()?;
            let shape = PatchShape::new(cfg.p, cfg.q);
            pipeline::training_patches(&VolumeStack::new(data), shape, count, seed, mask.as_ref())?
        }
        None if a.mask.is_some() => {
            return Err(CliError::Config("--mask needs --patches".into()));
        }
        None => data,
    };
    let lambda = cfg.lambda.unwrap_or_else(|| sparse::default_lambda(y.n3()));
    let mut tc = TrainConfig::new(cfg.k.unwrap_or(256), lambda, cfg.sweeps, seed);
    tc.rho = cfg.rho;
    tc.tol = cfg.tol;
    tc.max_iters = cfg.max_iters;
    tc.full_tsvd = a.full_tsvd;
    if a.no_early_exit {
        tc.early_exit_tol = 0.0;
    }
    let trained = ktsvd::train(&y, &tc)?;
    let r = &trained.report;
    write_dict(out, trained.dictionary.atoms(), lambda, seed, r.sweeps.len())?;
    let rows: Vec<Vec<CsvValue>> = r
        .sweeps
        .iter()
        .map(|s| {
            vec![
                CsvValue::Int(s.sweep as u64),
                CsvValue::Float(s.representation_error),
                CsvValue::Int(s.atoms_replaced as u64),
            ]
        })
        .collect();
    let report = a.report.clone().unwrap_or_else(|| with_suffix(out, ".csv"));
    format::write_text(
        &report,
        &format::render_csv(&["sweep", "representation_error", "atoms_replaced"], &rows),
    )?;
    let last = r.sweeps.last().expect("at least one sweep");
    println!(
        "trained {} atoms on {} signals: {} sweeps{}, representation error {:.6}",
        trained.dictionary.k(),
        y.n2(),
        r.sweeps.len(),
        if r.stopped_early { " (stopped early)" } else { "" },
        last.representation_error
    );
    Ok(())
}

fn cmd_corrupt(a: &CorruptArgs) -> Result<()> {
    let cfg = &a.cfg;
    cfg.validate()?;
    let seed = cfg.seed()?;
    let out = cfg.output()?;
    let v = format::read_volume(cfg.input()?)?;
    let (corrupted, mask) = match (cfg.sparsity, cfg.missing_fraction) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("give either --sparsity or --missing-fraction".into()));
        }
        (Some(s), None) => {
            let sigma = cfg
                .sigma
                .ok_or_else(|| CliError::Config("--sparsity needs --sigma".into()))?;
            patches::add_fixed_location_noise(&v, s, sigma, seed)?
        }
        (None, Some(f)) => patches::apply_dead_pixels(&v, f, seed)?,
        (None, None) => {
            return Err(CliError::Config(
                "give --sparsity with --sigma, or --missing-fraction".into(),
            ));
        }
    };
    format::write_volume(out, &corrupted)?;
    let mask_path = a.mask_output.clone().unwrap_or_else(|| with_suffix(out, ".mask.tns"));
    format::write_mask(&mask_path, &mask)?;
    println!("wrote {} and {}", out.display(), mask_path.display());
    Ok(())
}

fn report_metrics(truth: &VolumeStack, est: &VolumeStack, metrics: Option<&Path>) -> Result<()> {
    let re = patches::reconstruction_error(truth, est)?;
    let psnr = patches::psnr(truth, est)?;
    println!("RE {re:.6}  PSNR {psnr:.3} dB");
    if let Some(path) = metrics {
        let csv = format::render_csv(&["re", "psnr_db"], &[vec![CsvValue::Float(re), CsvValue::Float(psnr)]]);
        format::write_text(path, &csv)?;
    }
    Ok(())
}

fn cmd_complete(a: &CompleteArgs) -> Result<()> {
    let cfg = &a.cfg;
    cfg.validate()?;
    let out = cfg.output()?;
    let (dict, stored) = read_dict(&a.dict)?;
    let lambda = cfg
        .lambda
        .or(stored)
        .unwrap_or_else(|| sparse::default_lambda(dict.n3()));
    let cc = CompletionConfig {
        p: cfg.p,
        q: cfg.q,
        stride: cfg.stride.unwrap_or(cfg.p),
        coding: cfg.coding(lambda),
    };
    if a.sweep {
        if a.fractions.iter().any(|&f| !fraction_ok(f)) {
            return Err(CliError::Config("fractions must lie in [0, 1]".into()));
        }
        let truth_path = a
            .truth
            .as_deref()
            .ok_or_else(|| CliError::Config("--sweep needs --truth".into()))?;
        let truth = format::read_volume(truth_path)?;
        let rows = pipeline::completion_sweep(&dict, &truth, &a.fractions, cfg.seed()?, &cc)?;
        let table: Vec<Vec<CsvValue>> = rows
            .iter()
            .map(|r| {
                vec![
                    CsvValue::Float(r.missing_fraction),
                    CsvValue::Float(r.re),
                    CsvValue::Float(r.re_zero_fill),
                ]
            })
            .collect();
        format::write_text(
            out,
            &format::render_csv(&["missing_fraction", "re", "re_zero_fill"], &table),
        )?;
        for r in &rows {
            println!(
                "missing {:.0}%: RE {:.6} (zero fill {:.6})",
                r.missing_fraction * 100.0,
                r.re,
                r.re_zero_fill
            );
        }
        return Ok(());
    }
    let v = format::read_volume(cfg.input()?)?;
    let mask_path = a
        .mask
        .as_deref()
        .ok_or_else(|| CliError::Config("--mask is required".into()))?;
    let mask = format::read_mask(mask_path)?;
    let done = pipeline::complete(&dict, &v, &mask, &cc)?;
    format::write_volume(out, &done.volume)?;
    println!(
        "completed {} patches ({} without observed pixels)",
        done.patches, done.empty_patches
    );
    if let Some(t) = &a.truth {
        report_metrics(&format::read_volume(t)?, &done.volume, a.metrics.as_deref())?;
    }
    Ok(())
}

fn cmd_denoise(a: &DenoiseArgs) -> Result<()> {
    let cfg = &a.cfg;
    cfg.validate()?;
    let out = cfg.output()?;
    let v = format::read_volume(cfg.input()?)?;
    let (dict, stored) = read_dict(&a.dict)?;
    let lambda = cfg
        .lambda
        .or(stored)
        .unwrap_or_else(|| sparse::default_lambda(dict.n3()));
    let dc = DenoiseConfig {
        p: cfg.p,
        q: cfg.q,
        stride: cfg.stride.unwrap_or(1),
        beta: cfg.beta.unwrap_or_else(|| pipeline::default_beta(cfg.sigma)),
        coding: cfg.coding(lambda),
    };
    let den = pipeline::denoise(&dict, &v, &dc)?;
    format::write_volume(out, &den)?;
    println!("wrote {}", out.display());
    if let Some(t) = &a.truth {
        report_metrics(&format::read_volume(t)?, &den, a.metrics.as_deref())?;
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let cfg = &a.cfg;
    cfg.validate()?;
    let est = format::read_volume(cfg.input()?)?;
    let truth = format::read_volume(&a.reference)?;
    let re = patches::reconstruction_error(&truth, &est)?;
    let psnr = patches::psnr(&truth, &est)?;
    let csv = format::render_csv(&["re", "psnr_db"], &[vec![CsvValue::Float(re), CsvValue::Float(psnr)]]);
    print!("{csv}");
    eprintln!("RE {re:.6}  PSNR {psnr:.3} dB");
    if let Some(out) = &cfg.output {
        format::write_text(out, &csv)?;
    }
    Ok(())
}

fn cmd_import(a: &ImportArgs) -> Result<()> {
    let cfg = &a.cfg;
    let out = cfg.output()?;
    let v = format::import_pgm_dir(cfg.input()?)?;
    format::write_volume(out, &v)?;
    let (h, w, b) = v.dims();
    println!("wrote {h}x{w}x{b} volume to {}", out.display());
    Ok(())
}

fn cmd_export(a: &ExportArgs) -> Result<()> {
    let cfg = &a.cfg;
    let v = format::read_volume(cfg.input()?)?;
    let files = format::export_pgm_dir(&v, cfg.output()?)?;
    println!("wrote {} images to {}", files.len(), cfg.output()?.display());
    Ok(())
}
