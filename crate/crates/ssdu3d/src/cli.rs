//! The `ssdu3d` command-line tool.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssdu3d_core::eval::{cs_recon, score, zero_filled, CsConfig};
use ssdu3d_core::net::unrolled_forward;
use ssdu3d_core::phantom::simulate_subject;
use ssdu3d_core::sample::TrainingSample;
use ssdu3d_core::train::{train_with, TrainConfig};
use ssdu3d_core::{ComplexVolume, Real};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{load_config, to_versioned_json, SimulationConfig};
use crate::dataset::{load_dataset, save_dataset, Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::image::{load_raw, save_png, save_raw, RawHeader};
use crate::report::{MetricsReport, ReconEntry, ReconIndex, TrainReport, VolumeScores};
use crate::binary::COMPLEX_DTYPE;

#[derive(Parser, Debug)]
#[command(name = "ssdu3d", version, about = "Self-supervised unrolled reconstruction for 3D multi-coil MRI")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random draw.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON configuration file for the subcommand.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Run strictly sequentially.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate subjects and write a dataset file.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        subjects: u32,
        /// Id of the first subject; ids are consecutive.
        #[arg(long, default_value_t = 0)]
        first_id: u32,
        /// Override the slab length from the config.
        #[arg(long, conflicts_with = "whole")]
        slab_len: Option<usize>,
        /// Keep whole volumes instead of slabs.
        #[arg(long)]
        whole: bool,
    },
    /// Train a network and write a checkpoint plus a JSON report.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Report path; defaults to the checkpoint path with a `.json` extension.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Reconstruct every sample of a dataset with a trained network.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Reconstruct with a conventional method.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: BaselineMethod,
    },
    /// Score reconstructions against the ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Reconstruction directory; not needed for `--method ground-truth`.
        #[arg(long)]
        recon: Option<PathBuf>,
        /// Report label; defaults to the method recorded in the directory.
        #[arg(long)]
        method: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    ZeroFilled,
    Cs,
}

/// Parse `argv`, run, and return the process exit status. Failures are
/// reported on stderr as one JSON object with `kind` and `message`.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => return report_error(&Error::Usage(e.to_string().trim().to_string())),
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> i32 {
    eprintln!("{}", serde_json::json!({ "kind": e.kind(), "message": e.to_string() }));
    e.exit_code()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, subjects, first_id, slab_len, whole } => simulate(&common, subjects, first_id, slab_len, whole),
        Command::Train { common, data, epochs, report } => train(&common, &data, epochs, report),
        Command::Reconstruct { common, checkpoint, data } => reconstruct(&common, &checkpoint, &data),
        Command::Baseline { common, data, method } => baseline(&common, &data, method),
        Command::Evaluate { common, data, recon, method } => evaluate(&common, &data, recon.as_deref(), method),
    }
}

fn simulate(c: &Common, subjects: u32, first_id: u32, slab_len: Option<usize>, whole: bool) -> Result<()> {
    let mut cfg: SimulationConfig = load_config(c.config.as_deref())?;
    if whole {
        cfg.slab_len = None;
    } else if slab_len.is_some() {
        cfg.slab_len = slab_len;
    }
    if subjects == 0 {
        return Err(Error::Usage("--subjects must be at least 1".into()));
    }
    let seed = c.seed.unwrap_or(0);
    let ids: Vec<u32> = (first_id..first_id + subjects).collect();
    let mut samples = Vec::new();
    for &id in &ids {
        let s = simulate_subject(&cfg.subject, id, seed)?;
        let len = cfg.slab_len.unwrap_or(s.truth.dims().nx);
        samples.extend(s.training_samples(len, cfg.stride.unwrap_or(len), &cfg.split)?);
    }
    let ds = Dataset { meta: DatasetMeta { seed, subjects: ids, simulation: Some(cfg) }, samples };
    save_dataset(&c.out, &ds)?;
    eprintln!("wrote {} samples to {}", ds.samples.len(), c.out.display());
    Ok(())
}

fn train(c: &Common, data: &Path, epochs: Option<usize>, report: Option<PathBuf>) -> Result<()> {
    let mut cfg: TrainConfig = load_config(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    let ds = load_dataset(data)?;
    let start = Instant::now();
    let (params, history) = train_with(&ds.samples, &cfg, |e, loss| {
        eprintln!("epoch {:>3}/{} loss {loss:.6} ({:.1}s)", e + 1, cfg.epochs, start.elapsed().as_secs_f64());
    })?;
    let wall = start.elapsed().as_secs_f64();
    save_checkpoint(&c.out, &params)?;
    let report_file = report.unwrap_or_else(|| c.out.with_extension("json"));
    TrainReport {
        epoch_losses: history.epoch_losses,
        wall_time_seconds: wall,
        checkpoint: c.out.clone(),
        n_samples: ds.samples.len(),
        n_parameters: params.n_parameters(),
        config: to_versioned_json(&cfg),
    }
    .save(&report_file)
}

/// Write one reconstruction per sample into `dir` with an index.
fn write_recons(
    dir: &Path,
    method: &str,
    ds: &Dataset,
    mut recon: impl FnMut(&TrainingSample) -> Result<ComplexVolume>,
) -> Result<()> {
    let mut entries = Vec::with_capacity(ds.samples.len());
    let mut total = 0.0;
    for s in &ds.samples {
        let t = Instant::now();
        let x = recon(s)?.scale(1.0 / s.scale);
        let secs = t.elapsed().as_secs_f64();
        total += secs;
        let stem = format!("s{:04}_slab{:03}", s.subject_id, s.slab_index);
        let header = RawHeader {
            dims: x.dims(),
            dtype: COMPLEX_DTYPE.into(),
            subject_id: s.subject_id,
            slab_index: s.slab_index,
            method: method.into(),
        };
        save_raw(&dir.join(format!("{stem}.raw")), &x, &header)?;
        save_png(&dir.join(format!("{stem}.png")), &x)?;
        entries.push(ReconEntry {
            subject_id: s.subject_id,
            slab_index: s.slab_index,
            raw: format!("{stem}.raw"),
            png: format!("{stem}.png"),
            runtime_seconds: secs,
        });
        eprintln!("{method}: subject {} slab {} ({secs:.1}s)", s.subject_id, s.slab_index);
    }
    ReconIndex { method: method.into(), rate: mean_rate(ds), runtime_seconds: total, volumes: entries }.save(dir)
}

fn mean_rate(ds: &Dataset) -> Real {
    let n = ds.samples.len().max(1) as Real;
    ds.samples.iter().map(|s| 1.0 / s.mask.plane_fraction()).sum::<Real>() / n
}

fn reconstruct(c: &Common, checkpoint: &Path, data: &Path) -> Result<()> {
    let params = load_checkpoint(checkpoint)?;
    let ds = load_dataset(data)?;
    write_recons(&c.out, "ssdu", &ds, |s| Ok(unrolled_forward(&s.kspace, &s.operator()?, &params, params.config.unrolls)?))
}

fn baseline(c: &Common, data: &Path, method: BaselineMethod) -> Result<()> {
    let ds = load_dataset(data)?;
    match method {
        BaselineMethod::ZeroFilled => write_recons(&c.out, "zero-filled", &ds, |s| Ok(zero_filled(&s.kspace, &s.operator()?)?)),
        BaselineMethod::Cs => {
            let cfg: CsConfig = load_config(c.config.as_deref())?;
            write_recons(&c.out, "cs", &ds, |s| Ok(cs_recon(&s.kspace, &s.operator()?, &cfg)?.image))
        }
    }
}

fn evaluate(c: &Common, data: &Path, recon: Option<&Path>, method: Option<String>) -> Result<()> {
    let ds = load_dataset(data)?;
    let truth = |s: &TrainingSample| -> Result<ComplexVolume> {
        let g = s.ground_truth.as_ref().ok_or_else(|| {
            Error::Usage(format!("subject {} slab {} has no ground truth", s.subject_id, s.slab_index))
        })?;
        Ok(g.scale(1.0 / s.scale))
    };
    let mut pairs = Vec::with_capacity(ds.samples.len());
    let (label, runtime) = match (method.as_deref(), recon) {
        (Some("ground-truth"), _) => {
            for s in &ds.samples {
                let t = truth(s)?;
                pairs.push((s.subject_id, s.slab_index, t.clone(), t));
            }
            ("ground-truth".to_string(), 0.0)
        }
        (_, None) => return Err(Error::Usage("--recon is required unless --method ground-truth".into())),
        (m, Some(dir)) => {
            let index = ReconIndex::load(dir)?;
            for s in &ds.samples {
                let entry = index
                    .volumes
                    .iter()
                    .find(|e| e.subject_id == s.subject_id && e.slab_index == s.slab_index)
                    .ok_or_else(|| Error::Usage(format!("{} has no reconstruction of subject {} slab {}", dir.display(), s.subject_id, s.slab_index)))?;
                let (x, _) = load_raw(&dir.join(&entry.raw))?;
                pairs.push((s.subject_id, s.slab_index, x, truth(s)?));
            }
            (m.map(str::to_string).unwrap_or(index.method), index.runtime_seconds)
        }
    };
    let volumes = score_all(&pairs, !c.deterministic)?;
    let report = MetricsReport::new(&label, mean_rate(&ds), runtime, volumes)?;
    report.save(&c.out)?;
    print!("{}", report.table());
    Ok(())
}

type Pair = (u32, u32, ComplexVolume, ComplexVolume);

/// Score every pair, spreading volumes over threads when `parallel`.
fn score_all(pairs: &[Pair], parallel: bool) -> Result<Vec<VolumeScores>> {
    let one = |(id, slab, x, t): &Pair| -> Result<VolumeScores> { Ok(VolumeScores::new(*id, *slab, score(x, t)?)) };
    let threads = if parallel { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { 1 };
    if threads <= 1 || pairs.len() <= 1 {
        return pairs.iter().map(one).collect();
    }
    let chunk = pairs.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = pairs.chunks(chunk).map(|c| scope.spawn(move || c.iter().map(one).collect::<Result<Vec<_>>>())).collect();
        let mut out = Vec::with_capacity(pairs.len());
        for h in handles {
            out.extend(h.join().expect("scoring thread panicked")?);
        }
        Ok(out)
    })
}
