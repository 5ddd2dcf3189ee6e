//! `freev` command-line front end.

mod config;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use freev_core::dsp::{amplitude, StftPlan, Waveform};
use freev_core::fixtures::{FixtureKind, FixtureSpec};
use freev_core::io::{load_tensor, load_weights, read_wav, save_tensor, save_weights, write_wav, write_wav_pcm16};
use freev_core::losses::waveform_losses;
use freev_core::melbank::{apply_mel, log_compress, MelSpectrogram};
use freev_core::metrics::{evaluate, mean_report, measure_rtf, MetricReport};
use freev_core::net::{gen_weights, vocode, ArchManifest};
use freev_core::prior::{bench_priors, BenchOptions, BenchReport, PriorMethod, PriorVariant};
use ndarray::Ix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;

#[derive(Parser)]
#[command(name = "freev", version, about = "Pseudo-inverse amplitude prior vocoder toolkit")]
struct Cli {
    /// TOML file with [spectral], [mel] and [loss] overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write amplitude, log-amplitude and mel tensors for a WAV file.
    Features {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Time and score the amplitude-prior estimators.
    BenchPrior(BenchArgs),
    /// Synthesize a waveform from a mel tensor.
    Vocode {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        mel: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// The mel tensor holds log values.
        #[arg(long)]
        log_mel: bool,
        /// Also measure the real-time factor (single thread).
        #[arg(long)]
        rtf: bool,
        #[arg(long, default_value_t = 5)]
        runs: usize,
    },
    /// Objective metrics for every reference/degraded WAV pair.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        deg: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Loss breakdown of a predicted waveform against a reference.
    Losses {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Write seeded random generator weights.
    GenWeights {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Arch::Freev)]
        arch: Arch,
    },
    /// Bar chart of one or more bench-prior reports.
    Plot {
        #[arg(long = "report", required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic WAV clips.
    Fixtures {
        #[arg(long, default_value = "harmonic_voice")]
        kind: FixtureKind,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        f0: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
        /// 16-bit PCM instead of 32-bit float.
        #[arg(long)]
        pcm16: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    /// Directory of WAV clips.
    #[arg(long)]
    clips: Option<PathBuf>,
    /// Number of harmonic-voice fixtures (seeds 0..N).
    #[arg(long)]
    fixtures: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: Source,
    /// Fixture length in seconds.
    #[arg(long, default_value_t = 2.0)]
    duration: f64,
    #[arg(long, value_delimiter = ',', default_value = "nnls,ls,pi,pi-abs")]
    methods: Vec<PriorVariant>,
    /// JSON report path; the text table goes next to it with a .txt extension.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Freev,
    Apnet2,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", if first.starts_with("error: ") { first.to_string() } else { format!("error: {first}") });
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string().replace('\n', " ")).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Features { input, out_dir } => cmd_features(&cfg, &input, &out_dir),
        Command::BenchPrior(args) => cmd_bench_prior(&cfg, args),
        Command::Vocode {
            weights,
            mel,
            out,
            log_mel,
            rtf,
            runs,
        } => cmd_vocode(&cfg, &weights, &mel, &out, log_mel, rtf.then_some(runs)),
        Command::Eval { reference, deg, out } => cmd_eval(&cfg, &reference, &deg, &out),
        Command::Losses { pred, reference } => cmd_losses(&cfg, &pred, &reference),
        Command::GenWeights { seed, out, arch } => cmd_gen_weights(&cfg, seed, &out, arch),
        Command::Plot { reports, out } => cmd_plot(&reports, &out),
        Command::Fixtures {
            kind,
            count,
            duration,
            seed,
            f0,
            out_dir,
            pcm16,
        } => cmd_fixtures(&cfg, kind, count, duration, seed, f0, &out_dir, pcm16),
    }
}

/// Reads a WAV and checks it against the configured sample rate.
fn load_wav(path: &Path, cfg: &Config) -> Result<Waveform> {
    let w = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    ensure!(
        w.sample_rate == cfg.spectral.sample_rate,
        "{}: sample rate {} Hz does not match the configured {} Hz (no implicit resampling)",
        path.display(),
        w.sample_rate,
        cfg.spectral.sample_rate
    );
    Ok(w)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// FNV-1a over the f32 sample bits, as written to disk.
fn checksum(samples: &[f64]) -> String {
    let h = samples
        .iter()
        .flat_map(|v| (*v as f32).to_bits().to_le_bytes())
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    format!("{h:016x}")
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_features(cfg: &Config, input: &Path, out_dir: &Path) -> Result<()> {
    let fb = cfg.filterbank()?;
    let w = load_wav(input, cfg)?;
    let plan = StftPlan::new(&cfg.spectral)?;
    let a = amplitude(&w, &plan)?;
    let mel = apply_mel(&a, &fb)?;
    create_dir(out_dir)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("features");
    for (suffix, t) in [
        ("amp", a.frames.clone()),
        ("logamp", log_compress(&a.frames)),
        ("mel", mel.frames),
    ] {
        let path = out_dir.join(format!("{stem}.{suffix}.fvt"));
        save_tensor(&path, &t.into_dyn()).with_context(|| format!("writing {}", path.display()))?;
        let (t, c) = (a.frames.nrows(), if suffix == "mel" { fb.n_mels() } else { fb.n_freq() });
        println!("{} [{t}, {c}]", path.display());
    }
    Ok(())
}

fn cmd_bench_prior(cfg: &Config, args: BenchArgs) -> Result<()> {
    let fb = cfg.filterbank()?;
    let clips = match (&args.source.clips, args.source.fixtures) {
        (Some(dir), _) => wav_files(dir)?
            .iter()
            .map(|p| load_wav(p, cfg))
            .collect::<Result<Vec<_>>>()?,
        (None, Some(n)) => {
            ensure!(args.duration > 0.0, "--duration must be positive");
            (0..n as u64)
                .map(|seed| {
                    FixtureSpec::new(FixtureKind::HarmonicVoice, args.duration, seed).generate(cfg.spectral.sample_rate)
                })
                .collect()
        }
        (None, None) => unreachable!("clap enforces one source"),
    };
    ensure!(!clips.is_empty(), "no clips to benchmark");
    ensure!(!args.methods.is_empty(), "no prior methods selected");
    let mut methods: Vec<PriorVariant> = Vec::new();
    for m in args.methods {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    let methods: Vec<PriorMethod> = methods.into_iter().map(PriorMethod::new).collect();
    let report = bench_priors(
        &clips,
        &fb,
        &methods,
        BenchOptions {
            warmup: args.warmup,
            min_reps: args.reps,
        },
    )?;
    write_json(&args.out, &report)?;
    let table = report.to_table();
    let txt = args.out.with_extension("txt");
    std::fs::write(&txt, &table).with_context(|| format!("writing {}", txt.display()))?;
    print!("{table}");
    Ok(())
}

#[derive(Serialize)]
struct VocodeSummary {
    frames: usize,
    samples: usize,
    seconds: f64,
    checksum: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    rtf: Option<freev_core::metrics::RtfReport>,
}

fn cmd_vocode(
    cfg: &Config,
    weights: &Path,
    mel: &Path,
    out: &Path,
    log_mel: bool,
    rtf_runs: Option<usize>,
) -> Result<()> {
    let fb = cfg.filterbank()?;
    let w = load_weights(weights).with_context(|| format!("reading {}", weights.display()))?;
    let frames = load_tensor(mel)
        .with_context(|| format!("reading {}", mel.display()))?
        .into_dimensionality::<Ix2>()
        .map_err(|_| anyhow::anyhow!("{}: mel tensor must be 2-D [frames, mels]", mel.display()))?;
    let domain = if log_mel {
        freev_core::dsp::Domain::Log
    } else {
        freev_core::dsp::Domain::Linear
    };
    let x = MelSpectrogram::new(frames, domain)?;
    let result = vocode(&x, &fb, &w)?;
    let rtf = match rtf_runs {
        Some(runs) => Some(measure_rtf(|| Ok(vocode(&x, &fb, &w)?.waveform.duration()), runs)?),
        None => None,
    };
    write_wav(out, &result.waveform).with_context(|| format!("writing {}", out.display()))?;
    let summary = VocodeSummary {
        frames: x.n_frames(),
        samples: result.waveform.len(),
        seconds: result.waveform.duration(),
        checksum: checksum(&result.waveform.samples),
        rtf,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[derive(Serialize)]
struct PairReport {
    name: String,
    metrics: MetricReport,
}

#[derive(Serialize)]
struct EvalReport {
    pairs: Vec<PairReport>,
    mean: MetricReport,
}

/// Worker count from `FREEV_THREADS`, if set.
fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("FREEV_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow::anyhow!("FREEV_THREADS must be a positive integer, got '{v}'"))?;
            ensure!(n > 0, "FREEV_THREADS must be a positive integer, got '{v}'");
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn cmd_eval(cfg: &Config, reference: &Path, deg: &Path, out: &Path) -> Result<()> {
    let fb = cfg.filterbank()?;
    let refs = wav_files(reference)?;
    ensure!(!refs.is_empty(), "no WAV files in {}", reference.display());
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let pairs: Vec<PairReport> = pool.install(|| {
        refs.par_iter()
            .map(|r| {
                let name = r.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let d = deg.join(&name);
                ensure!(d.exists(), "{}: no degraded counterpart {}", r.display(), d.display());
                let metrics = evaluate(&load_wav(r, cfg)?, &load_wav(&d, cfg)?, &fb)
                    .with_context(|| format!("evaluating {name}"))?;
                Ok(PairReport { name, metrics })
            })
            .collect::<Result<_>>()
    })?;
    let reports: Vec<MetricReport> = pairs.iter().map(|p| p.metrics.clone()).collect();
    let report = EvalReport {
        mean: mean_report(&reports)?,
        pairs,
    };
    write_json(out, &report)?;
    let m = &report.mean;
    println!("Pairs | MCD(↓) | LAS-RMSE(↓) | V/UV F1(↑) | Periodicity(↓) | F0-RMSE(↓) | STOI(↑)");
    println!(
        "{} | {:.3} | {:.3} | {:.3} | {:.3} | {} | {:.3}",
        report.pairs.len(),
        m.mcd,
        m.las_rmse,
        m.vuv_f1,
        m.periodicity_err,
        m.f0_rmse.map_or("n/a".to_string(), |v| format!("{v:.2} {}", m.f0_unit)),
        m.stoi
    );
    Ok(())
}

fn cmd_losses(cfg: &Config, pred: &Path, reference: &Path) -> Result<()> {
    let fb = cfg.filterbank()?;
    let b = waveform_losses(&load_wav(pred, cfg)?, &load_wav(reference, cfg)?, &fb, &cfg.loss)?;
    println!("{}", serde_json::to_string_pretty(&b)?);
    Ok(())
}

fn cmd_gen_weights(cfg: &Config, seed: u64, out: &Path, arch: Arch) -> Result<()> {
    let base = match arch {
        Arch::Freev => ArchManifest::freev(),
        Arch::Apnet2 => ArchManifest::apnet2(),
    };
    let manifest = ArchManifest {
        n_mels: cfg.mel.n_mels,
        n_freq: cfg.spectral.n_freq(),
        asp_dim: match arch {
            Arch::Freev => cfg.spectral.n_freq(),
            Arch::Apnet2 => base.asp_dim,
        },
        ..base
    };
    let w = gen_weights(seed, &manifest)?;
    save_weights(out, &w).with_context(|| format!("writing {}", out.display()))?;
    println!("{}", serde_json::to_string_pretty(&w.param_counts())?);
    Ok(())
}

fn cmd_plot(reports: &[PathBuf], out: &Path) -> Result<()> {
    let mut loaded = Vec::with_capacity(reports.len());
    for p in reports {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let r: BenchReport =
            serde_json::from_str(&text).with_context(|| format!("{}: malformed bench report", p.display()))?;
        let label = p.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_string();
        loaded.push((label, r));
    }
    let svg = plot::render(&loaded)?;
    std::fs::write(out, svg).with_context(|| format!("writing {}", out.display()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_fixtures(
    cfg: &Config,
    kind: FixtureKind,
    count: usize,
    duration: f64,
    seed: u64,
    f0: Option<f64>,
    out_dir: &Path,
    pcm16: bool,
) -> Result<()> {
    ensure!(duration > 0.0, "--duration must be positive");
    if count == 0 {
        bail!("--count must be at least 1");
    }
    create_dir(out_dir)?;
    for s in seed..seed + count as u64 {
        let mut spec = FixtureSpec::new(kind, duration, s);
        spec.f0 = f0;
        let w = spec.generate(cfg.spectral.sample_rate);
        let path = out_dir.join(format!("fixture_{s:04}.wav"));
        if pcm16 {
            write_wav_pcm16(&path, &w)
        } else {
            write_wav(&path, &w)
        }
        .with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}
