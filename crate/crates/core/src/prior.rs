//! Amplitude-prior estimators that map a linear mel spectrogram back to a
//! linear amplitude spectrogram, and the timing/accuracy benchmark that
//! compares them.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dsp::{self, AmplitudeSpectrogram, Domain, StftPlan, Waveform};
use crate::melbank::{self, MelFilterbank, MelSpectrogram, PINV_RCOND};
use crate::metrics::las_rmse_amplitudes;
use crate::nnls::Nnls;
use crate::{Error, Result, AMPLITUDE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorVariant {
    Nnls,
    LeastSquares,
    PseudoInverse,
    PseudoInverseAbs,
}

impl PriorVariant {
    pub const ALL: [PriorVariant; 4] = [
        PriorVariant::Nnls,
        PriorVariant::LeastSquares,
        PriorVariant::PseudoInverse,
        PriorVariant::PseudoInverseAbs,
    ];

    /// Short name used on the command line and in reports.
    pub fn key(self) -> &'static str {
        match self {
            PriorVariant::Nnls => "nnls",
            PriorVariant::LeastSquares => "ls",
            PriorVariant::PseudoInverse => "pi",
            PriorVariant::PseudoInverseAbs => "pi-abs",
        }
    }

    /// Column heading in the text table.
    pub fn label(self) -> &'static str {
        match self {
            PriorVariant::Nnls => "NNLS",
            PriorVariant::LeastSquares => "LS",
            PriorVariant::PseudoInverse => "PI",
            PriorVariant::PseudoInverseAbs => "PI w/ abs",
        }
    }
}

impl FromStr for PriorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PriorVariant::ALL
            .into_iter()
            .find(|v| v.key() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::InvalidConfig(format!("unknown prior method '{s}' (expected nnls, ls, pi, pi-abs)"))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorMethod {
    pub variant: PriorVariant,
    pub nnls_max_iter: usize,
    pub nnls_tol: f64,
}

impl PriorMethod {
    pub fn new(variant: PriorVariant) -> Self {
        Self {
            variant,
            nnls_max_iter: 500,
            nnls_tol: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nnls_max_iter == 0 || !(self.nnls_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "nnls_max_iter and nnls_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Estimate before the final `1e-5` floor (the absolute value is already
/// applied for [`PriorVariant::PseudoInverseAbs`]).
pub fn estimate_prior_unfloored(
    x: &MelSpectrogram,
    fb: &MelFilterbank,
    m: &PriorMethod,
) -> Result<Array2<f64>> {
    m.validate()?;
    if x.domain != Domain::Linear {
        return Err(Error::DomainMismatch { expected: "linear" });
    }
    if x.n_mels() != fb.n_mels() {
        return Err(Error::shape(
            format!("{} mel bands", fb.n_mels()),
            format!("{} mel bands", x.n_mels()),
        ));
    }
    let frames = x.frames.view();
    Ok(match m.variant {
        PriorVariant::PseudoInverse => frames.dot(&fb.pinv().t()),
        PriorVariant::PseudoInverseAbs => {
            let mut a = frames.dot(&fb.pinv().t());
            a.mapv_inplace(f64::abs);
            a
        }
        PriorVariant::LeastSquares => fb.svd().solve_rows(frames, PINV_RCOND),
        PriorVariant::Nnls => {
            let solver = Nnls::new(fb.matrix().view(), m.nnls_max_iter, m.nnls_tol);
            let mut out = Array2::zeros((x.n_frames(), fb.n_freq()));
            for (t, (row, mut dst)) in frames
                .axis_iter(Axis(0))
                .zip(out.axis_iter_mut(Axis(0)))
                .enumerate()
            {
                let sol = solver.solve(row).map_err(|e| Error::NnlsNotConverged {
                    frame: t,
                    max_iter: e.max_iter,
                })?;
                dst.assign(&sol.x);
            }
            out
        }
    })
}

/// Linear amplitude estimate `Â ≥ 1e-5` from a linear mel spectrogram.
pub fn estimate_prior(
    x: &MelSpectrogram,
    fb: &MelFilterbank,
    m: &PriorMethod,
) -> Result<AmplitudeSpectrogram> {
    let mut a = estimate_prior_unfloored(x, fb, m)?;
    a.mapv_inplace(|v| v.max(AMPLITUDE_FLOOR));
    Ok(AmplitudeSpectrogram {
        frames: a,
        domain: Domain::Linear,
        config: fb.spectral_config().clone(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub warmup: usize,
    /// Minimum number of timed repetitions per method; clips are cycled when
    /// there are fewer clips than this.
    pub min_reps: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            warmup: 2,
            min_reps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub label: String,
    /// Median wall time per clip, seconds.
    pub time_per_clip_s: f64,
    pub mean_time_per_clip_s: f64,
    pub repetitions: usize,
    /// Pooled over every time-frequency cell of every clip.
    pub las_rmse: f64,
    pub per_clip_las_rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub methods: Vec<MethodResult>,
    pub clip_count: usize,
    pub clip_duration_s: f64,
    pub threads: usize,
    pub hardware: String,
    pub timing: String,
}

impl BenchReport {
    pub fn method(&self, variant: PriorVariant) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == variant.key())
    }

    /// Text table with one column per method.
    pub fn to_table(&self) -> String {
        let width = 11;
        let mut out = String::new();
        let _ = write!(out, "{:<13}", "Method");
        for m in &self.methods {
            let _ = write!(out, "| {:<width$}", m.label);
        }
        out.push('\n');
        let _ = write!(out, "{:<13}", "Time (↓)");
        for m in &self.methods {
            let _ = write!(out, "| {:<width$}", format_duration(m.time_per_clip_s));
        }
        out.push('\n');
        let _ = write!(out, "{:<13}", "LAS-RMSE (↓)");
        for m in &self.methods {
            let _ = write!(out, "| {:<width$}", format!("{:.4}", m.las_rmse));
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{} clips, {:.2} s each; time is per clip ({}); {} thread(s); {}",
            self.clip_count, self.clip_duration_s, self.timing, self.threads, self.hardware
        );
        out
    }
}

pub fn format_duration(seconds: f64) -> String {
    if seconds >= 1.0 {
        format!("{seconds:.3}s")
    } else if seconds >= 1e-3 {
        format!("{:.1}ms", seconds * 1e3)
    } else {
        format!("{:.1}µs", seconds * 1e6)
    }
}

fn hardware_note() -> String {
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string());
    format!("{model}, single core")
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Times each estimator on precomputed mel features and scores it by LAS-RMSE
/// against the true amplitude spectrogram of every clip.
///
/// Methods are interleaved clip by clip so that slow drifts in machine load
/// affect all of them alike.
pub fn bench_priors(
    clips: &[Waveform],
    fb: &MelFilterbank,
    methods: &[PriorMethod],
    opts: BenchOptions,
) -> Result<BenchReport> {
    if clips.is_empty() {
        return Err(Error::EmptyInput);
    }
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no prior methods selected".into()));
    }
    let plan = StftPlan::new(fb.spectral_config())?;
    let mut features = Vec::with_capacity(clips.len());
    for clip in clips {
        let a = dsp::amplitude(clip, &plan)?;
        let x = melbank::apply_mel(&a, fb)?;
        features.push((a, x));
    }

    for m in methods {
        for _ in 0..opts.warmup {
            std::hint::black_box(estimate_prior(&features[0].1, fb, m)?);
        }
    }

    let reps = opts.min_reps.max(clips.len());
    let mut times = vec![Vec::with_capacity(reps); methods.len()];
    let mut sq_err = vec![0.0; methods.len()];
    let mut cells = vec![0usize; methods.len()];
    let mut per_clip = vec![Vec::with_capacity(clips.len()); methods.len()];

    for rep in 0..reps {
        let (a_true, x) = &features[rep % clips.len()];
        for (k, m) in methods.iter().enumerate() {
            let start = Instant::now();
            let est = estimate_prior(x, fb, m)?;
            let elapsed = start.elapsed().max(Duration::from_nanos(1));
            times[k].push(elapsed.as_secs_f64());
            if rep < clips.len() {
                let rmse = las_rmse_amplitudes(&est.frames, &a_true.frames)?;
                let n = est.frames.len();
                sq_err[k] += rmse * rmse * n as f64;
                cells[k] += n;
                per_clip[k].push(rmse);
            }
        }
    }

    let results = methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mean = times[k].iter().sum::<f64>() / times[k].len() as f64;
            MethodResult {
                method: m.variant.key().to_string(),
                label: m.variant.label().to_string(),
                time_per_clip_s: median(&mut times[k]),
                mean_time_per_clip_s: mean,
                repetitions: times[k].len(),
                las_rmse: (sq_err[k] / cells[k] as f64).sqrt(),
                per_clip_las_rmse: std::mem::take(&mut per_clip[k]),
            }
        })
        .collect();

    Ok(BenchReport {
        methods: results,
        clip_count: clips.len(),
        clip_duration_s: clips.iter().map(Waveform::duration).sum::<f64>() / clips.len() as f64,
        threads: 1,
        hardware: hardware_note(),
        timing: format!(
            "median of {reps} timed runs after {} warm-up runs, features precomputed",
            opts.warmup
        ),
    })
}
