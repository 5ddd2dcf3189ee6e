//! Framing, windowing, forward/inverse STFT and polar conversions.
//!
//! All spectrograms are frame-major: row `t` is the one-sided spectrum of
//! frame `t`, with `n_fft / 2 + 1` columns.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative tolerance for the squared-window overlap-add check.
const COLA_TOLERANCE: f64 = 1e-10;
/// Floor on the overlap-added squared window during ISTFT normalisation.
const WINDOW_SUM_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub win_length: usize,
    pub window: WindowKind,
    /// Reflect-pad `n_fft / 2` samples on both sides before framing.
    pub center: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            n_fft: 1024,
            hop: 256,
            win_length: 1024,
            window: WindowKind::Hann,
            center: true,
        }
    }
}

impl SpectralConfig {
    pub fn n_freq(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Checks sizes and the squared-window overlap-add condition.
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        if self.hop == 0 || self.n_fft < 2 {
            return Err(Error::InvalidConfig("hop and n_fft must be positive".into()));
        }
        if !(self.hop <= self.win_length && self.win_length <= self.n_fft) {
            return Err(Error::InvalidConfig(format!(
                "need hop <= win_length <= n_fft, got hop={} win_length={} n_fft={}",
                self.hop, self.win_length, self.n_fft
            )));
        }
        let deviation = self.cola_deviation();
        if !(deviation <= COLA_TOLERANCE) {
            return Err(Error::Cola { deviation });
        }
        Ok(())
    }

    /// Relative peak-to-peak deviation of the overlap-added squared window.
    pub fn cola_deviation(&self) -> f64 {
        let window = self.window();
        let mut sums = vec![0.0; self.hop];
        for (n, w) in window.iter().enumerate() {
            sums[n % self.hop] += w * w;
        }
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        if max <= 0.0 {
            return f64::INFINITY;
        }
        (max - min) / max
    }

    /// Analysis window of length `n_fft`: a periodic window of `win_length`
    /// samples, zero-padded symmetrically.
    pub fn window(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_fft];
        let offset = (self.n_fft - self.win_length.min(self.n_fft)) / 2;
        let len = self.win_length as f64;
        for i in 0..self.win_length.min(self.n_fft) {
            out[offset + i] = match self.window {
                WindowKind::Hann => 0.5 - 0.5 * (2.0 * PI * i as f64 / len).cos(),
            };
        }
        out
    }

    /// Number of STFT frames produced for a signal of `n` samples.
    pub fn frame_count(&self, n: usize) -> usize {
        if self.center {
            1 + n / self.hop
        } else if n < self.n_fft {
            0
        } else {
            1 + (n - self.n_fft) / self.hop
        }
    }

    /// Length of the waveform that `istft` returns for `frames` frames.
    pub fn istft_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else if self.center {
            (frames - 1) * self.hop
        } else {
            self.n_fft + (frames - 1) * self.hop
        }
    }
}

/// Mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn truncated(&self, len: usize) -> Waveform {
        Waveform {
            samples: self.samples[..len.min(self.samples.len())].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub frames: Array2<Complex64>,
    pub config: SpectralConfig,
}

impl ComplexSpectrogram {
    pub fn new(frames: Array2<Complex64>, config: SpectralConfig) -> Result<Self> {
        check_columns(frames.ncols(), &config)?;
        Ok(Self { frames, config })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSpectrogram {
    pub frames: Array2<f64>,
    pub domain: Domain,
    pub config: SpectralConfig,
}

impl AmplitudeSpectrogram {
    pub fn new(frames: Array2<f64>, domain: Domain, config: SpectralConfig) -> Result<Self> {
        check_columns(frames.ncols(), &config)?;
        if domain == Domain::Linear && frames.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig(
                "linear amplitude spectrogram has negative entries".into(),
            ));
        }
        Ok(Self {
            frames,
            domain,
            config,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn to_log(&self) -> AmplitudeSpectrogram {
        match self.domain {
            Domain::Log => self.clone(),
            Domain::Linear => AmplitudeSpectrogram {
                frames: crate::melbank::log_compress(&self.frames),
                domain: Domain::Log,
                config: self.config.clone(),
            },
        }
    }

    pub fn to_linear(&self) -> AmplitudeSpectrogram {
        match self.domain {
            Domain::Linear => self.clone(),
            Domain::Log => AmplitudeSpectrogram {
                frames: crate::melbank::log_expand(&self.frames),
                domain: Domain::Linear,
                config: self.config.clone(),
            },
        }
    }
}

/// Phase in radians, principal values in (-π, π].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpectrogram {
    pub frames: Array2<f64>,
    pub config: SpectralConfig,
}

impl PhaseSpectrogram {
    pub fn new(frames: Array2<f64>, config: SpectralConfig) -> Result<Self> {
        check_columns(frames.ncols(), &config)?;
        Ok(Self { frames, config })
    }
}

fn check_columns(cols: usize, config: &SpectralConfig) -> Result<()> {
    if cols != config.n_freq() {
        return Err(Error::shape(
            format!("{} frequency bins", config.n_freq()),
            format!("{cols} frequency bins"),
        ));
    }
    Ok(())
}

/// Reflect index `i` (which may lie outside `0..n`) into the signal, numpy
/// `reflect` style, repeating the reflection as often as needed.
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= n as isize {
        k = period - k;
    }
    k as usize
}

/// Reusable STFT/ISTFT plan for one configuration.
#[derive(Clone)]
pub struct StftPlan {
    config: SpectralConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftPlan").field("config", &self.config).finish()
    }
}

impl StftPlan {
    pub fn new(config: &SpectralConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            config: config.clone(),
            window: config.window(),
            forward: planner.plan_fft_forward(config.n_fft),
            inverse: planner.plan_fft_inverse(config.n_fft),
        })
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn stft(&self, w: &Waveform) -> Result<ComplexSpectrogram> {
        let cfg = &self.config;
        if w.sample_rate != cfg.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: cfg.sample_rate,
                actual: w.sample_rate,
            });
        }
        if w.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = w.len();
        if !cfg.center && n < cfg.n_fft {
            return Err(Error::TooShort {
                min: cfg.n_fft,
                actual: n,
            });
        }
        let n_frames = cfg.frame_count(n);
        let n_freq = cfg.n_freq();
        let pad = if cfg.center { (cfg.n_fft / 2) as isize } else { 0 };

        let mut out = Array2::<Complex64>::zeros((n_frames, n_freq));
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for (t, mut row) in out.rows_mut().into_iter().enumerate() {
            let start = (t * cfg.hop) as isize - pad;
            for (k, slot) in buf.iter_mut().enumerate() {
                let idx = start + k as isize;
                let sample = if idx >= 0 && (idx as usize) < n {
                    w.samples[idx as usize]
                } else {
                    w.samples[reflect_index(idx, n)]
                };
                *slot = Complex64::new(sample * self.window[k], 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for (dst, src) in row.iter_mut().zip(&buf[..n_freq]) {
                *dst = *src;
            }
        }
        ComplexSpectrogram::new(out, cfg.clone())
    }

    pub fn istft(&self, s: &ComplexSpectrogram) -> Result<Waveform> {
        let cfg = &self.config;
        if s.config != *cfg {
            return Err(Error::InvalidConfig(
                "spectrogram config differs from plan config".into(),
            ));
        }
        check_columns(s.frames.ncols(), cfg)?;
        let n_frames = s.n_frames();
        let out_len = cfg.istft_len(n_frames);
        if n_frames == 0 {
            return Waveform::new(Vec::new(), cfg.sample_rate);
        }
        let n_fft = cfg.n_fft;
        let n_freq = cfg.n_freq();
        let full_len = n_fft + (n_frames - 1) * cfg.hop;
        let mut acc = vec![0.0; full_len];
        let mut norm = vec![0.0; full_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / n_fft as f64;

        for (t, row) in s.frames.rows().into_iter().enumerate() {
            for k in 0..n_freq {
                buf[k] = row[k];
            }
            // Hermitian completion; DC and Nyquist imaginary parts are dropped.
            buf[0].im = 0.0;
            if n_fft % 2 == 0 {
                buf[n_fft / 2].im = 0.0;
            }
            for k in 1..(n_fft - n_freq + 1) {
                buf[n_fft - k] = row[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = t * cfg.hop;
            for k in 0..n_fft {
                let w = self.window[k];
                acc[start + k] += buf[k].re * scale * w;
                norm[start + k] += w * w;
            }
        }
        let offset = if cfg.center { n_fft / 2 } else { 0 };
        let samples = (offset..offset + out_len)
            .map(|i| acc[i] / norm[i].max(WINDOW_SUM_FLOOR))
            .collect();
        Waveform::new(samples, cfg.sample_rate)
    }
}

pub fn stft(w: &Waveform, cfg: &SpectralConfig) -> Result<ComplexSpectrogram> {
    StftPlan::new(cfg)?.stft(w)
}

pub fn istft(s: &ComplexSpectrogram) -> Result<Waveform> {
    StftPlan::new(&s.config)?.istft(s)
}

/// Splits a complex spectrogram into linear amplitude and phase.
///
/// The angle of `0 + 0j` is defined as 0 and `-π` is folded to `π`.
pub fn polar_split(s: &ComplexSpectrogram) -> (AmplitudeSpectrogram, PhaseSpectrogram) {
    let amp = s.frames.mapv(|c| c.norm());
    let phase = s.frames.mapv(|c| principal_angle(c.im, c.re));
    (
        AmplitudeSpectrogram {
            frames: amp,
            domain: Domain::Linear,
            config: s.config.clone(),
        },
        PhaseSpectrogram {
            frames: phase,
            config: s.config.clone(),
        },
    )
}

/// `atan2(y, x)` folded into (-π, π], with `atan2(0, 0) = 0`.
pub fn principal_angle(y: f64, x: f64) -> f64 {
    if y == 0.0 && x == 0.0 {
        return 0.0;
    }
    let a = y.atan2(x);
    if a <= -PI {
        PI
    } else {
        a
    }
}

pub fn recombine(a: &AmplitudeSpectrogram, p: &PhaseSpectrogram) -> Result<ComplexSpectrogram> {
    if a.domain != Domain::Linear {
        return Err(Error::DomainMismatch { expected: "linear" });
    }
    if a.frames.dim() != p.frames.dim() {
        return Err(Error::shape(
            format!("{:?}", a.frames.dim()),
            format!("{:?}", p.frames.dim()),
        ));
    }
    let mut out = Array2::<Complex64>::zeros(a.frames.dim());
    Zip::from(&mut out)
        .and(&a.frames)
        .and(&p.frames)
        .for_each(|o, &amp, &phi| *o = Complex64::from_polar(amp, phi));
    ComplexSpectrogram::new(out, a.config.clone())
}

/// Magnitude spectrogram of a waveform.
pub fn amplitude(w: &Waveform, plan: &StftPlan) -> Result<AmplitudeSpectrogram> {
    Ok(polar_split(&plan.stft(w)?).0)
}
