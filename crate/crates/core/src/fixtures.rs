//! Deterministic synthetic signals used as stand-ins for recorded speech.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Sine,
    HarmonicVoice,
    Noise,
    Chirp,
    Silence,
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "sine" => FixtureKind::Sine,
            "harmonic_voice" | "harmonic-voice" | "voice" => FixtureKind::HarmonicVoice,
            "noise" => FixtureKind::Noise,
            "chirp" => FixtureKind::Chirp,
            "silence" => FixtureKind::Silence,
            _ => return Err(Error::InvalidConfig(format!("unknown fixture kind '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    /// Seconds.
    pub duration: f64,
    /// Fundamental in Hz for `Sine` and `HarmonicVoice`; drawn from the seed
    /// when absent.
    pub f0: Option<f64>,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn new(kind: FixtureKind, duration: f64, seed: u64) -> Self {
        Self {
            kind,
            duration,
            f0: None,
            seed,
        }
    }

    pub fn with_f0(mut self, f0: f64) -> Self {
        self.f0 = Some(f0);
        self
    }

    pub fn generate(&self, sample_rate: u32) -> Waveform {
        assert!(self.duration > 0.0, "fixture duration must be positive");
        let n = (self.duration * sample_rate as f64).round() as usize;
        let sr = sample_rate as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let samples = match self.kind {
            FixtureKind::Silence => vec![0.0; n],
            FixtureKind::Sine => {
                let f0 = self.f0.unwrap_or(220.0);
                (0..n).map(|i| 0.5 * (2.0 * PI * f0 * i as f64 / sr).sin()).collect()
            }
            FixtureKind::Noise => (0..n).map(|_| 0.3 * gaussian(&mut rng)).collect(),
            FixtureKind::Chirp => {
                let (f_start, f_end) = (100.0, 4000.0);
                let k = (f_end - f_start) / self.duration;
                (0..n)
                    .map(|i| {
                        let t = i as f64 / sr;
                        0.5 * (2.0 * PI * (f_start * t + 0.5 * k * t * t)).sin()
                    })
                    .collect()
            }
            FixtureKind::HarmonicVoice => {
                let f0 = self.f0.unwrap_or_else(|| rng.random_range(VOICE_F0_RANGE));
                harmonic_voice(n, sr, f0, &mut rng)
            }
        };
        Waveform {
            samples,
            sample_rate,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

const VOWELS: [[f64; 3]; 5] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [440.0, 1020.0, 2240.0],
];
/// Default pitch range of the voice fixture (Hz), a female register.
const VOICE_F0_RANGE: std::ops::Range<f64> = 160.0..260.0;
/// Breath noise added to the glottal source, relative to its fundamental.
const ASPIRATION: f64 = 0.1;
const NOISE_FLOOR: f64 = 3e-4;
const LOWER_BANDWIDTHS: [f64; 3] = [80.0, 100.0, 140.0];
/// Fixed upper formants keep energy in the 3-4 kHz region.
const UPPER_FORMANTS: [(f64, f64); 2] = [(3300.0, 250.0), (3750.0, 200.0)];
/// Resonator coefficients are refreshed this often (samples).
const CONTROL_PERIOD: usize = 32;

/// Band-limited glottal-like source (harmonics with spectral tilt and pitch
/// drift, plus aspiration noise) through a cascade of formant resonators and lip radiation. Each
/// syllable has its own vowel, with formants gliding between neighbours;
/// a syllabic envelope and a low noise floor complete the signal.
fn harmonic_voice(n: usize, sr: f64, f0: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let vibrato_rate = rng.random_range(4.0..6.0);
    let vibrato_depth = rng.random_range(0.01..0.03);
    let glide = rng.random_range(-0.15..0.15);
    let duration = n as f64 / sr;
    let syllable_rate = rng.random_range(3.0..4.5);
    let phase0 = rng.random_range(0.0..PI);

    // Envelope nulls sit at syllable boundaries: syllable k spans
    // syllable_rate·t + phase0/π ∈ [k, k + 1).
    let syllables = (syllable_rate * duration + 2.0).ceil() as usize;
    let targets: Vec<[f64; 3]> = (0..syllables)
        .map(|_| {
            let v = VOWELS[rng.random_range(0..VOWELS.len())];
            v.map(|f| f * rng.random_range(0.93..1.07))
        })
        .collect();
    let formants_at = |t: f64| -> [f64; 3] {
        let pos = syllable_rate * t + phase0 / PI;
        let k = pos.floor() as usize;
        let frac = pos - pos.floor();
        // Hold the vowel, then glide to the next one over the last 30%.
        let w = ((frac - 0.7) / 0.3).clamp(0.0, 1.0);
        let w = w * w * (3.0 - 2.0 * w);
        let (a, b) = (targets[k.min(syllables - 1)], targets[(k + 1).min(syllables - 1)]);
        [0, 1, 2].map(|j| a[j] + w * (b[j] - a[j]))
    };

    let mut theta = 0.0;
    let mut out = Vec::with_capacity(n);
    let mut cascade = [Resonator::default(); 5];
    for i in 0..n {
        let t = i as f64 / sr;
        if i % CONTROL_PERIOD == 0 {
            let f = formants_at(t);
            for j in 0..3 {
                cascade[j].tune(f[j], LOWER_BANDWIDTHS[j], sr);
            }
            for (r, &(fc, bw)) in cascade[3..].iter_mut().zip(&UPPER_FORMANTS) {
                r.tune(fc, bw, sr);
            }
        }
        let f = f0
            * (1.0 + glide * t / duration.max(1e-9))
            * (1.0 + vibrato_depth * (2.0 * PI * vibrato_rate * t).sin());
        theta += 2.0 * PI * f / sr;
        let max_h = ((0.45 * sr) / f).floor() as usize;
        let mut s = 0.0;
        for h in 1..=max_h {
            s += (h as f64 * theta).sin() / h as f64;
        }
        s += ASPIRATION * gaussian(rng);
        for r in cascade.iter_mut() {
            s = r.step(s);
        }
        out.push(s);
    }
    radiate(&mut out);

    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    for (i, v) in out.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let env = 0.35 + 0.65 * (PI * syllable_rate * t + phase0).sin().powi(2);
        *v = 0.5 * env * *v / peak + NOISE_FLOOR * gaussian(rng);
    }
    out
}

/// Two-pole resonator normalised to unity gain at DC (Klatt-style).
#[derive(Debug, Clone, Copy, Default)]
struct Resonator {
    gain: f64,
    a1: f64,
    a2: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn tune(&mut self, fc: f64, bw: f64, sr: f64) {
        let r = (-PI * bw / sr).exp();
        self.a1 = 2.0 * r * (2.0 * PI * fc / sr).cos();
        self.a2 = -r * r;
        self.gain = 1.0 - self.a1 - self.a2;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Lip radiation as a first difference.
fn radiate(x: &mut [f64]) {
    let mut prev = 0.0;
    for v in x.iter_mut() {
        let cur = *v;
        *v = cur - prev;
        prev = cur;
    }
}

/// `count` harmonic-voice clips of `duration` seconds, seeds `0..count`.
pub fn voice_set(count: usize, duration: f64, sample_rate: u32) -> Vec<Waveform> {
    (0..count as u64)
        .map(|seed| FixtureSpec::new(FixtureKind::HarmonicVoice, duration, seed).generate(sample_rate))
        .collect()
}
