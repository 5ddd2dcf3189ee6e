//! Short-time objective intelligibility (standard, non-extended form).

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{aligned, resample};
use crate::dsp::Waveform;
use crate::{Error, Result};

const FS: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = FRAME / 2;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per intermediate-intelligibility segment (384 ms).
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;

/// `np.hanning(n + 2)[1:-1]`
fn hann_inner(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n + 1) as f64).cos())
        .collect()
}

fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME)).step_by(HOP)
}

/// Drops frames more than 40 dB below the loudest reference frame and
/// overlap-adds the remaining windowed frames of both signals.
fn remove_silent_frames(x: &[f64], y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    let energy: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = (0..FRAME).map(|i| (w[i] * x[s + i]).powi(2)).sum();
            20.0 * (e.sqrt() + f64::EPSILON).log10()
        })
        .collect();
    let max = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energy)
        .filter(|(_, &e)| max - DYN_RANGE_DB - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    if kept.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let len = (kept.len() - 1) * HOP + FRAME;
    let (mut xo, mut yo) = (vec![0.0; len], vec![0.0; len]);
    for (k, &s) in kept.iter().enumerate() {
        for i in 0..FRAME {
            xo[k * HOP + i] += w[i] * x[s + i];
            yo[k * HOP + i] += w[i] * y[s + i];
        }
    }
    (xo, yo)
}

/// Power spectra of Hann-windowed 256-sample frames, zero-padded to 512.
fn power_frames(x: &[f64], w: &[f64], fft: &dyn rustfft::Fft<f64>) -> Vec<Vec<f64>> {
    frame_starts(x.len())
        .map(|s| {
            let mut buf: Vec<Complex64> = (0..NFFT)
                .map(|i| Complex64::new(if i < FRAME { w[i] * x[s + i] } else { 0.0 }, 0.0))
                .collect();
            fft.process(&mut buf);
            buf[..NFFT / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
        })
        .collect()
}

/// Bin ranges `[lo, hi)` of the one-third-octave bands.
fn band_edges() -> Vec<(usize, usize)> {
    let bin_hz = FS as f64 / NFFT as f64;
    let nearest = |f: f64| {
        (0..=NFFT / 2)
            .min_by(|&a, &b| ((a as f64 * bin_hz - f).powi(2)).total_cmp(&(b as f64 * bin_hz - f).powi(2)))
            .unwrap()
    };
    (0..BANDS)
        .map(|k| {
            let k = k as f64;
            let lo = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

/// Band envelopes, `bands × frames`.
fn band_envelopes(power: &[Vec<f64>], edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    edges
        .iter()
        .map(|&(lo, hi)| power.iter().map(|p| p[lo..hi].iter().sum::<f64>().sqrt()).collect())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// STOI of `degraded` against `reference`, clamped to [0, 1]. Both signals
/// are resampled to 10 kHz internally.
pub fn stoi(reference: &Waveform, degraded: &Waveform) -> Result<f64> {
    let (r, d) = aligned(reference, degraded)?;
    let (r, d) = (resample(&r, FS), resample(&d, FS));
    let w = hann_inner(FRAME);
    let (x, y) = remove_silent_frames(&r.samples, &d.samples, &w);

    let fft = FftPlanner::new().plan_fft_forward(NFFT);
    let edges = band_edges();
    let xb = band_envelopes(&power_frames(&x, &w, fft.as_ref()), &edges);
    let yb = band_envelopes(&power_frames(&y, &w, fft.as_ref()), &edges);
    let frames = xb[0].len();
    if frames < SEGMENT {
        return Err(Error::TooShort {
            min: SEGMENT,
            actual: frames,
        });
    }

    let clip = 10f64.powf(-BETA_DB / 20.0);
    let eps = f64::EPSILON;
    let mut total = 0.0;
    let segments = frames - SEGMENT + 1;
    for m in SEGMENT..=frames {
        for (xs, ys) in xb.iter().zip(&yb) {
            let xs = &xs[m - SEGMENT..m];
            let ys = &ys[m - SEGMENT..m];
            let alpha = norm(xs) / (norm(ys) + eps);
            let mut yp: Vec<f64> = ys
                .iter()
                .zip(xs)
                .map(|(&yv, &xv)| (alpha * yv).min(xv * (1.0 + clip)))
                .collect();
            let mut xc = xs.to_vec();
            for v in [&mut yp, &mut xc] {
                let mean = v.iter().sum::<f64>() / SEGMENT as f64;
                v.iter_mut().for_each(|e| *e -= mean);
                let n = norm(v) + eps;
                v.iter_mut().for_each(|e| *e /= n);
            }
            total += yp.iter().zip(&xc).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok((total / (BANDS * segments) as f64).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{FixtureKind, FixtureSpec};

    fn voice(seed: u64) -> Waveform {
        FixtureSpec::new(FixtureKind::HarmonicVoice, 1.5, seed).generate(22050)
    }

    fn add_noise(x: &Waveform, snr_db: f64, seed: u64) -> Waveform {
        let n = FixtureSpec::new(FixtureKind::Noise, x.duration(), seed).generate(x.sample_rate);
        let px = x.samples.iter().map(|v| v * v).sum::<f64>();
        let pn = n.samples.iter().map(|v| v * v).sum::<f64>();
        let g = (px / pn / 10f64.powf(snr_db / 10.0)).sqrt();
        Waveform::new(
            x.samples.iter().zip(&n.samples).map(|(a, b)| a + g * b).collect(),
            x.sample_rate,
        )
        .unwrap()
    }

    #[test]
    fn band_layout() {
        let e = band_edges();
        assert_eq!(e.len(), 15);
        assert_eq!(e[0], (7, 9));
        assert!(e.windows(2).all(|p| p[0].1 == p[1].0));
        assert!(e[14].1 as f64 * 10000.0 / 512.0 < 4400.0);
    }

    #[test]
    fn self_comparison_is_one() {
        let x = voice(1);
        assert!((stoi(&x, &x).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn independent_noise_scores_low() {
        let x = voice(2);
        let n = FixtureSpec::new(FixtureKind::Noise, 1.5, 9).generate(22050);
        assert!(stoi(&x, &n).unwrap() < 0.3);
    }

    #[test]
    fn mild_noise_scores_high_and_decreases_with_level() {
        let x = voice(3);
        let mut last = 1.0;
        for snr in [20.0, 5.0, -5.0] {
            let s = stoi(&x, &add_noise(&x, snr, 4)).unwrap();
            if snr == 20.0 {
                assert!(s > 0.9, "{s}");
            }
            assert!(s <= last + 1e-9);
            last = s;
        }
    }

    #[test]
    fn too_short() {
        let x = FixtureSpec::new(FixtureKind::Sine, 0.2, 0).generate(22050);
        assert!(matches!(stoi(&x, &x), Err(Error::TooShort { .. })));
    }
}
