//! Band-limited sample-rate conversion with a Kaiser-windowed sinc kernel.

use std::f64::consts::PI;

use crate::dsp::Waveform;

/// Kernel half-width in input-rate zero crossings.
const ZERO_CROSSINGS: usize = 32;
const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.95;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = 0.25 * x * x;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Resamples `w` to `target_rate`; returns a copy when the rates agree.
pub fn resample(w: &Waveform, target_rate: u32) -> Waveform {
    if w.sample_rate == target_rate || w.is_empty() {
        return Waveform {
            samples: w.samples.clone(),
            sample_rate: target_rate,
        };
    }
    let (fs_in, fs_out) = (w.sample_rate as u64, target_rate as u64);
    let g = gcd(fs_in, fs_out);
    let (up, down) = (fs_out / g, fs_in / g);

    // Cutoff in cycles per input sample.
    let cutoff = 0.5 * ROLLOFF * (fs_out.min(fs_in) as f64 / fs_in as f64);
    let half = (ZERO_CROSSINGS as f64 / (2.0 * cutoff)).ceil() as i64;
    let i0_beta = bessel_i0(KAISER_BETA);
    let kernel = |offset: f64| -> f64 {
        let r = offset / half as f64;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let arg = 2.0 * PI * cutoff * offset;
        let sinc = if arg == 0.0 { 1.0 } else { arg.sin() / arg };
        2.0 * cutoff * sinc * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
    };

    // Taps for every fractional phase; output m sits at input position m·down/up.
    let taps = 2 * half as usize + 1;
    let table: Vec<Vec<f64>> = (0..up)
        .map(|p| {
            let frac = p as f64 / up as f64;
            (0..taps).map(|k| kernel(k as f64 - half as f64 - frac)).collect()
        })
        .collect();

    let x = &w.samples;
    let n_out = ((x.len() as u64 * up) as f64 / down as f64).ceil() as usize;
    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out as u64 {
        let pos = m * down;
        let base = (pos / up) as i64;
        let coeffs = &table[(pos % up) as usize];
        let mut acc = 0.0;
        for (k, c) in coeffs.iter().enumerate() {
            let idx = base + k as i64 - half;
            if idx >= 0 && (idx as usize) < x.len() {
                acc += c * x[idx as usize];
            }
        }
        out.push(acc);
    }
    Waveform {
        samples: out,
        sample_rate: target_rate,
    }
}
