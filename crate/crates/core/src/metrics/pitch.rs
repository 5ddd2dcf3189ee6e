//! YIN pitch tracking and the pitch-derived metrics (F0-RMSE, V/UV F1,
//! periodicity error).

use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchConfig {
    pub f_min: f64,
    pub f_max: f64,
    /// Voicing threshold on the cumulative-mean-normalised difference.
    pub threshold: f64,
    pub hop: usize,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            f_min: 65.0,
            f_max: 1000.0,
            threshold: 0.15,
            hop: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    /// Hz, 0 on unvoiced frames.
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
    pub periodicity: Vec<f64>,
    pub hop: usize,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn voiced_fraction(&self) -> f64 {
        self.voiced.iter().filter(|&&v| v).count() as f64 / self.len().max(1) as f64
    }

    /// Median f0 over voiced frames, 0 when none are voiced.
    pub fn median_f0(&self) -> f64 {
        let mut v: Vec<f64> = self.f0.iter().copied().filter(|&f| f > 0.0).collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    }
}

pub fn track_pitch(w: &Waveform) -> Result<PitchTrack> {
    track_pitch_with(w, &PitchConfig::default())
}

/// One frame every `hop` samples, centred on `t·hop` like the STFT, so the
/// track has `1 + len/hop` frames. Frames that would run past either end are
/// shifted inward.
pub fn track_pitch_with(w: &Waveform, cfg: &PitchConfig) -> Result<PitchTrack> {
    if !(cfg.f_min > 0.0 && cfg.f_max > cfg.f_min && cfg.hop > 0 && cfg.threshold > 0.0) {
        return Err(Error::InvalidConfig(format!("invalid pitch tracker settings {cfg:?}")));
    }
    let sr = w.sample_rate as f64;
    let tau_min = ((sr / cfg.f_max).floor() as usize).max(2);
    let tau_max = (sr / cfg.f_min).ceil() as usize;
    let window = 2 * tau_max;
    let span = window + tau_max + 1;
    let min_len = ((4.0 * sr / cfg.f_min).ceil() as usize).max(span);
    if w.len() < min_len {
        return Err(Error::TooShort {
            min: min_len,
            actual: w.len(),
        });
    }

    let x = &w.samples;
    let frames = 1 + x.len() / cfg.hop;
    let mut track = PitchTrack {
        f0: Vec::with_capacity(frames),
        voiced: Vec::with_capacity(frames),
        periodicity: Vec::with_capacity(frames),
        hop: cfg.hop,
    };
    let mut d = vec![0.0; tau_max + 2];
    for t in 0..frames {
        let start = (t * cfg.hop).saturating_sub(span / 2).min(x.len() - span);
        let seg = &x[start..start + span];
        let energy: f64 = seg[..window].iter().map(|v| v * v).sum();
        if energy <= 1e-12 * window as f64 {
            track.f0.push(0.0);
            track.voiced.push(false);
            track.periodicity.push(0.0);
            continue;
        }
        cmnd(seg, window, &mut d);
        let (tau, voiced) = pick_period(&d, tau_min, tau_max, cfg.threshold);
        track.periodicity.push((1.0 - d[tau]).clamp(0.0, 1.0));
        let f0 = sr / refine(&d, tau);
        if voiced && f0 >= cfg.f_min && f0 <= cfg.f_max {
            track.f0.push(f0);
            track.voiced.push(true);
        } else {
            track.f0.push(0.0);
            track.voiced.push(false);
        }
    }
    Ok(track)
}

/// Cumulative-mean-normalised difference `d'(τ)` for `τ = 0..d.len()`.
fn cmnd(seg: &[f64], window: usize, d: &mut [f64]) {
    d[0] = 1.0;
    let mut running = 0.0;
    for tau in 1..d.len() {
        let mut acc = 0.0;
        for j in 0..window {
            let diff = seg[j] - seg[j + tau];
            acc += diff * diff;
        }
        running += acc;
        d[tau] = if running > 0.0 { acc * tau as f64 / running } else { 1.0 };
    }
}

/// First dip below the threshold, followed to its local minimum; otherwise
/// the global minimum, flagged unvoiced.
fn pick_period(d: &[f64], tau_min: usize, tau_max: usize, threshold: f64) -> (usize, bool) {
    let mut tau = tau_min;
    while tau <= tau_max {
        if d[tau] < threshold {
            while tau < tau_max && d[tau + 1] < d[tau] {
                tau += 1;
            }
            return (tau, true);
        }
        tau += 1;
    }
    let best = (tau_min..=tau_max).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap_or(tau_min);
    (best, false)
}

/// Parabolic interpolation of the minimum around `tau`.
fn refine(d: &[f64], tau: usize) -> f64 {
    if tau == 0 || tau + 1 >= d.len() {
        return tau as f64;
    }
    let (a, b, c) = (d[tau - 1], d[tau], d[tau + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-15 {
        return tau as f64;
    }
    tau as f64 + (0.5 * (a - c) / denom).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Metrics {
    /// Hz over frames voiced in both tracks; `None` when there are none.
    pub f0_rmse: Option<f64>,
    pub vuv_f1: f64,
    pub periodicity_err: f64,
}

/// Compares tracks frame by frame over their common length. V/UV F1 treats
/// the reference decisions as ground truth and is 1 when neither track has a
/// voiced frame.
pub fn f0_metrics(reference: &PitchTrack, degraded: &PitchTrack) -> F0Metrics {
    let n = reference.len().min(degraded.len());
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    let mut sq = 0.0;
    let mut per_sq = 0.0;
    for t in 0..n {
        match (reference.voiced[t], degraded.voiced[t]) {
            (true, true) => {
                tp += 1;
                sq += (reference.f0[t] - degraded.f0[t]).powi(2);
            }
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
        per_sq += (reference.periodicity[t] - degraded.periodicity[t]).powi(2);
    }
    let vuv_f1 = if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    F0Metrics {
        f0_rmse: (tp > 0).then(|| (sq / tp as f64).sqrt()),
        vuv_f1,
        periodicity_err: if n == 0 { 0.0 } else { (per_sq / n as f64).sqrt() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{FixtureKind, FixtureSpec};

    fn track(f0: &[f64]) -> PitchTrack {
        PitchTrack {
            f0: f0.to_vec(),
            voiced: f0.iter().map(|&f| f > 0.0).collect(),
            periodicity: f0.iter().map(|&f| if f > 0.0 { 0.9 } else { 0.1 }).collect(),
            hop: 256,
        }
    }

    #[test]
    fn sine_pitch() {
        let w = FixtureSpec::new(FixtureKind::Sine, 1.0, 0).with_f0(220.0).generate(22050);
        let t = track_pitch(&w).unwrap();
        assert_eq!(t.len(), 1 + 22050 / 256);
        assert!(t.voiced.iter().all(|&v| v));
        assert!((t.median_f0() - 220.0).abs() < 2.0, "{}", t.median_f0());
        assert!(t.periodicity.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn noise_is_mostly_unvoiced() {
        let w = FixtureSpec::new(FixtureKind::Noise, 1.0, 3).generate(22050);
        assert!(track_pitch(&w).unwrap().voiced_fraction() < 0.2);
    }

    #[test]
    fn silence_is_unvoiced() {
        let w = FixtureSpec::new(FixtureKind::Silence, 0.5, 0).generate(22050);
        let t = track_pitch(&w).unwrap();
        assert!(t.voiced.iter().all(|&v| !v));
        assert!(t.f0.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn too_short_is_an_error() {
        let w = Waveform::new(vec![0.1; 500], 22050).unwrap();
        assert!(matches!(track_pitch(&w), Err(Error::TooShort { .. })));
    }

    #[test]
    fn doubling_rate_doubles_pitch() {
        let a = FixtureSpec::new(FixtureKind::Sine, 1.0, 0).with_f0(180.0).generate(22050);
        let b = FixtureSpec::new(FixtureKind::Sine, 1.0, 0).with_f0(360.0).generate(22050);
        let ratio = track_pitch(&b).unwrap().median_f0() / track_pitch(&a).unwrap().median_f0();
        assert!((ratio - 2.0).abs() < 0.06, "{ratio}");
    }

    #[test]
    fn metric_arithmetic() {
        let r = track(&[100.0, 120.0, 0.0, 0.0]);
        let m = f0_metrics(&r, &r);
        assert_eq!(m, F0Metrics { f0_rmse: Some(0.0), vuv_f1: 1.0, periodicity_err: 0.0 });

        let all = track(&[100.0, 100.0, 100.0, 100.0]);
        assert!((f0_metrics(&r, &all).vuv_f1 - 2.0 / 3.0).abs() < 1e-15);

        let shifted = track(&[110.0, 130.0, 0.0, 0.0]);
        assert!((f0_metrics(&r, &shifted).f0_rmse.unwrap() - 10.0).abs() < 1e-12);

        let none = track(&[0.0, 0.0]);
        let m = f0_metrics(&none, &none);
        assert_eq!(m.f0_rmse, None);
        assert_eq!(m.vuv_f1, 1.0);
        assert_eq!(f0_metrics(&r, &none).f0_rmse, None);
    }
}
