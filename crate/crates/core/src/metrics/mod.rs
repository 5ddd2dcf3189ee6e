//! Objective evaluation metrics for resynthesised speech.
//!
//! All pairwise metrics assume time-aligned signals at the same sample rate;
//! the longer signal is truncated to the shorter one.

mod mcd;
mod pitch;
mod resample;
mod rtf;
mod stoi;

pub use mcd::{mcd, mcd_from_cepstra, mel_cepstra, MCD_COEFFS, MCD_SCALE};
pub use pitch::{f0_metrics, track_pitch, track_pitch_with, F0Metrics, PitchConfig, PitchTrack};
pub use resample::resample;
pub use rtf::{measure_rtf, RtfReport};
pub use stoi::stoi;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::dsp::{self, StftPlan, Waveform};
use crate::melbank::MelFilterbank;
use crate::{Error, Result, AMPLITUDE_FLOOR};

/// RMS of `ln max(a, 1e-5) − ln max(b, 1e-5)` over all cells of two linear
/// amplitude spectrograms.
pub fn las_rmse_amplitudes(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!("{:?}", a.dim()), format!("{:?}", b.dim())));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|&x, &y| {
        let d = x.max(AMPLITUDE_FLOOR).ln() - y.max(AMPLITUDE_FLOOR).ln();
        acc += d * d;
    });
    Ok((acc / a.len() as f64).sqrt())
}

pub(crate) fn aligned(reference: &Waveform, degraded: &Waveform) -> Result<(Waveform, Waveform)> {
    if reference.sample_rate != degraded.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: reference.sample_rate,
            actual: degraded.sample_rate,
        });
    }
    let n = reference.len().min(degraded.len());
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok((reference.truncated(n), degraded.truncated(n)))
}

/// LAS-RMSE between the STFT magnitudes of two waveforms.
pub fn las_rmse(reference: &Waveform, degraded: &Waveform, plan: &StftPlan) -> Result<f64> {
    let (r, d) = aligned(reference, degraded)?;
    check_rate(&r, plan.config().sample_rate)?;
    let ar = dsp::amplitude(&r, plan)?;
    let ad = dsp::amplitude(&d, plan)?;
    las_rmse_amplitudes(&ar.frames, &ad.frames)
}

pub(crate) fn check_rate(w: &Waveform, expected: u32) -> Result<()> {
    if w.sample_rate != expected {
        return Err(Error::SampleRateMismatch {
            expected,
            actual: w.sample_rate,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mcd: f64,
    pub las_rmse: f64,
    pub vuv_f1: f64,
    pub periodicity_err: f64,
    /// Absent when no frame is voiced in both tracks.
    pub f0_rmse: Option<f64>,
    pub f0_unit: String,
    pub stoi: f64,
}

/// Every metric for one reference/degraded pair.
pub fn evaluate(reference: &Waveform, degraded: &Waveform, fb: &MelFilterbank) -> Result<MetricReport> {
    let (r, d) = aligned(reference, degraded)?;
    let plan = StftPlan::new(fb.spectral_config())?;
    let pitch_cfg = PitchConfig {
        hop: plan.config().hop,
        ..PitchConfig::default()
    };
    let f0 = f0_metrics(&track_pitch_with(&r, &pitch_cfg)?, &track_pitch_with(&d, &pitch_cfg)?);
    Ok(MetricReport {
        mcd: mcd(&r, &d, fb)?,
        las_rmse: las_rmse(&r, &d, &plan)?,
        vuv_f1: f0.vuv_f1,
        periodicity_err: f0.periodicity_err,
        f0_rmse: f0.f0_rmse,
        f0_unit: "Hz".into(),
        stoi: stoi(&r, &d)?,
    })
}

/// Field-wise mean of several reports. `f0_rmse` averages the pairs where it
/// is defined.
pub fn mean_report(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let f0: Vec<f64> = reports.iter().filter_map(|r| r.f0_rmse).collect();
    Ok(MetricReport {
        mcd: mean(|r| r.mcd),
        las_rmse: mean(|r| r.las_rmse),
        vuv_f1: mean(|r| r.vuv_f1),
        periodicity_err: mean(|r| r.periodicity_err),
        f0_rmse: (!f0.is_empty()).then(|| f0.iter().sum::<f64>() / f0.len() as f64),
        f0_unit: "Hz".into(),
        stoi: mean(|r| r.stoi),
    })
}
