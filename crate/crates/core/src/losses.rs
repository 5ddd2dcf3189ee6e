//! Forward evaluation of the generator loss family: amplitude, phase, STFT
//! and mel terms plus their weighted total.

use ndarray::{s, Array2, ArrayView2, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{
    polar_split, AmplitudeSpectrogram, ComplexSpectrogram, Domain, PhaseSpectrogram, StftPlan,
    Waveform,
};
use crate::melbank::{apply_mel_frames, log_compress, MelFilterbank};
use crate::phase::{anti_wrap_scalar, project};
use crate::{Error, Result};

/// Weights of the generator objective.
///
/// Defaults follow the public APNet2 training script: 45 on the amplitude
/// loss, 100 on the summed phase losses, 20 on the STFT terms and 45 on the
/// mel loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_a: f64,
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub lambda_w: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_a: 45.0,
            lambda_p: 100.0,
            lambda_s: 20.0,
            lambda_w: 45.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_a", self.lambda_a),
            ("lambda_p", self.lambda_p),
            ("lambda_s", self.lambda_s),
            ("lambda_w", self.lambda_w),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Unweighted loss terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub amplitude: f64,
    pub inst_phase: f64,
    pub group_delay: f64,
    pub phase_time_diff: f64,
    pub stft_consistency: f64,
    pub stft_l1: f64,
    pub mel_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub amplitude: f64,
    pub inst_phase: f64,
    pub group_delay: f64,
    pub phase_time_diff: f64,
    pub stft_consistency: f64,
    pub stft_l1: f64,
    pub mel_l1: f64,
    /// Feature-matching and adversarial terms; always 0 without a discriminator.
    pub feature_matching: f64,
    pub adversarial: f64,
    pub total: f64,
}

fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("{a:?}"), format!("{b:?}")));
    }
    Ok(())
}

/// Mean squared error between two log-amplitude spectrograms.
pub fn amplitude_loss(pred: &AmplitudeSpectrogram, reference: &AmplitudeSpectrogram) -> Result<f64> {
    if pred.domain != Domain::Log || reference.domain != Domain::Log {
        return Err(Error::DomainMismatch { expected: "log" });
    }
    check_dims(reference.frames.dim(), pred.frames.dim())?;
    let mut acc = 0.0;
    Zip::from(&pred.frames)
        .and(&reference.frames)
        .for_each(|&p, &r| acc += (p - r) * (p - r));
    Ok(acc / pred.frames.len().max(1) as f64)
}

fn mean_anti_wrapped(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|&x, &y| acc += anti_wrap_scalar(x - y));
    acc / a.len() as f64
}

/// Instantaneous phase, group delay and phase time difference losses.
pub fn phase_losses(pred: &PhaseSpectrogram, reference: &PhaseSpectrogram) -> Result<(f64, f64, f64)> {
    let (p, r) = (&pred.frames, &reference.frames);
    check_dims(r.dim(), p.dim())?;
    let (t, f) = p.dim();
    if t < 2 {
        return Err(Error::Undefined("phase time difference needs at least 2 frames".into()));
    }
    if f < 2 {
        return Err(Error::Undefined("group delay needs at least 2 frequency bins".into()));
    }
    let inst = mean_anti_wrapped(p.view(), r.view());
    let diff_f = |x: &Array2<f64>| &x.slice(s![.., 1..]) - &x.slice(s![.., ..f - 1]);
    let diff_t = |x: &Array2<f64>| &x.slice(s![1.., ..]) - &x.slice(s![..t - 1, ..]);
    let gd = mean_anti_wrapped(diff_f(p).view(), diff_f(r).view());
    let ptd = mean_anti_wrapped(diff_t(p).view(), diff_t(r).view());
    Ok((inst, gd, ptd))
}

fn mean_abs_re_im(a: ArrayView2<Complex64>, b: ArrayView2<Complex64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|x, y| {
        let d = x - y;
        acc += d.re.abs() + d.im.abs();
    });
    acc / (2 * a.len()).max(1) as f64
}

/// `(consistency, l1)`: mean absolute deviation of `pred` from its own
/// STFT projection, and from `reference`, over real and imaginary parts.
///
/// The projection resynthesises `(T − 1)·hop` samples, so the STFT of a
/// signal whose length is a multiple of the hop is a fixed point; for other
/// lengths the last frame differs by the discarded tail.
pub fn stft_losses(pred: &ComplexSpectrogram, reference: &ComplexSpectrogram) -> Result<(f64, f64)> {
    check_dims(reference.frames.dim(), pred.frames.dim())?;
    let plan = StftPlan::new(&pred.config)?;
    stft_losses_with(&plan, pred, reference)
}

fn stft_losses_with(
    plan: &StftPlan,
    pred: &ComplexSpectrogram,
    reference: &ComplexSpectrogram,
) -> Result<(f64, f64)> {
    let projected = project(plan, pred)?;
    check_dims(pred.frames.dim(), projected.frames.dim())?;
    Ok((
        mean_abs_re_im(pred.frames.view(), projected.frames.view()),
        mean_abs_re_im(pred.frames.view(), reference.frames.view()),
    ))
}

/// Log-mel spectrogram of a waveform (natural log, floored at 1e-5).
pub fn log_mel(w: &Waveform, fb: &MelFilterbank) -> Result<Array2<f64>> {
    let plan = StftPlan::new(fb.spectral_config())?;
    log_mel_with(&plan, w, fb)
}

fn log_mel_with(plan: &StftPlan, w: &Waveform, fb: &MelFilterbank) -> Result<Array2<f64>> {
    let expected = fb.spectral_config().sample_rate;
    if w.sample_rate != expected {
        return Err(Error::SampleRateMismatch {
            expected,
            actual: w.sample_rate,
        });
    }
    let (a, _) = polar_split(&plan.stft(w)?);
    Ok(log_compress(&apply_mel_frames(a.frames.view(), fb)?))
}

/// Mean absolute difference of log-mel spectrograms; the longer waveform is
/// truncated to the shorter one first.
pub fn mel_l1(pred: &Waveform, reference: &Waveform, fb: &MelFilterbank) -> Result<f64> {
    let n = pred.len().min(reference.len());
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let plan = StftPlan::new(fb.spectral_config())?;
    let p = log_mel_with(&plan, &pred.truncated(n), fb)?;
    let r = log_mel_with(&plan, &reference.truncated(n), fb)?;
    let mut acc = 0.0;
    Zip::from(&p).and(&r).for_each(|&x, &y| acc += (x - y).abs());
    Ok(acc / p.len() as f64)
}

/// `λ_A·L_A + λ_P·(inst + gd + ptd) + λ_S·(consistency + l1) + λ_W·(mel + fm + adv)`
/// with the feature-matching and adversarial terms fixed at 0.
pub fn total_generator_loss(c: &LossComponents, w: &LossWeights) -> LossBreakdown {
    let (feature_matching, adversarial) = (0.0, 0.0);
    let total = w.lambda_a * c.amplitude
        + w.lambda_p * (c.inst_phase + c.group_delay + c.phase_time_diff)
        + w.lambda_s * (c.stft_consistency + c.stft_l1)
        + w.lambda_w * (c.mel_l1 + feature_matching + adversarial);
    LossBreakdown {
        amplitude: c.amplitude,
        inst_phase: c.inst_phase,
        group_delay: c.group_delay,
        phase_time_diff: c.phase_time_diff,
        stft_consistency: c.stft_consistency,
        stft_l1: c.stft_l1,
        mel_l1: c.mel_l1,
        feature_matching,
        adversarial,
        total,
    }
}

/// Every component for a predicted/reference waveform pair, using the STFT
/// of each waveform as the predicted and reference spectra. Both waveforms
/// are cut to the largest common length that is a multiple of the hop.
pub fn waveform_losses(
    pred: &Waveform,
    reference: &Waveform,
    fb: &MelFilterbank,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    w.validate()?;
    let plan = StftPlan::new(fb.spectral_config())?;
    let hop = plan.config().hop;
    let n = pred.len().min(reference.len()) / hop * hop;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    for wave in [pred, reference] {
        if wave.sample_rate != plan.config().sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: plan.config().sample_rate,
                actual: wave.sample_rate,
            });
        }
    }
    let (pred, reference) = (pred.truncated(n), reference.truncated(n));
    let sp = plan.stft(&pred)?;
    let sr = plan.stft(&reference)?;
    let (ap, pp) = polar_split(&sp);
    let (ar, pr) = polar_split(&sr);
    let amplitude = amplitude_loss(&ap.to_log(), &ar.to_log())?;
    let (inst_phase, group_delay, phase_time_diff) = phase_losses(&pp, &pr)?;
    let (stft_consistency, stft_l1) = stft_losses_with(&plan, &sp, &sr)?;
    let mel = {
        let p = log_mel_with(&plan, &pred, fb)?;
        let r = log_mel_with(&plan, &reference, fb)?;
        (&p - &r).mapv(f64::abs).mean().unwrap_or(0.0)
    };
    Ok(total_generator_loss(
        &LossComponents {
            amplitude,
            inst_phase,
            group_delay,
            phase_time_diff,
            stft_consistency,
            stft_l1,
            mel_l1: mel,
        },
        w,
    ))
}
