//! Parallel phase estimation, phase anti-wrapping and a Griffin–Lim baseline.

use std::f64::consts::PI;

use ndarray::{Array2, Zip};

use crate::dsp::{
    polar_split, recombine, AmplitudeSpectrogram, ComplexSpectrogram, Domain, PhaseSpectrogram,
    SpectralConfig, StftPlan,
};
use crate::linalg::frobenius;
use crate::{Error, Result};

/// Pseudo real part `R` and pseudo imaginary part `I`, T × n_freq each.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseComponents {
    pub r: Array2<f64>,
    pub i: Array2<f64>,
}

impl PhaseComponents {
    pub fn new(r: Array2<f64>, i: Array2<f64>) -> Result<Self> {
        if r.dim() != i.dim() {
            return Err(Error::shape(format!("{:?}", r.dim()), format!("{:?}", i.dim())));
        }
        if r.iter().chain(i.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("phase components"));
        }
        Ok(Self { r, i })
    }
}

/// `π − PI`, the part of π below f64 resolution.
const PI_LO: f64 = 1.224_646_799_147_353_2e-16;

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Phase of a single `(R, I)` pair:
/// `arctan(I/R) − π/2 · sgn(I) · (sgn(R) − 1)`, completed on the axes so that
/// the result equals the two-argument arctangent folded into (−π, π].
/// `(0, 0)` maps to 0.
pub fn parallel_phase_scalar(r: f64, i: f64) -> f64 {
    if r == 0.0 {
        return if i > 0.0 {
            PI / 2.0
        } else if i < 0.0 {
            -PI / 2.0
        } else {
            0.0
        };
    }
    if i == 0.0 {
        // The closed form gives 0 on the negative real axis.
        return if r < 0.0 { PI } else { 0.0 };
    }
    // The correction is c·π with c ∈ {−1, 0, 1}; π is carried as hi + lo
    // parts so results next to the branch cut keep full precision.
    let c = -0.5 * sgn(i) * (sgn(r) - 1.0);
    let phi = ((i / r).atan() + c * PI_LO) + c * PI;
    if phi <= -PI {
        PI
    } else if phi > PI {
        // arctan can round up to π/2 exactly; keep the result principal.
        phi - 2.0 * PI
    } else {
        phi
    }
}

pub fn parallel_phase(pc: &PhaseComponents, config: &SpectralConfig) -> Result<PhaseSpectrogram> {
    let mut out = Array2::zeros(pc.r.dim());
    Zip::from(&mut out)
        .and(&pc.r)
        .and(&pc.i)
        .for_each(|o, &r, &i| *o = parallel_phase_scalar(r, i));
    PhaseSpectrogram::new(out, config.clone())
}

/// `|x − 2π·round(x / 2π)|`, the absolute principal deviation, in [0, π].
pub fn anti_wrap_scalar(x: f64) -> f64 {
    (x - 2.0 * PI * (x / (2.0 * PI)).round()).abs()
}

pub fn anti_wrap(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(anti_wrap_scalar)
}

/// Griffin–Lim phase reconstruction from zero initial phase.
pub fn griffin_lim(a: &AmplitudeSpectrogram, iters: usize) -> Result<PhaseSpectrogram> {
    griffin_lim_trace(a, iters).map(|(p, _)| p)
}

/// Like [`griffin_lim`], also returning the spectral-consistency residual
/// `‖stft(istft(S)) − S‖_F` of the estimate `S = a·e^{jφ}` at the start of
/// every iteration and after the last one (`iters + 1` values).
pub fn griffin_lim_trace(
    a: &AmplitudeSpectrogram,
    iters: usize,
) -> Result<(PhaseSpectrogram, Vec<f64>)> {
    if a.domain != Domain::Linear {
        return Err(Error::DomainMismatch { expected: "linear" });
    }
    let plan = StftPlan::new(&a.config)?;
    let mut phase = PhaseSpectrogram::new(Array2::zeros(a.frames.dim()), a.config.clone())?;
    let mut trace = Vec::with_capacity(iters + 1);
    for step in 0..=iters {
        let estimate = recombine(a, &phase)?;
        let projected = project(&plan, &estimate)?;
        trace.push(frobenius((&projected.frames - &estimate.frames).mapv(|c| c.norm()).view()));
        if step < iters {
            phase = polar_split(&projected).1;
        }
    }
    Ok((phase, trace))
}

/// `stft(istft(s))`
pub(crate) fn project(plan: &StftPlan, s: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    plan.stft(&plan.istft(s)?)
}
