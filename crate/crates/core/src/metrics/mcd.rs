//! Mel-cepstral distortion.

use std::f64::consts::{LN_10, PI, SQRT_2};

use ndarray::{Array2, ArrayView2};

use super::{aligned, check_rate};
use crate::dsp::{polar_split, StftPlan, Waveform};
use crate::melbank::{apply_mel_frames, log_compress, MelFilterbank};
use crate::{Error, Result};

/// Cepstral coefficients 1..=13 enter the distance; c0 carries gain only.
pub const MCD_COEFFS: usize = 13;

/// `10·√2 / ln 10`, converting natural-log cepstral distance to dB.
pub const MCD_SCALE: f64 = 10.0 * SQRT_2 / LN_10;

/// Cepstra of each log-mel frame, normalised so that the frame is
/// `c₀ + 2·Σₖ cₖ·cos(πk(2i + 1)/2N)`; the √2 in [`MCD_SCALE`] assumes this
/// scaling.
pub fn mel_cepstra(w: &Waveform, fb: &MelFilterbank) -> Result<Array2<f64>> {
    check_rate(w, fb.spectral_config().sample_rate)?;
    let plan = StftPlan::new(fb.spectral_config())?;
    let (a, _) = polar_split(&plan.stft(w)?);
    let log_mel = log_compress(&apply_mel_frames(a.frames.view(), fb)?);
    Ok(log_mel.dot(&dct_matrix(fb.n_mels()).t()))
}

/// DCT-II divided by `n`.
fn dct_matrix(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(k, i)| {
        (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos() / n as f64
    })
}

/// Mean over frames of `MCD_SCALE · ‖c_ref[1..=13] − c_deg[1..=13]‖₂`.
pub fn mcd_from_cepstra(reference: ArrayView2<f64>, degraded: ArrayView2<f64>) -> Result<f64> {
    let frames = reference.nrows().min(degraded.nrows());
    if frames == 0 {
        return Err(Error::EmptyInput);
    }
    let coeffs = MCD_COEFFS.min(reference.ncols() - 1).min(degraded.ncols() - 1);
    let mut total = 0.0;
    for t in 0..frames {
        let mut sq = 0.0;
        for k in 1..=coeffs {
            let d = reference[[t, k]] - degraded[[t, k]];
            sq += d * d;
        }
        total += sq.sqrt();
    }
    Ok(MCD_SCALE * total / frames as f64)
}

pub fn mcd(reference: &Waveform, degraded: &Waveform, fb: &MelFilterbank) -> Result<f64> {
    let (r, d) = aligned(reference, degraded)?;
    mcd_from_cepstra(mel_cepstra(&r, fb)?.view(), mel_cepstra(&d, fb)?.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::SpectralConfig;
    use crate::fixtures::{FixtureKind, FixtureSpec};
    use crate::melbank::{build_filterbank, MelConfig};

    #[test]
    fn scale_constant() {
        assert!((MCD_SCALE - 6.141_851_463_713_754).abs() < 1e-12);
    }

    #[test]
    fn cepstra_resynthesise_the_frame() {
        let n = 80;
        let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let c = dct_matrix(n).dot(&ndarray::Array1::from(x.clone()));
        let mut power = c[0] * c[0];
        for (i, &xi) in x.iter().enumerate() {
            let mut y = c[0];
            for k in 1..n {
                y += 2.0 * c[k] * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos();
            }
            assert!((y - xi).abs() < 1e-12);
        }
        power += 2.0 * c.iter().skip(1).map(|v| v * v).sum::<f64>();
        let mean_sq = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((power - mean_sq).abs() < 1e-12);
    }

    #[test]
    fn unit_cepstral_difference() {
        let a = Array2::zeros((2, 20));
        let mut b = Array2::zeros((2, 20));
        b[[0, 3]] = 1.0;
        b[[1, 13]] = 1.0;
        // c0 and coefficients above 13 are ignored.
        let mut c = b.clone();
        c[[0, 0]] = 5.0;
        c[[1, 14]] = 5.0;
        assert!((mcd_from_cepstra(a.view(), b.view()).unwrap() - 6.1418).abs() < 1e-4);
        assert_eq!(
            mcd_from_cepstra(a.view(), b.view()).unwrap(),
            mcd_from_cepstra(a.view(), c.view()).unwrap()
        );
    }

    #[test]
    fn self_distance_and_gain_invariance() {
        let cfg = SpectralConfig::default();
        let fb = build_filterbank(&cfg, &MelConfig::default()).unwrap();
        let x = FixtureSpec::new(FixtureKind::HarmonicVoice, 0.5, 6).generate(22050);
        assert_eq!(mcd(&x, &x, &fb).unwrap(), 0.0);
        let half = Waveform::new(x.samples.iter().map(|v| 0.5 * v).collect(), 22050).unwrap();
        assert!(mcd(&x, &half, &fb).unwrap() < 1e-6);
    }
}
