//! Mel filterbank `M` (n_mels × n_freq), its cached pseudo-inverse `M⁺`, and
//! the amplitude ↔ mel mappings.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dsp::{AmplitudeSpectrogram, Domain, SpectralConfig};
use crate::linalg::{self, Svd};
use crate::{Error, Result, AMPLITUDE_FLOOR};

/// Relative singular-value cutoff used for `M⁺` and minimum-norm solves.
pub const PINV_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MelScale {
    #[default]
    Slaney,
    Htk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MelNorm {
    #[default]
    SlaneyArea,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    /// Upper edge in Hz; values above Nyquist are clamped to Nyquist.
    pub f_max: f64,
    pub mel_scale: MelScale,
    pub norm: MelNorm,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            f_min: 0.0,
            f_max: 16000.0,
            mel_scale: MelScale::Slaney,
            norm: MelNorm::SlaneyArea,
        }
    }
}

impl MelConfig {
    /// `f_max` after clamping to the Nyquist frequency of `sample_rate`.
    pub fn effective_f_max(&self, sample_rate: u32) -> f64 {
        self.f_max.min(sample_rate as f64 / 2.0)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let f_max = self.effective_f_max(sample_rate);
        if self.n_mels == 0 {
            return Err(Error::InvalidConfig("n_mels must be at least 1".into()));
        }
        if !(self.f_min >= 0.0 && self.f_min < f_max && f_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= f_min < f_max <= nyquist, got f_min={} f_max={} (after clamping)",
                self.f_min, f_max
            )));
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64, scale: MelScale) -> f64 {
    match scale {
        MelScale::Htk => 2595.0 * (1.0 + hz / 700.0).log10(),
        MelScale::Slaney => {
            let f_sp = 200.0 / 3.0;
            let min_log_hz = 1000.0;
            let min_log_mel = min_log_hz / f_sp;
            let logstep = 6.4f64.ln() / 27.0;
            if hz >= min_log_hz {
                min_log_mel + (hz / min_log_hz).ln() / logstep
            } else {
                hz / f_sp
            }
        }
    }
}

pub fn mel_to_hz(mel: f64, scale: MelScale) -> f64 {
    match scale {
        MelScale::Htk => 700.0 * (10f64.powf(mel / 2595.0) - 1.0),
        MelScale::Slaney => {
            let f_sp = 200.0 / 3.0;
            let min_log_hz = 1000.0;
            let min_log_mel = min_log_hz / f_sp;
            let logstep = 6.4f64.ln() / 27.0;
            if mel >= min_log_mel {
                min_log_hz * (logstep * (mel - min_log_mel)).exp()
            } else {
                f_sp * mel
            }
        }
    }
}

/// Mel filterbank with its pseudo-inverse computed once at construction.
/// Immutable afterwards.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    m: Array2<f64>,
    m_pinv: Array2<f64>,
    svd: Svd,
    mel_config: MelConfig,
    spectral_config: SpectralConfig,
}

impl MelFilterbank {
    /// Wraps an explicit filter matrix (n_mels × n_freq) and computes its
    /// pseudo-inverse. Used for custom or stub filterbanks.
    pub fn from_matrix(
        m: Array2<f64>,
        spectral_config: SpectralConfig,
        mel_config: MelConfig,
    ) -> Result<Self> {
        if m.ncols() != spectral_config.n_freq() || m.nrows() != mel_config.n_mels {
            return Err(Error::shape(
                format!("{} x {}", mel_config.n_mels, spectral_config.n_freq()),
                format!("{} x {}", m.nrows(), m.ncols()),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("filterbank"));
        }
        let svd = linalg::svd(m.view());
        let m_pinv = svd.pinv(PINV_RCOND);
        Ok(Self {
            m,
            m_pinv,
            svd,
            mel_config,
            spectral_config,
        })
    }

    /// `M`, n_mels × n_freq.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.m
    }

    /// `M⁺`, n_freq × n_mels.
    pub fn pinv(&self) -> &Array2<f64> {
        &self.m_pinv
    }

    pub fn svd(&self) -> &Svd {
        &self.svd
    }

    pub fn n_mels(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_freq(&self) -> usize {
        self.m.ncols()
    }

    pub fn mel_config(&self) -> &MelConfig {
        &self.mel_config
    }

    pub fn spectral_config(&self) -> &SpectralConfig {
        &self.spectral_config
    }

    /// Relative Frobenius residuals of the four Penrose conditions.
    pub fn penrose_residuals(&self) -> [f64; 4] {
        linalg::penrose_residuals(self.m.view(), self.m_pinv.view())
    }
}

/// Triangular mel filters over the one-sided STFT bins (librosa layout).
pub fn filter_matrix(sc: &SpectralConfig, mc: &MelConfig) -> Result<Array2<f64>> {
    sc.validate()?;
    mc.validate(sc.sample_rate)?;
    let n_freq = sc.n_freq();
    let sr = sc.sample_rate as f64;
    let f_max = mc.effective_f_max(sc.sample_rate);

    let fft_freqs: Vec<f64> = (0..n_freq).map(|k| k as f64 * sr / sc.n_fft as f64).collect();
    let min_mel = hz_to_mel(mc.f_min, mc.mel_scale);
    let max_mel = hz_to_mel(f_max, mc.mel_scale);
    let n_pts = mc.n_mels + 2;
    let mel_pts: Vec<f64> = (0..n_pts)
        .map(|i| {
            let mel = min_mel + (max_mel - min_mel) * i as f64 / (n_pts - 1) as f64;
            mel_to_hz(mel, mc.mel_scale)
        })
        .collect();

    let mut m = Array2::<f64>::zeros((mc.n_mels, n_freq));
    for i in 0..mc.n_mels {
        let (lo, center, hi) = (mel_pts[i], mel_pts[i + 1], mel_pts[i + 2]);
        let enorm = match mc.norm {
            MelNorm::SlaneyArea => 2.0 / (hi - lo),
            MelNorm::None => 1.0,
        };
        for (k, &f) in fft_freqs.iter().enumerate() {
            let lower = (f - lo) / (center - lo);
            let upper = (hi - f) / (hi - center);
            let w = lower.min(upper).max(0.0);
            m[[i, k]] = w * enorm;
        }
    }
    Ok(m)
}

pub fn build_filterbank(sc: &SpectralConfig, mc: &MelConfig) -> Result<MelFilterbank> {
    let m = filter_matrix(sc, mc)?;
    for (i, row) in m.rows().into_iter().enumerate() {
        if !row.iter().any(|&v| v > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "mel filter {i} covers no FFT bin; reduce n_mels or increase n_fft"
            )));
        }
    }
    MelFilterbank::from_matrix(m, sc.clone(), mc.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    /// T × n_mels
    pub frames: Array2<f64>,
    pub domain: Domain,
}

impl MelSpectrogram {
    pub fn new(frames: Array2<f64>, domain: Domain) -> Result<Self> {
        if domain == Domain::Linear && frames.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig("linear mel spectrogram has negative entries".into()));
        }
        Ok(Self { frames, domain })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_mels(&self) -> usize {
        self.frames.ncols()
    }

    pub fn to_linear(&self) -> MelSpectrogram {
        match self.domain {
            Domain::Linear => self.clone(),
            Domain::Log => MelSpectrogram {
                frames: log_expand(&self.frames),
                domain: Domain::Linear,
            },
        }
    }

    pub fn to_log(&self) -> MelSpectrogram {
        match self.domain {
            Domain::Log => self.clone(),
            Domain::Linear => MelSpectrogram {
                frames: log_compress(&self.frames),
                domain: Domain::Log,
            },
        }
    }
}

/// `X = A · Mᵀ` frame by frame.
pub fn apply_mel(a: &AmplitudeSpectrogram, fb: &MelFilterbank) -> Result<MelSpectrogram> {
    if a.domain != Domain::Linear {
        return Err(Error::DomainMismatch { expected: "linear" });
    }
    apply_mel_frames(a.frames.view(), fb).map(|frames| MelSpectrogram {
        frames,
        domain: Domain::Linear,
    })
}

pub(crate) fn apply_mel_frames(a: ArrayView2<f64>, fb: &MelFilterbank) -> Result<Array2<f64>> {
    if a.ncols() != fb.n_freq() {
        return Err(Error::shape(
            format!("{} frequency bins", fb.n_freq()),
            format!("{} frequency bins", a.ncols()),
        ));
    }
    Ok(a.dot(&fb.m.t()))
}

/// `ln(max(x, 1e-5))` elementwise.
pub fn log_compress(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(AMPLITUDE_FLOOR).ln())
}

pub fn log_expand(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(f64::exp)
}

/// Column sums of `M`, one per frequency bin.
pub fn bin_coverage(fb: &MelFilterbank) -> Array1<f64> {
    fb.m.sum_axis(ndarray::Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn default_fb(scale: MelScale) -> MelFilterbank {
        let mc = MelConfig {
            mel_scale: scale,
            ..Default::default()
        };
        build_filterbank(&SpectralConfig::default(), &mc).unwrap()
    }

    #[test]
    fn mel_scale_reference_points() {
        // librosa.hz_to_mel reference values
        assert!((hz_to_mel(60.0, MelScale::Slaney) - 0.9).abs() < 1e-12);
        assert!((hz_to_mel(11025.0, MelScale::Slaney) - 49.91059448015905).abs() < 1e-10);
        assert!((hz_to_mel(1000.0, MelScale::Htk) - 999.9855371396243).abs() < 1e-9);
        for scale in [MelScale::Slaney, MelScale::Htk] {
            for hz in [0.0, 440.0, 999.0, 1000.0, 5000.0, 11025.0] {
                assert!((mel_to_hz(hz_to_mel(hz, scale), scale) - hz).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn default_shapes_and_nonnegativity() {
        let fb = default_fb(MelScale::Slaney);
        assert_eq!(fb.matrix().dim(), (80, 513));
        assert_eq!(fb.pinv().dim(), (513, 80));
        for row in fb.matrix().rows() {
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!(row.iter().any(|&v| v > 0.0));
        }
    }

    #[test]
    fn f_max_is_clamped_to_nyquist() {
        let mc = MelConfig::default();
        assert_eq!(mc.effective_f_max(22050), 11025.0);
        let a = filter_matrix(&SpectralConfig::default(), &mc).unwrap();
        let b = filter_matrix(
            &SpectralConfig::default(),
            &MelConfig {
                f_max: 11025.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_mel_configs() {
        let sc = SpectralConfig::default();
        let bad = MelConfig {
            f_min: 12000.0,
            ..Default::default()
        };
        assert!(build_filterbank(&sc, &bad).is_err());
        let zero = MelConfig {
            n_mels: 0,
            ..Default::default()
        };
        assert!(build_filterbank(&sc, &zero).is_err());
    }

    #[test]
    fn interior_bins_are_covered() {
        for scale in [MelScale::Slaney, MelScale::Htk] {
            let fb = default_fb(scale);
            let sc = fb.spectral_config().clone();
            let cov = bin_coverage(&fb);
            let f_max = fb.mel_config().effective_f_max(sc.sample_rate);
            for (k, &c) in cov.iter().enumerate() {
                let f = k as f64 * sc.sample_rate as f64 / sc.n_fft as f64;
                if f > fb.mel_config().f_min && f < f_max {
                    assert!(c > 0.0, "{scale:?} bin {k}");
                }
            }
        }
    }

    #[test]
    fn identity_stub_has_identity_pinv() {
        let sc = SpectralConfig {
            n_fft: 8,
            hop: 2,
            win_length: 8,
            ..Default::default()
        };
        let mc = MelConfig {
            n_mels: 5,
            ..Default::default()
        };
        let fb = MelFilterbank::from_matrix(Array2::eye(5), sc, mc).unwrap();
        assert_eq!(fb.pinv(), &Array2::<f64>::eye(5));
    }

    #[test]
    fn penrose_conditions_hold_for_both_scales() {
        for scale in [MelScale::Slaney, MelScale::Htk] {
            let fb = default_fb(scale);
            for r in fb.penrose_residuals() {
                assert!(r < 1e-6, "{scale:?}: {r}");
            }
            assert!(fb.pinv().iter().any(|&v| v < 0.0));
        }
    }

    #[test]
    fn deterministic_construction() {
        let a = default_fb(MelScale::Slaney);
        let b = default_fb(MelScale::Slaney);
        assert_eq!(a.matrix(), b.matrix());
        assert_eq!(a.pinv(), b.pinv());
    }

    #[test]
    fn apply_mel_cases() {
        let fb = default_fb(MelScale::Slaney);
        let sc = fb.spectral_config().clone();
        let zero = AmplitudeSpectrogram::new(Array2::zeros((3, 513)), Domain::Linear, sc.clone())
            .unwrap();
        assert!(apply_mel(&zero, &fb).unwrap().frames.iter().all(|&v| v == 0.0));

        let ones =
            AmplitudeSpectrogram::new(Array2::ones((1, 513)), Domain::Linear, sc.clone()).unwrap();
        let x = apply_mel(&ones, &fb).unwrap();
        for (k, row) in fb.matrix().rows().into_iter().enumerate() {
            let row_sum: f64 = row.iter().sum();
            assert!((x.frames[[0, k]] - row_sum).abs() < 1e-12);
        }

        let bad = AmplitudeSpectrogram::new(Array2::ones((1, 513)), Domain::Log, sc).unwrap();
        assert!(apply_mel(&bad, &fb).is_err());
    }

    #[test]
    fn log_compress_cases() {
        let x = array![[1.0, 0.0, 2.5, 1e-5]];
        let y = log_compress(&x);
        assert_eq!(y[[0, 0]], 0.0);
        assert_eq!(y[[0, 1]], 1e-5f64.ln());
        let back = log_expand(&y);
        for (a, b) in [(2.5, back[[0, 2]]), (1e-5, back[[0, 3]])] {
            assert!(((a - b) / a).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn apply_mel_is_linear_and_nonnegative(
                a in proptest::collection::vec(0.0f64..5.0, 513),
                b in proptest::collection::vec(0.0f64..5.0, 513),
                alpha in 0.0f64..3.0,
                beta in 0.0f64..3.0,
            ) {
                let fb = default_fb(MelScale::Slaney);
                let sc = fb.spectral_config().clone();
                let a = Array2::from_shape_vec((1, 513), a).unwrap();
                let b = Array2::from_shape_vec((1, 513), b).unwrap();
                let mix = &a * alpha + &b * beta;
                let f = |x: Array2<f64>| {
                    apply_mel(&AmplitudeSpectrogram::new(x, Domain::Linear, sc.clone()).unwrap(), &fb)
                        .unwrap()
                        .frames
                };
                let lhs = f(mix);
                let rhs = f(a) * alpha + f(b) * beta;
                prop_assert!(lhs.iter().all(|&v| v >= 0.0));
                for (l, r) in lhs.iter().zip(rhs.iter()) {
                    prop_assert!((l - r).abs() < 1e-10);
                }
            }
        }
    }
}
