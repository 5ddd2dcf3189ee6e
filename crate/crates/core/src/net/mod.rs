//! Forward-only inference of the FreeV generator.
//!
//! The phase branch (PSP) maps the mel spectrogram through an input
//! convolution, a stack of ConvNeXtV2 blocks and two output convolutions
//! whose outputs feed [`parallel_phase`]. The amplitude branch (ASP) starts
//! from the frozen pseudo-inverse prior and adds a single ConvNeXtV2 block
//! as a residual corrector in the log-amplitude domain.

mod block;
mod init;

pub use block::{
    convnext_v2_block, gelu, grn, layer_norm, Conv1d, ConvNeXtV2BlockWeights, DepthwiseConv1d, Linear,
};
pub use init::gen_weights;

use std::collections::BTreeMap;

use ndarray::{Array2, Array3, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::dsp::{recombine, AmplitudeSpectrogram, Domain, PhaseSpectrogram, SpectralConfig, StftPlan, Waveform};
use crate::melbank::{log_compress, log_expand, MelFilterbank, MelSpectrogram};
use crate::phase::{parallel_phase, PhaseComponents};
use crate::prior::{estimate_prior, PriorMethod, PriorVariant};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchManifest {
    pub format_version: u32,
    pub n_mels: usize,
    pub n_freq: usize,
    pub psp_dim: usize,
    pub psp_blocks: usize,
    pub hidden: usize,
    /// Width of the input/output convolutions.
    pub conv_kernel: usize,
    /// Width of the depthwise convolutions inside blocks.
    pub dw_kernel: usize,
    pub asp_blocks: usize,
    pub asp_dim: usize,
    /// ASP with its own input and output convolutions (APNet2 layout) instead
    /// of the pseudo-inverse front end.
    pub asp_convs: bool,
}

impl Default for ArchManifest {
    fn default() -> Self {
        Self::freev()
    }
}

impl ArchManifest {
    pub fn freev() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            n_mels: 80,
            n_freq: 513,
            psp_dim: 512,
            psp_blocks: 8,
            hidden: 1536,
            conv_kernel: 7,
            dw_kernel: 7,
            asp_blocks: 1,
            asp_dim: 513,
            asp_convs: false,
        }
    }

    /// Same primitives with an APNet2-shaped amplitude branch: input conv,
    /// eight blocks at width 512 and an output conv.
    pub fn apnet2() -> Self {
        Self {
            asp_blocks: 8,
            asp_dim: 512,
            asp_convs: true,
            ..Self::freev()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported weight format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let positive = [
            self.n_mels,
            self.n_freq,
            self.psp_dim,
            self.hidden,
            self.conv_kernel,
            self.dw_kernel,
            self.asp_dim,
        ];
        if positive.contains(&0) {
            return Err(Error::InvalidConfig("manifest sizes must be positive".into()));
        }
        if self.conv_kernel % 2 == 0 || self.dw_kernel % 2 == 0 {
            return Err(Error::InvalidConfig("kernel widths must be odd".into()));
        }
        if !self.asp_convs && self.asp_dim != self.n_freq {
            return Err(Error::InvalidConfig(format!(
                "prior-fed ASP works at {} bins, manifest says asp_dim={}",
                self.n_freq, self.asp_dim
            )));
        }
        Ok(())
    }

    /// Whether `spectral`/`fb` produce tensors of the sizes this manifest expects.
    pub fn check_filterbank(&self, fb: &MelFilterbank) -> Result<()> {
        if fb.n_mels() != self.n_mels || fb.n_freq() != self.n_freq {
            return Err(Error::shape(
                format!("{} mels x {} bins", self.n_mels, self.n_freq),
                format!("{} mels x {} bins", fb.n_mels(), fb.n_freq()),
            ));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "format_version={}\nn_mels={}\nn_freq={}\npsp_dim={}\npsp_blocks={}\nhidden={}\n\
             conv_kernel={}\ndw_kernel={}\nasp_blocks={}\nasp_dim={}\nasp_convs={}\n",
            self.format_version,
            self.n_mels,
            self.n_freq,
            self.psp_dim,
            self.psp_blocks,
            self.hidden,
            self.conv_kernel,
            self.dw_kernel,
            self.asp_blocks,
            self.asp_dim,
            self.asp_convs
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("malformed manifest line '{line}'")))?;
            kv.insert(k.trim(), v.trim());
        }
        let get = |k: &str| -> Result<&str> {
            kv.get(k).copied().ok_or_else(|| Error::Format(format!("manifest is missing '{k}'")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::Format(format!("manifest field '{k}' is not a count")))
        };
        let format_version: u32 = get("format_version")?
            .parse()
            .map_err(|_| Error::Format("manifest format_version is not an integer".into()))?;
        if format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported weight format version {format_version} (expected {FORMAT_VERSION})"
            )));
        }
        let m = Self {
            format_version,
            n_mels: num("n_mels")?,
            n_freq: num("n_freq")?,
            psp_dim: num("psp_dim")?,
            psp_blocks: num("psp_blocks")?,
            hidden: num("hidden")?,
            conv_kernel: num("conv_kernel")?,
            dw_kernel: num("dw_kernel")?,
            asp_blocks: num("asp_blocks")?,
            asp_dim: num("asp_dim")?,
            asp_convs: get("asp_convs")?
                .parse()
                .map_err(|_| Error::Format("manifest field 'asp_convs' is not a boolean".into()))?,
        };
        m.validate()?;
        Ok(m)
    }

    /// Names and shapes of every tensor, in file order.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let conv = |out: &mut Vec<(String, Vec<usize>)>, name: &str, o: usize, i: usize| {
            out.push((format!("{name}.weight"), vec![o, i, self.conv_kernel]));
            out.push((format!("{name}.bias"), vec![o]));
        };
        let blocks = |out: &mut Vec<(String, Vec<usize>)>, prefix: &str, n: usize, dim: usize| {
            for b in 0..n {
                let p = format!("{prefix}.blocks.{b}");
                out.push((format!("{p}.dwconv.weight"), vec![dim, 1, self.dw_kernel]));
                out.push((format!("{p}.dwconv.bias"), vec![dim]));
                out.push((format!("{p}.norm.weight"), vec![dim]));
                out.push((format!("{p}.norm.bias"), vec![dim]));
                out.push((format!("{p}.pwconv1.weight"), vec![self.hidden, dim]));
                out.push((format!("{p}.pwconv1.bias"), vec![self.hidden]));
                out.push((format!("{p}.grn.gamma"), vec![self.hidden]));
                out.push((format!("{p}.grn.beta"), vec![self.hidden]));
                out.push((format!("{p}.pwconv2.weight"), vec![dim, self.hidden]));
                out.push((format!("{p}.pwconv2.bias"), vec![dim]));
            }
        };
        conv(&mut out, "psp.in_conv", self.psp_dim, self.n_mels);
        blocks(&mut out, "psp", self.psp_blocks, self.psp_dim);
        conv(&mut out, "psp.out_r", self.n_freq, self.psp_dim);
        conv(&mut out, "psp.out_i", self.n_freq, self.psp_dim);
        if self.asp_convs {
            conv(&mut out, "asp.in_conv", self.asp_dim, self.n_mels);
        }
        blocks(&mut out, "asp", self.asp_blocks, self.asp_dim);
        if self.asp_convs {
            conv(&mut out, "asp.out_conv", self.n_freq, self.asp_dim);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorWeights {
    pub manifest: ArchManifest,
    pub psp_in_conv: Conv1d,
    pub psp_blocks: Vec<ConvNeXtV2BlockWeights>,
    pub psp_out_r: Conv1d,
    pub psp_out_i: Conv1d,
    pub asp_in_conv: Option<Conv1d>,
    pub asp_blocks: Vec<ConvNeXtV2BlockWeights>,
    pub asp_out_conv: Option<Conv1d>,
}

/// Element counts per branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCounts {
    pub psp: usize,
    pub asp: usize,
    pub asp_blocks: usize,
    pub asp_convs: usize,
    pub total: usize,
}

/// Sequential reader over shape-checked tensors.
struct Cursor(std::vec::IntoIter<ArrayD<f64>>);

impl Cursor {
    fn next<D: ndarray::Dimension>(&mut self) -> ndarray::Array<f64, D> {
        let t = self.0.next().expect("tensor count checked against manifest");
        t.into_dimensionality().expect("shape checked against manifest")
    }

    fn conv(&mut self) -> Conv1d {
        Conv1d {
            weight: self.next(),
            bias: self.next(),
        }
    }

    fn block(&mut self) -> ConvNeXtV2BlockWeights {
        let dw: Array3<f64> = self.next();
        let (dim, _, k) = dw.dim();
        ConvNeXtV2BlockWeights {
            dw_conv: DepthwiseConv1d {
                weight: dw.into_shape_with_order((dim, k)).expect("contiguous"),
                bias: self.next(),
            },
            norm_scale: self.next(),
            norm_shift: self.next(),
            pw1: Linear {
                weight: self.next(),
                bias: self.next(),
            },
            grn_gamma: self.next(),
            grn_beta: self.next(),
            pw2: Linear {
                weight: self.next(),
                bias: self.next(),
            },
        }
    }
}

impl GeneratorWeights {
    pub fn param_counts(&self) -> ParamCounts {
        let psp = self.psp_in_conv.param_count()
            + self.psp_blocks.iter().map(ConvNeXtV2BlockWeights::param_count).sum::<usize>()
            + self.psp_out_r.param_count()
            + self.psp_out_i.param_count();
        let asp_blocks = self.asp_blocks.iter().map(ConvNeXtV2BlockWeights::param_count).sum();
        let asp_convs = self.asp_in_conv.as_ref().map_or(0, Conv1d::param_count)
            + self.asp_out_conv.as_ref().map_or(0, Conv1d::param_count);
        ParamCounts {
            psp,
            asp: asp_blocks + asp_convs,
            asp_blocks,
            asp_convs,
            total: psp + asp_blocks + asp_convs,
        }
    }

    /// Every tensor, named and ordered as in [`ArchManifest::tensor_specs`].
    pub fn named_tensors(&self) -> Vec<(String, ArrayD<f64>)> {
        let mut out = Vec::new();
        let conv = |out: &mut Vec<(String, ArrayD<f64>)>, name: &str, c: &Conv1d| {
            out.push((format!("{name}.weight"), c.weight.clone().into_dyn()));
            out.push((format!("{name}.bias"), c.bias.clone().into_dyn()));
        };
        let blocks = |out: &mut Vec<(String, ArrayD<f64>)>, prefix: &str, bs: &[ConvNeXtV2BlockWeights]| {
            for (b, w) in bs.iter().enumerate() {
                let p = format!("{prefix}.blocks.{b}");
                let (dim, k) = w.dw_conv.weight.dim();
                let dw = w.dw_conv.weight.clone().into_shape_with_order(IxDyn(&[dim, 1, k])).unwrap();
                out.push((format!("{p}.dwconv.weight"), dw));
                out.push((format!("{p}.dwconv.bias"), w.dw_conv.bias.clone().into_dyn()));
                out.push((format!("{p}.norm.weight"), w.norm_scale.clone().into_dyn()));
                out.push((format!("{p}.norm.bias"), w.norm_shift.clone().into_dyn()));
                out.push((format!("{p}.pwconv1.weight"), w.pw1.weight.clone().into_dyn()));
                out.push((format!("{p}.pwconv1.bias"), w.pw1.bias.clone().into_dyn()));
                out.push((format!("{p}.grn.gamma"), w.grn_gamma.clone().into_dyn()));
                out.push((format!("{p}.grn.beta"), w.grn_beta.clone().into_dyn()));
                out.push((format!("{p}.pwconv2.weight"), w.pw2.weight.clone().into_dyn()));
                out.push((format!("{p}.pwconv2.bias"), w.pw2.bias.clone().into_dyn()));
            }
        };
        conv(&mut out, "psp.in_conv", &self.psp_in_conv);
        blocks(&mut out, "psp", &self.psp_blocks);
        conv(&mut out, "psp.out_r", &self.psp_out_r);
        conv(&mut out, "psp.out_i", &self.psp_out_i);
        if let Some(c) = &self.asp_in_conv {
            conv(&mut out, "asp.in_conv", c);
        }
        blocks(&mut out, "asp", &self.asp_blocks);
        if let Some(c) = &self.asp_out_conv {
            conv(&mut out, "asp.out_conv", c);
        }
        out
    }

    /// Assembles weights from tensors that must match the manifest's names,
    /// order and shapes exactly.
    pub fn from_named_tensors(manifest: ArchManifest, tensors: Vec<(String, ArrayD<f64>)>) -> Result<Self> {
        manifest.validate()?;
        let specs = manifest.tensor_specs();
        if specs.len() != tensors.len() {
            return Err(Error::Format(format!(
                "expected {} tensors, found {}",
                specs.len(),
                tensors.len()
            )));
        }
        for ((name, shape), (got_name, t)) in specs.iter().zip(&tensors) {
            if name != got_name {
                return Err(Error::Format(format!("expected tensor '{name}', found '{got_name}'")));
            }
            if t.shape() != shape.as_slice() {
                return Err(Error::Format(format!(
                    "tensor '{name}' has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("weight tensor"));
            }
        }
        let mut c = Cursor(tensors.into_iter().map(|(_, t)| t).collect::<Vec<_>>().into_iter());
        let psp_in_conv = c.conv();
        let psp_blocks = (0..manifest.psp_blocks).map(|_| c.block()).collect();
        let psp_out_r = c.conv();
        let psp_out_i = c.conv();
        let asp_in_conv = manifest.asp_convs.then(|| c.conv());
        let asp_blocks = (0..manifest.asp_blocks).map(|_| c.block()).collect();
        let asp_out_conv = manifest.asp_convs.then(|| c.conv());
        Ok(Self {
            manifest,
            psp_in_conv,
            psp_blocks,
            psp_out_r,
            psp_out_i,
            asp_in_conv,
            asp_blocks,
            asp_out_conv,
        })
    }

    /// Zeroes the final projection of every block, turning each into the
    /// identity map.
    pub fn zero_block_projections(&mut self) {
        for b in self.psp_blocks.iter_mut().chain(self.asp_blocks.iter_mut()) {
            b.pw2.weight.fill(0.0);
            b.pw2.bias.fill(0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocodeResult {
    pub waveform: Waveform,
    pub pred_log_amp: AmplitudeSpectrogram,
    pub pred_phase: PhaseSpectrogram,
    pub prior_log_amp: AmplitudeSpectrogram,
}

fn linear_mel(x: &MelSpectrogram) -> Array2<f64> {
    match x.domain {
        Domain::Linear => x.frames.clone(),
        Domain::Log => log_expand(&x.frames),
    }
}

/// `log(max(|M⁺X|, 1e-5))`, the frozen front end of the amplitude branch.
pub fn asp_prior(x: &MelSpectrogram, fb: &MelFilterbank) -> Result<AmplitudeSpectrogram> {
    let lin = MelSpectrogram {
        frames: linear_mel(x),
        domain: Domain::Linear,
    };
    let prior = estimate_prior(&lin, fb, &PriorMethod::new(PriorVariant::PseudoInverseAbs))?;
    Ok(AmplitudeSpectrogram {
        frames: log_compress(&prior.frames),
        domain: Domain::Log,
        config: fb.spectral_config().clone(),
    })
}

fn check_mels(x: &MelSpectrogram, w: &GeneratorWeights) -> Result<()> {
    if x.n_mels() != w.manifest.n_mels {
        return Err(Error::shape(
            format!("{} mel bands", w.manifest.n_mels),
            format!("{} mel bands", x.n_mels()),
        ));
    }
    Ok(())
}

/// Log amplitude: the prior plus the residual block's correction.
pub fn asp_forward(x: &MelSpectrogram, fb: &MelFilterbank, w: &GeneratorWeights) -> Result<AmplitudeSpectrogram> {
    let prior = asp_prior(x, fb)?;
    asp_from_prior(x, &prior, w)
}

fn asp_from_prior(x: &MelSpectrogram, prior: &AmplitudeSpectrogram, w: &GeneratorWeights) -> Result<AmplitudeSpectrogram> {
    check_mels(x, w)?;
    if w.manifest.asp_convs || w.asp_in_conv.is_some() {
        return Err(Error::Unsupported(
            "forward pass needs the pseudo-inverse-fed amplitude branch (asp_convs=false)".into(),
        ));
    }
    let mut h = prior.frames.clone();
    for b in &w.asp_blocks {
        h = convnext_v2_block(h.view(), b)?;
    }
    Ok(AmplitudeSpectrogram {
        frames: h,
        domain: Domain::Log,
        config: prior.config.clone(),
    })
}

/// Raw `(R, I)` head outputs of the phase branch.
pub fn psp_components(x: &MelSpectrogram, w: &GeneratorWeights) -> Result<PhaseComponents> {
    check_mels(x, w)?;
    let mut h = w.psp_in_conv.forward(linear_mel(x).view())?;
    for b in &w.psp_blocks {
        h = convnext_v2_block(h.view(), b)?;
    }
    PhaseComponents::new(w.psp_out_r.forward(h.view())?, w.psp_out_i.forward(h.view())?)
}

pub fn psp_forward(x: &MelSpectrogram, w: &GeneratorWeights, config: &SpectralConfig) -> Result<PhaseSpectrogram> {
    if w.manifest.n_freq != config.n_freq() {
        return Err(Error::shape(
            format!("{} bins", config.n_freq()),
            format!("{} bins", w.manifest.n_freq),
        ));
    }
    parallel_phase(&psp_components(x, w)?, config)
}

pub fn vocode(x: &MelSpectrogram, fb: &MelFilterbank, w: &GeneratorWeights) -> Result<VocodeResult> {
    vocode_inner(x, fb, w, None)
}

/// Like [`vocode`] but with the phase branch replaced by a given phase,
/// e.g. the phase of the original recording.
pub fn vocode_with_phase(
    x: &MelSpectrogram,
    fb: &MelFilterbank,
    w: &GeneratorWeights,
    phase: &PhaseSpectrogram,
) -> Result<VocodeResult> {
    vocode_inner(x, fb, w, Some(phase))
}

fn vocode_inner(
    x: &MelSpectrogram,
    fb: &MelFilterbank,
    w: &GeneratorWeights,
    phase: Option<&PhaseSpectrogram>,
) -> Result<VocodeResult> {
    w.manifest.check_filterbank(fb)?;
    let prior = asp_prior(x, fb)?;
    let pred_log_amp = asp_from_prior(x, &prior, w)?;
    let pred_phase = match phase {
        Some(p) => {
            if p.frames.dim() != pred_log_amp.frames.dim() {
                return Err(Error::shape(
                    format!("{:?}", pred_log_amp.frames.dim()),
                    format!("{:?}", p.frames.dim()),
                ));
            }
            p.clone()
        }
        None => psp_forward(x, w, fb.spectral_config())?,
    };
    let plan = StftPlan::new(fb.spectral_config())?;
    let waveform = plan.istft(&recombine(&pred_log_amp.to_linear(), &pred_phase)?)?;
    Ok(VocodeResult {
        waveform,
        pred_log_amp,
        pred_phase,
        prior_log_amp: prior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::melbank::{build_filterbank, MelConfig};

    fn tiny() -> (ArchManifest, MelFilterbank) {
        let sc = SpectralConfig {
            n_fft: 64,
            hop: 16,
            win_length: 64,
            ..SpectralConfig::default()
        };
        let mc = MelConfig {
            n_mels: 8,
            ..MelConfig::default()
        };
        let fb = build_filterbank(&sc, &mc).unwrap();
        let m = ArchManifest {
            n_mels: 8,
            n_freq: 33,
            psp_dim: 6,
            psp_blocks: 2,
            hidden: 10,
            asp_dim: 33,
            ..ArchManifest::freev()
        };
        (m, fb)
    }

    fn mel(t: usize, n: usize) -> MelSpectrogram {
        MelSpectrogram::new(
            Array2::from_shape_fn((t, n), |(i, j)| 0.01 * (1 + (i * 7 + j * 3) % 11) as f64),
            Domain::Linear,
        )
        .unwrap()
    }

    #[test]
    fn manifest_text_round_trip() {
        for m in [ArchManifest::freev(), ArchManifest::apnet2()] {
            assert_eq!(ArchManifest::parse(&m.to_text()).unwrap(), m);
        }
        let bad = ArchManifest::freev().to_text().replace("format_version=1", "format_version=2");
        assert!(ArchManifest::parse(&bad).is_err());
    }

    #[test]
    fn tensor_specs_match_generated_weights() {
        let (m, _) = tiny();
        let w = gen_weights(0, &m).unwrap();
        let named = w.named_tensors();
        let specs = m.tensor_specs();
        assert_eq!(named.len(), specs.len());
        for ((n, t), (sn, shape)) in named.iter().zip(&specs) {
            assert_eq!(n, sn);
            assert_eq!(t.shape(), shape.as_slice());
        }
        let back = GeneratorWeights::from_named_tensors(m, named).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn shapes_and_ranges() {
        let (m, fb) = tiny();
        let w = gen_weights(3, &m).unwrap();
        let x = mel(9, 8);
        let a = asp_forward(&x, &fb, &w).unwrap();
        assert_eq!(a.frames.dim(), (9, 33));
        let p = psp_forward(&x, &w, fb.spectral_config()).unwrap();
        assert_eq!(p.frames.dim(), (9, 33));
        assert!(p.frames.iter().all(|&v| v > -std::f64::consts::PI && v <= std::f64::consts::PI));
    }

    #[test]
    fn residual_identity() {
        let (m, fb) = tiny();
        let mut w = gen_weights(4, &m).unwrap();
        w.zero_block_projections();
        let x = mel(7, 8);
        let prior = asp_prior(&x, &fb).unwrap();
        assert_eq!(asp_forward(&x, &fb, &w).unwrap().frames, prior.frames);
        let pc = psp_components(&x, &w).unwrap();
        let h = w.psp_in_conv.forward(x.frames.view()).unwrap();
        assert_eq!(pc.r, w.psp_out_r.forward(h.view()).unwrap());
        assert_eq!(pc.i, w.psp_out_i.forward(h.view()).unwrap());
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_phase() {
        let (m, fb) = tiny();
        let mut w = gen_weights(5, &m).unwrap();
        w.psp_in_conv.bias.fill(0.0);
        w.psp_out_r.bias.fill(0.0);
        w.psp_out_i.bias.fill(0.0);
        for b in &mut w.psp_blocks {
            b.dw_conv.bias.fill(0.0);
            b.norm_shift.fill(0.0);
            b.pw1.bias.fill(0.0);
            b.grn_beta.fill(0.0);
            b.pw2.bias.fill(0.0);
        }
        let x = MelSpectrogram::new(Array2::zeros((5, 8)), Domain::Linear).unwrap();
        let p = psp_forward(&x, &w, fb.spectral_config()).unwrap();
        assert!(p.frames.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn log_mel_input_is_expanded() {
        let (m, fb) = tiny();
        let w = gen_weights(6, &m).unwrap();
        let x = mel(6, 8);
        let a = asp_forward(&x, &fb, &w).unwrap();
        let b = asp_forward(&x.to_log(), &fb, &w).unwrap();
        for (u, v) in a.frames.iter().zip(b.frames.iter()) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn vocode_is_deterministic_and_sized() {
        let (m, fb) = tiny();
        let w = gen_weights(7, &m).unwrap();
        let x = mel(11, 8);
        let a = vocode(&x, &fb, &w).unwrap();
        let b = vocode(&x, &fb, &w).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.waveform.len(), 10 * 16);
    }

    #[test]
    fn apnet2_layout_counts_but_does_not_run() {
        let (m, fb) = tiny();
        let ap = ArchManifest {
            asp_blocks: 8,
            asp_dim: 6,
            asp_convs: true,
            ..m.clone()
        };
        let wa = gen_weights(0, &ap).unwrap();
        let wf = gen_weights(0, &m).unwrap();
        assert!(wf.param_counts().total < wa.param_counts().total);
        assert!(matches!(asp_forward(&mel(4, 8), &fb, &wa), Err(Error::Unsupported(_))));
    }

    #[test]
    fn mel_band_mismatch() {
        let (m, fb) = tiny();
        let w = gen_weights(0, &m).unwrap();
        assert!(asp_forward(&mel(4, 9), &fb, &w).is_err());
    }
}
