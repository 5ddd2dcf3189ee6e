//! Convolution primitives and the ConvNeXtV2 block, all on frame-major
//! `T × channels` activations.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis, Zip};

use crate::{Error, Result};

const NORM_EPS: f64 = 1e-6;
const GRN_EPS: f64 = 1e-6;

/// Dense 1-D convolution, kernel `[out, in, k]`, zero "same" padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub weight: Array3<f64>,
    pub bias: Array1<f64>,
}

impl Conv1d {
    pub fn in_channels(&self) -> usize {
        self.weight.dim().1
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim().0
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (out_ch, in_ch, k) = self.weight.dim();
        if x.ncols() != in_ch {
            return Err(Error::shape(format!("{in_ch} channels"), format!("{} channels", x.ncols())));
        }
        let t = x.nrows();
        let mut y = Array2::zeros((t, out_ch));
        y += &self.bias;
        let half = (k / 2) as isize;
        for j in 0..k {
            let offset = j as isize - half;
            // y[t] += x[t + offset] · W[:, :, j]ᵀ over the valid output rows.
            let (lo, hi) = ((-offset).max(0) as usize, (t as isize - offset).clamp(0, t as isize) as usize);
            if lo >= hi {
                continue;
            }
            let src = x.slice(s![(lo as isize + offset) as usize..(hi as isize + offset) as usize, ..]);
            let w = self.weight.slice(s![.., .., j]);
            let mut dst = y.slice_mut(s![lo..hi, ..]);
            ndarray::linalg::general_mat_mul(1.0, &src, &w.t(), 1.0, &mut dst);
        }
        Ok(y)
    }
}

/// Per-channel 1-D convolution, kernel `[channels, k]`, zero "same" padding.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseConv1d {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DepthwiseConv1d {
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (t, c) = x.dim();
        let k = self.weight.ncols();
        let half = (k / 2) as isize;
        let mut y = Array2::zeros((t, c));
        y += &self.bias;
        for j in 0..k {
            let offset = j as isize - half;
            let taps = self.weight.column(j);
            for ti in 0..t {
                let src = ti as isize + offset;
                if src < 0 || src >= t as isize {
                    continue;
                }
                let mut row = y.row_mut(ti);
                Zip::from(&mut row)
                    .and(&x.row(src as usize))
                    .and(&taps)
                    .for_each(|o, &v, &w| *o += v * w);
            }
        }
        y
    }
}

/// Fully connected layer, weight `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight.t());
        y += &self.bias;
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNeXtV2BlockWeights {
    pub dw_conv: DepthwiseConv1d,
    pub norm_scale: Array1<f64>,
    pub norm_shift: Array1<f64>,
    pub pw1: Linear,
    pub grn_gamma: Array1<f64>,
    pub grn_beta: Array1<f64>,
    pub pw2: Linear,
}

impl ConvNeXtV2BlockWeights {
    pub fn dim(&self) -> usize {
        self.dw_conv.weight.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.pw1.weight.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.dw_conv.weight.len()
            + self.dw_conv.bias.len()
            + self.norm_scale.len()
            + self.norm_shift.len()
            + self.pw1.weight.len()
            + self.pw1.bias.len()
            + self.grn_gamma.len()
            + self.grn_beta.len()
            + self.pw2.weight.len()
            + self.pw2.bias.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (dim, hidden) = (self.dim(), self.hidden());
        let ok = self.dw_conv.bias.len() == dim
            && self.norm_scale.len() == dim
            && self.norm_shift.len() == dim
            && self.pw1.weight.ncols() == dim
            && self.pw1.bias.len() == hidden
            && self.grn_gamma.len() == hidden
            && self.grn_beta.len() == hidden
            && self.pw2.weight.dim() == (dim, hidden)
            && self.pw2.bias.len() == dim;
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "inconsistent ConvNeXtV2 block shapes for dim {dim}, hidden {hidden}"
            )));
        }
        Ok(())
    }
}

/// Normalises every time step over channels.
pub fn layer_norm(x: &mut Array2<f64>, scale: &Array1<f64>, shift: &Array1<f64>) {
    let c = x.ncols() as f64;
    for mut row in x.rows_mut() {
        let mean = row.sum() / c;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c;
        let inv = 1.0 / (var + NORM_EPS).sqrt();
        Zip::from(&mut row)
            .and(scale)
            .and(shift)
            .for_each(|v, &g, &b| *v = (*v - mean) * inv * g + b);
    }
}

pub fn gelu(v: f64) -> f64 {
    0.5 * v * (1.0 + libm::erf(v / std::f64::consts::SQRT_2))
}

/// Global response normalisation: per-channel L2 norm over time, divided by
/// its mean over channels, gates the input; `γ·(x·N) + β + x`.
pub fn grn(x: &mut Array2<f64>, gamma: &Array1<f64>, beta: &Array1<f64>) {
    let g = x.map_axis(Axis(0), |col| col.dot(&col).sqrt());
    let mean = g.mean().unwrap_or(0.0);
    let n = g.mapv(|v| v / (mean + GRN_EPS));
    for mut row in x.rows_mut() {
        Zip::from(&mut row)
            .and(&n)
            .and(gamma)
            .and(beta)
            .for_each(|v, &nx, &ga, &be| *v = ga * (*v * nx) + be + *v);
    }
}

/// `x + pw2(GRN(gelu(pw1(layernorm(dwconv(x))))))`
pub fn convnext_v2_block(x: ArrayView2<f64>, w: &ConvNeXtV2BlockWeights) -> Result<Array2<f64>> {
    w.validate()?;
    if x.ncols() != w.dim() {
        return Err(Error::shape(format!("{} channels", w.dim()), format!("{} channels", x.ncols())));
    }
    let mut h = w.dw_conv.forward(x);
    layer_norm(&mut h, &w.norm_scale, &w.norm_shift);
    let mut h = w.pw1.forward(h.view());
    h.mapv_inplace(gelu);
    grn(&mut h, &w.grn_gamma, &w.grn_beta);
    let mut y = w.pw2.forward(h.view());
    y += &x;
    Ok(y)
}
