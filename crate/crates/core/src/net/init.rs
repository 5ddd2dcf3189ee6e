//! Deterministic pseudo-random generator weights for tests and benchmarks.

use ndarray::{Array, Array1, Dimension, ShapeBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ArchManifest, Conv1d, ConvNeXtV2BlockWeights, DepthwiseConv1d, GeneratorWeights, Linear};
use crate::Result;

/// Uniform values in `[-bound, bound]`, rounded to `f32` so that weights
/// survive a round trip through the file format unchanged.
fn uniform<D, Sh>(rng: &mut ChaCha8Rng, shape: Sh, bound: f64) -> Array<f64, D>
where
    D: Dimension,
    Sh: ShapeBuilder<Dim = D>,
{
    Array::from_shape_simple_fn(shape, || rng.random_range(-bound..=bound) as f32 as f64)
}

fn conv(rng: &mut ChaCha8Rng, out: usize, inp: usize, k: usize) -> Conv1d {
    let bound = 1.0 / ((inp * k) as f64).sqrt();
    Conv1d {
        weight: uniform(rng, (out, inp, k), bound),
        bias: uniform(rng, out, bound),
    }
}

fn block(rng: &mut ChaCha8Rng, dim: usize, hidden: usize, k: usize) -> ConvNeXtV2BlockWeights {
    let dw_bound = 1.0 / (k as f64).sqrt();
    let b1 = 1.0 / (dim as f64).sqrt();
    let b2 = 1.0 / (hidden as f64).sqrt();
    ConvNeXtV2BlockWeights {
        dw_conv: DepthwiseConv1d {
            weight: uniform(rng, (dim, k), dw_bound),
            bias: uniform(rng, dim, dw_bound),
        },
        norm_scale: Array1::ones(dim),
        norm_shift: Array1::zeros(dim),
        pw1: Linear {
            weight: uniform(rng, (hidden, dim), b1),
            bias: uniform(rng, hidden, b1),
        },
        grn_gamma: uniform(rng, hidden, 0.1),
        grn_beta: uniform(rng, hidden, 0.1),
        pw2: Linear {
            weight: uniform(rng, (dim, hidden), b2),
            bias: uniform(rng, dim, b2),
        },
    }
}

/// Fan-in-scaled uniform weights drawn from a ChaCha8 stream seeded with
/// `seed`; identical seeds and manifests give bit-identical weights.
pub fn gen_weights(seed: u64, manifest: &ArchManifest) -> Result<GeneratorWeights> {
    manifest.validate()?;
    let m = manifest;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psp_in_conv = conv(&mut rng, m.psp_dim, m.n_mels, m.conv_kernel);
    let psp_blocks = (0..m.psp_blocks)
        .map(|_| block(&mut rng, m.psp_dim, m.hidden, m.dw_kernel))
        .collect();
    let psp_out_r = conv(&mut rng, m.n_freq, m.psp_dim, m.conv_kernel);
    let psp_out_i = conv(&mut rng, m.n_freq, m.psp_dim, m.conv_kernel);
    let asp_in_conv = m.asp_convs.then(|| conv(&mut rng, m.asp_dim, m.n_mels, m.conv_kernel));
    let asp_blocks = (0..m.asp_blocks)
        .map(|_| block(&mut rng, m.asp_dim, m.hidden, m.dw_kernel))
        .collect();
    let asp_out_conv = m.asp_convs.then(|| conv(&mut rng, m.n_freq, m.asp_dim, m.conv_kernel));
    Ok(GeneratorWeights {
        manifest: m.clone(),
        psp_in_conv,
        psp_blocks,
        psp_out_r,
        psp_out_i,
        asp_in_conv,
        asp_blocks,
        asp_out_conv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let m = ArchManifest {
            psp_blocks: 1,
            ..ArchManifest::freev()
        };
        let a = gen_weights(0, &m).unwrap();
        assert_eq!(a, gen_weights(0, &m).unwrap());
        assert_ne!(a.psp_in_conv, gen_weights(1, &m).unwrap().psp_in_conv);
    }

    #[test]
    fn defaults_follow_manifest() {
        let w = gen_weights(0, &ArchManifest::freev()).unwrap();
        assert_eq!(w.psp_blocks.len(), 8);
        assert_eq!(w.asp_blocks.len(), 1);
        assert!(w.psp_blocks.iter().chain(&w.asp_blocks).all(|b| b.hidden() == 1536));
        assert_eq!(w.asp_blocks[0].dim(), 513);
        assert!(w.asp_in_conv.is_none() && w.asp_out_conv.is_none());
        assert!(w.psp_in_conv.weight.iter().all(|&v| v == v as f32 as f64));
    }
}
