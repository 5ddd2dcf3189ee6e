#!/usr/bin/env python3
"""Reference forward pass for the tiny generator used by the golden tests.

Writes, into the output directory:
  tiny.fvw        random weights (FVW1)
  mel.fvt         linear mel input, T x n_mels (FVT1)
  expected.json   ASP log amplitude, PSP R/I heads and phase, full precision

Everything here is numpy only; nothing is shared with the Rust code.
"""

import json
import math
import struct
import sys
from pathlib import Path

import numpy as np

SR = 22050
N_FFT = 64
N_MELS = 8
N_FREQ = N_FFT // 2 + 1
PSP_DIM = 6
HIDDEN = 10
PSP_BLOCKS = 2
KERNEL = 7
T = 12
EPS = 1e-6
FLOOR = 1e-5


def hz_to_mel(f):
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    logstep = math.log(6.4) / 27.0
    if f >= min_log_hz:
        return min_log_hz / f_sp + math.log(f / min_log_hz) / logstep
    return f / f_sp


def mel_to_hz(m):
    f_sp = 200.0 / 3
    min_log_mel = 1000.0 / f_sp
    logstep = math.log(6.4) / 27.0
    if m >= min_log_mel:
        return 1000.0 * math.exp(logstep * (m - min_log_mel))
    return f_sp * m


def slaney_filterbank():
    fft_freqs = np.arange(N_FREQ) * SR / N_FFT
    lo, hi = hz_to_mel(0.0), hz_to_mel(SR / 2)
    pts = np.array([mel_to_hz(m) for m in np.linspace(lo, hi, N_MELS + 2)])
    fb = np.zeros((N_MELS, N_FREQ))
    for i in range(N_MELS):
        up = (fft_freqs - pts[i]) / (pts[i + 1] - pts[i])
        down = (pts[i + 2] - fft_freqs) / (pts[i + 2] - pts[i + 1])
        fb[i] = np.maximum(0.0, np.minimum(up, down)) * 2.0 / (pts[i + 2] - pts[i])
    return fb


def conv1d(x, w, b):
    """x: [T, in], w: [out, in, k] (cross-correlation, zero 'same' padding)."""
    k = w.shape[2]
    pad = k // 2
    xp = np.pad(x, ((pad, pad), (0, 0)))
    y = np.tile(b, (x.shape[0], 1)).astype(np.float64)
    for t in range(x.shape[0]):
        window = xp[t:t + k]  # [k, in]
        y[t] += np.einsum("oik,ki->o", w, window)
    return y


def block(x, p):
    dw = p["dwconv.weight"][:, 0, :]
    k = dw.shape[1]
    pad = k // 2
    xp = np.pad(x, ((pad, pad), (0, 0)))
    h = np.array([(xp[t:t + k] * dw.T).sum(axis=0) for t in range(x.shape[0])])
    h = h + p["dwconv.bias"]
    mu = h.mean(axis=1, keepdims=True)
    var = ((h - mu) ** 2).mean(axis=1, keepdims=True)
    h = (h - mu) / np.sqrt(var + EPS) * p["norm.weight"] + p["norm.bias"]
    h = h @ p["pwconv1.weight"].T + p["pwconv1.bias"]
    h = 0.5 * h * (1.0 + np.vectorize(math.erf)(h / math.sqrt(2.0)))
    gx = np.sqrt((h ** 2).sum(axis=0, keepdims=True))
    nx = gx / (gx.mean(axis=1, keepdims=True) + EPS)
    h = p["grn.gamma"] * (h * nx) + p["grn.beta"] + h
    h = h @ p["pwconv2.weight"].T + p["pwconv2.bias"]
    return x + h


def fvt1(arr):
    arr = np.ascontiguousarray(arr, dtype="<f4")
    out = b"FVT1" + struct.pack("<II", 1, arr.ndim)
    out += b"".join(struct.pack("<Q", d) for d in arr.shape)
    return out + arr.tobytes()


def tensor_specs(asp_dim):
    specs = []

    def conv(name, o, i):
        specs.append((f"{name}.weight", (o, i, KERNEL)))
        specs.append((f"{name}.bias", (o,)))

    def blocks(prefix, n, dim):
        for b in range(n):
            p = f"{prefix}.blocks.{b}"
            specs.extend([
                (f"{p}.dwconv.weight", (dim, 1, KERNEL)),
                (f"{p}.dwconv.bias", (dim,)),
                (f"{p}.norm.weight", (dim,)),
                (f"{p}.norm.bias", (dim,)),
                (f"{p}.pwconv1.weight", (HIDDEN, dim)),
                (f"{p}.pwconv1.bias", (HIDDEN,)),
                (f"{p}.grn.gamma", (HIDDEN,)),
                (f"{p}.grn.beta", (HIDDEN,)),
                (f"{p}.pwconv2.weight", (dim, HIDDEN)),
                (f"{p}.pwconv2.bias", (dim,)),
            ])

    conv("psp.in_conv", PSP_DIM, N_MELS)
    blocks("psp", PSP_BLOCKS, PSP_DIM)
    conv("psp.out_r", N_FREQ, PSP_DIM)
    conv("psp.out_i", N_FREQ, PSP_DIM)
    blocks("asp", 1, asp_dim)
    return specs


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240611)

    manifest = (
        f"format_version=1\nn_mels={N_MELS}\nn_freq={N_FREQ}\npsp_dim={PSP_DIM}\n"
        f"psp_blocks={PSP_BLOCKS}\nhidden={HIDDEN}\nconv_kernel={KERNEL}\n"
        f"dw_kernel={KERNEL}\nasp_blocks=1\nasp_dim={N_FREQ}\nasp_convs=false\n"
    ).encode()
    weights = {}
    blob = b"FVW1" + struct.pack("<I", len(manifest)) + manifest
    for name, shape in tensor_specs(N_FREQ):
        if name.endswith("norm.weight"):
            v = 1.0 + 0.2 * rng.standard_normal(shape)
        else:
            v = rng.uniform(-0.4, 0.4, shape)
        v = v.astype(np.float32).astype(np.float64)
        weights[name] = v
        enc = name.encode()
        blob += struct.pack("<I", len(enc)) + enc + fvt1(v)
    (out / "tiny.fvw").write_bytes(blob)

    mel = rng.uniform(0.0, 0.3, (T, N_MELS)).astype(np.float32).astype(np.float64)
    mel[3, 2] = 0.0
    (out / "mel.fvt").write_bytes(fvt1(mel))

    def group(prefix):
        return {k[len(prefix):]: v for k, v in weights.items() if k.startswith(prefix)}

    fb = slaney_filterbank()
    prior = np.log(np.maximum(np.abs(mel @ np.linalg.pinv(fb, rcond=1e-10).T), FLOOR))
    asp = block(prior, group("asp.blocks.0."))

    h = conv1d(mel, weights["psp.in_conv.weight"], weights["psp.in_conv.bias"])
    for b in range(PSP_BLOCKS):
        h = block(h, group(f"psp.blocks.{b}."))
    r = conv1d(h, weights["psp.out_r.weight"], weights["psp.out_r.bias"])
    i = conv1d(h, weights["psp.out_i.weight"], weights["psp.out_i.bias"])
    phase = np.arctan2(i, r)

    expected = {
        "prior_log_amp": prior.tolist(),
        "asp_log_amp": asp.tolist(),
        "psp_r": r.tolist(),
        "psp_i": i.tolist(),
        "psp_phase": phase.tolist(),
    }
    (out / "expected.json").write_text(json.dumps(expected, indent=1) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/golden")
