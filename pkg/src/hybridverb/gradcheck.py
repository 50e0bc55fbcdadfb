"""Finite-difference verification of the loss gradient on a small random problem."""

import numpy as np

from .ctf import ctf_convolve, ctf_from_rir, output_frames
from .loss import LossWeights, loss_gradient, reverb_match_loss
from .reverb import Rir, rng_for
from .stft import Spectrogram, make_stft_config

WEIGHT_GRID = (LossWeights(0.0, 1.0), LossWeights(0.5, 0.5), LossWeights(1.0, 1.0))


def random_problem(n_bins=32, n_frames=10, rir_frames=3, half_width=2, seed=0):
    """Random ``(S_hat, Y, H)`` with ``F = n_bins`` and ``T_h = rir_frames``."""
    cfg = make_stft_config(n_bins, n_bins // 2, 16000.0)
    rng = rng_for(seed)
    # longest RIR whose CTF still has rir_frames causal frames
    n_taps = rir_frames * cfg.hop - cfg.window_len + 1
    if n_taps < 1:
        raise ValueError("rir_frames too small for this window")
    h = Rir(rng.standard_normal(n_taps), cfg.sample_rate)
    H = ctf_from_rir(h, cfg, half_width)

    def cplx(shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    S = Spectrogram(cplx((n_bins, n_frames)), cfg)
    Y = Spectrogram(cplx((n_bins, output_frames(n_frames, H))), cfg)
    return S, Y, H, rng


def max_relative_error(n_bins=32, n_frames=10, half_width=2, seed=0,
                       n_dirs=20, step=1e-6, weights=WEIGHT_GRID):
    """Worst relative mismatch between ``Re<G, v>`` and a central difference along ``v``."""
    S, Y, H, rng = random_problem(n_bins, n_frames, 3, half_width, seed)
    worst = 0.0
    for w in weights:
        G = loss_gradient(S, Y, H, w).data

        def loss_at(x):
            return reverb_match_loss(ctf_convolve(Spectrogram(x, S.config), H), Y, w).total

        for _ in range(n_dirs):
            v = rng.standard_normal(S.shape) + 1j * rng.standard_normal(S.shape)
            analytic = float(np.real(np.vdot(G, v)))
            numeric = (loss_at(S.data + step * v) - loss_at(S.data - step * v)) / (2 * step)
            worst = max(worst, abs(analytic - numeric) / max(abs(numeric), 1e-300))
    return worst
