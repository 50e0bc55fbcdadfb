"""
Reverberation-matching loss and its gradient with respect to the dry estimate.

    L = sum_{f,t} |Yh - Y|^2 + lam * |ln((1 + gam |Yh|) / (1 + gam |Y|))|^2

Gradients follow the Wirtinger convention ``G = 2 dL/d conj(z)``, i.e.
``dL/dRe(z) + j dL/dIm(z)``, so ``z <- z - eta * G`` is a descent step and
the directional derivative along ``v`` is ``Re(sum(conj(G) * v))``.
"""

from dataclasses import dataclass

import numpy as np

from .ctf import ctf_adjoint, ctf_convolve
from .stft import Spectrogram


@dataclass(frozen=True)
class LossWeights:
    lam: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class LossReport:
    total: float
    data_term: float
    log_term: float


def _check_same(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not a.config.compatible(b.config):
        raise ValueError("spectrograms use different STFT configs")


def _terms(est, obs, w):
    data = np.abs(est - obs) ** 2
    log_ratio = np.log1p(w.gamma * np.abs(est)) - np.log1p(w.gamma * np.abs(obs))
    return data, log_ratio


def reverb_match_loss(Y_hat, Y, w=LossWeights()):
    _check_same(Y_hat, Y)
    data, log_ratio = _terms(Y_hat.data, Y.data, w)
    data_term = float(data.sum())
    log_term = float((log_ratio ** 2).sum())
    return LossReport(data_term + w.lam * log_term, data_term, log_term)


def pointwise_gradient(est, obs, w):
    """``2 dL/d conj(Yh)`` per bin; the log term contributes 0 where ``Yh = 0``."""
    mag = np.abs(est)
    _, log_ratio = _terms(est, obs, w)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(mag > 0, est / mag, 0.0)
    grad = 2.0 * (est - obs)
    if w.lam:
        grad = grad + 2.0 * w.lam * w.gamma * log_ratio / (1.0 + w.gamma * mag) * unit
    return grad


def loss_and_gradient(S_hat, Y, H, w=LossWeights()):
    """Loss of ``ctf_convolve(S_hat, H)`` against ``Y`` and its gradient in ``S_hat``.

    ``Y`` may have fewer frames than the convolution output (an observation
    cut at the end of the recording); the prediction is cropped to match.
    """
    Y_full = ctf_convolve(S_hat, H)
    n_obs = Y.n_frames
    if n_obs > Y_full.n_frames:
        raise ValueError(
            f"observation has {n_obs} frames, model produces {Y_full.n_frames}")
    Y_hat = Spectrogram(Y_full.data[:, :n_obs], Y_full.config)
    report = reverb_match_loss(Y_hat, Y, w)
    g_out = Spectrogram(pointwise_gradient(Y_hat.data, Y.data, w), Y.config)
    return report, ctf_adjoint(g_out, H, S_hat.n_frames)


def loss_gradient(S_hat, Y, H, w=LossWeights()):
    return loss_and_gradient(S_hat, Y, H, w)[1]
