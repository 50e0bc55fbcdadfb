"""Objective scores for dereverberated signals."""

from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate

from .stft import Waveform, stft

DB_CAP = 100.0


@dataclass(frozen=True)
class MetricScore:
    name: str
    value: float

    def __str__(self):
        return f"{self.name}={self.value:.4f}"


def _as_array(x):
    return x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=float)


def sisdr(reference, estimate):
    """Scale-invariant SDR in dB, clipped to +/-100 dB.

    The estimate is projected onto the reference; the residual is the
    distortion. No mean removal and no alignment are applied.
    """
    r = _as_array(reference)
    e = _as_array(estimate)
    if r.shape != e.shape:
        raise ValueError(f"length mismatch: {r.shape} vs {e.shape}")
    ref_energy = np.dot(r, r)
    if ref_energy == 0:
        raise ValueError("reference signal is all zeros")
    target = (np.dot(e, r) / ref_energy) * r
    distortion = e - target
    num = np.dot(target, target)
    den = np.dot(distortion, distortion)
    if num == 0:
        value = -DB_CAP
    elif den == 0:
        value = DB_CAP
    else:
        value = float(np.clip(10.0 * np.log10(num / den), -DB_CAP, DB_CAP))
    return MetricScore("sisdr", value)


def spectral_log_error(reference, estimate, cfg):
    """Mean squared log-magnitude ratio ``|ln((1+|E|)/(1+|R|))|^2`` over STFT bins."""
    r = _as_array(reference)
    e = _as_array(estimate)
    if r.shape != e.shape:
        raise ValueError(f"length mismatch: {r.shape} vs {e.shape}")
    R = np.abs(stft(r, cfg).data)
    E = np.abs(stft(e, cfg).data)
    return MetricScore("slog", float(np.mean((np.log1p(E) - np.log1p(R)) ** 2)))


def align_to_reference(reference, estimate, max_lag=None):
    """Shift ``estimate`` by the lag maximising its cross-correlation with ``reference``.

    Returns an array of the reference's length (zero-filled where shifted out).
    """
    r = _as_array(reference)
    e = _as_array(estimate)
    xc = correlate(e, r, mode="full", method="fft")
    lags = np.arange(-len(r) + 1, len(e))
    if max_lag is not None:
        keep = np.abs(lags) <= max_lag
        xc, lags = xc[keep], lags[keep]
    lag = int(lags[np.argmax(np.abs(xc))])
    out = np.zeros(len(r))
    src = e[max(lag, 0):]
    dst0 = max(-lag, 0)
    n = min(len(src), len(r) - dst0)
    if n > 0:
        out[dst0:dst0 + n] = src[:n]
    return out
