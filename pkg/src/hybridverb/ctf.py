"""
Cross-band convolutive transfer functions.

A time-domain convolution ``y = s * h`` is exactly reproduced in the STFT
domain by summing, for every output bin ``f`` and frame ``t``, contributions
from every input bin ``f'`` and earlier frames::

    Y[f, t] = sum_{f', t'} H[f, f', t'] S[f', t - t']
    H[f, f', t'] = sum_m h(t' L - m) W[f, f'](m)
    W[f, f'](m) = 1/F sum_n w_s(n + m) w_a(n) exp(j 2 pi (f' (n + m) - f n) / F)

Because consecutive frames overlap, ``H`` has ``lead = floor((N - 1) / L)``
non-zero anti-causal lags (``t' < 0``); they are kept so that the full-band
sum is exact. Lags ``0 .. T_h - 1`` with ``T_h = ceil((N_h + N - 1) / L)``
cover the causal part.

The banded model keeps only ``f' = f + d`` for ``|d| <= F'``, indices taken
modulo ``F``. When ``2 F' + 1 >= F`` every bin is kept exactly once.
"""

import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.fft import next_fast_len

from .exceptions import ConfigurationError
from .stft import Spectrogram, make_stft_config

# complex elements per FFT work buffer in the banded kernels
_CHUNK_ELEMENTS = 1 << 21

CTF_MAGIC = b"CTF1"


def band_offsets(n_bins, half_width):
    """Distinct band offsets ``d`` kept for a half width ``F'``."""
    if not 0 <= half_width <= n_bins - 1:
        raise ConfigurationError(
            f"half width {half_width} outside [0, {n_bins - 1}]")
    if 2 * half_width + 1 >= n_bins:
        return np.arange(-(n_bins // 2), n_bins - n_bins // 2)
    return np.arange(-half_width, half_width + 1)


def lead_frames(cfg):
    """Number of anti-causal lags of a CTF for this window/hop."""
    return (cfg.window_len - 1) // cfg.hop


@lru_cache(maxsize=8)
def _window_profile(cfg):
    # P[i, k] = 1/F sum_n w_s(n + m_i) w_a(n) exp(+j 2 pi k n / F)
    n_win = cfg.window_len
    lags = np.arange(-n_win + 1, n_win)
    prod = np.zeros((len(lags), cfg.fft_size))
    n = np.arange(n_win)
    for i, m in enumerate(lags):
        k = n + m
        ok = (k >= 0) & (k < n_win)
        prod[i, n[ok]] = cfg.synthesis_window[k[ok]] * cfg.analysis_window[ok]
    profile = np.fft.ifft(prod, axis=1)
    profile.setflags(write=False)
    return profile


@dataclass(frozen=True, eq=False)
class CrossWindowTable:
    """Window cross-terms ``W(f, d, m)`` for band offsets ``d`` and lags ``m``.

    Only the ``f``-independent magnitude profile is stored; ``W`` factors as
    ``exp(j 2 pi (f + d) m / F) * profile[d, m]``.
    """

    config: object
    half_width: int
    offsets: np.ndarray
    profile: np.ndarray

    @property
    def lags(self):
        n = self.config.window_len
        return np.arange(-n + 1, n)

    def phase(self, f, d, m):
        F = self.config.fft_size
        return np.exp(2j * np.pi * (((f + d) % F) * m % F) / F)

    def value(self, f, d, m):
        """Single entry ``W(f, d, m)``; zero for ``|m| >= N``."""
        n = self.config.window_len
        if abs(m) >= n:
            return 0j
        k = int(np.flatnonzero(self.offsets == d)[0])
        return self.phase(f, d, m) * self.profile[k, m + n - 1]

    @cached_property
    def values(self):
        """Dense ``F x D x (2N - 1)`` array (large: ~75 MB for F=512, F'=4)."""
        F = self.config.fft_size
        f = np.arange(F)[:, None, None]
        d = self.offsets[None, :, None]
        m = self.lags[None, None, :]
        phase = np.exp(2j * np.pi * (((f + d) % F) * m % F) / F)
        return phase * self.profile[None, :, :]


@lru_cache(maxsize=16)
def cross_window_table(cfg, half_width):
    offsets = band_offsets(cfg.fft_size, half_width)
    profile = _window_profile(cfg)[:, offsets % cfg.fft_size].T.copy()
    profile.setflags(write=False)
    return CrossWindowTable(cfg, int(half_width), offsets, profile)


@dataclass(frozen=True, eq=False)
class CtfTensor:
    """Banded RIR tensor.

    ``data[f, k, j]`` holds ``H[f, (f + offsets[k]) % F, j - lead]``.
    """

    data: np.ndarray
    half_width: int
    offsets: np.ndarray
    lead: int
    config: object

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[:2] != (
                self.config.fft_size, len(self.offsets)):
            raise ValueError(f"bad CTF tensor shape {self.data.shape}")
        if self.n_frames < 1:
            raise ValueError("CTF tensor needs at least one causal frame")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("CTF tensor contains non-finite entries")

    @property
    def n_lags(self):
        return self.data.shape[2]

    @property
    def n_frames(self):
        """Causal frame count ``T_h``."""
        return self.data.shape[2] - self.lead

    @property
    def lags(self):
        return np.arange(-self.lead, self.n_frames)

    def band_rows(self):
        """``rows[f, k] = (f + offsets[k]) % F``."""
        F = self.config.fft_size
        return (np.arange(F)[:, None] + self.offsets[None, :]) % F

    def lag_matrix(self, j):
        """Dense ``F x F`` slice for stored lag index ``j``."""
        F = self.config.fft_size
        dense = np.zeros((F, F), dtype=complex)
        rows = np.broadcast_to(np.arange(F)[:, None], (F, len(self.offsets)))
        dense[rows, self.band_rows()] = self.data[:, :, j]
        return dense


def _rir_lag_matrix(h, cfg):
    """``out[j, i] = h(t'_j L - m_i)`` over all lags and window offsets."""
    n_win, hop = cfg.window_len, cfg.hop
    lead = lead_frames(cfg)
    t_h = -(-(len(h) + n_win - 1) // hop)
    lags = np.arange(-lead, t_h)
    m = np.arange(-n_win + 1, n_win)
    idx = lags[:, None] * hop - m[None, :]
    ok = (idx >= 0) & (idx < len(h))
    return np.where(ok, h[np.clip(idx, 0, len(h) - 1)], 0.0), lead


def ctf_from_rir(h, cfg, half_width=4):
    """Closed-form banded CTF of an RIR."""
    if h.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"sample rate mismatch: RIR {h.sample_rate} Hz, STFT {cfg.sample_rate} Hz")
    table = cross_window_table(cfg, half_width)
    F, n_win = cfg.fft_size, cfg.window_len
    hm, lead = _rir_lag_matrix(h.samples, cfg)
    n_lags = hm.shape[0]
    n_bands = len(table.offsets)
    out = np.empty((F, n_bands, n_lags), dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // (n_lags * 2 * n_win))
    f = np.arange(F)
    for k0 in range(0, n_bands, chunk):
        prof = table.profile[k0:k0 + chunk]
        g = hm[None, :, :] * prof[:, None, :]
        # fold window lags m in (-N, N) onto DFT bins m mod F
        folded = np.zeros(g.shape[:2] + (F,), dtype=complex)
        folded[..., F - n_win + 1:] += g[..., :n_win - 1]
        folded[..., :n_win] += g[..., n_win - 1:]
        # spectrum[k, j, b] = sum_m g[k, j, m] exp(+j 2 pi b m / F)
        spectrum = np.fft.ifft(folded, axis=2) * F
        for k, d in enumerate(table.offsets[k0:k0 + chunk]):
            out[:, k0 + k, :] = spectrum[k][:, (f + d) % F].T
    return CtfTensor(out, int(half_width), table.offsets, lead, cfg)


def _check_pair(spec, H):
    if not spec.config.compatible(H.config):
        raise ConfigurationError("spectrogram and CTF use different STFT configs")


def _band_chunks(H, nfft):
    n_bands = len(H.offsets)
    chunk = max(1, _CHUNK_ELEMENTS // (H.config.fft_size * nfft))
    return [slice(k, min(k + chunk, n_bands)) for k in range(0, n_bands, chunk)]


def output_frames(n_input_frames, H):
    """``T_y = T_s + T_h - 1``."""
    return n_input_frames + H.n_frames - 1


def ctf_convolve(S, H):
    """Banded cross-band convolution ``Y[f, t] = sum_d sum_t' H S``."""
    _check_pair(S, H)
    n_in = S.n_frames
    n_out = output_frames(n_in, H)
    nfft = next_fast_len(n_in + H.n_lags - 1)
    rows = H.band_rows()
    acc = np.zeros((H.config.fft_size, nfft), dtype=complex)
    for band in _band_chunks(H, nfft):
        Hf = np.fft.fft(H.data[:, band, :], nfft, axis=2)
        Sf = np.fft.fft(S.data[rows[:, band]], nfft, axis=2)
        acc += np.einsum("fkn,fkn->fn", Hf, Sf)
    full = np.fft.ifft(acc, axis=1)
    return Spectrogram(full[:, H.lead:H.lead + n_out], S.config)


def ctf_adjoint(Z, H, n_frames):
    """Conjugate transpose of :func:`ctf_convolve` for ``n_frames`` input frames.

    ``Z`` may hold fewer than ``T_s + T_h - 1`` frames; missing frames are
    treated as zero, which makes this also the adjoint of convolve-then-crop.
    """
    _check_pair(Z, H)
    F = H.config.fft_size
    n_out = output_frames(n_frames, H)
    z = Z.data[:, :n_out]
    nfft = next_fast_len(n_frames + H.n_lags - 1)
    zext = np.zeros((F, nfft), dtype=complex)
    zext[:, H.lead:H.lead + z.shape[1]] = z
    Zf = np.fft.fft(zext, axis=1)
    rows = H.band_rows()
    out = np.zeros((F, n_frames), dtype=complex)
    for band in _band_chunks(H, nfft):
        Hf = np.fft.fft(H.data[:, band, :], nfft, axis=2)
        corr = np.fft.ifft(np.conj(Hf) * Zf[:, None, :], axis=2)[:, :, :n_frames]
        for k in range(corr.shape[1]):
            out[rows[:, band][:, k]] += corr[:, k, :]
    return Spectrogram(out, Z.config)


def full_ctf_convolve(S, h, cfg):
    """Reference all-band convolution, one dense ``F x F`` matrix per lag.

    Each lag matrix is computed as a 2-D DFT of the Toeplitz array
    ``w_a(n) w_s(k) h(t' L + n - k)`` rather than through the window table.
    """
    if not S.config.compatible(cfg):
        raise ConfigurationError("spectrogram and config differ")
    if h.sample_rate != cfg.sample_rate:
        raise ValueError("sample rate mismatch between RIR and STFT config")
    n_win, hop = cfg.window_len, cfg.hop
    x = h.samples
    lead = lead_frames(cfg)
    t_h = -(-(len(x) + n_win - 1) // hop)
    n_in = S.n_frames
    n_out = n_in + t_h - 1
    out = np.zeros((cfg.fft_size, n_out), dtype=complex)
    diff = np.arange(n_win)[:, None] - np.arange(n_win)[None, :]
    window_outer = np.outer(cfg.analysis_window, cfg.synthesis_window)
    for lag in range(-lead, t_h):
        idx = lag * hop + diff
        ok = (idx >= 0) & (idx < len(x))
        if not ok.any():
            continue
        M = np.where(ok, x[np.clip(idx, 0, len(x) - 1)], 0.0) * window_outer
        dense = np.fft.fft(np.fft.ifft(M, n=cfg.fft_size, axis=1),
                           n=cfg.fft_size, axis=0)
        src0 = max(0, -lag)
        dst0 = src0 + lag
        count = min(n_in - src0, n_out - dst0)
        if count > 0:
            out[:, dst0:dst0 + count] += dense @ S.data[:, src0:src0 + count]
    return Spectrogram(out, cfg)


def save_ctf(path, H):
    """Binary dump: ``CTF1``, ``<u4`` F, bands, stored lags, N, L, then
    little-endian float64 (re, im) pairs in (f, band, lag) row-major order.

    Stored lag index ``j`` is lag ``j - floor((N - 1) / L)``.
    """
    cfg = H.config
    header = CTF_MAGIC + struct.pack(
        "<5I", cfg.fft_size, len(H.offsets), H.n_lags, cfg.window_len, cfg.hop)
    body = np.ascontiguousarray(H.data, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load_ctf(path, sample_rate=16000.0):
    """Read a tensor written by :func:`save_ctf` (Hann config assumed)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CTF_MAGIC or len(raw) < 24:
        raise ValueError(f"{path}: not a CTF1 file")
    F, n_bands, n_lags, n_win, hop = struct.unpack("<5I", raw[4:24])
    expected = 24 + 16 * F * n_bands * n_lags
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    cfg = make_stft_config(n_win, hop, sample_rate)
    if cfg.fft_size != F:
        raise ValueError(f"{path}: F={F} inconsistent with N={n_win}")
    half_width = F - 1 if n_bands >= F else (n_bands - 1) // 2
    data = np.frombuffer(raw, dtype="<c16", offset=24).reshape(F, n_bands, n_lags)
    return CtfTensor(data.astype(complex), half_width,
                     band_offsets(F, half_width), lead_frames(cfg), cfg)
