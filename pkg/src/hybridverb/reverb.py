"""
Room acoustics: decay constants, mixing time, Polack-style RIR synthesis,
RIR alignment, convolution and a frequency-independent shoebox image-source
simulator.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.signal import fftconvolve

from .exceptions import ConfigurationError
from .stft import Waveform

SPEED_OF_SOUND = 343.0
DEFAULT_SIGMA = 0.02
DEFAULT_MIXING_TIME = 0.020
SABINE_CONSTANT = 0.1611
CALIBRATION_PASSES = 6


def default_rir_len(rt60, sample_rate):
    """``ceil(1.25 * RT60 * fs)``: a 60 dB decay plus 25 % margin."""
    return int(math.ceil(1.25 * rt60 * sample_rate))


def rng_for(seed):
    """Portable seeded generator (PCG64); identical streams on every platform."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class Rir:
    samples: np.ndarray
    sample_rate: float
    aligned: bool = False

    def __post_init__(self):
        h = np.asarray(self.samples, dtype=float)
        if h.ndim != 1 or h.size < 1:
            raise ValueError("RIR must be a non-empty 1-D array")
        if not np.all(np.isfinite(h)):
            raise ValueError("RIR contains non-finite samples")
        if self.aligned and h[0] != 1.0:
            raise ValueError("aligned RIR must start with a unit direct path")
        object.__setattr__(self, "samples", h)

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class PolackParams:
    """Weak acoustic description of a room.

    The mixing time comes from ``mixing_time_override`` when given, else
    from ``(volume, surface_area)``, else it falls back to 20 ms.
    """

    rt60: float
    sigma: float = DEFAULT_SIGMA
    volume: Optional[float] = None
    surface_area: Optional[float] = None
    mixing_time_override: Optional[float] = None
    sample_rate: float = 16000.0
    rir_len: Optional[int] = None
    seed: int = 0
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        if not self.rt60 > 0:
            raise ConfigurationError("rt60 must be positive")
        if not self.sigma > 0:
            raise ConfigurationError("sigma must be positive")
        if (self.volume is None) != (self.surface_area is None):
            raise ConfigurationError(
                "volume and surface_area must be given together")
        if self.volume is not None and not (
                self.volume > 0 and self.surface_area > 0):
            raise ConfigurationError("volume and surface_area must be positive")
        if self.mixing_time_override is not None and self.mixing_time_override < 0:
            raise ConfigurationError("mixing time must be non-negative")
        if self.sample_rate <= 0:
            raise ConfigurationError("sample_rate must be positive")
        if self.rir_len is not None and self.rir_len < 1:
            raise ConfigurationError("rir_len must be at least 1")

    @property
    def tau(self):
        return tau(self.rt60, self.sample_rate)

    @property
    def mixing_samples(self):
        """Mixing time ``n_m`` in (fractional) samples."""
        if self.mixing_time_override is not None:
            return self.mixing_time_override * self.sample_rate
        if self.volume is not None:
            return mixing_time(self.volume, self.surface_area,
                               self.sample_rate, self.speed_of_sound)
        return DEFAULT_MIXING_TIME * self.sample_rate

    @property
    def n_taps(self):
        if self.rir_len is not None:
            return int(self.rir_len)
        return default_rir_len(self.rt60, self.sample_rate)


@dataclass(frozen=True)
class RoomSpec:
    dimensions: Tuple[float, float, float]
    source_pos: Tuple[float, float, float]
    mic_pos: Tuple[float, float, float]
    target_rt60: float
    max_order: Optional[int] = None
    speed_of_sound: float = SPEED_OF_SOUND
    sample_rate: float = 16000.0

    def __post_init__(self):
        dims = np.asarray(self.dimensions, float)
        if dims.shape != (3,) or np.any(dims <= 0):
            raise ConfigurationError("room dimensions must be three positive lengths")
        for name in ("source_pos", "mic_pos"):
            p = np.asarray(getattr(self, name), float)
            if p.shape != (3,) or np.any(p <= 0) or np.any(p >= dims):
                raise ConfigurationError(f"{name} {tuple(p)} is not strictly inside the room")
        if not self.target_rt60 > 0:
            raise ConfigurationError("target_rt60 must be positive")
        if self.max_order is not None and self.max_order < 0:
            raise ConfigurationError("max_order must be non-negative")

    @property
    def volume(self):
        lx, ly, lz = self.dimensions
        return lx * ly * lz

    @property
    def surface_area(self):
        lx, ly, lz = self.dimensions
        return 2.0 * (lx * ly + lx * lz + ly * lz)

    @property
    def distance(self):
        return float(np.linalg.norm(np.subtract(self.source_pos, self.mic_pos)))

    @property
    def absorption(self):
        """Sabine absorption coefficient reaching ``target_rt60``, clipped into (0, 1)."""
        alpha = SABINE_CONSTANT * self.volume / (self.surface_area * self.target_rt60)
        return float(np.clip(alpha, 1e-6, 1.0 - 1e-6))

    @property
    def reflection_coefficient(self):
        return math.sqrt(1.0 - self.absorption)

    @property
    def order(self):
        if self.max_order is not None:
            return int(self.max_order)
        return int(math.ceil(self.speed_of_sound * self.target_rt60 / min(self.dimensions)))


def tau(rt60, sample_rate):
    """Decay constant in samples, ``RT60 * fs / (3 ln 10)``."""
    if not rt60 > 0:
        raise ConfigurationError("rt60 must be positive")
    return rt60 * sample_rate / (3.0 * math.log(10.0))


def mixing_time(volume, surface_area, sample_rate, c=SPEED_OF_SOUND):
    """Mean free path ``4 V / A`` expressed in samples."""
    if not (volume > 0 and surface_area > 0 and sample_rate > 0 and c > 0):
        raise ConfigurationError("volume, area, sample rate and c must be positive")
    return 4.0 * volume * sample_rate / (c * surface_area)


def synth_polack_rir(p):
    """Unit direct path, silence up to ``2 n_m``, then a rectified decaying noise tail.

    ``h(n) = |b(n)| exp(-3 ln10 n / (RT60 fs))`` for ``n > 2 n_m`` with
    ``b(n) ~ N(0, sigma^2)`` drawn from the generator seeded by ``p.seed``.
    """
    n_taps = p.n_taps
    boundary = 2 * int(math.floor(p.mixing_samples + 0.5))
    if n_taps <= boundary + 1:
        raise ConfigurationError(
            f"rir_len {n_taps} leaves no tail beyond 2*n_m = {boundary}")
    b = rng_for(p.seed).normal(0.0, p.sigma, n_taps)
    n = np.arange(n_taps)
    h = np.abs(b) * np.exp(-3.0 * math.log(10.0) * n / (p.rt60 * p.sample_rate))
    h[:boundary + 1] = 0.0
    h[0] = 1.0
    return Rir(h, p.sample_rate, aligned=True)


def align_normalize_rir(h):
    """Drop samples before the peak and scale so the peak is exactly 1."""
    x = h.samples
    peak = int(np.argmax(np.abs(x)))
    if x[peak] == 0.0:
        raise ValueError("cannot align an all-zero RIR")
    out = x[peak:] / x[peak]
    out[0] = 1.0
    return Rir(out, h.sample_rate, aligned=True)


def _axis_images(length, src, mic, max_dist):
    """Per-axis image offsets relative to the mic and reflection counts.

    Image coordinate is ``2 k length + (+/-) src``; the reflection count on
    this axis is ``|2k|`` for ``+src`` and ``|2k - 1|`` for ``-src``.
    """
    kmax = int(math.ceil(max_dist / (2.0 * length))) + 1
    k = np.arange(-kmax, kmax + 1)
    pos = np.concatenate([2 * k * length + src, 2 * k * length - src])
    order = np.concatenate([np.abs(2 * k), np.abs(2 * k - 1)])
    delta = pos - mic
    keep = np.abs(delta) <= max_dist
    return delta[keep], order[keep]


def _image_source_rir(room, rir_len, beta):
    fs, c = room.sample_rate, room.speed_of_sound
    max_order = room.order
    max_dist = (rir_len - 0.5) * c / fs
    axes = [_axis_images(L, s, m, max_dist)
            for L, s, m in zip(room.dimensions, room.source_pos, room.mic_pos)]
    (dx, ox), (dy, oy), (dz, oz) = axes

    h = np.zeros(rir_len)
    dyz2 = dy[:, None] ** 2 + dz[None, :] ** 2
    oyz = oy[:, None] + oz[None, :]
    log_beta = math.log(beta)
    for x_off, x_ord in zip(dx, ox):
        dist = np.sqrt(x_off ** 2 + dyz2)
        order = x_ord + oyz
        ok = (order <= max_order) & (dist <= max_dist)
        if not ok.any():
            continue
        d = dist[ok]
        idx = np.floor(d * fs / c + 0.5).astype(int)
        amp = np.exp(order[ok] * log_beta) / d
        h += np.bincount(idx, weights=amp, minlength=rir_len)[:rir_len]
    return h


def simulate_shoebox_rir(room, rir_len, calibrate=True):
    """Image-source RIR for a shoebox room with uniform, frequency-flat walls.

    Each image contributes ``beta^order / distance`` at sample
    ``round(distance * fs / c)``. The wall absorption starts from Sabine's
    formula; with ``calibrate`` it is then corrected (a few deterministic
    passes) until the Schroeder T20 of the simulated response hits
    ``room.target_rt60``. Shoebox image sources decay slower than Sabine
    predicts because grazing paths meet few walls, so the uncorrected
    response overshoots the target by up to ~50 %.

    The result keeps the propagation delay and is not normalised; pass it
    through :func:`align_normalize_rir`.
    """
    if rir_len < 1:
        raise ConfigurationError("rir_len must be positive")
    alpha = room.absorption
    h = _image_source_rir(room, rir_len, math.sqrt(1.0 - alpha))
    if calibrate and room.order > 0:
        for _ in range(CALIBRATION_PASSES):
            try:
                measured = estimate_rt60(h, room.sample_rate)
            except ValueError:
                break
            ratio = measured / room.target_rt60
            if abs(ratio - 1.0) < 0.01:
                break
            # log energy decay per reflection is -ln(1 - alpha)
            alpha = float(np.clip(1.0 - (1.0 - alpha) ** ratio, 1e-6, 1.0 - 1e-6))
            h = _image_source_rir(room, rir_len, math.sqrt(1.0 - alpha))
    return Rir(h, room.sample_rate, aligned=False)


def schroeder_curve(h):
    """Energy decay curve in dB, normalised to 0 dB at the first sample."""
    energy = np.cumsum(np.asarray(h, float)[::-1] ** 2)[::-1]
    if energy[0] <= 0:
        raise ValueError("RIR has no energy")
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy / energy[0])


def estimate_rt60(h, sample_rate, fit_range=(-5.0, -25.0)):
    """RT60 from a least-squares line through the Schroeder curve (T20 by default)."""
    edc = schroeder_curve(h)
    hi, lo = fit_range
    start = int(np.argmax(edc <= hi))
    stop = int(np.argmax(edc <= lo))
    if edc[-1] > lo or stop - start < 2:
        raise ValueError("decay range not reached inside the RIR")
    t = np.arange(start, stop) / sample_rate
    slope = np.polyfit(t, edc[start:stop], 1)[0]
    if slope >= 0:
        raise ValueError("energy decay curve is not decreasing")
    return -60.0 / slope


def reverberate(s, h):
    """Full linear convolution ``y = s * h`` (length ``len(s) + len(h) - 1``)."""
    if s.sample_rate != h.sample_rate:
        raise ValueError(
            f"sample rate mismatch: signal {s.sample_rate} Hz, RIR {h.sample_rate} Hz")
    return Waveform(fftconvolve(s.samples, h.samples), s.sample_rate)
