"""
Two-sided STFT analysis / synthesis.

Frames use the full ``F = N`` point DFT (no one-sided folding) because the
cross-band model wraps band indices modulo ``F``. Frame ``t`` starts at sample
``t * L - (N - L)``, so the first frame is centred on sample 0 when ``L = N/2``.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import ConfigurationError


def hann(n):
    """Periodic Hann window of length ``n``."""
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


def cola_sum(analysis, synthesis, hop):
    """Return ``sum_k w_s(n - kL) w_a(n - kL)`` over one window period."""
    prod = analysis * synthesis
    total = np.zeros_like(prod)
    for shift in range(0, len(prod), hop):
        total += np.roll(prod, shift)
    return total


@dataclass(frozen=True, eq=False)
class StftConfig:
    window_len: int
    hop: int
    fft_size: int
    analysis_window: np.ndarray = field(repr=False)
    synthesis_window: np.ndarray = field(repr=False)
    sample_rate: float = 16000.0

    @property
    def pad(self):
        """Zeros inserted before the first sample."""
        return self.window_len - self.hop

    @property
    def overlap_frames(self):
        """Number of frames covering any interior sample (``N / L``)."""
        return self.window_len // self.hop

    def n_frames(self, n_samples):
        """Frame count ``ceil((n + N - L) / L)`` for a signal of ``n`` samples."""
        return -(-(n_samples + self.window_len - self.hop) // self.hop)

    def compatible(self, other):
        if self is other:
            return True
        return (
            self.window_len == other.window_len
            and self.hop == other.hop
            and self.fft_size == other.fft_size
            and self.sample_rate == other.sample_rate
            and np.array_equal(self.analysis_window, other.analysis_window)
            and np.array_equal(self.synthesis_window, other.synthesis_window)
        )


@lru_cache(maxsize=32)
def make_stft_config(window_len=512, hop=256, sample_rate=16000.0):
    """Hann analysis window with its canonical (least-squares) dual.

    Parameters
    ----------
    window_len : int
        Window length ``N``; also the DFT size.
    hop : int
        Hop size ``L``; must divide ``window_len``.
    sample_rate : float

    Raises
    ------
    ConfigurationError
        If ``hop`` does not divide ``window_len`` or the window/hop pair
        cannot reach perfect reconstruction.
    """
    window_len = int(window_len)
    hop = int(hop)
    if window_len <= 0 or hop <= 0:
        raise ConfigurationError("window_len and hop must be positive")
    if window_len % hop:
        raise ConfigurationError(
            f"hop {hop} does not divide window length {window_len}")
    if sample_rate <= 0:
        raise ConfigurationError("sample_rate must be positive")

    analysis = hann(window_len)
    energy = cola_sum(analysis, analysis, hop)
    if energy.min() < 1e-8:
        raise ConfigurationError(
            f"no perfect-reconstruction synthesis window for a Hann window "
            f"of {window_len} samples at hop {hop}")
    synthesis = analysis / energy
    analysis.setflags(write=False)
    synthesis.setflags(write=False)
    return StftConfig(window_len, hop, window_len, analysis, synthesis,
                      float(sample_rate))


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValueError("waveform must be one-dimensional (mono)")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    """Complex ``F x T`` STFT coefficients tied to the config that made them."""

    data: np.ndarray
    config: StftConfig

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != self.config.fft_size:
            raise ValueError(
                f"expected {self.config.fft_size} x T data, got {data.shape}")
        if data.shape[1] < 1:
            raise ValueError("spectrogram needs at least one frame")
        if not np.all(np.isfinite(data)):
            raise ValueError("spectrogram contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def n_frames(self):
        return self.data.shape[1]


def _frame_view(padded, cfg, n_frames):
    step = padded.strides[0]
    return np.lib.stride_tricks.as_strided(
        padded, shape=(cfg.window_len, n_frames),
        strides=(step, step * cfg.hop), writeable=False)


def stft(x, cfg):
    """Analyse ``x`` into a ``F x T`` spectrogram.

    ``T = ceil((len(x) + N - L) / L)``; the signal is zero-padded with
    ``N - L`` samples in front and enough zeros behind that every sample is
    covered by ``N / L`` frames.
    """
    samples = x.samples if isinstance(x, Waveform) else np.asarray(x, float)
    if samples.size == 0:
        raise ValueError("cannot analyse an empty signal")
    n_frames = cfg.n_frames(len(samples))
    padded = np.zeros((n_frames - 1) * cfg.hop + cfg.window_len)
    padded[cfg.pad:cfg.pad + len(samples)] = samples
    frames = _frame_view(padded, cfg, n_frames) * cfg.analysis_window[:, None]
    return Spectrogram(np.fft.fft(frames, n=cfg.fft_size, axis=0), cfg)


def istft(spec, out_len):
    """Weighted overlap-add synthesis, trimmed or zero-extended to ``out_len``."""
    out_len = int(out_len)
    if out_len <= 0:
        raise ValueError("out_len must be positive")
    cfg = spec.config
    frames = np.fft.ifft(spec.data, axis=0).real[:cfg.window_len]
    frames = frames * cfg.synthesis_window[:, None]
    n_frames = frames.shape[1]
    total = (n_frames - 1) * cfg.hop + cfg.window_len
    buf = np.zeros(max(total, cfg.pad + out_len))
    # one strided add per overlap phase keeps the loop at N/L iterations
    for phase in range(cfg.overlap_frames):
        seg = frames[phase * cfg.hop:(phase + 1) * cfg.hop, :]
        start = phase * cfg.hop
        buf[start:start + n_frames * cfg.hop] += seg.T.reshape(-1)
    return Waveform(buf[cfg.pad:cfg.pad + out_len].copy(), cfg.sample_rate)


def speech_shaped_noise(n_samples, sample_rate=16000.0, seed=0,
                        modulation_hz=4.0, peak=0.5):
    """Noise with a long-term speech spectrum and a syllabic envelope.

    White Gaussian noise is shaped flat up to 500 Hz, rolled off at
    -9 dB/octave above, and high-passed (12 dB/octave) below 100 Hz. A
    sinusoidal envelope at ``modulation_hz`` (80 % depth) imitates the
    syllable rate; pass ``modulation_hz=0`` for stationary noise.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    spectrum = np.fft.rfft(rng.standard_normal(n_samples))
    freqs = np.fft.rfftfreq(n_samples, 1.0 / sample_rate)
    gain = np.ones_like(freqs)
    high = freqs > 500.0
    gain[high] = (freqs[high] / 500.0) ** (-9.0 / (20.0 * np.log10(2.0)))
    low = freqs < 100.0
    gain[low] = (freqs[low] / 100.0) ** 2
    x = np.fft.irfft(spectrum * gain, n_samples)
    if modulation_hz:
        phase = rng.uniform(0.0, 2.0 * np.pi)
        t = np.arange(n_samples) / sample_rate
        x *= 1.0 + 0.8 * np.sin(2.0 * np.pi * modulation_hz * t + phase)
    x *= peak / np.abs(x).max()
    return Waveform(x, sample_rate)
