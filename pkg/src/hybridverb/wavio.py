"""Mono WAV input/output (PCM16 or IEEE float32) on top of scipy.io.wavfile."""

import warnings

import numpy as np
from scipy.io import wavfile

from .stft import Waveform

FORMATS = ("float32", "pcm16")


class WavError(IOError):
    """Unreadable, unsupported or non-mono WAV file."""


def read_wav(path):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, OSError) as exc:
        raise WavError(f"{path}: malformed or unsupported WAV file ({exc})") from exc
    if data.ndim != 1:
        raise WavError(f"{path}: mono required, file has {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise WavError(
            f"{path}: unsupported sample format {data.dtype} (PCM16 or float32 only)")
    return Waveform(samples, float(rate))


def write_wav(path, w, fmt="float32"):
    """Write ``w`` as mono WAV. PCM16 clips to [-1, 1) and rounds to the nearest step."""
    rate = int(round(w.sample_rate))
    if rate != w.sample_rate:
        raise WavError(f"WAV needs an integer sample rate, got {w.sample_rate}")
    if fmt == "float32":
        data = w.samples.astype(np.float32)
    elif fmt == "pcm16":
        data = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}; choose from {FORMATS}")
    wavfile.write(path, rate, data)
