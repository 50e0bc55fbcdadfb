"""
Dereverberation by direct optimisation of the dry spectrogram.

The estimate ``S_hat`` is pushed through a cross-band convolutive model
built from an RIR (synthesised from weak acoustic parameters, or the true
one) and compared with the observed wet spectrogram. The dry reference is
never used.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .ctf import ctf_from_rir
from .exceptions import ConfigurationError, NumericalError
from .loss import LossReport, LossWeights, loss_and_gradient
from .reverb import synth_polack_rir
from .stft import Spectrogram, Waveform, istft, stft

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 500
    step_size: float = 0.1
    adaptive: bool = True
    tol: float = 1e-6
    patience: int = 10
    init: str = "wet"
    half_width: int = 4
    weights: LossWeights = field(default_factory=LossWeights)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    resample_rir: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1")
        if not self.step_size > 0:
            raise ConfigurationError("step_size must be positive")
        if self.tol < 0:
            raise ConfigurationError("tol must be non-negative")
        if self.init not in ("wet", "zeros"):
            raise ConfigurationError(f"unknown init {self.init!r}")


@dataclass
class DereverbResult:
    dry_estimate: Waveform
    final_loss: LossReport
    loss_trace: np.ndarray
    iters_run: int
    trace_terms: np.ndarray = field(repr=False, default=None)
    spectrogram: Spectrogram = field(repr=False, default=None)


class ComplexAdam:
    """Adam over complex arrays, moments kept separately for real and imaginary parts."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v_re = None
        self.v_im = None

    def step(self, x, grad):
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v_re = np.zeros(grad.shape)
            self.v_im = np.zeros(grad.shape)
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v_re *= self.beta2
        self.v_re += (1.0 - self.beta2) * grad.real ** 2
        self.v_im *= self.beta2
        self.v_im += (1.0 - self.beta2) * grad.imag ** 2
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        m_hat = self.m / bc1
        step = (m_hat.real / (np.sqrt(self.v_re / bc2) + self.eps)
                + 1j * m_hat.imag / (np.sqrt(self.v_im / bc2) + self.eps))
        return x - self.lr * step


def _run(y, cfg, sc, ctf_for_iteration):
    if len(y) == 0:
        raise ValueError("wet signal is empty")
    if y.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"sample rate mismatch: signal {y.sample_rate} Hz, STFT {cfg.sample_rate} Hz")
    Y = stft(y, cfg)
    S = Y.data.copy() if sc.init == "wet" else np.zeros_like(Y.data)
    # steps are measured in units of the observation's RMS bin magnitude
    lr = sc.step_size * float(np.sqrt(np.mean(np.abs(Y.data) ** 2)))
    opt = ComplexAdam(lr, sc.beta1, sc.beta2, sc.eps) if sc.adaptive else None

    trace = []
    terms = []
    best = (np.inf, None, None)
    H = ctf_for_iteration(0)
    iters = 0
    while True:
        if sc.resample_rir and iters > 0:
            H = ctf_for_iteration(iters)
        report, grad = loss_and_gradient(Spectrogram(S, cfg), Y, H, sc.weights)
        if not np.isfinite(report.total) or not np.all(np.isfinite(grad.data)):
            raise NumericalError(f"loss diverged at iteration {iters}", iteration=iters)
        trace.append(report.total)
        terms.append((report.total, report.data_term, report.log_term))
        # losses against different RIR draws are not comparable, so a
        # resampling run keeps its last iterate and never stops early
        if report.total < best[0] or sc.resample_rir:
            best = (report.total, S, report)
        if iters >= sc.max_iters or report.total == 0.0 or not np.any(grad.data):
            break
        if len(trace) > sc.patience and not sc.resample_rir:
            ref = trace[-sc.patience - 1]
            if ref - trace[-1] <= sc.tol * ref:
                break
        if opt is not None:
            S = opt.step(S, grad.data)
        else:
            # normalised step so both modes move bins by ~lr
            S = S - lr * grad.data / np.sqrt(np.mean(np.abs(grad.data) ** 2))
        iters += 1
        if iters % 50 == 0:
            log.debug("iter %d loss %.6g", iters, report.total)

    _, S_best, report_best = best
    S_spec = Spectrogram(S_best, cfg)
    return DereverbResult(istft(S_spec, len(y)), report_best,
                          np.asarray(trace), iters, np.asarray(terms), S_spec)


def dereverb(y, params, cfg, sc=SolverConfig()):
    """Weakly supervised dereverberation from acoustic parameters only.

    The RIR is synthesised once from ``params`` (seeded); with
    ``sc.resample_rir`` a fresh tail is drawn at every iteration using seed
    ``params.seed + iteration``.
    """
    if params.sample_rate != y.sample_rate:
        params = replace(params, sample_rate=y.sample_rate)

    def ctf_for_iteration(i):
        p = replace(params, seed=params.seed + i) if i else params
        return ctf_from_rir(synth_polack_rir(p), cfg, sc.half_width)

    return _run(y, cfg, sc, ctf_for_iteration)


def dereverb_oracle(y, h, cfg, sc=SolverConfig()):
    """Same loop with the true (aligned) RIR; an upper bound for :func:`dereverb`."""
    x = h.samples
    if x[0] != 1.0 or np.argmax(np.abs(x)) != 0:
        raise ValueError("oracle RIR must be aligned (unit direct path at index 0)")
    H = ctf_from_rir(h, cfg, sc.half_width)
    return _run(y, cfg, replace(sc, resample_rir=False), lambda i: H)
