"""Dereverberation supervised by a parametric reverberation model."""

__version__ = "0.1.0"

from .ctf import (CrossWindowTable, CtfTensor, cross_window_table, ctf_adjoint,
                  ctf_convolve, ctf_from_rir, full_ctf_convolve, load_ctf,
                  save_ctf)
from .exceptions import ConfigurationError, NumericalError
from .loss import (LossReport, LossWeights, loss_and_gradient, loss_gradient,
                   reverb_match_loss)
from .metrics import MetricScore, sisdr, spectral_log_error
from .reverb import (PolackParams, Rir, RoomSpec, align_normalize_rir,
                     estimate_rt60, mixing_time, reverberate,
                     simulate_shoebox_rir, synth_polack_rir, tau)
from .solver import DereverbResult, SolverConfig, dereverb, dereverb_oracle
from .stft import (Spectrogram, StftConfig, Waveform, istft, make_stft_config,
                   speech_shaped_noise, stft)
from .wavio import read_wav, write_wav
