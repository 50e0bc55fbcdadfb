import time

import numpy as np
import pytest

from hybridverb.metrics import sisdr
from hybridverb.reverb import (PolackParams, RoomSpec, align_normalize_rir,
                               default_rir_len, reverberate, simulate_shoebox_rir)
from hybridverb.solver import SolverConfig, dereverb, dereverb_oracle
from hybridverb.stft import make_stft_config, speech_shaped_noise

FS = 16000.0
E2E_ROOM = RoomSpec((6.0, 7.0, 3.0), (2.0, 3.0, 1.5), (3.2, 3.9, 1.4), 0.5)


class EndToEnd:
    """Oracle and weakly supervised solves on one shoebox example, run once per session."""

    def __init__(self):
        self.cfg = make_stft_config(512, 256, FS)
        self.dry = speech_shaped_noise(int(3 * FS), FS, seed=0)
        self.rir = align_normalize_rir(
            simulate_shoebox_rir(E2E_ROOM, default_rir_len(0.5, FS)))
        self.wet = reverberate(self.dry, self.rir)
        self.wet_trim = type(self.wet)(self.wet.samples[:len(self.dry)], FS)
        self.wet_sisdr = sisdr(self.dry, self.wet_trim).value
        self.params = PolackParams(0.5, mixing_time_override=0.02, seed=0)
        self.sc = SolverConfig(max_iters=500)
        self._cache = {}

    def _timed(self, key, fn):
        if key not in self._cache:
            t0 = time.perf_counter()
            res = fn()
            self._cache[key] = (res, time.perf_counter() - t0)
        return self._cache[key]

    def oracle(self):
        return self._timed("oracle", lambda: dereverb_oracle(
            self.wet_trim, self.rir, self.cfg, self.sc))

    def weak(self):
        return self._timed("weak", lambda: dereverb(
            self.wet_trim, self.params, self.cfg, self.sc))

    def gain(self, result):
        return sisdr(self.dry, result.dry_estimate).value - self.wet_sisdr


@pytest.fixture(scope="session")
def end_to_end():
    return EndToEnd()


def smoothed(trace, window=10):
    return np.convolve(trace, np.ones(window) / window, mode="valid")


ACCEPTANCE_LINES = []


class CriterionRecorder:
    """Stores one summary line per acceptance criterion, written even when it fails."""

    def __init__(self, label):
        self.label = label
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {self.label}: {self.detail}")
        return False


@pytest.fixture
def criterion():
    return CriterionRecorder


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: s.split("criterion ")[1]):
            terminalreporter.write_line(line)
