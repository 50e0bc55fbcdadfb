import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridverb.metrics import align_to_reference, sisdr, spectral_log_error
from hybridverb.stft import Waveform, make_stft_config, stft


def orthogonal_pair(seed, n=4000, ratio_db=10.0):
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(n)
    noise = rng.standard_normal(n)
    noise -= noise @ r / (r @ r) * r
    noise *= np.sqrt((r @ r) / (noise @ noise) / 10 ** (ratio_db / 10))
    return r, r + noise


@pytest.mark.parametrize("seed", range(5))
def test_orthogonal_noise_gives_ten_db(seed):
    r, e = orthogonal_pair(seed)
    assert abs(sisdr(r, e).value - 10.0) < 0.01


def test_identity_hits_cap():
    r = np.random.default_rng(0).standard_normal(100)
    assert sisdr(r, r).value == 100.0
    assert sisdr(r, np.zeros(100)).value == -100.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 20),
       alpha=st.one_of(st.floats(1e-3, 1e3), st.floats(-1e3, -1e-3)))
def test_scale_invariance(seed, alpha):
    r, e = orthogonal_pair(seed, 500, ratio_db=3.0)
    assert abs(sisdr(r, alpha * e).value - sisdr(r, e).value) < 1e-12 * 1e3


def test_scale_invariance_exact_to_1e12_db():
    r, e = orthogonal_pair(1)
    base = sisdr(r, e).value
    for alpha in (2.0, 0.5, -1.0, 4.0, 0.25):
        assert abs(sisdr(r, alpha * e).value - base) <= 1e-12


def test_approaches_cap_as_noise_vanishes():
    r, e = orthogonal_pair(2)
    vals = [sisdr(r, r + eps * (e - r)).value for eps in (1e-1, 1e-3, 1e-5)]
    assert vals[0] < vals[1] < vals[2] and vals[2] > 99


def test_errors():
    with pytest.raises(ValueError):
        sisdr(np.zeros(10), np.ones(10))
    with pytest.raises(ValueError):
        sisdr(np.ones(10), np.ones(11))


def test_accepts_waveforms():
    r, e = orthogonal_pair(3)
    assert sisdr(Waveform(r, 16000.0), Waveform(e, 16000.0)).value == pytest.approx(10.0, abs=0.01)


def test_spectral_log_error():
    cfg = make_stft_config(64, 32, 16000.0)
    r = np.random.default_rng(4).standard_normal(1000)
    assert spectral_log_error(r, r, cfg).value == 0.0
    expected = np.mean(np.log1p(np.abs(stft(r, cfg).data)) ** 2)
    assert spectral_log_error(r, np.zeros(1000), cfg).value == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        spectral_log_error(r, r[:-1], cfg)


@pytest.mark.parametrize("lag", [-37, 0, 12, 250])
def test_alignment_recovers_shift(lag):
    r = np.random.default_rng(5).standard_normal(2000)
    e = np.roll(r, lag)
    out = align_to_reference(r, e)
    inner = slice(300, 1700)
    assert np.allclose(out[inner], r[inner])
