import csv
import shutil
import subprocess

import numpy as np
import pytest
from scipy.io import wavfile

from hybridverb.cli import main
from hybridverb.ctf import load_ctf
from hybridverb.stft import Waveform, speech_shaped_noise
from hybridverb.wavio import read_wav, write_wav


@pytest.fixture
def dry(tmp_path):
    path = tmp_path / "dry.wav"
    write_wav(path, speech_shaped_noise(8000, 16000.0, seed=0))
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_synth_rir(tmp_path):
    out = tmp_path / "h.wav"
    assert run("synth-rir", "--rt60", 0.3, "--seed", 1, "-o", out) == 0
    h = read_wav(out).samples
    assert h[0] == 1.0 and len(h) == 6000 and not np.any(h[1:641])
    again = tmp_path / "h2.wav"
    run("synth-rir", "--rt60", 0.3, "--seed", 1, "-o", again)
    assert out.read_bytes() == again.read_bytes()


def test_synth_rir_usage_errors(tmp_path, capsys):
    out = tmp_path / "h.wav"
    assert run("synth-rir", "--rt60", 0.3, "--seed", 1, "--volume", 50, "-o", out) == 2
    assert run("synth-rir", "--rt60", -1, "--seed", 1, "-o", out) == 2
    assert run("synth-rir", "--rt60", 0.3, "-o", out) == 2
    assert "error" in capsys.readouterr().err


def test_simulate_room(tmp_path):
    out = tmp_path / "room.wav"
    code = run("simulate-room", "--dims", "6x7x3", "--src", "2,3,1.5", "--mic", "3.2,3.9,1.4",
               "--rt60", 0.4, "-o", out)
    assert code == 0
    h = read_wav(out).samples
    assert h[0] == 1.0 and int(np.argmax(np.abs(h))) == 0
    raw = tmp_path / "raw.wav"
    run("simulate-room", "--dims", "6x7x3", "--src", "2,3,1.5", "--mic", "3.2,3.9,1.4",
        "--rt60", 0.4, "--raw", "--max-order", 0, "-o", raw)
    assert np.count_nonzero(read_wav(raw).samples) == 1
    assert run("simulate-room", "--dims", "6x7x3", "--src", "9,3,1.5", "--mic", "3,3,1",
               "--rt60", 0.4, "-o", out) == 2


def test_reverberate_time_vs_ctf_domains(tmp_path, dry):
    rir = tmp_path / "h.wav"
    run("synth-rir", "--rt60", 0.2, "--seed", 2, "--mixing-time-ms", 5, "-o", rir)
    t_out, c_out, dump = tmp_path / "t.wav", tmp_path / "c.wav", tmp_path / "h.ctf"
    assert run("reverberate", "--dry", dry, "--rir", rir, "-o", t_out) == 0
    assert run("reverberate", "--dry", dry, "--rir", rir, "--domain", "ctf",
               "--crossbands", 511, "--dump-ctf", dump, "-o", c_out) == 0
    a, b = read_wav(t_out).samples, read_wav(c_out).samples
    assert len(a) == len(b)
    # float32 files: the comparison is limited by the storage precision
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 10 ** (-80 / 20)
    H = load_ctf(dump)
    assert H.data.shape[0] == 512 and len(H.offsets) == 512


def test_dereverb_writes_output_and_trace(tmp_path, dry):
    rir = tmp_path / "h.wav"
    wet = tmp_path / "wet.wav"
    run("synth-rir", "--rt60", 0.3, "--seed", 3, "-o", rir)
    run("reverberate", "--dry", dry, "--rir", rir, "-o", wet)
    est, trace = tmp_path / "est.wav", tmp_path / "trace.csv"
    assert run("dereverb", "--wet", wet, "--rt60", 0.3, "--seed", 3, "--iters", 5,
               "-o", est, "--trace", trace) == 0
    assert len(read_wav(est)) == len(read_wav(wet))
    rows = list(csv.reader(trace.open()))
    assert rows[0] == ["iter", "total", "data", "log"] and len(rows) == 7
    est2 = tmp_path / "est2.wav"
    assert run("dereverb", "--wet", wet, "--oracle-rir", rir, "--iters", 5, "-o", est2) == 0
    assert run("dereverb", "--wet", wet, "-o", est2) == 2


def test_eval_prints_metrics(tmp_path, dry, capsys):
    assert run("eval", "--ref", dry, "--est", dry) == 0
    out = capsys.readouterr().out.split()
    assert out == ["sisdr=100.000000", "slog=0.000000"]
    assert run("eval", "--ref", dry, "--est", dry, "--metric", "sisdr", "--align") == 0
    assert capsys.readouterr().out.strip() == "sisdr=100.000000"


def test_gen_dataset_and_gradcheck(tmp_path, capsys):
    assert run("gen-dataset", "--rooms", 1, "--rirs", 2, "-o", tmp_path / "d", "--seed", 4) == 0
    assert (tmp_path / "d" / "manifest.jsonl").exists()
    capsys.readouterr()
    assert run("gradcheck", "--seed", 0) == 0
    err = float(capsys.readouterr().out.strip().split("=")[1])
    assert err < 1e-5


def test_io_errors(tmp_path, capsys):
    stereo = tmp_path / "st.wav"
    wavfile.write(stereo, 16000, np.zeros((10, 2), dtype=np.float32))
    assert run("eval", "--ref", stereo, "--est", stereo) == 4
    assert "mono required" in capsys.readouterr().err
    assert run("eval", "--ref", tmp_path / "none.wav", "--est", stereo) == 4


def test_sample_rate_flag_is_checked(tmp_path, dry):
    assert run("eval", "--ref", dry, "--est", dry, "--sr", 8000) == 2


def test_config_file_precedence(tmp_path, dry):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[synth-rir]\nrt60 = 0.25\nseed = 9\nlen = 5000\n')
    out = tmp_path / "h.wav"
    assert run("synth-rir", "--config", cfg, "-o", out) == 0
    assert len(read_wav(out)) == 5000
    assert run("synth-rir", "--config", cfg, "--len", 4500, "-o", out) == 0
    assert len(read_wav(out)) == 4500
    cfg.write_text('[synth-rir]\nbogus = 1\n')
    assert run("synth-rir", "--config", cfg, "--rt60", 0.3, "--seed", 1, "-o", out) == 2
    cfg.write_text('not toml =')
    assert run("synth-rir", "--config", cfg, "-o", out) == 2


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    import hybridverb.cli as cli
    from hybridverb.exceptions import NumericalError

    def boom(*_):
        raise NumericalError("loss diverged at iteration 2", iteration=2)

    monkeypatch.setattr(cli, "dereverb", boom)
    wet = tmp_path / "w.wav"
    write_wav(wet, Waveform(np.ones(100) * 0.1, 16000.0))
    assert run("dereverb", "--wet", wet, "--rt60", 0.3, "-o", tmp_path / "e.wav") == 3


@pytest.mark.skipif(shutil.which("hybridverb") is None, reason="console script not installed")
def test_console_script():
    done = subprocess.run(["hybridverb", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.strip()
