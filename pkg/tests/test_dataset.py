import json

import numpy as np
import pytest

from hybridverb.dataset import (DIM_RANGES, DISTANCE_RANGE, RT60_RANGE,
                                WALL_CLEARANCE, gen_dataset, place_pair,
                                sample_records)
from hybridverb.exceptions import ConfigurationError
from hybridverb.wavio import read_wav


def check_record(rec):
    for value, (lo, hi) in zip(rec.dimensions, DIM_RANGES):
        assert lo <= value <= hi
    assert RT60_RANGE[0] <= rec.rt60 <= RT60_RANGE[1]
    assert DISTANCE_RANGE[0] - 1e-9 <= rec.src_mic_distance <= DISTANCE_RANGE[1] + 1e-9
    for pos in (rec.source_pos, rec.mic_pos):
        assert np.all(np.asarray(pos) >= WALL_CLEARANCE - 1e-12)
        assert np.all(np.asarray(rec.dimensions) - pos >= WALL_CLEARANCE - 1e-12)


def test_sampled_records_respect_ranges():
    records = sample_records(50, 300, seed=3)
    assert [r.room_index for r in records[:4]] == [0, 1, 2, 3]
    for rec in records:
        check_record(rec)
    # rooms are shared between records with the same room index
    assert records[0].dimensions == records[50].dimensions


def test_sampling_is_deterministic():
    assert sample_records(5, 20, seed=1) == sample_records(5, 20, seed=1)
    assert sample_records(5, 20, seed=1) != sample_records(5, 20, seed=2)


def test_placement_failure_is_reported():
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigurationError):
        place_pair(rng, (1.2, 1.2, 1.2), 2.0, tries=20)
    with pytest.raises(ConfigurationError):
        sample_records(0, 3, seed=0)


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    a = gen_dataset(2, 4, root / "a", seed=7)
    b = gen_dataset(2, 4, root / "b", seed=7)
    return a, b


def test_regeneration_is_byte_identical(small_corpus):
    a, b = small_corpus
    assert a.read_bytes() == b.read_bytes()
    for line in a.read_text().splitlines():
        entry = json.loads(line)
        for key in ("dry_path", "wet_path", "rir_path"):
            assert (a.parent / entry[key]).read_bytes() == (b.parent / entry[key]).read_bytes()


def test_manifest_entries(small_corpus):
    manifest, _ = small_corpus
    lines = manifest.read_text().splitlines()
    assert len(lines) == 4
    for i, line in enumerate(lines):
        e = json.loads(line)
        assert e["index"] == i
        assert RT60_RANGE[0] <= e["rt60"] <= RT60_RANGE[1]
        assert e["volume"] == pytest.approx(np.prod(e["dimensions"]))
        rir = read_wav(manifest.parent / e["rir_path"]).samples
        assert rir[0] == 1.0 and int(np.argmax(np.abs(rir))) == 0
        dry = read_wav(manifest.parent / e["dry_path"]).samples
        wet = read_wav(manifest.parent / e["wet_path"]).samples
        assert len(wet) == len(dry)
        expected = np.convolve(dry, rir)[:len(dry)]
        assert np.max(np.abs(wet - expected)) < 1e-5 * np.max(np.abs(expected))
        assert np.isfinite(e["sigma"]) and e["sigma"] > 0


def test_user_dry_files(tmp_path):
    from hybridverb.stft import Waveform
    from hybridverb.wavio import write_wav
    dry_dir = tmp_path / "dry_in"
    dry_dir.mkdir()
    write_wav(dry_dir / "x.wav", Waveform(np.random.default_rng(0).standard_normal(4000) * 0.1, 16000.0))
    manifest = gen_dataset(1, 2, tmp_path / "out", seed=1, dry_dir=dry_dir)
    for line in manifest.read_text().splitlines():
        assert json.loads(line)["dry_path"].endswith("x.wav")
    with pytest.raises(FileNotFoundError):
        gen_dataset(1, 1, tmp_path / "out2", seed=1, dry_dir=tmp_path / "empty_missing")


def test_workers_do_not_change_output(tmp_path):
    a = gen_dataset(2, 3, tmp_path / "serial", seed=5)
    b = gen_dataset(2, 3, tmp_path / "pool", seed=5, workers=2)
    assert a.read_bytes() == b.read_bytes()
