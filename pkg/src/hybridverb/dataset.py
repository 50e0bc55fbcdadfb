"""
Simulated dry/wet/RIR corpus with a JSON-lines manifest.

Rooms: dimensions uniform in [5, 10] x [5, 10] x [2.5, 4] m, RT60 uniform in
[0.2, 1.0] s. Per RIR: source-microphone distance uniform in [0.75, 2.5] m,
both at least 0.5 m from every wall. RIRs are aligned on the direct path and
normalised to a unit peak before convolution.
"""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError
from .reverb import (RoomSpec, align_normalize_rir, default_rir_len,
                     mixing_time, reverberate, simulate_shoebox_rir, tau)
from .stft import Waveform, speech_shaped_noise
from .wavio import read_wav, write_wav

DIM_RANGES = ((5.0, 10.0), (5.0, 10.0), (2.5, 4.0))
RT60_RANGE = (0.2, 1.0)
DISTANCE_RANGE = (0.75, 2.5)
WALL_CLEARANCE = 0.5
MAX_PLACEMENT_TRIES = 1000
SYNTHETIC_DRY_SECONDS = 3.0


@dataclass(frozen=True)
class RecordParams:
    index: int
    room_index: int
    dimensions: tuple
    rt60: float
    source_pos: tuple
    mic_pos: tuple
    src_mic_distance: float
    seed: int


def _rng(*key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def sample_room(rng):
    dims = tuple(float(rng.uniform(lo, hi)) for lo, hi in DIM_RANGES)
    rt60 = float(rng.uniform(*RT60_RANGE))
    return dims, rt60


def place_pair(rng, dims, distance, tries=MAX_PLACEMENT_TRIES):
    """Microphone uniform in the clearance box, source at ``distance`` in a random direction."""
    lo = np.full(3, WALL_CLEARANCE)
    hi = np.asarray(dims) - WALL_CLEARANCE
    for _ in range(tries):
        mic = rng.uniform(lo, hi)
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        src = mic + distance * u
        if np.all(src >= lo) and np.all(src <= hi):
            return tuple(map(float, src)), tuple(map(float, mic))
    raise ConfigurationError(
        f"could not place source/mic {distance:.2f} m apart in room {dims} "
        f"after {tries} attempts")


def sample_records(n_rooms, n_rirs, seed):
    """Draw room and placement parameters; record ``i`` lives in room ``i % n_rooms``."""
    if n_rooms < 1 or n_rirs < 1:
        raise ConfigurationError("need at least one room and one RIR")
    rooms = [sample_room(_rng(seed, 0, r)) for r in range(n_rooms)]
    records = []
    for i in range(n_rirs):
        r = i % n_rooms
        dims, rt60 = rooms[r]
        rng = _rng(seed, 1, i)
        distance = float(rng.uniform(*DISTANCE_RANGE))
        src, mic = place_pair(rng, dims, distance)
        records.append(RecordParams(
            i, r, dims, rt60, src, mic,
            float(np.linalg.norm(np.subtract(src, mic))),
            int(rng.integers(0, 2 ** 31 - 1))))
    return records


def estimate_sigma(h, rt60, sample_rate, n_mix):
    """Polack noise level of an aligned RIR: RMS of the tail with the decay removed."""
    n = np.arange(len(h))
    tail = n > 2 * int(math.floor(n_mix + 0.5))
    if not tail.any():
        return float("nan")
    t = tau(rt60, sample_rate)
    return float(np.sqrt(np.mean(h[tail] ** 2 * np.exp(2.0 * n[tail] / t))))


def simulate_record(rec, sample_rate=16000.0):
    room = RoomSpec(rec.dimensions, rec.source_pos, rec.mic_pos, rec.rt60,
                    sample_rate=sample_rate)
    raw = simulate_shoebox_rir(room, default_rir_len(rec.rt60, sample_rate))
    return room, align_normalize_rir(raw)


def _list_dry(dry_dir):
    if dry_dir is None:
        return []
    files = sorted(Path(dry_dir).glob("*.wav"))
    if not files:
        raise FileNotFoundError(f"no .wav files in {dry_dir}")
    return files


def _make_record(args):
    rec, out_dir, dry_files, sample_rate = args
    out_dir = Path(out_dir)
    room, rir = simulate_record(rec, sample_rate)
    stem = f"{rec.index:06d}"
    if dry_files:
        dry_src = dry_files[_rng(rec.seed, 2).integers(len(dry_files))]
        dry = read_wav(dry_src)
        if dry.sample_rate != sample_rate:
            raise ValueError(
                f"{dry_src}: {dry.sample_rate} Hz, dataset uses {sample_rate} Hz")
        dry_path = str(dry_src)
    else:
        dry = speech_shaped_noise(int(SYNTHETIC_DRY_SECONDS * sample_rate),
                                  sample_rate, seed=rec.seed)
        dry_path = f"dry/{stem}.wav"
        write_wav(out_dir / dry_path, dry)
    wet = reverberate(dry, rir).samples[:len(dry)]
    rir_path = f"rir/{stem}.wav"
    wet_path = f"wet/{stem}.wav"
    write_wav(out_dir / rir_path, Waveform(rir.samples, sample_rate))
    write_wav(out_dir / wet_path, Waveform(wet, sample_rate))
    n_mix = mixing_time(room.volume, room.surface_area, sample_rate)
    entry = {
        "dry_path": dry_path,
        "wet_path": wet_path,
        "rir_path": rir_path,
        "rt60": rec.rt60,
        "sigma": estimate_sigma(rir.samples, rec.rt60, sample_rate, n_mix),
        "volume": room.volume,
        "area": room.surface_area,
        "src_mic_distance": rec.src_mic_distance,
        "seed": rec.seed,
    }
    entry.update(asdict(rec))
    return json.dumps(entry)


def gen_dataset(n_rooms, n_rirs, out_dir, seed, dry_dir=None,
                sample_rate=16000.0, workers=1):
    """Simulate ``n_rirs`` records and write ``manifest.jsonl``; returns its path.

    Manifest lines follow record index order regardless of ``workers``.
    """
    out_dir = Path(out_dir)
    for sub in ("dry", "wet", "rir"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    records = sample_records(n_rooms, n_rirs, seed)
    dry_files = _list_dry(dry_dir)
    jobs = [(rec, str(out_dir), dry_files, sample_rate) for rec in records]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            lines = list(pool.map(_make_record, jobs))
    else:
        lines = [_make_record(job) for job in jobs]
    manifest = out_dir / "manifest.jsonl"
    tmp = manifest.with_suffix(".jsonl.tmp")
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, manifest)
    return manifest
