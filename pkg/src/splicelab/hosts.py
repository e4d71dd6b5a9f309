"""
Synthetic stand-ins for speech corpora.

Each host is a sequence of noise "words" band-limited to the speech range,
separated by pauses, on top of a steady low hum and a high-passed noise
floor. Nothing reaches the band below ~80 Hz except leakage, which mimics
source tracks whose lowest band is nearly silent.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus_io import WavFormat, write_wav
from .dsp import AudioBuffer, apply_filter, design_butterworth
from .forge import derive_seed


@dataclass(frozen=True)
class HostConfig:
    sample_rate: int = 16000
    duration_s: float = 3.0
    word_ms: tuple = (150.0, 400.0)
    gap_ms: tuple = (40.0, 120.0)
    pause_ms: tuple = (300.0, 600.0)  # the one long interior pause
    edge_ms: tuple = (150.0, 300.0)  # leading and trailing silence
    ramp_ms: float = 40.0
    speech_dbfs: tuple = (-26.0, -16.0)
    speech_band_hz: tuple = (300.0, 3400.0)
    hum_hz: tuple = (110.0, 260.0)
    hum_dbfs: tuple = (-52.0, -42.0)
    floor_dbfs: tuple = (-66.0, -58.0)
    floor_highpass_hz: float = 120.0


def _raised_cosine_envelope(n, ramp):
    env = np.ones(n)
    ramp = min(ramp, n // 2)
    if ramp > 0:
        r = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp) / ramp))
        env[:ramp] = r
        env[n - ramp:] = r[::-1]
    return env


def _band_noise(rng, n, fs, lo, hi):
    x = AudioBuffer(rng.standard_normal(n), fs)
    x = apply_filter(design_butterworth("highpass", 8, lo, fs), x)
    x = apply_filter(design_butterworth("lowpass", 4, hi, fs), x)
    return np.array(x.samples)


def synth_host(seed: int, cfg: HostConfig = HostConfig()) -> AudioBuffer:
    rng = np.random.default_rng(seed)
    fs = cfg.sample_rate
    n = int(round(cfg.duration_s * fs))
    ms = lambda lo_hi: int(round(rng.uniform(*lo_hi) * fs / 1000.0))  # noqa: E731

    # word layout: lead, words/gaps, one long pause somewhere in the middle, trail
    lead, trail = ms(cfg.edge_ms), ms(cfg.edge_ms)
    pause = ms(cfg.pause_ms)
    usable = n - lead - trail - pause
    spans = []
    t, budget = 0, usable
    while True:
        w = ms(cfg.word_ms)
        if t + w > budget:
            break
        spans.append((t, w))
        t += w + ms(cfg.gap_ms)
    if len(spans) < 2:
        spans = [(0, budget // 3), (budget // 2, budget // 3)]
    split = int(rng.integers(1, len(spans)))
    speech = np.zeros(n)
    ramp = int(cfg.ramp_ms * fs / 1000.0)
    carrier = _band_noise(rng, n, fs, *cfg.speech_band_hz)
    carrier = carrier / np.sqrt(np.mean(carrier ** 2))
    for k, (s, w) in enumerate(spans):
        start = lead + s + (pause if k >= split else 0)
        stop = min(start + w, n - trail)
        if stop - start < 2 * ramp:
            continue
        level = 10.0 ** (rng.uniform(*cfg.speech_dbfs) / 20.0)
        speech[start:stop] += level * carrier[start:stop] * _raised_cosine_envelope(stop - start, ramp)

    idx = np.arange(n)
    f_hum = rng.uniform(*cfg.hum_hz)
    hum = np.sqrt(2.0) * 10.0 ** (rng.uniform(*cfg.hum_dbfs) / 20.0) \
        * np.sin(2.0 * np.pi * f_hum * idx / fs + rng.uniform(0.0, 2.0 * np.pi))
    floor = rng.standard_normal(n)
    floor = apply_filter(design_butterworth("highpass", 8, cfg.floor_highpass_hz, fs),
                         AudioBuffer(floor, fs)).samples
    floor = floor * 10.0 ** (rng.uniform(*cfg.floor_dbfs) / 20.0) / np.sqrt(np.mean(floor ** 2))
    return AudioBuffer(speech + hum + floor, fs)


def write_host_corpus(out_dir, n_real: int, n_fake: int, seed: int = 0,
                      real_cfg: HostConfig = HostConfig(),
                      fake_cfg: HostConfig | None = None,
                      fmt: WavFormat = WavFormat()) -> tuple[Path, Path]:
    """Write ``real/`` and ``fake/`` directories of synthetic hosts."""
    fake_cfg = fake_cfg or real_cfg
    out_dir = Path(out_dir)
    dirs = out_dir / "real", out_dir / "fake"
    for d in dirs:
        d.mkdir(parents=True, exist_ok=True)
    for i in range(n_real):
        write_wav(dirs[0] / f"real_{i:05d}.wav", synth_host(derive_seed(seed, 0, i), real_cfg), fmt)
    for i in range(n_fake):
        write_wav(dirs[1] / f"fake_{i:05d}.wav", synth_host(derive_seed(seed, 1, i), fake_cfg), fmt)
    return dirs
