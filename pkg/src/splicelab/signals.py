"""
Synthetic sinusoids and spliced concatenations used to demonstrate spectral
leakage and the artifact left at a splicing point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dsp import (AudioBuffer, DEFAULT_FLOOR_DB, Spectrogram, make_window,
                  stft_db)
from .errors import InvalidArgument

SCENARIOS = ("identical", "phase_shift", "amplitude_change")


@dataclass(frozen=True)
class SinusoidSpec:
    f0: float
    amplitude: float = 1.0
    phase: float = 0.0
    duration: int = 1600
    sample_rate: int = 16000

    def __post_init__(self):
        if not 0.0 < self.f0 < self.sample_rate / 2.0:
            raise InvalidArgument(f"f0={self.f0} Hz must lie in (0, {self.sample_rate / 2.0}) Hz")
        if self.amplitude < 0:
            raise InvalidArgument("amplitude must be >= 0")
        if int(self.duration) != self.duration or self.duration < 1:
            raise InvalidArgument("duration must be a positive number of samples")

    @property
    def period(self) -> float:
        """Period in samples."""
        return self.sample_rate / self.f0


@dataclass(frozen=True)
class ConcatSpec:
    first: SinusoidSpec
    second: SinusoidSpec
    scenario: str = "phase_shift"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidArgument(f"scenario must be one of {SCENARIOS}")
        if self.first.sample_rate != self.second.sample_rate:
            raise InvalidArgument("both segments must share a sample rate")


def _cycles(f0: float, n: np.ndarray, fs: int) -> np.ndarray:
    # fractional cycle count per sample, exact when f0 is an integer
    if float(f0).is_integer():
        return ((int(f0) * n) % fs) / fs
    return np.mod(f0 * n / fs, 1.0)


def synth_sinusoid(spec: SinusoidSpec, start: int = 0) -> AudioBuffer:
    """``amplitude * sin(2*pi*f0*n/fs + phase)`` for ``n = start .. start+duration-1``.

    The phase of every sample is computed from its index, so a waveform with
    an integer number of samples per period repeats bit for bit.
    """
    n = np.arange(start, start + int(spec.duration), dtype=np.int64)
    arg = 2.0 * np.pi * _cycles(spec.f0, n, spec.sample_rate) + spec.phase
    return AudioBuffer(spec.amplitude * np.sin(arg), spec.sample_rate)


def splice_concat(x1: AudioBuffer, x2: AudioBuffer) -> tuple[AudioBuffer, int]:
    """Hard concatenation. Returns the buffer and the 0-based index of the
    first sample of ``x2`` (the 1-based splicing point is that plus one)."""
    if x1.sample_rate != x2.sample_rate:
        raise InvalidArgument(f"sample rates differ: {x1.sample_rate} vs {x2.sample_rate}")
    return AudioBuffer(np.concatenate([x1.samples, x2.samples]), x1.sample_rate), len(x1)


def continuation_phase(spec: SinusoidSpec, n1: int) -> float:
    """Phase that makes a second segment continue ``spec`` seamlessly after n1 samples."""
    frac = float(_cycles(spec.f0, np.array([n1]), spec.sample_rate)[0])
    return math.fmod(2.0 * np.pi * frac + spec.phase, 2.0 * np.pi)


def scenario_spec(scenario: str, f0: float = 800.0, sample_rate: int = 16000,
                  n1: int = 1600, n2: int = 1600, amplitude: float = 1.0,
                  phase_shift: float = math.pi, amplitude_ratio: float = 0.5,
                  phase: float = 0.0) -> ConcatSpec:
    """The three two-sinusoid setups: seamless, phase jump, amplitude step."""
    first = SinusoidSpec(f0, amplitude, phase, n1, sample_rate)
    cont = continuation_phase(first, n1)
    if scenario == "identical":
        second = SinusoidSpec(f0, amplitude, cont, n2, sample_rate)
    elif scenario == "phase_shift":
        second = SinusoidSpec(f0, amplitude, cont + phase_shift, n2, sample_rate)
    elif scenario == "amplitude_change":
        second = SinusoidSpec(f0, amplitude * amplitude_ratio, cont, n2, sample_rate)
    else:
        raise InvalidArgument(f"scenario must be one of {SCENARIOS}")
    return ConcatSpec(first, second, scenario)


def render_scenario(scenario: ConcatSpec) -> tuple[AudioBuffer, int]:
    return splice_concat(synth_sinusoid(scenario.first), synth_sinusoid(scenario.second))


def demo_scenario(scenario: ConcatSpec, win_len: int = 80, hop: int = 20,
                  window: str = "hann_periodic",
                  floor_db: float = DEFAULT_FLOOR_DB) -> tuple[AudioBuffer, Spectrogram]:
    x, _ = render_scenario(scenario)
    return x, stft_db(x, make_window(window, win_len), hop, floor_db)


def leakage_demo(f0: float = 800.0, sample_rate: int = 16000, win_len: int = 80,
                 duration: int = 1600, hop: int | None = None,
                 window: str = "rectangular",
                 floor_db: float = DEFAULT_FLOOR_DB) -> tuple[AudioBuffer, Spectrogram]:
    """Single sinusoid analysed with a chosen window length."""
    x = synth_sinusoid(SinusoidSpec(f0, 1.0, 0.0, duration, sample_rate))
    return x, stft_db(x, make_window(window, win_len), hop or win_len, floor_db)


# ---------------------------------------------------------------------------
# leakage measurements


def fundamental_bin(spec: Spectrogram, f0: float) -> int:
    return int(round(f0 / spec.bin_hz))


def out_of_band_db(spec: Spectrogram, center_bin: int, guard: int = 1) -> np.ndarray:
    """Per-frame energy (dB) in all bins farther than ``guard`` from ``center_bin``.

    Computed from the floored dB grid, so frames with no leakage sit at the
    floor plus ``10*log10(number of bins)``.
    """
    mag2 = 10.0 ** (spec.values_db / 10.0)
    keep = np.abs(np.arange(spec.num_bins) - center_bin) > guard
    return 10.0 * np.log10(mag2[keep].sum(axis=0))


def splice_frames(spec: Spectrogram, splice_point: int) -> np.ndarray:
    """Boolean mask of frames containing both sides of the join."""
    starts = np.arange(spec.num_frames) * spec.hop
    return (starts <= splice_point - 1) & (starts + spec.win_len - 1 >= splice_point)


def splice_leakage_excess(spec: Spectrogram, splice_point: int, f0: float,
                          guard: int = 1) -> float:
    """Max out-of-band energy over splice frames minus max over the other frames (dB)."""
    leak = out_of_band_db(spec, fundamental_bin(spec, f0), guard)
    mask = splice_frames(spec, splice_point)
    if not mask.any() or mask.all():
        raise InvalidArgument("need both splice and non-splice frames")
    return float(leak[mask].max() - leak[~mask].max())
