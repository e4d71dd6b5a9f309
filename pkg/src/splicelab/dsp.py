"""
Numerical substrate: audio buffers, windows, DFT/STFT in dB and
Butterworth IIR filters realised as second-order sections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from .errors import EmptySpectrogramError, InvalidArgument

DEFAULT_FLOOR_DB = -300.0
WINDOW_KINDS = ("rectangular", "hann_periodic", "hann_symmetric")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AudioBuffer:
    """Mono discrete-time signal.

    Samples are float64, nominally in [-1, 1]. Zero-length buffers are
    allowed so that empty WAV files can be represented; every analysis
    operation rejects them on its own terms.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise InvalidArgument(f"samples must be 1-D, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise InvalidArgument("samples must be finite")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise InvalidArgument(f"sample_rate must be a positive integer, got {self.sample_rate}")
        object.__setattr__(self, "samples", _frozen(s))
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def rms(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.samples ** 2)))

    def with_samples(self, samples) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate)


@dataclass(frozen=True)
class WindowFunction:
    kind: str
    values: np.ndarray = field(repr=False)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.length


def make_window(kind: str, length: int) -> WindowFunction:
    """Build a rectangular or Hann window.

    ``hann_periodic`` uses ``0.5 * (1 - cos(2*pi*n/L))`` and sums to one at
    hop L/2; ``hann_symmetric`` uses the ``L - 1`` denominator.
    """
    if kind not in WINDOW_KINDS:
        raise InvalidArgument(f"unknown window kind {kind!r}; expected one of {WINDOW_KINDS}")
    if int(length) != length or length < 2:
        raise InvalidArgument(f"window length must be an integer >= 2, got {length}")
    length = int(length)
    n = np.arange(length)
    if kind == "rectangular":
        w = np.ones(length)
    elif kind == "hann_periodic":
        w = 0.5 * (1.0 - np.cos(2.0 * np.pi * n / length))
    else:
        w = 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (length - 1)))
    return WindowFunction(kind, _frozen(w))


def dft_magnitude(frame: Sequence[float]) -> np.ndarray:
    """One-sided magnitude spectrum, ``len(frame)//2 + 1`` bins."""
    x = np.asarray(frame, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise InvalidArgument("frame must be 1-D with at least 2 samples")
    return np.abs(np.fft.rfft(x))


@dataclass(frozen=True)
class Spectrogram:
    """dB magnitudes indexed ``values_db[bin, frame]``."""

    values_db: np.ndarray
    sample_rate: int
    hop: int
    win_len: int
    floor_db: float = DEFAULT_FLOOR_DB

    def __post_init__(self):
        v = np.asarray(self.values_db, dtype=np.float64)
        if v.ndim != 2:
            raise InvalidArgument("values_db must be 2-D [bin, frame]")
        if v.shape[0] != self.win_len // 2 + 1:
            raise InvalidArgument(
                f"expected {self.win_len // 2 + 1} bins for window {self.win_len}, got {v.shape[0]}")
        object.__setattr__(self, "values_db", _frozen(v))

    @property
    def num_bins(self) -> int:
        return self.values_db.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values_db.shape[1]

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.win_len

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.num_bins) * self.bin_hz

    def frame_times(self) -> np.ndarray:
        """Start time of each frame in seconds."""
        return np.arange(self.num_frames) * self.hop / self.sample_rate

    def frame_span(self, m: int) -> tuple[int, int]:
        return m * self.hop, m * self.hop + self.win_len


def frame_count(n_samples: int, win_len: int, hop: int) -> int:
    if n_samples < win_len:
        return 0
    return (n_samples - win_len) // hop + 1


def amplitude_db(mag, floor_db: float = DEFAULT_FLOOR_DB) -> np.ndarray:
    mag = np.asarray(mag, dtype=np.float64)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag)
    return np.maximum(db, floor_db)


def stft_db(x: AudioBuffer, window: WindowFunction, hop: int,
            floor_db: float = DEFAULT_FLOOR_DB) -> Spectrogram:
    """Magnitude STFT in amplitude dB, no padding; a trailing partial frame is dropped."""
    if int(hop) != hop or hop < 1:
        raise InvalidArgument(f"hop must be a positive integer, got {hop}")
    if not math.isfinite(floor_db):
        raise InvalidArgument("floor_db must be finite")
    hop = int(hop)
    L = window.length
    if len(x) < L:
        raise EmptySpectrogramError(f"signal of {len(x)} samples is shorter than window of {L}")
    frames = sliding_window_view(x.samples, L)[::hop]
    mag = np.abs(np.fft.rfft(frames * window.values, axis=1)).T
    return Spectrogram(amplitude_db(mag, floor_db), x.sample_rate, hop, L, float(floor_db))


# ---------------------------------------------------------------------------
# IIR filters


@dataclass(frozen=True)
class IirFilter:
    """Butterworth cascade; ``sos`` rows are ``(b0, b1, b2, 1, a1, a2)``."""

    kind: str
    order: int
    cutoff_hz: float
    sample_rate: int
    sos: np.ndarray = field(repr=False)

    def sections(self) -> list[tuple[float, float, float, float, float]]:
        return [(r[0], r[1], r[2], r[4], r[5]) for r in self.sos]

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots(r[3:]) for r in self.sos])

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response at the given frequencies."""
        f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
        z = np.exp(-2j * np.pi * f / self.sample_rate)
        h = np.ones_like(z)
        for b0, b1, b2, _, a1, a2 in self.sos:
            h *= (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)
        return h

    def gain_db(self, freqs_hz) -> np.ndarray:
        return 20.0 * np.log10(np.abs(self.response(freqs_hz)))


def _bilinear_section(poles, zero, fs2):
    """Digital section from one real analog pole or a conjugate pair.

    Analog poles are mapped with z = (2fs + s) / (2fs - s); all zeros sit at
    ``zero`` (-1 for lowpass, +1 for highpass).
    """
    zp = [(fs2 + p) / (fs2 - p) for p in poles]
    if len(zp) == 1:
        a = [1.0, -zp[0].real, 0.0]
        b = [1.0, -zero, 0.0]
    else:
        p = zp[0]
        a = [1.0, -2.0 * p.real, abs(p) ** 2]
        b = [1.0, -2.0 * zero, 1.0]
    return np.array(b), np.array(a)


def design_butterworth(kind: str, order: int, cutoff_hz: float, sample_rate: int) -> IirFilter:
    """Butterworth lowpass/highpass by bilinear transform with a prewarped cutoff.

    Each section is normalised to unit gain at DC (lowpass) or Nyquist
    (highpass), so the cascade has exactly unit passband gain there.
    """
    if kind not in ("lowpass", "highpass"):
        raise InvalidArgument(f"kind must be 'lowpass' or 'highpass', got {kind!r}")
    if int(order) != order or order < 1:
        raise InvalidArgument(f"order must be a positive integer, got {order}")
    if sample_rate <= 0:
        raise InvalidArgument("sample_rate must be positive")
    if not 0.0 < cutoff_hz < sample_rate / 2.0:
        raise InvalidArgument(f"cutoff {cutoff_hz} Hz must lie in (0, {sample_rate / 2.0}) Hz")
    order = int(order)
    fs2 = 2.0 * sample_rate
    wc = fs2 * math.tan(math.pi * cutoff_hz / sample_rate)

    # prototype poles in the upper half plane; the real pole (odd order) last
    proto = [np.exp(1j * np.pi * (2 * k + order + 1) / (2 * order)) for k in range(order // 2)]
    groups = [[p, np.conj(p)] for p in proto]
    if order % 2:
        groups.append([complex(-1.0, 0.0)])

    if kind == "lowpass":
        zero, z_eval = -1.0, 1.0
        groups = [[wc * p for p in g] for g in groups]
    else:
        zero, z_eval = 1.0, -1.0
        groups = [[wc / p for p in g] for g in groups]

    rows = []
    for g in groups:
        b, a = _bilinear_section(g, zero, fs2)
        k = np.polyval(a[::-1], 1.0 / z_eval) / np.polyval(b[::-1], 1.0 / z_eval)
        rows.append(np.concatenate([b * k, a]))
    sos = _frozen(np.vstack(rows))
    return IirFilter(kind, order, float(cutoff_hz), int(sample_rate), sos)


def apply_filter(filt: IirFilter, x: AudioBuffer) -> AudioBuffer:
    """Causal single pass with zero initial state."""
    if x.sample_rate != filt.sample_rate:
        raise InvalidArgument(
            f"filter designed for {filt.sample_rate} Hz applied to {x.sample_rate} Hz signal")
    if len(x) == 0:
        return x
    return x.with_samples(sps.sosfilt(np.array(filt.sos), np.array(x.samples)))
