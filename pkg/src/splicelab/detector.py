"""
Training-free splice detector: average the dB spectrogram over a quiet band
of bins and score each track by the dynamic range of that average.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dsp import (AudioBuffer, DEFAULT_FLOOR_DB, Spectrogram, make_window,
                  stft_db)
from .errors import EmptySpectrogramError, InvalidArgument, TooShortError


@dataclass(frozen=True)
class BandSelection:
    mode: str  # lowest_n | highest_n | explicit
    n: int = 0
    bins: tuple = ()

    def __post_init__(self):
        if self.mode in ("lowest_n", "highest_n"):
            if self.n < 1:
                raise InvalidArgument("band needs n >= 1")
        elif self.mode == "explicit":
            if not self.bins:
                raise InvalidArgument("explicit band is empty")
            if min(self.bins) < 0:
                raise InvalidArgument("bin indices must be non-negative")
        else:
            raise InvalidArgument(f"unknown band mode {self.mode!r}")

    @classmethod
    def lowest(cls, n):
        return cls("lowest_n", n=n)

    @classmethod
    def highest(cls, n):
        return cls("highest_n", n=n)

    @classmethod
    def explicit(cls, bins):
        return cls("explicit", bins=tuple(sorted({int(b) for b in bins})))

    def resolve(self, num_bins: int) -> np.ndarray:
        if self.mode == "explicit":
            idx = np.array(self.bins, dtype=int)
        elif self.mode == "lowest_n":
            idx = np.arange(self.n)
        else:
            idx = np.arange(num_bins - self.n, num_bins)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= num_bins:
            raise InvalidArgument(f"band {self} does not fit a spectrogram with {num_bins} bins")
        return idx

    def describe(self) -> str:
        if self.mode == "explicit":
            return "bins:" + ",".join(map(str, self.bins))
        return f"{self.mode.split('_')[0]}:{self.n}"


@dataclass(frozen=True)
class DetectorConfig:
    win_len: int = 4096
    hop: int = 1024
    window: str = "hann_periodic"
    band: BandSelection = field(default_factory=lambda: BandSelection.lowest(16))
    floor_db: float = DEFAULT_FLOOR_DB
    trim: int = 0  # frames dropped at each end before max - min

    def __post_init__(self):
        if self.hop < 1 or self.win_len < 2:
            raise InvalidArgument("invalid window/hop")
        if self.trim < 0:
            raise InvalidArgument("trim must be >= 0")

    def as_dict(self) -> dict:
        return {"win_len": self.win_len, "hop": self.hop, "window": self.window,
                "band": self.band.describe(), "floor_db": self.floor_db, "trim": self.trim}


PRESETS = {
    "partialspoof": DetectorConfig(4096, 1024, "hann_periodic", BandSelection.lowest(16)),
    "had": DetectorConfig(2048, 512, "hann_periodic", BandSelection.highest(5)),
}


def preset(name: str, **overrides) -> DetectorConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise InvalidArgument(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(cfg, **overrides) if overrides else cfg


@dataclass(frozen=True)
class DetectionScore:
    track_id: str
    d: float
    v: np.ndarray = field(repr=False)

    @property
    def frames(self) -> int:
        return int(self.v.shape[0])

    @property
    def peak_frame(self) -> int:
        """Frame with the largest band average (diagnostic only)."""
        return int(np.argmax(self.v))


def band_average(spec: Spectrogram, band: BandSelection) -> np.ndarray:
    idx = band.resolve(spec.num_bins)
    return spec.values_db[idx].mean(axis=0)


def dynamic_range(v) -> float:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise InvalidArgument("dynamic range of an empty sequence")
    return float(v.max() - v.min())


def score_track(x: AudioBuffer, cfg: DetectorConfig = PRESETS["partialspoof"],
                track_id: str = "") -> DetectionScore:
    """Larger ``d`` means the track is more likely spliced."""
    try:
        spec = stft_db(x, make_window(cfg.window, cfg.win_len), cfg.hop, cfg.floor_db)
    except EmptySpectrogramError as exc:
        raise TooShortError(f"track {track_id or '?'} too short: {exc}") from None
    v = band_average(spec, cfg.band)
    used = v[cfg.trim:len(v) - cfg.trim] if cfg.trim else v
    if used.size == 0:
        raise TooShortError(f"track {track_id or '?'} has no frames left after trimming")
    return DetectionScore(track_id, dynamic_range(used), v)
