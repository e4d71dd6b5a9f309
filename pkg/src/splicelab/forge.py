"""
Spliced-corpus generation and artifact mitigation.

A spliced track is built from one real and one fake host: both are cut
inside their longest interior pause, the first segment keeps the host from
its start to the end of that pause, the second from the pause start to the
end, and the two are joined with a Hann crossfade. Optional post-processing
adds low-band noise at a target SNR and/or high-pass filters the result.
"""

from __future__ import annotations

import json
import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corpus_io import (PCM16, WavFormat, list_wavs, read_wav, track_id,
                        write_manifest, write_wav)
from .dsp import AudioBuffer, apply_filter, design_butterworth, make_window
from .errors import (CorpusExhaustedError, InvalidArgument, NoSilenceError,
                     TooShortError, UndefinedSnrError)

log = logging.getLogger(__name__)

OLA_WINDOWS = (256, 512, 1024, 2048, 4096)
SNR_LEVELS = (60.0, 50.0, 46.0, 40.0)
NOISE_ORDER, NOISE_CUTOFF_HZ = 7, 80.0
HIGHPASS_ORDER, HIGHPASS_CUTOFF_HZ = 8, 100.0
_PAIRING_STREAM = 0x5EED


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 64-bit child seed of ``seed``."""
    ss = np.random.SeedSequence([int(seed) & (2 ** 64 - 1), *map(int, path)])
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# silence search


@dataclass(frozen=True)
class VadConfig:
    """Energy VAD: a frame is silent when its RMS is ``threshold_db`` below
    the RMS of the whole track. ``None`` lengths mean 20 ms frames, 10 ms hop."""

    frame_len: int | None = None
    hop: int | None = None
    threshold_db: float = -40.0
    min_region_ms: float = 60.0

    def resolve(self, sample_rate: int) -> tuple[int, int]:
        frame = self.frame_len or int(round(0.020 * sample_rate))
        hop = self.hop or int(round(0.010 * sample_rate))
        if not frame >= hop >= 1:
            raise InvalidArgument(f"need frame_len >= hop >= 1, got {frame}, {hop}")
        if self.min_region_ms <= 0:
            raise InvalidArgument("min_region_ms must be positive")
        return frame, hop


@dataclass(frozen=True)
class SilentRegion:
    start: int
    end: int  # exclusive

    def __len__(self):
        return self.end - self.start


def _frame_rms(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    n = (len(x) - frame) // hop + 1
    csum = np.concatenate([[0.0], np.cumsum(x * x)])
    starts = np.arange(n) * hop
    energy = np.maximum(csum[starts + frame] - csum[starts], 0.0)
    return np.sqrt(energy / frame)


def find_longest_silence(x: AudioBuffer, cfg: VadConfig = VadConfig()) -> SilentRegion:
    """Longest interior run of silent frames; leading/trailing runs are ignored."""
    frame, hop = cfg.resolve(x.sample_rate)
    if len(x) <= frame:
        raise TooShortError(f"track of {len(x)} samples is not longer than a VAD frame")
    rms = _frame_rms(x.samples, frame, hop)
    ref = x.rms()
    if ref == 0.0:
        silent = np.ones(rms.shape, dtype=bool)
    else:
        silent = rms < ref * 10.0 ** (cfg.threshold_db / 20.0)
    edges = np.diff(np.concatenate([[0], silent.astype(np.int8), [0]]))
    starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)  # stops exclusive
    best = None
    for a, b in zip(starts, stops):
        if a == 0 or b == len(silent):
            continue
        region = SilentRegion(int(a * hop), int(min((b - 1) * hop + frame, len(x))))
        if best is None or len(region) > len(best):
            best = region
    min_len = cfg.min_region_ms * x.sample_rate / 1000.0
    if best is None or len(best) < min_len:
        raise NoSilenceError(
            f"no interior silence of at least {cfg.min_region_ms:g} ms"
            + (f" (longest {1000 * len(best) / x.sample_rate:.1f} ms)" if best else ""))
    return best


# ---------------------------------------------------------------------------
# splicing


@dataclass(frozen=True)
class SpliceRecord:
    source_a: str  # "<track id>:<role>" of the first segment
    source_b: str
    splice_sample: int | None
    ola_window: int | None
    rng_seed: int
    label: str = "spliced"
    noise_snr_db: float | None = None
    highpass_applied: bool = False
    peak_warning: str = ""

    def to_row(self, path: str) -> dict:
        return {
            "path": path,
            "label": self.label,
            "splice_sample": self.splice_sample,
            "source_a": self.source_a,
            "source_b": self.source_b,
            "ola_window": self.ola_window,
            "noise_snr_db": None if self.noise_snr_db is None else f"{self.noise_snr_db:g}",
            "highpass": int(self.highpass_applied),
            "seed": self.rng_seed,
            "peak_warning": self.peak_warning,
        }


def crossfade(seg1: np.ndarray, seg2: np.ndarray, ola_window: int) -> tuple[np.ndarray, int]:
    """Overlap-add ``seg1`` and ``seg2`` over ``ola_window // 2`` samples.

    The tail of ``seg1`` gets the falling half of a periodic Hann window of
    length ``ola_window``, the head of ``seg2`` the rising half; the two
    halves sum to one. Returns the joined signal and the overlap centre.
    """
    if int(ola_window) != ola_window or ola_window < 2 or ola_window % 2:
        raise InvalidArgument(f"ola_window must be an even integer >= 2, got {ola_window}")
    m = ola_window // 2
    if len(seg1) < m or len(seg2) < m:
        raise TooShortError(
            f"segments of {len(seg1)} and {len(seg2)} samples cannot host a {m}-sample crossfade")
    w = make_window("hann_periodic", ola_window).values
    rise, fall = w[:m], w[m:]
    out = np.empty(len(seg1) + len(seg2) - m)
    head = len(seg1) - m
    out[:head] = seg1[:head]
    out[head:len(seg1)] = seg1[head:] * fall + seg2[:m] * rise
    out[len(seg1):] = seg2[m:]
    return out, head + m // 2


def forge_splice(host_a: AudioBuffer, host_b: AudioBuffer, ola_window: int,
                 cfg: VadConfig = VadConfig(), seed: int = 0,
                 ids: tuple[str, str] = ("a", "b"),
                 roles: tuple[str, str] = ("real", "fake")) -> tuple[AudioBuffer, SpliceRecord]:
    """Join two hosts at their longest pauses; a seeded coin picks which host leads."""
    if host_a.sample_rate != host_b.sample_rate:
        raise InvalidArgument("hosts have different sample rates")
    reg_a = find_longest_silence(host_a, cfg)
    reg_b = find_longest_silence(host_b, cfg)
    rng = np.random.default_rng(seed)
    hosts = [(host_a, reg_a, f"{ids[0]}:{roles[0]}"), (host_b, reg_b, f"{ids[1]}:{roles[1]}")]
    if rng.integers(2):
        hosts.reverse()
    (first, r1, name1), (second, r2, name2) = hosts
    seg1 = first.samples[:r1.end]
    seg2 = second.samples[r2.start:]
    y, centre = crossfade(seg1, seg2, ola_window)
    rec = SpliceRecord(name1, name2, int(centre), int(ola_window), int(seed),
                       peak_warning=_peak_warning(y))
    return AudioBuffer(y, host_a.sample_rate), rec


def _peak_warning(y: np.ndarray) -> str:
    peak = float(np.max(np.abs(y))) if y.size else 0.0
    return f"peak={peak:.4f}" if peak > 1.0 else ""


# ---------------------------------------------------------------------------
# mitigation


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float
    seed: int = 0
    order: int = NOISE_ORDER
    cutoff_hz: float = NOISE_CUTOFF_HZ

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise InvalidArgument("snr_db must be finite")


def lowband_noise(n: int, sample_rate: int, spec: NoiseSpec) -> np.ndarray:
    """Seeded unit-variance white noise through the low-pass shaping filter."""
    white = np.random.default_rng(spec.seed).standard_normal(n)
    filt = design_butterworth("lowpass", spec.order, spec.cutoff_hz, sample_rate)
    return apply_filter(filt, AudioBuffer(white, sample_rate)).samples


def inject_lowband_noise(x: AudioBuffer, spec: NoiseSpec) -> AudioBuffer:
    """Add low-pass noise scaled so that signal power over shaped-noise power is ``snr_db``."""
    p_sig = float(np.mean(x.samples ** 2)) if len(x) else 0.0
    if p_sig == 0.0:
        raise UndefinedSnrError("SNR is undefined for a silent track")
    noise = lowband_noise(len(x), x.sample_rate, spec)
    p_noise = float(np.mean(noise ** 2))
    if p_noise == 0.0:
        raise UndefinedSnrError("shaped noise has zero power")
    gain = np.sqrt(p_sig / (p_noise * 10.0 ** (spec.snr_db / 10.0)))
    return x.with_samples(x.samples + gain * noise)


def highpass_mitigate(x: AudioBuffer, order: int = HIGHPASS_ORDER,
                      cutoff_hz: float = HIGHPASS_CUTOFF_HZ) -> AudioBuffer:
    return apply_filter(design_butterworth("highpass", order, cutoff_hz, x.sample_rate), x)


# ---------------------------------------------------------------------------
# corpus generation


@dataclass(frozen=True)
class ForgeSettings:
    ola_window: int = 256
    noise_snr_db: float | None = None
    highpass: bool = False

    def __post_init__(self):
        if self.ola_window < 2 or self.ola_window % 2:
            raise InvalidArgument("ola_window must be even and >= 2")

    @property
    def name(self) -> str:
        parts = [f"ola{self.ola_window}"]
        if self.noise_snr_db is not None:
            parts.append(f"snr{self.noise_snr_db:g}")
        if self.highpass:
            parts.append("highpass")
        if len(parts) == 1:
            parts.append("clean")
        return "_".join(parts)

    @property
    def processed(self) -> bool:
        return self.noise_snr_db is not None or self.highpass


def mitigation_grid(windows=OLA_WINDOWS, snrs=SNR_LEVELS) -> list[ForgeSettings]:
    """Every OLA window crossed with clean, each noise level and high-pass."""
    out = []
    for w in windows:
        out.append(ForgeSettings(w))
        out.extend(ForgeSettings(w, noise_snr_db=s) for s in snrs)
        out.append(ForgeSettings(w, highpass=True))
    return out


def postprocess(x: AudioBuffer, settings: ForgeSettings, track_seed: int) -> AudioBuffer:
    if settings.noise_snr_db is not None:
        x = inject_lowband_noise(x, NoiseSpec(settings.noise_snr_db, derive_seed(track_seed, 1)))
    if settings.highpass:
        x = highpass_mitigate(x)
    return x


@dataclass
class CorpusPlan:
    """Which sources feed which output, fixed by the seed alone."""

    pairs: list  # (real Path, fake Path)
    bona_fide: list  # Path
    track_seeds: list


def _usable(path: Path, cfg: VadConfig, min_seg: int) -> bool:
    try:
        x = read_wav(path)
        r = find_longest_silence(x, cfg)
    except (NoSilenceError, TooShortError):
        return False
    return r.end >= min_seg and len(x) - r.start >= min_seg


def plan_corpus(real: list[Path], fake: list[Path], count: int, bona_fide: int, seed: int,
                cfg: VadConfig, max_ola: int) -> CorpusPlan:
    rng = np.random.default_rng(derive_seed(seed, _PAIRING_STREAM))
    real_order = [real[i] for i in rng.permutation(len(real))]
    fake_order = [fake[i] for i in rng.permutation(len(fake))]
    min_seg = max_ola // 2
    good_real, rest_real = [], []
    for p in real_order:
        if len(good_real) < count and _usable(p, cfg, min_seg):
            good_real.append(p)
        else:
            rest_real.append(p)
    good_fake = []
    for p in fake_order:
        if len(good_fake) == count:
            break
        if _usable(p, cfg, min_seg):
            good_fake.append(p)
    short = max(count - len(good_real), 0) + max(count - len(good_fake), 0) \
        + max(bona_fide - len(rest_real), 0)
    if short:
        raise CorpusExhaustedError(
            f"need {count} usable real and {count} usable fake sources plus {bona_fide} "
            f"further real tracks; found {len(good_real)} real, {len(good_fake)} fake, "
            f"{len(rest_real)} spare real (short by {short})", short)
    seeds = [derive_seed(seed, i) for i in range(count)]
    return CorpusPlan(list(zip(good_real, good_fake)), rest_real[:bona_fide], seeds)


def _forge_one(i, real_path, fake_path, track_seed, settings, cfg, out_dir, fmt):
    real, fake = read_wav(real_path), read_wav(fake_path)
    ids = (track_id(real_path), track_id(fake_path))
    rows = {}
    base = {}
    for s in settings:
        if s.ola_window not in base:
            base[s.ola_window] = forge_splice(real, fake, s.ola_window, cfg, track_seed, ids)
        y, rec = base[s.ola_window]
        y = postprocess(y, s, track_seed)
        name = f"spliced_{i:05d}.wav"
        write_wav(out_dir / s.name / name, y, fmt)
        rec = SpliceRecord(rec.source_a, rec.source_b, rec.splice_sample, rec.ola_window,
                           rec.rng_seed, noise_snr_db=s.noise_snr_db,
                           highpass_applied=s.highpass, peak_warning=_peak_warning(y.samples))
        rows[s.name] = rec.to_row(name)
    return rows


def _bona_one(path, settings, out_dir, fmt, process, seed):
    tid = track_id(path)
    rows = {}
    shared = out_dir / "bona_fide" / f"{tid}.wav"
    for s in settings:
        if process and s.processed:
            x = postprocess(read_wav(path), s, seed)
            write_wav(out_dir / s.name / f"{tid}.wav", x, fmt)
            rel, warn = f"{tid}.wav", _peak_warning(x.samples)
            src_seed = seed
        else:
            if not shared.exists():
                shutil.copyfile(path, shared)
            rel, warn, src_seed = f"../bona_fide/{tid}.wav", "", None
        rows[s.name] = {"path": rel, "label": "bona_fide", "source_a": f"{tid}:real",
                        "highpass": int(process and s.highpass),
                        "noise_snr_db": (f"{s.noise_snr_db:g}" if process and s.noise_snr_db
                                         is not None else None),
                        "seed": src_seed, "peak_warning": warn}
    return rows


def generate_corpus(real_dir, fake_dir, out_dir, count: int,
                    settings=(ForgeSettings(),), seed: int = 0,
                    bona_fide: int | None = None, vad: VadConfig = VadConfig(),
                    fmt: WavFormat = WavFormat(PCM16), threads: int = 1,
                    process_bona_fide: bool = False) -> dict[str, Path]:
    """Forge ``count`` spliced tracks per setting plus ``bona_fide`` untouched
    real tracks (default: as many as spliced). Returns manifest path per setting."""
    settings = list(settings)
    if not settings:
        raise InvalidArgument("no settings given")
    names = [s.name for s in settings]
    if len(set(names)) != len(names):
        raise InvalidArgument("duplicate settings")
    if count < 1:
        raise InvalidArgument("count must be >= 1")
    bona_fide = count if bona_fide is None else bona_fide
    out_dir = Path(out_dir)
    real, fake = list_wavs(real_dir), list_wavs(fake_dir)
    plan = plan_corpus(real, fake, count, bona_fide, seed, vad,
                       max(s.ola_window for s in settings))
    for n in names:
        (out_dir / n).mkdir(parents=True, exist_ok=True)
    (out_dir / "bona_fide").mkdir(parents=True, exist_ok=True)

    def spliced_task(i):
        (r, f), s = plan.pairs[i], plan.track_seeds[i]
        return _forge_one(i, r, f, s, settings, vad, out_dir, fmt)

    def bona_task(j):
        return _bona_one(plan.bona_fide[j], settings, out_dir, fmt, process_bona_fide,
                         derive_seed(seed, count + j))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spliced = list(pool.map(spliced_task, range(count)))
            bona = list(pool.map(bona_task, range(len(plan.bona_fide))))
    else:
        spliced = [spliced_task(i) for i in range(count)]
        bona = [bona_task(j) for j in range(len(plan.bona_fide))]

    manifests = {}
    for n in names:
        rows = [r[n] for r in spliced] + [r[n] for r in bona]
        rows.sort(key=lambda r: r["path"])
        manifests[n] = out_dir / n / "manifest.csv"
        write_manifest(manifests[n], rows)
    meta = {
        "seed": int(seed),
        "count": count,
        "bona_fide": len(plan.bona_fide),
        "real_dir": str(Path(real_dir).resolve()),
        "fake_dir": str(Path(fake_dir).resolve()),
        "vad": asdict(vad),
        "format": fmt.encoding,
        "process_bona_fide": process_bona_fide,
        "settings": [asdict(s) | {"name": s.name} for s in settings],
    }
    (out_dir / "corpus.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    log.info("forged %d spliced + %d bona fide tracks for %d settings in %s",
             count, len(plan.bona_fide), len(settings), out_dir)
    return manifests


def regenerate_track(row: dict, corpus_json) -> AudioBuffer:
    """Rebuild one spliced track from its manifest row and the corpus sidecar."""
    meta = json.loads(Path(corpus_json).read_text(encoding="utf-8"))
    if row["label"] != "spliced":
        raise InvalidArgument("only spliced rows can be regenerated")
    dirs = {"real": Path(meta["real_dir"]), "fake": Path(meta["fake_dir"])}
    srcs = {}
    for key in ("source_a", "source_b"):
        tid, role = row[key].rsplit(":", 1)
        srcs[role] = (tid, read_wav(dirs[role] / f"{tid}.wav"))
    vad = VadConfig(**meta["vad"])
    seed = int(row["seed"])
    y, _ = forge_splice(srcs["real"][1], srcs["fake"][1], int(row["ola_window"]), vad, seed,
                        (srcs["real"][0], srcs["fake"][0]))
    snr = row.get("noise_snr_db")
    s = ForgeSettings(int(row["ola_window"]), None if snr is None else float(snr),
                      bool(int(row["highpass"])))
    y = postprocess(y, s, seed)
    fmt = WavFormat(meta["format"])
    if fmt.encoding == PCM16:
        y = y.with_samples(np.clip(np.rint(y.samples * 32768.0), -32768, 32767) / 32768.0)
    else:
        y = y.with_samples(y.samples.astype(np.float32).astype(np.float64))
    return y

