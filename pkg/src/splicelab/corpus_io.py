"""
Audio and metadata I/O: strict RIFF/WAVE mono reader and writer, corpus
manifests, segment-label files and spectrogram exports.

Segment-label dialects
----------------------
``native``
    CSV with header ``track_id,start,end,class``; one row per segment,
    ``class`` is ``real`` or ``fake``, times in seconds.
``partialspoof``
    One line per track: ``<track_id> <start>-<end>-<tag> [<start>-<end>-<tag> ...]``
    with ``tag`` in ``bonafide``/``spoof``.
``had``
    One line per track: ``<track_id> <start>-<end>-<T|F>[/<start>-<end>-<T|F>...] <flag>``
    where ``T`` marks genuine and ``F`` fake segments and ``flag`` is the
    track-level label, ``1`` for genuine and ``0`` for partially fake.

Fields may be separated by any whitespace; nothing else is tolerated.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import AudioBuffer, Spectrogram
from .errors import InvalidArgument, LabelValidationError, WavParseError

log = logging.getLogger(__name__)

PCM16 = "pcm16"
FLOAT32 = "float32"

_FORMAT_PCM = 1
_FORMAT_FLOAT = 3
_FORMAT_EXTENSIBLE = 0xFFFE
_GUID_TAIL = b"\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"


@dataclass(frozen=True)
class WavFormat:
    encoding: str = PCM16
    channels: int = 1

    def __post_init__(self):
        if self.encoding not in (PCM16, FLOAT32):
            raise InvalidArgument(f"unsupported encoding {self.encoding!r}")
        if self.channels != 1:
            raise InvalidArgument("only mono WAV is supported")

    @property
    def bits(self) -> int:
        return 16 if self.encoding == PCM16 else 32


def _parse_fmt(body: bytes, path) -> str:
    if len(body) < 16:
        raise WavParseError(f"fmt chunk too short ({len(body)} bytes)", "fmt ", path)
    tag, channels, _rate, byte_rate, align, bits = struct.unpack("<HHIIHH", body[:16])
    if tag == _FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise WavParseError("extensible fmt chunk too short", "fmt ", path)
        sub = body[24:40]
        if sub[2:] != _GUID_TAIL:
            raise WavParseError("unknown extensible sub-format", "fmt ", path)
        tag = struct.unpack("<H", sub[:2])[0]
    if channels != 1:
        raise WavParseError(f"{channels} channels; only mono is supported", "fmt ", path)
    if tag == _FORMAT_PCM and bits == 16:
        enc = PCM16
    elif tag == _FORMAT_FLOAT and bits == 32:
        enc = FLOAT32
    else:
        raise WavParseError(f"unsupported encoding (format tag {tag}, {bits} bits)", "fmt ", path)
    if align != bits // 8 or byte_rate != _rate * align:
        raise WavParseError("inconsistent block align / byte rate", "fmt ", path)
    return enc


def parse_wav_bytes(data: bytes, path=None) -> tuple[AudioBuffer, WavFormat]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavParseError("not a RIFF/WAVE file", "RIFF", path)
    riff_size = struct.unpack("<I", data[4:8])[0]
    if riff_size + 8 != len(data):
        raise WavParseError(
            f"RIFF size {riff_size} disagrees with file length {len(data)}", "RIFF", path)
    pos = 12
    enc = rate = None
    samples = None
    while pos < len(data):
        if pos + 8 > len(data):
            raise WavParseError("truncated chunk header", None, path)
        cid = data[pos:pos + 4].decode("latin-1")
        size = struct.unpack("<I", data[pos + 4:pos + 8])[0]
        body = data[pos + 8:pos + 8 + size]
        if len(body) != size:
            raise WavParseError(f"declares {size} bytes but only {len(body)} remain", cid, path)
        if cid == "fmt ":
            if enc is not None:
                raise WavParseError("duplicate fmt chunk", cid, path)
            enc = _parse_fmt(body, path)
            rate = struct.unpack("<I", body[4:8])[0]
        elif cid == "data":
            if enc is None:
                raise WavParseError("data chunk before fmt chunk", cid, path)
            if samples is not None:
                raise WavParseError("duplicate data chunk", cid, path)
            width = 2 if enc == PCM16 else 4
            if size % width:
                raise WavParseError(f"size {size} is not a multiple of {width}", cid, path)
            if enc == PCM16:
                samples = np.frombuffer(body, dtype="<i2").astype(np.float64) / 32768.0
            else:
                samples = np.frombuffer(body, dtype="<f4").astype(np.float64)
                if not np.all(np.isfinite(samples)):
                    raise WavParseError("non-finite float samples", cid, path)
        pos += 8 + size + (size & 1)
    if pos != len(data):
        raise WavParseError("missing pad byte after odd-sized chunk", None, path)
    if enc is None:
        raise WavParseError("no fmt chunk", "fmt ", path)
    if samples is None:
        raise WavParseError("no data chunk", "data", path)
    if rate == 0:
        raise WavParseError("sample rate is zero", "fmt ", path)
    return AudioBuffer(samples, rate), WavFormat(enc)


def read_wav(path) -> AudioBuffer:
    """Read a mono pcm16 or float32 WAV. pcm16 is scaled by 1/32768."""
    path = Path(path)
    return parse_wav_bytes(path.read_bytes(), path)[0]


def wav_bytes(x: AudioBuffer, fmt: WavFormat = WavFormat()) -> tuple[bytes, int]:
    """Encode ``x``; returns the bytes and the number of clamped samples."""
    s = x.samples
    clipped = 0
    if fmt.encoding == PCM16:
        clipped = int(np.count_nonzero((s < -1.0) | (s > 1.0)))
        q = np.clip(np.rint(s * 32768.0), -32768, 32767).astype("<i2")
        payload = q.tobytes()
        tag = _FORMAT_PCM
    else:
        payload = s.astype("<f4").tobytes()
        tag = _FORMAT_FLOAT
    align = fmt.bits // 8
    fmt_body = struct.pack("<HHIIHH", tag, 1, x.sample_rate, x.sample_rate * align,
                           align, fmt.bits)
    chunks = (b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
              + b"data" + struct.pack("<I", len(payload)) + payload
              + (b"\x00" if len(payload) & 1 else b""))
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks, clipped


def write_wav(path, x: AudioBuffer, fmt: WavFormat = WavFormat()) -> int:
    """Write ``x`` to ``path``. Returns the count of samples clamped to [-1, 1]."""
    data, clipped = wav_bytes(x, fmt)
    if clipped:
        log.warning("%s: %d samples outside [-1, 1] clamped for pcm16", path, clipped)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return clipped


# ---------------------------------------------------------------------------
# manifests

MANIFEST_COLUMNS = ("path", "label", "splice_sample", "source_a", "source_b", "ola_window",
                    "noise_snr_db", "highpass", "seed", "peak_warning")


def write_manifest(path, rows) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=MANIFEST_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: "" if row.get(k) is None else row[k] for k in MANIFEST_COLUMNS})
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_manifest(path) -> list[dict]:
    """Rows as dicts with empty cells mapped to None; ``path`` is resolved
    relative to the manifest's directory into ``abs_path``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("path", "label") if c not in (reader.fieldnames or [])]
        if missing:
            raise InvalidArgument(f"{path}: manifest missing columns {missing}")
        rows = []
        for row in reader:
            row = {k: (v if v != "" else None) for k, v in row.items()}
            row["abs_path"] = str((path.parent / row["path"]).resolve())
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# segment labels

REAL, FAKE = "real", "fake"


@dataclass(frozen=True)
class SegmentLabels:
    track_id: str
    segments: tuple  # of (start_s, end_s, class)

    @property
    def track_label(self) -> str:
        classes = {c for _, _, c in self.segments}
        return "spliced" if classes == {REAL, FAKE} else "bona_fide"

    def boundaries(self) -> list[float]:
        """Times where the class changes."""
        out = []
        for (_, e0, c0), (s1, _, c1) in zip(self.segments, self.segments[1:]):
            if c0 != c1:
                out.append(s1 if s1 == e0 else 0.5 * (e0 + s1))
        return out


def _validate(track_id, segments, where) -> SegmentLabels:
    if not segments:
        raise LabelValidationError(f"{where}: track {track_id!r} has no segments")
    bad = []
    for i, (s, e, _) in enumerate(segments):
        if not (s >= 0 and e > s):
            bad.append((i, s, e))
    for i, ((s0, e0, _), (s1, e1, _)) in enumerate(zip(segments, segments[1:])):
        if s1 < e0:
            bad.append((i + 1, s1, e1))
    if bad:
        raise LabelValidationError(
            f"{where}: track {track_id!r} has unordered or overlapping segments {bad}", bad)
    return SegmentLabels(track_id, tuple(segments))


def _split_segment(token, tags, where):
    parts = token.split("-")
    if len(parts) != 3:
        raise LabelValidationError(f"{where}: malformed segment {token!r}", [token])
    s, e, tag = parts
    if tag not in tags:
        raise LabelValidationError(f"{where}: unknown tag {tag!r}", [token])
    try:
        return float(s), float(e), tags[tag]
    except ValueError:
        raise LabelValidationError(f"{where}: bad time in {token!r}", [token]) from None


def parse_label_text(text: str, dialect: str, source="<string>") -> dict[str, SegmentLabels]:
    tracks: dict[str, list] = {}
    flags = {}
    if dialect == "native":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["track_id", "start", "end", "class"]:
            raise LabelValidationError(f"{source}: expected header track_id,start,end,class")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            row = [c.strip() for c in row]
            where = f"{source}:{lineno}"
            if len(row) != 4 or row[3] not in (REAL, FAKE):
                raise LabelValidationError(f"{where}: bad row {row}", [lineno])
            try:
                seg = (float(row[1]), float(row[2]), row[3])
            except ValueError:
                raise LabelValidationError(f"{where}: bad time in {row}", [lineno]) from None
            tracks.setdefault(row[0], []).append(seg)
    elif dialect in ("partialspoof", "had"):
        for lineno, line in enumerate(text.splitlines(), start=1):
            fields = line.split()
            if not fields:
                continue
            where = f"{source}:{lineno}"
            tid = fields[0]
            if tid in tracks:
                raise LabelValidationError(f"{where}: duplicate track {tid!r}", [lineno])
            if dialect == "partialspoof":
                tokens = fields[1:]
                tags = {"bonafide": REAL, "spoof": FAKE}
            else:
                if len(fields) != 3 or fields[2] not in ("0", "1"):
                    raise LabelValidationError(f"{where}: expected '<id> <segments> <0|1>'", [lineno])
                tokens = fields[1].split("/")
                tags = {"T": REAL, "F": FAKE}
                flags[tid] = (fields[2], where)
            tracks[tid] = [_split_segment(t, tags, where) for t in tokens]
    else:
        raise InvalidArgument(f"unknown label dialect {dialect!r}")
    if not tracks:
        raise LabelValidationError(f"{source}: no label entries")
    out = {tid: _validate(tid, segs, source) for tid, segs in tracks.items()}
    for tid, (flag, where) in flags.items():
        expected = "bona_fide" if flag == "1" else "spliced"
        if out[tid].track_label != expected:
            raise LabelValidationError(
                f"{where}: track flag {flag} contradicts segments of {tid!r}", [tid])
    return out


def read_label_file(path, dialect: str = "native") -> dict[str, SegmentLabels]:
    path = Path(path)
    return parse_label_text(path.read_text(encoding="utf-8"), dialect, str(path))


def read_segment_labels(path, dialect: str = "native", track_id: str | None = None) -> SegmentLabels:
    """Labels of one track; ``track_id`` may be omitted for single-track files."""
    labels = read_label_file(path, dialect)
    if track_id is None:
        if len(labels) != 1:
            raise InvalidArgument(f"{path} holds {len(labels)} tracks; pass track_id")
        return next(iter(labels.values()))
    try:
        return labels[track_id]
    except KeyError:
        raise InvalidArgument(f"track {track_id!r} not found in {path}") from None


# ---------------------------------------------------------------------------
# spectrogram export


@dataclass(frozen=True)
class SpectrogramExport:
    format: str = "csv"
    min_db: float = -120.0
    max_db: float = 0.0

    def __post_init__(self):
        if self.format not in ("csv", "pgm8"):
            raise InvalidArgument(f"unknown export format {self.format!r}")
        if not self.max_db > self.min_db:
            raise InvalidArgument("max_db must exceed min_db")


def spectrogram_to_pgm(spec: Spectrogram, min_db: float, max_db: float) -> bytes:
    """8-bit P5 image: time on x, lowest frequency on the bottom row."""
    v = (spec.values_db - min_db) / (max_db - min_db)
    pix = np.rint(np.clip(v, 0.0, 1.0) * 255.0).astype(np.uint8)[::-1]
    header = f"P5\n{spec.num_frames} {spec.num_bins}\n255\n".encode("ascii")
    return header + pix.tobytes()


def spectrogram_to_csv(spec: Spectrogram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s"] + [repr(float(f)) for f in spec.bin_frequencies()])
    for t, col in zip(spec.frame_times(), spec.values_db.T):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in col])
    return buf.getvalue()


def export_spectrogram(spec: Spectrogram, fmt: SpectrogramExport, path, extra_meta=None) -> Path:
    """Write ``spec`` and a JSON sidecar (``<path>.json``) with axis metadata."""
    path = Path(path)
    meta = {
        "format": fmt.format,
        "sample_rate": spec.sample_rate,
        "win_len": spec.win_len,
        "hop": spec.hop,
        "num_bins": spec.num_bins,
        "num_frames": spec.num_frames,
        "bin_hz": spec.bin_hz,
        "floor_db": spec.floor_db,
        "frame_axis": "x" if fmt.format == "pgm8" else "rows",
    }
    if fmt.format == "pgm8":
        meta.update(min_db=fmt.min_db, max_db=fmt.max_db, low_frequency="bottom")
    if extra_meta:
        meta.update(extra_meta)
    try:
        if fmt.format == "csv":
            path.write_text(spectrogram_to_csv(spec), encoding="utf-8")
        else:
            path.write_bytes(spectrogram_to_pgm(spec, fmt.min_db, fmt.max_db))
        sidecar = path.with_name(path.name + ".json")
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write spectrogram export {path}: {exc}") from exc
    return path


def list_wavs(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".wav" and p.is_file())


def track_id(path) -> str:
    return os.path.splitext(os.path.basename(str(path)))[0]
