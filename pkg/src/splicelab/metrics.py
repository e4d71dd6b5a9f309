"""
Threshold-free evaluation of detector scores: ROC, AUC and EER, plus the
corpus-level harness that scores every track of a manifest.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus_io import read_manifest, read_wav
from .detector import DetectorConfig, score_track
from .errors import InvalidArgument, SpliceLabError

log = logging.getLogger(__name__)

BONA_FIDE, SPLICED = "bona_fide", "spliced"


@dataclass(frozen=True)
class LabeledScore:
    track_id: str
    score: float
    label: str

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise InvalidArgument(f"score of {self.track_id!r} is not finite")
        if self.label not in (BONA_FIDE, SPLICED):
            raise InvalidArgument(f"unknown label {self.label!r}")


def _split(scores) -> tuple[np.ndarray, np.ndarray]:
    pos = np.array([s.score for s in scores if s.label == SPLICED], dtype=np.float64)
    neg = np.array([s.score for s in scores if s.label == BONA_FIDE], dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise InvalidArgument(
            f"need both classes, got {pos.size} spliced and {neg.size} bona fide")
    return pos, neg


def compute_auc(scores) -> float:
    """Mann-Whitney AUC: share of (spliced, bona fide) pairs ordered correctly,
    ties counting one half."""
    pos, neg = _split(scores)
    neg = np.sort(neg)
    below = np.searchsorted(neg, pos, side="left")
    upto = np.searchsorted(neg, pos, side="right")
    # twice the statistic, in exact integers
    twice = int(2 * below.sum() + (upto - below).sum())
    return twice / (2 * pos.size * neg.size)


def roc_points(scores) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Operating points for thresholds at each distinct score, high to low.

    A track is called spliced when ``score >= threshold``. The first point
    (threshold +inf) is (0, 0); the last is (1, 1).
    """
    pos, neg = _split(scores)
    thr = np.unique(np.concatenate([pos, neg]))[::-1]
    pos_sorted, neg_sorted = np.sort(pos), np.sort(neg)
    tp = pos.size - np.searchsorted(pos_sorted, thr, side="left")
    fp = neg.size - np.searchsorted(neg_sorted, thr, side="left")
    thresholds = np.concatenate([[np.inf], thr])
    tpr = np.concatenate([[0.0], tp / pos.size])
    fpr = np.concatenate([[0.0], fp / neg.size])
    return thresholds, fpr, tpr


def compute_eer(scores) -> tuple[float, float]:
    """EER by linear interpolation where FPR - FNR changes sign.

    Returns ``(eer, threshold)``.
    """
    thr, fpr, tpr = roc_points(scores)
    fnr = 1.0 - tpr
    diff = fpr - fnr  # -1 at the first point, +1 at the last
    i = int(np.argmax(diff >= 0.0))
    if diff[i] == 0.0:
        return float(fpr[i]), float(thr[i])
    d0, d1 = diff[i - 1], diff[i]
    t = -d0 / (d1 - d0)
    eer = fpr[i - 1] + t * (fpr[i] - fpr[i - 1])
    if np.isfinite(thr[i - 1]):
        threshold = thr[i - 1] + t * (thr[i] - thr[i - 1])
    else:
        threshold = thr[i]
    return float(eer), float(threshold)


@dataclass
class EvalReport:
    auc: float
    eer: float
    eer_threshold: float
    n_pos: int
    n_neg: int
    excluded: int
    config: dict
    roc: list = field(default_factory=list)  # (threshold, fpr, tpr)
    scores: list = field(default_factory=list)  # (track_id, label, d, frames)
    errors: list = field(default_factory=list)  # (track_id, message)

    def to_dict(self) -> dict:
        def num(x):
            return x if np.isfinite(x) else ("inf" if x > 0 else "-inf")
        return {
            "auc": self.auc,
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "excluded": self.excluded,
            "config": self.config,
            "roc": [[num(t), f, p] for t, f, p in self.roc],
            "scores": [list(s) for s in self.scores],
            "errors": [list(e) for e in self.errors],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        roc = [(float(t), f, p) for t, f, p in d.get("roc", [])]
        return cls(d["auc"], d["eer"], d["eer_threshold"], d["n_pos"], d["n_neg"],
                   d["excluded"], d["config"], roc,
                   [tuple(s) for s in d.get("scores", [])],
                   [tuple(e) for e in d.get("errors", [])])

    def summary(self) -> str:
        return f"AUC {100 * self.auc:.1f} EER {100 * self.eer:.1f}"


def build_report(scores, config: dict, excluded: int = 0, errors=()) -> EvalReport:
    scores = sorted(scores, key=lambda s: s.track_id)
    auc = compute_auc(scores)
    eer, eer_thr = compute_eer(scores)
    thr, fpr, tpr = roc_points(scores)
    pos, neg = _split(scores)
    return EvalReport(
        auc=auc, eer=eer, eer_threshold=eer_thr, n_pos=int(pos.size), n_neg=int(neg.size),
        excluded=excluded, config=dict(config),
        roc=[(float(t), float(f), float(p)) for t, f, p in zip(thr, fpr, tpr)],
        scores=[(s.track_id, s.label, s.score) for s in scores],
        errors=sorted(errors))


def _score_row(row, cfg):
    tid = row.get("track_id") or Path(row["path"]).stem
    try:
        x = read_wav(row["abs_path"])
        sc = score_track(x, cfg, tid)
    except (OSError, SpliceLabError) as exc:
        return tid, None, f"{type(exc).__name__}: {exc}"
    return tid, sc, None


def score_manifest(manifest_path, cfg: DetectorConfig, threads: int = 1):
    """Score every manifest row; unreadable or too-short tracks are reported, not raised."""
    rows = read_manifest(manifest_path)
    for row in rows:
        if row["label"] not in (BONA_FIDE, SPLICED):
            raise InvalidArgument(f"{manifest_path}: unknown label {row['label']!r}")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _score_row(r, cfg), rows))
    else:
        results = [_score_row(r, cfg) for r in rows]
    scored, errors = [], []
    for row, (tid, sc, err) in zip(rows, results):
        if err is not None:
            log.warning("excluding %s: %s", tid, err)
            errors.append((tid, err))
        else:
            scored.append((LabeledScore(tid, sc.d, row["label"]), sc))
    return scored, errors


def evaluate_corpus(manifest_path, cfg: DetectorConfig, out_json=None, out_roc=None,
                    threads: int = 1) -> EvalReport:
    scored, errors = score_manifest(manifest_path, cfg, threads)
    report = build_report([s for s, _ in scored],
                          {"manifest": Path(manifest_path).name, **cfg.as_dict()},
                          excluded=len(errors), errors=errors)
    if out_json is not None:
        write_report(report, out_json, out_roc)
    return report


def write_report(report: EvalReport, json_path, roc_csv=None) -> None:
    json_path = Path(json_path)
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    if roc_csv is None:
        roc_csv = json_path.with_suffix(".roc.csv")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "fpr", "tpr"])
    for t, f, p in report.roc:
        w.writerow([repr(t), repr(f), repr(p)])
    Path(roc_csv).write_text(buf.getvalue(), encoding="utf-8")


def read_report(json_path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(json_path).read_text(encoding="utf-8")))
