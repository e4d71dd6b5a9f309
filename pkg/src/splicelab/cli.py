"""
Command-line entry point.

    splicelab demo leakage --win 80
    splicelab demo splice --scenario phase --phase pi
    splicelab spectrogram track.wav --win 2048 --hop 256 --export pgm8
    splicelab forge --real R --fake F --count 1200 --grid --out corpus/
    splicelab detect corpus/ola256_clean/manifest.csv --preset partialspoof
    splicelab evaluate corpus/ --preset partialspoof

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.
Machine-readable output goes to stdout or files; logs go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .corpus_io import (FLOAT32, PCM16, SpectrogramExport, WavFormat,
                        export_spectrogram, read_manifest, read_segment_labels,
                        read_wav, track_id)
from .detector import PRESETS, BandSelection, DetectorConfig, preset, score_track
from .dsp import WINDOW_KINDS, make_window, stft_db
from .errors import (CorpusExhaustedError, InvalidArgument, SpliceLabError,
                     WavParseError)
from .forge import (OLA_WINDOWS, SNR_LEVELS, ForgeSettings, VadConfig,
                    generate_corpus, mitigation_grid)
from .metrics import evaluate_corpus, write_report

log = logging.getLogger("splicelab")

OUT_ENV = "SPLICELAB_OUT"
SCENARIO_ALIASES = {"identical": "identical", "phase": "phase_shift", "phase_shift": "phase_shift",
                    "amplitude": "amplitude_change", "amplitude_change": "amplitude_change"}


class UsageError(Exception):
    pass


def _angle(text: str) -> float:
    """Radians: a number, or ``[k*]pi[/m]`` such as ``pi``, ``-pi/2``, ``3*pi/4``."""
    t = text.strip().lower().replace(" ", "")
    try:
        return float(t)
    except ValueError:
        pass
    m = re.fullmatch(r"(-?)(?:([0-9.]+)\*)?pi(?:/([0-9.]+))?", t)
    if not m:
        raise argparse.ArgumentTypeError(f"not an angle: {text!r} (use e.g. 1.57 or pi/2)")
    sign, k, d = m.groups()
    val = float(k or 1.0) * math.pi / float(d or 1.0)
    return -val if sign else val


def _band(text: str) -> BandSelection:
    try:
        kind, _, arg = text.partition(":")
        if kind == "lowest":
            return BandSelection.lowest(int(arg))
        if kind == "highest":
            return BandSelection.highest(int(arg))
        if kind == "bins":
            return BandSelection.explicit(int(b) for b in arg.split(","))
    except (ValueError, InvalidArgument):
        pass
    raise argparse.ArgumentTypeError(f"band must be lowest:N, highest:N or bins:i,j,..; got {text!r}")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _log_config(args, **resolved):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg.update(resolved)
    log.info("configuration: %s", json.dumps(cfg, default=str, sort_keys=True))


def _detector_config(args) -> DetectorConfig:
    cfg = preset(args.preset)
    over = {}
    for key in ("win_len", "hop", "window", "band", "trim", "floor_db"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = val
    if "win_len" in over and "hop" not in over:
        over["hop"] = over["win_len"] // 4
    return replace(cfg, **over) if over else cfg


# ---------------------------------------------------------------------------


def _write_waveform_csv(path: Path, x) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "time_s", "amplitude"])
        for n, v in enumerate(x.samples):
            w.writerow([n, repr(n / x.sample_rate), repr(float(v))])


def _export_both(spec, out: Path, stem: str, args, extra=None) -> list[Path]:
    written = []
    fmts = ["csv", "pgm8"] if args.export == "both" else [args.export]
    for f in fmts:
        ext = "csv" if f == "csv" else "pgm"
        p = out / f"{stem}.spec.{ext}"
        export_spectrogram(spec, SpectrogramExport(f, args.min_db, args.max_db), p, extra)
        written.append(p)
    return written


def cmd_demo(args) -> int:
    from .signals import (demo_scenario, leakage_demo, scenario_spec,
                          splice_leakage_excess)
    out = _out_dir(args)
    if args.demo == "leakage":
        hop = args.hop or args.win
        _log_config(args, hop=hop, out=str(out))
        x, spec = leakage_demo(args.f0, args.fs, args.win, args.duration, hop, args.window)
        stem = f"leakage_win{args.win}"
        peak = int(np.argmax(spec.values_db[:, 0]))
        near = int(np.sum(spec.values_db[:, 0] > spec.values_db[peak, 0] - 40.0))
        info = {"peak_bin": peak, "bins_within_40db": near,
                "samples_per_period": args.fs / args.f0}
    else:
        scenario = SCENARIO_ALIASES[args.scenario]
        _log_config(args, scenario=scenario, out=str(out))
        sc = scenario_spec(scenario, args.f0, args.fs, args.n1, args.n2, 1.0, args.phase,
                           args.ratio)
        x, spec = demo_scenario(sc, args.win, args.hop or max(1, args.win // 4), args.window)
        stem = f"splice_{scenario}_win{args.win}"
        info = {"splice_point_0based": args.n1, "splice_point_1based": args.n1 + 1,
                "leakage_excess_db": splice_leakage_excess(spec, args.n1, args.f0)}
    _write_waveform_csv(out / f"{stem}.wave.csv", x)
    files = _export_both(spec, out, stem, args, info)
    print(json.dumps({"files": [str(out / f"{stem}.wave.csv")] + [str(f) for f in files],
                      **info}, sort_keys=True))
    return 0


def cmd_spectrogram(args) -> int:
    out = _out_dir(args)
    _log_config(args, out=str(out))
    x = read_wav(args.wav)
    spec = stft_db(x, make_window(args.window, args.win), args.hop)
    extra = {"source": str(args.wav)}
    stem = track_id(args.wav)
    if args.labels:
        labels = read_segment_labels(args.labels, args.dialect, args.track_id or None)
        extra.update(track_label=labels.track_label, splice_times_s=labels.boundaries())
        with (out / f"{stem}.splices.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_s", "frame"])
            for t in labels.boundaries():
                w.writerow([repr(t), int(t * x.sample_rate) // args.hop])
    files = _export_both(spec, out, stem, args, extra)
    print(json.dumps({"files": [str(f) for f in files], "frames": spec.num_frames,
                      "bins": spec.num_bins}, sort_keys=True))
    return 0


def _forge_settings(args) -> list[ForgeSettings]:
    windows = args.ola_window or ([*OLA_WINDOWS] if args.grid else [256])
    if args.grid:
        return mitigation_grid(windows, args.snr_db or SNR_LEVELS)
    snrs = args.snr_db or [None]
    return [ForgeSettings(w, s, args.highpass) for w in windows for s in snrs]


def cmd_forge(args) -> int:
    out = _out_dir(args)
    settings = _forge_settings(args)
    vad = VadConfig(threshold_db=args.vad_threshold_db, min_region_ms=args.vad_min_ms)
    _log_config(args, settings=[s.name for s in settings], vad=vad, out=str(out))
    manifests = generate_corpus(args.real, args.fake, out, args.count, settings, args.seed,
                                args.bona_fide, vad, WavFormat(args.format), args.threads,
                                args.process_bona_fide)
    for name, path in manifests.items():
        print(f"{name}\t{path}")
    return 0


def _detect_inputs(path: Path):
    if path.suffix.lower() == ".wav":
        return [(track_id(path), str(path), "")]
    rows = read_manifest(path)
    return [(Path(r["path"]).stem, r["abs_path"], r["label"]) for r in rows]


def cmd_detect(args) -> int:
    cfg = _detector_config(args)
    _log_config(args, detector=cfg.as_dict())
    items = sorted(_detect_inputs(Path(args.input)))

    def run(item):
        tid, p, label = item
        try:
            return tid, label, score_track(read_wav(p), cfg, tid), None
        except (OSError, SpliceLabError) as exc:
            return tid, label, None, str(exc)

    if args.threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(args.threads) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(i) for i in items]
    fh = open(args.scores, "w", newline="", encoding="utf-8") if args.scores else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["track_id", "label", "d", "frames", "peak_frame"])
        for tid, label, sc, err in results:
            if err is not None:
                log.warning("skipping %s: %s", tid, err)
                continue
            w.writerow([tid, label, repr(sc.d), sc.frames, sc.peak_frame])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _find_manifests(paths) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            found.extend(sorted(p.glob("*/manifest.csv")))
            if (p / "manifest.csv").exists():
                found.append(p / "manifest.csv")
        else:
            found.append(p)
    return found


def auc_grid_summary(results: dict[str, float]) -> str:
    """Grid of AUC percentages: rows are OLA windows, columns post-processing."""
    grid: dict[int, dict[str, float]] = {}
    cols: list[str] = []
    for name, auc in results.items():
        parts = name.split("_")
        if not parts[0].startswith("ola"):
            continue
        col = "_".join(parts[1:]) or "clean"
        grid.setdefault(int(parts[0][3:]), {})[col] = auc
        if col not in cols:
            cols.append(col)
    snrs = sorted((c for c in cols if re.fullmatch(r"snr[0-9.]+", c)),
                  key=lambda c: -float(c[3:]))
    order = ["clean"] + snrs + ["highpass"]
    cols = [c for c in order if c in cols] + [c for c in cols if c not in order]
    titles = {"clean": "Clean", "highpass": "High-Pass"}
    head = ["OLA Win."] + [titles.get(c, c.replace("snr", "SNR ")) for c in cols]
    lines = ["  ".join(f"{h:>9}" for h in head)]
    for w in sorted(grid):
        cells = [f"{100 * grid[w][c]:9.2f}" if c in grid[w] else f"{'-':>9}" for c in cols]
        lines.append("  ".join([f"{w:>9}"] + cells))
    return "\n".join(lines)


def cmd_evaluate(args) -> int:
    cfg = _detector_config(args)
    manifests = _find_manifests(args.manifests)
    if not manifests:
        raise UsageError("no manifests found")
    _log_config(args, detector=cfg.as_dict(), manifests=[str(m) for m in manifests])
    out = Path(args.out) if args.out else None
    results = {}
    for m in manifests:
        name = m.parent.name if m.name == "manifest.csv" else m.stem
        try:
            report = evaluate_corpus(m, cfg, threads=args.threads)
        except InvalidArgument as exc:
            raise UsageError(f"{m}: {exc}") from None
        if args.report and len(manifests) == 1:
            json_path = Path(args.report)
        else:
            base = out or m.parent
            base.mkdir(parents=True, exist_ok=True)
            json_path = base / (f"{name}.report.json" if out else "report.json")
        write_report(report, json_path)
        results[name] = report.auc
        print(f"{name}\t{report.summary()}\tn_pos={report.n_pos} n_neg={report.n_neg} "
              f"excluded={report.excluded}\t{json_path}")
    if len(results) > 1:
        print(auc_grid_summary(results))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splicelab", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=0, help="master seed (default: %(default)s)")
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads (default: available CPUs)")
    g.add_argument("--quiet", action="store_true", help="only warnings and errors on stderr")
    g.add_argument("--out", default=None,
                   help=f"output directory (default: ${OUT_ENV} or the current directory)")
    sub = p.add_subparsers(dest="command", required=True)

    exp = argparse.ArgumentParser(add_help=False)
    exp.add_argument("--export", choices=["csv", "pgm8", "both"], default="both")
    exp.add_argument("--min-db", type=float, default=-120.0, help="dB mapped to pixel 0")
    exp.add_argument("--max-db", type=float, default=40.0, help="dB mapped to pixel 255")

    demo = sub.add_parser("demo", help="synthetic leakage and splice demonstrations")
    dsub = demo.add_subparsers(dest="demo", required=True)
    lk = dsub.add_parser("leakage", parents=[g, exp],
                         help="sinusoid analysed with a period-aligned or misaligned window",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    lk.add_argument("--f0", type=float, default=800.0, help="sinusoid frequency, Hz")
    lk.add_argument("--fs", type=int, default=16000, help="sample rate, Hz")
    lk.add_argument("--win", type=int, default=80, help="window length; 80 = 4 periods, 88 is not")
    lk.add_argument("--hop", type=int, default=None, help="hop (default: window length)")
    lk.add_argument("--duration", type=int, default=1600, help="signal length, samples")
    lk.add_argument("--window", choices=WINDOW_KINDS, default="rectangular")
    lk.set_defaults(func=cmd_demo)
    sp = dsub.add_parser("splice", parents=[g, exp],
                         help="two concatenated sinusoids",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sp.add_argument("--scenario", choices=sorted(SCENARIO_ALIASES), default="phase")
    sp.add_argument("--phase", type=_angle, default=math.pi, help="phase jump, radians or 'pi'")
    sp.add_argument("--ratio", type=float, default=0.5, help="amplitude of second segment / first")
    sp.add_argument("--f0", type=float, default=800.0)
    sp.add_argument("--fs", type=int, default=16000)
    sp.add_argument("--n1", type=int, default=1600, help="length of the first segment")
    sp.add_argument("--n2", type=int, default=1600, help="length of the second segment")
    sp.add_argument("--win", type=int, default=80)
    sp.add_argument("--hop", type=int, default=None, help="hop (default: window / 4)")
    sp.add_argument("--window", choices=WINDOW_KINDS, default="hann_periodic")
    sp.set_defaults(func=cmd_demo)

    sg = sub.add_parser("spectrogram", parents=[g, exp], help="export the dB spectrogram of a WAV",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sg.add_argument("wav")
    sg.add_argument("--win", type=int, default=2048)
    sg.add_argument("--hop", type=int, default=256)
    sg.add_argument("--window", choices=WINDOW_KINDS, default="hann_periodic")
    sg.add_argument("--labels", default=None, help="segment-label file to overlay")
    sg.add_argument("--dialect", choices=["native", "partialspoof", "had"], default="native")
    sg.add_argument("--track-id", default=None)
    sg.set_defaults(func=cmd_spectrogram)

    fg = sub.add_parser("forge", parents=[g], help="generate a spliced corpus",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    fg.add_argument("--real", required=True, help="directory of real mono WAVs")
    fg.add_argument("--fake", required=True, help="directory of fake mono WAVs")
    fg.add_argument("--count", type=int, default=1200, help="spliced tracks per configuration")
    fg.add_argument("--bona-fide", type=int, default=None,
                    help="untouched real tracks (default: same as --count)")
    fg.add_argument("--ola-window", type=int, action="append", choices=OLA_WINDOWS,
                    help="crossfade window; repeatable (default: 256, or all with --grid)")
    fg.add_argument("--snr-db", type=float, action="append",
                    help="low-band noise SNR; repeatable (grid default: 60 50 46 40)")
    fg.add_argument("--highpass", action="store_true",
                    help="order-8 Butterworth high-pass at 100 Hz on spliced tracks")
    fg.add_argument("--grid", action="store_true",
                    help="every window x {clean, each SNR, high-pass}")
    fg.add_argument("--process-bona-fide", action="store_true",
                    help="apply noise / high-pass to the bona fide tracks as well")
    fg.add_argument("--vad-threshold-db", type=float, default=-40.0,
                    help="silence threshold relative to track RMS")
    fg.add_argument("--vad-min-ms", type=float, default=60.0, help="shortest usable silence")
    fg.add_argument("--format", choices=[PCM16, FLOAT32], default=PCM16)
    fg.set_defaults(func=cmd_forge)

    det = argparse.ArgumentParser(add_help=False)
    det.add_argument("--preset", choices=sorted(PRESETS), default="partialspoof",
                     help="partialspoof: Hann 4096, hop 1024, lowest 16 bins; "
                          "had: Hann 2048, hop 512, highest 5 bins")
    det.add_argument("--win", dest="win_len", type=int, default=None,
                     help="override window length (hop defaults to a quarter)")
    det.add_argument("--hop", type=int, default=None)
    det.add_argument("--window", choices=WINDOW_KINDS, default=None)
    det.add_argument("--band", type=_band, default=None, help="lowest:N | highest:N | bins:i,j,..")
    det.add_argument("--trim", type=int, default=None, help="frames ignored at each end")
    det.add_argument("--floor-db", type=float, default=None)

    dt = sub.add_parser("detect", parents=[g, det], help="score a WAV or every track of a manifest")
    dt.add_argument("input", help="WAV file or manifest CSV")
    dt.add_argument("--scores", default=None, help="score CSV path (default: stdout)")
    dt.set_defaults(func=cmd_detect)

    ev = sub.add_parser("evaluate", parents=[g, det], help="AUC/EER for manifests")
    ev.add_argument("manifests", nargs="+", help="manifest CSVs or corpus directories")
    ev.add_argument("--report", default=None, help="report JSON path (single manifest)")
    ev.set_defaults(func=cmd_evaluate)

    hs = sub.add_parser("synth-hosts", parents=[g], help="write synthetic real/fake host tracks",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    hs.add_argument("--n-real", type=int, default=400)
    hs.add_argument("--n-fake", type=int, default=200)
    hs.add_argument("--duration", type=float, default=3.0, help="seconds")
    hs.set_defaults(func=cmd_synth_hosts)
    return p


def cmd_synth_hosts(args) -> int:
    from .hosts import HostConfig, write_host_corpus
    out = _out_dir(args)
    _log_config(args, out=str(out))
    real, fake = write_host_corpus(out, args.n_real, args.n_fake, args.seed,
                                   HostConfig(duration_s=args.duration))
    print(f"real\t{real}\nfake\t{fake}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr,
                        force=True)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (UsageError, InvalidArgument) as exc:
        print(f"splicelab: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, WavParseError, CorpusExhaustedError, SpliceLabError) as exc:
        print(f"splicelab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
