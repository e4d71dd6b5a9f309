"""Acceptance checks, one per primary criterion.

Every test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary and also when the module is run directly::

    python3 tests/test_acceptance.py
"""

import itertools
import os
import sys
import time

import numpy as np
import pytest

from splicelab.detector import BandSelection, dynamic_range, band_average, preset
from splicelab.dsp import AudioBuffer, Spectrogram, apply_filter, design_butterworth
from splicelab.forge import ForgeSettings, VadConfig, generate_corpus
from splicelab.hosts import write_host_corpus
from splicelab.metrics import LabeledScore, compute_auc, compute_eer, evaluate_corpus, write_report
from splicelab.signals import (demo_scenario, leakage_demo, scenario_spec,
                               splice_leakage_excess)

FS = 16000
RESULTS: list[str] = []
SYNTH_VAD = VadConfig(threshold_db=-15.0)
TREND_COUNT = 200
TREND_SETTINGS = [ForgeSettings(w) for w in (256, 512, 1024, 2048)] \
    + [ForgeSettings(256, noise_snr_db=s) for s in (60.0, 50.0, 46.0, 40.0)] \
    + [ForgeSettings(256, highpass=True)]
SLACK = 0.02


def record(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def non_increasing(values, slack=SLACK):
    return all(b <= a + slack for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------


def test_leakage_figure():
    t0 = time.perf_counter()
    _, aligned = leakage_demo(800.0, FS, 80)
    _, leaky = leakage_demo(800.0, FS, 88)
    col = aligned.values_db[:, 0]
    # energy outside bin 4 relative to the peak
    p = 10 ** (col / 10)
    outside = 10 * np.log10(np.delete(p, 4).sum()) - col[4]
    near = int(np.sum(leaky.values_db[:, 0] > leaky.values_db[:, 0].max() - 40))
    dt = time.perf_counter() - t0
    ok = int(np.argmax(col)) == 4 and outside <= -100 and near >= 10 and dt < 1
    record("Spectral leakage", ok,
           f"peak bin {int(np.argmax(col))}, out-of-bin energy {outside:.1f} dB, "
           f"{near} bins within 40 dB at L=88, {dt * 1000:.0f} ms")


def test_splice_figure():
    t0 = time.perf_counter()
    excess = {}
    for sc in ("identical", "phase_shift", "amplitude_change"):
        _, spec = demo_scenario(scenario_spec(sc))
        excess[sc] = splice_leakage_excess(spec, 1600, 800.0)
    dt = time.perf_counter() - t0
    ok = (excess["phase_shift"] >= 20 and excess["amplitude_change"] >= 20
          and excess["identical"] < 1 and dt < 1)
    record("Splicing artifact", ok,
           ", ".join(f"{k} {v:.1f} dB" for k, v in excess.items()) + f", {dt * 1000:.0f} ms")


def _brute_auc(pos, neg):
    s = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return s / (len(pos) * len(neg))


def _brute_eer(pos, neg):
    pts = [(0.0, 1.0)]
    for t in sorted(set(pos) | set(neg), reverse=True):
        pts.append((sum(n >= t for n in neg) / len(neg), sum(p < t for p in pos) / len(pos)))
    for (f0, m0), (f1, m1) in zip(pts, pts[1:]):
        if f1 == m1:
            return f1
        if f0 < m0 and f1 > m1:
            a = (m0 - f0) / ((m0 - f0) + (f1 - m1))
            return f0 + a * (f1 - f0)


def test_detector_oracles():
    grid = Spectrogram(np.array([[-100, -90, -20, -95, -100],
                                 [-80, -70, -10, -75, -80],
                                 [-60, -50, 0, -55, -60],
                                 [-40, -30, 10, -35, -40],
                                 [-20, -10, 20, -15, -20]], float), FS, 1, 8)
    v = band_average(grid, BandSelection.lowest(2))
    ok_grid = v.tolist() == [-90, -80, -15, -85, -90] and dynamic_range(v) == 75
    ok_grid &= band_average(grid, BandSelection.highest(1)).tolist() == [-20, -10, 20, -15, -20]
    rng = np.random.default_rng(2024)
    worst_eer, auc_ok = 0.0, True
    for _ in range(300):
        n_pos, n_neg = rng.integers(1, 51, size=2)
        pos = list(rng.integers(0, 12, n_pos) / 3.0)
        neg = list(rng.integers(0, 12, n_neg) / 3.0)
        scores = [LabeledScore(f"p{i}", s, "spliced") for i, s in enumerate(pos)] \
            + [LabeledScore(f"n{i}", s, "bona_fide") for i, s in enumerate(neg)]
        auc_ok &= compute_auc(scores) == _brute_auc(pos, neg)
        worst_eer = max(worst_eer, abs(compute_eer(scores)[0] - _brute_eer(pos, neg)))
    ok = ok_grid and auc_ok and worst_eer <= 1e-9
    record("Detector oracle suite", ok,
           f"grids {'exact' if ok_grid else 'MISMATCH'}, AUC {'exact' if auc_ok else 'MISMATCH'} "
           f"over 300 draws, max EER error {worst_eer:.1e}")


def test_filter_responses():
    lp = design_butterworth("lowpass", 7, 80.0, FS)
    hp = design_butterworth("highpass", 8, 100.0, FS)
    g80, g160 = lp.gain_db(80.0)[0], lp.gain_db(160.0)[0]
    att50 = -hp.gain_db(50.0)[0]
    n = 40000
    imp = np.zeros(n)
    imp[0] = 1.0
    tails = []
    for f, fc, order in ((lp, 80.0, 7), (hp, 100.0, 8)):
        h = apply_filter(f, AudioBuffer(imp, FS)).samples
        tails.append(float(np.max(np.abs(h[int(10 * order / fc * FS):]))))
    ok = abs(g80 + 3.01) <= 0.05 and g160 <= -42 and att50 >= 45 and max(tails) < 1e-12
    record("Filter responses", ok,
           f"LP {g80:.3f} dB @80 Hz, {g160:.2f} dB @160 Hz; HP -{att50:.1f} dB @50 Hz; "
           f"impulse tail {max(tails):.1e}")


# ---------------------------------------------------------------------------
# corpus-scale criteria share one forged corpus


@pytest.fixture(scope="module")
def trend_corpus(tmp_path_factory):
    t0 = time.perf_counter()
    root = tmp_path_factory.mktemp("trend")
    threads = os.cpu_count() or 1
    real, fake = write_host_corpus(root / "hosts", 2 * TREND_COUNT + 60, TREND_COUNT + 40, seed=1)
    manifests = generate_corpus(real, fake, root / "corpus", TREND_COUNT, TREND_SETTINGS,
                                seed=1, vad=SYNTH_VAD, threads=threads)
    cfg = preset("partialspoof")
    aucs = {name: evaluate_corpus(m, cfg, threads=threads).auc for name, m in manifests.items()}
    return aucs, time.perf_counter() - t0


def test_mitigation_trend(trend_corpus):
    aucs, dt = trend_corpus
    clean = [aucs[f"ola{w}_clean"] for w in (256, 512, 1024, 2048)]
    hp = aucs["ola256_highpass"]
    ok = clean[0] >= 0.95 and non_increasing(clean) and hp <= 0.65 and dt < 120
    record("Mitigation trend", ok,
           "clean AUC " + " -> ".join(f"{100 * a:.1f}" for a in clean)
           + f", high-pass {100 * hp:.1f}, {TREND_COUNT}+{TREND_COUNT} tracks, {dt:.0f} s")


def test_noise_monotonicity(trend_corpus):
    aucs, _ = trend_corpus
    curve = [aucs["ola256_clean"]] + [aucs[f"ola256_snr{s}"] for s in (60, 50, 46, 40)]
    ok = non_increasing(curve)
    record("Noise-injection monotonicity", ok,
           "OLA 256 AUC clean/60/50/46/40 dB: " + " / ".join(f"{100 * a:.1f}" for a in curve))


def _snapshot(root):
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_determinism(tmp_path):
    real, fake = write_host_corpus(tmp_path / "hosts", 30, 16, seed=3)
    settings = [ForgeSettings(256), ForgeSettings(1024, noise_snr_db=46.0),
                ForgeSettings(512, highpass=True)]
    snaps = []
    for run, threads in (("a", 1), ("b", 4)):
        out = tmp_path / run
        manifests = generate_corpus(real, fake, out, 12, settings, seed=9, vad=SYNTH_VAD,
                                    threads=threads)
        for name, m in manifests.items():
            rep = evaluate_corpus(m, preset("partialspoof"), threads=threads)
            write_report(rep, out / f"{name}.report.json")
        snaps.append(_snapshot(out))
    same = snaps[0] == snaps[1]
    n_wav = sum(k.endswith(".wav") for k in snaps[0])
    record("Determinism", same,
           f"{len(snaps[0])} files ({n_wav} WAV) byte-identical across 1 vs 4 threads"
           if same else "outputs differ between runs")


REFERENCE_CORPORA = {
    "PartialSpoof eval": ("SPLICELAB_PARTIALSPOOF_MANIFEST", "partialspoof", 0.0616, 0.9810),
    "HAD test": ("SPLICELAB_HAD_MANIFEST", "had", 0.0736, 0.9524),
}


@pytest.mark.parametrize("corpus", list(REFERENCE_CORPORA))
def test_reference_corpora(corpus):
    env, name, eer_ref, auc_ref = REFERENCE_CORPORA[corpus]
    manifest = os.environ.get(env)
    if not manifest:
        line = f"SKIP  Reference corpus ({corpus}): set {env} to a manifest of the corpus"
        RESULTS.append(line)
        pytest.skip(line)
    rep = evaluate_corpus(manifest, preset(name), threads=os.cpu_count() or 1)
    ok = abs(rep.eer - eer_ref) <= 0.005 and abs(rep.auc - auc_ref) <= 0.01
    record(f"Reference corpus ({corpus})", ok,
           f"EER {100 * rep.eer:.2f}% (ref {100 * eer_ref:.2f}), "
           f"AUC {100 * rep.auc:.2f}% (ref {100 * auc_ref:.2f})")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
