import json

import numpy as np
import pytest

from conftest import FS, SYNTH_VAD, tone_with_gap
from splicelab.corpus_io import read_manifest, read_wav
from splicelab.dsp import AudioBuffer, make_window, stft_db
from splicelab.errors import (CorpusExhaustedError, InvalidArgument, NoSilenceError,
                              TooShortError, UndefinedSnrError)
from splicelab.forge import (ForgeSettings, NoiseSpec, VadConfig, crossfade, derive_seed,
                             find_longest_silence, forge_splice, generate_corpus,
                             highpass_mitigate, inject_lowband_noise, lowband_noise,
                             regenerate_track, mitigation_grid)


def tone(f0, n, amp=1.0):
    return AudioBuffer(amp * np.sin(2 * np.pi * f0 * np.arange(n) / FS), FS)


def level_db(x):
    return 20 * np.log10(np.sqrt(np.mean(x ** 2)))


# -- silence search --------------------------------------------------------

def test_longest_silence_constructed():
    r = find_longest_silence(tone_with_gap())
    hop = 160
    assert abs(r.start - 16000) <= hop and abs(r.end - 19200) <= hop


def test_longest_silence_picks_longer_gap():
    x = tone_with_gap().samples.copy()
    x[5000:6600] = 0.0  # a shorter 100 ms gap
    assert find_longest_silence(AudioBuffer(x, FS)).start > 15000


def test_all_zero_track_has_no_interior_silence():
    with pytest.raises(NoSilenceError):
        find_longest_silence(AudioBuffer(np.zeros(32000), FS))


def test_leading_silence_ignored():
    x = tone(440, 32000, 0.5).samples.copy()
    x[:8000] = 0.0
    with pytest.raises(NoSilenceError):
        find_longest_silence(AudioBuffer(x, FS))


def test_short_gap_rejected():
    with pytest.raises(NoSilenceError):
        find_longest_silence(tone_with_gap(gap=480))  # 30 ms < 60 ms


def test_vad_track_too_short():
    with pytest.raises(TooShortError):
        find_longest_silence(AudioBuffer(np.zeros(100), FS))


# -- crossfade and splice --------------------------------------------------

def test_crossfade_length():
    y, centre = crossfade(np.ones(4000), np.ones(6000), 512)
    assert len(y) == 9744 and centre == 4000 - 256 + 128


def test_crossfade_equal_gain():
    y, _ = crossfade(np.full(3000, 0.5), np.full(3000, 0.5), 1024)
    np.testing.assert_allclose(y, 0.5, atol=1e-9)


@pytest.mark.parametrize("ola", [0, 3, 255])
def test_crossfade_bad_window(ola):
    with pytest.raises(InvalidArgument):
        crossfade(np.ones(100), np.ones(100), ola)


def test_crossfade_segment_too_short():
    with pytest.raises(TooShortError):
        crossfade(np.ones(100), np.ones(2000), 512)


def test_forge_constant_hosts_overlap_is_flat():
    def host():
        x = np.full(40000, 0.5)
        x[18000:22000] = 0.0
        return AudioBuffer(x, FS)
    y, rec = forge_splice(host(), host(), 256, seed=3)
    c = rec.splice_sample
    # the crossfade falls inside silence on both sides, so it joins zeros
    np.testing.assert_allclose(y.samples[c - 64:c + 64], 0.0, atol=1e-9)


def test_forge_overlap_is_weighted_sum():
    x = np.full(20000, 0.5)
    x[9000:11000] = 0.0
    h = AudioBuffer(x, FS)
    r = find_longest_silence(h)
    y, rec = forge_splice(h, h, 4096, seed=0)
    assert len(y) == r.end + (len(h) - r.start) - 2048
    w = make_window("hann_periodic", 4096).values
    head = r.end - 2048
    expect = x[head:r.end] * w[2048:] + x[r.start:r.start + 2048] * w[:2048]
    np.testing.assert_allclose(y.samples[head:r.end], expect, atol=1e-12)
    assert rec.splice_sample == head + 1024


def test_forge_length_matches_segments():
    a = tone_with_gap(before=4000 - 3200 + 3200, gap=3200, after=8000)
    b = tone_with_gap(before=12000, gap=3200, after=6000 - 3200)
    for seed in range(6):
        y, rec = forge_splice(a, b, 512, seed=seed, ids=("a", "b"))
        ra, rb = find_longest_silence(a), find_longest_silence(b)
        if rec.source_a.startswith("a"):
            expected = ra.end + (len(b) - rb.start) - 256
        else:
            expected = rb.end + (len(a) - ra.start) - 256
        assert len(y) == expected


def test_forge_deterministic():
    a, b = tone_with_gap(f0=300), tone_with_gap(f0=500)
    y1, r1 = forge_splice(a, b, 1024, seed=11)
    y2, r2 = forge_splice(a, b, 1024, seed=11)
    assert y1.samples.tobytes() == y2.samples.tobytes() and r1 == r2


def test_forge_coin_uses_both_orders():
    a, b = tone_with_gap(f0=300), tone_with_gap(f0=500)
    firsts = {forge_splice(a, b, 256, seed=s, ids=("a", "b"))[1].source_a for s in range(20)}
    assert firsts == {"a:real", "b:fake"}


def test_derive_seed_stable():
    assert derive_seed(1, 2) == derive_seed(1, 2) != derive_seed(1, 3)


# -- noise and high-pass ---------------------------------------------------

def test_noise_rms_at_60db():
    x = tone(1000, 32000, np.sqrt(2))  # RMS 1
    y = inject_lowband_noise(x, NoiseSpec(60.0, seed=5))
    noise = y.samples - x.samples
    assert np.sqrt(np.mean(noise ** 2)) == pytest.approx(1e-3, rel=0.01)


def test_noise_is_seeded():
    a = lowband_noise(5000, FS, NoiseSpec(40, seed=9))
    b = lowband_noise(5000, FS, NoiseSpec(40, seed=9))
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != lowband_noise(5000, FS, NoiseSpec(40, seed=10)).tobytes()


def test_noise_silent_input():
    with pytest.raises(UndefinedSnrError):
        inject_lowband_noise(AudioBuffer(np.zeros(100), FS), NoiseSpec(40))


def test_noise_leaves_upper_spectrum():
    rng = np.random.default_rng(0)
    x = AudioBuffer(0.1 * rng.standard_normal(48000), FS)
    y = inject_lowband_noise(x, NoiseSpec(40.0, seed=1))
    w = make_window("hann_periodic", 4096)
    sx, sy = stft_db(x, w, 1024), stft_db(y, w, 1024)
    above = sx.bin_frequencies() > 1000
    assert np.max(np.abs(sx.values_db[above] - sy.values_db[above])) < 0.1


def test_noise_lands_in_low_band():
    x = tone(1000, 48000, 0.1)
    y = inject_lowband_noise(x, NoiseSpec(40.0, seed=2))
    w = make_window("hann_periodic", 4096)
    sx, sy = stft_db(x, w, 1024), stft_db(y, w, 1024)
    assert np.mean(sy.values_db[:16]) > np.mean(sx.values_db[:16]) + 100


def test_highpass_50hz():
    x = tone(50, 48000)
    y = highpass_mitigate(x)
    assert level_db(x.samples[16000:]) - level_db(y.samples[16000:]) > 45


def test_highpass_1khz():
    x = tone(1000, 48000)
    y = highpass_mitigate(x)
    assert abs(level_db(x.samples[16000:]) - level_db(y.samples[16000:])) < 0.1


def test_highpass_dc():
    y = highpass_mitigate(AudioBuffer(np.full(48000, 0.3), FS))
    assert np.max(np.abs(y.samples[-8000:])) < 1e-6


# -- settings grid ---------------------------------------------------------

def test_grid_layout():
    grid = mitigation_grid()
    assert len(grid) == 30 and len({g.name for g in grid}) == 30
    assert [g.name for g in grid[:6]] == ["ola256_clean", "ola256_snr60", "ola256_snr50",
                                          "ola256_snr46", "ola256_snr40", "ola256_highpass"]


# -- corpus generation -----------------------------------------------------

def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_generate_corpus_deterministic(host_dirs, tmp_path):
    real, fake = host_dirs
    settings = [ForgeSettings(256), ForgeSettings(512, noise_snr_db=50.0)]
    a = generate_corpus(real, fake, tmp_path / "a", 6, settings, seed=3, vad=SYNTH_VAD)
    generate_corpus(real, fake, tmp_path / "b", 6, settings, seed=3, vad=SYNTH_VAD, threads=4)
    fa, fb = _files(tmp_path / "a"), _files(tmp_path / "b")
    fa.pop(next(k for k in fa if k.name == "corpus.json"))
    fb.pop(next(k for k in fb if k.name == "corpus.json"))
    assert fa == fb
    rows = read_manifest(a["ola256_clean"])
    assert sum(r["label"] == "spliced" for r in rows) == 6
    assert sum(r["label"] == "bona_fide" for r in rows) == 6


def test_generate_corpus_seed_changes_output(host_dirs, tmp_path):
    real, fake = host_dirs
    a = generate_corpus(real, fake, tmp_path / "a", 3, seed=1, vad=SYNTH_VAD)
    b = generate_corpus(real, fake, tmp_path / "b", 3, seed=2, vad=SYNTH_VAD)
    assert a["ola256_clean"].read_bytes() != b["ola256_clean"].read_bytes()


def test_ola_grid_gives_five_manifests(host_dirs, tmp_path):
    real, fake = host_dirs
    settings = [ForgeSettings(w) for w in (256, 512, 1024, 2048, 4096)]
    out = generate_corpus(real, fake, tmp_path, 2, settings, seed=0, vad=SYNTH_VAD)
    assert sorted(out) == sorted(s.name for s in settings)
    assert all(p.exists() for p in out.values())


def test_regenerate_bit_exact(host_dirs, tmp_path):
    real, fake = host_dirs
    settings = [ForgeSettings(1024, noise_snr_db=46.0), ForgeSettings(512, highpass=True)]
    out = generate_corpus(real, fake, tmp_path, 3, settings, seed=4, vad=SYNTH_VAD)
    for name, manifest in out.items():
        for row in read_manifest(manifest):
            if row["label"] != "spliced":
                continue
            y = regenerate_track(row, tmp_path / "corpus.json")
            np.testing.assert_array_equal(y.samples, read_wav(row["abs_path"]).samples)


def test_manifest_rows_record_settings(host_dirs, tmp_path):
    real, fake = host_dirs
    out = generate_corpus(real, fake, tmp_path, 2, [ForgeSettings(512, noise_snr_db=40.0)],
                          seed=0, vad=SYNTH_VAD)
    meta = json.loads((tmp_path / "corpus.json").read_text())
    assert meta["seed"] == 0 and meta["count"] == 2
    for row in read_manifest(out["ola512_snr40"]):
        if row["label"] == "spliced":
            assert row["ola_window"] == "512" and row["noise_snr_db"] == "40"
            assert row["source_a"].split(":")[1] in ("real", "fake")
            assert int(row["splice_sample"]) > 0


def test_corpus_exhausted(host_dirs, tmp_path):
    real, fake = host_dirs
    with pytest.raises(CorpusExhaustedError) as info:
        generate_corpus(real, fake, tmp_path, 40, seed=0, vad=SYNTH_VAD)
    assert info.value.shortfall > 0


def test_default_vad_finds_nothing_in_noisy_hosts(host_dirs, tmp_path):
    real, fake = host_dirs
    with pytest.raises(CorpusExhaustedError):
        generate_corpus(real, fake, tmp_path, 1, seed=0, vad=VadConfig(threshold_db=-60))


def _splice_frame_leak(ola, guard=8):
    n = np.arange(20000)
    seg1 = 0.5 * np.sin(2 * np.pi * 200 * n / FS)
    seg2 = 0.5 * np.sin(2 * np.pi * 330 * n / FS + 1.0)
    y, centre = crossfade(seg1, seg2, ola)
    frame = y[centre - 2048:centre + 2048] * make_window("hann_periodic", 4096).values
    p = np.abs(np.fft.rfft(frame)) ** 2
    k = np.arange(p.size)
    keep = np.ones(p.size, bool)
    for f0 in (200, 330):
        keep &= np.abs(k - f0 * 4096 / FS) > guard
    return 10 * np.log10(p[keep].sum())


@pytest.mark.parametrize("guard", [4, 8, 16])
def test_longer_ola_leaks_less(guard):
    leak = [_splice_frame_leak(w, guard) for w in (256, 512, 1024, 2048, 4096)]
    assert all(b <= a for a, b in zip(leak, leak[1:]))
    assert leak[0] - leak[-1] > 20


def test_noise_at_40db_spares_above_500hz():
    rng = np.random.default_rng(4)
    x = AudioBuffer(0.1 * rng.standard_normal(48000), FS)
    y = inject_lowband_noise(x, NoiseSpec(40.0, seed=3))
    w = make_window("hann_periodic", 4096)
    sx, sy = stft_db(x, w, 1024), stft_db(y, w, 1024)
    above = sx.bin_frequencies() > 500
    assert np.max(np.abs(sx.values_db[above] - sy.values_db[above])) < 0.5
