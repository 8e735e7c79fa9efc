"""Exit criteria for the package, one test per criterion.

Each test prints a ``[ACCEPT n] PASS|FAIL`` line with the measured value.
"""

import filecmp
import time

import numpy as np
import pytest

from dfrg import cli, dataset, dsp, features, masking, mixing
from dfrg import recurrent as rn
from dfrg.audio_io import Waveform, write_wav
from dfrg.verify import interior_rel_error, speechlike


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[ACCEPT {n}] {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def test_1_stft_roundtrip(report):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        x = rng.standard_normal(int(rng.integers(16000, 48001)))
        for cfg in (dsp.ENHANCEMENT, dsp.ASR):
            worst = max(worst, interior_rel_error(x, dsp.istft(dsp.stft(Waveform(x), cfg)).samples, cfg))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 10
    assert report(1, ok, f"max interior rel L2 {worst:.2e} (< 1e-6), {elapsed:.2f}s (< 10s)")


def test_2_distortion_special_cases(report):
    rng = np.random.default_rng(2)
    exact = True
    worst_irm = 0.0
    for _ in range(100):
        shape = tuple(rng.integers(2, 40, size=2))
        s = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        n = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        exact &= np.array_equal(masking.distortion(s, n, masking.all_one(shape)), n)
        exact &= np.array_equal(masking.distortion(s, n, masking.all_zero(shape)), -s)
        s_mag, n_mag = np.abs(s) * rng.uniform(0, 5), np.abs(n) * rng.uniform(0, 5)
        d = masking.distortion(s_mag, n_mag, masking.irm(s_mag, n_mag))
        worst_irm = max(worst_irm, np.sum(d**2) / np.sum(s_mag**2))
    ok = bool(exact) and worst_irm <= 1e-10
    assert report(2, ok, f"all-one/all-zero exact={bool(exact)}, max IRM |D|^2/|S|^2 {worst_irm:.2e} (<= 1e-10)")


def test_3_mixing_accuracy(report):
    rng = np.random.default_rng(3)
    worst = 0.0
    for snr in mixing.PROTOCOL_SNRS:
        for k in range(20):
            clean = Waveform(speechlike(int(rng.integers(8000, 32000)), seed=int(rng.integers(1 << 30))))
            noise = Waveform(rng.standard_normal(100000) * rng.uniform(0.01, 0.5))
            off = mixing.pick_noise_segment(noise, len(clean), "asr_backend", k)
            y, _ = mixing.mix(mixing.MixtureSpec("c", "n", off, snr), clean, noise)
            worst = max(worst, abs(mixing.measure_snr(clean, y.samples - clean.samples) - snr))
    assert report(3, worst < 1e-3, f"120 mixtures, max |achieved - target| {worst:.2e} dB (< 0.001)")


def _noise(rng, n, kind):
    white = rng.standard_normal(n)
    if kind == 0:
        return white
    if kind == 1:
        brown = np.cumsum(white)
        return brown - np.convolve(brown, np.ones(400) / 400, mode="same")
    t = np.arange(n) / 16000
    return white * (1 + np.sin(2 * np.pi * 3 * t)) + np.sin(2 * np.pi * 500 * t)


def test_4_irm_enhancement_benefit(report):
    rng = np.random.default_rng(4)
    gains = []
    for k in range(60):
        snr = mixing.PROTOCOL_SNRS[k % 6]
        clean = Waveform(speechlike(int(rng.integers(12000, 32000)), seed=1000 + k))
        noise = Waveform(0.1 * _noise(rng, 80000, k % 3))
        off = mixing.pick_noise_segment(noise, len(clean), "enhancement_frontend", k)
        y, n = mixing.mix(mixing.MixtureSpec("c", "n", off, snr), clean, noise)
        out = masking.enhance_utterance(y, masking.EnhancerSpec("irm"), clean, n)
        before = mixing.measure_snr(clean, y.samples - clean.samples)
        after = mixing.measure_snr(clean, out.samples - clean.samples)
        gains.append(after - before)
    ok = min(gains) > 0
    assert report(4, ok, f"60 mixtures, min SNR gain {min(gains):.2f} dB, mean {np.mean(gains):.2f} dB (> 0 each)")


def test_5_feature_pipeline(report):
    x = speechlike(24000, 5)
    f = features.featurize(Waveform(x))
    dim_ok = f.data.shape[1] == 240
    mean = float(np.max(np.abs(f.data.mean(axis=0))))
    silent = features.log_mel(dsp.magnitude(dsp.stft(Waveform(np.zeros(8000)), dsp.ASR)))
    silent_ok = bool(np.all(silent == -40.0))
    scale = max(
        float(np.max(np.abs(features.featurize(Waveform(a * x)).data - f.data))) for a in (0.05, 0.5, 1.8)
    )
    ok = dim_ok and mean < 1e-6 and silent_ok and scale < 1e-5
    assert report(
        5, ok,
        f"dim={f.data.shape[1]}, max |mean| {mean:.1e} (< 1e-6), silent=-40 exactly: {silent_ok}, "
        f"scale drift {scale:.1e} (< 1e-5)",
    )


def test_6_dropout_semantics(report):
    p = rn.LstmParams.random(6, 5, seed=6)
    x = np.random.default_rng(6).standard_normal((30, 6))
    zero = rn.DropoutPlan.sample(0.0, 30, 6, 5, seed=0)
    bitwise = rn.lstm_forward(p, x).tobytes() == rn.lstm_forward(p, x, zero).tobytes()

    # the recurrent multiplier applied to h_{t-1}, recovered frame by frame
    plan = rn.DropoutPlan.sample(0.2, 30, 6, 5, seed=7)
    applied = []
    orig = rn._masked

    def spy(pl, x_t, h_prev, t):
        xs, hs = orig(pl, x_t, h_prev, t)
        applied.append((np.stack(hs), h_prev.copy(), np.stack(xs), x_t.copy()))
        return xs, hs

    rn._masked = spy
    try:
        rn.lstm_forward(p, x, plan)
    finally:
        rn._masked = orig
    constant = all(
        np.array_equal(hs, h_prev[None, :] * plan.recurrent_masks) for hs, h_prev, _, _ in applied
    )
    x_masks = [xs / x_t[None, :] for _, _, xs, x_t in applied]
    varies = any(not np.array_equal(a, b) for a, b in zip(x_masks, x_masks[1:]))

    keep, hidden, seeds = 0.8, 5, 1000
    masks = np.stack([rn.DropoutPlan.sample(0.2, 1, 1, hidden, seed=s).recurrent_masks > 0 for s in range(seeds)])
    p_agree = keep**2 + (1 - keep) ** 2
    trials = seeds * hidden
    sigma = np.sqrt(trials * p_agree * (1 - p_agree))
    z = max(
        abs(np.sum(masks[:, a] == masks[:, b]) - trials * p_agree) / sigma
        for a in range(4) for b in range(a + 1, 4)
    )
    ok = bitwise and constant and varies and z <= 3
    assert report(
        6, ok,
        f"rate0 bitwise={bitwise}, recurrent masks constant={constant}, input masks vary={varies}, "
        f"max pairwise agreement z={z:.2f} (<= 3)",
    )


def test_7_gradient_check(report):
    t0 = time.perf_counter()
    p = rn.LstmParams.random(3, 4, seed=7)
    x = np.random.default_rng(7).standard_normal((6, 3))
    plain = rn.gradient_check_details(p, x, None, n_samples=200)
    plan = rn.DropoutPlan.sample(0.2, 6, 3, 4, seed=8)
    dropped = rn.gradient_check_details(p, x, plan, n_samples=200)
    elapsed = time.perf_counter() - t0
    worst = max(plain["max_rel_error"], dropped["max_rel_error"])
    ok = worst < 1e-4 and plain["checked"] >= 200 and dropped["checked"] >= 200 and elapsed < 30
    assert report(
        7, ok,
        f"max rel err {plain['max_rel_error']:.1e} / {dropped['max_rel_error']:.1e} with dropout (< 1e-4), "
        f"{plain['checked']} samples over {plain['distinct']} coordinates, {elapsed:.2f}s (< 30s)",
    )


def test_8_protocol_ratios(report, tmp_path, capsys):
    ids = tmp_path / "ids.txt"
    ids.write_text("".join(f"wsj{i:05d}\n" for i in range(7138)))
    test_ids = tmp_path / "test.txt"
    test_ids.write_text("".join(f"tst{i:04d}\n" for i in range(330)))
    code = cli.main([
        "build-dataset", "--regime", "distortion_independent", "--scale", "paper",
        "--clean-list", str(ids), "--test-list", str(test_ids),
        "--train-noises", ",".join(f"n{i:04d}" for i in range(100)),
        "--test-noises", "ADTbabble,ADTcafeteria1", "--out-dir", str(tmp_path / "paper"), "--dry-run",
    ])
    capsys.readouterr()
    entries = dataset.read_manifest(tmp_path / "paper" / "manifest.jsonl")
    counts = dataset.count_by_split(entries)
    paper_ok = code == 0 and counts["train"] == 157036 == 22 * 7138 and counts["test"] == 3960 == 330 * 2 * 6

    clean = [dataset.CleanUtterance(f"u{i}", f"/x/u{i}") for i in range(10)]
    desk_train = len(dataset.build_manifest(dataset.RegimeSpec("noise_independent", ["a", "b"]), clean, None, "desk:10"))
    desk_test = len(dataset.build_test_grid(clean[:5], ["a", "b"], mixing.PROTOCOL_SNRS))
    desk_ok = desk_train == 22 * 10 and desk_test == 5 * 2 * 6
    assert report(
        8, paper_ok and desk_ok,
        f"paper train={counts['train']} test={counts['test']}; desk(10) train={desk_train} test(5)={desk_test}",
    )


def test_9_noise_half_exclusivity(report):
    noise_len, needed = 48001, 7000
    # every offset each consumer can ever return, enumerated from its admissible range
    used = {}
    for consumer in mixing.Consumer:
        lo, hi = mixing.half_bounds(noise_len, consumer)
        samples = np.zeros(noise_len, dtype=bool)
        for off in range(lo, hi - needed + 1):
            samples[off : off + needed] = True
        used[consumer] = samples
    overlap = int(np.sum(used[mixing.Consumer.ASR_BACKEND] & used[mixing.Consumer.ENHANCEMENT_FRONTEND]))
    # and the sampler never leaves those ranges
    stray = 0
    for consumer in mixing.Consumer:
        for seed in range(3000):
            off = mixing.pick_noise_segment(noise_len, needed, consumer, seed)
            stray += int(not used[consumer][off : off + needed].all())
    ok = overlap == 0 and stray == 0
    assert report(9, ok, f"shared samples {overlap}, draws outside own half {stray} of 6000")


def _build(root, corpus, out):
    clean_list = root / "clean.txt"
    clean_list.write_text("".join(f"{p}\n" for p in corpus["clean"][:10]))
    test_list = root / "test.txt"
    test_list.write_text("".join(f"{p}\n" for p in corpus["clean"][10:]))
    return cli.main([
        "--global-seed", "2024", "build-dataset", "--regime", "distortion_independent", "--scale", "desk:10",
        "--clean-list", str(clean_list), "--test-list", str(test_list), "--noise-dir", str(corpus["noise_dir"]),
        "--test-noises", "babble,cafe", "--out-dir", str(out), "--workers", "4",
    ])


def test_10_determinism(report, corpus, tmp_path, capsys):
    a, b = tmp_path / "run_a", tmp_path / "run_b"
    codes = (_build(tmp_path, corpus, a), _build(tmp_path, corpus, b))
    capsys.readouterr()
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    same = files_a == files_b and all(filecmp.cmp(a / f, b / f, shallow=False) for f in files_a)
    n_wav = sum(f.suffix == ".wav" for f in files_a)
    n_feat = sum(f.suffix == ".dfrg" for f in files_a)
    ok = codes == (0, 0) and same and n_wav == 220 + 24 and n_feat == 220 + 24
    assert report(10, ok, f"{len(files_a)} files ({n_wav} wav, {n_feat} features), bitwise identical={same}")
