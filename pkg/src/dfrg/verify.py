"""Self-check suites run by ``dfrg verify``.

Each suite returns a list of :class:`Check` records. They use small
synthetic signals so the whole set runs in a few seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import dsp, features, masking, mixing, recurrent
from .audio_io import Waveform

SUITES = ("dsp", "mask", "mix", "feat", "lstm")


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float

    def __post_init__(self):
        self.passed, self.value, self.threshold = bool(self.passed), float(self.value), float(self.threshold)

    def to_dict(self) -> dict:
        return asdict(self)


def speechlike(n_samples: int, seed: int) -> np.ndarray:
    """Amplitude-modulated harmonic signal with a little noise, peak about 0.5."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples) / 16000.0
    f0 = rng.uniform(100, 220)
    x = sum(np.sin(2 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi)) / h for h in range(1, 12))
    env = 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(2, 5) * t)
    x = env * x + 0.05 * rng.standard_normal(n_samples)
    return 0.5 * x / np.max(np.abs(x))


def interior_rel_error(x: np.ndarray, x_hat: np.ndarray, cfg: dsp.StftConfig) -> float:
    lo, hi = cfg.window_len, len(x) - cfg.window_len
    a, b = x[lo:hi], x_hat[lo:hi]
    return float(np.linalg.norm(a - b) / np.linalg.norm(a))


def suite_dsp(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(5):
        x = rng.standard_normal(int(rng.integers(16000, 48000))) * 0.1
        for cfg in (dsp.ENHANCEMENT, dsp.ASR):
            worst = max(worst, interior_rel_error(x, dsp.istft(dsp.stft(x, cfg)).samples, cfg))
    a, b = rng.standard_normal(4000), rng.standard_normal(4000)
    lin = np.max(np.abs(dsp.stft(2 * a - 3 * b).values - (2 * dsp.stft(a).values - 3 * dsp.stft(b).values)))
    return [Check("istft_stft_roundtrip", worst < 1e-6, worst, 1e-6), Check("stft_linearity", lin < 1e-10, lin, 1e-10)]


def suite_mask(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    shape = (20, 161)
    s = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    n = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    d_one = np.max(np.abs(masking.distortion(s, n, masking.all_one(shape)) - n))
    d_zero = np.max(np.abs(masking.distortion(s, n, masking.all_zero(shape)) + s))
    rep = masking.analyze_distortion(s, n, masking.irm(np.abs(s), np.abs(n)), aligned=True)
    rel = rep.distortion_energy / rep.speech_energy
    return [
        Check("distortion_all_one_is_noise", d_one == 0.0, d_one, 0.0),
        Check("distortion_all_zero_is_minus_speech", d_zero == 0.0, d_zero, 0.0),
        Check("distortion_irm_zero", rel <= 1e-10, rel, 1e-10),
    ]


def suite_mix(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    clean = Waveform(speechlike(16000, seed))
    noise = Waveform(0.3 * rng.standard_normal(64000))
    worst = 0.0
    for snr in mixing.PROTOCOL_SNRS:
        off = mixing.pick_noise_segment(noise, len(clean), "asr_backend", seed)
        y, n = mixing.mix(mixing.MixtureSpec("c", "n", off, snr), clean, noise)
        worst = max(worst, abs(mixing.measure_snr(clean, y.samples - clean.samples) - snr))
    return [Check("mix_snr_accuracy_db", worst < 1e-3, worst, 1e-3)]


def suite_feat(seed: int = 0) -> list[Check]:
    x = speechlike(16000, seed)
    f = features.featurize(Waveform(x)).data
    g = features.featurize(Waveform(0.1 * x)).data
    silent = features.log_mel(np.zeros((3, 257)))
    return [
        Check("feature_dim", f.shape[1] == 240, float(f.shape[1]), 240.0),
        Check("cmn_mean", float(np.max(np.abs(f.mean(axis=0)))) < 1e-6, float(np.max(np.abs(f.mean(axis=0)))), 1e-6),
        Check("silent_floor", bool(np.all(silent == -40.0)), float(np.max(np.abs(silent + 40.0))), 0.0),
        Check("scale_invariance", float(np.max(np.abs(f - g))) < 1e-5, float(np.max(np.abs(f - g))), 1e-5),
    ]


def suite_lstm(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    p = recurrent.LstmParams.random(3, 4, seed=seed)
    x = rng.standard_normal((6, 3))
    plain = recurrent.gradient_check(p, x, None, seed=seed)
    plan = recurrent.DropoutPlan.sample(0.2, 6, 3, 4, seed=seed + 1)
    dropped = recurrent.gradient_check(p, x, plan, seed=seed)
    zero_plan = recurrent.DropoutPlan.sample(0.0, 6, 3, 4, seed=seed)
    same = np.array_equal(recurrent.lstm_forward(p, x), recurrent.lstm_forward(p, x, zero_plan))
    return [
        Check("gradient_check", plain < 1e-4, plain, 1e-4),
        Check("gradient_check_dropout", dropped < 1e-4, dropped, 1e-4),
        Check("rate0_bitwise", bool(same), float(not same), 0.0),
    ]


def run(suite: str = "all", seed: int = 0) -> dict[str, list[Check]]:
    names = SUITES if suite == "all" else (suite,)
    table = {"dsp": suite_dsp, "mask": suite_mask, "mix": suite_mix, "feat": suite_feat, "lstm": suite_lstm}
    return {name: table[name](seed) for name in names}
