"""ASR front-end: 512-point STFT magnitudes -> 80 log-Mel -> deltas -> CMN.

Conventions not pinned by the recipe: HTK mel scale (2595, 700), triangles
interpolated on the mel axis, magnitude (not power) into the filterbank,
natural log with an ``e**-40`` floor, and +/-2 frame delta regression with
edge replication.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .audio_io import Waveform
from .errors import ShapeMismatch, TooManyFilters

LOG_FLOOR = np.exp(-40.0)
N_MELS = 80
DELTA_WINDOW = 2


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # n_filters x n_bins
    center_hz: np.ndarray
    f_low: float
    f_high: float

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]

    @property
    def n_bins(self) -> int:
        return self.weights.shape[1]


def mel_filterbank(
    n_filters: int = N_MELS,
    n_bins: int = 257,
    sample_rate: int = 16000,
    f_low: float = 0.0,
    f_high: float | None = None,
) -> MelFilterbank:
    """Triangular filters with centers equally spaced on the mel scale.

    Raises :class:`TooManyFilters` if any triangle is so narrow that it
    covers no FFT bin.
    """
    if n_filters < 1:
        raise ValueError("n_filters must be >= 1")
    if f_high is None:
        f_high = sample_rate / 2.0
    edges = np.linspace(hz_to_mel(f_low), hz_to_mel(f_high), n_filters + 2)
    bin_mel = hz_to_mel(np.arange(n_bins) * sample_rate / (2.0 * (n_bins - 1)))
    left, center, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_mel - left) / (center - left)
    falling = (right - bin_mel) / (right - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(weights.sum(axis=1) <= 0.0)
    if empty.size:
        raise TooManyFilters(
            f"{empty.size} of {n_filters} filters cover no bin with {n_bins} bins; first empty filter {empty[0]}"
        )
    return MelFilterbank(weights, mel_to_hz(edges[1:-1]), float(f_low), float(f_high))


_DEFAULT_FB: MelFilterbank | None = None


def default_filterbank() -> MelFilterbank:
    global _DEFAULT_FB
    if _DEFAULT_FB is None:
        _DEFAULT_FB = mel_filterbank()
    return _DEFAULT_FB


def log_mel(stft_mag: np.ndarray, fb: MelFilterbank | None = None) -> np.ndarray:
    fb = fb or default_filterbank()
    mag = np.asarray(stft_mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != fb.n_bins:
        raise ShapeMismatch(f"expected frames x {fb.n_bins} magnitudes, got {mag.shape}")
    if np.any(mag < 0):
        raise ValueError("magnitudes must be non-negative")
    return np.log(mag @ fb.weights.T + LOG_FLOOR)


def _delta(x: np.ndarray, window: int = DELTA_WINDOW) -> np.ndarray:
    padded = np.pad(x, ((window, window), (0, 0)), mode="edge")
    n = x.shape[0]
    acc = np.zeros_like(x)
    for k in range(1, window + 1):
        acc += k * (padded[window + k : window + k + n] - padded[window - k : window - k + n])
    return acc / (2.0 * sum(k * k for k in range(1, window + 1)))


def add_deltas(static: np.ndarray) -> np.ndarray:
    """Stack ``[x, delta(x), delta(delta(x))]`` along the feature axis."""
    static = np.asarray(static, dtype=np.float64)
    if static.ndim != 2 or static.shape[0] < 1:
        raise ShapeMismatch(f"need a non-empty frames x dims matrix, got {static.shape}")
    d1 = _delta(static)
    d2 = _delta(d1)
    return np.concatenate([static, d1, d2], axis=1)


@dataclass
class FeatureMatrix:
    data: np.ndarray
    cmn_applied: bool = False

    @property
    def shape(self):
        return self.data.shape


def cmn(f: np.ndarray) -> FeatureMatrix:
    f = np.asarray(f, dtype=np.float64)
    return FeatureMatrix(f - f.mean(axis=0, keepdims=True), cmn_applied=True)


def featurize(w: Waveform, fb: MelFilterbank | None = None) -> FeatureMatrix:
    spec = dsp.stft(w, dsp.ASR)
    static = log_mel(dsp.magnitude(spec), fb)
    return cmn(add_deltas(static))
