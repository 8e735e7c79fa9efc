"""Hamming-windowed STFT, overlap-add inverse and polar helpers.

Frames are not centered: frame ``t`` covers samples ``[t*hop, t*hop + win)``.
The signal tail is zero-padded up to the next frame boundary, so every input
sample is covered by at least one frame and the inverse can always restore
``original_length`` samples. No pre-emphasis, dithering or DC removal is done.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import Waveform, require_16k
from .errors import EmptySignal, InconsistentConfig, InvalidLength, ShapeMismatch

ENVELOPE_FLOOR = 1e-8


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 320
    hop: int = 160
    dft_size: int = 320

    def __post_init__(self):
        if not 0 < self.hop <= self.window_len <= self.dft_size:
            raise InconsistentConfig(
                f"need 0 < hop <= window_len <= dft_size, got {self.hop}/{self.window_len}/{self.dft_size}"
            )

    @property
    def onesided_bins(self) -> int:
        return self.dft_size // 2 + 1


# 20 ms window, 10 ms shift at 16 kHz.
ENHANCEMENT = StftConfig(320, 160, 320)
ASR = StftConfig(320, 160, 512)


@dataclass
class Spectrogram:
    values: np.ndarray  # complex, frames x bins
    config: StftConfig
    original_length: int

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def bins(self) -> int:
        return self.values.shape[1]

    def check(self) -> None:
        if self.values.ndim != 2 or self.bins != self.config.onesided_bins:
            raise InconsistentConfig(
                f"spectrogram has shape {self.values.shape}, config expects {self.config.onesided_bins} bins"
            )
        if self.original_length < 0 or self.frames != frame_count(max(self.original_length, 1), self.config):
            raise InconsistentConfig(
                f"{self.frames} frames do not match original length {self.original_length}"
            )

    def __add__(self, other: "Spectrogram") -> "Spectrogram":
        if self.config != other.config or self.values.shape != other.values.shape:
            raise ShapeMismatch("spectrograms differ in shape or config")
        return Spectrogram(self.values + other.values, self.config, self.original_length)


def hamming_window(n: int) -> np.ndarray:
    """Symmetric Hamming window ``0.54 - 0.46 cos(2 pi k / (n - 1))``."""
    if n < 1:
        raise InvalidLength(f"window length must be >= 1, got {n}")
    if n == 1:
        return np.ones(1)
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


def frame_count(length: int, cfg: StftConfig) -> int:
    if length <= cfg.window_len:
        return 1
    return -(-(length - cfg.window_len) // cfg.hop) + 1


def frame_signal(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Split ``x`` into (frames, window_len) rows, zero-padding the tail."""
    n_frames = frame_count(len(x), cfg)
    padded_len = (n_frames - 1) * cfg.hop + cfg.window_len
    padded = np.zeros(padded_len)
    padded[: len(x)] = x
    idx = np.arange(cfg.window_len)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    return padded[idx]


def stft(w: Waveform | np.ndarray, cfg: StftConfig = ENHANCEMENT) -> Spectrogram:
    if isinstance(w, Waveform):
        require_16k(w)
        x = w.samples
    else:
        x = np.asarray(w, dtype=np.float64)
    if x.size == 0:
        raise EmptySignal("cannot analyse an empty signal")
    frames = frame_signal(x, cfg) * hamming_window(cfg.window_len)
    values = np.fft.rfft(frames, n=cfg.dft_size, axis=1)
    return Spectrogram(values, cfg, len(x))


def istft(spec: Spectrogram) -> Waveform:
    """Weighted overlap-add inverse normalised by the squared-window envelope."""
    spec.check()
    cfg = spec.config
    win = hamming_window(cfg.window_len)
    frames = np.fft.irfft(spec.values, n=cfg.dft_size, axis=1)[:, : cfg.window_len] * win
    total = (spec.frames - 1) * cfg.hop + cfg.window_len
    out = np.zeros(total)
    env = np.zeros(total)
    for t in range(spec.frames):
        start = t * cfg.hop
        out[start : start + cfg.window_len] += frames[t]
        env[start : start + cfg.window_len] += win**2
    out /= np.maximum(env, ENVELOPE_FLOOR)
    return Waveform(out[: spec.original_length])


def magnitude(spec: Spectrogram | np.ndarray) -> np.ndarray:
    return np.abs(_values(spec))


def phase(spec: Spectrogram | np.ndarray) -> np.ndarray:
    return np.angle(_values(spec))


def recombine(mag: np.ndarray, ph: np.ndarray, cfg: StftConfig, original_length: int) -> Spectrogram:
    """Polar to complex: ``mag * exp(i * ph)``."""
    mag = np.asarray(mag, dtype=np.float64)
    ph = np.asarray(ph, dtype=np.float64)
    if mag.shape != ph.shape:
        raise ShapeMismatch(f"magnitude {mag.shape} vs phase {ph.shape}")
    return Spectrogram(mag * np.cos(ph) + 1j * (mag * np.sin(ph)), cfg, original_length)


def _values(spec):
    return spec.values if isinstance(spec, Spectrogram) else np.asarray(spec)
