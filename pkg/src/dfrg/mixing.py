"""Additive noise mixing at a target SNR and noise-segment selection.

SNR is measured over the whole utterance. The speech is left untouched and
the noise segment is scaled. Noise files are split in two halves: the ASR
backend draws segments from the first half, the enhancement frontend from
the second, so the two never share a sample.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from .audio_io import Waveform, require_16k
from .errors import NoiseTooShort, SegmentOutOfRange, ShapeMismatch, SilentSignal

PROTOCOL_SNRS = (9.0, 6.0, 3.0, 0.0, -3.0, -6.0)


class Consumer(str, enum.Enum):
    ASR_BACKEND = "asr_backend"
    ENHANCEMENT_FRONTEND = "enhancement_frontend"


@dataclass(frozen=True)
class MixtureSpec:
    clean_id: str
    noise_id: str
    noise_offset: int
    snr_db: float
    seed: int = 0


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary parts (independent of PYTHONHASHSEED)."""
    text = "\x1f".join(repr(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little") >> 1


def _samples(x) -> np.ndarray:
    return x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)


def rms(x) -> float:
    x = _samples(x)
    return float(np.sqrt(np.mean(x**2))) if x.size else 0.0


def snr_scale(s, n, target_db: float) -> float:
    """Gain for ``n`` so that ``s`` vs ``gain * n`` sits at ``target_db``."""
    s, n = _samples(s), _samples(n)
    if s.shape != n.shape:
        raise ShapeMismatch(f"speech has {s.size} samples, noise {n.size}")
    rs, rn = rms(s), rms(n)
    if rs == 0.0 or rn == 0.0:
        raise SilentSignal("speech and noise must both have non-zero RMS")
    return (rs / rn) * 10.0 ** (-target_db / 20.0)


def measure_snr(s, n) -> float:
    s, n = _samples(s), _samples(n)
    if s.shape != n.shape:
        raise ShapeMismatch(f"speech has {s.size} samples, noise {n.size}")
    en = float(np.sum(n**2))
    if en == 0.0:
        raise SilentSignal("noise is all zeros")
    return 10.0 * np.log10(float(np.sum(s**2)) / en)


def mix(spec: MixtureSpec, clean: Waveform, noise: Waveform) -> tuple[Waveform, Waveform]:
    """Return ``(y, scaled_noise)`` with ``y = s + g * noise[offset:offset+len(s)]``."""
    require_16k(clean)
    require_16k(noise)
    start, stop = spec.noise_offset, spec.noise_offset + len(clean)
    if start < 0 or stop > len(noise):
        raise SegmentOutOfRange(
            f"segment [{start}, {stop}) outside noise {spec.noise_id!r} of {len(noise)} samples"
        )
    segment = noise.samples[start:stop]
    gain = snr_scale(clean.samples, segment, spec.snr_db)
    scaled = gain * segment
    return Waveform(clean.samples + scaled), Waveform(scaled)


def half_bounds(noise_len: int, consumer: Consumer | str) -> tuple[int, int]:
    """Sample range ``[start, end)`` a consumer may draw from."""
    consumer = Consumer(consumer)
    mid = noise_len // 2
    return (0, mid) if consumer is Consumer.ASR_BACKEND else (mid, noise_len)


def pick_noise_segment(noise: Waveform | int, needed_len: int, consumer: Consumer | str, seed: int) -> int:
    """Uniform random start offset for a segment inside the consumer's half."""
    noise_len = noise if isinstance(noise, int) else len(noise)
    lo, hi = half_bounds(noise_len, consumer)
    if hi - lo < needed_len:
        raise NoiseTooShort(
            f"{Consumer(consumer).value} half holds {hi - lo} samples, need {needed_len}"
        )
    rng = np.random.default_rng(seed)
    return int(rng.integers(lo, hi - needed_len + 1))
