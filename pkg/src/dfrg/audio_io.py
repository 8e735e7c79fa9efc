"""WAV and feature-file I/O.

Only 16 kHz mono PCM16 WAV is accepted. Feature files use a small custom
container: the magic ``b"DFRG1\\0"``, a little-endian u32 frame count, a u32
dimension, then ``frames * dim`` float32 values in row-major order.
"""

from __future__ import annotations

import os
import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import CorruptFile, HeaderMismatch, IoFailure, UnsupportedFormat

SAMPLE_RATE = 16000
PCM_SCALE = 32768.0
FEATURE_MAGIC = b"DFRG1\0"
_HEADER = struct.Struct("<II")

PathLike = Union[str, os.PathLike]


@dataclass
class Waveform:
    """Mono signal with its sample rate. Samples are stored as float64."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains NaN or Inf")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"invalid sample rate {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass
class FeatureFile:
    data: np.ndarray
    dim: int = field(default=-1)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim == 1 and data.size == 0 and self.dim > 0:
            data = data.reshape(0, self.dim)
        if data.ndim != 2:
            raise HeaderMismatch(f"feature data must be 2-D, got shape {data.shape}")
        if self.dim == -1:
            self.dim = data.shape[1]
        if data.shape[1] != self.dim:
            raise HeaderMismatch(f"declared dim {self.dim} but data has {data.shape[1]} columns")
        if self.dim <= 0:
            raise HeaderMismatch("feature dim must be positive")
        self.data = data

    @property
    def frame_count(self) -> int:
        return self.data.shape[0]


def require_16k(w: Waveform) -> None:
    if w.sample_rate != SAMPLE_RATE:
        raise UnsupportedFormat(f"expected {SAMPLE_RATE} Hz audio, got {w.sample_rate} Hz")


def read_wav(path: PathLike) -> Waveform:
    """Read a 16 kHz mono PCM16 file and scale samples to [-1, 1)."""
    try:
        with wave.open(os.fspath(path), "rb") as f:
            channels, width, rate = f.getnchannels(), f.getsampwidth(), f.getframerate()
            comptype = f.getcomptype()
            declared = f.getnframes()
            if comptype != "NONE" or width != 2:
                raise UnsupportedFormat(f"{path}: only 16-bit PCM is supported")
            if channels != 1:
                raise UnsupportedFormat(f"{path}: expected mono, found {channels} channels")
            if rate != SAMPLE_RATE:
                raise UnsupportedFormat(f"{path}: expected {SAMPLE_RATE} Hz, found {rate} Hz")
            raw = f.readframes(declared)
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise UnsupportedFormat(f"{path}: {msg}") from exc
        raise CorruptFile(f"{path}: {msg}") from exc
    except EOFError as exc:
        raise CorruptFile(f"{path}: truncated header") from exc
    if len(raw) != declared * 2:
        raise CorruptFile(f"{path}: data chunk declares {declared} samples, found {len(raw) // 2}")
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / PCM_SCALE, rate)


def quantize(samples: np.ndarray) -> tuple[np.ndarray, int]:
    """Hard-clip to [-1, 1] and convert to int16. Returns (pcm, clip_count)."""
    x = np.asarray(samples, dtype=np.float64)
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    pcm = np.clip(np.round(np.clip(x, -1.0, 1.0) * PCM_SCALE), -32768, 32767)
    return pcm.astype("<i2"), clipped


def wav_bytes(w: Waveform) -> tuple[bytes, int]:
    import io

    pcm, clipped = quantize(w.samples)
    buf = io.BytesIO()
    with wave.open(buf, "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.sample_rate)
        f.writeframes(pcm.tobytes())
    return buf.getvalue(), clipped


def write_wav(w: Waveform, path: PathLike) -> int:
    """Write ``w`` as PCM16 and return the number of clipped samples."""
    data, clipped = wav_bytes(w)
    _write_bytes(path, data)
    return clipped


def feature_bytes(f: FeatureFile) -> bytes:
    payload = np.ascontiguousarray(f.data, dtype="<f4").tobytes()
    return FEATURE_MAGIC + _HEADER.pack(f.frame_count, f.dim) + payload


def write_features(f: FeatureFile, path: PathLike) -> None:
    _write_bytes(path, feature_bytes(f))


def read_features(path: PathLike) -> FeatureFile:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    return parse_features(blob, source=str(path))


def parse_features(blob: bytes, source: str = "<bytes>") -> FeatureFile:
    head = len(FEATURE_MAGIC) + _HEADER.size
    if len(blob) < head or not blob.startswith(FEATURE_MAGIC):
        raise CorruptFile(f"{source}: not a feature file")
    frames, dim = _HEADER.unpack_from(blob, len(FEATURE_MAGIC))
    if dim == 0:
        raise HeaderMismatch(f"{source}: zero feature dimension")
    expected = frames * dim * 4
    payload = blob[head:]
    if len(payload) < expected:
        raise CorruptFile(f"{source}: header declares {frames}x{dim}, payload holds {len(payload)} bytes")
    if len(payload) > expected:
        raise HeaderMismatch(f"{source}: {len(payload) - expected} trailing bytes after declared payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(frames, dim).astype(np.float32)
    return FeatureFile(data, dim)


def _write_bytes(path: PathLike, data: bytes) -> None:
    """Write ``data`` unless the file already holds exactly those bytes."""
    p = Path(path)
    try:
        if p.is_file() and p.stat().st_size == len(data) and p.read_bytes() == data:
            return
        p.parent.mkdir(parents=True, exist_ok=True)
        tmp = p.with_name(p.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, p)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
