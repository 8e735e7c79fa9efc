"""Oracle time-frequency masks, mask application and distortion analysis.

The distortion left after masking is ``D = N*M - S*(1 - M)``; enhanced speech
is then ``S + D``. Masks come from the oracle family below (IRM, PSM, binary,
all-one, all-zero, perturbed IRM); any callable producing a frames x bins
array can stand in for a learned frontend through :func:`enhance_utterance`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, asdict
from typing import Callable, Optional, Union

import numpy as np

from . import dsp
from .audio_io import Waveform
from .errors import InvalidLevel, MaskAboveOne, ShapeMismatch

SNR_CAP_DB = 300.0

ArrayOrSpec = Union[np.ndarray, dsp.Spectrogram]


class MaskKind(str, enum.Enum):
    IRM = "irm"
    PSM = "psm"
    BINARY = "binary"
    ALL_ONE = "all_one"
    ALL_ZERO = "all_zero"
    PERTURBED = "perturbed"


@dataclass
class Mask:
    values: np.ndarray
    kind: MaskKind

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.kind = MaskKind(self.kind)
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("mask values must be finite and non-negative")
        if self.kind is MaskKind.IRM and np.any(self.values > 1):
            raise ValueError("IRM values must lie in [0, 1]")

    @property
    def shape(self):
        return self.values.shape

    def complement(self) -> np.ndarray:
        if np.any(self.values > 1.0):
            raise MaskAboveOne("mask exceeds 1, complement 1 - M is undefined")
        return 1.0 - self.values


@dataclass
class DistortionReport:
    noise_residue_energy: float
    speech_attenuation_energy: float
    distortion_energy: float
    deviation_cosine: float
    snr_noisy_db: float
    snr_enhanced_db: float
    speech_energy: float
    domain: str

    def to_dict(self) -> dict:
        return asdict(self)


def _arr(x: ArrayOrSpec) -> np.ndarray:
    return x.values if isinstance(x, dsp.Spectrogram) else np.asarray(x)


def _same_shape(*arrays) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ShapeMismatch(f"shape mismatch: {sorted(shapes)}")


def irm(s_mag, n_mag) -> Mask:
    """Ideal ratio mask ``|S| / (|S| + |N|)``; bins where both are zero get 0."""
    s_mag = np.asarray(s_mag, dtype=np.float64)
    n_mag = np.asarray(n_mag, dtype=np.float64)
    _same_shape(s_mag, n_mag)
    if np.any(s_mag < 0) or np.any(n_mag < 0):
        raise ValueError("magnitudes must be non-negative")
    total = s_mag + n_mag
    out = np.divide(s_mag, total, out=np.zeros_like(total), where=total > 0)
    return Mask(out, MaskKind.IRM)


def psm(s_spec: ArrayOrSpec, y_spec: ArrayOrSpec) -> Mask:
    """Phase-sensitive mask ``|S|/|Y| cos(theta_S - theta_Y)`` truncated to [0, 1]."""
    s, y = _arr(s_spec), _arr(y_spec)
    _same_shape(s, y)
    y_mag = np.abs(y)
    # Re(S conj(Y)) / |Y|^2 equals |S|/|Y| cos(dtheta) without computing angles.
    num = np.real(s * np.conj(y))
    ratio = np.divide(num, y_mag**2, out=np.zeros_like(y_mag), where=y_mag > 0)
    return Mask(np.clip(ratio, 0.0, 1.0), MaskKind.PSM)


def binary_mask(s_mag, n_mag, threshold_db: float = 0.0) -> Mask:
    """Ideal binary mask: 1 where the local SNR exceeds ``threshold_db``."""
    s_mag = np.asarray(s_mag, dtype=np.float64)
    n_mag = np.asarray(n_mag, dtype=np.float64)
    _same_shape(s_mag, n_mag)
    gain = 10.0 ** (threshold_db / 20.0)
    return Mask((s_mag > gain * n_mag).astype(np.float64), MaskKind.BINARY)


def all_one(shape) -> Mask:
    return Mask(np.ones(shape), MaskKind.ALL_ONE)


def all_zero(shape) -> Mask:
    return Mask(np.zeros(shape), MaskKind.ALL_ZERO)


def perturbed_irm(s_mag, n_mag, noise_level: float, seed: int) -> Mask:
    """IRM plus seeded uniform noise in ``[-noise_level, noise_level]``, clipped to [0, 1].

    Stands in for an imperfect learned mask estimator. ``noise_level == 0``
    returns the IRM unchanged.
    """
    if not 0.0 <= noise_level <= 1.0:
        raise InvalidLevel(f"noise_level must be in [0, 1], got {noise_level}")
    base = irm(s_mag, n_mag).values
    if noise_level == 0.0:
        return Mask(base, MaskKind.PERTURBED)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=base.shape)
    return Mask(np.clip(base + noise_level * u, 0.0, 1.0), MaskKind.PERTURBED)


def apply_mask(y_mag, m: Mask) -> np.ndarray:
    y_mag = np.asarray(y_mag, dtype=np.float64)
    _same_shape(y_mag, m.values)
    return y_mag * m.values


def distortion(s_spec: ArrayOrSpec, n_spec: ArrayOrSpec, m: Mask) -> np.ndarray:
    """``D = N*M - S*(1 - M)`` evaluated bin by bin (complex or real inputs)."""
    s, n = _arr(s_spec), _arr(n_spec)
    _same_shape(s, n, m.values)
    return n * m.values - s * m.complement()


def _db(num: float, den: float) -> float:
    if den <= 0.0:
        return SNR_CAP_DB
    if num <= 0.0:
        return -SNR_CAP_DB
    return float(min(10.0 * np.log10(num / den), SNR_CAP_DB))


def analyze_distortion(s_spec: ArrayOrSpec, n_spec: ArrayOrSpec, m: Mask, aligned: bool = False) -> DistortionReport:
    """Energy breakdown and deviation of ``D`` from ``N``.

    With ``aligned=True`` the speech and noise are replaced by their
    magnitudes before ``D`` is formed, i.e. the two components are treated
    as phase-aligned. That is the setting where the IRM leaves no distortion.
    """
    s, n = _arr(s_spec), _arr(n_spec)
    if aligned:
        s, n = np.abs(s), np.abs(n)
    d = distortion(s, n, m)
    residue = float(np.sum(np.abs(n * m.values) ** 2))
    attenuation = float(np.sum(np.abs(s * m.complement()) ** 2))
    d_energy = float(np.sum(np.abs(d) ** 2))
    n_energy = float(np.sum(np.abs(n) ** 2))
    s_energy = float(np.sum(np.abs(s) ** 2))
    if d_energy == 0.0 or n_energy == 0.0:
        cosine = 1.0
    else:
        cosine = float(np.real(np.vdot(n, d)) / np.sqrt(d_energy * n_energy))
        cosine = min(1.0, max(-1.0, cosine))
    return DistortionReport(
        noise_residue_energy=residue,
        speech_attenuation_energy=attenuation,
        distortion_energy=d_energy,
        deviation_cosine=cosine,
        snr_noisy_db=_db(s_energy, n_energy),
        snr_enhanced_db=_db(s_energy, d_energy),
        speech_energy=s_energy,
        domain="aligned_magnitude" if aligned else "complex",
    )


@dataclass(frozen=True)
class EnhancerSpec:
    """Serializable description of an oracle-mask enhancer.

    ``kind`` is one of the :class:`MaskKind` values; ``noise_level`` and
    ``seed`` only matter for the perturbed family.
    """

    kind: str = MaskKind.IRM.value
    noise_level: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        MaskKind(self.kind)
        if self.kind == MaskKind.PERTURBED.value:
            if self.noise_level is None:
                raise InvalidLevel("perturbed enhancer needs a noise_level")
            if not 0.0 <= self.noise_level <= 1.0:
                raise InvalidLevel(f"noise_level must be in [0, 1], got {self.noise_level}")

    @classmethod
    def parse(cls, text: str, seed: Optional[int] = None) -> "EnhancerSpec":
        """Parse CLI shorthand: ``irm``, ``psm``, ``binary``, ``one``, ``zero``, ``perturbed:0.2``."""
        aliases = {"one": "all_one", "zero": "all_zero", "ibm": "binary"}
        name, _, level = text.partition(":")
        name = aliases.get(name, name)
        if name == MaskKind.PERTURBED.value:
            return cls(name, float(level) if level else 0.2, seed if seed is not None else 0)
        if level:
            raise ValueError(f"mask {name!r} takes no level")
        return cls(name)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.noise_level is not None:
            out["noise_level"] = self.noise_level
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EnhancerSpec":
        return cls(d["kind"], d.get("noise_level"), d.get("seed"))

    def mask(self, s_spec: dsp.Spectrogram, n_spec: dsp.Spectrogram, y_spec: dsp.Spectrogram) -> Mask:
        kind = MaskKind(self.kind)
        shape = y_spec.values.shape
        s_mag, n_mag = dsp.magnitude(s_spec), dsp.magnitude(n_spec)
        if kind is MaskKind.IRM:
            return irm(s_mag, n_mag)
        if kind is MaskKind.PSM:
            return psm(s_spec, y_spec)
        if kind is MaskKind.BINARY:
            return binary_mask(s_mag, n_mag)
        if kind is MaskKind.ALL_ONE:
            return all_one(shape)
        if kind is MaskKind.ALL_ZERO:
            return all_zero(shape)
        return perturbed_irm(s_mag, n_mag, self.noise_level, self.seed or 0)


MaskProducer = Callable[[dsp.Spectrogram, dsp.Spectrogram, dsp.Spectrogram], Union[Mask, np.ndarray]]


def enhance_utterance(
    y: Waveform,
    enhancer: Union[EnhancerSpec, MaskProducer],
    s: Waveform,
    n: Waveform,
    cfg: dsp.StftConfig = dsp.ENHANCEMENT,
    return_mask: bool = False,
):
    """Mask the noisy magnitude and resynthesize with the noisy phase.

    ``enhancer`` is either an :class:`EnhancerSpec` or any callable taking
    ``(S, N, Y)`` spectrograms and returning a mask.
    """
    if not len(y) == len(s) == len(n):
        raise ShapeMismatch(f"lengths differ: y={len(y)} s={len(s)} n={len(n)}")
    y_spec = dsp.stft(y, cfg)
    s_spec = dsp.stft(s, cfg)
    n_spec = dsp.stft(n, cfg)
    producer = enhancer.mask if isinstance(enhancer, EnhancerSpec) else enhancer
    m = producer(s_spec, n_spec, y_spec)
    if not isinstance(m, Mask):
        m = Mask(np.asarray(m), MaskKind.PERTURBED)
    enhanced_mag = apply_mask(dsp.magnitude(y_spec), m)
    out = dsp.istft(dsp.recombine(enhanced_mag, dsp.phase(y_spec), cfg, len(y)))
    if return_mask:
        return out, m
    return out
