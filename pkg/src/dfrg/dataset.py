"""Training-regime manifests and their realization into audio and features.

Five acoustic-model training regimes are supported. ``clean``,
``noise_dependent`` and ``noise_mismatched`` use one training entry per
clean utterance. ``noise_independent`` and ``distortion_independent`` draw
``expansion_factor`` (22) independent (noise, offset, SNR) triples per clean
utterance. The distortion-independent set is the noise-independent set passed
through an enhancer.

Manifests are JSON lines, one :class:`ManifestEntry` per line, with fields in
declaration order. Everything random is derived from a global seed plus
stable identifiers, so manifests do not depend on iteration order.
"""

from __future__ import annotations

import enum
import json
import logging
import re
import wave
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from . import audio_io, dsp, features, masking, mixing
from .errors import DfrgError, EmptyCatalog, RegimeConstraintViolated
from .mixing import PROTOCOL_SNRS, Consumer, derive_seed

log = logging.getLogger(__name__)

EXPANSION_FACTOR = 22
DEFAULT_ENHANCER = masking.EnhancerSpec("perturbed", noise_level=0.2)


class Regime(str, enum.Enum):
    CLEAN = "clean"
    NOISE_DEPENDENT = "noise_dependent"
    NOISE_MISMATCHED = "noise_mismatched"
    NOISE_INDEPENDENT = "noise_independent"
    DISTORTION_INDEPENDENT = "distortion_independent"


class Split(str, enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass
class RegimeSpec:
    regime: Regime
    train_noises: Sequence[str] = ()
    test_noises: Sequence[str] = ()
    expansion_factor: int = EXPANSION_FACTOR
    snr_set: Sequence[float] = PROTOCOL_SNRS
    enhancer: Optional[masking.EnhancerSpec] = None

    def __post_init__(self):
        self.regime = Regime(self.regime)
        self.train_noises = tuple(self.train_noises)
        self.test_noises = tuple(self.test_noises)
        self.snr_set = tuple(float(s) for s in self.snr_set)
        if self.regime is Regime.DISTORTION_INDEPENDENT and self.enhancer is None:
            self.enhancer = DEFAULT_ENHANCER

    def validate(self) -> None:
        r, train, test = self.regime, set(self.train_noises), set(self.test_noises)
        if not self.snr_set:
            raise RegimeConstraintViolated("snr_set is empty")
        if r is Regime.CLEAN and train:
            raise RegimeConstraintViolated("clean regime takes no training noises")
        if r is Regime.NOISE_DEPENDENT and (len(train) != 1 or train != test):
            raise RegimeConstraintViolated(
                "noise_dependent needs exactly one training noise, identical to the test noise"
            )
        if r is Regime.NOISE_MISMATCHED:
            if not train:
                raise RegimeConstraintViolated("noise_mismatched needs training noises")
            if train & test:
                raise RegimeConstraintViolated(
                    f"noise_mismatched train/test noises overlap: {sorted(train & test)}"
                )
        if self.expansion_factor < 1:
            raise RegimeConstraintViolated("expansion_factor must be >= 1")
        if r is not Regime.DISTORTION_INDEPENDENT and self.enhancer is not None:
            raise RegimeConstraintViolated(f"{r.value} training data is not enhanced")

    @property
    def noisy(self) -> bool:
        return self.regime is not Regime.CLEAN

    @property
    def entries_per_utterance(self) -> int:
        if self.regime in (Regime.NOISE_INDEPENDENT, Regime.DISTORTION_INDEPENDENT):
            return self.expansion_factor
        return 1


@dataclass(frozen=True)
class CleanUtterance:
    id: str
    path: str
    num_samples: Optional[int] = None


@dataclass(frozen=True)
class NoiseSource:
    id: str
    path: Optional[str] = None
    num_samples: Optional[int] = None


@dataclass
class ManifestEntry:
    utterance_id: str
    split: str
    regime: str
    clean_path: str
    noise_id: Optional[str] = None
    noise_offset: Optional[int] = None
    snr_db: Optional[float] = None
    enhancer: Optional[dict] = None
    seed: int = 0
    output_audio_path: str = ""
    output_feature_path: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "ManifestEntry":
        d = json.loads(line)
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown manifest fields: {sorted(unknown)}")
        return cls(**d)

    def enhancer_spec(self) -> Optional[masking.EnhancerSpec]:
        return masking.EnhancerSpec.from_dict(self.enhancer) if self.enhancer else None


def parse_scale(scale: Union[str, int, None]) -> Optional[int]:
    """``"paper"`` (or None) keeps every utterance; ``"desk:k"`` or ``k`` keeps the first k."""
    if scale is None or scale == "paper":
        return None
    if isinstance(scale, int):
        k = scale
    else:
        m = re.fullmatch(r"desk[:(](\d+)\)?", str(scale))
        if not m:
            raise ValueError(f"scale must be 'paper' or 'desk:k', got {scale!r}")
        k = int(m.group(1))
    if k < 1:
        raise ValueError("desk scale needs k >= 1")
    return k


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def _paths(split: str, utt: str) -> tuple[str, str]:
    return f"{split}/audio/{_safe(utt)}.wav", f"{split}/features/{_safe(utt)}.dfrg"


def _catalog(noise_catalog) -> dict[str, NoiseSource]:
    if noise_catalog is None:
        return {}
    if isinstance(noise_catalog, Mapping):
        return {
            k: (v if isinstance(v, NoiseSource) else NoiseSource(k, str(v)))
            for k, v in noise_catalog.items()
        }
    return {n.id: n for n in noise_catalog}


def _offset(noise: NoiseSource, clean: CleanUtterance, consumer: Consumer, seed: int) -> Optional[int]:
    if noise.num_samples is None or clean.num_samples is None:
        return None
    return mixing.pick_noise_segment(noise.num_samples, clean.num_samples, consumer, seed)


def _noisy_entry(
    split: Split,
    regime: Regime,
    utt_id: str,
    clean: CleanUtterance,
    noise: NoiseSource,
    snr: float,
    global_seed: int,
    draw: int,
    consumer: Consumer,
    enhancer: Optional[masking.EnhancerSpec],
) -> ManifestEntry:
    seed = derive_seed(global_seed, clean.id, noise.id, snr, draw)
    enh = None
    if enhancer is not None:
        enh = masking.EnhancerSpec(
            enhancer.kind, enhancer.noise_level, seed if enhancer.kind == "perturbed" else enhancer.seed
        ).to_dict()
    audio, feats = _paths(split.value, utt_id)
    return ManifestEntry(
        utterance_id=utt_id,
        split=split.value,
        regime=regime.value,
        clean_path=clean.path,
        noise_id=noise.id,
        noise_offset=_offset(noise, clean, consumer, derive_seed(seed, "offset")),
        snr_db=float(snr),
        enhancer=enh,
        seed=seed,
        output_audio_path=audio,
        output_feature_path=feats,
    )


def _clean_entry(split: Split, regime: Regime, clean: CleanUtterance, global_seed: int) -> ManifestEntry:
    audio, feats = _paths(split.value, clean.id)
    return ManifestEntry(
        utterance_id=clean.id,
        split=split.value,
        regime=regime.value,
        clean_path=clean.path,
        seed=derive_seed(global_seed, clean.id),
        output_audio_path=audio,
        output_feature_path=feats,
    )


def build_manifest(
    regime: RegimeSpec,
    clean_list: Sequence[CleanUtterance],
    noise_catalog=None,
    scale: Union[str, int, None] = "paper",
    global_seed: int = 0,
    validation_list: Sequence[CleanUtterance] = (),
    consumer: Consumer = Consumer.ASR_BACKEND,
) -> list[ManifestEntry]:
    """Training (plus clean validation) entries for one regime.

    For each clean utterance and each of its ``entries_per_utterance`` draws
    a private generator picks the noise and the SNR uniformly, and an offset
    inside the consumer's half of the noise file. The draw for
    ``(clean_id, j)`` is shared across regimes, so the distortion-independent
    set is the noise-independent set plus an enhancer.
    """
    regime.validate()
    k = parse_scale(scale)
    clean = list(clean_list)[:k] if k is not None else list(clean_list)
    if not clean:
        raise EmptyCatalog("clean list is empty")
    catalog = _catalog(noise_catalog)
    consumer = Consumer(consumer)

    noise_ids: list[str] = []
    if regime.noisy:
        noise_ids = list(regime.train_noises) or sorted(catalog)
        if not noise_ids:
            raise EmptyCatalog(f"{regime.regime.value} needs at least one training noise")
        for n in noise_ids:
            catalog.setdefault(n, NoiseSource(n))

    entries = []
    per = regime.entries_per_utterance
    for u in clean:
        if not regime.noisy:
            entries.append(_clean_entry(Split.TRAIN, regime.regime, u, global_seed))
            continue
        for j in range(per):
            rng = np.random.default_rng(derive_seed(global_seed, "train", u.id, j))
            noise = catalog[noise_ids[int(rng.integers(len(noise_ids)))]]
            snr = regime.snr_set[int(rng.integers(len(regime.snr_set)))]
            utt = u.id if per == 1 else f"{u.id}_{j:02d}"
            entries.append(
                _noisy_entry(Split.TRAIN, regime.regime, utt, u, noise, snr, global_seed, j, consumer, regime.enhancer)
            )
    entries += [_clean_entry(Split.VALIDATION, regime.regime, u, global_seed) for u in validation_list]
    return entries


def build_test_grid(
    clean_test_list: Sequence[CleanUtterance],
    test_noises: Sequence[str],
    snr_set: Sequence[float] = PROTOCOL_SNRS,
    noise_catalog=None,
    regime: Union[Regime, str] = Regime.CLEAN,
    global_seed: int = 0,
    enhancer: Optional[masking.EnhancerSpec] = None,
    consumer: Consumer = Consumer.ASR_BACKEND,
) -> list[ManifestEntry]:
    """Full noise x SNR x utterance grid; ``enhancer`` marks enhanced evaluation."""
    clean = list(clean_test_list)
    if not clean or not test_noises or not snr_set:
        raise EmptyCatalog("test grid needs clean utterances, noises and SNRs")
    catalog = _catalog(noise_catalog)
    regime = Regime(regime)
    entries = []
    for noise_id in test_noises:
        noise = catalog.get(noise_id, NoiseSource(noise_id))
        for snr in snr_set:
            for u in clean:
                utt = f"{u.id}_{noise_id}_{float(snr):+g}dB"
                entries.append(
                    _noisy_entry(Split.TEST, regime, utt, u, noise, float(snr), global_seed, "test", Consumer(consumer), enhancer)
                )
    return entries


def write_manifest(entries: Iterable[ManifestEntry], path) -> None:
    text = "".join(e.to_json() + "\n" for e in entries)
    audio_io._write_bytes(path, text.encode("utf-8"))


def read_manifest(path) -> list[ManifestEntry]:
    with open(path, encoding="utf-8") as f:
        return [ManifestEntry.from_json(line) for line in f if line.strip()]


def count_by_split(entries: Iterable[ManifestEntry]) -> dict[str, int]:
    counts = {s.value: 0 for s in Split}
    for e in entries:
        counts[e.split] += 1
    return counts


def wav_length(path) -> Optional[int]:
    """Sample count from a WAV header, or None if the file is missing."""
    try:
        with wave.open(str(path), "rb") as f:
            return f.getnframes()
    except (FileNotFoundError, wave.Error, EOFError):
        return None


@dataclass
class GenerationReport:
    entries: list[dict] = field(default_factory=list)

    @property
    def failures(self) -> list[dict]:
        return [e for e in self.entries if e["status"] != "ok"]

    def to_json(self) -> str:
        return json.dumps({"entries": self.entries, "failed": len(self.failures)}, indent=1, sort_keys=True)


def realize_entry(
    entry: ManifestEntry,
    out_dir,
    noise_catalog=None,
    mode: str = "both",
    consumer: Consumer = Consumer.ASR_BACKEND,
) -> dict:
    """Mix, enhance and featurize one entry; returns its report record."""
    out_dir = Path(out_dir)
    rec = {"utterance_id": entry.utterance_id, "status": "ok", "achieved_snr_db": None,
           "distortion_energy": None, "relative_distortion": None, "clip_count": 0, "error": None}
    clean = audio_io.read_wav(entry.clean_path)
    audio = clean
    if entry.noise_id is not None:
        src = _catalog(noise_catalog).get(entry.noise_id)
        if src is None or src.path is None:
            raise EmptyCatalog(f"noise {entry.noise_id!r} not in catalog")
        noise = audio_io.read_wav(src.path)
        offset = entry.noise_offset
        if offset is None:
            offset = mixing.pick_noise_segment(noise, len(clean), consumer, derive_seed(entry.seed, "offset"))
        spec = mixing.MixtureSpec(Path(entry.clean_path).stem, entry.noise_id, offset, entry.snr_db, entry.seed)
        y, n = mixing.mix(spec, clean, noise)
        rec["achieved_snr_db"] = mixing.measure_snr(clean, n)
        audio = y
        enhancer = entry.enhancer_spec()
        if enhancer is not None:
            audio, m = masking.enhance_utterance(y, enhancer, clean, n, return_mask=True)
            s_mag = dsp.magnitude(dsp.stft(clean, dsp.ENHANCEMENT))
            n_mag = dsp.magnitude(dsp.stft(n, dsp.ENHANCEMENT))
            report = masking.analyze_distortion(s_mag, n_mag, m, aligned=True)
            rec["distortion_energy"] = report.distortion_energy
            rec["relative_distortion"] = report.distortion_energy / max(report.speech_energy, 1e-300)
    blob, clipped = audio_io.wav_bytes(audio)
    rec["clip_count"] = clipped
    if mode in ("audio", "both"):
        audio_io._write_bytes(out_dir / entry.output_audio_path, blob)
    if mode in ("features", "both"):
        # Features are computed from the quantized audio actually stored on disk.
        pcm, _ = audio_io.quantize(audio.samples)
        stored = audio_io.Waveform(pcm.astype(np.float64) / audio_io.PCM_SCALE)
        feats = features.featurize(stored)
        audio_io.write_features(audio_io.FeatureFile(feats.data), out_dir / entry.output_feature_path)
    return rec


def realize(
    entries: Sequence[ManifestEntry],
    out_dir,
    noise_catalog=None,
    mode: str = "both",
    workers: int = 1,
) -> GenerationReport:
    """Generate outputs for every entry. Failures are recorded, not raised."""
    if mode not in ("audio", "features", "both"):
        raise ValueError(f"mode must be audio, features or both, got {mode!r}")
    catalog = _catalog(noise_catalog)

    def run(e: ManifestEntry) -> dict:
        try:
            return realize_entry(e, out_dir, catalog, mode)
        except (DfrgError, OSError, ValueError) as exc:
            log.warning("entry %s failed: %s", e.utterance_id, exc)
            return {"utterance_id": e.utterance_id, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(run, entries))
    else:
        records = [run(e) for e in entries]
    records.sort(key=lambda r: r["utterance_id"])
    return GenerationReport(records)
