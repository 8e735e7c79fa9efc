import numpy as np
import pytest

from dfrg.audio_io import Waveform, write_wav
from dfrg.verify import speechlike


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def clean_wave():
    return Waveform(speechlike(16000, seed=7))


@pytest.fixture
def noise_wave():
    r = np.random.default_rng(99)
    return Waveform(0.25 * r.standard_normal(5 * 16000))


@pytest.fixture
def corpus(tmp_path):
    """A small on-disk corpus: 12 clean utterances and 3 noise files."""
    clean_dir, noise_dir = tmp_path / "clean", tmp_path / "noise"
    clean_dir.mkdir()
    noise_dir.mkdir()
    r = np.random.default_rng(5)
    clean = []
    for i in range(12):
        p = clean_dir / f"utt{i:02d}.wav"
        write_wav(Waveform(speechlike(int(r.integers(4000, 9000)), seed=i)), p)
        clean.append(p)
    for name in ("babble", "cafe", "street"):
        write_wav(Waveform(0.2 * r.standard_normal(40000)), noise_dir / f"{name}.wav")
    return {"clean": clean, "noise_dir": noise_dir, "root": tmp_path}
