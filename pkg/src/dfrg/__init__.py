"""Speech-enhancement distortion analysis and ASR feature tooling.

Submodules: :mod:`audio_io`, :mod:`dsp`, :mod:`masking`, :mod:`mixing`,
:mod:`features`, :mod:`recurrent`, :mod:`dataset`, :mod:`cli`.
"""

from .audio_io import FeatureFile, Waveform, read_features, read_wav, write_features, write_wav
from .dsp import ASR, ENHANCEMENT, Spectrogram, StftConfig, istft, stft
from .features import featurize
from .masking import EnhancerSpec, Mask, analyze_distortion, distortion, enhance_utterance, irm, psm
from .mixing import MixtureSpec, measure_snr, mix, snr_scale

__version__ = "0.1.0"
