"""Splice-artifact analysis: spectral-leakage demos, a dynamic-range splice
detector, spliced-corpus generation with mitigation, and ROC/AUC/EER evaluation."""

__version__ = "0.1.0"

from .detector import (PRESETS, BandSelection, DetectionScore, DetectorConfig,
                       band_average, dynamic_range, preset, score_track)  # noqa: F401
from .dsp import (AudioBuffer, IirFilter, Spectrogram, WindowFunction,
                  apply_filter, design_butterworth, dft_magnitude, make_window,
                  stft_db)  # noqa: F401
from .metrics import EvalReport, LabeledScore, compute_auc, compute_eer, evaluate_corpus  # noqa: F401
