"""Corpus curation and subword-CTC decoding toolkit for Perso-Arabic ASR."""

from .audio_io import TARGET_SAMPLE_RATE
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "TARGET_SAMPLE_RATE", "__version__"]
