"""Keyed spread-spectrum timestamp watermarking for 8 kHz speech."""

from .audio import AudioBuffer, read_wav, write_wav
from .engine import EmbedConfig, ExtractResult, embed, extract
from .estimator import SpeechWatermarker
from .forensic import TamperReport, Verdict, analyze
from .spreading import WatermarkKey

__all__ = ["AudioBuffer", "EmbedConfig", "ExtractResult", "SpeechWatermarker", "TamperReport",
           "Verdict", "WatermarkKey", "analyze", "embed", "extract", "read_wav", "write_wav"]
__version__ = "0.1.0"
