"""Mono 16-bit PCM WAV I/O and the in-memory :class:`AudioBuffer`."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from os import PathLike
from typing import Union

import numpy as np

from .exceptions import BadSampleRate, IoFailure, NotWav, UnsupportedFormat

SAMPLE_RATE = 8000
PCM_SCALE = 32768.0

PathType = Union[str, "PathLike[str]"]


@dataclass(frozen=True)
class AudioBuffer:
    """Normalized mono samples in [-1, 1] plus their sample rate.

    The sample array is copied on construction and made read-only, so a
    buffer can be shared freely between threads and pipeline stages.
    """

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if x.size and not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if x.size and (x.max() > 1.0 or x.min() < -1.0):
            raise ValueError("samples must lie in [-1, 1]; clip before constructing")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @classmethod
    def clipped(cls, samples, sample_rate_hz: int = SAMPLE_RATE) -> "AudioBuffer":
        """Build a buffer, saturating out-of-range values to [-1, 1]."""
        return cls(np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0), sample_rate_hz)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def __eq__(self, other):
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return self.sample_rate_hz == other.sample_rate_hz and np.array_equal(self.samples, other.samples)

    __hash__ = None


def require_rate(buf: AudioBuffer, rate: int = SAMPLE_RATE) -> None:
    if buf.sample_rate_hz != rate:
        raise BadSampleRate(f"expected {rate} Hz, got {buf.sample_rate_hz} Hz")


def encode_pcm16(samples: np.ndarray) -> np.ndarray:
    """Quantize normalized samples to int16, saturating at the rails."""
    q = np.rint(np.asarray(samples, dtype=np.float64) * PCM_SCALE)
    return np.clip(q, -32768, 32767).astype("<i2")


def decode_pcm16(raw: np.ndarray) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / PCM_SCALE


def read_wav(path: PathType, strict: bool = False) -> AudioBuffer:
    """Read a RIFF/WAVE mono PCM16 file.

    With ``strict=True`` any rate other than 8000 Hz raises
    :class:`BadSampleRate`. Extra chunks (LIST, fact, ...) are skipped.
    """
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
            raise NotWav(f"{path}: missing RIFF/WAVE header")
        fh.seek(0)
        try:
            with wave.open(fh, "rb") as w:
                channels = w.getnchannels()
                width = w.getsampwidth()
                rate = w.getframerate()
                raw = w.readframes(w.getnframes())
        except (wave.Error, EOFError) as exc:
            raise UnsupportedFormat(f"{path}: {exc}") from exc
    if channels != 1 or width != 2:
        raise UnsupportedFormat(f"{path}: need PCM16 mono, got {channels} ch x {8 * width} bit")
    if strict and rate != SAMPLE_RATE:
        raise BadSampleRate(f"{path}: {rate} Hz (expected {SAMPLE_RATE})")
    return AudioBuffer(decode_pcm16(np.frombuffer(raw, dtype="<i2")), rate)


def write_wav(buf: AudioBuffer, path: PathType) -> None:
    """Write ``buf`` as a minimal fmt+data PCM16 mono WAV."""
    pcm = encode_pcm16(buf.samples)
    try:
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(buf.sample_rate_hz)
            w.writeframes(pcm.tobytes())
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
