"""Deterministic tamper and channel simulation with replayable edit logs.

Every attack returns ``(AudioBuffer, EditLog)``. A log converts back to an
edit script (list of dicts) and :func:`apply_script` replays it, so an
attacked file can be regenerated byte for byte from the original.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .audio import SAMPLE_RATE, AudioBuffer, encode_pcm16, read_wav, require_rate
from .exceptions import OutOfBounds, RateMismatch, SilentSignal


@dataclass(frozen=True)
class Edit:
    kind: str
    position: int = 0
    length: int = 0
    parameter: Dict[str, Any] = field(default_factory=dict)

    def to_op(self) -> Dict[str, Any]:
        op = {"op": self.kind}
        if self.kind in ("cut", "insert"):
            op.update(start=self.position, length=self.length)
        op.update(self.parameter)
        return op


@dataclass(frozen=True)
class EditLog:
    operations: Tuple[Edit, ...] = ()

    def __add__(self, other: "EditLog") -> "EditLog":
        return EditLog(self.operations + other.operations)

    def to_script(self) -> List[Dict[str, Any]]:
        return [e.to_op() for e in self.operations]

    def to_json(self) -> str:
        return json.dumps({"version": 1, "operations": self.to_script()}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EditLog":
        doc = json.loads(text)
        ops = doc["operations"] if isinstance(doc, dict) else doc
        return cls(tuple(_edit_from_op(op) for op in ops))


def _edit_from_op(op: Dict[str, Any]) -> Edit:
    op = dict(op)
    kind = op.pop("op")
    return Edit(kind, int(op.pop("start", 0)), int(op.pop("length", 0)), op)


def _log(kind, position=0, length=0, **parameter) -> EditLog:
    return EditLog((Edit(kind, int(position), int(length), parameter),))


def cut(a: AudioBuffer, start: int, length: int) -> Tuple[AudioBuffer, EditLog]:
    """Remove ``length`` samples beginning at ``start``."""
    if start < 0 or length < 0 or start + length > len(a):
        raise OutOfBounds(f"cut [{start}, {start + length}) outside 0..{len(a)}")
    x = np.concatenate((a.samples[:start], a.samples[start + length:]))
    return AudioBuffer(x, a.sample_rate_hz), _log("cut", start, length)


def insert(a: AudioBuffer, start: int, segment: AudioBuffer,
           source: Optional[Dict[str, Any]] = None) -> Tuple[AudioBuffer, EditLog]:
    """Insert ``segment`` before sample ``start``.

    ``source`` describes how the segment was produced (see
    :func:`make_segment`) so the log can be replayed; without it the log
    records a digest of the segment's PCM instead.
    """
    if not 0 <= start <= len(a):
        raise OutOfBounds(f"insert position {start} outside 0..{len(a)}")
    if segment.sample_rate_hz != a.sample_rate_hz:
        raise RateMismatch(f"{segment.sample_rate_hz} Hz segment into {a.sample_rate_hz} Hz audio")
    if source is None:
        source = {"sha256": hashlib.sha256(encode_pcm16(segment.samples).tobytes()).hexdigest()}
    x = np.concatenate((a.samples[:start], segment.samples, a.samples[start:]))
    return AudioBuffer(x, a.sample_rate_hz), _log("insert", start, len(segment), **source)


def add_noise(a: AudioBuffer, snr_db: float, noise_seed: int) -> Tuple[AudioBuffer, EditLog]:
    """Add white Gaussian noise at exactly ``snr_db`` below the signal power.

    ``snr_db = inf`` is the identity. The result is clipped to [-1, 1].
    """
    if math.isinf(snr_db) and snr_db > 0:
        return a, _log("noise", snr_db="inf", seed=int(noise_seed))
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite or +inf")
    p_sig = float(np.mean(a.samples ** 2)) if len(a) else 0.0
    if p_sig == 0.0:
        raise SilentSignal("SNR is undefined for a silent signal")
    noise = np.random.default_rng(int(noise_seed)).standard_normal(len(a))
    noise *= math.sqrt(p_sig / 10 ** (snr_db / 10) / np.mean(noise ** 2))
    return (AudioBuffer.clipped(a.samples + noise, a.sample_rate_hz),
            _log("noise", snr_db=float(snr_db), seed=int(noise_seed)))


def telephony_taps() -> np.ndarray:
    """The shipped 129-tap 300-3400 Hz band-pass coefficients."""
    text = resources.files("speechmark").joinpath("data/telephony_bandpass.txt").read_text()
    return np.array([float(v) for v in text.split("\n") if v and not v.startswith("#")])


def bandpass_gsm(a: AudioBuffer) -> Tuple[AudioBuffer, EditLog]:
    """Telephony band-pass (300-3400 Hz), group delay compensated."""
    require_rate(a, SAMPLE_RATE)
    h = telephony_taps()
    if len(a) == 0:
        return a, _log("bandpass")
    y = np.convolve(a.samples, h)[(h.size - 1) // 2:][: len(a)]
    return AudioBuffer.clipped(y, a.sample_rate_hz), _log("bandpass")


def gain(a: AudioBuffer, g_db: float) -> Tuple[AudioBuffer, EditLog]:
    """Scale by ``g_db`` decibels, saturating at full scale."""
    if abs(g_db) > 60:
        raise OutOfBounds(f"gain {g_db} dB outside +/-60 dB")
    y = a.samples * 10 ** (g_db / 20)
    return AudioBuffer.clipped(y, a.sample_rate_hz), _log("gain", db=float(g_db))


def resample(a: AudioBuffer, factor) -> Tuple[AudioBuffer, EditLog]:
    """Clock-drift simulation: read the signal at ``factor`` times the nominal
    rate (linear interpolation) and relabel the result at the original rate.

    ``factor`` may be a float, a :class:`~fractions.Fraction` or a string
    such as ``"101/100"``; it must lie in [0.9, 1.1].
    """
    f = Fraction(str(factor)) if not isinstance(factor, Fraction) else factor
    if not Fraction(9, 10) <= f <= Fraction(11, 10):
        raise OutOfBounds(f"resample factor {factor} outside [0.9, 1.1]")
    n = len(a)
    if n < 2:
        return a, _log("resample", factor=str(f))
    m = int((n - 1) / f) + 1
    t = np.arange(m) * float(f)
    y = np.interp(t, np.arange(n), a.samples)
    return AudioBuffer.clipped(y, a.sample_rate_hz), _log("resample", factor=str(f))


def make_segment(source: Dict[str, Any], length: int, current: AudioBuffer,
                 base_dir: Optional[Path] = None) -> AudioBuffer:
    """Build an insertion segment from a script description.

    Kinds: ``silence``; ``noise`` (``seed``, ``level_dbfs``); ``tone``
    (``freq_hz``, ``level_dbfs``); ``self`` (copy of the current buffer at
    ``offset``); ``wav`` (``path``, optional ``offset``).
    """
    kind = source.get("source", "silence")
    fs = current.sample_rate_hz
    if kind == "silence":
        return AudioBuffer(np.zeros(length), fs)
    if kind == "noise":
        rng = np.random.default_rng(int(source.get("seed", 0)))
        amp = 10 ** (float(source.get("level_dbfs", -30.0)) / 20)
        return AudioBuffer.clipped(amp * rng.standard_normal(length), fs)
    if kind == "tone":
        amp = 10 ** (float(source.get("level_dbfs", -20.0)) / 20) * math.sqrt(2)
        t = np.arange(length) / fs
        return AudioBuffer.clipped(amp * np.sin(2 * np.pi * float(source.get("freq_hz", 1000.0)) * t), fs)
    if kind in ("self", "wav"):
        if kind == "self":
            src = current
        else:
            path = Path(source["path"])
            src = read_wav(path if base_dir is None or path.is_absolute() else base_dir / path)
        off = int(source.get("offset", 0))
        if off < 0 or off + length > len(src):
            raise OutOfBounds(f"segment [{off}, {off + length}) outside source of {len(src)} samples")
        return AudioBuffer(src.samples[off:off + length], src.sample_rate_hz)
    raise ValueError(f"unknown insert source {kind!r}")


def apply_script(a: AudioBuffer, script, base_dir: Optional[Path] = None) -> Tuple[AudioBuffer, EditLog]:
    """Apply a list of edit operations in order; returns the combined log."""
    log = EditLog()
    for op in script:
        op = dict(op)
        kind = op.pop("op")
        if kind == "cut":
            a, entry = cut(a, int(op["start"]), int(op["length"]))
        elif kind == "insert":
            start, length = int(op.pop("start")), int(op.pop("length"))
            seg = make_segment(op, length, a, base_dir)
            a, entry = insert(a, start, seg, source=op)
        elif kind == "noise":
            snr = op["snr_db"]
            a, entry = add_noise(a, float("inf") if snr == "inf" else float(snr), int(op.get("seed", 0)))
        elif kind == "bandpass":
            a, entry = bandpass_gsm(a)
        elif kind == "gain":
            a, entry = gain(a, float(op["db"]))
        elif kind == "resample":
            a, entry = resample(a, op["factor"])
        else:
            raise ValueError(f"unknown edit op {kind!r}")
        log = log + entry
    return a, log
