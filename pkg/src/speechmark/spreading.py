"""Keyed chip generation, BPSK spreading/despreading and sync acquisition.

One chip per audio sample. Every one-second frame draws its own chip
stream from a keyed counter-mode PRF (BLAKE2b keyed with the 256-bit
seed, message = frame index || block counter), so each second can be
decoded on its own and chips never repeat across frames.
"""

from __future__ import annotations

import hashlib
import re
import secrets
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

import numpy as np
from scipy import fft as sfft

from .exceptions import LengthMismatch, WindowTooSmall
from .payload import SYNC_BITS, sync_bits

SPREADING_FACTOR = 100
TAU_SYNC = 0.25
SYNC_CHIPS = SYNC_BITS * SPREADING_FACTOR

_DIGEST_BYTES = 64
_PERSON = b"speechmark-chip1"
_KEY_FILE_RE = re.compile(r"[0-9a-f]{64}")


@dataclass(frozen=True)
class WatermarkKey:
    """256-bit secret seed that selects the chip sequences."""

    seed: bytes

    def __post_init__(self):
        if not isinstance(self.seed, (bytes, bytearray)) or len(self.seed) != 32:
            raise ValueError("seed must be exactly 32 bytes")
        object.__setattr__(self, "seed", bytes(self.seed))

    def __repr__(self):
        # never print the secret itself
        return f"WatermarkKey(<{hashlib.sha256(self.seed).hexdigest()[:8]}>)"

    @classmethod
    def generate(cls) -> "WatermarkKey":
        return cls(secrets.token_bytes(32))

    @classmethod
    def from_hex(cls, text: str) -> "WatermarkKey":
        if not _KEY_FILE_RE.fullmatch(text):
            raise ValueError("key must be 64 lowercase hex characters")
        return cls(bytes.fromhex(text))

    def hex(self) -> str:
        return self.seed.hex()

    @classmethod
    def load(cls, path) -> "WatermarkKey":
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
        if text.endswith("\n"):
            text = text[:-1]
        return cls.from_hex(text)

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.hex() + "\n")


@dataclass(frozen=True)
class ChipStream:
    chips: np.ndarray
    frame_index: int

    def __len__(self):
        return self.chips.size


class SyncHit(NamedTuple):
    offset: int
    score: float
    frame_index: int


def _prf_bits(key: WatermarkKey, frame_index: int, n: int) -> np.ndarray:
    nblocks = -(-n // (8 * _DIGEST_BYTES))
    prefix = int(frame_index).to_bytes(8, "big", signed=True)
    buf = b"".join(
        hashlib.blake2b(prefix + c.to_bytes(8, "big"), key=key.seed,
                        digest_size=_DIGEST_BYTES, person=_PERSON).digest()
        for c in range(nblocks)
    )
    return np.unpackbits(np.frombuffer(buf, dtype=np.uint8))[:n]


def chips_for_frame(key: WatermarkKey, frame_index: int, n: int) -> ChipStream:
    """Deterministic +/-1 chips for one frame (bit 1 -> +1, bit 0 -> -1).

    Streams are prefix-consistent: the first m chips do not depend on n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    bits = _prf_bits(key, frame_index, n)
    chips = (2 * bits.astype(np.int8) - 1)
    chips.setflags(write=False)
    return ChipStream(chips, int(frame_index))


def _chip_array(chips) -> np.ndarray:
    return chips.chips if isinstance(chips, ChipStream) else np.asarray(chips)


def spread(bits, chips, spreading_factor: int = SPREADING_FACTOR) -> np.ndarray:
    """BPSK-modulate ``bits`` onto ``chips``: out[j] = chip[j] * (+1/-1)."""
    bits = np.asarray(bits).reshape(-1)
    c = _chip_array(chips)
    if spreading_factor < 1 or c.size != bits.size * spreading_factor:
        raise LengthMismatch(
            f"{bits.size} bits x {spreading_factor} != {c.size} chips")
    symbols = np.where(bits > 0, 1, -1).astype(np.int8)
    return c * np.repeat(symbols, spreading_factor)


def despread(received, chips, spreading_factor: int = SPREADING_FACTOR):
    """Correlation receiver. Returns (bits, soft); a soft value of 0 decodes as 0."""
    x = np.asarray(received, dtype=np.float64).reshape(-1)
    c = _chip_array(chips)
    if spreading_factor < 1 or x.size != c.size or x.size % spreading_factor:
        raise LengthMismatch(
            f"received {x.size}, chips {c.size}, factor {spreading_factor}")
    soft = (x * c).reshape(-1, spreading_factor).sum(axis=1) / spreading_factor
    return (soft > 0).astype(np.uint8), soft


def sync_pattern(key: WatermarkKey, frame_index: int) -> np.ndarray:
    """The chip waveform of the sync word of frame ``frame_index``."""
    chips = chips_for_frame(key, frame_index, SYNC_CHIPS)
    return spread(sync_bits(), chips).astype(np.float64)


def sync_search(received, key: WatermarkKey, frame_index_hint: int,
                search_radius: int, *, expected_start: int = 0,
                index_radius: int = 0,
                frame_indices: Optional[Iterable[int]] = None) -> SyncHit:
    """Find the sync word nearest ``expected_start`` by normalized correlation.

    Candidate starts are ``expected_start + offset`` for offsets in
    ``[-search_radius, search_radius]`` that leave room for the whole sync
    pattern. Frame indices ``hint +/- index_radius`` (non-negative) are tried
    unless ``frame_indices`` is given. Ties prefer the smallest ``|offset|``,
    then the negative offset, then the index closest to the hint.
    """
    x = np.asarray(received, dtype=np.float64).reshape(-1)
    L = SYNC_CHIPS
    lo = max(expected_start - search_radius, 0)
    hi = min(expected_start + search_radius, x.size - L)
    if hi < lo:
        raise WindowTooSmall(
            f"no candidate offset fits a {L}-chip sync pattern in {x.size} samples")
    if frame_indices is None:
        frame_indices = range(max(frame_index_hint - index_radius, 0),
                              frame_index_hint + index_radius + 1)

    seg = x[lo:hi + L]
    n_cand = hi - lo + 1
    csum = np.concatenate(([0.0], np.cumsum(seg * seg)))
    energy = csum[L:L + n_cand] - csum[:n_cand]
    denom = np.sqrt(np.maximum(energy, 0.0) * L)
    denom[denom == 0] = np.inf
    nfft = sfft.next_fast_len(seg.size + L - 1, real=True)
    seg_f = sfft.rfft(seg, nfft)
    offsets = np.arange(lo, hi + 1) - expected_start
    tie = np.abs(offsets) * 2 + (offsets > 0)

    best = None
    for idx in frame_indices:
        p = sync_pattern(key, idx)
        corr = sfft.irfft(seg_f * sfft.rfft(p[::-1], nfft), nfft)[L - 1:L - 1 + n_cand]
        score = np.clip(corr / denom, -1.0, 1.0)
        top = score.max()
        j = int(np.flatnonzero(score == top)[np.argmin(tie[score == top])])
        cand = (-float(top), int(tie[j]), abs(idx - frame_index_hint), idx)
        if best is None or cand < best[0]:
            best = (cand, SyncHit(int(offsets[j]), float(top), int(idx)))
    if best is None:
        raise WindowTooSmall("no frame index to search")
    return best[1]
