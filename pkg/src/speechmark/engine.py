"""Embedding and extraction pipelines.

Embedding, per complete one-second frame ``i``:

1. bits  = encode_frame(start_timestamp + i, flags)
2. chips = chips_for_frame(key, i, 8000); raw = spread(bits, chips, 100)
3. each 20 ms block of ``raw`` is filtered through ``1/A(z/gamma)``, with
   ``A`` the LPC polynomial of the co-located host block, so watermark
   energy sits under the formants of the speech it is added to
4. each shaped block is scaled to ``max(P_host * 10^(wsr/10), P_floor)``
5. output = clip(host + watermark)

Extraction whitens the received signal with block LPC estimated from the
received signal itself, then tracks frames one second at a time with
:func:`~speechmark.spreading.sync_search`, despreads and decodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional

import numpy as np
from scipy.signal import lfilter, lfiltic

from .audio import SAMPLE_RATE, AudioBuffer, require_rate
from .exceptions import ConfigError, TooShort, WindowTooSmall
from .lpc import analyze_blocks
from .payload import FRAME_BITS, FrameStatus, PayloadFrame, decode_frame, encode_frame
from .spreading import (SPREADING_FACTOR, TAU_SYNC, WatermarkKey, chips_for_frame,
                        despread, spread, sync_search)

FRAME_LEN = FRAME_BITS * SPREADING_FACTOR  # one second at 8 kHz
# the whitened residual of voiced speech is spiky; clipping it before
# correlation trims the heavy tails that cause most bit errors
RESIDUAL_LIMIT = 1.5


@dataclass(frozen=True)
class EmbedConfig:
    """Embedding parameters; the extraction side reads the same object.

    ``shaping=False`` replaces the LPC shaping filter with a white
    watermark of identical per-block power (comparison baseline only).
    ``search_radius`` and ``index_radius`` bound the receiver's search in
    samples and in frame indices around the tracked position.
    """

    wsr_db: float = -15.0
    gamma: float = 0.90
    floor_dbfs: float = -45.0
    lpc_order: int = 10
    block_len: int = 160
    start_timestamp: int = 0
    flags: int = 0
    shaping: bool = True
    search_radius: int = 4000
    index_radius: int = 4

    def __post_init__(self):
        if not -25.0 <= self.wsr_db <= -10.0:
            raise ConfigError(f"wsr_db {self.wsr_db} outside [-25, -10] dB")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.block_len < 1 or FRAME_LEN % self.block_len:
            raise ConfigError(f"block_len must divide {FRAME_LEN}")
        if self.lpc_order < 1 or self.lpc_order >= self.block_len:
            raise ConfigError("lpc_order must be in [1, block_len)")
        if not 0 <= self.flags < 256:
            raise ConfigError("flags must be an 8-bit value")
        if not 0 <= self.start_timestamp < 2**32:
            raise ConfigError("start_timestamp must fit in 32 bits")
        if not 0 <= self.search_radius < FRAME_LEN or self.index_radius < 0:
            raise ConfigError("search_radius must be in [0, 8000) and index_radius >= 0")

    def with_(self, **changes) -> "EmbedConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class FrameRecord:
    frame_start_sample: int
    payload: PayloadFrame
    sync_score: float
    resync_offset: int
    frame_index: int

    @property
    def valid(self) -> bool:
        return self.payload.valid


@dataclass(frozen=True)
class ExtractResult:
    frames: List[FrameRecord] = field(default_factory=list)
    total_samples: int = 0

    @property
    def valid_frames(self) -> List[FrameRecord]:
        return [f for f in self.frames if f.valid]

    @property
    def timestamps(self) -> List[int]:
        return [f.payload.timestamp for f in self.valid_frames]


def _block_power(x: np.ndarray, block_len: int) -> np.ndarray:
    nb = x.size // block_len
    return np.mean(x[: nb * block_len].reshape(nb, block_len) ** 2, axis=1)


def watermark_signal(host, key: WatermarkKey, cfg: EmbedConfig = EmbedConfig()) -> np.ndarray:
    """The additive watermark for every complete frame of ``host``.

    Returned length is ``n_frames * 8000``. Processing is strictly causal
    per block: block ``b`` only uses host samples of block ``b``.
    """
    x = np.asarray(host.samples if isinstance(host, AudioBuffer) else host, dtype=np.float64)
    n_frames = x.size // FRAME_LEN
    n = n_frames * FRAME_LEN
    bl, p = cfg.block_len, cfg.lpc_order
    target = np.maximum(_block_power(x[:n], bl) * 10.0 ** (cfg.wsr_db / 10.0),
                        10.0 ** (cfg.floor_dbfs / 10.0))
    coeffs, _ = analyze_blocks(x[:n], bl, p)
    bw = cfg.gamma ** np.arange(1, p + 1)

    out = np.empty(n)
    per_frame = FRAME_LEN // bl
    for i in range(n_frames):
        bits = encode_frame(cfg.start_timestamp + i, cfg.flags)
        raw = spread(bits, chips_for_frame(key, i, FRAME_LEN)).astype(np.float64)
        past = np.zeros(p)  # most recent output first; reset every frame
        for j in range(per_frame):
            b = i * per_frame + j
            seg = raw[j * bl:(j + 1) * bl]
            if cfg.shaping:
                den = np.concatenate(([1.0], coeffs[b] * bw))
                seg, _ = lfilter([1.0], den, seg, zi=lfiltic([1.0], den, past))
                past = seg[::-1][:p] if bl >= p else np.concatenate((seg[::-1], past))[:p]
            power = np.mean(seg * seg)
            gain = np.sqrt(target[b] / power) if power > 0 else 0.0
            out[b * bl:(b + 1) * bl] = gain * seg
    return out


def embed(host: AudioBuffer, key: WatermarkKey, cfg: EmbedConfig = EmbedConfig()) -> AudioBuffer:
    """Watermark every complete second of ``host``; a trailing partial
    second is passed through untouched."""
    require_rate(host, SAMPLE_RATE)
    if len(host) < FRAME_LEN:
        raise TooShort(f"need at least {FRAME_LEN} samples, got {len(host)}")
    w = watermark_signal(host, key, cfg)
    y = host.samples.copy()
    y[: w.size] += w
    return AudioBuffer.clipped(y, host.sample_rate_hz)


def whiten(x, block_len: int = 160, order: int = 10, limit=None) -> np.ndarray:
    """Block LPC residual of ``x`` normalized to unit RMS per block.

    Each output sample is ``e(n) = x(n) + sum_k a_k x(n-k)`` using the
    coefficients of its own block; trailing samples reuse the last block.
    With ``limit`` set, the normalized residual is clipped to +/- limit.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    coeffs, _ = analyze_blocks(x, block_len, order)
    if coeffs.shape[0] == 0:
        coeffs = np.zeros((1, order))
    blk = np.minimum(np.arange(x.size) // block_len, coeffs.shape[0] - 1)
    e = x.copy()
    for k in range(1, order + 1):
        e[k:] += coeffs[blk[k:], k - 1] * x[:-k]
    # unit-RMS normalization per block (trailing partial block included)
    nb = -(-x.size // block_len)
    padded = np.zeros(nb * block_len)
    padded[: e.size] = e * e
    counts = np.full(nb, block_len)
    counts[-1] = x.size - (nb - 1) * block_len
    rms = np.sqrt(padded.reshape(nb, block_len).sum(axis=1) / counts)
    rms[rms == 0] = 1.0
    e /= np.repeat(rms, block_len)[: e.size]
    if limit is not None:
        np.clip(e, -limit, limit, out=e)
    return e


def extract(signal: AudioBuffer, key: WatermarkKey, cfg: EmbedConfig = EmbedConfig(),
            acquire: Optional[Iterable[int]] = None) -> ExtractResult:
    """Recover the frame sequence from a (possibly edited) signal.

    At each expected frame start the receiver searches ``+/- search_radius``
    samples and ``+/- index_radius`` frame indices. After a valid frame the
    next expectation is ``found_start + 8000`` and index ``+ 1``; after a
    failure both advance by one nominal frame.

    ``acquire`` lists frame indices to try until the first valid frame is
    found, for excerpts that do not start at frame 0 (e.g. ``range(3600)``
    for anything cut from the first hour).
    """
    require_rate(signal, SAMPLE_RATE)
    x = signal.samples
    e = whiten(x, cfg.block_len, cfg.lpc_order, RESIDUAL_LIMIT)
    acquire = None if acquire is None else list(acquire)
    locked = False
    records: List[FrameRecord] = []
    pos, hint = 0, 0
    while pos + FRAME_LEN <= x.size:
        try:
            hit = sync_search(e, key, hint, cfg.search_radius, expected_start=pos,
                              index_radius=cfg.index_radius,
                              frame_indices=None if locked or not acquire else acquire)
        except WindowTooSmall:
            break
        start = pos + hit.offset
        if hit.score >= TAU_SYNC and start + FRAME_LEN <= x.size:
            chips = chips_for_frame(key, hit.frame_index, FRAME_LEN)
            bits, _ = despread(e[start:start + FRAME_LEN], chips)
            frame = decode_frame(bits)
            if frame.valid:
                records.append(FrameRecord(start, frame, hit.score, hit.offset, hit.frame_index))
                pos, hint, locked = start + FRAME_LEN, hit.frame_index + 1, True
                continue
        else:
            frame = PayloadFrame.invalid(FrameStatus.NO_SYNC)
        records.append(FrameRecord(pos, frame, hit.score, hit.offset, hit.frame_index))
        pos, hint = pos + FRAME_LEN, hint + 1
    return ExtractResult(records, x.size)
