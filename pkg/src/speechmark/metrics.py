"""Transparency and feature-impact measures, emitted as plot-ready tables.

All block-wise measures use the same 20 ms blocks as the embedder and the
same activity gate: a block counts as active when the *reference* power
(mean square, 0 dB = full-scale square wave) is at least ``gate_dbfs``.
Pause blocks carry only background noise and the watermark floor; their
LPC envelopes describe noise, not speech, so they are left out.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import welch

from .audio import SAMPLE_RATE, AudioBuffer
from .exceptions import EmptyResult, LengthMismatch, NoActiveBlocks, OutOfBounds
from .lpc import (BLOCK_LEN, DEFAULT_LPCC_ORDER, DEFAULT_ORDER, LSD_POINTS, _response_db,
                  analyze_blocks, lpcc_from_coeffs)

ACTIVE_GATE_DBFS = -60.0
PSD_NPERSEG = 256

PSD_COLUMNS = ("frequency_hz", "power_db")
BLOCK_COLUMNS = ("block", "start_sample", "ref_power_dbfs", "segsnr_db", "lsd_db", "lpcc_dist")


def _samples(a) -> np.ndarray:
    return a.samples if isinstance(a, AudioBuffer) else np.asarray(a, dtype=np.float64)


def _pair(reference, test) -> Tuple[np.ndarray, np.ndarray]:
    r, t = _samples(reference), _samples(test)
    if r.shape != t.shape:
        raise LengthMismatch(f"reference has {r.size} samples, test has {t.size}")
    return r, t


def block_power_db(x, block: int = BLOCK_LEN) -> np.ndarray:
    """Mean-square power of each complete block in dB (-inf for digital silence)."""
    x = _samples(x)
    nb = x.size // block
    p = np.mean(x[: nb * block].reshape(nb, block) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p)


def active_blocks(reference, block: int = BLOCK_LEN, gate_dbfs: float = ACTIVE_GATE_DBFS) -> np.ndarray:
    """Boolean mask of complete blocks whose power reaches ``gate_dbfs``."""
    return block_power_db(reference, block) >= gate_dbfs


def segmental_snr(reference, test, block: int = BLOCK_LEN,
                  gate_dbfs: float = ACTIVE_GATE_DBFS) -> float:
    """Mean per-block ``10 log10(sum ref^2 / sum (ref - test)^2)`` over active blocks.

    Not symmetric: ``reference`` decides which blocks are active.
    Blocks where ``test`` equals ``reference`` exactly have no distortion
    to measure and are skipped; if every active block is untouched the
    result is ``inf``.

    Raises
    ------
    LengthMismatch
        If the inputs differ in length.
    NoActiveBlocks
        If no complete block of ``reference`` reaches the gate.
    """
    if block < 1:
        raise ValueError("block must be >= 1")
    r, t = _pair(reference, test)
    nb = r.size // block
    rb = r[: nb * block].reshape(nb, block)
    db = (r - t)[: nb * block].reshape(nb, block)
    act = active_blocks(r, block, gate_dbfs)
    if not act.any():
        raise NoActiveBlocks(f"no block of the reference reaches {gate_dbfs} dBFS")
    sig = np.sum(rb[act] ** 2, axis=1)
    err = np.sum(db[act] ** 2, axis=1)
    touched = err > 0
    if not touched.any():
        return float("inf")
    return float(np.mean(10.0 * np.log10(sig[touched] / err[touched])))


def _block_models(reference, test, block, order, gate_dbfs):
    r, t = _pair(reference, test)
    if r.size < block:
        raise EmptyResult(f"input shorter than one {block}-sample block")
    keep = np.ones(r.size // block, bool) if gate_dbfs is None else active_blocks(r, block, gate_dbfs)
    if not keep.any():
        raise EmptyResult("no active blocks to compare")
    a1, g1 = analyze_blocks(r, block, order)
    a2, g2 = analyze_blocks(t, block, order)
    return a1[keep], g1[keep], a2[keep], g2[keep]


def envelope_impact(reference, test, *, block: int = BLOCK_LEN, order: int = DEFAULT_ORDER,
                    gate_dbfs: Optional[float] = ACTIVE_GATE_DBFS,
                    n_points: int = LSD_POINTS) -> np.ndarray:
    """Per-block log-spectral distance (dB) between the two LPC envelopes.

    One value per active block (all blocks with ``gate_dbfs=None``).
    """
    a1, g1, a2, g2 = _block_models(reference, test, block, order, gate_dbfs)
    d = _response_db(a1, g1, n_points) - _response_db(a2, g2, n_points)
    return np.sqrt(np.mean(d * d, axis=1))


def lpcc_distances(reference, test, *, block: int = BLOCK_LEN, order: int = DEFAULT_ORDER,
                   q: int = DEFAULT_LPCC_ORDER,
                   gate_dbfs: Optional[float] = ACTIVE_GATE_DBFS) -> np.ndarray:
    """Per-block Euclidean distance between LPCC vectors (c1..cq)."""
    a1, _, a2, _ = _block_models(reference, test, block, order, gate_dbfs)
    return np.linalg.norm(lpcc_from_coeffs(a1, q) - lpcc_from_coeffs(a2, q), axis=1)


def lpcc_impact(reference, test, **kwargs) -> float:
    """Mean per-block LPCC distance; see :func:`lpcc_distances`."""
    return float(np.mean(lpcc_distances(reference, test, **kwargs)))


def psd(a, segment: Optional[Tuple[int, int]] = None, nperseg: int = PSD_NPERSEG):
    """Welch PSD of ``a[start:stop]``: Hann windows, 50 % overlap.

    Returns ``(freqs_hz, power_db)``; power is a one-sided density in
    dB re 1/Hz, so ``sum(10**(power_db/10)) * df`` is the mean-square power.
    """
    x = _samples(a)
    fs = a.sample_rate_hz if isinstance(a, AudioBuffer) else SAMPLE_RATE
    start, stop = (0, x.size) if segment is None else (int(segment[0]), int(segment[1]))
    if not 0 <= start < stop <= x.size:
        raise OutOfBounds(f"segment [{start}, {stop}) outside 0..{x.size}")
    if stop - start < nperseg:
        raise OutOfBounds(f"segment shorter than {nperseg} samples")
    f, p = welch(x[start:stop], fs=fs, window="hann", nperseg=nperseg,
                 noverlap=nperseg // 2, detrend=False, scaling="density")
    with np.errstate(divide="ignore"):
        return f, 10.0 * np.log10(p)


def psd_rows(a, segment=None) -> List[Tuple[float, float]]:
    f, p = psd(a, segment)
    return list(zip(f.tolist(), p.tolist()))


def block_table(reference, test, block: int = BLOCK_LEN, order: int = DEFAULT_ORDER,
                q: int = DEFAULT_LPCC_ORDER) -> List[tuple]:
    """Per-block rows for every complete block (gate not applied).

    segsnr is ``inf`` for untouched blocks.
    """
    r, t = _pair(reference, test)
    nb = r.size // block
    if nb == 0:
        raise EmptyResult(f"input shorter than one {block}-sample block")
    pw = block_power_db(r, block)
    sig = np.sum(r[: nb * block].reshape(nb, block) ** 2, axis=1)
    err = np.sum((r - t)[: nb * block].reshape(nb, block) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = np.where(err > 0, 10.0 * np.log10(sig / np.where(err > 0, err, 1.0)), np.inf)
    lsd = envelope_impact(r, t, block=block, order=order, gate_dbfs=None)
    lpcc = lpcc_distances(r, t, block=block, order=order, q=q, gate_dbfs=None)
    return [(b, b * block, float(pw[b]), float(snr[b]), float(lsd[b]), float(lpcc[b]))
            for b in range(nb)]


def to_csv(rows: Iterable[Sequence], columns: Sequence[str], path=None) -> str:
    """Comma-separated text with a header row; written to ``path`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
