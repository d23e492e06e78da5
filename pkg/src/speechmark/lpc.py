"""Autocorrelation LPC analysis, LPC cepstrum and envelope distances.

Sign convention throughout: ``A(z) = 1 + sum_i a_i z^-i`` and the
prediction residual is ``e(n) = s(n) + sum_i a_i s(n-i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import FrameTooShort, SingularAutocorrelation

DEFAULT_ORDER = 10
DEFAULT_LPCC_ORDER = 12
BLOCK_LEN = 160
FLAT_GAIN = 1e-9
LSD_POINTS = 512


@dataclass(frozen=True)
class LpcModel:
    """All-pole model of one analysis frame.

    ``coeffs`` holds a_1..a_p (no leading one), ``gain`` is the square
    root of the final prediction error and ``reflection`` the PARCOR
    coefficients k_1..k_p with ``k_1 = r1/r0`` for a single pole.
    """

    coeffs: np.ndarray
    gain: float
    reflection: np.ndarray

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @property
    def polynomial(self) -> np.ndarray:
        """[1, a_1, ..., a_p], ready for ``scipy.signal.lfilter``."""
        return np.concatenate(([1.0], self.coeffs))

    @classmethod
    def flat(cls, order: int = DEFAULT_ORDER, gain: float = FLAT_GAIN) -> "LpcModel":
        return cls(np.zeros(order), float(gain), np.zeros(order))


def autocorrelate(frame, max_lag: int) -> np.ndarray:
    """Biased (unnormalized) autocorrelation r[0..max_lag] of ``frame``."""
    x = np.asarray(frame, dtype=np.float64)
    if max_lag < 0 or x.size < max_lag + 1:
        raise FrameTooShort(f"need at least {max_lag + 1} samples, got {x.size}")
    n = x.size
    return np.array([np.dot(x[: n - k], x[k:]) for k in range(max_lag + 1)])


def _levinson_rows(r: np.ndarray, p: int):
    """Levinson-Durbin on each row of ``r`` (shape (m, >= p+1)).

    Returns (a, err, k, ok) where ``ok`` flags rows whose recursion stayed
    strictly inside the unit circle. Rows that fail keep partial results.
    """
    m = r.shape[0]
    a = np.zeros((m, p))
    k = np.zeros((m, p))
    err = r[:, 0].copy()
    ok = err > 0
    safe_err = np.where(ok, err, 1.0)
    for i in range(p):
        acc = r[:, i + 1] + np.einsum("mj,mj->m", a[:, :i], r[:, i:0:-1])
        ki = acc / safe_err
        ok &= np.abs(ki) < 1.0
        ki = np.where(ok, ki, 0.0)
        k[:, i] = ki
        if i:
            a[:, :i] = a[:, :i] - ki[:, None] * a[:, i - 1 :: -1]
        a[:, i] = -ki
        err = err * (1.0 - ki * ki)
        safe_err = np.where(ok & (err > 0), err, 1.0)
    return a, err, k, ok


def levinson(r, p: int = DEFAULT_ORDER) -> LpcModel:
    """Solve the order-``p`` normal equations for autocorrelation ``r``.

    Raises :class:`SingularAutocorrelation` when ``r[0] <= 0`` or the
    recursion reaches a reflection coefficient of magnitude >= 1.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1 or r.size < p + 1:
        raise ValueError(f"need r[0..{p}], got {r.size} lags")
    if not r[0] > 0:
        raise SingularAutocorrelation("r[0] must be positive")
    a, err, k, ok = _levinson_rows(r[None, : p + 1], p)
    if not ok[0]:
        raise SingularAutocorrelation("recursion left the unit circle")
    return LpcModel(a[0], float(np.sqrt(max(err[0], 0.0))), k[0])


def analyze_frame(frame, order: int = DEFAULT_ORDER) -> LpcModel:
    """Hamming-windowed LPC of one frame; silence yields the flat model."""
    x = np.asarray(frame, dtype=np.float64)
    r = autocorrelate(x * np.hamming(x.size), order)
    try:
        return levinson(r, order)
    except SingularAutocorrelation:
        return LpcModel.flat(order)


def analyze_blocks(x, block_len: int = BLOCK_LEN, order: int = DEFAULT_ORDER):
    """Vectorized :func:`analyze_frame` over consecutive non-overlapping blocks.

    Returns ``(coeffs, gains)`` with shapes (n_blocks, order) and
    (n_blocks,). A trailing partial block is ignored.
    """
    x = np.asarray(x, dtype=np.float64)
    nb = x.size // block_len
    if nb == 0:
        return np.zeros((0, order)), np.zeros(0)
    frames = x[: nb * block_len].reshape(nb, block_len) * np.hamming(block_len)
    r = np.stack([np.einsum("ij,ij->i", frames[:, : block_len - lag], frames[:, lag:])
                  for lag in range(order + 1)], axis=1)
    a, err, _, ok = _levinson_rows(r, order)
    a[~ok] = 0.0
    gains = np.where(ok, np.sqrt(np.maximum(err, 0.0)), FLAT_GAIN)
    return a, gains


def lpc_to_lpcc(model: LpcModel, q: int = DEFAULT_LPCC_ORDER) -> np.ndarray:
    """Cepstral coefficients c_1..c_q of the all-pole filter 1/A(z)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    return lpcc_from_coeffs(model.coeffs, q)


def lpcc_from_coeffs(a, q: int = DEFAULT_LPCC_ORDER) -> np.ndarray:
    """Same recursion as :func:`lpc_to_lpcc`; rows of a 2-D ``a`` are independent."""
    a = np.asarray(a, dtype=np.float64)
    squeeze = a.ndim == 1
    a = np.atleast_2d(a)
    p = a.shape[1]
    c = np.zeros((a.shape[0], q))
    for n in range(1, q + 1):
        acc = -a[:, n - 1] if n <= p else np.zeros(a.shape[0])
        for k in range(max(1, n - p), n):
            acc = acc - (k / n) * c[:, k - 1] * a[:, n - k - 1]
        c[:, n - 1] = acc
    return c[0] if squeeze else c


def _response_db(coeffs, gain, n_points: int) -> np.ndarray:
    """Envelope in dB; 2-D ``coeffs`` (one model per row) gives one row each."""
    w = np.linspace(0.0, np.pi, n_points)
    a = np.asarray(coeffs, dtype=np.float64)
    poly = np.concatenate((np.ones(a.shape[:-1] + (1,)), a), axis=-1)
    resp = poly @ np.exp(-1j * np.outer(np.arange(poly.shape[-1]), w))
    return 20.0 * np.log10(np.asarray(gain, dtype=np.float64)[..., None] / np.abs(resp))


def envelope_db(model: LpcModel, n_points: int = LSD_POINTS) -> np.ndarray:
    """LPC envelope ``20 log10(g / |A(e^jw)|)`` on ``n_points`` from 0 to pi."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    return _response_db(model.coeffs, model.gain, n_points)


def log_spectral_distance(m1: LpcModel, m2: LpcModel, n_points: int = LSD_POINTS) -> float:
    """RMS difference in dB between two LPC envelopes."""
    d = envelope_db(m1, n_points) - envelope_db(m2, n_points)
    return float(np.sqrt(np.mean(d * d)))
