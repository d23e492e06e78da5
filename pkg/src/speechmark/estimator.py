"""scikit-learn style front end to the embed / extract / verify pipeline.

``SpeechWatermarker`` keeps all configuration in constructor parameters
(so ``get_params``/``set_params``/``clone`` work), validates them in
``fit``, embeds in ``transform`` and returns verdicts from ``predict``::

    wm = SpeechWatermarker(key=WatermarkKey.load("site.key"), start_timestamp=t0)
    marked = wm.fit_transform(speech)
    wm.predict(marked)          # -> "AUTHENTIC"

There is nothing to learn from data; ``fit`` only checks the input
contract and freezes an :class:`~speechmark.engine.EmbedConfig`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .audio import SAMPLE_RATE, AudioBuffer
from .engine import FRAME_LEN, EmbedConfig, ExtractResult, embed, extract
from .exceptions import BadSampleRate, ConfigError, TooShort
from .forensic import TamperReport, analyze
from .spreading import WatermarkKey


def check_signal(X, *, min_samples: int = 0) -> AudioBuffer:
    """Coerce ``X`` to an 8 kHz :class:`AudioBuffer`.

    Accepts an AudioBuffer or a 1-D array of samples in [-1, 1] (a single
    column ``(n, 1)`` is flattened). Raises BadSampleRate, TooShort or
    ValueError.
    """
    if isinstance(X, AudioBuffer):
        buf = X
    else:
        arr = check_array(X, ensure_2d=False, dtype=np.float64, ensure_min_samples=0,
                          input_name="X")
        if arr.ndim == 2 and arr.shape[1] == 1:
            arr = arr[:, 0]
        if arr.ndim != 1:
            raise ValueError(f"expected a mono signal, got shape {arr.shape}")
        buf = AudioBuffer(arr, SAMPLE_RATE)
    if buf.sample_rate_hz != SAMPLE_RATE:
        raise BadSampleRate(f"need {SAMPLE_RATE} Hz audio, got {buf.sample_rate_hz} Hz")
    if len(buf) < min_samples:
        raise TooShort(f"need at least {min_samples} samples, got {len(buf)}")
    return buf


def check_key(key) -> WatermarkKey:
    if isinstance(key, WatermarkKey):
        return key
    if isinstance(key, str):
        return WatermarkKey.from_hex(key)
    if isinstance(key, (bytes, bytearray)):
        return WatermarkKey(bytes(key))
    raise ConfigError("key must be a WatermarkKey, 64 hex characters or 32 bytes")


def _same_kind(X, buf: AudioBuffer):
    return buf if isinstance(X, AudioBuffer) else buf.samples.copy()


class SpeechWatermarker(TransformerMixin, BaseEstimator):
    """Embed and verify keyed timestamp watermarks.

    Parameters
    ----------
    key : WatermarkKey, str or bytes
        Secret seed. Pass a WatermarkKey to keep it out of ``repr``.
    wsr_db, gamma, floor_dbfs, lpc_order, block_len, start_timestamp, flags,
    shaping, search_radius, index_radius
        Forwarded to :class:`~speechmark.engine.EmbedConfig`.
    acquire_frames : int, optional
        Try frame indices ``0 .. acquire_frames - 1`` until the first lock,
        for excerpts that may start anywhere in a recording.

    Attributes
    ----------
    config_ : EmbedConfig
    key_ : WatermarkKey
    n_frames_ : int
        Complete frames in the signal seen by ``fit``.
    """

    def __init__(self, key=None, *, wsr_db=-15.0, gamma=0.90, floor_dbfs=-45.0,
                 lpc_order=10, block_len=160, start_timestamp=0, flags=0,
                 shaping=True, search_radius=4000, index_radius=4, acquire_frames=None):
        self.key = key
        self.wsr_db = wsr_db
        self.gamma = gamma
        self.floor_dbfs = floor_dbfs
        self.lpc_order = lpc_order
        self.block_len = block_len
        self.start_timestamp = start_timestamp
        self.flags = flags
        self.shaping = shaping
        self.search_radius = search_radius
        self.index_radius = index_radius
        self.acquire_frames = acquire_frames

    def _config(self) -> EmbedConfig:
        return EmbedConfig(
            wsr_db=float(self.wsr_db), gamma=float(self.gamma),
            floor_dbfs=float(self.floor_dbfs), lpc_order=int(self.lpc_order),
            block_len=int(self.block_len), start_timestamp=int(self.start_timestamp),
            flags=int(self.flags), shaping=bool(self.shaping),
            search_radius=int(self.search_radius), index_radius=int(self.index_radius))

    def fit(self, X=None, y=None):
        """Validate parameters (and ``X`` if given); no data is learned."""
        if self.key is None:
            raise ConfigError("a key is required")
        self.key_ = check_key(self.key)
        self.config_ = self._config()
        if X is not None:
            self.n_frames_ = len(check_signal(X, min_samples=FRAME_LEN)) // FRAME_LEN
        return self

    def transform(self, X):
        """Watermark ``X``; returns the same kind of object it was given."""
        check_is_fitted(self, "config_")
        buf = check_signal(X, min_samples=FRAME_LEN)
        return _same_kind(X, embed(buf, self.key_, self.config_))

    def extract(self, X) -> ExtractResult:
        check_is_fitted(self, "config_")
        acquire = None if self.acquire_frames is None else range(int(self.acquire_frames))
        return extract(check_signal(X), self.key_, self.config_, acquire=acquire)

    def verify(self, X) -> TamperReport:
        """Full forensic report for ``X``."""
        buf = check_signal(X)
        return analyze(self.extract(buf), len(buf))

    def predict(self, X) -> str:
        """Verdict string: AUTHENTIC, TAMPERED or NO_WATERMARK."""
        return self.verify(X).verdict.value

    def score(self, X, y=None) -> float:
        """Fraction of frame slots that decode VALID."""
        res = self.extract(X)
        return len(res.valid_frames) / len(res.frames) if res.frames else 0.0
