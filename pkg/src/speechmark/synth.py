"""Synthetic narrowband speech for tests, demos and corpus runs.

A classic source-filter synthesizer: a jittered glottal pulse train with
spectral tilt (or noise for fricatives) drives a cascade of time-varying
formant resonators. Output has syllable rhythm, pauses and a low
background noise floor, which is all the watermark pipeline cares about.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import butter, lfilter, sosfilt

from .audio import SAMPLE_RATE, AudioBuffer

# (F1, F2, F3) in Hz
VOWELS = {
    "a": (730, 1090, 2440),
    "e": (530, 1840, 2480),
    "i": (270, 2290, 3010),
    "o": (570, 840, 2410),
    "u": (300, 870, 2240),
    "ae": (660, 1720, 2410),
    "er": (490, 1350, 1690),
}
BANDWIDTHS = (80.0, 100.0, 140.0, 200.0)
F4 = 3500.0
_CHUNK = 40  # samples between formant updates
_TILT = 0.6
_HIGHPASS = butter(4, 120.0, btype="highpass", fs=SAMPLE_RATE, output="sos")


def _resonator(freq, bw, fs):
    r = np.exp(-np.pi * bw / fs)
    return np.array([1.0, -2.0 * r * np.cos(2 * np.pi * freq / fs), r * r])


def _glottal_source(n, f0, fs, rng, jitter=0.01):
    src = np.zeros(n)
    t = 0.0
    while True:
        idx = int(t)
        if idx >= n:
            break
        src[idx] = 1.0
        t += fs / (f0[idx] * (1.0 + jitter * rng.standard_normal()))
    src -= src.mean()
    # two-pole glottal low-pass gives the usual -12 dB/oct source tilt
    return lfilter([1.0], [1.0, -1.9, 0.9025], src)


def _formant_filter(exc, tracks, fs, tail=480):
    """Cascade of resonators whose centre frequencies follow ``tracks``.

    Each chunk of excitation rings out through its own filter and the
    responses are overlap-added. Carrying direct-form state across
    coefficient changes pumps energy into rising formants.
    """
    y = np.zeros(exc.size + tail)
    for s in range(0, exc.size, _CHUNK):
        seg = exc[s:s + _CHUNK]
        if not seg.any():
            continue
        den = np.array([1.0])
        for f_idx, bw in enumerate(BANDWIDTHS):
            den = np.convolve(den, _resonator(tracks[f_idx][s], bw, fs))
        seg = np.concatenate((seg, np.zeros(tail)))
        y[s:s + seg.size] += lfilter([den.sum()], den, seg)
    return y[: exc.size]


def make_utterance(duration_s: float, seed: int, *, level_dbfs: float = -26.0,
                   background_dbfs: float = -66.0, fs: int = SAMPLE_RATE) -> AudioBuffer:
    """Generate ``duration_s`` seconds of speech-like audio, reproducibly.

    ``level_dbfs`` is the mean power of vowels (dB re full-scale square
    wave); fricatives sit about 12 dB lower, and ``background_dbfs`` is
    the noise floor that fills pauses.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * fs))
    f0_base = rng.uniform(95, 210)
    names = list(VOWELS)

    voiced_env = np.zeros(n)
    fric_env = np.zeros(n)
    segments = []  # (start, stop, is_voiced, level_db)
    tracks = np.tile(np.array([500.0, 1500.0, 2500.0, F4])[:, None], (1, n))
    prev = np.array(VOWELS[rng.choice(names)], dtype=float)

    t = int(rng.uniform(0.05, 0.25) * fs)
    while t < n:
        # a word of 1-4 syllables, then a pause
        for _ in range(rng.integers(1, 5)):
            if t >= n:
                break
            if rng.random() < 0.4:
                m = min(int(rng.uniform(0.04, 0.11) * fs), n - t)
                fric_env[t:t + m] = _ramp(m, 0.008, fs)
                segments.append((t, t + m, False, level_dbfs - 12 + rng.uniform(-3, 3)))
                t += m
            if t >= n:
                break
            vlen = int(rng.uniform(0.10, 0.28) * fs)
            target = np.array(VOWELS[rng.choice(names)], dtype=float)
            target *= rng.uniform(0.93, 1.07, 3)
            m = min(vlen, n - t)
            glide = np.clip(np.arange(m) / (0.4 * vlen), 0.0, 1.0)
            for k in range(3):
                tracks[k, t:t + m] = prev[k] + (target[k] - prev[k]) * glide
            voiced_env[t:t + m] = _ramp(m, 0.015, fs)
            segments.append((t, t + m, True, level_dbfs + rng.uniform(-4, 3)))
            prev = target
            t += vlen
        t += int(rng.uniform(0.08, 0.5) * fs)

    # hold the last formant values through pauses so the filters stay smooth
    active = voiced_env > 0
    if active.any():
        idx = np.maximum.accumulate(np.where(active, np.arange(n), 0))
        for k in range(3):
            tracks[k] = tracks[k][idx]

    decl = np.linspace(1.1, 0.9, n)
    f0 = f0_base * decl * (1.0 + 0.05 * np.sin(2 * np.pi * 0.7 * np.arange(n) / fs))
    voiced = _glottal_source(n, f0, fs, rng) * voiced_env
    voiced += 0.02 * _rms(voiced[active]) * rng.standard_normal(n) * voiced_env  # aspiration
    voiced = _formant_filter(voiced, tracks, fs)
    voiced = sosfilt(_HIGHPASS, lfilter([1.0, -0.95], [1.0], voiced))  # lip radiation
    voiced = lfilter([1.0 - _TILT], [1.0, -_TILT], voiced)  # extra high-frequency roll-off
    fric = lfilter(*_fricative_filter(rng, fs), rng.standard_normal(n)) * fric_env

    speech = np.zeros(n)
    for a, b, is_voiced, level in segments:
        src = voiced if is_voiced else fric
        speech[a:b] += src[a:b] * (10 ** (level / 20) / max(_rms(src[a:b]), 1e-12))
    speech += 10 ** (background_dbfs / 20) * rng.standard_normal(n)
    peak = np.max(np.abs(speech))
    if peak > 0.95:
        speech *= 0.95 / peak
    return AudioBuffer(speech, fs)


def _fricative_filter(rng, fs):
    den = _resonator(rng.uniform(2200, 3400), 900.0, fs)
    return [den.sum(), 0.0, -den.sum()], den


def _ramp(m, tau_s, fs):
    k = max(int(tau_s * fs), 1)
    env = np.ones(m)
    r = np.linspace(0.0, 1.0, min(k, m), endpoint=False)
    env[: r.size] = r
    env[m - r.size:] = np.minimum(env[m - r.size:], r[::-1] + 1.0 / k)
    return env


def _rms(x):
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0


def make_corpus(n: int = 20, seed: int = 2010, min_s: float = 10.0, max_s: float = 60.0):
    """``n`` utterances with durations spread over [min_s, max_s] seconds."""
    rng = np.random.default_rng(seed)
    durations = np.round(np.linspace(min_s, max_s, n) * rng.uniform(0.9, 1.0, n), 2)
    durations = np.clip(durations, min_s, max_s)
    seeds = rng.integers(0, 2**31, n)
    return [make_utterance(float(d), int(s)) for d, s in zip(durations, seeds)]
