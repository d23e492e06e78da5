import time

import numpy as np
import pytest

from speechmark import metrics
from speechmark.audio import AudioBuffer
from speechmark.engine import (FRAME_LEN, EmbedConfig, embed, extract, watermark_signal, whiten)
from speechmark.exceptions import BadSampleRate, ConfigError, TooShort
from speechmark.lpc import analyze_blocks
from speechmark.spreading import TAU_SYNC

from conftest import T0

VOICED_GATE_DBFS = -40.0


@pytest.mark.parametrize("bad", [dict(wsr_db=-5), dict(wsr_db=-30), dict(gamma=1.0), dict(gamma=0.0),
                                 dict(block_len=150), dict(flags=256), dict(start_timestamp=2**32),
                                 dict(lpc_order=0), dict(search_radius=8000)])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        EmbedConfig(**bad)


def test_embed_changes_complete_frames_only(key, cfg):
    from speechmark.synth import make_utterance
    host = make_utterance(10.5, seed=3)
    out = embed(host, key, cfg)
    d = out.samples - host.samples
    assert len(out) == len(host)
    assert np.all(np.abs(d[:80000].reshape(-1, 160)).max(axis=1) > 0)
    assert np.array_equal(out.samples[80000:], host.samples[80000:])


def test_embed_deterministic(speech10, key, cfg):
    assert embed(speech10, key, cfg) == embed(speech10, key, cfg)


def test_single_frame_host(speech10, key, cfg):
    host = AudioBuffer(speech10.samples[:FRAME_LEN])
    out = embed(host, key, cfg)
    res = extract(out, key, cfg)
    assert len(res.frames) == 1 and res.timestamps == [T0]


def test_embed_contract(key, cfg):
    with pytest.raises(TooShort):
        embed(AudioBuffer(np.zeros(FRAME_LEN - 1)), key, cfg)
    with pytest.raises(BadSampleRate):
        embed(AudioBuffer(np.zeros(16000), 16000), key, cfg)
    with pytest.raises(BadSampleRate):
        extract(AudioBuffer(np.zeros(16000), 16000), key, cfg)


def test_block_power_rule(speech10, key, cfg):
    w = watermark_signal(speech10, key, cfg)
    x = speech10.samples[:w.size]
    p_host = np.mean(x.reshape(-1, 160) ** 2, axis=1)
    p_wm = np.mean(w.reshape(-1, 160) ** 2, axis=1)
    target = np.maximum(p_host * 10 ** (-1.5), 10 ** (-4.5))
    assert np.allclose(p_wm, target, rtol=1e-9)


def test_unshaped_has_equal_power(speech10, key, cfg):
    w1 = watermark_signal(speech10, key, cfg)
    w0 = watermark_signal(speech10, key, cfg.with_(shaping=False))
    assert np.allclose(np.mean(w1.reshape(-1, 160) ** 2, axis=1),
                       np.mean(w0.reshape(-1, 160) ** 2, axis=1), rtol=1e-9)


def test_shaping_filter_is_bandwidth_expanded_lpc(speech10, key, cfg):
    # filtering a shaped block with A(z/gamma) of the host block gives the
    # raw chips back, times the block gain
    from scipy.signal import lfilter
    from speechmark.payload import encode_frame
    from speechmark.spreading import chips_for_frame, spread
    w = watermark_signal(speech10, key, cfg)[:FRAME_LEN]
    raw = spread(encode_frame(T0), chips_for_frame(key, 0, FRAME_LEN)).astype(float)
    coeffs, _ = analyze_blocks(speech10.samples[:FRAME_LEN])
    for b in (5, 20, 33):
        a = np.concatenate(([1.0], coeffs[b] * 0.9 ** np.arange(1, 11)))
        resid = lfilter(a, [1.0], w[b * 160 - 10:(b + 1) * 160])[20:]
        # the first p outputs also see the previous block, scaled by its own gain
        ratio = resid / raw[b * 160 + 10:(b + 1) * 160]
        assert np.allclose(ratio, ratio[0], rtol=1e-9) and ratio[0] > 0


def test_segmental_snr_voiced(speech10, marked10):
    snr = metrics.segmental_snr(speech10, marked10, gate_dbfs=VOICED_GATE_DBFS)
    assert abs(snr - 15.0) <= 2.0


def test_embed_is_causal_per_block(speech10, key, cfg):
    # changing the host from block b onwards leaves the watermark before b untouched
    w = watermark_signal(speech10, key, cfg)
    for b in (1, 37, 49, 50, 123):
        x = speech10.samples.copy()
        x[b * 160:] = np.random.default_rng(b).uniform(-0.5, 0.5, x.size - b * 160)
        w2 = watermark_signal(x, key, cfg)
        assert np.array_equal(w2[: b * 160], w[: b * 160])
        assert not np.array_equal(w2[b * 160:(b + 1) * 160], w[b * 160:(b + 1) * 160])


def test_loopback_10s(marked10, key, cfg):
    res = extract(marked10, key, cfg)
    assert [f.valid for f in res.frames] == [True] * 10
    assert res.timestamps == list(range(T0, T0 + 10))
    assert [f.resync_offset for f in res.frames] == [0] * 10
    assert all(-1 <= f.sync_score <= 1 for f in res.frames)


def test_frame_starts_increase(marked60, key, cfg):
    starts = [f.frame_start_sample for f in extract(marked60, key, cfg).frames]
    assert np.all(np.diff(starts) > 0)


def test_wrong_key_no_valid(marked10, other_key, cfg):
    assert extract(marked10, other_key, cfg).valid_frames == []


def test_unmarked_speech_null(speech10, key, cfg):
    res = extract(speech10, key, cfg)
    assert res.valid_frames == []
    assert all(f.sync_score < TAU_SYNC for f in res.frames)


def test_short_signal_yields_no_frames(key, cfg):
    res = extract(AudioBuffer(np.zeros(5000)), key, cfg)
    assert res.frames == [] and res.total_samples == 5000


def test_recovery_from_excerpts(marked60, key, cfg):
    rng = np.random.default_rng(77)
    for start in rng.integers(0, len(marked60) - 16000, 20):
        ex = AudioBuffer(marked60.samples[start:start + 16000])
        res = extract(ex, key, cfg, acquire=range(64))
        assert len(res.valid_frames) >= 1
        f = res.valid_frames[0]
        # the recovered frame sits where the original frame started
        assert f.frame_start_sample + start == f.frame_index * FRAME_LEN
        assert f.payload.timestamp == T0 + f.frame_index


def test_whiten_unit_rms(rng):
    e = whiten(rng.standard_normal(1000) * 0.01)
    blocks = e[:960].reshape(-1, 160)
    assert np.allclose(np.sqrt(np.mean(blocks ** 2, axis=1)), 1.0)
    assert np.max(np.abs(whiten(rng.standard_normal(1000), limit=1.5))) <= 1.5


def test_realtime_factor(marked60, speech60, key, cfg):
    t = time.perf_counter()
    embed(speech60, key, cfg)
    t_embed = time.perf_counter() - t
    t = time.perf_counter()
    extract(marked60, key, cfg)
    t_extract = time.perf_counter() - t
    assert t_embed < 6.0 and t_extract < 6.0
