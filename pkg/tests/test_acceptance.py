"""System acceptance suite: one PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
"acceptance criteria" section of the terminal summary. Thresholds are the
stated ones and are never relaxed here; a criterion that the design does
not reach is reported as FAIL with the measured numbers.
"""

import time

import numpy as np
import pytest
from scipy.linalg import toeplitz
from scipy.stats import norm

from speechmark import attacks, metrics
from speechmark.audio import AudioBuffer, read_wav, write_wav
from speechmark.engine import (FRAME_LEN, RESIDUAL_LIMIT, embed, extract, watermark_signal,
                               whiten)
from speechmark.forensic import Verdict, analyze
from speechmark.lpc import LpcModel, levinson, lpc_to_lpcc
from speechmark.payload import crc16_ccitt, encode_frame
from speechmark.spreading import WatermarkKey, chips_for_frame, despread, spread
from speechmark.synth import make_utterance

from conftest import T0


def _frame_bit_errors(signal, key, cfg):
    """Payload bit errors of each complete frame, despread at its true position."""
    e = whiten(signal.samples, cfg.block_len, cfg.lpc_order, RESIDUAL_LIMIT)
    errs = []
    for i in range(len(signal) // FRAME_LEN):
        bits, _ = despread(e[i * FRAME_LEN:(i + 1) * FRAME_LEN], chips_for_frame(key, i, FRAME_LEN))
        errs.append(int(np.sum(bits != encode_frame(cfg.start_timestamp + i, cfg.flags))))
    return np.array(errs)


def _all_valid(res, n_frames, t0):
    return (len(res.frames) == n_frames and all(f.valid for f in res.frames)
            and res.timestamps == list(range(t0, t0 + n_frames)))


def test_criterion_1_loopback(corpus, key, cfg, report_criterion):
    t = time.perf_counter()
    marked = [embed(u, key, cfg) for u in corpus]
    results = [extract(m, key, cfg) for m in marked]
    elapsed = time.perf_counter() - t
    n_frames = [len(u) // FRAME_LEN for u in corpus]
    ok = [_all_valid(r, n, T0) for r, n in zip(results, n_frames)]
    valid = sum(len(r.valid_frames) for r in results)
    bit_errors = sum(int(_frame_bit_errors(m, key, cfg).sum()) for m in marked)
    total_bits = 80 * sum(n_frames)
    durations = [u.duration_s for u in corpus]
    passed = (len(corpus) >= 20 and min(durations) >= 10 and max(durations) <= 60
              and all(ok) and bit_errors == 0 and elapsed < 60)
    report_criterion(1, passed,
                     f"{len(corpus)} utterances {min(durations):.1f}-{max(durations):.1f} s, "
                     f"{valid}/{sum(n_frames)} frames VALID, {sum(ok)}/{len(corpus)} files fully valid, "
                     f"payload BER {bit_errors}/{total_bits} = {bit_errors / total_bits:.2e}, "
                     f"embed+extract {elapsed:.1f} s")
    assert passed


def test_criterion_2_key_gating(marked60, cfg, report_criterion):
    rng = np.random.default_rng(2)
    valid = errors = bits = 0
    for _ in range(100):
        wrong = WatermarkKey(rng.bytes(32))
        valid += len(extract(marked60, wrong, cfg).valid_frames)
        errs = _frame_bit_errors(marked60, wrong, cfg)
        errors += int(errs.sum())
        bits += 80 * errs.size
    ber = errors / bits
    passed = valid == 0 and abs(ber - 0.5) <= 0.03
    report_criterion(2, passed, f"100 wrong keys on 60 s: {valid} VALID frames, "
                                f"despread BER {ber:.4f} over {bits} bits")
    assert passed


def _localized(report, pos):
    return any(e.contains(pos) and e.length <= 2 * FRAME_LEN for e in report.events)


def test_criterion_3_localization(marked60, key, cfg, report_criterion):
    rng = np.random.default_rng(3)
    n = len(marked60)
    hits = false_authentic = 0
    misses = []
    for trial in range(100):
        d = int(rng.integers(800, 24001))  # 0.1-3 s
        if trial < 50:
            p = int(rng.integers(0, n - d - FRAME_LEN))
            edited, _ = attacks.cut(marked60, p, d)
        else:
            p = int(rng.integers(0, n - FRAME_LEN))
            foreign = AudioBuffer(make_utterance(d / 8000, seed=10_000 + trial).samples[:d])
            edited, _ = attacks.insert(marked60, p, foreign)
        rep = analyze(extract(edited, key, cfg), len(edited))
        false_authentic += rep.verdict is Verdict.AUTHENTIC
        if rep.verdict is Verdict.TAMPERED and _localized(rep, p):
            hits += 1
        else:
            misses.append(("cut" if trial < 50 else "insert", p, d))
    passed = hits >= 95 and false_authentic == 0
    report_criterion(3, passed, f"{hits}/100 edits localized within 2 s "
                                f"(50 cuts, 50 inserts of 0.1-3 s), {false_authentic} false AUTHENTIC"
                                + (f", misses {misses[:5]}" if misses else ""))
    assert passed


def test_criterion_4_robustness(corpus, marked_corpus, key, cfg, report_criterion):
    channels = {
        "noise 20 dB": lambda a, i: attacks.add_noise(a, 20.0, noise_seed=i)[0],
        "band-pass": lambda a, i: attacks.bandpass_gsm(a)[0],
        "gain +6 dB": lambda a, i: attacks.gain(a, 6.0)[0],
        "gain -6 dB": lambda a, i: attacks.gain(a, -6.0)[0],
    }
    total = sum(len(u) // FRAME_LEN for u in corpus)
    parts, passed = [], True
    for name, channel in channels.items():
        valid = files_ok = 0
        for i, m in enumerate(marked_corpus):
            res = extract(channel(m, i), key, cfg)
            valid += len(res.valid_frames)
            files_ok += _all_valid(res, len(m) // FRAME_LEN, T0)
        passed &= files_ok == len(marked_corpus)
        parts.append(f"{name}: {valid}/{total} VALID ({files_ok}/{len(marked_corpus)} files clean)")
    report_criterion(4, passed, "; ".join(parts))
    assert passed


def test_criterion_5_shaping_order(corpus, marked_corpus, key, cfg, report_criterion):
    lsd_ok = lpcc_ok = bound_ok = 0
    worst_lpcc = 0.0
    flat_cfg = cfg.with_(shaping=False)
    for u, shaped in zip(corpus, marked_corpus):
        white = embed(u, key, flat_cfg)
        lsd_s = float(np.mean(metrics.envelope_impact(u, shaped)))
        lsd_w = float(np.mean(metrics.envelope_impact(u, white)))
        lpcc_s, lpcc_w = metrics.lpcc_impact(u, shaped), metrics.lpcc_impact(u, white)
        lsd_ok += lsd_s < lsd_w
        lpcc_ok += lpcc_s < lpcc_w
        bound_ok += lpcc_s < 0.15
        worst_lpcc = max(worst_lpcc, lpcc_s)
    n = len(corpus)
    passed = lsd_ok == lpcc_ok == bound_ok == n
    report_criterion(5, passed, f"LSD shaped<unshaped {lsd_ok}/{n}, LPCC shaped<unshaped {lpcc_ok}/{n}, "
                                f"LPCC shaped<0.15 {bound_ok}/{n} (max {worst_lpcc:.3f})")
    assert passed


def test_criterion_6_transparency(corpus, marked_corpus, report_criterion):
    snr = np.array([metrics.segmental_snr(u, m) for u, m in zip(corpus, marked_corpus)])
    passed = bool(np.all(snr >= 13.0))
    report_criterion(6, passed, f"segmental SNR min {snr.min():.2f} / median {np.median(snr):.2f} dB, "
                                f"{int(np.sum(snr >= 13.0))}/{snr.size} files >= 13 dB")
    assert passed


def _crc_bitwise(data):
    reg = 0xFFFF
    for byte in data:
        for i in range(7, -1, -1):
            top = (reg >> 15) & 1
            reg = (reg << 1) & 0xFFFF
            if top ^ ((byte >> i) & 1):
                reg ^= 0x1021
    return reg


def test_criterion_7_oracles(tmp_path, report_criterion):
    rng = np.random.default_rng(7)
    checks = {}

    lev_err = 0.0
    for _ in range(20):
        x = rng.standard_normal(500)
        r = np.array([np.dot(x[: 500 - k], x[k:]) for k in range(11)])
        a = np.linalg.solve(toeplitz(r[:10]), -r[1:11])
        lev_err = max(lev_err, np.max(np.abs(levinson(r, 10).coeffs - a) / np.maximum(np.abs(a), 1e-300)))
    checks["levinson"] = (lev_err <= 1e-9, f"levinson rel err {lev_err:.1e}")

    cep_err = 0.0
    for p in range(1, 13):
        k = rng.uniform(-0.9, 0.9, p)
        a = np.zeros(0)
        for ki in k:
            a = np.concatenate((a + ki * a[::-1], [ki]))
        spectrum = np.fft.rfft(np.concatenate(([1.0], a)), 4096)
        oracle = 2.0 * np.fft.irfft(-np.log(np.abs(spectrum)), 4096)[1:13]
        cep_err = max(cep_err, np.max(np.abs(lpc_to_lpcc(LpcModel(a, 1.0, k), 12) - oracle)))
    checks["lpcc"] = (cep_err <= 1e-3, f"LPCC vs FFT cepstrum {cep_err:.1e}")

    # Eb/N0 = 10 dB with unit chips: Eb = 100, N0 = 2 sigma^2
    sigma = np.sqrt(100 / (2 * 10.0))
    n_bits, errors = 2_000_000, 0
    mc = np.random.default_rng(70)
    for _ in range(n_bits // 20_000):
        bits = mc.integers(0, 2, 20_000)
        chips = 2 * mc.integers(0, 2, 2_000_000, dtype=np.int8) - 1
        rx = spread(bits, chips, 100) + sigma * mc.standard_normal(2_000_000)
        errors += int(np.sum(despread(rx, chips, 100)[0] != bits))
    expected = norm.sf(np.sqrt(20.0))
    ber = errors / n_bits
    checks["ber"] = (expected / 3 <= ber <= 3 * expected,
                     f"BER {ber:.2e} vs Q(sqrt(2 Eb/N0)) {expected:.2e}")

    crc_ok = crc16_ccitt(b"123456789") == _crc_bitwise(b"123456789") == 0x29B1 and all(
        crc16_ccitt(d) == _crc_bitwise(d) for d in (rng.bytes(n) for n in range(1, 40)))
    checks["crc"] = (crc_ok, "CRC exact" if crc_ok else "CRC mismatch")

    x = rng.uniform(-1, 1, 80_000)
    write_wav(AudioBuffer(x), tmp_path / "rt.wav")
    wav_err = float(np.max(np.abs(read_wav(tmp_path / "rt.wav").samples - x)))
    checks["wav"] = (wav_err <= 1 / 32768, f"WAV round trip {wav_err * 32768:.2f} LSB")

    passed = all(ok for ok, _ in checks.values())
    report_criterion(7, passed, ", ".join(text for _, text in checks.values()))
    assert passed


def test_criterion_8_performance(speech60, key, cfg, report_criterion):
    t = time.perf_counter()
    marked = embed(speech60, key, cfg)
    t_embed = time.perf_counter() - t
    t = time.perf_counter()
    extract(marked, key, cfg)
    t_extract = time.perf_counter() - t

    # structural latency: block b of the watermark depends on no host sample
    # after block b, so output can be released one 20 ms block behind input
    w = watermark_signal(speech60, key, cfg)
    causal = True
    for b in np.random.default_rng(8).integers(1, len(speech60) // 160 - 1, 10):
        x = speech60.samples.copy()
        x[(b + 1) * 160:] = 0.0
        causal &= np.array_equal(watermark_signal(x, key, cfg)[:(b + 1) * 160], w[:(b + 1) * 160])
    rt_embed, rt_extract = 60.0 / t_embed, 60.0 / t_extract
    passed = rt_embed >= 10 and rt_extract >= 10 and causal
    report_criterion(8, passed, f"embed {rt_embed:.0f}x, extract {rt_extract:.0f}x real time on 60 s; "
                                f"latency one 160-sample block: {'yes' if causal else 'NO'}")
    assert passed


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
