"""Command-line front end.

Exit codes are the machine contract:

    0  success / AUTHENTIC
    2  I/O problem (missing or unreadable file, not a WAV)
    3  contract violation (wrong rate or format, short file, bad key or option)
    4  TAMPERED
    5  NO_WATERMARK

CSV columns written by ``analyze``:

    blocks: block, start_sample, ref_power_dbfs, segsnr_db, lsd_db, lpcc_dist
    psd:    frequency_hz, ref_power_db, test_power_db
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import attacks, metrics
from .audio import read_wav, write_wav
from .engine import FRAME_LEN, EmbedConfig, embed, extract
from .exceptions import IoFailure, NotWav, SpeechmarkError
from .forensic import Verdict, analyze
from .spreading import WatermarkKey

EXIT_OK, EXIT_IO, EXIT_CONTRACT, EXIT_TAMPERED, EXIT_NO_WATERMARK = 0, 2, 3, 4, 5
VERDICT_EXIT = {Verdict.AUTHENTIC: EXIT_OK, Verdict.TAMPERED: EXIT_TAMPERED,
                Verdict.NO_WATERMARK: EXIT_NO_WATERMARK}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_key(path) -> WatermarkKey:
    try:
        return WatermarkKey.load(path)
    except FileNotFoundError:
        raise CliError(EXIT_IO, f"key file not found: {path}")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read key file {path}: {exc}")
    except (ValueError, UnicodeDecodeError):
        raise CliError(EXIT_CONTRACT, f"{path}: key file must hold 64 lowercase hex characters")


def _read(path, strict=True):
    try:
        return read_wav(path, strict=strict)
    except (FileNotFoundError, IsADirectoryError):
        raise CliError(EXIT_IO, f"no such file: {path}")
    except (NotWav, IoFailure, OSError) as exc:
        raise CliError(EXIT_IO, f"{path}: {exc}")


def _write(buf, path):
    try:
        write_wav(buf, path)
    except (IoFailure, OSError) as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}")


def _write_text(text, path):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}")


def _timestamp(value: str, now: int) -> int:
    if value == "now":
        return now
    try:
        return int(value)
    except ValueError:
        raise CliError(EXIT_CONTRACT, f"--timestamp must be epoch seconds or 'now', not {value!r}")


def cmd_embed(args) -> int:
    key = _load_key(args.key)
    try:
        cfg = EmbedConfig(wsr_db=args.wsr, start_timestamp=_timestamp(args.timestamp, args.now),
                          flags=int(args.flags, 16), shaping=not args.no_shaping)
    except ValueError as exc:
        raise CliError(EXIT_CONTRACT, str(exc))
    host = _read(args.input)
    marked = embed(host, key, cfg)
    _write(marked, args.out)
    print(f"frames: {len(host) // FRAME_LEN}")
    try:
        snr = metrics.segmental_snr(host, marked)
        print(f"segmental SNR: {snr:.2f} dB")
    except SpeechmarkError:
        print("segmental SNR: n/a (no active blocks)")
    return EXIT_OK


def _verify_one(path, key_path, report_path, acquire=None):
    """Worker for one file; returns (exit code, summary line)."""
    key = _load_key(key_path)
    buf = _read(path)
    report = analyze(extract(buf, key, acquire=None if acquire is None else range(acquire)), len(buf))
    if report_path is not None:
        _write_text(report.to_json() + "\n", report_path)
    line = (f"{path}: {report.verdict.value} ({report.frames_valid}/{report.frames_total} frames valid, "
            f"{len(report.events)} events)")
    for e in report.events:
        line += (f"\n  {e.kind.value:<21} {e.start_sample / 8000:8.3f}-{e.end_sample / 8000:8.3f} s"
                 f"  {e.detail}")
    return VERDICT_EXIT[report.verdict], line


def _safe_verify(job):
    try:
        return _verify_one(*job)
    except CliError as exc:
        return exc.code, f"{job[0]}: error: {exc}"
    except SpeechmarkError as exc:
        return EXIT_CONTRACT, f"{job[0]}: error: {exc}"


def cmd_verify(args) -> int:
    inputs = args.input
    if len(inputs) == 1:
        jobs = [(inputs[0], args.key, args.report, args.acquire)]
    else:
        out_dir = Path(args.report) if args.report else None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
        jobs = [(p, args.key, None if out_dir is None else out_dir / (Path(p).stem + ".json"),
                 args.acquire) for p in inputs]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_safe_verify, jobs))
    else:
        results = [_safe_verify(j) for j in jobs]
    for code, line in results:
        print(line, file=sys.stderr if code in (EXIT_IO, EXIT_CONTRACT) else sys.stdout)
    return max(code for code, _ in results)


def cmd_attack(args) -> int:
    try:
        doc = json.loads(Path(args.script).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError(EXIT_IO, f"no such file: {args.script}")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.script}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_CONTRACT, f"{args.script}: invalid JSON: {exc}")
    script = doc["operations"] if isinstance(doc, dict) else doc
    src = _read(args.input, strict=False)
    try:
        out, log = attacks.apply_script(src, script, base_dir=Path(args.script).parent)
    except (KeyError, TypeError) as exc:
        raise CliError(EXIT_CONTRACT, f"malformed edit operation: {exc}")
    _write(out, args.out)
    if args.log:
        _write_text(log.to_json() + "\n", args.log)
    print(f"{len(log.operations)} operations, {len(src)} -> {len(out)} samples")
    return EXIT_OK


def cmd_analyze(args) -> int:
    ref, test = _read(args.reference, strict=False), _read(args.test, strict=False)
    if len(ref) != len(test):
        raise CliError(EXIT_CONTRACT, f"length mismatch: {len(ref)} vs {len(test)} samples")
    rows = metrics.block_table(ref, test)
    if args.csv:
        metrics.to_csv(rows, metrics.BLOCK_COLUMNS, args.csv)
    if args.psd:
        seg = None
        if args.segment:
            a, _, b = args.segment.partition(":")
            seg = (int(a or 0), int(b or len(ref)))
        f, pr = metrics.psd(ref, seg)
        _, pt = metrics.psd(test, seg)
        metrics.to_csv(zip(f.tolist(), pr.tolist(), pt.tolist()),
                       ("frequency_hz", "ref_power_db", "test_power_db"), args.psd)
    try:
        snr = metrics.segmental_snr(ref, test)
        lsd = float(np.mean(metrics.envelope_impact(ref, test)))
        lpcc = metrics.lpcc_impact(ref, test)
    except SpeechmarkError as exc:
        print(f"no active blocks: {exc}")
        return EXIT_OK
    print(f"segmental SNR: {'inf' if math.isinf(snr) else f'{snr:.2f} dB'}")
    print(f"mean LSD: {lsd:.3f} dB")
    print(f"mean LPCC distance: {lpcc:.4f}")
    return EXIT_OK


def cmd_keygen(args) -> int:
    path = Path(args.out)
    if path.exists() and not args.force:
        raise CliError(EXIT_IO, f"{path} exists (use --force to overwrite)")
    try:
        WatermarkKey.generate().save(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="speechmark", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("embed", help="watermark a recording")
    e.add_argument("input")
    e.add_argument("--key", required=True, help="key file (64 hex characters)")
    e.add_argument("--out", required=True)
    e.add_argument("--timestamp", default="now", help="epoch seconds of the first frame, or 'now'")
    e.add_argument("--flags", default="0", help="8-bit flags field, hex")
    e.add_argument("--wsr", type=float, default=-15.0, help="watermark-to-signal ratio in dB")
    e.add_argument("--no-shaping", action="store_true", help="white watermark (comparison only)")
    e.set_defaults(func=cmd_embed)

    v = sub.add_parser("verify", help="check integrity and locate edits")
    v.add_argument("input", nargs="+")
    v.add_argument("--key", required=True)
    v.add_argument("--report", help="JSON report path (a directory when several inputs are given)")
    v.add_argument("--jobs", type=int, default=1, help="parallel workers across input files")
    v.add_argument("--acquire", type=int, metavar="N",
                   help="for excerpts: search frame indices 0..N-1 until the first lock")
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("attack", help="apply an edit script")
    a.add_argument("input")
    a.add_argument("--script", required=True, help="JSON list of edit operations")
    a.add_argument("--out", required=True)
    a.add_argument("--log", help="write the replayable edit log here")
    a.set_defaults(func=cmd_attack)

    m = sub.add_parser("analyze", help="compare a reference and a test recording")
    m.add_argument("reference")
    m.add_argument("test")
    m.add_argument("--csv", help="per-block metrics CSV")
    m.add_argument("--psd", help="Welch PSD CSV of both files")
    m.add_argument("--segment", help="PSD sample range start:stop")
    m.set_defaults(func=cmd_analyze)

    k = sub.add_parser("keygen", help="create a new random key file")
    k.add_argument("out")
    k.add_argument("--force", action="store_true")
    k.set_defaults(func=cmd_keygen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.now = int(time.time())  # resolved once per run
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SpeechmarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
