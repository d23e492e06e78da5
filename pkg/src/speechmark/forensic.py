"""Integrity verdict and tamper localization from an extraction result.

Rules, applied per frame record in order:

1. an invalid frame is a MISSING_FRAME (no sync, bad sync word) or a
   CRC_FAILURE, spanning its nominal second plus 0.2 s either side;
2. each valid frame is compared with the previous valid one, ``k`` frame
   slots earlier: a timestamp step ``d > k`` is a TIMESTAMP_GAP (about
   ``d - k`` s deleted), ``d <= 0`` a TIMESTAMP_REGRESSION;
3. a valid frame found more than 80 samples away from
   ``prev_start + d * 8000`` is an ALIGNMENT_SHIFT; the offset is the net
   number of samples inserted (positive) or deleted (negative).

Boundary events (2, 3) span the stretch between the two frames plus 0.2 s
either side. The first valid frame is checked against the start of the
file the same way, so edits before it are reported too.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from .audio import SAMPLE_RATE
from .engine import FRAME_LEN, ExtractResult, FrameRecord
from .payload import FrameStatus

SHIFT_TOLERANCE = 80  # samples (10 ms): below this, offsets count as channel jitter
BOUNDARY_MARGIN = 1600  # samples either side of a frame boundary
MIN_COVERAGE = 0.5
SCHEMA_VERSION = "1"


class EventKind(str, enum.Enum):
    MISSING_FRAME = "MISSING_FRAME"
    TIMESTAMP_GAP = "TIMESTAMP_GAP"
    TIMESTAMP_REGRESSION = "TIMESTAMP_REGRESSION"
    ALIGNMENT_SHIFT = "ALIGNMENT_SHIFT"
    CRC_FAILURE = "CRC_FAILURE"


class Verdict(str, enum.Enum):
    AUTHENTIC = "AUTHENTIC"
    TAMPERED = "TAMPERED"
    NO_WATERMARK = "NO_WATERMARK"


@dataclass(frozen=True)
class TamperEvent:
    kind: EventKind
    start_sample: int
    end_sample: int
    detail: str = ""
    score: float = 0.0

    def __post_init__(self):
        if self.start_sample > self.end_sample:
            raise ValueError("start_sample must not exceed end_sample")

    def contains(self, sample: int) -> bool:
        return self.start_sample <= sample <= self.end_sample

    @property
    def length(self) -> int:
        return self.end_sample - self.start_sample


@dataclass(frozen=True)
class TamperReport:
    verdict: Verdict
    events: List[TamperEvent] = field(default_factory=list)
    frames_total: int = 0
    frames_valid: int = 0
    coverage: float = 0.0
    total_samples: int = 0
    sample_rate_hz: int = SAMPLE_RATE

    @property
    def tampered(self) -> bool:
        return self.verdict is Verdict.TAMPERED

    def to_dict(self) -> dict:
        fs = self.sample_rate_hz
        events = []
        for e in self.events:
            d = asdict(e)
            d["kind"] = e.kind.value
            d["start_s"] = e.start_sample / fs
            d["end_s"] = e.end_sample / fs
            events.append(d)
        return {
            "schema_version": SCHEMA_VERSION,
            "verdict": self.verdict.value,
            "frames_total": self.frames_total,
            "frames_valid": self.frames_valid,
            "coverage": self.coverage,
            "total_samples": self.total_samples,
            "sample_rate_hz": fs,
            "events": events,
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, doc: dict) -> "TamperReport":
        if str(doc.get("schema_version")) != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {doc.get('schema_version')!r}")
        events = [TamperEvent(EventKind(e["kind"]), int(e["start_sample"]), int(e["end_sample"]),
                              e.get("detail", ""), float(e.get("score", 0.0)))
                  for e in doc["events"]]
        return cls(Verdict(doc["verdict"]), events, int(doc["frames_total"]),
                   int(doc["frames_valid"]), float(doc["coverage"]),
                   int(doc.get("total_samples", 0)), int(doc.get("sample_rate_hz", SAMPLE_RATE)))

    @classmethod
    def from_json(cls, text: str) -> "TamperReport":
        return cls.from_dict(json.loads(text))


def _boundary_window(a: int, b: int, total: int):
    lo, hi = min(a, b), max(a, b)
    return max(lo - BOUNDARY_MARGIN, 0), min(hi + BOUNDARY_MARGIN, max(total, 0))


def _frame_event(rec: FrameRecord, total: int) -> TamperEvent:
    status = rec.payload.status
    kind = EventKind.CRC_FAILURE if status is FrameStatus.BAD_CRC else EventKind.MISSING_FRAME
    start = rec.frame_start_sample
    # an edit just before a frame start also breaks that frame, so pad the
    # nominal second by the boundary margin
    lo, hi = _boundary_window(start, start + FRAME_LEN, total)
    return TamperEvent(kind, lo, hi,
                       f"{status.value} in frame at {start / SAMPLE_RATE:.3f} s", rec.sync_score)


def _seconds(n: int) -> str:
    return f"{n / SAMPLE_RATE:.3f} s"


def _leading_events(first: FrameRecord, total: int) -> List[TamperEvent]:
    start = first.frame_start_sample
    lo, hi = 0, min(start + BOUNDARY_MARGIN, total)
    if first.frame_index != 0:
        # chips of earlier frames are missing from the start of the file
        return [TamperEvent(EventKind.TIMESTAMP_GAP, lo, hi,
                            f"file opens with frame {first.frame_index} at {_seconds(start)}",
                            first.sync_score)]
    if start > SHIFT_TOLERANCE:
        return [TamperEvent(EventKind.ALIGNMENT_SHIFT, lo, hi,
                            f"first frame starts at {_seconds(start)} ({start} samples inserted)",
                            first.sync_score)]
    return []


def _boundary_events(prev: FrameRecord, cur: FrameRecord, slots: int, total: int) -> List[TamperEvent]:
    """Compare ``cur`` with the last valid frame ``prev``, ``slots`` records back."""
    events = []
    prev_end = prev.frame_start_sample + FRAME_LEN
    found = cur.frame_start_sample
    lo, hi = _boundary_window(prev_end, found, total)
    d = cur.payload.timestamp - prev.payload.timestamp
    if d <= 0:
        events.append(TamperEvent(EventKind.TIMESTAMP_REGRESSION, lo, hi,
                                  f"timestamp steps by {d} s (material spliced from earlier)",
                                  cur.sync_score))
        return events
    if d > slots:
        events.append(TamperEvent(EventKind.TIMESTAMP_GAP, lo, hi,
                                  f"timestamp jumps by {d} s over {slots} frame slot(s) "
                                  f"(about {d - slots} s deleted)", cur.sync_score))
    # net samples inserted (+) or deleted (-) between the two frames; when
    # a gap was reported only the part it does not explain is a shift
    shift = found - (prev.frame_start_sample + d * FRAME_LEN)
    residual = shift + (d - slots) * FRAME_LEN if d > slots else shift
    if abs(residual) > SHIFT_TOLERANCE:
        what = "inserted" if shift > 0 else "deleted"
        events.append(TamperEvent(EventKind.ALIGNMENT_SHIFT, lo, hi,
                                  f"{abs(shift)} samples {what} ({_seconds(abs(shift))})",
                                  cur.sync_score))
    return events


def _largest_gap(result: ExtractResult, total: int):
    covered = sorted((f.frame_start_sample, f.frame_start_sample + FRAME_LEN)
                     for f in result.valid_frames)
    best, cursor = (0, 0), 0
    for s, e in covered + [(total, total)]:
        if s - cursor > best[1] - best[0]:
            best = (cursor, s)
        cursor = max(cursor, e)
    return best


def analyze(result: ExtractResult, total_samples: Optional[int] = None) -> TamperReport:
    """Turn an :class:`~speechmark.engine.ExtractResult` into a verdict."""
    total = result.total_samples if total_samples is None else int(total_samples)
    frames = list(result.frames)
    valid = [f for f in frames if f.valid]
    if not valid:
        return TamperReport(Verdict.NO_WATERMARK, [], len(frames), 0, 0.0, total)

    events: List[TamperEvent] = []
    last = None  # index of the last valid record
    for i, rec in enumerate(frames):
        if not rec.valid:
            events.append(_frame_event(rec, total))
            continue
        if last is None:
            events.extend(_leading_events(rec, total))
        else:
            events.extend(_boundary_events(frames[last], rec, i - last, total))
        last = i

    covered = sum(min(f.frame_start_sample + FRAME_LEN, total) - f.frame_start_sample for f in valid)
    coverage = covered / total if total > 0 else 0.0
    if coverage < MIN_COVERAGE and not events:
        lo, hi = _largest_gap(result, total)
        events.append(TamperEvent(EventKind.MISSING_FRAME, lo, hi,
                                  f"only {coverage:.0%} of the file carries valid frames"))

    events.sort(key=lambda e: (e.start_sample, e.end_sample))
    verdict = Verdict.TAMPERED if events else Verdict.AUTHENTIC
    return TamperReport(verdict, events, len(frames), len(valid), coverage, total)
