"""The 80-bit per-second watermark frame.

Wire layout (big-endian, MSB first)::

    sync(16) = 0xB5D9 | timestamp(32) | flags(8) | reserved(8) = 0 | crc(16)

The CRC is CRC-16/CCITT-FALSE over the six timestamp/flags/reserved bytes.
"""

from __future__ import annotations

import binascii
import enum
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import TimestampOverflow, WrongLength

SYNC_WORD = 0xB5D9
SYNC_BITS = 16
FRAME_BITS = 80


class FrameStatus(str, enum.Enum):
    VALID = "VALID"
    BAD_SYNC = "BAD_SYNC"
    BAD_CRC = "BAD_CRC"
    # extraction could not lock onto a sync pattern at all
    NO_SYNC = "NO_SYNC"


def crc16_ccitt(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout."""
    return binascii.crc_hqx(bytes(data), 0xFFFF)


@dataclass(frozen=True)
class PayloadFrame:
    timestamp: int
    flags: int
    reserved: int = 0
    sync: int = SYNC_WORD
    crc: int = 0
    status: FrameStatus = FrameStatus.VALID

    @property
    def valid(self) -> bool:
        return self.status is FrameStatus.VALID

    @classmethod
    def invalid(cls, status: FrameStatus) -> "PayloadFrame":
        return cls(timestamp=0, flags=0, sync=0, status=status)


def _body(timestamp: int, flags: int, reserved: int = 0) -> bytes:
    return struct.pack(">IBB", timestamp, flags, reserved)


def encode_frame(timestamp: int, flags: int = 0) -> np.ndarray:
    """Serialize a frame to 80 bits (uint8 array of 0/1)."""
    timestamp = int(timestamp)
    if not 0 <= timestamp < 2**32:
        raise TimestampOverflow(f"timestamp {timestamp} does not fit in 32 bits")
    if not 0 <= int(flags) < 256:
        raise ValueError("flags must be an 8-bit value")
    body = _body(timestamp, int(flags))
    raw = struct.pack(">H", SYNC_WORD) + body + struct.pack(">H", crc16_ccitt(body))
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))


def decode_frame(bits) -> PayloadFrame:
    """Parse 80 bits; ``status`` reports BAD_SYNC / BAD_CRC failures.

    Fields are filled in even for failed frames so the values can be
    shown as forensic detail; only ``status`` says whether to trust them.
    """
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if bits.size != FRAME_BITS:
        raise WrongLength(f"expected {FRAME_BITS} bits, got {bits.size}")
    raw = np.packbits(bits).tobytes()
    sync, timestamp, flags, reserved, crc = struct.unpack(">HIBBH", raw)
    if sync != SYNC_WORD:
        status = FrameStatus.BAD_SYNC
    elif crc16_ccitt(raw[2:8]) != crc:
        status = FrameStatus.BAD_CRC
    else:
        status = FrameStatus.VALID
    return PayloadFrame(timestamp, flags, reserved, sync, crc, status)


def sync_bits() -> np.ndarray:
    return np.unpackbits(np.frombuffer(struct.pack(">H", SYNC_WORD), dtype=np.uint8))
