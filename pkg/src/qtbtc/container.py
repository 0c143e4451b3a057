"""MSB-first bit cursors and the ``QTR1`` container.

Layout (all integers big-endian)::

    magic "QTR1" | version u8 | mode u8 | width u16 | height u16 | params
    then per section: bit count u32 | ceil(bits / 8) bytes, zero padded

Section count is fixed by the mode, so it is not stored.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum


class ContainerError(ValueError):
    pass


class BitReadError(EOFError):
    pass


class BitWriter:
    def __init__(self):
        self._out = bytearray()
        self._acc = 0
        self._nacc = 0
        self.bits = 0

    def append_bits(self, value: int, count: int) -> None:
        if not 0 <= count <= 32:
            raise ValueError(f"bit count {count} outside [0, 32]")
        if value < 0 or value >> count:
            raise ValueError(f"value {value} does not fit in {count} bits")
        self._acc = (self._acc << count) | value
        self._nacc += count
        self.bits += count
        while self._nacc >= 8:
            self._nacc -= 8
            self._out.append((self._acc >> self._nacc) & 0xFF)
        self._acc &= (1 << self._nacc) - 1

    def append_bit(self, bit: int) -> None:
        self.append_bits(bit, 1)

    def getvalue(self) -> bytes:
        tail = bytes([(self._acc << (8 - self._nacc)) & 0xFF]) if self._nacc else b""
        return bytes(self._out) + tail


class BitReader:
    def __init__(self, data: bytes, nbits: int | None = None):
        self._data = bytes(data)
        self.limit = len(self._data) * 8 if nbits is None else nbits
        if self.limit > len(self._data) * 8:
            raise ValueError("bit limit exceeds data length")
        self.position = 0

    @property
    def remaining(self) -> int:
        return self.limit - self.position

    def read_bits(self, count: int) -> int:
        if not 0 <= count <= 32:
            raise ValueError(f"bit count {count} outside [0, 32]")
        if count == 0:
            return 0
        end = self.position + count
        if end > self.limit:
            raise BitReadError(
                f"read of {count} bits at position {self.position} passes end ({self.limit})"
            )
        first, last = self.position >> 3, (end + 7) >> 3
        chunk = int.from_bytes(self._data[first:last], "big")
        shift = last * 8 - end
        self.position = end
        return (chunk >> shift) & ((1 << count) - 1)

    def read_bit(self) -> int:
        return self.read_bits(1)


class Mode(IntEnum):
    BTC = 0
    BTC_QT = 1
    SN2 = 2
    SN2_QT = 3
    MVF_RAW = 16
    MVF_QT = 17
    MVF_MODE_QT = 18
    MVF_3D_QT = 19


SECTION_COUNT = {
    Mode.BTC: 1,
    Mode.BTC_QT: 3,
    Mode.SN2: 1,
    Mode.SN2_QT: 2,
    Mode.MVF_RAW: 1,
    Mode.MVF_QT: 1,
    Mode.MVF_MODE_QT: 1,
    Mode.MVF_3D_QT: 1,
}

MAGIC = b"QTR1"
VERSION = 1


@dataclass(frozen=True)
class Header:
    mode: Mode
    width: int
    height: int
    mad: int = 0
    mbd: int = 0
    block_size: int = 0
    search_range: int = 0
    threshold_q8: int = 0  # inter/intra threshold in per-pel SAD units x 256

    @property
    def threshold(self) -> float:
        return self.threshold_q8 / 256


@dataclass(frozen=True)
class Section:
    bits: int
    payload: bytes

    @classmethod
    def from_writer(cls, w: BitWriter) -> "Section":
        return cls(w.bits, w.getvalue())

    def reader(self) -> BitReader:
        return BitReader(self.payload, self.bits)


@dataclass(frozen=True)
class Container:
    header: Header
    sections: tuple[Section, ...] = field(default_factory=tuple)

    @property
    def payload_bits(self) -> int:
        return sum(s.bits for s in self.sections)


def _params(h: Header) -> bytes:
    if h.mode in (Mode.BTC_QT, Mode.SN2_QT):
        return struct.pack(">BB", h.mad, h.mbd)
    if h.mode == Mode.MVF_MODE_QT:
        return struct.pack(">BBH", h.block_size, h.search_range, h.threshold_q8)
    if h.mode >= Mode.MVF_RAW:
        return struct.pack(">BB", h.block_size, h.search_range)
    return b""


def write_container(header: Header, sections) -> bytes:
    mode = Mode(header.mode)
    sections = tuple(sections)
    if len(sections) != SECTION_COUNT[mode]:
        raise ContainerError(
            f"mode {mode.name} takes {SECTION_COUNT[mode]} sections, got {len(sections)}"
        )
    try:
        out = [MAGIC, struct.pack(">BBHH", VERSION, mode, header.width, header.height), _params(header)]
    except struct.error as exc:
        raise ContainerError(f"header field out of range: {exc}") from None
    for s in sections:
        nbytes = (s.bits + 7) // 8
        if len(s.payload) != nbytes:
            raise ContainerError(f"section of {s.bits} bits needs {nbytes} bytes, has {len(s.payload)}")
        out.append(struct.pack(">I", s.bits))
        out.append(s.payload)
    return b"".join(out)


def _take(data: bytes, pos: int, n: int, what: str) -> bytes:
    if pos + n > len(data):
        raise ContainerError(f"truncated container while reading {what}")
    return data[pos : pos + n]


def parse_container(data: bytes) -> Container:
    if _take(data, 0, 4, "magic") != MAGIC:
        raise ContainerError(f"bad magic {data[:4]!r}")
    version, mode_byte, width, height = struct.unpack(">BBHH", _take(data, 4, 6, "header"))
    if version != VERSION:
        raise ContainerError(f"unsupported version {version}")
    try:
        mode = Mode(mode_byte)
    except ValueError:
        raise ContainerError(f"unknown mode {mode_byte}") from None
    pos = 10
    kw = {}
    if mode in (Mode.BTC_QT, Mode.SN2_QT):
        kw["mad"], kw["mbd"] = struct.unpack(">BB", _take(data, pos, 2, "params"))
        pos += 2
    elif mode == Mode.MVF_MODE_QT:
        kw["block_size"], kw["search_range"], kw["threshold_q8"] = struct.unpack(
            ">BBH", _take(data, pos, 4, "params")
        )
        pos += 4
    elif mode >= Mode.MVF_RAW:
        kw["block_size"], kw["search_range"] = struct.unpack(">BB", _take(data, pos, 2, "params"))
        pos += 2
    header = Header(mode, width, height, **kw)
    sections = []
    for i in range(SECTION_COUNT[mode]):
        (bits,) = struct.unpack(">I", _take(data, pos, 4, f"section {i} length"))
        pos += 4
        nbytes = (bits + 7) // 8
        sections.append(Section(bits, _take(data, pos, nbytes, f"section {i} payload")))
        pos += nbytes
    if pos != len(data):
        raise ContainerError(f"{len(data) - pos} trailing bytes after last section")
    return Container(header, tuple(sections))
