"""Byte layout of qualitative packets.

A qualitative packet is a fixed header holding the Packet Wash directive, one
descriptor per chunk, and the payload of the chunks that are still present::

    0      2   3     4   5   6    7     8    9       11         15   16
    +------+---+-----+---+---+----+-----+----+-------+----------+----+
    |magic |ver|flags|tos|cmd|cond|param| qf |q_thr  |deadline  |cnt |
    +------+---+-----+---+---+----+-----+----+-------+----------+----+
    [coded only: k (1) | group_id (2)]
    cnt x descriptor: sig(1) flags(1) offset(2) length(2) crc16(2) [k coeffs]
    payload (surviving chunks, descriptor order)

All multi-byte fields are big-endian. There is no packet-level checksum; each
chunk carries its own CRC so a washed packet can still be verified.
"""

from __future__ import annotations

import binascii
import enum
import struct
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

MAGIC = 0x5157
VERSION = 1
DROPPED_OFFSET = 0xFFFF
MAX_CHUNKS = 64
MAX_TOS = 7

_FIXED = struct.Struct(">HBBBBBBBHIB")
_CODED_EXT = struct.Struct(">BH")
_DESC = struct.Struct(">BBHHH")

FIXED_HEADER_SIZE = _FIXED.size  # 16
CODED_EXT_SIZE = _CODED_EXT.size  # 3
DESCRIPTOR_SIZE = _DESC.size  # 8

FLAG_WASHED = 0x01
FLAG_CODED = 0x02
DESC_DROPPED = 0x01


class WireError(ValueError):
    """Base class for codec failures."""


class Truncated(WireError):
    pass


class BadMagic(WireError):
    pass


class BadVersion(WireError):
    pass


class InvariantViolation(WireError):
    pass


class ChunkCrcMismatch(InvariantViolation):
    def __init__(self, index: int):
        super().__init__(f"CRC mismatch on chunk {index}")
        self.index = index


class Command(enum.IntEnum):
    PACKET_WASH = 1


class Condition(enum.IntEnum):
    QUEUE_OCCUPANCY_GE = 1


class QFunction(enum.IntEnum):
    PRIORITY_ORDER = 0
    BINARY = 1
    STEP = 2
    CODED_RANDOM = 3


class OverheadModel(enum.Enum):
    PAPER_4B = "paper_4b"
    ACTUAL = "actual"


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout."""
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True)
class WashDirective:
    command: int = Command.PACKET_WASH
    condition_code: int = Condition.QUEUE_OCCUPANCY_GE
    condition_param: int = 90
    q_function: int = QFunction.PRIORITY_ORDER
    q_threshold: int = 1
    deadline_us: int = 0

    def check(self) -> None:
        if self.command not in Command.__members__.values():
            raise InvariantViolation(f"unknown command {self.command}")
        if self.condition_code not in Condition.__members__.values():
            raise InvariantViolation(f"unknown condition {self.condition_code}")
        if self.q_function not in QFunction.__members__.values():
            raise InvariantViolation(f"unknown q-function {self.q_function}")
        if not 0 <= self.condition_param <= 100:
            raise InvariantViolation("condition_param must be a percentage")
        if not 1 <= self.q_threshold <= 0xFFFF:
            raise InvariantViolation("q_threshold must be in 1..65535")
        if not 0 <= self.deadline_us <= 0xFFFFFFFF:
            raise InvariantViolation("deadline_us must fit in 32 bits")


@dataclass(frozen=True)
class ChunkDescriptor:
    sig: int
    length: int
    crc16: int
    offset: int = 0
    dropped: bool = False
    coeffs: bytes = b""

    def as_dropped(self) -> "ChunkDescriptor":
        return replace(self, dropped=True, offset=DROPPED_OFFSET)


@dataclass(frozen=True)
class QualitativePacket:
    directive: WashDirective
    descriptors: tuple[ChunkDescriptor, ...]
    payload: bytes
    tos: int = 0
    washed: bool = False
    coded: bool = False
    k: int = 0
    group_id: int = 0
    version: int = VERSION
    # simulator addressing, not carried on the wire
    flow_id: int = field(default=0, compare=False)
    seq: int = field(default=0, compare=False)

    @property
    def chunk_count(self) -> int:
        return len(self.descriptors)

    @property
    def header_size(self) -> int:
        stride = DESCRIPTOR_SIZE + (self.k if self.coded else 0)
        ext = CODED_EXT_SIZE if self.coded else 0
        return FIXED_HEADER_SIZE + ext + stride * len(self.descriptors)

    @property
    def wire_size(self) -> int:
        return self.header_size + len(self.payload)

    def surviving(self) -> list[int]:
        return [i for i, d in enumerate(self.descriptors) if not d.dropped]

    def chunk(self, index: int) -> bytes:
        d = self.descriptors[index]
        if d.dropped:
            raise KeyError(f"chunk {index} was dropped")
        return self.payload[d.offset : d.offset + d.length]

    def validate(self, check_crc: bool = True) -> None:
        """Raise InvariantViolation (or ChunkCrcMismatch) if the packet is malformed."""
        self.directive.check()
        if self.version != VERSION:
            raise InvariantViolation(f"unsupported version {self.version}")
        if not 0 <= self.tos <= MAX_TOS:
            raise InvariantViolation("tos must be in 0..7")
        if not 1 <= len(self.descriptors) <= MAX_CHUNKS:
            raise InvariantViolation("chunk_count must be in 1..64")
        if self.coded:
            if not 1 <= self.k <= 0xFF:
                raise InvariantViolation("coded packet needs 1 <= k <= 255")
            if self.directive.q_function != QFunction.CODED_RANDOM:
                raise InvariantViolation("coded packet must use CODED_RANDOM")
            if not 0 <= self.group_id <= 0xFFFF:
                raise InvariantViolation("group_id must fit in 16 bits")
        else:
            if self.k != 0 or self.group_id != 0:
                raise InvariantViolation("uncoded packet carries k/group_id")
            if self.directive.q_function == QFunction.CODED_RANDOM:
                raise InvariantViolation("CODED_RANDOM requires coded mode")
        want_coeffs = self.k if self.coded else 0
        cursor = 0
        for i, d in enumerate(self.descriptors):
            if not 0 <= d.sig <= 0xFF:
                raise InvariantViolation(f"chunk {i}: sig out of range")
            if not 1 <= d.length <= 0xFFFF:
                raise InvariantViolation(f"chunk {i}: length out of range")
            if not 0 <= d.crc16 <= 0xFFFF:
                raise InvariantViolation(f"chunk {i}: crc out of range")
            if len(d.coeffs) != want_coeffs:
                raise InvariantViolation(f"chunk {i}: expected {want_coeffs} coefficients")
            if d.dropped:
                if d.offset != DROPPED_OFFSET:
                    raise InvariantViolation(f"chunk {i}: dropped chunk must use offset 0xFFFF")
                continue
            if d.offset != cursor:
                raise InvariantViolation(f"chunk {i}: offset {d.offset} is not contiguous")
            cursor += d.length
            if cursor > len(self.payload):
                raise InvariantViolation(f"chunk {i}: runs past the payload")
            if check_crc and crc16(self.payload[d.offset : cursor]) != d.crc16:
                raise ChunkCrcMismatch(i)
        if cursor == 0:
            raise InvariantViolation("packet has no surviving chunk")
        if cursor != len(self.payload):
            raise InvariantViolation("payload length does not match surviving chunks")
        if cursor > DROPPED_OFFSET:
            raise InvariantViolation("payload too large for 16-bit offsets")


def make_packet(
    chunks: Sequence[tuple[bytes, int]],
    directive: WashDirective,
    *,
    tos: int = 0,
    flow_id: int = 0,
    seq: int = 0,
) -> QualitativePacket:
    """Build an intact uncoded packet from ``(data, sig)`` pairs."""
    descriptors = []
    offset = 0
    for data, sig in chunks:
        descriptors.append(ChunkDescriptor(sig=sig, length=len(data), crc16=crc16(data), offset=offset))
        offset += len(data)
    return QualitativePacket(
        directive=directive,
        descriptors=tuple(descriptors),
        payload=b"".join(data for data, _ in chunks),
        tos=tos,
        flow_id=flow_id,
        seq=seq,
    )


def make_coded_packet(
    chunks: Sequence[tuple[bytes, bytes]],
    directive: WashDirective,
    *,
    k: int,
    group_id: int,
    tos: int = 0,
    flow_id: int = 0,
    seq: int = 0,
) -> QualitativePacket:
    """Build an intact coded packet from ``(coeffs, data)`` pairs."""
    descriptors = []
    offset = 0
    for coeffs, data in chunks:
        descriptors.append(
            ChunkDescriptor(sig=0, length=len(data), crc16=crc16(data), offset=offset, coeffs=bytes(coeffs))
        )
        offset += len(data)
    return QualitativePacket(
        directive=directive,
        descriptors=tuple(descriptors),
        payload=b"".join(data for _, data in chunks),
        tos=tos,
        coded=True,
        k=k,
        group_id=group_id,
        flow_id=flow_id,
        seq=seq,
    )


def encode(packet: QualitativePacket) -> bytes:
    packet.validate()
    d = packet.directive
    flags = (FLAG_WASHED if packet.washed else 0) | (FLAG_CODED if packet.coded else 0)
    parts = [
        _FIXED.pack(
            MAGIC,
            packet.version,
            flags,
            packet.tos,
            d.command,
            d.condition_code,
            d.condition_param,
            d.q_function,
            d.q_threshold,
            d.deadline_us,
            packet.chunk_count,
        )
    ]
    if packet.coded:
        parts.append(_CODED_EXT.pack(packet.k, packet.group_id))
    for desc in packet.descriptors:
        parts.append(_DESC.pack(desc.sig, DESC_DROPPED if desc.dropped else 0, desc.offset, desc.length, desc.crc16))
        parts.append(desc.coeffs)
    parts.append(packet.payload)
    return b"".join(parts)


def decode(data: bytes, *, verify_crc: bool = True, flow_id: int = 0, seq: int = 0) -> QualitativePacket:
    """Parse and validate a packet.

    With ``verify_crc=False`` the structural checks still run but corrupted
    chunks are left for the caller to find with :func:`verify_chunks`.
    """
    data = bytes(data)
    if len(data) < 3:
        raise Truncated("shorter than magic and version")
    magic, version = struct.unpack_from(">HB", data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic 0x{magic:04x}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    if len(data) < FIXED_HEADER_SIZE:
        raise Truncated("fixed header incomplete")
    (_, _, flags, tos, command, cond, param, qf, q_thr, deadline, count) = _FIXED.unpack_from(data)
    if flags & ~(FLAG_WASHED | FLAG_CODED):
        raise InvariantViolation(f"reserved flag bits set: 0x{flags:02x}")
    coded = bool(flags & FLAG_CODED)
    pos = FIXED_HEADER_SIZE
    k = group_id = 0
    if coded:
        if len(data) < pos + CODED_EXT_SIZE:
            raise Truncated("coded header extension incomplete")
        k, group_id = _CODED_EXT.unpack_from(data, pos)
        pos += CODED_EXT_SIZE
    stride = DESCRIPTOR_SIZE + k
    if len(data) < pos + stride * count:
        raise Truncated("descriptor table incomplete")
    descriptors = []
    for _ in range(count):
        sig, dflags, offset, length, crc = _DESC.unpack_from(data, pos)
        if dflags & ~DESC_DROPPED:
            raise InvariantViolation(f"reserved descriptor flag bits set: 0x{dflags:02x}")
        coeffs = data[pos + DESCRIPTOR_SIZE : pos + stride]
        descriptors.append(
            ChunkDescriptor(
                sig=sig, length=length, crc16=crc, offset=offset, dropped=bool(dflags & DESC_DROPPED), coeffs=coeffs
            )
        )
        pos += stride
    expected = sum(d.length for d in descriptors if not d.dropped)
    if len(data) - pos < expected:
        raise Truncated("payload shorter than descriptors promise")
    packet = QualitativePacket(
        directive=WashDirective(
            command=command,
            condition_code=cond,
            condition_param=param,
            q_function=qf,
            q_threshold=q_thr,
            deadline_us=deadline,
        ),
        descriptors=tuple(descriptors),
        payload=data[pos:],
        tos=tos,
        washed=bool(flags & FLAG_WASHED),
        coded=coded,
        k=k,
        group_id=group_id,
        version=version,
        flow_id=flow_id,
        seq=seq,
    )
    packet.validate(check_crc=verify_crc)
    return packet


def verify_chunks(packet: QualitativePacket) -> list[bool | None]:
    """Per-chunk integrity: True/False for surviving chunks, None for dropped ones."""
    return [None if d.dropped else crc16(packet.chunk(i)) == d.crc16 for i, d in enumerate(packet.descriptors)]


def header_overhead(num_chunks: int, mtu: int, model: OverheadModel = OverheadModel.ACTUAL, k: int = 0) -> Fraction:
    """Fraction of an MTU spent on qualitative headers.

    ``PAPER_4B`` charges 4 bytes per chunk (16-bit CRC plus a packed offset);
    ``ACTUAL`` charges this codec's fixed header and descriptors, with ``k``
    coefficient bytes per descriptor when coded.
    """
    if num_chunks < 1:
        raise ValueError("num_chunks must be >= 1")
    if mtu < 64:
        raise ValueError("mtu must be >= 64")
    model = OverheadModel(model)
    if model is OverheadModel.PAPER_4B:
        return Fraction(4 * num_chunks, mtu)
    ext = CODED_EXT_SIZE if k else 0
    return Fraction(FIXED_HEADER_SIZE + ext + (DESCRIPTOR_SIZE + k) * num_chunks, mtu)

