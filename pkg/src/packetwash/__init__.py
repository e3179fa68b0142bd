"""Qualitative packets, in-network Packet Wash and chunk-level network coding."""

from .wire import (
    ChunkDescriptor,
    QFunction,
    QualitativePacket,
    WashDirective,
    crc16,
    decode,
    encode,
    header_overhead,
)

__all__ = [
    "ChunkDescriptor",
    "QFunction",
    "QualitativePacket",
    "WashDirective",
    "crc16",
    "decode",
    "encode",
    "header_overhead",
]
