import struct
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import crc16_bitwise
from strategies import coded_packets, packets, plain_packets
from packetwash.wash import apply_wash
from packetwash.wire import (
    DROPPED_OFFSET,
    BadMagic,
    BadVersion,
    ChunkCrcMismatch,
    InvariantViolation,
    OverheadModel,
    QFunction,
    QualitativePacket,
    Truncated,
    WashDirective,
    crc16,
    decode,
    encode,
    header_overhead,
    make_coded_packet,
    make_packet,
    verify_chunks,
)


# crc


def test_crc_oracle_reference_vectors():
    # the oracle itself against the published check value
    assert crc16_bitwise(b"123456789") == 0x29B1
    assert crc16_bitwise(b"") == 0xFFFF


def test_crc_matches_reference_vectors():
    assert crc16(b"123456789") == 0x29B1
    assert crc16(b"") == 0xFFFF


@given(st.binary(max_size=300))
def test_crc_matches_bitwise_oracle(data):
    assert crc16(data) == crc16_bitwise(data)
    assert crc16(data) == crc16(data)


# layout


def test_single_chunk_layout_is_28_bytes():
    d = WashDirective(condition_param=90, q_threshold=1)
    p = make_packet([(b"ABCD", 1)], d)
    raw = encode(p)
    assert len(raw) == 28
    expected = (
        bytes.fromhex("5157" "01" "00" "00" "01" "01" "5a" "00" "0001" "00000000" "01")
        + bytes([1, 0]) + struct.pack(">HHH", 0, 4, crc16(b"ABCD"))
        + b"ABCD"
    )
    assert raw == expected


def test_coded_layout_stride():
    d = WashDirective(q_function=QFunction.CODED_RANDOM)
    chunks = [(bytes([i + 1] * 5), bytes([i] * 10)) for i in range(3)]
    p = make_coded_packet(chunks, d, k=5, group_id=0xBEEF)
    raw = encode(p)
    assert raw[3] == 0x02  # coded flag
    assert raw[16] == 5
    assert raw[17:19] == b"\xbe\xef"
    assert len(raw) == 16 + 3 + 3 * (8 + 5) + 30
    # second descriptor starts one stride after the first
    first = 19
    assert raw[first + 8 : first + 13] == bytes([1] * 5)
    assert raw[first + 13 + 8 : first + 26] == bytes([2] * 5)


def test_zero_chunks_rejected():
    p = QualitativePacket(WashDirective(), (), b"")
    with pytest.raises(InvariantViolation):
        encode(p)


def test_invalid_directive_values_rejected():
    p = make_packet([(b"x", 1)], WashDirective())
    for bad in (
        WashDirective(condition_param=101),
        WashDirective(q_threshold=0),
        WashDirective(command=2),
        WashDirective(q_function=9),
    ):
        with pytest.raises(InvariantViolation):
            encode(replace(p, directive=bad))


def test_coded_flag_requires_coded_random():
    d = WashDirective(q_function=QFunction.PRIORITY_ORDER)
    with pytest.raises(InvariantViolation):
        encode(make_coded_packet([(b"\x01", b"a")], d, k=1, group_id=0))
    with pytest.raises(InvariantViolation):
        encode(make_packet([(b"a", 0)], WashDirective(q_function=QFunction.CODED_RANDOM)))


def test_dropped_descriptor_uses_sentinel_and_keeps_metadata():
    p = make_packet([(b"aa", 3), (b"bbb", 1), (b"c", 2)], WashDirective())
    w = apply_wash(p, [1])
    d = w.descriptors[1]
    assert d.dropped and d.offset == DROPPED_OFFSET
    assert d.length == 3 and d.crc16 == crc16(b"bbb")
    assert [x.offset for x in w.descriptors if not x.dropped] == [0, 2]
    assert decode(encode(w)) == w


# round trip


@settings(max_examples=300)
@given(packets)
def test_round_trip(p):
    raw = encode(p)
    q = decode(raw)
    assert q == p
    assert encode(q) == raw
    assert len(raw) == p.wire_size


@given(packets)
def test_offsets_canonical_after_decode(p):
    q = decode(encode(p))
    cursor = 0
    for i in q.surviving():
        assert q.descriptors[i].offset == cursor
        cursor += q.descriptors[i].length
    assert cursor == len(q.payload)


# corruption


def test_flip_bit_in_chunk_two():
    p = make_packet([(b"zero", 1), (b"one!", 1), (b"two!", 1), (b"tri", 1)], WashDirective())
    raw = bytearray(encode(p))
    payload_start = len(raw) - len(p.payload)
    raw[payload_start + p.descriptors[2].offset + 1] ^= 0x10
    with pytest.raises(ChunkCrcMismatch) as err:
        decode(bytes(raw))
    assert err.value.index == 2
    loose = decode(bytes(raw), verify_crc=False)
    assert verify_chunks(loose) == [True, True, False, True]


@given(plain_packets(washed=True), st.data())
def test_crc_locality(p, data):
    alive = p.surviving()
    target = data.draw(st.sampled_from(alive))
    d = p.descriptors[target]
    pos = data.draw(st.integers(d.offset, d.offset + d.length - 1))
    bit = data.draw(st.integers(0, 7))
    payload = bytearray(p.payload)
    payload[pos] ^= 1 << bit
    bad = replace(p, payload=bytes(payload))
    result = verify_chunks(bad)
    for i, ok in enumerate(result):
        if p.descriptors[i].dropped:
            assert ok is None
        else:
            assert ok is (i != target)


def test_truncated_after_fixed_header():
    p = make_packet([(b"hello", 1)], WashDirective())
    raw = encode(p)
    with pytest.raises(Truncated):
        decode(raw[:16])
    with pytest.raises(Truncated):
        decode(raw[:10])
    with pytest.raises(Truncated):
        decode(raw[:-1])


def test_trailing_bytes_rejected():
    raw = encode(make_packet([(b"hello", 1)], WashDirective()))
    with pytest.raises(InvariantViolation):
        decode(raw + b"\x00")


def test_bad_magic_and_version():
    raw = bytearray(encode(make_packet([(b"hello", 1)], WashDirective())))
    with pytest.raises(BadMagic):
        decode(b"\x00\x00" + bytes(raw[2:]))
    raw[2] = 2
    with pytest.raises(BadVersion):
        decode(bytes(raw))


def test_reserved_flag_bits_rejected():
    raw = bytearray(encode(make_packet([(b"hello", 1)], WashDirective())))
    raw[3] |= 0x80
    with pytest.raises(InvariantViolation):
        decode(bytes(raw))


@settings(max_examples=500)
@given(st.binary(max_size=120))
def test_decode_random_bytes_only_raises_wire_errors(data):
    try:
        decode(data)
    except (Truncated, BadMagic, BadVersion, InvariantViolation):
        pass


@given(coded_packets())
def test_coded_round_trip_keeps_coefficients_on_dropped(p):
    q = decode(encode(p))
    assert [d.coeffs for d in q.descriptors] == [d.coeffs for d in p.descriptors]


# overhead


def test_overhead_examples():
    assert header_overhead(3, 1280, OverheadModel.PAPER_4B) == Fraction(3, 320)
    assert float(header_overhead(3, 1280, OverheadModel.PAPER_4B)) * 100 == 0.9375
    assert header_overhead(3, 9000, OverheadModel.PAPER_4B) == Fraction(12, 9000)
    assert header_overhead(1, 1280, OverheadModel.PAPER_4B) == Fraction(4, 1280)
    assert header_overhead(3, 1280, OverheadModel.ACTUAL) == Fraction(40, 1280)
    assert header_overhead(3, 1280, OverheadModel.ACTUAL, k=5) == Fraction(16 + 3 + 39, 1280)


@given(st.integers(1, 63), st.integers(64, 9000), st.sampled_from(list(OverheadModel)))
def test_overhead_monotone(n, mtu, model):
    assert header_overhead(n + 1, mtu, model) > header_overhead(n, mtu, model)
    assert header_overhead(n, mtu + 1, model) < header_overhead(n, mtu, model)


def test_overhead_rejects_bad_arguments():
    with pytest.raises(ValueError):
        header_overhead(0, 1280)
    with pytest.raises(ValueError):
        header_overhead(1, 63)
