"""Hypothesis strategies for valid packets."""

from __future__ import annotations

from hypothesis import strategies as st

from packetwash.wash import apply_wash
from packetwash.wire import QFunction, WashDirective, make_coded_packet, make_packet

directives = st.builds(
    WashDirective,
    condition_param=st.integers(0, 100),
    q_function=st.sampled_from([QFunction.PRIORITY_ORDER, QFunction.BINARY, QFunction.STEP]),
    q_threshold=st.integers(1, 4),
    deadline_us=st.integers(0, 2**32 - 1),
)


@st.composite
def plain_packets(draw, max_chunks: int = 8, max_len: int = 40, washed: bool = True):
    n = draw(st.integers(1, max_chunks))
    chunks = [(draw(st.binary(min_size=1, max_size=max_len)), draw(st.integers(0, 3))) for _ in range(n)]
    d = draw(directives)
    if d.q_function == QFunction.BINARY:
        chunks = [(data, sig % 2) for data, sig in chunks]
    p = make_packet(chunks, d, tos=draw(st.integers(0, 7)))
    if washed and n > 1 and draw(st.booleans()):
        victims = draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n - 1))
        p = apply_wash(p, sorted(victims))
    return p


@st.composite
def coded_packets(draw, max_chunks: int = 6, max_len: int = 32):
    k = draw(st.integers(1, 8))
    n = draw(st.integers(1, max_chunks))
    length = draw(st.integers(1, max_len))
    chunks = [(draw(st.binary(min_size=k, max_size=k)), draw(st.binary(min_size=length, max_size=length))) for _ in range(n)]
    d = WashDirective(q_function=QFunction.CODED_RANDOM, q_threshold=draw(st.integers(1, 3)))
    p = make_coded_packet(chunks, d, k=k, group_id=draw(st.integers(0, 0xFFFF)), tos=draw(st.integers(0, 7)))
    if n > 1 and draw(st.booleans()):
        victims = draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n - 1))
        p = apply_wash(p, sorted(victims))
    return p


packets = st.one_of(plain_packets(), coded_packets())
