"""Sender and receiver models.

The sender chunks application frames per an :class:`AppContext`, emits plain
or coded packets, and reacts to acknowledgments: washed packets are never
retransmitted, coded groups are topped up with fresh combinations equal to
the missing degrees of freedom, and every ack feeds the rate law.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .rlnc import CodedChunk, DecoderState, RlncEncoder, RlncGroup, pack_group
from .seeding import derive_seed
from .wash import quality_of_packet
from .wire import (
    MAX_CHUNKS,
    QFunction,
    QualitativePacket,
    WashDirective,
    decode,
    make_packet,
    verify_chunks,
)


class BadContext(ValueError):
    pass


class UnknownFlow(KeyError):
    pass


@dataclass(frozen=True)
class Coding:
    k: int
    k_prime: int
    h: int


@dataclass(frozen=True)
class AppContext:
    """How an application cuts its frames into chunks and what the network may do with them.

    ``chunking`` lists ``(length, sig)`` for every chunk of one frame. Plain
    frames become one packet; coded frames are split into groups of ``k``
    chunks, each coded to ``k_prime`` chunks packed ``h`` per packet.
    ``deadline_us`` is a budget relative to the frame's creation; 0 disables it.
    """

    chunking: tuple[tuple[int, int], ...]
    q_function: QFunction = QFunction.PRIORITY_ORDER
    q_threshold: int = 1
    condition_param: int = 90
    tos: int = 0
    deadline_us: int = 0
    coded: Optional[Coding] = None

    @property
    def frame_bytes(self) -> int:
        return sum(length for length, _ in self.chunking)

    @property
    def groups_per_frame(self) -> int:
        return len(self.chunking) // self.coded.k if self.coded else 0

    def validate(self) -> None:
        if not self.chunking:
            raise BadContext("chunking is empty")
        if any(length < 1 for length, _ in self.chunking):
            raise BadContext("chunk lengths must be >= 1")
        if any(not 0 <= sig <= 255 for _, sig in self.chunking):
            raise BadContext("sig must fit in a byte")
        if self.q_function == QFunction.BINARY and any(sig not in (0, 1) for _, sig in self.chunking):
            raise BadContext("BINARY significance is 0 or 1")
        if self.q_threshold < 1:
            raise BadContext("q_threshold must be >= 1")
        if self.coded is None:
            if self.q_function == QFunction.CODED_RANDOM:
                raise BadContext("CODED_RANDOM needs coding parameters")
            if len(self.chunking) > MAX_CHUNKS:
                raise BadContext("too many chunks for one packet")
            return
        c = self.coded
        if self.q_function != QFunction.CODED_RANDOM:
            raise BadContext("coded mode uses CODED_RANDOM")
        if not 1 <= c.k <= 255 or c.k_prime < c.k or not 1 <= c.h <= MAX_CHUNKS:
            raise BadContext("need 1 <= k <= 255, k_prime >= k, 1 <= h <= 64")
        if len(self.chunking) % c.k:
            raise BadContext("chunk count must be a multiple of k")

    def directive(self, now_us: float = 0) -> WashDirective:
        deadline = int(now_us + self.deadline_us) if self.deadline_us else 0
        return WashDirective(
            condition_param=self.condition_param,
            q_function=self.q_function,
            q_threshold=self.q_threshold,
            deadline_us=deadline,
        )

    def group_lengths(self, position: int) -> list[int]:
        """True source-chunk lengths of the ``position``-th group of a frame."""
        k = self.coded.k
        return [length for length, _ in self.chunking[position * k : (position + 1) * k]]


@dataclass(frozen=True)
class Ack:
    flow_id: int
    seq: int
    group_id: int = 0
    quality: float = 1.0
    dof_received: int = 0
    washed_flag: bool = False
    k: int = 0


@dataclass(frozen=True)
class RateState:
    rate: float
    min_rate: float
    max_rate: float
    increase: float  # one MTU per RTT, in bytes/s

    def __post_init__(self):
        if not self.min_rate <= self.rate <= self.max_rate:
            raise ValueError("rate outside [min_rate, max_rate]")


def update_rate(state: RateState, ack: Ack) -> RateState:
    if ack.quality >= 1.0 and not ack.washed_flag:
        return replace(state, rate=min(state.rate + state.increase, state.max_rate))
    quality = min(max(ack.quality, 0.0), 1.0)
    return replace(state, rate=max(state.rate * (0.5 + quality / 2), state.min_rate))


def _split(data: bytes, ctx: AppContext) -> list[bytes]:
    if len(data) < 1 or len(data) != ctx.frame_bytes:
        raise BadContext(f"chunking covers {ctx.frame_bytes} bytes, data has {len(data)}")
    out, pos = [], 0
    for length, _ in ctx.chunking:
        out.append(data[pos : pos + length])
        pos += length
    return out


def _coded_groups(
    data: bytes, ctx: AppContext, flow_id: int, seq_base: int, group_base: int, seed: int, now_us: float
) -> list[tuple[RlncEncoder, list[QualitativePacket]]]:
    c = ctx.coded
    chunks = _split(data, ctx)
    directive = ctx.directive(now_us)
    out = []
    seq = seq_base
    for g in range(len(chunks) // c.k):
        group_id = (group_base + g) & 0xFFFF
        group = RlncGroup.from_chunks(group_id, chunks[g * c.k : (g + 1) * c.k])
        enc = RlncEncoder(group, derive_seed(seed, flow_id, group_base + g))
        packets = pack_group(
            enc.next_chunks(c.k_prime),
            c.h,
            k=c.k,
            group_id=group_id,
            directive=directive,
            tos=ctx.tos,
            flow_id=flow_id,
            seq_base=seq,
        )
        seq += len(packets)
        out.append((enc, packets))
    return out


def packetize(
    data: bytes,
    ctx: AppContext,
    flow_id: int = 0,
    seq_base: int = 0,
    *,
    group_base: int = 0,
    seed: int = 0,
    now_us: float = 0,
) -> list[QualitativePacket]:
    ctx.validate()
    if ctx.coded is None:
        chunks = _split(data, ctx)
        sigs = [sig for _, sig in ctx.chunking]
        return [make_packet(list(zip(chunks, sigs)), ctx.directive(now_us), tos=ctx.tos, flow_id=flow_id, seq=seq_base)]
    groups = _coded_groups(data, ctx, flow_id, seq_base, group_base, seed, now_us)
    return [p for _, packets in groups for p in packets]


def _without_corrupt(packet: QualitativePacket) -> QualitativePacket:
    """Treat chunks that fail their CRC as if the network had dropped them."""
    bad = [i for i, ok in enumerate(verify_chunks(packet)) if ok is False]
    if not bad:
        return packet
    descriptors, payload, cursor = [], [], 0
    for i, d in enumerate(packet.descriptors):
        if d.dropped or i in bad:
            descriptors.append(d if d.dropped else d.as_dropped())
            continue
        payload.append(packet.chunk(i))
        descriptors.append(replace(d, offset=cursor))
        cursor += d.length
    return replace(packet, descriptors=tuple(descriptors), payload=b"".join(payload))


@dataclass
class _GroupRx:
    decoder: DecoderState
    delivered: bool = False


class Receiver:
    """Delivers surviving chunks (plain) or decoded groups (coded) and acknowledges.

    ``on_deliver(key, data, quality)`` is called once per delivered packet
    (key = seq, data = surviving chunks keyed by index) or per decoded group
    (key = group_id, data = unpadded group bytes).
    """

    def __init__(self, flow_id: int, ctx: AppContext, on_deliver: Optional[Callable] = None):
        self.flow_id = flow_id
        self.ctx = ctx
        self.on_deliver = on_deliver
        self.groups: dict[int, _GroupRx] = {}
        self.seen: set[int] = set()
        self.corrupt_chunks = 0

    def receive(self, packet: QualitativePacket | bytes, *, seq: int | None = None) -> Ack:
        if isinstance(packet, (bytes, bytearray)):
            packet = decode(packet, verify_crc=False, flow_id=self.flow_id, seq=seq or 0)
        clean = _without_corrupt(packet)
        self.corrupt_chunks += len(packet.surviving()) - len(clean.surviving())
        quality = quality_of_packet(clean) if clean.surviving() else 0.0
        if not clean.coded:
            if packet.seq not in self.seen:
                self.seen.add(packet.seq)
                if self.on_deliver:
                    self.on_deliver(packet.seq, {i: clean.chunk(i) for i in clean.surviving()}, quality)
            return Ack(self.flow_id, packet.seq, quality=quality, washed_flag=packet.washed)

        rx = self.groups.get(clean.group_id)
        if rx is None:
            chunk_len = clean.descriptors[0].length
            rx = self.groups[clean.group_id] = _GroupRx(DecoderState(clean.k, chunk_len))
        if not rx.delivered:
            for i in clean.surviving():
                d = clean.descriptors[i]
                rx.decoder.add(CodedChunk(d.coeffs, clean.chunk(i)))
            if rx.decoder.rank == rx.decoder.k:
                rx.delivered = True
                sources = rx.decoder.solve()
                gpf = self.ctx.groups_per_frame
                lengths = self.ctx.group_lengths(clean.group_id % gpf) if gpf else [len(s) for s in sources]
                data = b"".join(s[:n] for s, n in zip(sources, lengths))
                if self.on_deliver:
                    self.on_deliver(clean.group_id, data, 1.0)
        return Ack(
            self.flow_id,
            packet.seq,
            group_id=clean.group_id,
            quality=quality,
            dof_received=rx.decoder.rank,
            washed_flag=packet.washed,
            k=clean.k,
        )


@dataclass
class _GroupTx:
    encoder: RlncEncoder
    sent: int = 0
    acked: int = 0
    dof: int = 0
    complete: bool = False


@dataclass
class AckResponse:
    repair: list[QualitativePacket] = field(default_factory=list)
    rate: float = 0.0


class Sender:
    def __init__(self, flow_id: int, ctx: AppContext, rate: RateState, seed: int = 0):
        ctx.validate()
        self.flow_id = flow_id
        self.ctx = ctx
        self.rate = rate
        self.seed = seed
        self.next_seq = 0
        self.next_group = 0
        self.outstanding: dict[int, QualitativePacket] = {}  # plain: seq -> packet awaiting ack
        self.groups: dict[int, _GroupTx] = {}
        self.retransmissions = 0
        self.repair_chunks = 0
        self._epochs: dict[tuple[str, int], int] = {}

    def send_frame(self, data: bytes, now_us: float = 0) -> list[QualitativePacket]:
        if self.ctx.coded is None:
            [packet] = packetize(data, self.ctx, self.flow_id, self.next_seq, now_us=now_us)
            self.next_seq += 1
            self.outstanding[packet.seq] = packet
            return [packet]
        groups = _coded_groups(data, self.ctx, self.flow_id, self.next_seq, self.next_group, self.seed, now_us)
        out = []
        for enc, packets in groups:
            self.groups[enc.group.group_id] = _GroupTx(enc, sent=len(packets))
            out.extend(packets)
        self.next_group += len(groups)
        self.next_seq += len(out)
        return out

    def timer_key(self, packet: QualitativePacket) -> tuple[str, int]:
        return ("group", packet.group_id) if packet.coded else ("seq", packet.seq)

    def arm(self, key: tuple[str, int]) -> int:
        """Start (or restart) the loss timer for ``key``; returns its epoch."""
        self._epochs[key] = self._epochs.get(key, 0) + 1
        return self._epochs[key]

    def _repair(self, group_id: int, missing: int, now_us: float) -> list[QualitativePacket]:
        tx = self.groups[group_id]
        chunks = tx.encoder.next_chunks(missing)
        packets = pack_group(
            chunks,
            self.ctx.coded.h,
            k=self.ctx.coded.k,
            group_id=group_id,
            directive=self.ctx.directive(now_us),
            tos=self.ctx.tos,
            flow_id=self.flow_id,
            seq_base=self.next_seq,
        )
        self.next_seq += len(packets)
        tx.sent += len(packets)
        self.retransmissions += len(packets)
        self.repair_chunks += missing
        return packets

    def on_ack(self, ack: Ack, now_us: float = 0) -> AckResponse:
        if ack.flow_id != self.flow_id:
            raise UnknownFlow(ack.flow_id)
        self.rate = update_rate(self.rate, ack)
        response = AckResponse(rate=self.rate.rate)
        if self.ctx.coded is None:
            if self.outstanding.pop(ack.seq, None) is None and ack.seq >= self.next_seq:
                raise UnknownFlow((ack.flow_id, ack.seq))
            return response
        tx = self.groups.get(ack.group_id)
        if tx is None:
            raise UnknownFlow((ack.flow_id, ack.group_id))
        tx.acked += 1
        tx.dof = max(tx.dof, ack.dof_received)
        if tx.dof >= self.ctx.coded.k:
            tx.complete = True
        elif tx.acked >= tx.sent:
            response.repair = self._repair(ack.group_id, self.ctx.coded.k - tx.dof, now_us)
        return response

    def on_timeout(self, key: tuple[str, int], epoch: int, now_us: float = 0) -> list[QualitativePacket]:
        """Loss timer expiry. Stale epochs are ignored."""
        if self._epochs.get(key) != epoch:
            return []
        kind, ident = key
        if kind == "seq":
            packet = self.outstanding.get(ident)
            if packet is None:
                return []
            self.rate = update_rate(self.rate, Ack(self.flow_id, ident, quality=0.0))
            self.retransmissions += 1
            return [packet]
        tx = self.groups[ident]
        if tx.complete:
            return []
        self.rate = update_rate(self.rate, Ack(self.flow_id, 0, group_id=ident, quality=0.0))
        return self._repair(ident, self.ctx.coded.k - tx.dof, now_us)

    def is_complete(self, group_id: int) -> bool:
        return self.groups[group_id].complete
