"""BPP-aware forwarding node: one finite egress FIFO with wash-or-drop admission."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Union

from .seeding import derive_seed
from .wash import (
    DropReason,
    DropWholePacket,
    Forward,
    NothingRemovable,
    WashContext,
    apply_wash,
    condition_met,
    quality_of_packet,
    select_victims,
    wash,
)
from .wire import QualitativePacket


class NodeMode(enum.Enum):
    LEGACY_DROPTAIL = "legacy"
    QUALITATIVE = "qualitative"


@dataclass(frozen=True)
class NodeConfig:
    node_id: str
    egress_capacity_bytes: int
    mode: NodeMode = NodeMode.QUALITATIVE
    wash_seed: int = 0
    # Serve the highest-ToS packet first instead of strict FIFO.
    priority_dequeue: bool = False


@dataclass(frozen=True)
class Enqueued:
    packet: QualitativePacket


@dataclass(frozen=True)
class EnqueuedWashed:
    packet: QualitativePacket
    quality: float
    bytes_removed: int


@dataclass(frozen=True)
class Dropped:
    reason: DropReason


AdmitResult = Union[Enqueued, EnqueuedWashed, Dropped]


@dataclass(frozen=True)
class NodeEvent:
    action: str  # admit | wash | drop | dequeue
    flow: int
    seq: int
    size: int
    outcome: str = ""
    quality: float = 1.0
    bytes_removed: int = 0
    group: int = 0


@dataclass
class EgressQueue:
    capacity_bytes: int
    packets: deque = field(default_factory=deque)
    occupied_bytes: int = 0

    @property
    def occupancy_pct(self) -> float:
        return 100.0 * self.occupied_bytes / self.capacity_bytes

    @property
    def free_bytes(self) -> int:
        return self.capacity_bytes - self.occupied_bytes

    def push(self, packet: QualitativePacket) -> None:
        size = packet.wire_size
        assert self.occupied_bytes + size <= self.capacity_bytes
        self.packets.append(packet)
        self.occupied_bytes += size

    def replace(self, index: int, packet: QualitativePacket) -> None:
        self.occupied_bytes += packet.wire_size - self.packets[index].wire_size
        self.packets[index] = packet

    def pop(self, index: int = 0) -> QualitativePacket:
        packet = self.packets[index]
        del self.packets[index]
        self.occupied_bytes -= packet.wire_size
        return packet

    def __len__(self) -> int:
        return len(self.packets)


class ForwardNode:
    def __init__(self, config: NodeConfig):
        self.config = config
        self.queue = EgressQueue(config.egress_capacity_bytes)
        self.log: list[NodeEvent] = []
        self._washes = 0

    @property
    def occupied_bytes(self) -> int:
        return self.queue.occupied_bytes

    def drain_log(self) -> list[NodeEvent]:
        out, self.log = self.log, []
        return out

    def _seed(self) -> int:
        self._washes += 1
        return derive_seed(self.config.wash_seed, self.config.node_id, self._washes)

    def _record(self, action: str, packet: QualitativePacket, **info) -> None:
        self.log.append(NodeEvent(action, packet.flow_id, packet.seq, packet.wire_size, group=packet.group_id, **info))

    def _trim_intact_residents(self, arrival: QualitativePacket, now_us: float) -> None:
        """Wash never-washed residents of equal ToS, newest first, until the arrival fits."""
        q = self.queue
        for idx in range(len(q) - 1, -1, -1):
            needed = arrival.wire_size - q.free_bytes
            if needed <= 0:
                return
            resident = q.packets[idx]
            if resident.washed or resident.tos != arrival.tos:
                continue
            ctx = WashContext(min(q.occupancy_pct, 100.0), needed, now_us, 0)
            if not condition_met(resident.directive, ctx):
                continue
            try:
                victims = select_victims(resident, ctx, self._seed())
            except NothingRemovable:
                continue
            if not victims:
                continue
            washed = apply_wash(resident, victims)
            removed = resident.wire_size - washed.wire_size
            q.replace(idx, washed)
            self._record("wash", washed, outcome="resident", quality=quality_of_packet(washed), bytes_removed=removed)

    def admit(self, packet: QualitativePacket, now_us: float = 0, residual_path_latency_us: float = 0) -> AdmitResult:
        q = self.queue
        size = packet.wire_size
        if self.config.mode is NodeMode.LEGACY_DROPTAIL:
            if size <= q.free_bytes:
                q.push(packet)
                self._record("admit", packet, outcome="enqueued")
                return Enqueued(packet)
            self._record("drop", packet, outcome=DropReason.QUEUE_FULL.value, quality=0.0)
            return Dropped(DropReason.QUEUE_FULL)

        if size > q.free_bytes:
            self._trim_intact_residents(packet, now_us)
        ctx = WashContext(
            queue_occupancy_pct=min(q.occupancy_pct, 100.0),
            bytes_needed=max(0, size - q.free_bytes),
            now_us=now_us,
            residual_path_latency_us=residual_path_latency_us,
        )
        outcome = wash(packet, ctx, self._seed())
        if isinstance(outcome, DropWholePacket):
            self._record("drop", packet, outcome=outcome.reason.value, quality=0.0)
            return Dropped(outcome.reason)
        if isinstance(outcome, Forward):
            washed = outcome.packet
            removed = size - washed.wire_size
            quality = quality_of_packet(washed)
            q.push(washed)
            self._record("wash", washed, outcome="arrival", quality=quality, bytes_removed=removed)
            return EnqueuedWashed(washed, quality, removed)
        if size > q.free_bytes:
            self._record("drop", packet, outcome=DropReason.QUEUE_FULL.value, quality=0.0)
            return Dropped(DropReason.QUEUE_FULL)
        q.push(packet)
        self._record("admit", packet, outcome="enqueued")
        return Enqueued(packet)

    def dequeue(self, now_us: float = 0) -> Optional[QualitativePacket]:
        q = self.queue
        if not q.packets:
            return None
        idx = 0
        if self.config.priority_dequeue:
            top = max(p.tos for p in q.packets)
            idx = next(i for i, p in enumerate(q.packets) if p.tos == top)
        packet = q.pop(idx)
        self._record("dequeue", packet, quality=quality_of_packet(packet))
        return packet
