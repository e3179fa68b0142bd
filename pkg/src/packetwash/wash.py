"""The Packet Wash operation.

Given a packet and the local congestion context, decide which chunks to
remove, rewrite the descriptors and payload, and escalate the packet's
priority. Everything here is a pure function of (packet, context, seed).
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, replace
from typing import Union

from .wire import (
    MAX_TOS,
    Condition,
    QFunction,
    QualitativePacket,
    WashDirective,
)


class UnknownCondition(ValueError):
    pass


class NothingRemovable(Exception):
    """No eligible chunk can be removed."""


class ThresholdExceeded(NothingRemovable):
    """Eligible chunks exist but removing any would break q_threshold."""


class DropReason(enum.Enum):
    THRESHOLD_EXCEEDED = "threshold_exceeded"
    DEADLINE_UNMEETABLE = "deadline_unmeetable"
    NOTHING_REMOVABLE = "nothing_removable"
    QUEUE_FULL = "queue_full"


@dataclass(frozen=True)
class WashContext:
    queue_occupancy_pct: float = 0
    bytes_needed: int = 0
    now_us: float = 0
    residual_path_latency_us: float = 0

    def __post_init__(self):
        if not 0 <= self.queue_occupancy_pct <= 100:
            raise ValueError("occupancy must be within 0..100")
        if self.bytes_needed < 0:
            raise ValueError("bytes_needed must be >= 0")


@dataclass(frozen=True)
class Forward:
    packet: QualitativePacket
    victims: tuple[int, ...]


@dataclass(frozen=True)
class ForwardUnchanged:
    packet: QualitativePacket


@dataclass(frozen=True)
class DropWholePacket:
    reason: DropReason


WashOutcome = Union[Forward, ForwardUnchanged, DropWholePacket]


def condition_met(directive: WashDirective, ctx: WashContext) -> bool:
    if directive.condition_code == Condition.QUEUE_OCCUPANCY_GE:
        return ctx.queue_occupancy_pct >= directive.condition_param
    raise UnknownCondition(f"condition code {directive.condition_code}")


def step_severity(occupancy_pct: float, condition_param: int, max_sig: int) -> int:
    """Significance level below which STEP chunks become removable.

    Grows linearly from 1 at ``condition_param`` up to ``max_sig`` at a full
    queue.
    """
    if max_sig <= 1:
        return 1
    if condition_param >= 100:
        return max_sig
    level = 1 + int((occupancy_pct - condition_param) * max_sig // (100 - condition_param))
    return max(1, min(level, max_sig))


def eligibility_order(packet: QualitativePacket, ctx: WashContext, rng_seed: int) -> list[int]:
    alive = packet.surviving()
    sigs = {i: packet.descriptors[i].sig for i in alive}
    qf = packet.directive.q_function
    if qf == QFunction.PRIORITY_ORDER:
        return sorted(alive, key=lambda i: (sigs[i], -i))
    if qf == QFunction.BINARY:
        return sorted((i for i in alive if sigs[i] == 0), reverse=True)
    if qf == QFunction.STEP:
        max_sig = max(d.sig for d in packet.descriptors)
        level = step_severity(ctx.queue_occupancy_pct, packet.directive.condition_param, max_sig)
        return sorted((i for i in alive if sigs[i] < level), key=lambda i: (sigs[i], -i))
    if qf == QFunction.CODED_RANDOM:
        return random.Random(rng_seed).sample(alive, len(alive))
    raise ValueError(f"unknown q-function {qf}")


def _plan(packet: QualitativePacket, ctx: WashContext, rng_seed: int) -> tuple[list[int], type | None]:
    """Victim prefix plus the exception explaining a shortfall, if any."""
    if ctx.bytes_needed <= 0:
        return [], None
    order = eligibility_order(packet, ctx, rng_seed)
    budget = len(packet.surviving()) - packet.directive.q_threshold
    if not order:
        return [], NothingRemovable
    if budget <= 0:
        return [], ThresholdExceeded
    victims = []
    freed = 0
    for i in order:
        if freed >= ctx.bytes_needed:
            break
        if len(victims) == budget:
            return victims, ThresholdExceeded
        victims.append(i)
        freed += packet.descriptors[i].length
    if freed < ctx.bytes_needed:
        return victims, ThresholdExceeded if len(victims) == budget else NothingRemovable
    return victims, None


def select_victims(packet: QualitativePacket, ctx: WashContext, rng_seed: int = 0) -> list[int]:
    """Smallest prefix of the eligibility order freeing ``ctx.bytes_needed`` bytes.

    The prefix never removes so many chunks that fewer than ``q_threshold``
    survive; if that cap (or the eligible set) runs out first, the capped
    prefix is returned and the caller decides whether it is enough.
    """
    victims, problem = _plan(packet, ctx, rng_seed)
    if problem is not None and not victims:
        if problem is ThresholdExceeded:
            raise ThresholdExceeded("q_threshold blocks removal")
        raise NothingRemovable("no eligible chunk")
    return victims


def apply_wash(packet: QualitativePacket, victims: list[int] | tuple[int, ...]) -> QualitativePacket:
    """Mark ``victims`` dropped, compact the payload and bump the ToS."""
    doomed = set(victims)
    descriptors = []
    payload = []
    cursor = 0
    for i, d in enumerate(packet.descriptors):
        if d.dropped:
            descriptors.append(d)
        elif i in doomed:
            descriptors.append(d.as_dropped())
        else:
            payload.append(packet.chunk(i))
            descriptors.append(replace(d, offset=cursor))
            cursor += d.length
    return replace(
        packet,
        descriptors=tuple(descriptors),
        payload=b"".join(payload),
        washed=True,
        tos=min(packet.tos + 1, MAX_TOS),
    )


def wash(packet: QualitativePacket, ctx: WashContext, rng_seed: int = 0) -> WashOutcome:
    directive = packet.directive
    if not condition_met(directive, ctx):
        return ForwardUnchanged(packet)
    if directive.deadline_us and ctx.now_us + ctx.residual_path_latency_us > directive.deadline_us:
        return DropWholePacket(DropReason.DEADLINE_UNMEETABLE)
    victims, problem = _plan(packet, ctx, rng_seed)
    if problem is ThresholdExceeded:
        return DropWholePacket(DropReason.THRESHOLD_EXCEEDED)
    if problem is NothingRemovable:
        return DropWholePacket(DropReason.NOTHING_REMOVABLE)
    if not victims:
        return ForwardUnchanged(packet)
    return Forward(apply_wash(packet, victims), tuple(victims))


def quality_of_packet(packet: QualitativePacket) -> float:
    """Share of significance that survived (share of chunks for coded packets)."""
    alive = packet.surviving()
    if packet.directive.q_function == QFunction.CODED_RANDOM:
        return len(alive) / packet.chunk_count
    total = sum(d.sig for d in packet.descriptors)
    if total == 0:
        return len(alive) / packet.chunk_count
    return sum(packet.descriptors[i].sig for i in alive) / total
