"""Deterministic discrete-event simulator.

Store-and-forward links with fixed propagation delay, one egress queue per
(node, outgoing link), static shortest-delay routes. Hosts have unbounded
drop-tail queues; routers run a :class:`ForwardNode` in the configured mode.
Time is in microseconds. Events are ordered by (time, insertion ordinal).
"""

from __future__ import annotations

import heapq
import json
import random
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np

from .endpoints import Ack, AppContext, RateState, Receiver, Sender
from .node import Dropped, ForwardNode, NodeConfig, NodeEvent, NodeMode
from .wash import quality_of_packet
from .wire import CODED_EXT_SIZE, DESCRIPTOR_SIZE, FIXED_HEADER_SIZE, QualitativePacket, encode

HOST_CAPACITY = 1 << 60


class BadScenario(ValueError):
    pass


class NoRoute(BadScenario):
    pass


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: str = "router"  # router | host
    mode: NodeMode = NodeMode.QUALITATIVE
    capacity_bytes: int = 64_000
    priority_dequeue: bool = False


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    bandwidth_bytes_per_s: float
    propagation_delay_us: float = 0.0

    def serialization_us(self, size: int) -> float:
        return size * 1e6 / self.bandwidth_bytes_per_s


@dataclass(frozen=True)
class FlowSpec:
    """A constant-bit-rate application.

    ``rate_bytes_per_s`` is the wire rate of first transmissions: frames are
    created every ``frame_wire_bytes / rate`` and their packets are paced at
    that rate. With ``adaptive`` the pacing follows the sender's rate state
    instead.
    """

    id: int
    src: str
    dst: str
    app: AppContext
    rate_bytes_per_s: float
    duration_us: float
    start_us: float = 0.0
    rto_us: float = 50_000.0
    adaptive: bool = False
    on_us: float = 0.0  # on-off pattern; 0 = always on
    off_us: float = 0.0
    max_frames: int = 0  # 0 = unlimited


@dataclass
class ScenarioConfig:
    nodes: list[NodeSpec]
    links: list[Link]
    flows: list[FlowSpec]
    seed: int = 0
    horizon_us: float = 0.0  # 0 = last flow end + 1 s
    preset: str = ""


@dataclass
class FlowMetrics:
    flow: int
    bytes_offered: int = 0
    bytes_delivered: int = 0
    goodput_bytes_per_s: float = 0.0
    latency_mean_us: float = 0.0
    latency_p50_us: float = 0.0
    latency_p99_us: float = 0.0
    units_sent: int = 0
    units_delivered: int = 0
    packets_sent: int = 0
    packets_washed: int = 0
    wash_ops: int = 0
    packets_dropped: int = 0
    retransmissions: int = 0
    repair_chunks: int = 0
    mean_quality: float = 0.0
    payload_sent: int = 0
    payload_received: int = 0
    payload_washed: int = 0
    payload_dropped: int = 0
    payload_in_flight: int = 0
    corrupt_deliveries: int = 0
    final_rate: float = 0.0

    def row(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class SimResult:
    metrics: dict[int, FlowMetrics]
    trace: list[dict]
    latencies: dict[int, list[float]]

    def trace_lines(self) -> str:
        return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in self.trace)


class Topology:
    def __init__(self, nodes: list[NodeSpec], links: list[Link]):
        self.nodes = {n.id: n for n in nodes}
        if len(self.nodes) != len(nodes):
            raise BadScenario("duplicate node id")
        self.links: dict[tuple[str, str], Link] = {}
        for link in links:
            if link.src not in self.nodes or link.dst not in self.nodes:
                raise BadScenario(f"link {link.src}->{link.dst} references an unknown node")
            if link.bandwidth_bytes_per_s <= 0 or link.propagation_delay_us < 0:
                raise BadScenario(f"link {link.src}->{link.dst} needs bandwidth > 0 and delay >= 0")
            self.links[(link.src, link.dst)] = link
        self.adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for src, dst in sorted(self.links):
            self.adj[src].append(dst)
        self._paths: dict[tuple[str, str], list[str]] = {}

    def path(self, src: str, dst: str) -> list[str]:
        """Shortest-delay path (ties broken by hop count, then node ids)."""
        key = (src, dst)
        if key in self._paths:
            return self._paths[key]
        if src not in self.nodes or dst not in self.nodes:
            raise NoRoute(f"{src}->{dst}")
        best = {src: (0.0, 0, [src])}
        heap = [(0.0, 0, [src])]
        done = set()
        while heap:
            d, hops, path = heapq.heappop(heap)
            node = path[-1]
            if node in done:
                continue
            done.add(node)
            if node == dst:
                self._paths[key] = path
                return path
            for nxt in self.adj[node]:
                cand = (d + self.links[(node, nxt)].propagation_delay_us, hops + 1, path + [nxt])
                if nxt not in best or cand < best[nxt]:
                    best[nxt] = cand
                    heapq.heappush(heap, cand)
        raise NoRoute(f"{src}->{dst}")

    def next_hop(self, node: str, dst: str) -> str:
        return self.path(node, dst)[1]


def residual_latency(topology: Topology, node: str, dest: str, min_packet_bytes: int = 28) -> float:
    """Lower bound on the time from ``node`` to ``dest``: propagation plus serialization, no queuing."""
    path = topology.path(node, dest)
    total = 0.0
    for a, b in zip(path, path[1:]):
        link = topology.links[(a, b)]
        total += link.propagation_delay_us + link.serialization_us(min_packet_bytes)
    return total


def min_washed_size(packet: QualitativePacket) -> int:
    """Wire size after washing down to the q_threshold smallest survivors."""
    lengths = sorted(packet.descriptors[i].length for i in packet.surviving())
    keep = min(len(lengths), packet.directive.q_threshold)
    return packet.header_size + sum(lengths[:keep])


@dataclass
class _LinkState:
    link: Link
    egress: ForwardNode
    busy: bool = False
    current: Optional[QualitativePacket] = None


@dataclass
class _FlowState:
    spec: FlowSpec
    sender: Sender
    receiver: Receiver
    path: list[str]
    backlog: deque = field(default_factory=deque)
    pacing: bool = False
    frames: int = 0
    originals: dict[int, bytes] = field(default_factory=dict)
    born: dict[int, float] = field(default_factory=dict)
    latencies: list[float] = field(default_factory=list)
    qualities: list[float] = field(default_factory=list)
    washed_seqs: set = field(default_factory=set)


class Simulator:
    def __init__(self, scenario: ScenarioConfig, trace: bool = True):
        self.scenario = scenario
        self.topology = Topology(scenario.nodes, scenario.links)
        self.trace_enabled = trace
        self.trace: list[dict] = []
        self.now = 0.0
        self._heap: list = []
        self._ordinal = 0
        self.metrics: dict[int, FlowMetrics] = {}
        self._validate()
        self.links: dict[tuple[str, str], _LinkState] = {}
        for key, link in self.topology.links.items():
            spec = self.topology.nodes[link.src]
            if spec.kind == "host":
                cfg = NodeConfig(f"{link.src}>{link.dst}", HOST_CAPACITY, NodeMode.LEGACY_DROPTAIL)
            else:
                cfg = NodeConfig(
                    f"{link.src}>{link.dst}",
                    spec.capacity_bytes,
                    spec.mode,
                    wash_seed=scenario.seed,
                    priority_dequeue=spec.priority_dequeue,
                )
            self.links[key] = _LinkState(link, ForwardNode(cfg))
        self.flows: dict[int, _FlowState] = {}
        for f in scenario.flows:
            fm = self.metrics[f.id] = FlowMetrics(flow=f.id)
            path = self.topology.path(f.src, f.dst)
            rtt = 2 * residual_latency(self.topology, f.src, f.dst, 1500)
            rate = RateState(
                rate=f.rate_bytes_per_s,
                min_rate=f.rate_bytes_per_s / 64,
                max_rate=f.rate_bytes_per_s,
                increase=1500 * 1e6 / max(rtt, 1.0),
            )
            sender = Sender(f.id, f.app, rate, seed=scenario.seed)
            receiver = Receiver(f.id, f.app, on_deliver=self._delivery_handler(f.id, fm))
            self.flows[f.id] = _FlowState(f, sender, receiver, path)
        self._data_rng = random.Random(scenario.seed)

    def _validate(self) -> None:
        sc = self.scenario
        ids = set()
        for f in sc.flows:
            if f.id in ids:
                raise BadScenario(f"duplicate flow id {f.id}")
            ids.add(f.id)
            if f.duration_us <= 0 or f.rate_bytes_per_s <= 0:
                raise BadScenario(f"flow {f.id}: duration and rate must be positive")
            for end in (f.src, f.dst):
                if end not in self.topology.nodes:
                    raise BadScenario(f"flow {f.id}: unknown node {end}")
            try:
                f.app.validate()
            except ValueError as exc:
                raise BadScenario(f"flow {f.id}: {exc}") from exc
            path = self.topology.path(f.src, f.dst)
            biggest = _first_packet_size(f.app)
            for node in path[1:-1]:
                spec = self.topology.nodes[node]
                if spec.kind == "router" and spec.capacity_bytes <= biggest:
                    raise BadScenario(f"node {node}: capacity must exceed packet size {biggest}")

    def _delivery_handler(self, flow_id: int, fm: FlowMetrics):
        def handler(key: int, data, quality: float) -> None:
            st = self.flows[flow_id]
            if isinstance(data, dict):
                nbytes = sum(len(v) for v in data.values())
                original = st.originals.pop(key, None)
                if original is not None:
                    ok = all(original[i] == v for i, v in data.items())
                    fm.corrupt_deliveries += not ok
            else:
                nbytes = len(data)
                original = st.originals.pop(key, None)
                if original is not None and original != data:
                    fm.corrupt_deliveries += 1
            fm.bytes_delivered += nbytes
            fm.units_delivered += 1
            born = st.born.pop(key, None)
            if born is not None:
                st.latencies.append(self.now - born)
            self._log(st.spec.dst, "deliver", flow_id, key, nbytes, "ok", quality)

        return handler

    def _push(self, t: float, kind: str, *payload) -> None:
        self._ordinal += 1
        heapq.heappush(self._heap, (t, self._ordinal, kind, payload))

    def _log(self, node, action, flow, seq, size, outcome="", quality=1.0) -> None:
        if self.trace_enabled:
            self.trace.append(
                {
                    "time_us": round(self.now, 3),
                    "node": node,
                    "action": action,
                    "flow": flow,
                    "seq": seq,
                    "size": size,
                    "outcome": outcome,
                    "quality": round(quality, 6),
                }
            )

    def _node_events(self, node_id: str, events: list[NodeEvent]) -> None:
        for ev in events:
            fm = self.metrics.get(ev.flow)
            if fm is not None:
                if ev.action == "wash":
                    fm.wash_ops += 1
                    fm.payload_washed += ev.bytes_removed
                    self.flows[ev.flow].washed_seqs.add(ev.seq)
            self._log(node_id, ev.action, ev.flow, ev.seq, ev.size, ev.outcome, ev.quality)

    # application

    def _frame_interval(self, st: _FlowState) -> float:
        return _first_packet_size(st.spec.app, total=True) * 1e6 / st.spec.rate_bytes_per_s

    def _app_send(self, flow_id: int) -> None:
        st = self.flows[flow_id]
        spec = st.spec
        end = spec.start_us + spec.duration_us
        if self.now >= end or (spec.max_frames and st.frames >= spec.max_frames):
            return
        interval = self._frame_interval(st)
        if spec.on_us and spec.off_us:
            phase = (self.now - spec.start_us) % (spec.on_us + spec.off_us)
            if phase >= spec.on_us:
                self._push(self.now + (spec.on_us + spec.off_us - phase), "app", flow_id)
                return
        data = self._data_rng.randbytes(spec.app.frame_bytes)
        packets = st.sender.send_frame(data, self.now)
        st.frames += 1
        fm = self.metrics[flow_id]
        fm.bytes_offered += len(data)
        if spec.app.coded:
            gpf = spec.app.groups_per_frame
            first = packets[0].group_id
            pos = 0
            for g in range(gpf):
                gid = (first + g) & 0xFFFF
                n = sum(spec.app.group_lengths(g))
                st.originals[gid] = data[pos : pos + n]
                st.born[gid] = self.now
                pos += n
                fm.units_sent += 1
        else:
            p = packets[0]
            st.originals[p.seq] = {i: p.chunk(i) for i in range(p.chunk_count)}
            st.born[p.seq] = self.now
            fm.units_sent += 1
        self._log(spec.src, "app-send", flow_id, packets[0].seq, len(data))
        st.backlog.extend(packets)
        self._kick_sender(flow_id)
        self._push(self.now + interval, "app", flow_id)

    def _kick_sender(self, flow_id: int) -> None:
        st = self.flows[flow_id]
        if not st.pacing and st.backlog:
            st.pacing = True
            self._push(self.now, "pace", flow_id)

    def _pace(self, flow_id: int) -> None:
        st = self.flows[flow_id]
        if not st.backlog:
            st.pacing = False
            return
        packet = st.backlog.popleft()
        self._inject(st, packet)
        rate = st.sender.rate.rate if st.spec.adaptive else st.spec.rate_bytes_per_s
        self._push(self.now + packet.wire_size * 1e6 / rate, "pace", flow_id)

    def _inject(self, st: _FlowState, packet: QualitativePacket) -> None:
        fm = self.metrics[st.spec.id]
        fm.packets_sent += 1
        fm.payload_sent += len(packet.payload)
        key = st.sender.timer_key(packet)
        epoch = st.sender.arm(key)
        self._push(self.now + st.spec.rto_us, "timeout", st.spec.id, key, epoch)
        self._log(st.spec.src, "send", st.spec.id, packet.seq, packet.wire_size)
        self._arrive(st.spec.src, packet)

    # network

    def _arrive(self, node: str, packet: QualitativePacket) -> None:
        st = self.flows[packet.flow_id]
        if node == st.spec.dst:
            self._receive(st, packet)
            return
        nxt = self.topology.next_hop(node, st.spec.dst)
        ls = self.links[(node, nxt)]
        residual = residual_latency(self.topology, node, st.spec.dst, min_washed_size(packet))
        payload = len(packet.payload)
        result = ls.egress.admit(packet, self.now, residual)
        self._node_events(node, ls.egress.drain_log())
        if isinstance(result, Dropped):
            fm = self.metrics[packet.flow_id]
            fm.packets_dropped += 1
            fm.payload_dropped += payload
        self._start_tx(ls)

    def _start_tx(self, ls: _LinkState) -> None:
        if ls.busy:
            return
        packet = ls.egress.dequeue(self.now)
        self._node_events(ls.link.src, ls.egress.drain_log())
        if packet is None:
            return
        ls.busy = True
        ls.current = packet
        self._push(self.now + ls.link.serialization_us(packet.wire_size), "tx-done", (ls.link.src, ls.link.dst))

    def _tx_done(self, key: tuple[str, str]) -> None:
        ls = self.links[key]
        packet = ls.current
        ls.busy = False
        ls.current = None
        self._push(self.now + ls.link.propagation_delay_us, "arrive", ls.link.dst, packet)
        self._start_tx(ls)

    def _receive(self, st: _FlowState, packet: QualitativePacket) -> None:
        fm = self.metrics[st.spec.id]
        fm.payload_received += len(packet.payload)
        if packet.washed:
            fm.packets_washed += 1
        ack = st.receiver.receive(encode(packet), seq=packet.seq)
        st.qualities.append(ack.quality)
        self._log(st.spec.dst, "receive", st.spec.id, packet.seq, packet.wire_size, "washed" if packet.washed else "intact", quality_of_packet(packet))
        back = residual_latency(self.topology, st.spec.src, st.spec.dst, 0)
        self._push(self.now + back, "ack", st.spec.id, ack)

    def _ack(self, flow_id: int, ack: Ack) -> None:
        st = self.flows[flow_id]
        response = st.sender.on_ack(ack, self.now)
        self._log(st.spec.src, "ack", flow_id, ack.seq, 0, f"dof={ack.dof_received}", ack.quality)
        if response.repair:
            self._log(st.spec.src, "repair", flow_id, response.repair[0].seq, len(response.repair))
            st.backlog.extendleft(reversed(response.repair))
            self._kick_sender(flow_id)

    def _timeout(self, flow_id: int, key, epoch: int) -> None:
        st = self.flows[flow_id]
        packets = st.sender.on_timeout(key, epoch, self.now)
        if packets:
            self._log(st.spec.src, "timeout", flow_id, packets[0].seq, len(packets), key[0])
            st.backlog.extendleft(reversed(packets))
            self._kick_sender(flow_id)

    def run(self) -> SimResult:
        sc = self.scenario
        horizon = sc.horizon_us or max(f.start_us + f.duration_us for f in sc.flows) + 1e6
        for f in sc.flows:
            self._push(f.start_us, "app", f.id)
        handlers = {
            "app": self._app_send,
            "pace": self._pace,
            "arrive": self._arrive,
            "tx-done": self._tx_done,
            "ack": self._ack,
            "timeout": self._timeout,
        }
        while self._heap and self._heap[0][0] <= horizon:
            t, _, kind, payload = heapq.heappop(self._heap)
            assert t >= self.now
            self.now = t
            handlers[kind](*payload)
        self._finish(horizon)
        return SimResult(self.metrics, self.trace, {fid: st.latencies for fid, st in self.flows.items()})

    def _finish(self, horizon: float) -> None:
        for ls in self.links.values():
            for p in list(ls.egress.queue.packets) + ([ls.current] if ls.current else []):
                self.metrics[p.flow_id].payload_in_flight += len(p.payload)
        for _, _, kind, payload in self._heap:
            if kind == "arrive":
                p = payload[1]
                self.metrics[p.flow_id].payload_in_flight += len(p.payload)
        for fid, st in self.flows.items():
            fm = self.metrics[fid]
            lat = st.latencies
            if lat:
                fm.latency_mean_us = float(np.mean(lat))
                fm.latency_p50_us = float(np.percentile(lat, 50))
                fm.latency_p99_us = float(np.percentile(lat, 99))
            fm.goodput_bytes_per_s = fm.bytes_delivered * 1e6 / st.spec.duration_us
            fm.mean_quality = float(np.mean(st.qualities)) if st.qualities else 0.0
            fm.retransmissions = st.sender.retransmissions
            fm.repair_chunks = st.sender.repair_chunks
            fm.final_rate = st.sender.rate.rate


def _first_packet_size(app: AppContext, total: bool = False) -> int:
    """Wire size of the largest first-transmission packet of a frame (or of all of them)."""
    if app.coded is None:
        return FIXED_HEADER_SIZE + DESCRIPTOR_SIZE * len(app.chunking) + app.frame_bytes
    c = app.coded
    sizes = []
    for g in range(app.groups_per_frame):
        chunk_len = max(app.group_lengths(g))
        per_chunk = DESCRIPTOR_SIZE + c.k + chunk_len
        full, rest = divmod(c.k_prime, c.h)
        sizes += [FIXED_HEADER_SIZE + CODED_EXT_SIZE + per_chunk * c.h] * full
        if rest:
            sizes.append(FIXED_HEADER_SIZE + CODED_EXT_SIZE + per_chunk * rest)
    return sum(sizes) if total else max(sizes)


def run(scenario: ScenarioConfig, trace: bool = True) -> SimResult:
    return Simulator(scenario, trace=trace).run()
