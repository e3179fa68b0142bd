"""Scenario files and built-in presets.

A scenario file is YAML::

    seed: 7
    horizon_us: 3000000          # optional; default = last flow end + 1 s
    compare_modes: [qualitative, legacy]   # optional: one run per router mode
    nodes:
      - {id: S, kind: host}
      - {id: R, kind: router, mode: qualitative, capacity_bytes: 16000}
      - {id: D, kind: host}
    links:
      - {src: S, dst: R, bandwidth_bytes_per_s: 1.0e8, propagation_delay_us: 50}
      - {src: R, dst: D, bandwidth_bytes_per_s: 1.25e6, propagation_delay_us: 1000}
    flows:
      - id: 1
        src: S
        dst: D
        rate_bytes_per_s: 1.875e6
        duration_us: 2000000
        rto_us: 40000
        app:
          chunks: [{length: 250, sig: 0, repeat: 4}]
          q_function: CODED_RANDOM
          q_threshold: 2
          condition_param: 50
          coded: {k: 4, k_prime: 8, h: 4}

``chunks`` entries expand ``repeat`` times (default 1). Unknown keys are
rejected.
"""

from __future__ import annotations

import random
from dataclasses import fields, replace
from pathlib import Path
from typing import Any, Callable

import yaml

from .endpoints import AppContext, Coding
from .node import NodeMode
from .sim import BadScenario, FlowSpec, Link, NodeSpec, ScenarioConfig
from .wire import CODED_EXT_SIZE, DESCRIPTOR_SIZE, FIXED_HEADER_SIZE, QFunction

Runs = list[tuple[str, ScenarioConfig]]


def _only(d: dict, allowed: set[str], where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise BadScenario(f"{where}: unknown keys {sorted(extra)}")


def _names(cls) -> set[str]:
    return {f.name for f in fields(cls)}


def _cast(kind: str, value):
    if kind in ("int", "float"):
        number = float(value)
        return int(number) if kind == "int" else number
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValueError("expected true or false")
        return value
    if kind == "str":
        return str(value)
    return value


def _build(cls, d: dict, where: str, **override):
    """Instantiate ``cls`` from ``d``, casting scalars to the declared field types.

    PyYAML reads ``1.0e8`` as a string (YAML 1.1 wants ``1.0e+8``), so numbers
    are converted here rather than trusted.
    """
    _only(d, _names(cls), where)
    kwargs = {}
    for f in fields(cls):
        if f.name in override or f.name not in d:
            continue
        try:
            kwargs[f.name] = _cast(f.type, d[f.name])
        except (TypeError, ValueError) as exc:
            raise BadScenario(f"{where}.{f.name}: cannot use {d[f.name]!r}") from exc
    return cls(**kwargs, **override)


def _mode(value: str | NodeMode) -> NodeMode:
    try:
        return NodeMode(value) if isinstance(value, str) else value
    except ValueError as exc:
        raise BadScenario(f"unknown node mode {value!r}") from exc


def _app(d: dict) -> AppContext:
    _only(d, {"chunks", "q_function", "q_threshold", "condition_param", "tos", "deadline_us", "coded"}, "app")
    chunking = []
    for c in d.get("chunks", []):
        _only(c, {"length", "sig", "repeat"}, "app.chunks")
        chunking += [(int(c["length"]), int(c.get("sig", 0)))] * int(c.get("repeat", 1))
    try:
        qf = QFunction[d.get("q_function", "PRIORITY_ORDER")]
    except KeyError as exc:
        raise BadScenario(f"unknown q_function {d.get('q_function')!r}") from exc
    coded = None
    if d.get("coded"):
        _only(d["coded"], {"k", "k_prime", "h"}, "app.coded")
        coded = Coding(**{k: int(v) for k, v in d["coded"].items()})
    return AppContext(
        chunking=tuple(chunking),
        q_function=qf,
        q_threshold=int(d.get("q_threshold", 1)),
        condition_param=int(d.get("condition_param", 90)),
        tos=int(d.get("tos", 0)),
        deadline_us=int(d.get("deadline_us", 0)),
        coded=coded,
    )


def scenario_from_dict(doc: dict[str, Any]) -> Runs:
    if not isinstance(doc, dict):
        raise BadScenario("scenario must be a mapping")
    _only(doc, {"seed", "horizon_us", "compare_modes", "nodes", "links", "flows", "name"}, "scenario")
    try:
        nodes = [_build(NodeSpec, n, "node", mode=_mode(n.get("mode", NodeMode.QUALITATIVE))) for n in doc["nodes"]]
        links = [_build(Link, link, "link") for link in doc["links"]]
        flows = [_build(FlowSpec, f, "flow", app=_app(f.get("app", {}))) for f in doc["flows"]]
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise BadScenario(f"malformed scenario: {exc}") from exc
    base = ScenarioConfig(
        nodes=nodes,
        links=links,
        flows=flows,
        seed=int(doc.get("seed", 0)),
        horizon_us=float(doc.get("horizon_us", 0)),
        preset=str(doc.get("name", "")),
    )
    modes = doc.get("compare_modes")
    if not modes:
        return [("run", base)]
    return [(str(m), with_router_mode(base, _mode(m))) for m in modes]


def load_scenario(path: str | Path) -> Runs:
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise BadScenario(f"{path}: {exc}") from exc
    return scenario_from_dict(doc)


def with_router_mode(scenario: ScenarioConfig, mode: NodeMode) -> ScenarioConfig:
    nodes = [replace(n, mode=mode) if n.kind == "router" else n for n in scenario.nodes]
    return replace(scenario, nodes=nodes)


# presets


def coded_packet_size(k: int, h: int, chunk_len: int) -> int:
    return FIXED_HEADER_SIZE + CODED_EXT_SIZE + h * (DESCRIPTOR_SIZE + k + chunk_len)


def fig2_coding(seed: int = 0) -> Runs:
    """One k=5 group coded to 6 chunks in two 3-chunk packets.

    A 400-byte background packet occupies the router's output link, so the
    second coded packet finds the first still queued and one random coded
    chunk gets washed to make room.
    """
    nodes = [
        NodeSpec("S", "host"),
        NodeSpec("B", "host"),
        NodeSpec("R", "router", NodeMode.QUALITATIVE, capacity_bytes=620),
        NodeSpec("D", "host"),
    ]
    links = [
        Link("S", "R", 1e8, 10),
        Link("B", "R", 1e8, 10),
        Link("R", "D", 1e6, 100),
    ]
    coded = AppContext(
        chunking=((100, 0),) * 5,
        q_function=QFunction.CODED_RANDOM,
        q_threshold=2,
        condition_param=50,
        coded=Coding(k=5, k_prime=6, h=3),
    )
    background = AppContext(chunking=((400, 1),), q_threshold=1)
    flows = [
        FlowSpec(1, "S", "D", coded, rate_bytes_per_s=5e7, duration_us=1000, start_us=50, max_frames=1, rto_us=20_000),
        FlowSpec(2, "B", "D", background, rate_bytes_per_s=5e7, duration_us=1000, max_frames=1, rto_us=20_000),
    ]
    return [("qualitative", ScenarioConfig(nodes, links, flows, seed=seed, horizon_us=100_000, preset="fig2-coding"))]


FOV_TILE = 1000
FOV_TILES = 6
FOV_FRAMES = 2000


def fov_tiles(seed: int = 0) -> Runs:
    """360-degree video: one Gold tile in the field of view plus five Bronze tiles.

    The congested hop serves exactly one washed packet (header + Gold tile)
    per frame interval, so at steady state every Bronze tile is washed out.
    """
    app = AppContext(
        chunking=((FOV_TILE, 1),) + ((FOV_TILE, 0),) * (FOV_TILES - 1),
        q_function=QFunction.BINARY,
        q_threshold=1,
        condition_param=50,
    )
    header = FIXED_HEADER_SIZE + DESCRIPTOR_SIZE * FOV_TILES
    washed = header + FOV_TILE  # bytes per frame the bottleneck can carry
    full = header + FOV_TILE * FOV_TILES
    bottleneck = 1e6
    interval_us = washed * 1e6 / bottleneck
    nodes = [
        NodeSpec("S", "host"),
        NodeSpec("R", "router", NodeMode.QUALITATIVE, capacity_bytes=8000),
        NodeSpec("D", "host"),
    ]
    links = [Link("S", "R", 1e8, 10), Link("R", "D", bottleneck, 100)]
    flows = [
        FlowSpec(
            1,
            "S",
            "D",
            app,
            rate_bytes_per_s=full * 1e6 / interval_us,
            duration_us=interval_us * FOV_FRAMES,
            max_frames=FOV_FRAMES,
            rto_us=1e9,
        )
    ]
    return [("qualitative", ScenarioConfig(nodes, links, flows, seed=seed, preset="fov-tiles"))]


def dumbbell(
    seed: int = 0,
    load: float = 1.5,
    mode: NodeMode = NodeMode.QUALITATIVE,
    duration_us: float = 2_000_000,
    n_flows: int = 2,
) -> ScenarioConfig:
    """``n_flows`` coded flows share a 1.25 MB/s bottleneck at ``load`` times its rate.

    Groups of k=4 chunks are coded to 8 and sent in two packets whose
    threshold keeps 2 of 4 chunks, so a washed group always still decodes.
    """
    bottleneck = 1.25e6
    app = AppContext(
        chunking=((250, 0),) * 4,
        q_function=QFunction.CODED_RANDOM,
        q_threshold=2,
        condition_param=50,
        coded=Coding(k=4, k_prime=8, h=4),
    )
    packet = coded_packet_size(4, 4, 250)
    nodes = [NodeSpec("R1", "router", mode, capacity_bytes=16_000), NodeSpec("R2", "router", mode, capacity_bytes=64_000)]
    links = [Link("R1", "R2", bottleneck, 1000)]
    flows = []
    rng = random.Random(seed)
    per_flow = load * bottleneck / n_flows
    gap_us = packet * 1e6 / per_flow
    for i in range(n_flows):
        s, d = f"S{i + 1}", f"D{i + 1}"
        nodes += [NodeSpec(s, "host"), NodeSpec(d, "host")]
        links += [Link(s, "R1", 1e8, 50), Link("R2", d, 1e8, 50)]
        # spread flows across one packet gap, jittered by the seed
        start = gap_us * (i + rng.uniform(0.25, 0.75)) / n_flows
        flows.append(FlowSpec(i + 1, s, d, app, rate_bytes_per_s=per_flow, duration_us=duration_us, start_us=start, rto_us=40_000))
    return ScenarioConfig(nodes, links, flows, seed=seed, horizon_us=duration_us + 1_000_000, preset="legacy-vs-wash")


def legacy_vs_wash(seed: int = 0) -> Runs:
    return [
        ("qualitative", dumbbell(seed, 1.5, NodeMode.QUALITATIVE)),
        ("legacy", dumbbell(seed, 1.5, NodeMode.LEGACY_DROPTAIL)),
    ]


def uncongested(seed: int = 0) -> Runs:
    return [("qualitative", dumbbell(seed, 0.5, NodeMode.QUALITATIVE, duration_us=1_000_000))]


PRESETS: dict[str, Callable[[int], Runs]] = {
    "fig2-coding": fig2_coding,
    "fov-tiles": fov_tiles,
    "legacy-vs-wash": legacy_vs_wash,
    "uncongested": uncongested,
}


def resolve(name_or_path: str, seed: int | None = None) -> Runs:
    if name_or_path in PRESETS:
        return PRESETS[name_or_path](seed or 0)
    path = Path(name_or_path)
    if not path.exists():
        raise BadScenario(f"no preset or file named {name_or_path!r} (presets: {', '.join(PRESETS)})")
    runs = load_scenario(path)
    if seed is not None:
        runs = [(label, replace(sc, seed=seed)) for label, sc in runs]
    return runs
