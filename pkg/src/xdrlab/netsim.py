"""Fluid-flow network simulator over a multi-domain graph.

Stands in for a real testbed: flows are rates, not packets. Each step
covers one interval of ``delta_t`` seconds and refreshes per-link counters
(used bandwidth, synthetic byte/packet counters, drops, errors) plus a
queueing-style delay estimate. Timestamp-exchange probes reconstruct link
delay the way the intra- and inter-domain measurement protocols do, so the
telemetry layer never reads ``measured_delay`` directly.

Counter model per interval:
  offered   = sum of the rates of active flows arriving at the link (Mbit/s)
  used_bw   = min(offered, capacity)
  tx_pkts   = offered * delta_t at 1250-byte packets
  drops     = tx_pkts * max(0, offered - capacity) / offered, shared
              proportionally by all flows on the link
  delay     = base_delay * (1 + q * u / (1 - u)), u = min(offered/cap, u_max)
  errors    ~ Binomial(rx_pkts, p_err)

Fluid is conserved along a path: traffic dropped at a saturated link never
arrives at the links after it, so a flow's rate at link i is its source
rate scaled by the bottlenecks it already passed. The mutual coupling
(every flow's surviving rate depends on every other's) is resolved by a
short fixed-point iteration, which is monotone and settles in a few sweeps.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .topology import NetworkGraph

PACKET_BYTES = 1250
PKTS_PER_MBIT = 1_000_000 / (PACKET_BYTES * 8)  # = 100 packets per Mbit
CTRL_ECHO_ONE_WAY_MS = 0.5  # controller<->switch leg used by delay probes


class SimError(Exception):
    pass


class InvalidPath(SimError):
    """Flow path is not a simple src->dst walk over existing links."""


class NotIntraDomain(SimError):
    pass


class NotInterDomain(SimError):
    pass


@dataclass(frozen=True)
class FlowDemand:
    src: str
    dst: str
    rate_mbit: float
    start_tick: int = 0
    end_tick: int = 2**31

    def __post_init__(self) -> None:
        if self.rate_mbit <= 0:
            raise SimError(f"rate must be > 0, got {self.rate_mbit}")
        if self.src == self.dst:
            raise SimError("src and dst must differ")


@dataclass
class LinkRuntime:
    """Per-link counters for the most recent interval."""

    used_bw: float = 0.0
    tx_bytes: int = 0
    rx_bytes: int = 0
    tx_pkts: int = 0
    rx_pkts: int = 0
    drops: int = 0
    errors: int = 0
    measured_delay: float = 0.0


@dataclass
class Snapshot:
    """Read-only copy of all link counters at a tick boundary."""

    tick: int
    links: dict[tuple[str, str], LinkRuntime]


@dataclass
class _Flow:
    demand: FlowDemand
    path: tuple[str, ...]
    links: tuple[tuple[str, str], ...]


@dataclass
class SimState:
    graph: NetworkGraph
    seed: int
    q_factor: float = 1.0
    u_max: float = 0.99
    p_err: float = 1e-4
    probe_jitter_ms: float = 0.1
    clock: int = 0
    links: dict[tuple[str, str], LinkRuntime] = field(default_factory=dict)
    flows: dict[int, _Flow] = field(default_factory=dict)
    _next_flow_id: int = 1
    rng: np.random.Generator = None  # type: ignore[assignment]


def init_sim(
    graph: NetworkGraph,
    seed: int,
    *,
    q_factor: float = 1.0,
    u_max: float = 0.99,
    p_err: float = 1e-4,
    probe_jitter_ms: float = 0.1,
) -> SimState:
    """Fresh simulator: zeroed counters, empty flow set, clock 0."""
    sim = SimState(
        graph=graph,
        seed=seed,
        q_factor=q_factor,
        u_max=u_max,
        p_err=p_err,
        probe_jitter_ms=probe_jitter_ms,
    )
    sim.rng = np.random.default_rng(seed)
    for link in graph.links():
        sim.links[link] = LinkRuntime(measured_delay=graph.edges[link].base_delay_ms)
    return sim


def _validate_path(graph: NetworkGraph, demand: FlowDemand, path) -> _Flow:
    path = tuple(path)
    if len(path) < 2 or path[0] != demand.src or path[-1] != demand.dst:
        raise InvalidPath(f"path {path} does not connect {demand.src}->{demand.dst}")
    if len(set(path)) != len(path):
        raise InvalidPath(f"path {path} is not simple")
    links = []
    for a, b in zip(path, path[1:]):
        if not graph.has_link(a, b):
            raise InvalidPath(f"no link between {a} and {b}")
        links.append((min(a, b), max(a, b)))
    return _Flow(demand, path, tuple(links))


def assign_flow(sim: SimState, demand: FlowDemand, path) -> int:
    """Register a flow on an explicit path; active from its start tick."""
    flow = _validate_path(sim.graph, demand, path)
    fid = sim._next_flow_id
    sim._next_flow_id += 1
    sim.flows[fid] = flow
    return fid


def remove_flow(sim: SimState, flow_id: int) -> None:
    sim.flows.pop(flow_id, None)


def clear_flows(sim: SimState) -> None:
    sim.flows.clear()


_FIXED_POINT_SWEEPS = 8


def _offered_loads(sim: SimState, tick: int) -> dict[tuple[str, str], float]:
    """Per-link arriving load with conservation along each flow's path."""
    active = [
        f for f in sim.flows.values()
        if f.demand.start_tick <= tick < f.demand.end_tick
    ]
    scale: dict[tuple[str, str], float] = {link: 1.0 for link in sim.links}
    offered: dict[tuple[str, str], float] = {link: 0.0 for link in sim.links}
    for _ in range(_FIXED_POINT_SWEEPS):
        offered = {link: 0.0 for link in sim.links}
        for flow in active:
            rate = flow.demand.rate_mbit
            for link in flow.links:
                offered[link] += rate
                rate *= scale[link]
        new_scale = {
            link: min(1.0, sim.graph.edges[link].capacity_mbit / load)
            if load > 0.0
            else 1.0
            for link, load in offered.items()
        }
        if all(abs(new_scale[l] - scale[l]) < 1e-12 for l in scale):
            scale = new_scale
            break
        scale = new_scale
    offered = {link: 0.0 for link in sim.links}
    for flow in active:
        rate = flow.demand.rate_mbit
        for link in flow.links:
            offered[link] += rate
            rate *= scale[link]
    return offered


def step(sim: SimState, delta_t: float = 1.0) -> None:
    """Advance one interval, refreshing every link's counters."""
    if delta_t <= 0:
        raise SimError(f"delta_t must be > 0, got {delta_t}")
    offered = _offered_loads(sim, sim.clock)
    for link, rt in sim.links.items():
        cap = sim.graph.edges[link].capacity_mbit
        base = sim.graph.edges[link].base_delay_ms
        load = offered[link]
        rt.used_bw = min(load, cap)
        tx_mbit = load * delta_t
        rt.tx_pkts = int(round(tx_mbit * PKTS_PER_MBIT))
        rt.tx_bytes = rt.tx_pkts * PACKET_BYTES
        if load > cap:
            drop_frac = (load - cap) / load
            rt.drops = int(round(rt.tx_pkts * drop_frac))
        else:
            rt.drops = 0
        rt.rx_pkts = rt.tx_pkts - rt.drops
        rt.rx_bytes = rt.rx_pkts * PACKET_BYTES
        u = min(load / cap, sim.u_max)
        rt.measured_delay = base * (1.0 + sim.q_factor * u / (1.0 - u))
        rt.errors = int(sim.rng.binomial(rt.rx_pkts, sim.p_err)) if rt.rx_pkts else 0
    sim.clock += 1


def snapshot(sim: SimState) -> Snapshot:
    """Deep copy of link counters; safe to share across workers."""
    return Snapshot(sim.clock, {link: copy.copy(rt) for link, rt in sim.links.items()})


def link_loss_ratio(rt: LinkRuntime) -> float:
    return rt.drops / rt.tx_pkts if rt.tx_pkts else 0.0


def _jitter(sim: SimState) -> float:
    if sim.probe_jitter_ms <= 0:
        return 0.0
    return float(sim.rng.uniform(-sim.probe_jitter_ms, sim.probe_jitter_ms))


def probe_intradomain_delay(
    sim: SimState, link: tuple[str, str]
) -> tuple[float, float, float, float]:
    """Simulated discovery-packet and echo timestamps for one intra-domain
    link. The recovered delay is (T1 + T2 - Ta - Tb) / 2."""
    key = (min(*link), max(*link))
    if key not in sim.links:
        raise SimError(f"unknown link {link}")
    u, v = key
    if sim.graph.domains[u] != sim.graph.domains[v]:
        raise NotIntraDomain(f"{key} crosses domains")
    d = sim.links[key].measured_delay
    c = CTRL_ECHO_ONE_WAY_MS
    t1 = 2 * c + d + _jitter(sim)
    t2 = 2 * c + d + _jitter(sim)
    ta = 2 * c + _jitter(sim)
    tb = 2 * c + _jitter(sim)
    return t1, t2, ta, tb


def probe_interdomain_delay(
    sim: SimState, link: tuple[str, str]
) -> tuple[float, float]:
    """Detection-packet timestamps for one border link; the recovered delay
    is (T_inter1 + T_inter2) / 2."""
    key = (min(*link), max(*link))
    if key not in sim.links:
        raise SimError(f"unknown link {link}")
    u, v = key
    if sim.graph.domains[u] == sim.graph.domains[v]:
        raise NotInterDomain(f"{key} is inside one domain")
    d = sim.links[key].measured_delay
    return d + _jitter(sim), d + _jitter(sim)


def recover_link_delay(sim: SimState, link: tuple[str, str]) -> float:
    """Probe-based delay for any link, dispatching on link kind."""
    key = (min(*link), max(*link))
    u, v = key
    if sim.graph.domains[u] == sim.graph.domains[v]:
        t1, t2, ta, tb = probe_intradomain_delay(sim, key)
        return (t1 + t2 - ta - tb) / 2.0
    t1, t2 = probe_interdomain_delay(sim, key)
    return (t1 + t2) / 2.0


def measure_all_delays(sim: SimState) -> dict[tuple[str, str], float]:
    return {link: recover_link_delay(sim, link) for link in sim.links}


def demands_to_json(demands: list[FlowDemand]) -> str:
    import json

    return json.dumps(
        [
            {
                "src": d.src,
                "dst": d.dst,
                "rate_mbit": d.rate_mbit,
                "start_tick": d.start_tick,
                "end_tick": d.end_tick,
            }
            for d in demands
        ],
        indent=2,
    )


def demands_from_json(text: str) -> list[FlowDemand]:
    import json

    return [
        FlowDemand(
            src=e["src"],
            dst=e["dst"],
            rate_mbit=float(e["rate_mbit"]),
            start_tick=int(e.get("start_tick", 0)),
            end_tick=int(e.get("end_tick", 2**31)),
        )
        for e in json.loads(text)
    ]
