"""Per-link measurement formulas and windowed averages for the algorithm
comparison reports.

Throughput here is the ratio of bytes sent to remaining bandwidth over the
interval — a dimensionless utilisation-pressure figure, not a rate. Delay
always goes through the timestamp-probe recovery path (intra-domain
discovery/echo exchange, or the border detection-packet exchange), never by
reading the simulator's internal delay directly. Domain and global averages
sum over all ordered node pairs of the scope, with absent links
contributing zeros, and are then averaged over the reporting window.
"""

from __future__ import annotations

from dataclasses import dataclass

from .netsim import SimState, recover_link_delay, snapshot
from .telemetry import EPS_BW
from .topology import GLOBAL, NetworkGraph, scope_links, scope_nodes


class MetricsError(Exception):
    pass


class UnknownLink(MetricsError):
    pass


class NegativeLoss(MetricsError):
    """rx exceeded tx; the simulator broke packet conservation."""


class EmptyWindow(MetricsError):
    pass


@dataclass
class LinkMetricFrame:
    """One interval's per-link throughput/delay/loss for a scope."""

    scope: int | str
    tick: int
    delta_t: float
    throughput: dict[tuple[str, str], float]
    delay_ms: dict[tuple[str, str], float]
    loss: dict[tuple[str, str], float]


@dataclass
class AveragedReport:
    algorithm: str
    scope: str
    offered_load_mbit: float
    avg_throughput: float
    avg_delay_ms: float
    avg_loss: float


def link_throughput(tx_bytes: int, bw_t_mbit: float, delta_t: float) -> float:
    """Bytes sent over remaining bandwidth for the interval (dimensionless)."""
    if delta_t <= 0:
        raise MetricsError(f"delta_t must be > 0, got {delta_t}")
    sent_mbit = tx_bytes * 8.0 / 1_000_000.0
    return sent_mbit / (max(bw_t_mbit, EPS_BW) * delta_t)


def link_loss(tx_pkts: int, rx_pkts: int) -> float:
    if rx_pkts > tx_pkts:
        raise NegativeLoss(f"rx {rx_pkts} > tx {tx_pkts}")
    if tx_pkts == 0:
        return 0.0
    return (tx_pkts - rx_pkts) / tx_pkts


def link_delay(sim: SimState, link: tuple[str, str]) -> float:
    """Probe-recovered delay in ms for an intra-domain or border link."""
    key = (min(*link), max(*link))
    if key not in sim.links:
        raise UnknownLink(f"no link {link}")
    return recover_link_delay(sim, key)


def frame_from_sim(sim: SimState, scope: int | str, delta_t: float) -> LinkMetricFrame:
    """Measure one interval: counters from the snapshot, delays by probing."""
    snap = snapshot(sim)
    graph = sim.graph
    throughput: dict[tuple[str, str], float] = {}
    delay: dict[tuple[str, str], float] = {}
    loss: dict[tuple[str, str], float] = {}
    for link in scope_links(graph, scope):
        rt = snap.links[link]
        remaining = graph.edges[link].capacity_mbit - rt.used_bw
        throughput[link] = link_throughput(rt.tx_bytes, remaining, delta_t)
        delay[link] = link_delay(sim, link)
        loss[link] = link_loss(rt.tx_pkts, rt.rx_pkts)
    return LinkMetricFrame(scope, snap.tick, delta_t, throughput, delay, loss)


def _window_average(
    frames: list[LinkMetricFrame], graph: NetworkGraph, scope: int | str
) -> tuple[float, float, float]:
    if not frames:
        raise EmptyWindow("no measurement frames in window")
    n = len(scope_nodes(graph, scope))
    denom = n * n
    sums = [0.0, 0.0, 0.0]
    for frame in frames:
        # each undirected link counts once per direction
        sums[0] += 2.0 * sum(frame.throughput.values())
        sums[1] += 2.0 * sum(frame.delay_ms.values())
        sums[2] += 2.0 * sum(frame.loss.values())
    k = len(frames) * denom
    return sums[0] / k, sums[1] / k, sums[2] / k


def domain_averages(
    frames: list[LinkMetricFrame], graph: NetworkGraph, domain: int
) -> tuple[float, float, float]:
    """Mean (throughput, delay, loss) over the domain's ordered node pairs,
    time-averaged over the window."""
    return _window_average(frames, graph, domain)


def global_averages(
    frames: list[LinkMetricFrame], graph: NetworkGraph
) -> tuple[float, float, float]:
    return _window_average(frames, graph, GLOBAL)


REPORT_HEADER = "algorithm,scope,offered_load_mbit,avg_throughput,avg_delay_ms,avg_loss"


def emit_report(reports: list[AveragedReport]) -> str:
    """Stable CSV: one row per (algorithm, scope, load), 6 significant digits."""
    if not reports:
        raise MetricsError("nothing to report")
    lines = [REPORT_HEADER]
    ordered = sorted(
        reports, key=lambda r: (r.algorithm, str(r.scope), r.offered_load_mbit)
    )
    for r in ordered:
        lines.append(
            f"{r.algorithm},{r.scope},{r.offered_load_mbit:.6g},"
            f"{r.avg_throughput:.6g},{r.avg_delay_ms:.6g},{r.avg_loss:.6g}"
        )
    return "\n".join(lines) + "\n"
