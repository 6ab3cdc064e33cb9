"""Telemetry: link-indicator matrices, traffic matrices, and the matrix pool.

Every measurement interval, the simulator snapshot is folded into six square
indicator matrices per scope (remaining bandwidth, delay, loss, used
bandwidth, drops, errors). A traffic matrix scalarises the six indicators
per link with a weight vector; min-max normalization then maps the on-link
entries into a fixed [mu1, mu2] range. The union traffic matrix covers the
whole network: domain traffic matrices sit on the diagonal blocks and border
links fill the only off-diagonal-block entries.

Sentinel convention: absent links are +inf in un-normalized matrices (and
are written as ``inf`` in CSV dumps); after normalization they carry mu2,
the worst cost in range, so consumers reading the matrix as a cost field
never mistake a missing link for a good one.
"""

from __future__ import annotations

import io
import threading
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .netsim import Snapshot, link_loss_ratio
from .topology import GLOBAL, NetworkGraph, border_links, scope_links, scope_nodes

EPS_BW = 0.01  # Mbit/s floor guarding the reciprocal-bandwidth term
COUNT_SCALE = 1e-3  # drops/errors are counts; rescale before blending
DEFAULT_BOUNDS = (0.0, 1.0)

INDICATORS = ("bw", "delay", "loss", "used_bw", "drops", "errors")


class TelemetryError(Exception):
    pass


class ScopeMismatch(TelemetryError):
    """Snapshot does not cover every link the scope requires."""


class TickMismatch(TelemetryError):
    """Inputs to a union assembly come from different ticks."""


class InsufficientSamples(TelemetryError):
    pass


class ZeroResidualBandwidth(Warning):
    """A saturated link hit the residual-bandwidth floor."""


@dataclass(frozen=True)
class TmWeights:
    """Blend weights for the six indicators, each in [0, 1]."""

    bw: float = 0.6
    delay: float = 0.3
    loss: float = 0.1
    used_bw: float = 0.1
    drops: float = 0.1
    errors: float = 0.1

    def __post_init__(self) -> None:
        for name in INDICATORS:
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise TelemetryError(f"weight {name}={w} outside [0, 1]")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in INDICATORS)


@dataclass
class InfoMatrices:
    """The six indicator matrices for one scope at one tick.

    Entries at absent links are 0; ``links`` lists the on-link node pairs.
    """

    scope: int | str
    tick: int
    nodes: tuple[str, ...]
    links: list[tuple[str, str]]
    bw: np.ndarray
    delay: np.ndarray
    loss: np.ndarray
    used_bw: np.ndarray
    drops: np.ndarray
    errors: np.ndarray

    def indicator(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def link_indices(self) -> list[tuple[int, int]]:
        idx = {n: i for i, n in enumerate(self.nodes)}
        return [(idx[u], idx[v]) for (u, v) in self.links]


@dataclass
class TrafficMatrix:
    """Scalar-combined link-state matrix for one scope at one tick."""

    scope: int | str
    tick: int
    nodes: tuple[str, ...]
    links: list[tuple[str, str]]
    values: np.ndarray
    normalized: bool = False
    bounds: tuple[float, float] | None = None

    @property
    def dim(self) -> int:
        return len(self.nodes)

    def link_indices(self) -> list[tuple[int, int]]:
        idx = {n: i for i, n in enumerate(self.nodes)}
        return [(idx[u], idx[v]) for (u, v) in self.links]

    def on_link_values(self) -> np.ndarray:
        return np.array([self.values[i, j] for i, j in self.link_indices()])

    def flat(self) -> np.ndarray:
        """Row-major vector view used to build agent states."""
        return self.values.reshape(-1).copy()

    def to_csv(self) -> str:
        """Canonical dump: header of node ids, then row-major values with
        absent links written as ``inf``."""
        buf = io.StringIO()
        buf.write(",".join(self.nodes) + "\n")
        link_set = set(self.link_indices())
        for i in range(self.dim):
            cells = []
            for j in range(self.dim):
                if (i, j) in link_set or (j, i) in link_set:
                    cells.append(repr(float(self.values[i, j])))
                else:
                    cells.append("inf")
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, scope: int | str, tick: int) -> "TrafficMatrix":
        lines = [ln for ln in text.strip().split("\n") if ln]
        nodes = tuple(lines[0].split(","))
        n = len(nodes)
        if len(lines) != n + 1:
            raise TelemetryError(f"expected {n} rows, got {len(lines) - 1}")
        values = np.full((n, n), np.inf)
        links = []
        for i, line in enumerate(lines[1:]):
            cells = line.split(",")
            if len(cells) != n:
                raise TelemetryError(f"row {i} has {len(cells)} cells, expected {n}")
            for j, cell in enumerate(cells):
                v = float(cell)
                values[i, j] = v
                if np.isfinite(v) and i < j:
                    links.append((nodes[i], nodes[j]))
        return cls(scope, tick, nodes, links, values, normalized=False)


class UnionTrafficMatrix(TrafficMatrix):
    """Global traffic matrix assembled from domain blocks plus border links."""

    def extract_block(self, block_nodes: tuple[str, ...]) -> np.ndarray:
        idx = {n: i for i, n in enumerate(self.nodes)}
        rows = [idx[n] for n in block_nodes]
        return self.values[np.ix_(rows, rows)]


def collect_info(
    graph: NetworkGraph, snap: Snapshot, scope: int | str
) -> InfoMatrices:
    """Fold a simulator snapshot into the six indicator matrices for a scope."""
    nodes = scope_nodes(graph, scope)
    links = scope_links(graph, scope)
    missing = [link for link in links if link not in snap.links]
    if missing:
        raise ScopeMismatch(f"snapshot missing links {missing} for scope {scope}")
    return _info_from_links(graph, snap, scope, nodes, links)


def collect_border_info(graph: NetworkGraph, snap: Snapshot) -> InfoMatrices:
    """Indicator matrices over the global index holding only border links."""
    borders = [link for link, _, _ in border_links(graph)]
    missing = [link for link in borders if link not in snap.links]
    if missing:
        raise ScopeMismatch(f"snapshot missing border links {missing}")
    return _info_from_links(graph, snap, GLOBAL, graph.nodes, borders)


def _info_from_links(graph, snap, scope, nodes, links) -> InfoMatrices:
    n = len(nodes)
    idx = {node: i for i, node in enumerate(nodes)}
    mats = {name: np.zeros((n, n)) for name in INDICATORS}
    for (u, v) in links:
        rt = snap.links[(u, v)]
        cap = graph.edges[(u, v)].capacity_mbit
        i, j = idx[u], idx[v]
        cells = {
            "bw": cap - rt.used_bw,
            "delay": rt.measured_delay,
            "loss": link_loss_ratio(rt),
            "used_bw": rt.used_bw,
            "drops": float(rt.drops),
            "errors": float(rt.errors),
        }
        for name, value in cells.items():
            mats[name][i, j] = value
            mats[name][j, i] = value
    return InfoMatrices(scope, snap.tick, tuple(nodes), list(links), **mats)


def _combine(info: InfoMatrices, weights: TmWeights, i: int, j: int) -> float:
    bw = info.bw[i, j]
    if bw <= 0.0:
        warnings.warn(
            f"link index ({i}, {j}) in scope {info.scope} has no residual "
            f"bandwidth; flooring at {EPS_BW} Mbit/s",
            ZeroResidualBandwidth,
            stacklevel=3,
        )
    return (
        weights.bw / max(bw, EPS_BW)
        + weights.delay * info.delay[i, j]
        + weights.loss * info.loss[i, j]
        + weights.used_bw * info.used_bw[i, j]
        + weights.drops * info.drops[i, j] * COUNT_SCALE
        + weights.errors * info.errors[i, j] * COUNT_SCALE
    )


def build_tm(info: InfoMatrices, weights: TmWeights) -> TrafficMatrix:
    """Blend the six indicators into one un-normalized traffic matrix."""
    n = len(info.nodes)
    values = np.full((n, n), np.inf)
    for i, j in info.link_indices():
        m = _combine(info, weights, i, j)
        values[i, j] = m
        values[j, i] = m
    return TrafficMatrix(info.scope, info.tick, info.nodes, list(info.links), values)


def normalize_tm(
    tm: TrafficMatrix, mu1: float = 0.0, mu2: float = 1.0
) -> TrafficMatrix:
    """Min-max map of the on-link entries into [mu1, mu2].

    Min/max range over on-link entries only; absent links become mu2, the
    worst cost. A degenerate range (all on-link entries equal) maps to mu1
    everywhere on links.
    """
    if mu1 >= mu2:
        raise TelemetryError(f"need mu1 < mu2, got ({mu1}, {mu2})")
    pairs = tm.link_indices()
    values = np.full_like(tm.values, mu2)
    if pairs:
        on = tm.on_link_values()
        lo, hi = float(on.min()), float(on.max())
        for i, j in pairs:
            if hi == lo:
                v = mu1
            else:
                v = mu1 + (tm.values[i, j] - lo) * (mu2 - mu1) / (hi - lo)
                v = min(max(v, mu1), mu2)
            values[i, j] = v
            values[j, i] = v
    cls = type(tm)
    return cls(
        tm.scope, tm.tick, tm.nodes, list(tm.links), values,
        normalized=True, bounds=(mu1, mu2),
    )


def build_utm(
    graph: NetworkGraph,
    domain_tms: dict[int, TrafficMatrix],
    border_info: InfoMatrices,
    weights: TmWeights,
    *,
    normalize: bool = True,
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
) -> UnionTrafficMatrix:
    """Assemble the union traffic matrix from per-domain matrices plus
    border-link indicators, then normalize it as a single matrix."""
    ticks = {tm.tick for tm in domain_tms.values()} | {border_info.tick}
    if len(ticks) != 1:
        raise TickMismatch(f"inputs span ticks {sorted(ticks)}")
    for d, tm in domain_tms.items():
        if tm.normalized:
            raise TelemetryError(f"domain {d} matrix must be un-normalized")
    n = len(graph.nodes)
    values = np.full((n, n), np.inf)
    links: list[tuple[str, str]] = []
    gidx = graph.index
    for d, tm in sorted(domain_tms.items()):
        local_idx = {node: i for i, node in enumerate(tm.nodes)}
        for (u, v) in tm.links:
            m = tm.values[local_idx[u], local_idx[v]]
            values[gidx[u], gidx[v]] = m
            values[gidx[v], gidx[u]] = m
            links.append((u, v))
    border_idx = {node: i for i, node in enumerate(border_info.nodes)}
    for (u, v) in border_info.links:
        m = _combine(border_info, weights, border_idx[u], border_idx[v])
        values[gidx[u], gidx[v]] = m
        values[gidx[v], gidx[u]] = m
        links.append((u, v))
    links = sorted(links)
    tick = next(iter(ticks))
    utm = UnionTrafficMatrix(GLOBAL, tick, graph.nodes, links, values)
    if normalize:
        utm = normalize_tm(utm, *bounds)
    return utm


class MatrixPool:
    """Bounded FIFO of traffic-matrix snapshots; safe for concurrent
    producers with one consumer."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise TelemetryError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: deque = deque(maxlen=capacity)
        self._lock = threading.Lock()

    def push(self, tm) -> None:
        with self._lock:
            self._items.append(tm)

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)

    def contents(self) -> list:
        """Oldest-first copy of the pool."""
        with self._lock:
            return list(self._items)

    def sample(self, n: int, rng: np.random.Generator) -> list:
        with self._lock:
            if n > len(self._items):
                raise InsufficientSamples(
                    f"wanted {n} of {len(self._items)} pooled matrices"
                )
            picks = rng.choice(len(self._items), size=n, replace=False)
            items = list(self._items)
        return [items[i] for i in picks]
