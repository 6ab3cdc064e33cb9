"""Multi-domain network graphs: loading, validation, generation, partition.

The graph is undirected, every node belongs to exactly one numbered
subdomain, and the lexicographic order of node identifiers is the canonical
matrix index order used by every downstream module.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path


class TopologyError(Exception):
    """Base class for topology construction failures."""


class MalformedConfig(TopologyError):
    """Config document does not parse or misses required structure."""


class DanglingEdge(TopologyError):
    """An edge references a node that is not declared."""


class DisconnectedGraph(TopologyError):
    """The graph, or one domain's induced subgraph, is not connected."""


class EmptyDomain(TopologyError):
    """A declared domain id has no nodes."""


class InvalidRange(TopologyError):
    """Bandwidth range is empty or below the 1 Mbit/s floor."""


@dataclass(frozen=True)
class LinkAttr:
    """Static attributes of one undirected link."""

    capacity_mbit: float
    base_delay_ms: float
    domain_edge: bool

    def __post_init__(self) -> None:
        if self.capacity_mbit <= 0:
            raise MalformedConfig(f"capacity must be > 0, got {self.capacity_mbit}")
        if self.base_delay_ms < 0:
            raise MalformedConfig(f"base delay must be >= 0, got {self.base_delay_ms}")


class NetworkGraph:
    """Validated undirected topology with a domain partition.

    Nodes are kept in canonical (lexicographic) order; `index` maps a node
    id to its row/column in every matrix built over this graph. Instances
    are immutable after construction and safe to share across workers.
    """

    def __init__(
        self,
        nodes: list[str],
        edges: dict[tuple[str, str], LinkAttr],
        domains: dict[str, int],
    ) -> None:
        self.nodes: tuple[str, ...] = tuple(sorted(nodes))
        self.index: dict[str, int] = {n: i for i, n in enumerate(self.nodes)}
        self.domains: dict[str, int] = dict(domains)
        self._adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        self.edges: dict[tuple[str, str], LinkAttr] = {}
        for (u, v), attr in sorted(edges.items()):
            key = (u, v) if u < v else (v, u)
            self.edges[key] = attr
            self._adj[key[0]].append(key[1])
            self._adj[key[1]].append(key[0])
        for n in self._adj:
            self._adj[n].sort()
        self._validate()

    # -- accessors ---------------------------------------------------------

    def neighbors(self, node: str) -> list[str]:
        return self._adj[node]

    def has_link(self, u: str, v: str) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def attr(self, u: str, v: str) -> LinkAttr:
        return self.edges[(min(u, v), max(u, v))]

    def domain_of(self, node: str) -> int:
        return self.domains[node]

    def domain_ids(self) -> list[int]:
        return sorted(set(self.domains.values()))

    def domain_nodes(self, domain: int) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if self.domains[n] == domain)

    def links(self) -> list[tuple[str, str]]:
        """All undirected links as (u, v) with u < v, canonical order."""
        return list(self.edges.keys())

    def intra_links(self, domain: int) -> list[tuple[str, str]]:
        return [
            (u, v)
            for (u, v) in self.edges
            if self.domains[u] == domain and self.domains[v] == domain
        ]

    # -- validation --------------------------------------------------------

    def _validate(self) -> None:
        if not self.nodes:
            raise MalformedConfig("graph has no nodes")
        for (u, v) in self.edges:
            if u == v:
                raise MalformedConfig(f"self-loop on {u}")
            for n in (u, v):
                if n not in self.index:
                    raise DanglingEdge(f"edge ({u}, {v}) references unknown node {n}")
        for n in self.nodes:
            if n not in self.domains:
                raise MalformedConfig(f"node {n} has no domain assignment")
        ids = self.domain_ids()
        if ids and ids != list(range(1, len(ids) + 1)):
            missing = sorted(set(range(1, max(ids) + 1)) - set(ids))
            raise EmptyDomain(f"domain ids must be 1..{max(ids)}; empty: {missing}")
        if not self._connected(set(self.nodes)):
            raise DisconnectedGraph("graph is not connected")
        for d in ids:
            members = set(self.domain_nodes(d))
            if not self._connected(members):
                raise DisconnectedGraph(f"domain {d} induced subgraph is not connected")

    def _connected(self, members: set[str]) -> bool:
        if not members:
            return True
        start = next(iter(members))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in self._adj[u]:
                if v in members and v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen == members


GLOBAL = "global"


def scope_nodes(graph: NetworkGraph, scope: int | str) -> tuple[str, ...]:
    """Nodes covered by a scope: one domain's, or all for GLOBAL."""
    if scope == GLOBAL:
        return graph.nodes
    return graph.domain_nodes(int(scope))


def scope_links(graph: NetworkGraph, scope: int | str) -> list[tuple[str, str]]:
    """Links fully inside a scope; GLOBAL includes border links."""
    if scope == GLOBAL:
        return graph.links()
    return graph.intra_links(int(scope))


def border_links(graph: NetworkGraph) -> list[tuple[tuple[str, str], int, int]]:
    """Links whose endpoints lie in different domains, canonical order."""
    out = []
    for (u, v) in graph.links():
        du, dv = graph.domains[u], graph.domains[v]
        if du != dv:
            out.append(((u, v), du, dv))
    return out


def load_topology(doc: dict) -> NetworkGraph:
    """Build a validated NetworkGraph from a parsed config document."""
    if not isinstance(doc, dict):
        raise MalformedConfig("topology document must be a JSON object")
    for key in ("nodes", "edges", "domains"):
        if key not in doc:
            raise MalformedConfig(f"missing key {key!r}")
    nodes = doc["nodes"]
    if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
        raise MalformedConfig("nodes must be an array of strings")
    if len(set(nodes)) != len(nodes):
        raise MalformedConfig("duplicate node ids")
    node_set = set(nodes)
    edges: dict[tuple[str, str], LinkAttr] = {}
    if not isinstance(doc["edges"], list):
        raise MalformedConfig("edges must be an array")
    for e in doc["edges"]:
        try:
            u, v = e["u"], e["v"]
            cap = float(e["capacity_mbit"])
            delay = float(e["base_delay_ms"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedConfig(f"bad edge entry {e!r}") from exc
        for n in (u, v):
            if n not in node_set:
                raise DanglingEdge(f"edge ({u}, {v}) references unknown node {n}")
        if u == v:
            raise MalformedConfig(f"self-loop on {u}")
        key = (min(u, v), max(u, v))
        if key in edges:
            raise MalformedConfig(f"duplicate edge {key}")
        edges[key] = LinkAttr(cap, delay, domain_edge=False)
    domains_doc = doc["domains"]
    if not isinstance(domains_doc, dict):
        raise MalformedConfig("domains must be a map node -> domain id")
    try:
        domains = {n: int(d) for n, d in domains_doc.items()}
    except (TypeError, ValueError) as exc:
        raise MalformedConfig("domain ids must be integers") from exc
    for n in nodes:
        if n not in domains:
            raise MalformedConfig(f"node {n} has no domain assignment")
    edges = {
        (u, v): LinkAttr(a.capacity_mbit, a.base_delay_ms, domains[u] != domains[v])
        for (u, v), a in edges.items()
    }
    return NetworkGraph(list(nodes), edges, domains)


def load_topology_file(path: str | Path) -> NetworkGraph:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedConfig(f"invalid JSON: {exc}") from exc
    return load_topology(doc)


def serialize_topology(graph: NetworkGraph) -> str:
    """Canonical JSON form: sorted keys, arrays in canonical node order."""
    doc = {
        "nodes": list(graph.nodes),
        "edges": [
            {
                "u": u,
                "v": v,
                "capacity_mbit": attr.capacity_mbit,
                "base_delay_ms": attr.base_delay_ms,
            }
            for (u, v), attr in graph.edges.items()
        ],
        "domains": {n: graph.domains[n] for n in graph.nodes},
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def generate_experiment_topology(
    seed: int,
    domain_sizes: list[int] | tuple[int, ...] = (13, 13, 13),
    bw_range: tuple[float, float] = (1.0, 10.0),
    capped_domain: tuple[int, float] | None = (1, 5.0),
    *,
    base_delay_range: tuple[float, float] = (1.0, 5.0),
    intra_edge_factor: float = 1.6,
    border_pairs: int = 2,
    border_layout: dict[tuple[int, int], int] | None = None,
) -> NetworkGraph:
    """Deterministic random multi-domain topology.

    Each domain gets a random connected subgraph (spanning tree plus extra
    edges up to ``intra_edge_factor * (n_d - 1)`` links); consecutive domain
    pairs, and the first/last pair, are joined by ``border_pairs`` random
    cross links, or by ``border_layout[(da, db)]`` links per listed domain
    pair when a layout is given. Capacities are uniform in ``bw_range``;
    links fully inside the capped domain are clamped to the cap. Border
    links always draw from the global range and are never capped.
    """
    lo, hi = bw_range
    if lo > hi or lo < 1.0:
        raise InvalidRange(f"bad bandwidth range [{lo}, {hi}]")
    if any(s < 2 for s in domain_sizes):
        raise InvalidRange("each domain needs at least 2 nodes")
    rng = random.Random(seed)
    total = sum(domain_sizes)
    width = max(2, len(str(total)))
    names = [f"s{i + 1:0{width}d}" for i in range(total)]
    domains: dict[str, int] = {}
    groups: list[list[str]] = []
    pos = 0
    for d, size in enumerate(domain_sizes, start=1):
        group = names[pos : pos + size]
        groups.append(group)
        for n in group:
            domains[n] = d
        pos += size

    edge_set: set[tuple[str, str]] = set()

    def add(u: str, v: str) -> bool:
        key = (min(u, v), max(u, v))
        if u == v or key in edge_set:
            return False
        edge_set.add(key)
        return True

    for group in groups:
        order = group[:]
        rng.shuffle(order)
        for i in range(1, len(order)):
            add(order[i], rng.choice(order[:i]))
        target = int(intra_edge_factor * (len(group) - 1))
        guard = 0
        while len([e for e in edge_set if e[0] in group and e[1] in group]) < target:
            add(rng.choice(group), rng.choice(group))
            guard += 1
            if guard > 50 * target:
                break

    if border_layout is None:
        pairs = [(i, (i + 1) % len(groups)) for i in range(len(groups))]
        if len(groups) == 2:
            pairs = [(0, 1)]
        layout = {pair: (border_pairs, "random") for pair in pairs}
    else:
        layout = {}
        for (da, db), spec in border_layout.items():
            count, placement = spec if isinstance(spec, tuple) else (spec, "random")
            layout[(da - 1, db - 1)] = (count, placement)

    def degree(node: str) -> int:
        return sum(1 for e in edge_set if node in e)

    def pick(group: list[str], placement: str) -> str:
        if placement == "hub":
            ranked = sorted(group, key=lambda n: (-degree(n), n))
            return rng.choice(ranked[: max(3, len(group) // 4)])
        if placement == "leaf":
            ranked = sorted(group, key=lambda n: (degree(n), n))
            return rng.choice(ranked[: max(3, len(group) // 4)])
        return rng.choice(group)

    for (a, b), (wanted, placement) in sorted(layout.items()):
        made = 0
        guard = 0
        while made < wanted and guard < 200:
            if add(pick(groups[a], placement), pick(groups[b], placement)):
                made += 1
            guard += 1

    edges: dict[tuple[str, str], LinkAttr] = {}
    for (u, v) in sorted(edge_set):
        cap = round(rng.uniform(lo, hi), 3)
        cross = domains[u] != domains[v]
        if capped_domain is not None and not cross:
            cap_dom, cap_val = capped_domain
            if domains[u] == cap_dom:
                cap = min(cap, cap_val)
        delay = round(rng.uniform(*base_delay_range), 3)
        edges[(u, v)] = LinkAttr(cap, delay, cross)
    return NetworkGraph(names, edges, domains)
