"""Classical path machinery: Dijkstra/OSPF baselines, Yen k-shortest paths,
and the candidate path matrices that form the routing agents' action space.

A path matrix assigns one simple path to every ordered node pair in a scope;
candidate matrix j assigns each pair its j-th shortest path by hop count, so
matrix 0 always coincides with the unit-weight Dijkstra baseline. All
tie-breaking is lexicographic on the node sequence, which makes every
function here a pure, reproducible function of its inputs.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .topology import GLOBAL, NetworkGraph, scope_nodes


class RoutingError(Exception):
    pass


class Unreachable(RoutingError):
    """No path exists between the requested endpoints."""


class MissingDelay(RoutingError):
    """A link in scope has no measured delay to use as weight."""


Path = tuple[str, ...]
WeightFn = "callable[[str, str], float]"


@dataclass
class PathMatrix:
    """One simple path per ordered (src, dst) pair; path_ii = (i,)."""

    scope: int | str
    paths: dict[tuple[str, str], Path]

    def path(self, src: str, dst: str) -> Path:
        return self.paths[(src, dst)]

    def pairs(self) -> list[tuple[str, str]]:
        return sorted(self.paths.keys())

    def traversed_links(self) -> set[tuple[str, str]]:
        """Undirected links used by any path, each counted once."""
        links: set[tuple[str, str]] = set()
        for path in self.paths.values():
            for a, b in zip(path, path[1:]):
                links.add((min(a, b), max(a, b)))
        return links


@dataclass
class CandidatePathSet:
    """The k candidate matrices the agent's discrete action indexes into."""

    scope: int | str
    k: int
    matrices: list[PathMatrix] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.matrices)

    def __getitem__(self, action: int) -> PathMatrix:
        return self.matrices[action]


def candidate_count(domain_sizes: list[int] | tuple[int, ...]) -> int:
    """Action-space size: ceil(0.1 * max(domain size)^2)."""
    m = max(domain_sizes)
    return math.ceil(0.1 * m * m)


def _shortest_path(
    nodes: set[str],
    adj: dict[str, list[str]],
    weight: dict[tuple[str, str], float],
    src: str,
    dst: str,
    banned_nodes: set[str] = frozenset(),
    banned_edges: set[tuple[str, str]] = frozenset(),
) -> tuple[float, Path] | None:
    """Lowest-cost path with lexicographically smallest node sequence.

    The heap is keyed on (cost, path); since path tuples compare
    lexicographically, the first settle of a node yields its min-cost,
    lexicographically-first path.
    """
    if src not in nodes or dst not in nodes:
        return None
    if src in banned_nodes or dst in banned_nodes:
        return None
    heap: list[tuple[float, Path]] = [(0.0, (src,))]
    settled: set[str] = set()
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in settled:
            continue
        settled.add(node)
        if node == dst:
            return cost, path
        for nxt in adj[node]:
            if nxt in settled or nxt in banned_nodes or nxt not in nodes:
                continue
            ekey = (min(node, nxt), max(node, nxt))
            if ekey in banned_edges:
                continue
            heapq.heappush(heap, (cost + weight[ekey], path + (nxt,)))
    return None


def _scope_view(
    graph: NetworkGraph, scope: int | str, weight_fn
) -> tuple[set[str], dict[str, list[str]], dict[tuple[str, str], float]]:
    nodes = set(scope_nodes(graph, scope))
    adj = {n: [v for v in graph.neighbors(n) if v in nodes] for n in nodes}
    weight: dict[tuple[str, str], float] = {}
    for (u, v) in graph.links():
        if u in nodes and v in nodes:
            w = weight_fn(u, v)
            if w <= 0:
                raise RoutingError(f"non-positive weight on link ({u}, {v}): {w}")
            weight[(u, v)] = w
    return nodes, adj, weight


def dijkstra_paths(
    graph: NetworkGraph, weight_fn=None, scope: int | str = GLOBAL
) -> PathMatrix:
    """Min-cost path matrix; default weight 1 per link (shortest hop)."""
    if weight_fn is None:
        weight_fn = lambda u, v: 1.0
    nodes, adj, weight = _scope_view(graph, scope, weight_fn)
    paths: dict[tuple[str, str], Path] = {}
    for src in sorted(nodes):
        for dst in sorted(nodes):
            if src == dst:
                paths[(src, dst)] = (src,)
                continue
            hit = _shortest_path(nodes, adj, weight, src, dst)
            if hit is None:
                raise Unreachable(f"{src} -> {dst} unreachable in scope {scope}")
            paths[(src, dst)] = hit[1]
    return PathMatrix(scope, paths)


def ospf_paths(
    graph: NetworkGraph,
    delays: dict[tuple[str, str], float],
    scope: int | str = GLOBAL,
) -> PathMatrix:
    """Delay-weighted shortest paths from measured per-link delays (ms)."""

    def weight_fn(u: str, v: str) -> float:
        key = (min(u, v), max(u, v))
        if key not in delays:
            raise MissingDelay(f"no delay for link {key}")
        return delays[key]

    return dijkstra_paths(graph, weight_fn, scope)


def yen_k_shortest(
    graph: NetworkGraph,
    src: str,
    dst: str,
    k: int,
    weight_fn=None,
    scope: int | str = GLOBAL,
) -> list[Path]:
    """Up to k distinct loop-free paths in ascending (cost, lexicographic)
    order; fewer when the scope holds fewer simple paths."""
    if k < 1:
        raise RoutingError(f"k must be >= 1, got {k}")
    if weight_fn is None:
        weight_fn = lambda u, v: 1.0
    nodes, adj, weight = _scope_view(graph, scope, weight_fn)

    def cost_of(path: Path) -> float:
        return sum(weight[(min(a, b), max(a, b))] for a, b in zip(path, path[1:]))

    first = _shortest_path(nodes, adj, weight, src, dst)
    if first is None:
        raise Unreachable(f"{src} -> {dst} unreachable in scope {scope}")
    found: list[tuple[float, Path]] = [first]
    candidates: list[tuple[float, Path]] = []
    seen: set[Path] = {first[1]}
    while len(found) < k:
        _, prev = found[-1]
        for i in range(len(prev) - 1):
            spur = prev[i]
            root = prev[: i + 1]
            banned_edges = {
                (min(p[i], p[i + 1]), max(p[i], p[i + 1]))
                for _, p in found
                if len(p) > i + 1 and p[: i + 1] == root
            }
            banned_nodes = set(root[:-1])
            hit = _shortest_path(
                nodes, adj, weight, spur, dst, banned_nodes, banned_edges
            )
            if hit is None:
                continue
            total = root[:-1] + hit[1]
            if total not in seen:
                seen.add(total)
                heapq.heappush(candidates, (cost_of(total), total))
        if not candidates:
            break
        found.append(heapq.heappop(candidates))
    return [p for _, p in found]


def build_candidates(
    graph: NetworkGraph, scope: int | str, k: int
) -> CandidatePathSet:
    """k hop-count candidate matrices; matrix j uses each pair's j-th
    shortest path, repeating the last available one when a pair has fewer
    than j+1 simple paths. Matrix 0 equals the unit-weight Dijkstra matrix."""
    nodes = sorted(scope_nodes(graph, scope))
    per_pair: dict[tuple[str, str], list[Path]] = {}
    for src in nodes:
        for dst in nodes:
            if src == dst:
                per_pair[(src, dst)] = [(src,)]
            else:
                per_pair[(src, dst)] = yen_k_shortest(graph, src, dst, k, scope=scope)
    matrices = []
    for j in range(k):
        paths = {
            pair: options[min(j, len(options) - 1)]
            for pair, options in per_pair.items()
        }
        matrices.append(PathMatrix(scope, paths))
    return CandidatePathSet(scope, k, matrices)
