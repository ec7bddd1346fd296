"""Dependency graph construction and shortest-dependency-path extraction.

Head links are viewed as undirected edges so a path between the two entity
heads may pass through the root.  All tie-breaking is deterministic:
neighbors are visited in increasing index order, which yields the
lexicographically smallest shortest path.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .corpus import ROOT, Instance


class NoPathError(ValueError):
    """Entity heads live in different components of a fragmented graph."""

    def __init__(self, s, o, comp_s, comp_o):
        super().__init__(
            f"no dependency path between {s} (component {comp_s}) "
            f"and {o} (component {comp_o})"
        )
        self.component_s = comp_s
        self.component_o = comp_o


@dataclass
class DepGraph:
    n: int
    adj: list[list[int]]  # sorted neighbor lists, symmetric
    deprel: dict[tuple[int, int], str]  # keyed by (min, max) endpoint pair


@dataclass
class SdpResult:
    path: list[int]  # ordered token indices from subj head to obj head
    token_set: list[int]  # sorted set(path)
    fallback: bool = False  # True when endpoints were disconnected


def build_graph(instance: Instance) -> DepGraph:
    n = len(instance.tokens)
    adj = [[] for _ in range(n)]
    deprel = {}
    for tok in instance.tokens:
        if tok.head == ROOT:
            continue
        adj[tok.index].append(tok.head)
        adj[tok.head].append(tok.index)
        key = (min(tok.index, tok.head), max(tok.index, tok.head))
        deprel[key] = tok.deprel
    for neighbors in adj:
        neighbors.sort()
    return DepGraph(n=n, adj=adj, deprel=deprel)


def entity_head(instance: Instance, span: tuple[int, int], graph: DepGraph) -> int:
    """Anchor token of a span: the one whose parent lies outside the span.

    Several such tokens (fragments) resolve to the lowest index; a span with
    no exiting head (degenerate cycle inside a fragment) also falls back to
    its lowest index.
    """
    lo, hi = span
    exits = [
        tok.index
        for tok in instance.tokens[lo : hi + 1]
        if tok.head == ROOT or not lo <= tok.head <= hi
    ]
    return exits[0] if exits else lo


def _components(graph: DepGraph):
    comp = [-1] * graph.n
    cid = 0
    for start in range(graph.n):
        if comp[start] != -1:
            continue
        stack = [start]
        comp[start] = cid
        while stack:
            u = stack.pop()
            for v in graph.adj[u]:
                if comp[v] == -1:
                    comp[v] = cid
                    stack.append(v)
        cid += 1
    return comp


def extract_sdp(graph: DepGraph, s: int, o: int, allow_fallback=False) -> SdpResult:
    """BFS shortest path between entity head tokens on the undirected graph.

    Disconnected endpoints raise NoPathError unless ``allow_fallback`` is
    set, in which case the result degenerates to the two endpoints and is
    flagged.
    """
    if not (0 <= s < graph.n and 0 <= o < graph.n):
        raise ValueError(f"endpoint out of range: s={s}, o={o}, n={graph.n}")
    if s == o:
        return SdpResult(path=[s], token_set=[s])
    parent = {s: None}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        if u == o:
            break
        for v in graph.adj[u]:
            if v not in parent:
                parent[v] = u
                queue.append(v)
    if o not in parent:
        comp = _components(graph)
        if allow_fallback:
            return SdpResult(path=[s, o], token_set=sorted({s, o}), fallback=True)
        raise NoPathError(s, o, comp[s], comp[o])
    path = []
    node = o
    while node is not None:
        path.append(node)
        node = parent[node]
    path.reverse()
    return SdpResult(path=path, token_set=sorted(set(path)))


def sdp_for_instance(instance: Instance) -> tuple[SdpResult, int, int]:
    """Convenience wrapper: graph, entity anchors, SDP with fragment fallback."""
    graph = build_graph(instance)
    s = entity_head(instance, instance.subj, graph)
    o = entity_head(instance, instance.obj, graph)
    return extract_sdp(graph, s, o, allow_fallback=True), s, o
