"""Higher-order skeleton extraction.

Filters decide, per edge and node, whether the element lies in the closure of
some higher-order cell: a 2-cell (a cycle of bounded length) or a p-simplex
(a (p+1)-clique). They return boolean masks over the padded node set rather
than re-indexed subgraphs, so a filtered graph keeps the shape of its source.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .graph_core import Graph

FILTER_KINDS = ("cell", "simplex", "periphery", "none", "noise")
DEFAULT_L_MAX = 8


@dataclass(frozen=True)
class FilterSpec:
    kind: str = "cell"
    p: int = 2
    L_max: int = DEFAULT_L_MAX
    # filter whose complement a periphery filter keeps
    base: str = "cell"

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.L_max < 3:
            raise ValueError("L_max must be at least 3")
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if self.base not in ("cell", "simplex"):
            raise ValueError("periphery base must be 'cell' or 'simplex'")


@dataclass(frozen=True, eq=False)
class FilteredGraph:
    base: Graph
    edge_keep: np.ndarray
    node_keep: np.ndarray

    def graph(self) -> Graph:
        """The kept structure as a graph; dropped nodes become masked."""
        A = np.where(self.edge_keep, self.base.A, 0.0)
        X = self.base.X * self.node_keep[:, None]
        return Graph(A=A, X=X, mask=self.node_keep)

    def kept_edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.edge_keep, 1))
        return list(zip(i.tolist(), j.tolist()))


def _adjacency_lists(B: np.ndarray) -> list[list[int]]:
    return [np.flatnonzero(row).tolist() for row in B]


def _require_edge(B: np.ndarray, i: int, j: int) -> None:
    if i == j or not B[i, j]:
        raise ValueError(f"({i}, {j}) is not an edge")


def _from_edges(g: Graph, edge_keep: np.ndarray) -> FilteredGraph:
    edge_keep = edge_keep & (g.A != 0)
    edge_keep = edge_keep | edge_keep.T
    node_keep = edge_keep.any(axis=1)
    return FilteredGraph(base=g, edge_keep=edge_keep, node_keep=node_keep)


def edge_in_cycle(g: Graph, i: int, j: int, L_max: int = DEFAULT_L_MAX) -> bool:
    """Whether edge ``(i, j)`` lies on a cycle of length at most ``L_max``.

    Depth-limited DFS from ``i`` to ``j`` with the edge itself removed. A node is
    revisited only when reached along a shorter path, which keeps the search
    exact for the length bound.
    """
    B = g.A != 0
    _require_edge(B, i, j)
    nbrs = _adjacency_lists(B)
    limit = L_max - 1
    best = {i: 0}
    stack = [(i, 0)]
    while stack:
        u, depth = stack.pop()
        if depth >= limit:
            continue
        for v in nbrs[u]:
            if u == i and v == j:
                continue
            if v == j:
                return True
            if best.get(v, limit + 1) > depth + 1:
                best[v] = depth + 1
                stack.append((v, depth + 1))
    return False


def edge_in_cycle_oracle(g: Graph, i: int, j: int, L_max: int = DEFAULT_L_MAX) -> bool:
    """Matrix-power check: some walk of length ``m <= L_max - 1`` joins i and j without the edge."""
    B = (g.A != 0).astype(np.int64)
    _require_edge(B, i, j)
    B[i, j] = B[j, i] = 0
    # clip walk counts to 0/1 so long powers cannot overflow
    P = np.eye(B.shape[0], dtype=np.int64)
    for _ in range(L_max - 1):
        P = np.minimum(P @ B, 1)
        if P[i, j] > 0:
            return True
    return False


def cell_filter(g: Graph, L_max: int = DEFAULT_L_MAX) -> FilteredGraph:
    keep = np.zeros(g.A.shape, dtype=bool)
    for i, j in g.edges():
        if edge_in_cycle(g, i, j, L_max):
            keep[i, j] = True
    return _from_edges(g, keep)


def enumerate_simplices(g: Graph, p: int) -> list[tuple[int, ...]]:
    """All ``(p+1)``-cliques as ascending tuples, each listed once."""
    if p < 1:
        raise ValueError("p must be at least 1")
    B = g.A != 0
    n = B.shape[0]
    higher = [set((np.flatnonzero(B[u, u + 1:]) + u + 1).tolist()) for u in range(n)]
    out: list[tuple[int, ...]] = []

    def extend(clique: list[int], cand: set[int]) -> None:
        if len(clique) == p + 1:
            out.append(tuple(clique))
            return
        for v in sorted(cand):
            extend(clique + [v], cand & higher[v])

    for u in range(n):
        extend([u], higher[u])
    return out


def simplex_filter(g: Graph, p: int = 3) -> FilteredGraph:
    keep = np.zeros(g.A.shape, dtype=bool)
    for simplex in enumerate_simplices(g, p):
        for a, b in combinations(simplex, 2):
            keep[a, b] = True
    return _from_edges(g, keep)


def periphery_filter(g: Graph, spec: FilterSpec) -> FilteredGraph:
    """Edges outside the corresponding cell or simplex skeleton."""
    kind = spec.kind if spec.kind in ("cell", "simplex") else spec.base
    core = cell_filter(g, spec.L_max) if kind == "cell" else simplex_filter(g, spec.p)
    return _from_edges(g, (g.A != 0) & ~core.edge_keep)


def apply_filter(g: Graph, spec: FilterSpec) -> FilteredGraph:
    """Dispatch on ``spec.kind``; ``none`` keeps everything.

    ``noise`` has no deterministic skeleton and is handled by the pipeline.
    """
    if spec.kind == "cell":
        return cell_filter(g, spec.L_max)
    if spec.kind == "simplex":
        return simplex_filter(g, spec.p)
    if spec.kind == "periphery":
        return periphery_filter(g, spec)
    if spec.kind == "none":
        return FilteredGraph(base=g, edge_keep=g.A != 0, node_keep=g.mask.copy())
    raise ValueError("noise guides have no deterministic filtered graph")


def chordless_cycles(g: Graph, L_max: int = DEFAULT_L_MAX) -> list[tuple[int, ...]]:
    """Induced (chordless) cycles with 3 to ``L_max`` nodes.

    Each cycle is reported once, rooted at its smallest node with the second
    node smaller than the last.
    """
    B = g.A != 0
    nbrs = [set(np.flatnonzero(row).tolist()) for row in B]
    out: list[tuple[int, ...]] = []

    def grow(path: list[int], on_path: set[int]) -> None:
        s, u = path[0], path[-1]
        for v in nbrs[u]:
            if v <= s or v in on_path:
                continue
            # v may touch the path only at u, and at s when it closes the cycle
            inner = nbrs[v] & on_path
            closes = s in inner
            if inner - {u, s}:
                continue
            if closes:
                if len(path) >= 2 and path[1] < v:
                    out.append(tuple(path + [v]))
                continue
            if len(path) + 1 < L_max:
                path.append(v)
                on_path.add(v)
                grow(path, on_path)
                path.pop()
                on_path.discard(v)

    for s in range(B.shape[0]):
        for v in nbrs[s]:
            if v > s:
                grow([s, v], {s, v})
    return out


def ho_statistics(dataset, max_simplex_p: int = 4, L_max: int = DEFAULT_L_MAX) -> dict[str, float]:
    """Average counts of p-simplices (p = 2..max_simplex_p) and 2-cells per graph."""
    dataset = list(dataset)
    if not dataset:
        raise ValueError("empty dataset")
    totals = {f"{p}-simplices": 0.0 for p in range(2, max_simplex_p + 1)}
    totals["2-cells"] = 0.0
    for g in dataset:
        for p in range(2, max_simplex_p + 1):
            totals[f"{p}-simplices"] += len(enumerate_simplices(g, p))
        totals["2-cells"] += len(chordless_cycles(g, L_max))
    return {k: v / len(dataset) for k, v in totals.items()}
