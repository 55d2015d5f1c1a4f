"""Synthetic generators and the ``.graphs.jsonl`` dataset format.

File layout: one JSON object per line, keys sorted, no extra whitespace::

    {"edges": [[i, j, w], ...], "id": 0, "n": 14, "n_max": 20, "version": 1,
     "x": [[...], ...], "eigvecs": [[...], ...]}

``edges`` lists each undirected edge once with ``i < j`` in ascending order
and an integer (or real) weight. ``x`` (node features, ``n_max`` rows) is
present only when some feature is non-zero or the feature width differs from
one. ``eigvecs`` is an optional stored eigenbasis (``n_max`` square).
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .graph_core import Graph, InvalidGraphError, spectral_state

FORMAT_VERSION = 1
EXTENSION = ".graphs.jsonl"


class DatasetFormatError(ValueError):
    """A dataset file line could not be parsed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _streams(count: int, rng) -> list[np.random.Generator]:
    """One independent stream per graph, derived from ``rng`` (Generator or int seed)."""
    if isinstance(rng, np.random.Generator):
        root = int(rng.integers(0, 2**63 - 1))
    else:
        root = int(rng)
    return [np.random.default_rng(s) for s in np.random.SeedSequence(root).spawn(count)]


def _er_block(rng, nodes, p):
    nodes = list(nodes)
    edges = []
    for a in range(len(nodes)):
        for b in range(a + 1, len(nodes)):
            if rng.random() < p:
                edges.append((nodes[a], nodes[b]))
    return edges


def gen_community_small(count: int, rng, p_in: float = 0.7, inter_frac: float = 0.05,
                        n_range: tuple[int, int] = (12, 20)) -> list[Graph]:
    """Two equal-ish ER(p_in) communities joined by ``ceil(inter_frac * n)`` random edges."""
    if count < 1:
        raise ValueError("count must be at least 1")
    graphs = []
    for r in _streams(count, rng):
        n = int(r.integers(n_range[0], n_range[1] + 1))
        h = (n + 1) // 2
        edges = _er_block(r, range(h), p_in) + _er_block(r, range(h, n), p_in)
        cross = [(i, j) for i in range(h) for j in range(h, n)]
        k = min(math.ceil(inter_frac * n), len(cross))
        edges += [cross[c] for c in sorted(r.choice(len(cross), size=k, replace=False))]
        graphs.append(Graph.from_edges(n, edges))
    return graphs


def gen_sbm(count: int, rng, p_in: float = 0.3, p_out: float = 0.05,
            communities: tuple[int, int] = (2, 5), sizes: tuple[int, int] = (20, 40)) -> list[Graph]:
    """Stochastic block model graphs with a random number of random-size communities."""
    if count < 1:
        raise ValueError("count must be at least 1")
    graphs = []
    for r in _streams(count, rng):
        c = int(r.integers(communities[0], communities[1] + 1))
        block = np.repeat(np.arange(c), r.integers(sizes[0], sizes[1] + 1, size=c))
        n = block.size
        iu = np.triu_indices(n, 1)
        prob = np.where(block[iu[0]] == block[iu[1]], p_in, p_out)
        keep = r.random(prob.size) < prob
        graphs.append(Graph.from_edges(n, list(zip(iu[0][keep], iu[1][keep]))))
    return graphs


def community_labels_small(n: int) -> np.ndarray:
    """Community index of each node in a community-small graph of size ``n``."""
    return (np.arange(n) >= (n + 1) // 2).astype(int)


def pad_dataset(graphs, n_max: int | None = None) -> list[Graph]:
    """Pad every graph to a common node count (the largest one by default)."""
    if not graphs:
        raise ValueError("empty dataset")
    target = max(g.n_max for g in graphs) if n_max is None else n_max
    return [g.pad(target) for g in graphs]


def default_features(g: Graph, mode: str = "degree_onehot", cap: int = 8, k: int = 0) -> np.ndarray:
    """Degree one-hot (degrees >= ``cap - 1`` share the last column), optionally
    followed by the first ``k`` eigenvector entries of each node."""
    if mode not in ("degree_onehot", "degree_plus_spectral"):
        raise ValueError(f"unknown feature mode {mode!r}")
    deg = np.minimum(np.rint(g.binary.sum(1)).astype(int), cap - 1)
    X = np.zeros((g.n_max, cap))
    X[np.arange(g.n_max), deg] = 1.0
    X[~g.mask] = 0.0
    if mode == "degree_plus_spectral":
        U = spectral_state(g).U[:, :k]
        pad = np.zeros((g.n_max, k))
        pad[:, :U.shape[1]] = U
        X = np.hstack([X, pad * g.mask[:, None]])
    return X


def _number(w: float):
    return int(w) if float(w).is_integer() else float(w)


def _record(i: int, g: Graph, eigvecs=None) -> dict:
    n = g.n_active
    iu = np.triu_indices(g.n_max, 1)
    nz = g.A[iu] != 0
    rec = {
        "version": FORMAT_VERSION,
        "id": i,
        "n": n,
        "n_max": g.n_max,
        "edges": [[int(a), int(b), _number(g.A[a, b])] for a, b in zip(iu[0][nz], iu[1][nz])],
    }
    if g.X.shape[1] != 1 or np.any(g.X != 0):
        rec["x"] = g.X.tolist()
    if eigvecs is not None:
        rec["eigvecs"] = np.asarray(eigvecs, dtype=np.float64).tolist()
    return rec


def save(dataset, path, eigenbases=None) -> None:
    """Write graphs (and optionally one eigenbasis per graph) to ``path``."""
    if eigenbases is not None and len(eigenbases) != len(dataset):
        raise ValueError("need one eigenbasis per graph")
    lines = []
    for i, g in enumerate(dataset):
        rec = _record(i, g, None if eigenbases is None else eigenbases[i])
        lines.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _parse(rec: dict, lineno: int):
    if not isinstance(rec, dict):
        raise DatasetFormatError("record is not an object", lineno)
    if rec.get("version") != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported version {rec.get('version')!r}", lineno)
    try:
        n = int(rec["n"])
        n_max = int(rec.get("n_max", n))
        edges = rec["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"missing or bad field: {exc}", lineno) from None
    seen = set()
    for e in edges:
        if len(e) not in (2, 3):
            raise DatasetFormatError(f"bad edge {e!r}", lineno)
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < j < n):
            raise InvalidGraphError(f"line {lineno}: edge ({i}, {j}) is not a valid i<j pair for n={n}")
        if (i, j) in seen:
            raise InvalidGraphError(f"line {lineno}: duplicate edge ({i}, {j})")
        seen.add((i, j))
    X = np.asarray(rec["x"], dtype=np.float64) if "x" in rec else None
    g = Graph.from_edges(n, edges, n_max=n_max, X=X)
    U = np.asarray(rec["eigvecs"], dtype=np.float64) if "eigvecs" in rec else None
    return g, U


def load(path, with_eigenbases: bool = False):
    """Read a dataset file; returns graphs, or ``(graphs, eigenbases)``."""
    graphs, bases = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(exc.msg, lineno) from None
            g, U = _parse(rec, lineno)
            graphs.append(g)
            bases.append(U)
    return (graphs, bases) if with_eigenbases else graphs
