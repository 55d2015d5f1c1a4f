"""Independent reference implementations used by several test modules."""
from itertools import permutations

import numpy as np

# Template graphlets on nodes 0..3 with the orbit of each template node.
_TEMPLATES = [
    ({(0, 1), (1, 2), (2, 3)}, [4, 5, 5, 4]),
    ({(0, 1), (0, 2), (0, 3)}, [7, 6, 6, 6]),
    ({(0, 1), (1, 2), (2, 3), (0, 3)}, [8, 8, 8, 8]),
    ({(0, 1), (1, 2), (0, 2), (2, 3)}, [10, 10, 11, 9]),
    ({(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)}, [13, 12, 13, 12]),
    ({(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)}, [14, 14, 14, 14]),
]


def _orbits_by_isomorphism(sub_edges):
    """Match an induced 4-node edge set against the templates under all relabelings."""
    for edges, orbits in _TEMPLATES:
        if len(edges) != len(sub_edges):
            continue
        for p in permutations(range(4)):
            mapped = {tuple(sorted((p[a], p[b]))) for a, b in sub_edges}
            if mapped == edges:
                return [orbits[p[v]] for v in range(4)]
    raise AssertionError("connected 4-node graph without template")


def orbit_counts_esu(g):
    """Enumerate connected 4-node subsets with ESU extension, classify by isomorphism."""
    B = g.A != 0
    nbrs = [set(np.flatnonzero(B[v])) for v in range(g.n_max)]
    out = np.zeros((g.n_max, 11), dtype=np.int64)

    def extend(sub, ext, root):
        if len(sub) == 4:
            nodes = sorted(sub)
            local = {v: k for k, v in enumerate(nodes)}
            edges = {(local[a], local[b]) for a in nodes for b in nodes if a < b and B[a, b]}
            for v, orb in zip(nodes, _orbits_by_isomorphism(edges)):
                out[v, orb - 4] += 1
            return
        ext = set(ext)
        while ext:
            w = ext.pop()
            excl = set().union(*(nbrs[u] for u in sub)) | sub
            new = ext | {u for u in nbrs[w] if u > root and u not in excl}
            extend(sub | {w}, new, root)

    for v in range(g.n_max):
        extend({v}, {u for u in nbrs[v] if u > v}, v)
    return out


def emd_by_quantiles(wa, wb, positions):
    """W1 = integral over u of |Qa(u) - Qb(u)| using merged cumulative breakpoints."""
    ca, cb = np.cumsum(wa), np.cumsum(wb)
    cuts = np.unique(np.concatenate([[0.0], ca, cb, [1.0]]).clip(0, 1))
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        qa = positions[min(np.searchsorted(ca, mid), len(ca) - 1)]
        qb = positions[min(np.searchsorted(cb, mid), len(cb) - 1)]
        total += (hi - lo) * abs(qa - qb)
    return total
