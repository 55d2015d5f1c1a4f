"""
Higher-order skeletons of a graph
=================================

Keep only the edges that sit on short cycles (cell filter) or inside
cliques (simplex filter); the periphery filter keeps the rest.
"""
import numpy as np

from hogdiff.datasets import gen_community_small
from hogdiff.graph_core import Graph, spectral_state
from hogdiff.topology import FilterSpec, apply_filter, chordless_cycles, enumerate_simplices, ho_statistics

# a triangle with a pendant path and a detached square
g = Graph.from_edges(9, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (5, 6), (6, 7), (7, 8), (8, 5)])
print("triangles:", enumerate_simplices(g, 2))
print("chordless cycles:", chordless_cycles(g))

for spec in (FilterSpec("cell"), FilterSpec("simplex", p=2), FilterSpec("periphery")):
    f = apply_filter(g, spec)
    print(f"{spec.kind:<10} keeps {f.kept_edges()}")

# the skeleton is spectrally coarser than the full graph
core = apply_filter(g, FilterSpec("cell")).graph()
print("full spectrum:", np.round(spectral_state(g).lam, 3))
print("cell spectrum:", np.round(spectral_state(core).lam, 3))

graphs = gen_community_small(20, 0)
print({k: round(v, 2) for k, v in ho_statistics(graphs, max_simplex_p=3).items()})
