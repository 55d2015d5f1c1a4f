from itertools import combinations

import numpy as np
import pytest

from hogdiff.graph_core import Graph, permute
from hogdiff.evaluation import (
    StatHistogram,
    clustering_coefficients,
    clustering_hist,
    degree_hist,
    emd_1d,
    eval_report,
    kernel_matrix,
    mmd_squared,
    orbit_counts,
    orbit_hist,
    spectral_hist,
    tv_distance,
)
from conftest import complete, cycle, er_graph, path
from oracles import emd_by_quantiles, orbit_counts_esu


def star(leaves):
    return Graph.from_edges(leaves + 1, [(0, k) for k in range(1, leaves + 1)])


def test_degree_hist():
    np.testing.assert_array_equal(degree_hist(complete(3)).weights, [0, 0, 1])
    np.testing.assert_array_equal(degree_hist(star(3)).weights, [0, 0.75, 0, 0.25])
    empty = Graph.from_edges(0, [], n_max=3)
    np.testing.assert_array_equal(degree_hist(empty).weights, [1, 0, 0])


def test_degree_hist_recount(rng):
    for _ in range(10):
        g = er_graph(12, 0.3, rng, n_max=15)
        rows = [int(sum(1 for j in range(15) if g.A[i, j] != 0)) for i in range(12)]
        expect = np.zeros(15)
        for d in rows:
            expect[d] += 1 / 12
        np.testing.assert_allclose(degree_hist(g).weights, expect, atol=1e-15)


def test_clustering():
    assert clustering_hist(complete(3)).weights[-1] == 1.0
    assert clustering_hist(star(3)).weights[0] == 1.0
    k4m = Graph.from_edges(4, [e for e in combinations(range(4), 2) if e != (0, 1)])
    # triangle-enumeration oracle
    tri = [t for t in combinations(range(4), 3) if all(k4m.A[a, b] for a, b in combinations(t, 2))]
    deg = k4m.degrees()
    expect = [sum(v in t for t in tri) / (deg[v] * (deg[v] - 1) / 2) for v in range(4)]
    np.testing.assert_allclose(clustering_coefficients(k4m), expect, atol=1e-15)
    np.testing.assert_allclose(expect, [1, 1, 2 / 3, 2 / 3])


def test_orbit_examples():
    k4 = orbit_counts(complete(4))
    assert np.all(k4[:, 10] == 1) and k4[:, :10].sum() == 0
    p4 = orbit_counts(path(4))
    np.testing.assert_array_equal(p4[:, 0], [1, 0, 0, 1])
    np.testing.assert_array_equal(p4[:, 1], [0, 1, 1, 0])
    assert p4[:, 2:].sum() == 0
    c4 = orbit_counts(cycle(4))
    assert np.all(c4[:, 4] == 1)


def test_orbit_brute_force_matches_recount(rng):
    for _ in range(50):
        n = int(rng.integers(4, 13))
        g = er_graph(n, 0.4, rng)
        np.testing.assert_array_equal(orbit_counts(g), orbit_counts_esu(g))


def test_spectral_hist():
    h = spectral_hist(complete(3), bins=3, upper=3.0)
    np.testing.assert_allclose(h.weights, [1 / 3, 0, 2 / 3])
    assert spectral_hist(Graph.from_edges(4, []), bins=8).weights[0] == 1.0


def test_statistics_permutation_invariant(rng):
    g = er_graph(10, 0.4, rng)
    gp = permute(g, rng.permutation(10))
    for fn in (degree_hist, clustering_hist, orbit_hist):
        assert np.array_equal(fn(g).weights, fn(gp).weights)
    np.testing.assert_allclose(spectral_hist(g).weights, spectral_hist(gp).weights)


def test_emd():
    bins = np.arange(6.0)
    a = StatHistogram(bins, [1, 0, 0, 0, 0])
    b = StatHistogram(bins, [0, 0, 0, 1, 0])
    assert emd_1d(a, a) == 0.0 and emd_1d(a, b) == 3.0
    with pytest.raises(ValueError):
        emd_1d(a, StatHistogram(np.arange(3.0), [0.5, 0.5]))


def test_emd_matches_quantile_oracle(rng):
    for _ in range(50):
        k = int(rng.integers(2, 12))
        width = rng.uniform(0.1, 2.0)
        bins = np.arange(k + 1) * width
        wa, wb = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        got = emd_1d(StatHistogram(bins, wa), StatHistogram(bins, wb))
        assert got == pytest.approx(emd_by_quantiles(wa, wb, bins[:-1]), abs=1e-12)


def test_tv():
    bins = np.arange(4.0)
    a = StatHistogram(bins, [0.5, 0.5, 0])
    b = StatHistogram(bins, [0, 0.5, 0.5])
    assert tv_distance(a, b) == 0.5


def test_mmd_properties(rng):
    S = [degree_hist(er_graph(8, 0.3, rng)) for _ in range(6)]
    T = [degree_hist(er_graph(8, 0.6, rng)) for _ in range(4)]
    assert mmd_squared(S, S) == 0.0
    assert mmd_squared(S, T) == pytest.approx(mmd_squared(T, S), abs=1e-15)
    K = kernel_matrix(S, S)
    np.testing.assert_array_equal(K, K.T)
    np.testing.assert_array_equal(np.diag(K), 1.0)
    for kern in ("gaussian_emd", "gaussian_tv"):
        x, y = S[0], T[0]
        d = emd_1d(x, y) if kern == "gaussian_emd" else tv_distance(x, y)
        closed = 2 - 2 * np.exp(-d ** 2 / 2)
        assert abs(mmd_squared([x], [y], kern) - closed) <= 1e-12
    with pytest.raises(ValueError):
        mmd_squared([], T)


def test_eval_report(rng):
    graphs = [er_graph(9, 0.4, rng) for _ in range(5)]
    rep = eval_report(graphs, graphs)
    assert set(rep.records()["values"]) == {"Deg.", "Clus.", "Orbit", "Spec.", "Avg."}
    assert all(v == 0 for v in rep.values.values())
    k3s = [complete(3).pad(4)] * 4
    stars = [star(3)] * 3
    # degree EMD between the two is 1, so MMD^2 = 2 - 2 exp(-1/2)
    rep = eval_report(k3s, stars)
    assert rep.values["Deg."] > 0.5
    assert rep.values["Deg."] == pytest.approx(2 - 2 * np.exp(-0.5), abs=1e-12)
    assert "Deg." in rep.table()
