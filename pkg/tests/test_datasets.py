import numpy as np
import pytest

from hogdiff.datasets import (
    DatasetFormatError,
    community_labels_small,
    default_features,
    gen_community_small,
    gen_sbm,
    load,
    pad_dataset,
    save,
)
from hogdiff.graph_core import Graph, InvalidGraphError, permute
from conftest import complete, er_graph


def test_community_small_shape_and_determinism():
    a = gen_community_small(50, 7)
    b = gen_community_small(50, 7)
    assert all(np.array_equal(x.A, y.A) for x, y in zip(a, b))
    assert all(12 <= g.n_active <= 20 for g in a)
    for g in a:
        lab = community_labels_small(g.n_active)
        cross = np.triu(g.binary & (lab[:, None] != lab[None, :])).sum()
        assert cross == int(np.ceil(0.05 * g.n_active))


def test_community_small_density():
    graphs = gen_community_small(500, np.random.default_rng(1))
    edges = pairs = 0
    for g in graphs:
        lab = community_labels_small(g.n_active)
        same = np.triu(lab[:, None] == lab[None, :], 1)
        edges += (g.binary & same).sum()
        pairs += same.sum()
    assert abs(edges / pairs - 0.7) <= 0.03


def test_sbm():
    graphs = gen_sbm(200, 3)
    assert all(40 <= g.n_active <= 200 for g in graphs)
    again = gen_sbm(5, 3)
    assert all(np.array_equal(x.A, y.A) for x, y in zip(graphs[:5], again))


def test_sbm_density_and_communities():
    # regenerate the block labels from the same streams to recount densities
    from hogdiff.datasets import _streams
    graphs = gen_sbm(200, 11)
    intra = intra_pairs = 0
    for g, r in zip(graphs, _streams(200, 11)):
        c = int(r.integers(2, 6))
        assert 2 <= c <= 5
        block = np.repeat(np.arange(c), r.integers(20, 41, size=c))
        assert block.size == g.n_active
        same = np.triu(block[:, None] == block[None, :], 1)
        intra += (g.binary & same).sum()
        intra_pairs += same.sum()
    assert abs(intra / intra_pairs - 0.3) <= 0.02


def test_round_trip(tmp_path):
    graphs = gen_community_small(10, 0)
    p1, p2 = tmp_path / "a.graphs.jsonl", tmp_path / "b.graphs.jsonl"
    save(graphs, p1)
    back = load(p1)
    assert all(np.array_equal(x.A, y.A) and np.array_equal(x.mask, y.mask) for x, y in zip(graphs, back))
    save(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_weighted_and_features_round_trip(tmp_path):
    g = Graph.from_edges(4, [(0, 1, 1), (1, 2, 2), (2, 3, 3)], n_max=6, X=np.arange(8.0).reshape(4, 2))
    U = np.eye(6)
    save([g], tmp_path / "w.graphs.jsonl", eigenbases=[U])
    (h,), (V,) = load(tmp_path / "w.graphs.jsonl", with_eigenbases=True)
    assert np.array_equal(h.A, g.A) and np.array_equal(h.X, g.X) and h.n_max == 6
    assert np.array_equal(V, U)


@pytest.mark.parametrize("line, err", [
    ('{"version":1,"id":0,"n":3,"edges":[[0,1,1],[0,1,1]]}', InvalidGraphError),
    ('{"version":1,"id":0,"n":3,"edges":[[0,3,1]]}', InvalidGraphError),
    ('{"version":1,"id":0,"n":3,"edges":[[1,0,1]]}', InvalidGraphError),
    ('{"version":1,"id":0,"n":3,"edges":[[0,1', DatasetFormatError),
    ('{"version":2,"id":0,"n":3,"edges":[]}', DatasetFormatError),
])
def test_load_rejects(tmp_path, line, err):
    p = tmp_path / "bad.graphs.jsonl"
    p.write_text('{"version":1,"id":0,"n":2,"edges":[[0,1,1]]}\n' + line + "\n")
    with pytest.raises(err) as info:
        load(p)
    assert "line 2" in str(info.value)


def test_default_features(rng):
    X = default_features(complete(3), cap=4)
    assert X.shape == (3, 4) and np.all(X[:, 2] == 1) and X.sum() == 3
    g = er_graph(8, 0.4, rng, n_max=10)
    Xs = default_features(g, "degree_plus_spectral", cap=5, k=3)
    assert Xs.shape == (10, 8) and np.all(Xs[8:] == 0)
    perm = rng.permutation(10)
    np.testing.assert_array_equal(default_features(permute(g, perm), cap=5), default_features(g, cap=5)[perm])


def test_pad_dataset():
    graphs = pad_dataset(gen_community_small(5, 2))
    assert len({g.n_max for g in graphs}) == 1
    with pytest.raises(ValueError):
        pad_dataset([])
