import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hogdiff.graph_core import (
    BINARY_RULE,
    MOLECULAR_RULE,
    Graph,
    InvalidGraphError,
    QuantizationRule,
    eigendecompose,
    laplacian,
    permute,
    quantize,
    reconstruct_adjacency,
    spectral_state,
)
from conftest import complete, er_graph, path


def test_laplacian_small_graphs():
    np.testing.assert_array_equal(laplacian(path(2)), [[1, -1], [-1, 1]])
    np.testing.assert_array_equal(laplacian(Graph.from_edges(3, [])), np.zeros((3, 3)))
    L = laplacian(complete(3))
    np.testing.assert_array_equal(np.diag(L), [2, 2, 2])
    assert np.all(L[~np.eye(3, dtype=bool)] == -1)


def test_laplacian_rejects_bad_input():
    with pytest.raises(InvalidGraphError):
        laplacian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(InvalidGraphError):
        laplacian(np.array([[0.0, np.nan], [np.nan, 0.0]]))
    with pytest.raises(InvalidGraphError):
        Graph(A=np.array([[0.0, 1.0], [2.0, 0.0]]), X=np.zeros((2, 1)), mask=[True, True])


def test_known_spectra():
    np.testing.assert_allclose(eigendecompose(laplacian(path(2))).lam, [0, 2], atol=1e-12)
    np.testing.assert_allclose(eigendecompose(laplacian(complete(3))).lam, [0, 3, 3], atol=1e-12)


def test_er_reconstruction_and_orthogonality(rng):
    L = laplacian(er_graph(8, 0.5, rng))
    s = eigendecompose(L)
    resid = np.linalg.norm(s.U @ np.diag(s.lam) @ s.U.T - L)
    assert resid <= 1e-8 * max(1.0, np.linalg.norm(L))
    assert np.linalg.norm(s.U.T @ s.U - np.eye(8)) <= 1e-8
    assert np.all(np.diff(s.lam) >= 0)
    # sign convention: largest-magnitude entry of each eigenvector is non-negative
    cols = np.arange(8)
    assert np.all(s.U[np.argmax(np.abs(s.U), axis=0), cols] >= 0)


def test_reconstruct_adjacency_examples(rng):
    s = eigendecompose(laplacian(complete(3)))
    np.testing.assert_array_equal(reconstruct_adjacency((s.U, np.zeros(3))), np.zeros((3, 3)))
    A = reconstruct_adjacency((s.U, s.lam + rng.normal(0, 0.1, 3)))
    np.testing.assert_array_equal(A, A.T)
    np.testing.assert_array_equal(np.diag(A), 0)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 10), p=st.floats(0, 1), seed=st.integers(0, 2**31))
def test_round_trip_and_trace(n, p, seed):
    g = er_graph(n, p, np.random.default_rng(seed))
    s = eigendecompose(laplacian(g))
    assert np.linalg.norm(reconstruct_adjacency(s) - g.A) <= 1e-8
    assert abs(s.lam.sum() - g.degrees().sum()) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_spectrum_is_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    g = er_graph(9, 0.4, rng)
    perm = rng.permutation(9)
    lam = eigendecompose(laplacian(g)).lam
    lam_p = eigendecompose(laplacian(permute(g, perm))).lam
    np.testing.assert_allclose(np.sort(lam_p), np.sort(lam), atol=1e-8)


def test_spectral_state_keeps_padding_separate(rng):
    g = er_graph(6, 0.5, rng, n_max=9)
    s = spectral_state(g)
    assert np.linalg.norm(s.U.T @ s.U - np.eye(9)) <= 1e-8
    assert np.all(s.lam[6:] == 0)
    assert np.all(s.U[6:, :6] == 0) and np.all(s.U[:6, 6:] == 0)
    np.testing.assert_allclose(reconstruct_adjacency(s), g.A, atol=1e-10)


def test_quantize_rules():
    vals = np.array([0.49, 0.5, 1.49, 2.5])
    np.testing.assert_array_equal(quantize(vals, MOLECULAR_RULE), [0, 1, 1, 3])
    np.testing.assert_array_equal(quantize(np.array([0.51, 0.49]), BINARY_RULE), [1, 0])
    np.testing.assert_array_equal(quantize(np.zeros((3, 3))), np.zeros((3, 3)))
    M = np.full((3, 3), 0.9)
    Q = quantize(M)
    np.testing.assert_array_equal(np.diag(Q), 0)
    np.testing.assert_array_equal(Q, Q.T)
    with pytest.raises(ValueError):
        QuantizationRule((1.0, 0.5), (0, 1, 2))


def test_permute(rng):
    g = path(2)
    assert np.array_equal(permute(g, [0, 1]).A, g.A)
    assert np.array_equal(permute(g, [1, 0]).A, g.A)
    h = er_graph(6, 0.5, rng)
    hp = permute(h, rng.permutation(6))
    assert sorted(hp.degrees()) == sorted(h.degrees())
    with pytest.raises(ValueError):
        permute(h, [0, 0, 1, 2, 3, 4])


def test_graph_is_immutable():
    g = path(3)
    with pytest.raises(ValueError):
        g.A[0, 1] = 5.0
