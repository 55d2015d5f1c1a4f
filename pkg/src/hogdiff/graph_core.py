"""Padded graph representation, Laplacians and spectral reconstruction.

Every graph in a dataset is stored at a common padded size ``n_max``. Inactive
(masked) nodes carry zero rows in both ``X`` and ``A`` so that states at every
stage of the diffusion share one shape.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class InvalidGraphError(ValueError):
    pass


class EigenSolverError(ArithmeticError):
    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Weighted undirected graph padded to ``n_max`` nodes.

    Attributes:
        A: symmetric ``(n_max, n_max)`` weighted adjacency with zero diagonal.
        X: ``(n_max, d)`` node features.
        mask: boolean ``(n_max,)`` vector of active nodes.
    """

    A: np.ndarray
    X: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        X = np.asarray(self.X, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if X.ndim == 1:
            X = X[:, None]
        n = mask.shape[0]
        if A.shape != (n, n) or X.shape[0] != n:
            raise InvalidGraphError(
                f"inconsistent shapes: A {A.shape}, X {X.shape}, mask {mask.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(X))):
            raise InvalidGraphError("graph contains non-finite entries")
        if not np.array_equal(A, A.T):
            raise InvalidGraphError("adjacency is not symmetric")
        if np.any(np.diag(A) != 0):
            raise InvalidGraphError("adjacency has nonzero diagonal")
        off = ~mask
        if np.any(A[off]) or np.any(X[off]):
            raise InvalidGraphError("masked nodes must have zero rows")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def n_max(self) -> int:
        return self.mask.shape[0]

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())

    @property
    def binary(self) -> np.ndarray:
        """0/1 adjacency of the support of ``A``."""
        return (self.A != 0).astype(np.int64)

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.A, 1))
        return list(zip(i.tolist(), j.tolist()))

    def degrees(self) -> np.ndarray:
        return self.binary.sum(axis=1)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Sequence],
        n_max: int | None = None,
        X: np.ndarray | None = None,
    ) -> "Graph":
        """Build a graph on the first ``n`` of ``n_max`` slots.

        ``edges`` holds ``(i, j)`` or ``(i, j, weight)`` items.
        """
        n_max = n if n_max is None else n_max
        if n > n_max:
            raise InvalidGraphError(f"n={n} exceeds n_max={n_max}")
        A = np.zeros((n_max, n_max))
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if i == j or not (0 <= i < n and 0 <= j < n):
                raise InvalidGraphError(f"bad edge ({i}, {j}) for n={n}")
            A[i, j] = A[j, i] = w
        mask = np.zeros(n_max, dtype=bool)
        mask[:n] = True
        if X is None:
            X = np.zeros((n_max, 1))
        else:
            X = np.asarray(X, dtype=np.float64)
            if X.ndim == 1:
                X = X[:, None]
            if X.shape[0] == n:
                X = np.vstack([X, np.zeros((n_max - n, X.shape[1]))])
        return cls(A=A, X=X, mask=mask)

    def with_features(self, X: np.ndarray) -> "Graph":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        return Graph(A=self.A, X=X * self.mask[:, None], mask=self.mask)

    def pad(self, n_max: int) -> "Graph":
        extra = n_max - self.n_max
        if extra < 0:
            raise InvalidGraphError("cannot pad to a smaller size")
        A = np.pad(self.A, ((0, extra), (0, extra)))
        X = np.pad(self.X, ((0, extra), (0, 0)))
        return Graph(A=A, X=X, mask=np.pad(self.mask, (0, extra)))


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Eigenvectors ``U`` (columns) and eigenvalues ``lam`` of a Laplacian."""

    U: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "U", _frozen(np.asarray(self.U, dtype=np.float64)))
        object.__setattr__(self, "lam", _frozen(np.asarray(self.lam, dtype=np.float64)))


@dataclass(frozen=True)
class QuantizationRule:
    """Bucket real values: ``x < thresholds[0]`` maps to ``levels[0]``, and so on."""

    thresholds: tuple[float, ...]
    levels: tuple[int, ...]

    def __post_init__(self):
        t = tuple(float(v) for v in self.thresholds)
        lv = tuple(int(v) for v in self.levels)
        if len(lv) != len(t) + 1:
            raise ValueError("need exactly one more level than thresholds")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("thresholds must be strictly ascending")
        if len(set(lv)) != len(lv):
            raise ValueError("levels must be distinct")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "levels", lv)


BINARY_RULE = QuantizationRule((0.5,), (0, 1))
MOLECULAR_RULE = QuantizationRule((0.5, 1.5, 2.5), (0, 1, 2, 3))


def _check_matrix(M: np.ndarray, tol: float = 0.0) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidGraphError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidGraphError("matrix contains non-finite entries")
    if np.max(np.abs(M - M.T), initial=0.0) > tol:
        raise InvalidGraphError("matrix is not symmetric")
    return M


def laplacian(g: Graph | np.ndarray) -> np.ndarray:
    """Combinatorial Laplacian ``D - A`` of a graph or raw adjacency."""
    A = g.A if isinstance(g, Graph) else _check_matrix(g)
    return np.diag(A.sum(axis=1)) - A


def _fix_signs(U: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made non-negative; ties go to the first index
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def eigendecompose(L: np.ndarray) -> SpectralState:
    """Symmetric eigendecomposition with ascending eigenvalues.

    Raises:
        InvalidGraphError: ``L`` is not symmetric within 1e-10.
        EigenSolverError: LAPACK failed to converge.
    """
    L = _check_matrix(L, tol=1e-10)
    L = 0.5 * (L + L.T)
    try:
        lam, U = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        # LAPACK reports the failing sub-problem count in the message
        raise EigenSolverError(f"eigensolver did not converge: {exc}", iterations=None) from exc
    return SpectralState(U=_fix_signs(U), lam=lam)


def spectral_state(g: Graph) -> SpectralState:
    """Decompose the Laplacian on the active block and embed it at size ``n_max``.

    The first ``n_active`` eigenpairs belong to the active nodes (ascending);
    the remaining columns of ``U`` are unit vectors on the masked nodes with
    eigenvalue 0. Keeping the two blocks separate stops degenerate zero
    eigenspaces from mixing active and padded coordinates.
    """
    idx = np.flatnonzero(g.mask)
    pad = np.flatnonzero(~g.mask)
    n_max = g.n_max
    U = np.zeros((n_max, n_max))
    lam = np.zeros(n_max)
    if idx.size:
        sub = eigendecompose(laplacian(g)[np.ix_(idx, idx)])
        U[np.ix_(idx, np.arange(idx.size))] = sub.U
        lam[: idx.size] = sub.lam
    U[pad, idx.size + np.arange(pad.size)] = 1.0
    return SpectralState(U=U, lam=lam)


def spectral_mask(mask: np.ndarray) -> np.ndarray:
    """Active entries of the eigenvalue vector produced by :func:`spectral_state`."""
    mask = np.asarray(mask, dtype=bool)
    n = mask.sum(axis=-1, keepdims=True)
    return np.arange(mask.shape[-1]) < n


def reconstruct_laplacian(U: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """``U diag(lam) U^T``; broadcasts over leading batch axes."""
    L = np.einsum("...ik,...k,...jk->...ij", U, lam, U)
    return 0.5 * (L + np.swapaxes(L, -1, -2))


def adjacency_from_laplacian(L: np.ndarray) -> np.ndarray:
    """``diag(L) - L``: symmetric with an exactly zero diagonal."""
    A = -np.array(L, dtype=np.float64, copy=True)
    idx = np.arange(L.shape[-1])
    A[..., idx, idx] = 0.0
    return A


def reconstruct_adjacency(s: SpectralState | tuple) -> np.ndarray:
    if isinstance(s, SpectralState):
        U, lam = s.U, s.lam
    else:
        U, lam = s
    return adjacency_from_laplacian(reconstruct_laplacian(U, lam))


def quantize(A: np.ndarray, rule: QuantizationRule = BINARY_RULE) -> np.ndarray:
    """Entry-wise bucketing; the diagonal is forced to zero."""
    A = np.asarray(A, dtype=np.float64)
    bucket = np.searchsorted(np.asarray(rule.thresholds), A, side="right")
    Q = np.asarray(rule.levels, dtype=np.int64)[bucket]
    if Q.ndim >= 2 and Q.shape[-1] == Q.shape[-2]:
        idx = np.arange(Q.shape[-1])
        Q[..., idx, idx] = 0
    return Q


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel nodes so that new node ``k`` is old node ``perm[k]``."""
    perm = np.asarray(perm, dtype=np.int64)
    n = g.n_max
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError("perm must be a bijection on range(n_max)")
    return Graph(A=g.A[np.ix_(perm, perm)], X=g.X[perm], mask=g.mask[perm])
