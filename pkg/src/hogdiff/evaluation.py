"""Graph statistics and MMD between sets of graphs."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .graph_core import Graph, spectral_state

# Orbit ids 4..14 of connected 4-node graphlets, keyed by
# (edge count, sorted degree sequence) -> {node degree: orbit}.
ORBIT_IDS = tuple(range(4, 15))
_GRAPHLET_ORBITS = {
    (3, (1, 1, 2, 2)): {1: 4, 2: 5},            # path
    (3, (1, 1, 1, 3)): {1: 6, 3: 7},            # star
    (4, (2, 2, 2, 2)): {2: 8},                  # cycle
    (4, (1, 2, 2, 3)): {1: 9, 2: 10, 3: 11},    # tailed triangle
    (5, (2, 2, 3, 3)): {2: 12, 3: 13},          # diamond
    (6, (3, 3, 3, 3)): {3: 14},                 # clique
}


@dataclass(frozen=True, eq=False)
class StatHistogram:
    bins: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bins, dtype=np.float64)
        if b.ndim != 1 or w.shape != (b.size - 1,):
            raise ValueError("weights must have one entry per bin")
        if np.any(np.diff(b) <= 0):
            raise ValueError("bin edges must be ascending")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "bins", b)
        object.__setattr__(self, "weights", w)


def _normalize(counts, bins) -> StatHistogram:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total == 0:
        counts = np.zeros_like(counts)
        counts[0] = 1.0
        total = 1.0
    return StatHistogram(bins, counts / total)


def _active_binary(g: Graph) -> np.ndarray:
    idx = np.flatnonzero(g.mask)
    return g.binary[np.ix_(idx, idx)].astype(np.int64)


def degree_hist(g: Graph, n_bins: int | None = None) -> StatHistogram:
    """Unit-width bins ``[k, k+1)`` for degrees ``0 .. n_bins - 1``."""
    n_bins = g.n_max if n_bins is None else n_bins
    deg = _active_binary(g).sum(1)
    counts = np.bincount(np.minimum(deg, n_bins - 1), minlength=n_bins)
    return _normalize(counts, np.arange(n_bins + 1, dtype=np.float64))


def clustering_coefficients(g: Graph) -> np.ndarray:
    B = _active_binary(g)
    deg = B.sum(1)
    tri = np.einsum("ij,jk,ki->i", B, B, B) / 2
    pairs = deg * (deg - 1) / 2
    return np.where(deg >= 2, tri / np.maximum(pairs, 1), 0.0)


def clustering_hist(g: Graph, bins: int = 100) -> StatHistogram:
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(clustering_coefficients(g), bins=edges)
    return _normalize(counts, edges)


def orbit_counts(g: Graph) -> np.ndarray:
    """Per-node counts over orbits 4..14 by enumerating every 4-node subset."""
    B = _active_binary(g)
    n = B.shape[0]
    out = np.zeros((g.n_max, len(ORBIT_IDS)), dtype=np.int64)
    nodes = np.flatnonzero(g.mask)
    for quad in combinations(range(n), 4):
        sub = B[np.ix_(quad, quad)]
        deg = sub.sum(1)
        key = (int(deg.sum()) // 2, tuple(sorted(int(d) for d in deg)))
        orbit_of = _GRAPHLET_ORBITS.get(key)
        if orbit_of is None:
            continue  # disconnected
        for v, d in zip(quad, deg):
            out[nodes[v], orbit_of[int(d)] - 4] += 1
    return out


def orbit_hist(g: Graph) -> StatHistogram:
    """Orbit totals over all nodes, normalized (one unit-width bin per orbit)."""
    counts = orbit_counts(g).sum(0)
    return _normalize(counts, np.arange(len(ORBIT_IDS) + 1, dtype=np.float64))


def spectral_hist(g: Graph, bins: int = 200, upper: float | None = None) -> StatHistogram:
    """Laplacian eigenvalues of the active block, binned uniformly on ``[0, upper]``."""
    upper = float(g.n_max) if upper is None else upper
    lam = spectral_state(g).lam[: g.n_active]
    edges = np.linspace(0.0, upper, bins + 1)
    counts, _ = np.histogram(np.clip(lam, 0.0, upper), bins=edges)
    return _normalize(counts, edges)


def _check_bins(a: StatHistogram, b: StatHistogram):
    if a.bins.shape != b.bins.shape or not np.array_equal(a.bins, b.bins):
        raise ValueError("histograms do not share bin edges")


def emd_1d(a: StatHistogram, b: StatHistogram) -> float:
    """Wasserstein-1 between histograms whose mass sits at the bin left edges."""
    _check_bins(a, b)
    gaps = np.diff(a.bins[:-1])
    diff = np.cumsum(a.weights - b.weights)[:-1]
    return float(np.sum(np.abs(diff) * gaps))


def tv_distance(a: StatHistogram, b: StatHistogram) -> float:
    _check_bins(a, b)
    return 0.5 * float(np.abs(a.weights - b.weights).sum())


KERNELS = ("gaussian_emd", "gaussian_tv")


def _distance_fn(kernel):
    if kernel == "gaussian_emd":
        return emd_1d
    if kernel == "gaussian_tv":
        return tv_distance
    raise ValueError(f"unknown kernel {kernel!r}")


def kernel_matrix(X, Y, kernel: str = "gaussian_emd", sigma: float = 1.0) -> np.ndarray:
    dist = _distance_fn(kernel)
    D = np.array([[dist(x, y) for y in Y] for x in X], dtype=np.float64).reshape(len(X), len(Y))
    return np.exp(-(D ** 2) / (2.0 * sigma ** 2))


def mmd_squared(A, B, kernel: str = "gaussian_emd", sigma: float = 1.0) -> float:
    """Biased (V-statistic) squared MMD between two histogram sets."""
    if len(A) == 0 or len(B) == 0:
        raise ValueError("MMD needs two non-empty sets")
    kaa = kernel_matrix(A, A, kernel, sigma).mean()
    kbb = kernel_matrix(B, B, kernel, sigma).mean()
    kab = kernel_matrix(A, B, kernel, sigma).mean()
    return float(kaa + kbb - 2.0 * kab)


@dataclass
class MMDReport:
    values: dict
    kernel: str
    sigma: float
    n_generated: int
    n_reference: int
    spectral_kernel: str = "gaussian_tv"
    failed: int = 0
    extras: dict = field(default_factory=dict)

    COLUMNS = ("Deg.", "Clus.", "Orbit", "Spec.", "Avg.")

    def records(self) -> dict:
        return {
            "values": {k: self.values[k] for k in self.COLUMNS},
            "kernel": self.kernel, "spectral_kernel": self.spectral_kernel, "sigma": self.sigma,
            "n_generated": self.n_generated, "n_reference": self.n_reference, "failed": self.failed,
            **self.extras,
        }

    def table(self) -> str:
        head = " ".join(f"{c:>9}" for c in self.COLUMNS)
        row = " ".join(f"{self.values[c]:9.6f}" for c in self.COLUMNS)
        return f"{head}\n{row}"


def eval_report(generated, reference, kernel: str = "gaussian_emd", sigma: float = 1.0,
                clustering_bins: int = 100, spectral_bins: int = 200,
                spectral_kernel: str = "gaussian_tv") -> MMDReport:
    """Squared MMD of degree, clustering, orbit and spectral statistics plus their mean."""
    if not generated or not reference:
        raise ValueError("need non-empty generated and reference sets")
    n_max = max(g.n_max for g in list(generated) + list(reference))

    def stats(fn):
        return [fn(g) for g in generated], [fn(g) for g in reference]

    values = {}
    for name, fn, kern in (
        ("Deg.", lambda g: degree_hist(g, n_max), kernel),
        ("Clus.", lambda g: clustering_hist(g, clustering_bins), kernel),
        ("Orbit", orbit_hist, kernel),
        ("Spec.", lambda g: spectral_hist(g, spectral_bins, float(n_max)), spectral_kernel),
    ):
        a, b = stats(fn)
        values[name] = max(mmd_squared(a, b, kern, sigma), 0.0)
    values["Avg."] = float(np.mean([values[c] for c in ("Deg.", "Clus.", "Orbit", "Spec.")]))
    return MMDReport(values, kernel, sigma, len(generated), len(reference), spectral_kernel)
