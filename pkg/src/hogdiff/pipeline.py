"""Coarse-to-fine training and sampling over time windows.

Boundary ``k`` of ``0 = tau_0 < ... < tau_K = T`` carries an endpoint state
``(X, lam)`` per training graph: boundary 0 is the graph itself, interior
boundaries are filtered skeletons (eigenvalues of the filtered Laplacian on
the original node block), boundary ``K`` is standard normal. Segments
``1..K-1`` are GOU bridges between consecutive boundaries; segment ``K`` is a
VP diffusion run on its own local clock ``u in [0, vp.T]``.

Score parametrization: the network output is divided by the conditional
standard deviation ``std(t)`` of its segment, which depends only on time.
With loss weight ``omega(t) = std(t)^2`` the training objective becomes
``|net + xi|^2`` where ``xi`` is the unit noise that produced the state.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import sde
from .datasets import default_features, pad_dataset
from .evaluation import MMDReport, eval_report
from .graph_core import (
    BINARY_RULE,
    MOLECULAR_RULE,
    Graph,
    eigendecompose,
    laplacian,
    quantize,
    reconstruct_adjacency,
    spectral_mask,
    spectral_state,
)
from .score_model import (
    Adam,
    ScoreBatch,
    ScoreInput,
    ScoreNetConfig,
    forward,
    init_params,
    loss_grad,
)
from .topology import FilterSpec, apply_filter

RULES = {"binary": BINARY_RULE, "molecular": MOLECULAR_RULE}
_SHARD = 8
_CHUNK = 16


class TrainingDivergence(FloatingPointError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class TimeWindows:
    boundaries: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.boundaries)
        if len(b) < 2 or b[0] != 0.0 or any(y <= x for x, y in zip(b, b[1:])):
            raise ValueError("boundaries must start at 0 and increase strictly")
        object.__setattr__(self, "boundaries", b)

    @property
    def K(self) -> int:
        return len(self.boundaries) - 1

    @property
    def T(self) -> float:
        return self.boundaries[-1]

    def segment(self, k: int) -> tuple[float, float]:
        """Window ``[tau_{k-1}, tau_k]`` of segment ``k`` (1-based)."""
        if not 1 <= k <= self.K:
            raise ValueError(f"segment {k} outside 1..{self.K}")
        return self.boundaries[k - 1], self.boundaries[k]


def build_windows(K: int = 2, T: float = 1.0, splits=None) -> TimeWindows:
    if K < 1:
        raise ValueError("K must be at least 1")
    if splits is None:
        splits = [k / K for k in range(1, K)]
    splits = [float(s) for s in splits]
    if len(splits) != K - 1:
        raise ValueError(f"K={K} needs {K - 1} splits, got {len(splits)}")
    if any(not 0 < s < 1 for s in splits) or any(b <= a for a, b in zip(splits, splits[1:])):
        raise ValueError("splits must be strictly ascending inside (0, 1)")
    return TimeWindows((0.0, *(T * s for s in splits), T))


@dataclass(frozen=True)
class RunConfig:
    K: int = 2
    T: float = 1.0
    splits: tuple = (0.5,)
    filters: tuple = (FilterSpec("cell"),)
    schedule: sde.NoiseSchedule = sde.NoiseSchedule()
    vp_schedule: sde.NoiseSchedule = sde.NoiseSchedule(kind="vp")
    model: ScoreNetConfig = ScoreNetConfig()
    features: str = "degree_onehot"
    feature_cap: int = 8
    lam_scale: float | None = None
    train_steps: int = 2000
    batch_size: int = 16
    lr: float = 1e-3
    grad_clip: float | None = 1.0
    c1: float = 1.0
    c2: float = 1.0
    sample_steps: int = 500
    quantize_between: bool = True
    rule: str = "binary"
    t_eps: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "splits", tuple(self.splits))
        object.__setattr__(self, "filters", tuple(self.filters))
        self.windows  # validates K / T / splits
        if len(self.filters) != self.K - 1:
            raise ValueError(f"need {self.K - 1} interior filters, got {len(self.filters)}")
        if any(f.kind == "noise" for f in self.filters[:-1]):
            raise ValueError("a noise guide is only allowed at the last interior boundary")
        if self.schedule.kind != "gou" or self.vp_schedule.kind != "vp":
            raise ValueError("schedule must be gou and vp_schedule must be vp")
        if self.schedule.T != self.T:
            raise ValueError("gou schedule horizon must equal T")
        if self.features not in ("degree_onehot", "given"):
            raise ValueError(f"unknown feature mode {self.features!r}")
        if self.rule not in RULES:
            raise ValueError(f"unknown quantization rule {self.rule!r}")
        if self.train_steps < 0 or self.batch_size < 1 or self.sample_steps < 1:
            raise ValueError("train_steps, batch_size and sample_steps must be positive")
        if not 0 < self.t_eps < 0.5:
            raise ValueError("t_eps must lie in (0, 0.5)")

    @property
    def windows(self) -> TimeWindows:
        return build_windows(self.K, self.T, self.splits)

    @property
    def noise_guide(self) -> bool:
        return bool(self.filters) and self.filters[-1].kind == "noise"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        sub = {"schedule": sde.NoiseSchedule, "vp_schedule": sde.NoiseSchedule, "model": ScoreNetConfig}
        for key, typ in sub.items():
            if key in d and isinstance(d[key], dict):
                d[key] = _strict(typ, d[key], key)
        if "filters" in d:
            d["filters"] = tuple(f if isinstance(f, FilterSpec) else _strict(FilterSpec, f, "filters")
                                 for f in d["filters"])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _strict(typ, d, where):
    known = {f.name for f in dataclasses.fields(typ)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown keys in {where}: {sorted(unknown)}")
    return typ(**d)


# -- intermediates ---------------------------------------------------------------

@dataclass(eq=False)
class Prepared:
    """Endpoint states of every training graph at boundaries ``0..K-1``.

    ``lam`` is divided by ``lam_scale``. When the last interior boundary is a
    noise guide its rows are zero and ``noise_boundary`` holds its index.
    """

    X: np.ndarray          # (N, K, n, d)
    lam: np.ndarray        # (N, K, n)
    A: np.ndarray          # (N, K, n, n) endpoint adjacency
    U0: np.ndarray         # (N, n, n)
    mask: np.ndarray       # (N, n)
    lam_mask: np.ndarray   # (N, n)
    windows: TimeWindows
    lam_scale: float
    noise_boundary: int | None = None

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[2]

    @property
    def d(self) -> int:
        return self.X.shape[3]

    def endpoint_states(self, i: int) -> list:
        """``(X, lam)`` at each boundary ``0..K``; ``None`` where drawn at use time."""
        out = []
        for k in range(self.windows.K + 1):
            if k == self.windows.K or k == self.noise_boundary:
                out.append(None)
            else:
                out.append((self.X[i, k], self.lam[i, k] * self.lam_scale))
        return out


def _active_spectrum(A: np.ndarray, mask: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(mask)
    lam = np.zeros(A.shape[0])
    if idx.size:
        lam[: idx.size] = eigendecompose(laplacian(A)[np.ix_(idx, idx)]).lam
    return lam


def _features(g: Graph, mode: str, cap: int) -> np.ndarray:
    return g.X if mode == "given" else default_features(g, "degree_onehot", cap)


def prepare_intermediates(dataset, windows: TimeWindows, filter_specs, features: str = "degree_onehot",
                          feature_cap: int = 8, lam_scale: float | None = None) -> Prepared:
    if not dataset:
        raise ValueError("empty dataset")
    filter_specs = list(filter_specs)
    K = windows.K
    if len(filter_specs) != K - 1:
        raise ValueError(f"need {K - 1} interior filters")
    graphs = pad_dataset(dataset)
    N, n = len(graphs), graphs[0].n_max
    Xs = [_features(g, features, feature_cap) for g in graphs]
    d = Xs[0].shape[1]
    X = np.zeros((N, K, n, d))
    lam = np.zeros((N, K, n))
    A = np.zeros((N, K, n, n))
    U0 = np.zeros((N, n, n))
    masks = np.stack([g.mask for g in graphs])
    noise_boundary = None
    for i, g in enumerate(graphs):
        s = spectral_state(g)
        U0[i] = s.U
        X[i, 0], lam[i, 0], A[i, 0] = Xs[i], s.lam, g.A
        cur = g.with_features(Xs[i])
        for k, spec in enumerate(filter_specs, start=1):
            if spec.kind == "noise":
                noise_boundary = k
                continue
            cur = apply_filter(cur, spec).graph()
            X[i, k] = cur.X
            A[i, k] = cur.A
            lam[i, k] = _active_spectrum(cur.A, g.mask)
    if lam_scale is None:
        lam_scale = float(max(lam[:, 0].max(), 1.0))
    return Prepared(X=X, lam=lam / lam_scale, A=A, U0=U0, mask=masks,
                    lam_mask=spectral_mask(masks), windows=windows,
                    lam_scale=float(lam_scale), noise_boundary=noise_boundary)


def prepare(dataset, config: RunConfig) -> Prepared:
    return prepare_intermediates(dataset, config.windows, config.filters, config.features,
                                 config.feature_cap, config.lam_scale)


# -- per-segment geometry -----------------------------------------------------------

def _is_vp(config: RunConfig, k: int) -> bool:
    return k == config.K


def _local_u(config: RunConfig, k: int, t):
    a, b = config.windows.segment(k)
    return (np.asarray(t, float) - a) / (b - a) * config.vp_schedule.T


def segment_std(config: RunConfig, k: int, t) -> np.ndarray:
    """Conditional standard deviation of the segment-``k`` state at global time ``t``."""
    t = np.asarray(t, dtype=float)
    if _is_vp(config, k):
        u = _local_u(config, k, t)
        return np.sqrt(-np.expm1(-config.vp_schedule.beta_integral(u)))
    a, b = config.windows.segment(k)
    s = config.schedule
    return np.sqrt(s.v2(a, t) * s.v2(t, b) / s.v2(a, b))


def _time_range(config: RunConfig, k: int) -> tuple[float, float]:
    a, b = config.windows.segment(k)
    eps = config.t_eps * (b - a)
    return (a + eps, b) if _is_vp(config, k) else (a + eps, b - eps)


def _score_input(prep: Prepared, idx, X_t, lam_t, t, X_end, lam_end, A_end) -> ScoreInput:
    m = prep.mask[idx]
    pair = (m[:, :, None] & m[:, None, :]).astype(float)
    A_t = reconstruct_adjacency((prep.U0[idx], lam_t * prep.lam_scale)) * pair
    return ScoreInput(X=X_t, A=A_t, X_end=X_end, A_end=A_end * pair, lam=lam_t, lam_end=lam_end,
                      t=t, mask=m, lam_mask=prep.lam_mask[idx])


@dataclass(eq=False)
class SegmentModel:
    k: int
    kind: str
    params: dict
    net: ScoreNetConfig


def _net_config(config: RunConfig, prep: Prepared) -> ScoreNetConfig:
    return dataclasses.replace(config.model, node_dim=prep.d)


def _draw_training_batch(prep: Prepared, config: RunConfig, k: int, rng: np.random.Generator):
    """Sample graphs, times and noisy states; returns a ScoreBatch with
    noise-prediction targets and the unit weights that make the loss equal
    ``std^2 |S - target_score|^2`` for ``S = net / std``."""
    B, n, d = config.batch_size, prep.n, prep.d
    idx = rng.integers(prep.N, size=B)
    lo, hi = _time_range(config, k)
    t = rng.uniform(lo, hi, size=B)
    xi_X = rng.standard_normal((B, n, d))
    xi_L = rng.standard_normal((B, n))
    m = prep.mask[idx][..., None].astype(float)
    lm = prep.lam_mask[idx].astype(float)
    xi_X, xi_L = xi_X * m, xi_L * lm
    X0, L0 = prep.X[idx, k - 1], prep.lam[idx, k - 1]
    X_t, L_t = np.empty_like(X0), np.empty_like(L0)
    if _is_vp(config, k):
        X_end, L_end, A_end = np.zeros_like(X0), np.zeros_like(L0), np.zeros((B, n, n))
        for b in range(B):
            u = float(_local_u(config, k, t[b]))
            mx = sde.vp_transition(X0[b], u, config.vp_schedule)
            ml = sde.vp_transition(L0[b], u, config.vp_schedule)
            X_t[b] = mx.mean + np.sqrt(mx.var) * xi_X[b]
            L_t[b] = ml.mean + np.sqrt(ml.var) * xi_L[b]
    else:
        a, c = config.windows.segment(k)
        if prep.noise_boundary == k:
            X_end = rng.standard_normal((B, n, d)) * m
            L_end = rng.standard_normal((B, n)) * lm
            A_end = reconstruct_adjacency((prep.U0[idx], L_end * prep.lam_scale))
        else:
            X_end, L_end, A_end = prep.X[idx, k], prep.lam[idx, k], prep.A[idx, k]
        for b in range(B):
            tb = float(t[b])
            mx = sde.bridge_conditional(sde.BridgeSegment(a, c, X0[b], X_end[b], config.schedule), tb)
            ml = sde.bridge_conditional(sde.BridgeSegment(a, c, L0[b], L_end[b], config.schedule), tb)
            X_t[b] = mx.mean + np.sqrt(mx.var) * xi_X[b]
            L_t[b] = ml.mean + np.sqrt(ml.var) * xi_L[b]
    inp = _score_input(prep, idx, X_t * m, L_t * lm, t, X_end * m, L_end * lm, A_end)
    return ScoreBatch(inp=inp, target_X=-xi_X, target_lam=-xi_L, weight=np.ones(B))


def _shard(batch: ScoreBatch, lo: int, hi: int) -> ScoreBatch:
    i = batch.inp
    s = slice(lo, hi)
    return ScoreBatch(
        ScoreInput(X=i.X[s], A=i.A[s], X_end=i.X_end[s], A_end=i.A_end[s], lam=i.lam[s],
                   lam_end=i.lam_end[s], t=i.t[s], mask=i.mask[s], lam_mask=i.lam_mask[s]),
        batch.target_X[s], batch.target_lam[s], batch.weight[s])


def _batch_loss_grad(params, batch: ScoreBatch, net, config: RunConfig, pool):
    """Loss and gradients over fixed-size shards reduced in a fixed order."""
    B = batch.weight.shape[0]
    bounds = [(lo, min(lo + _SHARD, B)) for lo in range(0, B, _SHARD)]
    job = lambda lh: loss_grad(params, _shard(batch, *lh), net, config.c1, config.c2)
    results = list(pool.map(job, bounds)) if pool is not None else [job(b) for b in bounds]
    value = 0.0
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    for (lo, hi), (v, g) in zip(bounds, results):
        w = (hi - lo) / B
        value += w * v
        for name in grads:
            grads[name] += w * g[name]
    return value, grads


def segment_rng(seed: int, k: int, stream: str) -> np.random.Generator:
    tag = {"train": 0, "sample": 1}[stream]
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag, int(k)]))


def train_segment(k: int, prep: Prepared, config: RunConfig, rng: np.random.Generator | None = None,
                  threads: int = 1, steps: int | None = None):
    """Train the score network of segment ``k``; returns ``(SegmentModel | None, losses)``.

    The last segment is skipped (``None``) under a noise guide: its start
    state is then standard normal and no model is needed to sample it.
    """
    if _is_vp(config, k) and prep.noise_boundary == config.K - 1 and config.K > 1:
        return None, np.zeros(0)
    rng = segment_rng(config.seed, k, "train") if rng is None else rng
    steps = config.train_steps if steps is None else steps
    net = _net_config(config, prep)
    params = init_params(net, rng)
    opt = Adam(params, lr=config.lr, clip_norm=config.grad_clip)
    losses = np.zeros(steps)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        with threadpool_limits(limits=1):
            for step in range(steps):
                batch = _draw_training_batch(prep, config, k, rng)
                try:
                    value, grads = _batch_loss_grad(params, batch, net, config, pool)
                except FloatingPointError:
                    value = float("nan")
                if not np.isfinite(value):
                    raise TrainingDivergence(f"segment {k} loss diverged at step {step}", step)
                opt.step(params, grads)
                losses[step] = value
    finally:
        if pool is not None:
            pool.shutdown()
    kind = "vp" if _is_vp(config, k) else "bridge"
    return SegmentModel(k=k, kind=kind, params=params, net=net), losses


def train(prep: Prepared, config: RunConfig, threads: int = 1):
    models, curves = [], []
    for k in range(1, config.K + 1):
        model, losses = train_segment(k, prep, config, threads=threads)
        models.append(model)
        curves.append(losses)
    return models, curves


# -- sampling --------------------------------------------------------------------

class NetScorer:
    """Turns a trained segment network into a score function."""

    def __init__(self, model: SegmentModel, config: RunConfig):
        self.model, self.config = model, config

    def __call__(self, X, lam, t, ctx):
        k = self.model.k
        inp = ScoreInput(X=X, A=ctx["A_t"], X_end=ctx["X_end"], A_end=ctx["A_end"], lam=lam,
                         lam_end=ctx["lam_end"], t=np.full(X.shape[0], t), mask=ctx["mask"],
                         lam_mask=ctx["lam_mask"])
        SX, SL = forward(self.model.params, inp, self.model.net)
        std = float(segment_std(self.config, k, t))
        return SX / std, SL / std


@dataclass(eq=False)
class SampleResult:
    graphs: list
    failed: int
    base_index: list = field(default_factory=list)


def _boundary_state(X, lam, U0, mask, lam_mask, scale, rule, quantize_now):
    """Endpoint seen by the next (finer) segment; optionally re-quantized."""
    pair = (mask[:, :, None] & mask[:, None, :]).astype(float)
    A = reconstruct_adjacency((U0, lam * scale)) * pair
    if not quantize_now:
        return lam, A
    Aq = quantize(A, rule).astype(float) * pair
    lam_q = np.stack([_active_spectrum(Aq[b], mask[b]) for b in range(len(Aq))]) / scale
    return lam_q * lam_mask, Aq


def _run_chunk(scorers, prep, config: RunConfig, seeds):
    rngs = [np.random.default_rng(s) for s in seeds]
    n, d, K = prep.n, prep.d, config.K
    base = np.array([r.integers(prep.N) for r in rngs])
    U0, mask, lmask = prep.U0[base], prep.mask[base], prep.lam_mask[base]
    m = mask[..., None].astype(float)
    lm = lmask.astype(float)
    B = len(rngs)
    X = np.stack([r.standard_normal((n, d)) for r in rngs]) * m
    L = np.stack([r.standard_normal(n) for r in rngs]) * lm
    alive = np.ones(B, dtype=bool)
    rule = RULES[config.rule]
    steps = config.sample_steps
    zeros_ctx = {"X_end": np.zeros_like(X), "lam_end": np.zeros_like(L), "A_end": np.zeros((B, n, n))}

    def noise():
        return (np.stack([r.standard_normal((n, d)) for r in rngs]) * m,
                np.stack([r.standard_normal(n) for r in rngs]) * lm)

    def context(Lc, extra):
        pair = (mask[:, :, None] & mask[:, None, :]).astype(float)
        A_t = reconstruct_adjacency((U0, Lc * prep.lam_scale)) * pair
        return {"A_t": A_t, "mask": mask, "lam_mask": lmask, **extra}

    def guard(Xn, Ln):
        nonlocal alive
        ok = np.all(np.isfinite(Xn), axis=(1, 2)) & np.all(np.isfinite(Ln), axis=1)
        alive &= ok
        return np.where(alive[:, None, None], Xn, 0.0), np.where(alive[:, None], Ln, 0.0)

    # segment K: reverse VP, unless a noise guide makes the start state standard normal
    if not (K > 1 and prep.noise_boundary == K - 1):
        vp = config.vp_schedule
        u_lo = config.t_eps * vp.T
        dt_u = (vp.T - u_lo) / steps
        a, b = config.windows.segment(K)
        for j in range(1, steps + 1):
            u = vp.T - j * dt_u
            t = a + (b - a) * u / vp.T
            SX, SL = scorers[K - 1](X, L, t, context(L, zeros_ctx))
            xiX, xiL = noise()
            Xn = sde.vp_reverse_step(X, u, SX, dt_u, vp, noise=xiX, check=False) * m
            Ln = sde.vp_reverse_step(L, u, SL, dt_u, vp, noise=xiL, check=False) * lm
            X, L = guard(Xn, Ln)

    # segments K-1 .. 1: reverse GOU bridges conditioned on the coarser endpoint
    for k in range(K - 1, 0, -1):
        quantize_now = config.quantize_between and k != prep.noise_boundary
        L_end, A_end = _boundary_state(X, L, U0, mask, lmask, prep.lam_scale, rule, quantize_now)
        X_end = X.copy()
        L = L_end.copy()
        ctx_end = {"X_end": X_end, "lam_end": L_end, "A_end": A_end}
        a, b = config.windows.segment(k)
        dt = (b - a) / steps
        t_last = a + config.t_eps * (b - a)
        for j in range(1, steps + 1):
            t = b - j * dt if j < steps else t_last
            SX, SL = scorers[k - 1](X, L, t, context(L, ctx_end))
            xiX, xiL = noise()
            Xn = sde.bridge_reverse_step(X, t, X_end, SX, dt, config.schedule, xiX, b) * m
            Ln = sde.bridge_reverse_step(L, t, L_end, SL, dt, config.schedule, xiL, b) * lm
            X, L = guard(Xn, Ln)

    pair = (mask[:, :, None] & mask[:, None, :]).astype(float)
    A = quantize(reconstruct_adjacency((U0, L * prep.lam_scale)), rule).astype(float) * pair
    out = []
    for i in range(B):
        out.append(Graph(A=A[i], X=X[i], mask=mask[i]) if alive[i] else None)
    return out, base.tolist()


def sample(scorers, prep: Prepared, config: RunConfig, n_samples: int, seed: int | None = None,
           threads: int = 1, chunk_size: int = _CHUNK) -> SampleResult:
    """Generate ``n_samples`` graphs; ``scorers[k-1]`` scores segment ``k``.

    Trajectory ``i`` uses its own stream spawned from ``seed``; trajectories
    are integrated in chunks of ``chunk_size`` so the output does not
    depend on ``threads``.
    """
    seed = config.seed if seed is None else seed
    scorers = [s if (s is None or callable(s)) else NetScorer(s, config) for s in scorers]
    seeds = np.random.SeedSequence([int(seed), 1]).spawn(n_samples)
    chunks = [seeds[i:i + chunk_size] for i in range(0, n_samples, chunk_size)]
    job = lambda ch: _run_chunk(scorers, prep, config, ch)
    with threadpool_limits(limits=1):
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                results = list(pool.map(job, chunks))
        else:
            results = [job(ch) for ch in chunks]
    graphs, bases = [], []
    for gs, bs in results:
        for g, b in zip(gs, bs):
            if g is not None:
                graphs.append(g)
                bases.append(b)
    return SampleResult(graphs=graphs, failed=n_samples - len(graphs), base_index=bases)


# -- guide ablation ---------------------------------------------------------------

GUIDES = {"cell": FilterSpec("cell"), "periphery": FilterSpec("periphery"),
          "noise": FilterSpec("noise"), "simplex": FilterSpec("simplex", p=3)}


@dataclass(eq=False)
class AblationRun:
    guide: str
    seed: int
    curves: list
    report: MMDReport
    failed: int


def run_ablation(guides, dataset, reference, config: RunConfig, seeds=None, n_samples: int = 64,
                 threads: int = 1) -> list[AblationRun]:
    """Train and sample once per (guide, seed), replacing the last interior filter."""
    if config.K < 2:
        raise ValueError("guide ablation needs at least two segments")
    seeds = [config.seed] if seeds is None else list(seeds)
    runs = []
    for guide in guides:
        if guide not in GUIDES:
            raise ValueError(f"unknown guide {guide!r}")
        for s in seeds:
            cfg = dataclasses.replace(config, filters=config.filters[:-1] + (GUIDES[guide],), seed=s)
            prep = prepare(dataset, cfg)
            models, curves = train(prep, cfg, threads=threads)
            res = sample(models, prep, cfg, n_samples, seed=s, threads=threads)
            report = eval_report(res.graphs, reference) if res.graphs else None
            runs.append(AblationRun(guide, s, curves, report, res.failed))
    return runs
