"""Permutation-equivariant score network with hand-written gradients.

Layout of one forward pass (batch axis first, ``n`` padded nodes):

    input  = [X_t, X_end, random-walk return probabilities]  -> linear + act
    GCN    : H <- act(A_norm H W + b)                         (n_gcn_layers)
    ATTN   : H <- H + act(softmax(QK^T/sqrt(h) + E.w) V Wo + bo)  (n_attn_layers)
    FiLM   : each branch scaled/shifted by a linear map of the time embedding
    S_X    : per-node MLP on the concatenated branches
    S_lam  : per-eigenvalue MLP on [lam_t, lam_end, rank, time emb, pooled graph]

The enrichment features depend only on the binarized input adjacency, so
they are constants for differentiation. Gradients are implemented for this
architecture only and verified against central differences in the tests.
"""
from __future__ import annotations

import json
import struct
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph_core import Graph

_MASK_BIAS = -1e9


@dataclass(frozen=True)
class ScoreNetConfig:
    node_dim: int = 1
    hidden_dim: int = 32
    n_gcn_layers: int = 2
    n_attn_layers: int = 1
    time_dim: int = 16
    rw_steps: int = 4
    sp_cutoff: int = 5
    activation: str = "silu"

    def __post_init__(self):
        for name in ("node_dim", "hidden_dim", "time_dim", "rw_steps", "sp_cutoff"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_gcn_layers < 0 or self.n_attn_layers < 0:
            raise ValueError("layer counts must be non-negative")
        if self.time_dim % 2:
            raise ValueError("time_dim must be even")
        if self.activation not in ("relu", "silu"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def edge_channels(self) -> int:
        # random-walk probabilities, shortest-path one-hot, clipped A_t, endpoint A
        return self.rw_steps + self.sp_cutoff + 1 + 2

    def registry(self) -> "OrderedDict[str, tuple[int, ...]]":
        """Parameter name -> shape, in a fixed order."""
        d, h, td = self.node_dim, self.hidden_dim, self.time_dim
        reg: OrderedDict[str, tuple[int, ...]] = OrderedDict()
        reg["in.W"] = (2 * d + self.rw_steps, h)
        reg["in.b"] = (h,)
        for i in range(self.n_gcn_layers):
            reg[f"gcn{i}.W"] = (h, h)
            reg[f"gcn{i}.b"] = (h,)
        for i in range(self.n_attn_layers):
            for m in ("Wq", "Wk", "Wv", "Wo"):
                reg[f"attn{i}.{m}"] = (h, h)
            reg[f"attn{i}.bo"] = (h,)
            reg[f"attn{i}.we"] = (self.edge_channels,)
        reg["film.W"] = (td, 4 * h)
        reg["film.b"] = (4 * h,)
        reg["xhead.W1"] = (2 * h, h)
        reg["xhead.b1"] = (h,)
        reg["xhead.W2"] = (h, d)
        reg["lhead.W1"] = (3 + td + 2 * h, h)
        reg["lhead.b1"] = (h,)
        reg["lhead.W2"] = (h,)
        return reg


ScoreNetParams = "OrderedDict[str, np.ndarray]"

_ZERO_INIT = ("xhead.W2", "lhead.W2")


def init_params(config: ScoreNetConfig, rng: np.random.Generator):
    """Fan-in scaled uniform weights, zero biases, zero output layers."""
    params = OrderedDict()
    for name, shape in config.registry().items():
        if name in _ZERO_INIT or len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def count_params(params) -> int:
    return int(sum(p.size for p in params.values()))


# -- activations ---------------------------------------------------------------

def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z / (1.0 + np.exp(-z))


def _act_grad(z, kind):
    if kind == "relu":
        return (z > 0).astype(z.dtype)
    s = 1.0 / (1.0 + np.exp(-z))
    return s * (1.0 + z * (1.0 - s))


# -- inputs --------------------------------------------------------------------

def time_embed(t, dim: int) -> np.ndarray:
    """Interleaved ``[sin, cos]`` pairs at geometric frequencies; ``t`` scalar or ``(B,)``."""
    if dim % 2:
        raise ValueError("time embedding dimension must be even")
    t = np.asarray(t, dtype=np.float64)
    half = dim // 2
    freqs = 1000.0 * np.exp(-np.log(10000.0) * np.arange(half) / half)
    ang = t[..., None] * freqs
    out = np.empty(t.shape + (dim,))
    out[..., 0::2] = np.sin(ang)
    out[..., 1::2] = np.cos(ang)
    return out


def _enrich(A, mask, rw_steps, sp_cutoff):
    """Batched enrichment on the binarized adjacency (``A > 0.5``)."""
    m = mask.astype(np.float64)
    B = ((A > 0.5) & mask[..., :, None] & mask[..., None, :]).astype(np.float64)
    n = A.shape[-1]
    deg = B.sum(-1)
    eye = np.eye(n)
    isolated = (deg == 0) & mask
    P = B / np.maximum(deg, 1.0)[..., None] + eye * isolated[..., None, :].astype(np.float64)
    walks = []
    Pm = P
    for _ in range(rw_steps):
        walks.append(Pm)
        Pm = Pm @ P
    walks = np.stack(walks, axis=-1)
    node = np.einsum("...iim->...im", walks)

    # shortest-path distance, clipped: channel k for distance k < cutoff, last for >= cutoff
    pair = m[..., :, None] * m[..., None, :]
    dist = np.full(A.shape, sp_cutoff, dtype=np.int64)
    reach = eye * m[..., None, :] > 0
    dist[reach] = 0
    seen = reach.copy()
    frontier = reach.astype(np.float64)
    for k in range(1, sp_cutoff):
        frontier = ((frontier @ B) > 0) & ~seen
        dist[frontier] = k
        seen |= frontier
        frontier = frontier.astype(np.float64)
    onehot = (dist[..., None] == np.arange(sp_cutoff + 1)).astype(np.float64) * pair[..., None]
    return node * m[..., None], walks * pair[..., None], onehot


def enrich_features(g: Graph, rw_steps: int = 4, sp_cutoff: int = 5):
    """Node and edge features of a single graph.

    Returns:
        node: ``(n, rw_steps)`` return probabilities of 1..rw_steps step walks.
        edge: ``(n, n, rw_steps + sp_cutoff + 1)``; the first ``rw_steps``
        channels are the arrival probabilities (rows sum to 1 on active
        nodes), the rest a one-hot of the shortest-path distance clipped at
        ``sp_cutoff``.
    """
    A = np.where(g.A != 0, 1.0, 0.0)
    node, walks, onehot = _enrich(A, g.mask, rw_steps, sp_cutoff)
    return node, np.concatenate([walks, onehot], axis=-1)


def _normalized_adjacency(A, mask):
    m = mask.astype(np.float64)
    W = np.clip(A, 0.0, None) * m[..., :, None] * m[..., None, :] + np.eye(A.shape[-1]) * m[..., None, :]
    d = W.sum(-1)
    inv = np.where(d > 0, 1.0 / np.sqrt(np.maximum(d, 1e-300)), 0.0)
    return W * inv[..., :, None] * inv[..., None, :]


@dataclass(frozen=True, eq=False)
class ScoreInput:
    """A batch of network inputs; every array carries a leading batch axis.

    ``lam_mask`` marks the active eigenvalue slots (the first ``n_active``).
    """

    X: np.ndarray
    A: np.ndarray
    X_end: np.ndarray
    A_end: np.ndarray
    lam: np.ndarray
    lam_end: np.ndarray
    t: np.ndarray
    mask: np.ndarray
    lam_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        B, n = mask.shape
        if self.lam_mask is None:
            object.__setattr__(self, "lam_mask", np.arange(n) < mask.sum(-1, keepdims=True))
        if np.asarray(self.t).shape != (B,):
            object.__setattr__(self, "t", np.broadcast_to(np.asarray(self.t, float), (B,)).copy())
        expect = {"A": (B, n, n), "A_end": (B, n, n), "lam": (B, n), "lam_end": (B, n)}
        for name, shape in expect.items():
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")
        if np.shape(self.X)[:2] != (B, n) or np.shape(self.X) != np.shape(self.X_end):
            raise ValueError("node feature shapes are inconsistent")
        object.__setattr__(self, "mask", mask)

    def permuted(self, perm) -> "ScoreInput":
        """Relabel nodes of every batch element by the same permutation."""
        p = np.asarray(perm)
        return ScoreInput(
            X=self.X[:, p], A=self.A[:, p][:, :, p], X_end=self.X_end[:, p],
            A_end=self.A_end[:, p][:, :, p], lam=self.lam, lam_end=self.lam_end,
            t=self.t, mask=self.mask[:, p], lam_mask=self.lam_mask,
        )


def _check(params, inp: ScoreInput, config: ScoreNetConfig):
    if inp.X.shape[-1] != config.node_dim:
        raise ValueError(f"node_dim {config.node_dim} does not match input width {inp.X.shape[-1]}")
    reg = config.registry()
    for name, shape in reg.items():
        if name not in params or params[name].shape != shape:
            raise ValueError(f"parameter {name} missing or not of shape {shape}")


def _forward(params, inp: ScoreInput, config: ScoreNetConfig):
    _check(params, inp, config)
    act = config.activation
    h = config.hidden_dim
    mask = inp.mask
    m = mask.astype(np.float64)[..., None]
    lm = inp.lam_mask.astype(np.float64)
    pair = m * np.swapaxes(m, -1, -2)
    A = inp.A * pair
    A_end = inp.A_end * pair
    c = {"m": m, "lm": lm}

    rw_node, walks, onehot = _enrich(A, mask, config.rw_steps, config.sp_cutoff)
    E = np.concatenate([walks, onehot, np.clip(A, 0.0, None)[..., None], A_end[..., None]], axis=-1)
    temb = time_embed(inp.t, config.time_dim)
    c["temb"] = temb

    H0 = np.concatenate([inp.X * m, inp.X_end * m, rw_node], axis=-1)
    Zin = H0 @ params["in.W"] + params["in.b"]
    H = _act(Zin, act) * m
    c.update(H0=H0, Zin=Zin)

    Ahat = _normalized_adjacency(A, mask)
    c["Ahat"] = Ahat
    G = H
    gcn_cache = []
    for i in range(config.n_gcn_layers):
        AG = Ahat @ G
        Z = AG @ params[f"gcn{i}.W"] + params[f"gcn{i}.b"]
        G = _act(Z, act) * m
        gcn_cache.append((AG, Z))
    c["gcn"] = gcn_cache

    key_bias = np.where(mask[..., None, :], 0.0, _MASK_BIAS)
    S_ = H
    attn_cache = []
    scale = 1.0 / np.sqrt(h)
    for i in range(config.n_attn_layers):
        p = lambda k: params[f"attn{i}.{k}"]
        Q, K, V = S_ @ p("Wq"), S_ @ p("Wk"), S_ @ p("Wv")
        logits = (Q @ np.swapaxes(K, -1, -2)) * scale + E @ p("we") + key_bias
        logits = logits - logits.max(-1, keepdims=True)
        P = np.exp(logits)
        P /= P.sum(-1, keepdims=True)
        O = P @ V
        Z = O @ p("Wo") + p("bo")
        attn_cache.append((S_, Q, K, V, P, O, Z))
        S_ = (S_ + _act(Z, act)) * m
    c["attn"] = attn_cache
    c["E"] = E

    F = temb @ params["film.W"] + params["film.b"]
    gg, bg, ga, ba = (F[:, k * h:(k + 1) * h][:, None, :] for k in range(4))
    Gp = (G * (1.0 + gg) + bg) * m
    Sp = (S_ * (1.0 + ga) + ba) * m
    Hc = np.concatenate([Gp, Sp], axis=-1)
    c.update(G=G, S=S_, gg=gg, ga=ga, Hc=Hc)

    Z1 = Hc @ params["xhead.W1"] + params["xhead.b1"]
    Y1 = _act(Z1, act)
    SX = (Y1 @ params["xhead.W2"]) * m
    c.update(Z1=Z1, Y1=Y1)

    count = np.maximum(m.sum(axis=1), 1.0)
    pooled = (Hc * m).sum(axis=1) / count
    n = mask.shape[-1]
    rank = np.arange(n) / np.maximum(mask.sum(-1, keepdims=True), 1)
    Lin = np.concatenate([
        (inp.lam * lm)[..., None], (inp.lam_end * lm)[..., None], (rank * lm)[..., None],
        np.broadcast_to(temb[:, None, :], temb.shape[:1] + (n, temb.shape[-1])),
        np.broadcast_to(pooled[:, None, :], pooled.shape[:1] + (n, pooled.shape[-1])),
    ], axis=-1)
    Z2 = Lin @ params["lhead.W1"] + params["lhead.b1"]
    Y2 = _act(Z2, act)
    SL = (Y2 @ params["lhead.W2"]) * lm
    c.update(count=count, Lin=Lin, Z2=Z2, Y2=Y2)
    return SX, SL, c


def forward(params, inp: ScoreInput, config: ScoreNetConfig):
    """Return ``(S_X, S_lam)`` with shapes ``(B, n, d)`` and ``(B, n)``."""
    SX, SL, _ = _forward(params, inp, config)
    if not (np.all(np.isfinite(SX)) and np.all(np.isfinite(SL))):
        raise FloatingPointError("score network produced non-finite output")
    return SX, SL


def _backward(params, config: ScoreNetConfig, c, dSX, dSL):
    act = config.activation
    h = config.hidden_dim
    m, lm = c["m"], c["lm"]
    grads = OrderedDict((k, np.zeros_like(v)) for k, v in params.items())

    # spectrum head
    dSL = dSL * lm
    grads["lhead.W2"] = np.einsum("bnh,bn->h", c["Y2"], dSL)
    dZ2 = dSL[..., None] * params["lhead.W2"] * _act_grad(c["Z2"], act)
    grads["lhead.W1"] = np.einsum("bni,bnh->ih", c["Lin"], dZ2)
    grads["lhead.b1"] = dZ2.sum(axis=(0, 1))
    dLin = dZ2 @ params["lhead.W1"].T
    dpooled = dLin[..., 3 + config.time_dim:].sum(axis=1)
    dHc = dpooled[:, None, :] * m / c["count"][:, None, :]

    # node head
    dSX = dSX * m
    grads["xhead.W2"] = np.einsum("bnh,bnd->hd", c["Y1"], dSX)
    dZ1 = (dSX @ params["xhead.W2"].T) * _act_grad(c["Z1"], act)
    grads["xhead.W1"] = np.einsum("bni,bnh->ih", c["Hc"], dZ1)
    grads["xhead.b1"] = dZ1.sum(axis=(0, 1))
    dHc = dHc + dZ1 @ params["xhead.W1"].T

    # FiLM
    dGp, dSp = dHc[..., :h] * m, dHc[..., h:] * m
    dF = np.concatenate([
        (dGp * c["G"]).sum(1), dGp.sum(1), (dSp * c["S"]).sum(1), dSp.sum(1),
    ], axis=-1)
    grads["film.W"] = c["temb"].T @ dF
    grads["film.b"] = dF.sum(0)
    dG = dGp * (1.0 + c["gg"])
    dS = dSp * (1.0 + c["ga"])

    # attention branch
    scale = 1.0 / np.sqrt(h)
    for i in reversed(range(config.n_attn_layers)):
        S_in, Q, K, V, P, O, Z = c["attn"][i]
        pre = f"attn{i}."
        dU = dS * m
        dZ = dU * _act_grad(Z, act)
        grads[pre + "Wo"] = np.einsum("bni,bnj->ij", O, dZ)
        grads[pre + "bo"] = dZ.sum(axis=(0, 1))
        dO = dZ @ params[pre + "Wo"].T
        dP = dO @ np.swapaxes(V, -1, -2)
        dV = np.swapaxes(P, -1, -2) @ dO
        dL = P * (dP - (dP * P).sum(-1, keepdims=True))
        grads[pre + "we"] = np.einsum("bijc,bij->c", c["E"], dL)
        dQ = (dL @ K) * scale
        dK = (np.swapaxes(dL, -1, -2) @ Q) * scale
        for name, d in (("Wq", dQ), ("Wk", dK), ("Wv", dV)):
            grads[pre + name] = np.einsum("bni,bnj->ij", S_in, d)
        dS = dU + dQ @ params[pre + "Wq"].T + dK @ params[pre + "Wk"].T + dV @ params[pre + "Wv"].T

    # GCN branch
    for i in reversed(range(config.n_gcn_layers)):
        AG, Z = c["gcn"][i]
        dZ = dG * m * _act_grad(Z, act)
        grads[f"gcn{i}.W"] = np.einsum("bni,bnj->ij", AG, dZ)
        grads[f"gcn{i}.b"] = dZ.sum(axis=(0, 1))
        dG = c["Ahat"] @ (dZ @ params[f"gcn{i}.W"].T)

    dH = (dG + dS) * m
    dZin = dH * _act_grad(c["Zin"], act)
    grads["in.W"] = np.einsum("bni,bnj->ij", c["H0"], dZin)
    grads["in.b"] = dZin.sum(axis=(0, 1))
    return grads


@dataclass(frozen=True, eq=False)
class ScoreBatch:
    """Network inputs together with score targets and loss weights."""

    inp: ScoreInput
    target_X: np.ndarray
    target_lam: np.ndarray
    weight: np.ndarray


def _loss_terms(params, batch: ScoreBatch, config, c1, c2):
    SX, SL, cache = _forward(params, batch.inp, config)
    m, lm = cache["m"], cache["lm"]
    rX = (SX - batch.target_X) * m
    rL = (SL - batch.target_lam) * lm
    w = np.asarray(batch.weight, dtype=np.float64)
    per = w * (c1 * (rX ** 2).sum(axis=(1, 2)) + c2 * (rL ** 2).sum(axis=1))
    return per, rX, rL, w, cache


def loss(params, batch: ScoreBatch, config: ScoreNetConfig, c1: float = 1.0, c2: float = 1.0) -> float:
    """Batch mean of ``w (c1 |S_X - T_X|^2 + c2 |S_lam - T_lam|^2)`` over active entries."""
    per, *_ = _loss_terms(params, batch, config, c1, c2)
    value = float(per.mean())
    if not np.isfinite(value):
        raise FloatingPointError("loss is not finite")
    return value


def loss_grad(params, batch: ScoreBatch, config: ScoreNetConfig, c1: float = 1.0, c2: float = 1.0):
    per, rX, rL, w, cache = _loss_terms(params, batch, config, c1, c2)
    B = per.shape[0]
    dSX = (2.0 * c1 / B) * w[:, None, None] * rX
    dSL = (2.0 * c2 / B) * w[:, None] * rL
    value = float(per.mean())
    if not np.isfinite(value):
        raise FloatingPointError("loss is not finite")
    return value, _backward(params, config, cache, dSX, dSL)


class Adam:
    """Adaptive moment estimation over a parameter dict (updated in place)."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, clip_norm=None):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.clip_norm = clip_norm
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        if self.clip_norm is not None:
            total = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
            if total > self.clip_norm:
                grads = {k: g * (self.clip_norm / total) for k, g in grads.items()}
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1, corr2 = 1.0 - b1 ** self.t, 1.0 - b2 ** self.t
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            params[k] -= self.lr * (self.m[k] / corr1) / (np.sqrt(self.v[k] / corr2) + self.eps)


# -- checkpoints ---------------------------------------------------------------
#
# Layout (all integers little-endian):
#   8 bytes   magic b"HOGCKPT1"
#   8 bytes   uint64 header length L
#   L bytes   UTF-8 JSON: {"config": {...}, "extra": {...},
#                          "tensors": [{"name", "shape", "offset", "count"}, ...]}
#   payload   float64 '<f8' values of each tensor in C order; offsets are
#             counted in bytes from the start of the payload
_MAGIC = b"HOGCKPT1"


def save_checkpoint(path, params, config: ScoreNetConfig, extra: dict | None = None) -> None:
    tensors, offset = [], 0
    for name, arr in params.items():
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset, "count": int(arr.size)})
        offset += 8 * arr.size
    header = json.dumps(
        {"config": asdict(config), "extra": extra or {}, "tensors": tensors},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for arr in params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Return ``(params, config, extra)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _MAGIC:
        raise ValueError(f"{path} is not a checkpoint file")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    payload = memoryview(blob)[16 + hlen:]
    params = OrderedDict()
    for t in header["tensors"]:
        arr = np.frombuffer(payload, dtype="<f8", count=t["count"], offset=t["offset"])
        params[t["name"]] = arr.astype(np.float64).reshape(t["shape"])
    return params, ScoreNetConfig(**header["config"]), header["extra"]
