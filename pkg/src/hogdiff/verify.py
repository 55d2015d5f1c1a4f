"""Self-checks run by ``hogdiff verify``.

Each check returns ``(passed, detail)``; ``detail`` reports the observed
error next to its tolerance. Library functions are looked up through their
modules at call time so a patched implementation is what gets checked.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import score_model, sde, topology
from .graph_core import Graph, spectral_state


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str


def _er(n, p, rng, n_max=None):
    iu = np.triu_indices(n, 1)
    keep = rng.random(len(iu[0])) < p
    return Graph.from_edges(n, [(int(i), int(j)) for i, j, k in zip(*iu, keep) if k], n_max=n_max)


def _margin(err, tol):
    return err <= tol, f"max error {err:.3e} (tolerance {tol:.0e})"


# -- sde -------------------------------------------------------------------------

def check_drift_identity(rng):
    sched = sde.NoiseSchedule(theta_min=0.2, theta_max=3.0, sigma2=0.8)
    worst = 0.0
    for _ in range(1000):
        t = rng.uniform(0.0, 0.95)
        x, xe = rng.normal(size=2)
        seg = sde.BridgeSegment(0.0, 1.0, 0.0, xe, sched)
        f = sched.theta(t) * (xe - x)
        lhs = f + sched.g2(t) * sde.h_function(x, t, xe, 1.0, sched)
        worst = max(worst, abs(float(lhs - sde.bridge_drift(x, t, seg))))
    return _margin(worst, 1e-12)


def check_h_gradient(rng):
    sched = sde.NoiseSchedule(theta_min=0.3, theta_max=2.5, sigma2=0.7)
    worst = 0.0
    for _ in range(100):
        t = rng.uniform(0.0, 0.8)
        x, xT = rng.normal(size=2)
        var = sched.v2(t, 1.0)

        def logp(z):
            mean = sde.gou_transition(z, t, 1.0, xT, sched).mean
            return -0.5 * (xT - mean) ** 2 / var

        num = (logp(x + 1e-5) - logp(x - 1e-5)) / 2e-5
        worst = max(worst, abs(float(sde.h_function(x, t, xT, 1.0, sched) - num)))
    return _margin(worst, 1e-6)


def check_brownian_limit(rng):
    sched = sde.NoiseSchedule(theta_min=1e-5, theta_max=1e-5)
    seg = sde.BridgeSegment(0.0, 1.0, 0.0, 2.0, sched)
    worst = 0.0
    for t in np.linspace(0.0, 0.99, 100):
        x = 0.3
        ratio = sde.bridge_drift(x, t, seg) * (1.0 - t) / (2.0 - x)
        worst = max(worst, abs(float(ratio) - 1.0))
    return _margin(worst, 1e-3)


def check_bridge_monte_carlo(rng, paths=20000):
    sched = sde.NoiseSchedule(theta_min=1.0, theta_max=1.0)
    seg = sde.BridgeSegment(0.0, 1.0, 0.0, 2.0, sched)
    x = np.zeros(paths)
    dt = 1e-3
    for k in range(500):
        t = k * dt
        x = x + sde.bridge_drift(x, t, seg) * dt + np.sqrt(sched.g2(t) * dt) * rng.standard_normal(paths)
    m = sde.bridge_conditional(seg, 0.5)
    rel = max(abs(x.mean() / float(m.mean) - 1.0), abs(x.var() / m.var - 1.0))
    return _margin(rel, 0.02)


# -- topology --------------------------------------------------------------------

def check_cell_oracle(rng):
    bad = 0
    for _ in range(100):
        g = _er(10, 0.3, rng)
        for i, j in g.edges():
            bad += topology.edge_in_cycle(g, i, j, 8) != topology.edge_in_cycle_oracle(g, i, j, 8)
    return bad == 0, f"{bad} disagreeing edges"


def check_simplex_oracle(rng):
    bad = 0
    for _ in range(50):
        g = _er(12, 0.5, rng)
        B = g.A != 0
        tri = [c for c in combinations(range(12), 3) if all(B[a, b] for a, b in combinations(c, 2))]
        expect = np.zeros_like(B)
        for c in tri:
            for a, b in combinations(c, 2):
                expect[a, b] = expect[b, a] = True
        bad += int((topology.simplex_filter(g, 2).edge_keep != expect).sum())
    return bad == 0, f"{bad} disagreeing entries"


def check_periphery_complement(rng):
    bad = 0
    spec = topology.FilterSpec("periphery")
    for _ in range(30):
        g = _er(10, 0.3, rng)
        core = topology.cell_filter(g).edge_keep
        per = topology.periphery_filter(g, spec).edge_keep
        bad += int((core & per).sum() + ((core | per) != (g.A != 0)).sum())
    return bad == 0, f"{bad} disagreeing entries"


# -- model -----------------------------------------------------------------------

def _model_case(rng, cfg, B=2, n=6):
    params = score_model.init_params(cfg, rng)
    for k in params:
        params[k] = params[k] + 0.5 * rng.normal(size=params[k].shape)
    mask = np.zeros((B, n), bool)
    A = np.zeros((B, n, n))
    lam = np.zeros((B, n))
    for b in range(B):
        k = n - 2 * b
        mask[b, :k] = True
        g = _er(k, 0.5, rng, n_max=n)
        A[b] = g.A
        lam[b] = spectral_state(g).lam
    X = rng.normal(size=(B, n, cfg.node_dim)) * mask[..., None]
    X_end = rng.normal(size=X.shape) * mask[..., None]
    inp = score_model.ScoreInput(X=X, A=A, X_end=X_end, A_end=A, lam=lam, lam_end=lam,
                                 t=rng.uniform(0.1, 0.9, B), mask=mask)
    return params, inp


def check_equivariance(rng):
    cfg = score_model.ScoreNetConfig(node_dim=2, hidden_dim=8, time_dim=6)
    params, inp = _model_case(rng, cfg, B=1)
    SX, SL = score_model.forward(params, inp, cfg)
    worst = 0.0
    for _ in range(20):
        p = rng.permutation(inp.mask.shape[1])
        SXp, SLp = score_model.forward(params, inp.permuted(p), cfg)
        worst = max(worst, np.abs(SXp - SX[:, p]).max(), np.abs(SLp - SL).max())
    return _margin(float(worst), 1e-5)


def check_gradients(rng):
    cfg = score_model.ScoreNetConfig(node_dim=2, hidden_dim=4, time_dim=4, rw_steps=2, sp_cutoff=3)
    params, inp = _model_case(rng, cfg)
    batch = score_model.ScoreBatch(inp, rng.normal(size=inp.X.shape), rng.normal(size=inp.lam.shape),
                                   np.ones(2))
    _, grads = score_model.loss_grad(params, batch, cfg)
    worst = 0.0
    for name, arr in params.items():
        fd = np.zeros_like(arr)
        flat, out = arr.reshape(-1), fd.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + 1e-5
            up = score_model.loss(params, batch, cfg)
            flat[i] = old - 1e-5
            down = score_model.loss(params, batch, cfg)
            flat[i] = old
            out[i] = (up - down) / 2e-5
        scale = max(np.linalg.norm(fd), np.linalg.norm(grads[name]), 1e-8)
        worst = max(worst, np.linalg.norm(grads[name] - fd) / scale)
    return _margin(float(worst), 1e-4)


def check_mask_neutrality(rng):
    cfg = score_model.ScoreNetConfig(node_dim=2, hidden_dim=8, time_dim=6)
    params, inp = _model_case(rng, cfg)
    SX, SL = score_model.forward(params, inp, cfg)
    X = inp.X.copy()
    X[1, ~inp.mask[1]] = 7.0
    other = score_model.ScoreInput(X=X, A=inp.A, X_end=inp.X_end, A_end=inp.A, lam=inp.lam,
                                   lam_end=inp.lam_end, t=inp.t, mask=inp.mask)
    SX2, SL2 = score_model.forward(params, other, cfg)
    same = np.array_equal(SX, SX2) and np.array_equal(SL, SL2)
    return same, "outputs identical" if same else "outputs changed"


SUITES = {
    "sde": [("drift_identity", check_drift_identity), ("h_gradient", check_h_gradient),
            ("brownian_limit", check_brownian_limit), ("bridge_monte_carlo", check_bridge_monte_carlo)],
    "topology": [("cell_vs_matrix_power", check_cell_oracle), ("simplex_vs_enumeration", check_simplex_oracle),
                 ("periphery_complement", check_periphery_complement)],
    "model": [("equivariance", check_equivariance), ("gradients_vs_finite_differences", check_gradients),
              ("mask_neutrality", check_mask_neutrality)],
}


def run_suite(suite: str = "all", seed: int = 0) -> list[CheckResult]:
    names = list(SUITES) if suite == "all" else [suite]
    if any(s not in SUITES for s in names):
        raise ValueError(f"unknown suite {suite!r}")
    results = []
    for s in names:
        for name, fn in SUITES[s]:
            rng = np.random.default_rng([seed, len(results)])
            try:
                ok, detail = fn(rng)
            except Exception as exc:  # a crashing check is a failing check
                ok, detail = False, f"raised {type(exc).__name__}: {exc}"
            results.append(CheckResult(s, name, bool(ok), detail))
    return results
