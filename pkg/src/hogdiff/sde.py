"""Generalized Ornstein-Uhlenbeck bridges and the VP diffusion.

Schedules are linear in time so every integral of the drift coefficient is
available in closed form. States are plain numpy arrays of any shape; all
noise is isotropic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class DivergenceError(FloatingPointError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear ``theta(t)`` (gou) or ``beta(t)`` (vp) on ``[0, T]``.

    For ``gou`` the diffusion coefficient obeys ``g(t)^2 = 2 sigma2 theta(t)``.
    """

    kind: str = "gou"
    theta_min: float = 0.1
    theta_max: float = 4.0
    sigma2: float = 1.0
    beta_min: float = 0.1
    beta_max: float = 20.0
    T: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gou", "vp"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.kind == "gou" and (self.theta_min <= 0 or self.theta_max <= 0 or self.sigma2 <= 0):
            raise ValueError("gou schedule needs positive theta and sigma2")
        if self.kind == "vp" and (self.beta_min <= 0 or self.beta_max <= 0):
            raise ValueError("vp schedule needs positive beta")

    # -- gou ---------------------------------------------------------------
    def theta(self, t):
        return self.theta_min + (self.theta_max - self.theta_min) * np.asarray(t) / self.T

    def g2(self, t):
        return 2.0 * self.sigma2 * self.theta(t)

    def theta_bar(self, s, t):
        """Exact integral of ``theta`` over ``[s, t]``."""
        s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
        return 0.5 * (self.theta(s) + self.theta(t)) * (t - s)

    def v2(self, s, t):
        """GOU transition variance ``sigma2 (1 - exp(-2 theta_bar(s, t)))``."""
        return self.sigma2 * -np.expm1(-2.0 * self.theta_bar(s, t))

    # -- vp ----------------------------------------------------------------
    def beta(self, t):
        return self.beta_min + (self.beta_max - self.beta_min) * np.asarray(t) / self.T

    def beta_integral(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * (self.beta_min + self.beta(t)) * t


@dataclass(frozen=True, eq=False)
class BridgeSegment:
    """A time window with its two endpoint states."""

    tau_start: float
    tau_end: float
    x_start: np.ndarray
    x_end: np.ndarray
    schedule: NoiseSchedule

    def __post_init__(self):
        if not self.tau_start < self.tau_end:
            raise ValueError("bridge window must satisfy tau_start < tau_end")
        xs, xe = np.asarray(self.x_start, float), np.asarray(self.x_end, float)
        if xs.shape != xe.shape:
            raise ValueError(f"endpoint shapes differ: {xs.shape} vs {xe.shape}")
        object.__setattr__(self, "x_start", xs)
        object.__setattr__(self, "x_end", xe)


@dataclass(frozen=True, eq=False)
class GaussianMoments:
    mean: np.ndarray
    var: float | np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.var) < 0):
            raise ValueError("variance must be non-negative")


def _as_gou(sched: NoiseSchedule) -> NoiseSchedule:
    if sched.kind != "gou":
        raise ValueError("expected a gou schedule")
    return sched


def gou_transition(x_s, s: float, t: float, mu, sched: NoiseSchedule) -> GaussianMoments:
    """Moments of ``G_t | G_s`` for the mean-reverting process towards ``mu``."""
    _as_gou(sched)
    if s > t:
        raise ValueError("gou_transition needs s <= t")
    decay = np.exp(-sched.theta_bar(s, t))
    mean = mu + (np.asarray(x_s, float) - mu) * decay
    return GaussianMoments(mean=mean, var=float(sched.v2(s, t)))


def h_function(x_t, t: float, x_T, T: float, sched: NoiseSchedule):
    """Doob h-transform term ``grad_x log p(x_T | x_t)``."""
    _as_gou(sched)
    if t >= T:
        raise ValueError("h_function is singular for t >= T")
    denom = sched.sigma2 * np.expm1(2.0 * sched.theta_bar(t, T))
    return (np.asarray(x_T, float) - np.asarray(x_t, float)) / denom


def drift_coefficient(t, tau_end: float, sched: NoiseSchedule):
    """``theta(t) (1 + 2 / (exp(2 theta_bar(t, tau_end)) - 1))``."""
    t = np.asarray(t, dtype=float)
    if np.any(t >= tau_end):
        raise ValueError("bridge drift is singular at the terminal time")
    return sched.theta(t) * (1.0 + 2.0 / np.expm1(2.0 * sched.theta_bar(t, tau_end)))


def bridge_drift(x_t, t: float, seg: BridgeSegment):
    _as_gou(seg.schedule)
    return drift_coefficient(t, seg.tau_end, seg.schedule) * (seg.x_end - np.asarray(x_t, float))


def bridge_conditional(seg: BridgeSegment, t: float) -> GaussianMoments:
    """Moments of ``G_t`` given both endpoints of the window."""
    sched = _as_gou(seg.schedule)
    a, b = seg.tau_start, seg.tau_end
    if not a <= t <= b:
        raise ValueError(f"t={t} outside window [{a}, {b}]")
    v_ab = sched.v2(a, b)
    v_at = sched.v2(a, t)
    v_tb = sched.v2(t, b)
    mean = seg.x_end + (seg.x_start - seg.x_end) * np.exp(-sched.theta_bar(a, t)) * v_tb / v_ab
    return GaussianMoments(mean=mean, var=float(v_at * v_tb / v_ab))


def sample_bridge_state(seg: BridgeSegment, t: float, rng: np.random.Generator, mask=None):
    m = bridge_conditional(seg, t)
    x = m.mean + np.sqrt(m.var) * rng.standard_normal(m.mean.shape)
    if mask is not None:
        x = x * mask
    return x


def conditional_score_target(x_t, moments: GaussianMoments):
    """Score of the Gaussian ``N(mean, var I)`` evaluated at ``x_t``."""
    var = np.asarray(moments.var, dtype=float)
    if np.any(var <= 0):
        raise ValueError("score target undefined for zero variance")
    return -(np.asarray(x_t, float) - moments.mean) / var


def bridge_reverse_step(x, t: float, x_end, score, dt: float, sched: NoiseSchedule, noise, tau_end: float):
    """One reverse Euler-Maruyama step of the bridge, coefficients taken at ``t``."""
    drift = drift_coefficient(t, tau_end, sched) * (x_end - x)
    g2 = sched.g2(t)
    return x - (drift - g2 * score) * dt + np.sqrt(g2 * dt) * noise


def euler_reverse(
    seg: BridgeSegment,
    score_fn: Callable[[np.ndarray, float], np.ndarray],
    steps: int,
    rng: np.random.Generator,
    mask=None,
    return_path: bool = False,
):
    """Integrate the reverse bridge from ``seg.x_end`` down to ``tau_start``.

    With ``dt = (tau_end - tau_start) / steps`` the k-th step (k = 1..steps)
    moves the state to time ``tau_end - k dt`` using coefficients evaluated
    there, so the singular terminal time is never touched.

    Returns the final state, or with ``return_path`` an array holding the state
    after every step (index ``k - 1`` is the state at ``tau_end - k dt``).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    sched = _as_gou(seg.schedule)
    dt = (seg.tau_end - seg.tau_start) / steps
    x = np.array(seg.x_end, dtype=float, copy=True)
    path = []
    for k in range(1, steps + 1):
        t = seg.tau_end - k * dt if k < steps else seg.tau_start
        noise = rng.standard_normal(x.shape)
        x = bridge_reverse_step(x, t, seg.x_end, score_fn(x, t), dt, sched, noise, seg.tau_end)
        if mask is not None:
            x = x * mask
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"reverse bridge diverged at step {k}", step=k)
        if return_path:
            path.append(x.copy())
    return np.stack(path) if return_path else x


def vp_transition(x_0, t: float, sched: NoiseSchedule) -> GaussianMoments:
    if sched.kind != "vp":
        raise ValueError("expected a vp schedule")
    integral = sched.beta_integral(t)
    mean = np.asarray(x_0, float) * np.exp(-0.5 * integral)
    return GaussianMoments(mean=mean, var=float(-np.expm1(-integral)))


def vp_reverse_step(x, t: float, score, dt: float, sched: NoiseSchedule, rng=None, noise=None,
                    check: bool = True):
    """Reverse Euler-Maruyama step for ``dX = -beta X / 2 dt + sqrt(beta) dW``.

    With ``check=False`` non-finite entries are returned instead of raising.
    """
    beta = sched.beta(t)
    if noise is None:
        noise = rng.standard_normal(np.shape(x))
    out = x - (-0.5 * beta * x - beta * score) * dt + np.sqrt(beta * dt) * noise
    if check and not np.all(np.isfinite(out)):
        raise DivergenceError(f"vp reverse step diverged at t={t}", step=-1)
    return out
