"""Sinusoidal, performance-adaptive strategy weighting.

Each round the controller

1. evaluates a phase-shifted sinusoidal prior per strategy,
2. mixes it with a temperature softmax over exponentially smoothed
   per-strategy performance traces,
3. normalises the mix onto the simplex with floor/cap/dominance bounds,
4. splits the batch budget into integer quotas, reserving an exploration share.

``alpha``, ``tau`` and ``eps`` decay linearly from round 1 to round T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from wavefuse.errors import BudgetError, ConfigError, DegenerateWeightsError
from wavefuse.strategies import CANONICAL_ORDER, SelectionResult

_NEGLIGIBLE = 1e-300  # keeps bound / r finite


@dataclass(frozen=True)
class ControllerConfig:
    alpha0: float = 0.3
    alpha_min: float = 0.02
    beta: float = 0.30
    tau0: float = 0.7
    tau_min: float = 0.25
    eps0: float = 0.10
    eps_min: float = 0.02
    weight_floor: float = 0.05
    weight_cap: float = 0.8
    dominance: float = 0.6
    strategy_order: tuple = CANONICAL_ORDER

    def __post_init__(self):
        object.__setattr__(self, "strategy_order", tuple(self.strategy_order))
        s = self.n_strategies
        if s < 2:
            raise ConfigError("strategy_order needs at least 2 strategies")
        if len(set(self.strategy_order)) != s:
            raise ConfigError("strategy_order contains duplicates")
        if not 0.0 <= self.alpha_min <= self.alpha0 <= 1.0:
            raise ConfigError("need 0 <= alpha_min <= alpha0 <= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta must lie in [0, 1]")
        if not (self.tau0 > 0 and self.tau_min > 0):
            raise ConfigError("tau0 and tau_min must be positive")
        for name in ("eps0", "eps_min"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.weight_floor < 0:
            raise ConfigError("weight_floor must be non-negative")
        if not self.weight_floor <= self.dominance <= self.weight_cap:
            raise ConfigError("need weight_floor <= dominance <= weight_cap")
        if self.weight_floor * s > 1.0 + 1e-12:
            raise ConfigError("weight_floor * n_strategies exceeds 1")
        if self.upper_bound * s < 1.0 - 1e-12:
            raise ConfigError("min(weight_cap, dominance) * n_strategies is below 1")

    @property
    def n_strategies(self) -> int:
        return len(self.strategy_order)

    @property
    def upper_bound(self) -> float:
        return min(self.weight_cap, self.dominance)

    @classmethod
    def from_dict(cls, block: dict) -> ControllerConfig:
        names = {f.name for f in fields(cls)}
        for key in block:
            if key not in names:
                raise ConfigError(f"unknown controller key: {key}")
        return cls(**block)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["strategy_order"] = list(self.strategy_order)
        return out


@dataclass(frozen=True)
class ControllerState:
    """Per-strategy performance traces and the number of updates applied."""

    omega: np.ndarray
    t: int = 0

    def __post_init__(self):
        omega = np.array(self.omega, dtype=np.float64)
        if not np.all(np.isfinite(omega)):
            raise ValueError("performance traces must be finite")
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)

    @classmethod
    def initial(cls, metric: float, n_strategies: int) -> ControllerState:
        return cls(np.full(n_strategies, float(metric)), 0)


@dataclass(frozen=True)
class QuotaVector:
    quotas: tuple
    exploration: int = 0

    @property
    def total(self) -> int:
        return int(sum(self.quotas)) + self.exploration


def sinusoidal_prior(t, T, S) -> np.ndarray:
    """``sin(2 pi t / T + 2 pi s / S) + 1`` for ``s = 1..S``; values in [0, 2]."""
    if T < 1 or S < 1:
        raise ValueError("T and S must be positive")
    s = np.arange(1, S + 1)
    return np.sin(2.0 * np.pi * t / T + 2.0 * np.pi * s / S) + 1.0


def update_performance_trace(state: ControllerState, omega_obs, active, beta) -> ControllerState:
    """EMA update applied only where ``active`` is true."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    obs = np.asarray(omega_obs, dtype=np.float64)
    active = np.asarray(active, dtype=bool)
    if obs.shape != state.omega.shape or active.shape != state.omega.shape:
        raise ValueError("observation and mask must match the number of strategies")
    if not np.all(np.isfinite(obs[active])):
        raise ValueError("observed performance must be finite")
    blended = beta * obs + (1.0 - beta) * state.omega
    return ControllerState(np.where(active, blended, state.omega), state.t + 1)


def fuse_weights(psi, omega, alpha, tau) -> np.ndarray:
    """``alpha * psi + (1 - alpha) * softmax(omega / tau)`` (unnormalised)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if not tau > 0:
        raise ValueError("tau must be positive")
    z = np.asarray(omega, dtype=np.float64) / tau
    z = np.exp(z - z.max())
    return alpha * np.asarray(psi, dtype=np.float64) + (1.0 - alpha) * z / z.sum()


def normalize_clamp(raw, floor=0.05, cap=0.8, dominance=0.6) -> np.ndarray:
    """Normalise ``raw`` to sum 1 with every entry in ``[floor, min(cap, dominance)]``.

    Solves the waterfilling fixed point: clamped entries sit on a bound and the
    free entries share the remaining mass in proportion to ``raw``. If the
    positive entries cannot absorb the mass on their own, zero entries split
    the rest equally. Entries below ``1e-300`` of the total count as zero.
    """
    r = np.asarray(raw, dtype=np.float64)
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("raw weights must be finite and non-negative")
    total = r.sum()
    if not total > 0:
        raise DegenerateWeightsError("all raw weights are zero")
    s = len(r)
    hi = min(cap, dominance)
    if floor * s > 1.0 + 1e-12 or hi * s < 1.0 - 1e-12:
        raise ValueError("bounds admit no weight vector summing to 1")
    r = r / total
    r[r < _NEGLIGIBLE] = 0.0
    pos = r > 0
    n_zero = s - int(pos.sum())
    if hi * pos.sum() + floor * n_zero < 1.0:
        out = np.where(pos, hi, (1.0 - hi * pos.sum()) / n_zero)
        return out

    # F(lam) = sum clip(lam * r, floor, hi) is piecewise linear and nondecreasing;
    # find the piece that crosses 1 and solve it exactly
    rp = r[pos]
    breaks = np.unique(np.concatenate([floor / rp, hi / rp, [0.0]]))
    masses = np.clip(np.outer(breaks, r), floor, hi).sum(axis=1)
    j = int(np.searchsorted(masses, 1.0, side="left"))
    j = min(j, len(breaks) - 1)
    if masses[j] == 1.0:
        lam = breaks[j]
    else:
        mid = 0.5 * (breaks[j - 1] + breaks[j])
        low_set = ~pos | (mid * r <= floor)
        high_set = pos & (mid * r >= hi)
        free = ~(low_set | high_set)
        fixed_mass = floor * low_set.sum() + hi * high_set.sum()
        lam = (1.0 - fixed_mass) / r[free].sum()
    out = np.clip(lam * r, floor, hi)
    return out / out.sum()


def exploration_quota(b: int, eps: float) -> int:
    """``round(eps * b)`` with halves rounded up."""
    return int(math.floor(eps * b + 0.5))


def apportion_budget(weights, b: int, eps: float = 0.0) -> QuotaVector:
    """Split ``b`` slots: exploration first, the rest by largest remainder.

    Remaining slots go to the largest fractional parts of ``(b - e) * w``,
    ties to the lower strategy index. Quotas plus exploration total ``b``.
    """
    if b < 1:
        raise BudgetError(f"budget must be at least 1, got {b}")
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    w = np.asarray(weights, dtype=np.float64)
    e = exploration_quota(b, eps)
    rest = b - e
    share = rest * w / w.sum()
    floors = np.floor(share + 1e-9).astype(np.int64)
    left = rest - int(floors.sum())
    order = np.argsort(-(share - floors), kind="stable")
    quotas = floors.copy()
    for i in order[:left]:
        quotas[i] += 1
    return QuotaVector(tuple(int(q) for q in quotas), e)


def anneal(config: ControllerConfig, t, T):
    """Linearly decayed ``(alpha, tau, eps)`` for round ``t`` of ``T``."""
    frac = 0.0 if T <= 1 else (t - 1) / (T - 1)
    frac = min(max(frac, 0.0), 1.0)

    def lerp(start, end):
        return start + (end - start) * frac

    return (
        lerp(config.alpha0, config.alpha_min),
        lerp(config.tau0, config.tau_min),
        lerp(config.eps0, config.eps_min),
    )


def attribute_performance(m_prev, m_curr, quotas, b):
    """Credit the round's metric change to strategies by budget share.

    ``omega_s = clip(m_prev + S * (q_s / b) * (m_curr - m_prev), 0, 1)``;
    strategies with ``q_s = 0`` are inactive and their traces stay put.
    """
    q = np.asarray(getattr(quotas, "quotas", quotas), dtype=np.float64)
    s = len(q)
    omega = np.clip(m_prev + s * (q / b) * (m_curr - m_prev), 0.0, 1.0)
    return omega, q > 0


def alternating_schedule(t, S) -> np.ndarray:
    """One-hot weights cycling through the strategies, starting at index 0 for t=1."""
    if t < 1:
        raise ValueError("rounds start at 1")
    w = np.zeros(S)
    w[(t - 1) % S] = 1.0
    return w


@dataclass
class RoundPlan:
    """Everything the controller decided for one round (for the records)."""

    psi: np.ndarray
    omega: np.ndarray
    raw: np.ndarray
    weights: np.ndarray
    quota: QuotaVector
    alpha: float
    tau: float
    eps: float
    extras: dict = field(default_factory=dict)


def plan_round(config: ControllerConfig, state: ControllerState, t, T, b) -> RoundPlan:
    """Compose prior, fusion, normalisation and apportionment for round ``t``."""
    alpha, tau, eps = anneal(config, t, T)
    psi = sinusoidal_prior(t, T, config.n_strategies)
    raw = fuse_weights(psi, state.omega, alpha, tau)
    try:
        weights = normalize_clamp(raw, config.weight_floor, config.weight_cap, config.dominance)
    except DegenerateWeightsError:
        weights = np.full(config.n_strategies, 1.0 / config.n_strategies)
    quota = apportion_budget(weights, b, eps)
    return RoundPlan(psi, state.omega.copy(), raw, weights, quota, alpha, tau, eps)


def select_round_batch(candidates, quota: QuotaVector, selectors, order, seed) -> SelectionResult:
    """Assemble one batch from per-strategy picks plus exploration.

    ``selectors`` maps strategy name to ``fn(candidates, k, taken, rng)``
    returning ``k`` distinct indices drawn from ``candidates``; ``taken`` is
    what earlier strategies already picked this round. Strategies run in
    descending quota order (ties follow ``order``), each on the candidates not
    yet taken; exploration picks run last and are uniform.
    """
    candidates = np.asarray(candidates, dtype=np.int64)
    b = quota.total
    if b > len(candidates):
        raise BudgetError(f"cannot select {b} items from {len(candidates)} candidates")
    ss = np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(s) for s in ss.spawn(len(order) + 1)]
    rank = sorted(range(len(order)), key=lambda i: (-quota.quotas[i], i))
    taken: list[int] = []
    per_strategy = {}
    for i in rank:
        k = quota.quotas[i]
        if k == 0:
            continue
        remaining = np.setdiff1d(candidates, taken, assume_unique=True)
        picked = np.asarray(
            selectors[order[i]](remaining, k, np.array(taken, dtype=np.int64), rngs[i]),
            dtype=np.int64,
        )
        if len(picked) != k or not np.all(np.isin(picked, remaining)):
            raise RuntimeError(f"selector {order[i]} returned an invalid batch")
        per_strategy[order[i]] = picked
        taken.extend(int(p) for p in picked)
    if quota.exploration:
        remaining = np.setdiff1d(candidates, taken, assume_unique=True)
        explore = rngs[-1].choice(remaining, size=quota.exploration, replace=False)
        per_strategy["exploration"] = explore
        taken.extend(int(p) for p in explore)
    return SelectionResult(np.array(taken, dtype=np.int64), "fusion", {"per_strategy": per_strategy})
