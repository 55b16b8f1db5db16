"""The active-learning loop and experiment matrix.

Per round ``t = 1..T``: pick a batch with the model trained on the current
labeled set, move it into the labeled set, retrain from scratch, evaluate on
the held-out split, then feed the metric change back to the controller. The
metric recorded for round ``t`` therefore belongs to the model trained on
``|L0| + t * b`` samples.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from wavefuse import controller as ctl
from wavefuse import learner, strategies
from wavefuse.data import PoolState, stratified_folds, stratified_init, stratified_split, update_pools
from wavefuse.errors import ConfigError
from wavefuse.stats import accuracy, f1_score

log = logging.getLogger(__name__)

SINGLE_STRATEGIES = ("random", "entropy", "margin", "bald", "badge", "coreset")
METHODS = SINGLE_STRATEGIES + ("alternating", "wavefuse")
METRICS = ("accuracy", "f1")


@dataclass(frozen=True)
class LoopConfig:
    rounds: int = 10
    budget: int = 40
    init_size: int = 40
    seeds: tuple = (0,)
    folds: int = 1
    test_fraction: float = 0.2
    mc_passes: int = 10
    metric: str = "accuracy"

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.rounds < 1:
            raise ConfigError("loop.rounds must be at least 1")
        if self.budget < 1:
            raise ConfigError("loop.budget must be at least 1")
        if self.init_size < 1:
            raise ConfigError("loop.init_size must be at least 1")
        if not self.seeds:
            raise ConfigError("loop.seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("loop.seeds contains duplicates")
        if self.folds < 1:
            raise ConfigError("loop.folds must be at least 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("loop.test_fraction must lie in (0, 1)")
        if self.mc_passes < 2:
            raise ConfigError("loop.mc_passes must be at least 2")
        if self.metric not in METRICS:
            raise ConfigError(f"loop.metric must be one of {METRICS}")

    @classmethod
    def from_dict(cls, block: dict) -> LoopConfig:
        names = {f.name for f in fields(cls)}
        for key in block:
            if key not in names:
                raise ConfigError(f"unknown loop key: {key}")
        return cls(**block)


@dataclass
class RoundRecord:
    round: int
    n_labeled: int
    strategies: tuple
    weights: np.ndarray
    quotas: tuple
    exploration: int
    selected: np.ndarray
    metrics: dict
    psi: np.ndarray | None = None
    omega: np.ndarray | None = None
    omega_observed: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


@dataclass
class RunResult:
    method: str
    seed: int
    fold: int
    initial_metrics: dict
    rounds: list
    final_labeled: np.ndarray
    initial_labeled: np.ndarray
    stopped_early: bool = False

    @property
    def final_metrics(self) -> dict:
        return self.rounds[-1].metrics if self.rounds else self.initial_metrics


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from integer parts."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def evaluate(params, dataset, test_idx) -> dict:
    preds = learner.predict_proba(params, dataset.features[test_idx]).argmax(axis=1)
    labels = dataset.labels[test_idx]
    return {
        "accuracy": accuracy(preds, labels),
        "f1": f1_score(preds, labels, dataset.n_classes),
    }


class _RoundContext:
    """Lazily computed per-round model outputs over the unlabeled pool."""

    def __init__(self, params, dataset, pool: PoolState, mc_passes, mc_seed):
        self.params = params
        self.dataset = dataset
        self.pool = pool
        self.mc_passes = mc_passes
        self.mc_seed = mc_seed
        self._cache = {}
        self.diagnostics = {}

    def _pool_features(self):
        return self.dataset.features[self.pool.unlabeled]

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def _positions(self, remaining):
        return np.searchsorted(self.pool.unlabeled, remaining)

    def probs(self):
        return self._get("probs", lambda: learner.predict_proba(self.params, self._pool_features()))

    def scores(self, name):
        if name == "entropy":
            return self._get(name, lambda: strategies.entropy_scores(self.probs()))
        if name == "margin":
            return self._get(name, lambda: strategies.margin_scores(self.probs()))
        if name == "bald":
            return self._get(name, lambda: strategies.bald_scores(
                learner.mc_dropout_predict(
                    self.params, self._pool_features(), self.mc_passes, self.mc_seed
                )
            ))
        raise KeyError(name)

    def embeddings(self, indices):
        return learner.penultimate_embeddings(self.params, self.dataset.features[indices])

    def grad_embeddings(self):
        return self._get("grad", lambda: learner.gradient_embeddings(self.params, self._pool_features()))

    def selector(self, name):
        def score_based(remaining, k, taken, rng):
            pos = self._positions(remaining)
            return strategies.top_k(self.scores(name)[pos], remaining, k, name).indices

        def badge(remaining, k, taken, rng):
            pos = self._positions(remaining)
            res = strategies.badge_select(self.grad_embeddings()[pos], k, rng)
            return remaining[res.indices]

        def coreset(remaining, k, taken, rng):
            centers = np.concatenate([self.pool.labeled, taken]).astype(np.int64)
            res = strategies.kcenter_select(
                self.embeddings(centers), self.embeddings(remaining), k
            )
            self.diagnostics["coreset_radius"] = res.diagnostics["radius"]
            return remaining[res.indices]

        def random(remaining, k, taken, rng):
            return strategies.random_select(remaining, k, rng).indices

        if name in ("entropy", "margin", "bald"):
            return score_based
        return {"badge": badge, "coreset": coreset, "random": random}[name]


def _train(dataset, labeled, train_config, seed, t):
    cfg = replace(train_config, seed=derive_seed(seed, t, 17))
    return learner.train(dataset, labeled, cfg)


def run_active_learning(
    dataset,
    split,
    method: str,
    loop_config: LoopConfig,
    seed: int,
    train_config: learner.TrainConfig | None = None,
    controller_config: ctl.ControllerConfig | None = None,
    fold: int = 0,
) -> RunResult:
    """Run one method for ``loop_config.rounds`` rounds on one split.

    Every random choice derives from ``seed``; the initial labeled set, the
    per-round training seeds and the selector streams are shared across
    methods so runs with the same seed are paired.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    train_config = train_config or learner.TrainConfig()
    cc = controller_config or ctl.ControllerConfig()
    train_idx = np.unique(np.asarray(split[0], dtype=np.int64))
    test_idx = np.unique(np.asarray(split[1], dtype=np.int64))
    if np.intersect1d(train_idx, test_idx).size:
        raise ValueError("train and test splits overlap")
    T, b = loop_config.rounds, loop_config.budget

    def check_isolation(p):
        if np.intersect1d(test_idx, p.labeled).size or np.intersect1d(test_idx, p.unlabeled).size:
            raise RuntimeError("test index leaked into the pool")

    pool = stratified_init(dataset, train_idx, loop_config.init_size, seed)
    initial_labeled = pool.labeled
    check_isolation(pool)
    params = _train(dataset, pool.labeled, train_config, seed, 0)
    metrics = evaluate(params, dataset, test_idx)
    initial_metrics = metrics

    if method == "wavefuse":
        order = cc.strategy_order
        state = ctl.ControllerState.initial(metrics[loop_config.metric], cc.n_strategies)
    elif method == "alternating":
        order = cc.strategy_order
    else:
        order = (method,)

    records = []
    stopped_early = False
    for t in range(1, T + 1):
        if len(pool.unlabeled) < b:
            log.info("%s seed %d: pool exhausted before round %d", method, seed, t)
            stopped_early = True
            break
        psi = omega = None
        extras = {}
        if method == "wavefuse":
            plan = ctl.plan_round(cc, state, t, T, b)
            weights, quota = plan.weights, plan.quota
            psi, omega = plan.psi, plan.omega
            extras.update(alpha=plan.alpha, tau=plan.tau, eps=plan.eps)
        elif method == "alternating":
            weights = ctl.alternating_schedule(t, len(order))
            quota = ctl.apportion_budget(weights, b, 0.0)
        else:
            weights = np.ones(1)
            quota = ctl.QuotaVector((b,), 0)

        ctx = _RoundContext(params, dataset, pool, loop_config.mc_passes, derive_seed(seed, t, 29))
        selectors = {name: ctx.selector(name) for name in order}
        batch = ctl.select_round_batch(
            pool.unlabeled, quota, selectors, order, derive_seed(seed, t, 31)
        )
        extras.update(ctx.diagnostics)
        pool = update_pools(pool, batch.indices)
        check_isolation(pool)

        m_prev = metrics
        params = _train(dataset, pool.labeled, train_config, seed, t)
        metrics = evaluate(params, dataset, test_idx)

        omega_obs = None
        if method == "wavefuse":
            omega_obs, active = ctl.attribute_performance(
                m_prev[loop_config.metric], metrics[loop_config.metric], quota, b
            )
            state = ctl.update_performance_trace(state, omega_obs, active, cc.beta)

        records.append(RoundRecord(
            round=t,
            n_labeled=len(pool.labeled),
            strategies=tuple(order),
            weights=np.asarray(weights, dtype=np.float64),
            quotas=tuple(quota.quotas),
            exploration=quota.exploration,
            selected=batch.indices,
            metrics=metrics,
            psi=psi,
            omega=omega,
            omega_observed=omega_obs,
            extras=extras,
        ))
    return RunResult(
        method=method,
        seed=seed,
        fold=fold,
        initial_metrics=initial_metrics,
        rounds=records,
        final_labeled=pool.labeled,
        initial_labeled=initial_labeled,
        stopped_early=stopped_early,
    )


def make_splits(dataset, loop_config: LoopConfig, seed: int):
    """Train/test splits for one seed: stratified folds, or one stratified holdout."""
    if loop_config.folds >= 2:
        return stratified_folds(dataset, loop_config.folds, derive_seed(seed, 7))
    return [stratified_split(dataset, loop_config.test_fraction, derive_seed(seed, 7))]


def _run_task(args):
    return run_active_learning(*args)


def run_experiment(
    dataset,
    methods,
    loop_config: LoopConfig,
    train_config: learner.TrainConfig | None = None,
    controller_config: ctl.ControllerConfig | None = None,
    workers: int = 1,
):
    """Every (method, seed, fold) combination; results ordered by method, seed, fold."""
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
    train_config = train_config or learner.TrainConfig()
    controller_config = controller_config or ctl.ControllerConfig()
    tasks = []
    for seed in loop_config.seeds:
        for fold, split in enumerate(make_splits(dataset, loop_config, seed)):
            for method in methods:
                tasks.append((dataset, split, method, loop_config, seed,
                              train_config, controller_config, fold))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(task) for task in tasks]
    rank = {m: i for i, m in enumerate(methods)}
    return sorted(results, key=lambda r: (rank[r.method], r.seed, r.fold))
