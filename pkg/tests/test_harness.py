import dataclasses
import pickle

import numpy as np
import pytest

from wavefuse import harness
from wavefuse.controller import ControllerConfig, sinusoidal_prior
from wavefuse.data import PoolState, stratified_split, update_pools
from wavefuse.errors import ConfigError
from wavefuse.harness import (
    METHODS,
    LoopConfig,
    derive_seed,
    evaluate,
    make_splits,
    run_active_learning,
    run_experiment,
)
from wavefuse.learner import TrainConfig

def canonical(obj):
    """Nested plain-Python view of a result, for equality checks."""
    if dataclasses.is_dataclass(obj):
        return {f.name: canonical(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return (obj.dtype.str, obj.shape, obj.tobytes())
    if isinstance(obj, dict):
        return {k: canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    return obj


FAST = TrainConfig(epochs=15, hidden_dim=16)
LOOP = LoopConfig(rounds=3, budget=10, init_size=15, mc_passes=4)


@pytest.fixture(scope="module")
def split(five_class):
    return stratified_split(five_class, 0.2, seed=0)


@pytest.fixture(scope="module")
def runs(five_class, split):
    return {m: run_active_learning(five_class, split, m, LOOP, seed=4, train_config=FAST) for m in METHODS}


class TestLoopConfig:
    @pytest.mark.parametrize("kw", [
        {"rounds": 0}, {"budget": 0}, {"init_size": 0}, {"seeds": ()}, {"seeds": (1, 1)},
        {"folds": 0}, {"test_fraction": 1.0}, {"mc_passes": 1}, {"metric": "auc"},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            LoopConfig(**kw)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="roudns"):
            LoopConfig.from_dict({"roudns": 3})


class TestRun:
    def test_random_takes_whole_split(self, five_class, split):
        n_unlabeled = len(split[0]) - 15
        loop = LoopConfig(rounds=1, budget=n_unlabeled, init_size=15, mc_passes=4)
        res = run_active_learning(five_class, split, "random", loop, seed=0, train_config=FAST)
        np.testing.assert_array_equal(res.final_labeled, np.sort(split[0]))

    @pytest.mark.parametrize("method", METHODS)
    def test_deterministic(self, five_class, split, runs, method):
        again = run_active_learning(five_class, split, method, LOOP, seed=4, train_config=FAST)
        assert pickle.dumps(again) == pickle.dumps(runs[method])

    @pytest.mark.parametrize("method", METHODS)
    def test_invariants(self, split, runs, method):
        res = runs[method]
        test_idx = set(split[1].tolist())
        assert [r.round for r in res.rounds] == [1, 2, 3]
        assert not test_idx & set(res.final_labeled.tolist())
        labeled = PoolState(res.initial_labeled, np.setdiff1d(split[0], res.initial_labeled))
        for k, rec in enumerate(res.rounds, start=1):
            assert rec.n_labeled == 15 + k * 10
            assert len(rec.selected) == 10
            assert not test_idx & set(rec.selected.tolist())
            assert sum(rec.quotas) + rec.exploration == 10
            labeled = update_pools(labeled, rec.selected)
        np.testing.assert_array_equal(labeled.labeled, res.final_labeled)

    def test_paired_initial_sets(self, runs):
        base = runs["random"].initial_labeled
        for res in runs.values():
            np.testing.assert_array_equal(res.initial_labeled, base)
            assert res.initial_metrics == runs["random"].initial_metrics

    def test_metric_belongs_to_retrained_model(self, five_class, split, runs):
        res = runs["entropy"]
        params = harness._train(five_class, res.final_labeled, FAST, 4, LOOP.rounds)
        assert evaluate(params, five_class, split[1]) == res.rounds[-1].metrics

    def test_wavefuse_records(self, runs):
        for rec in runs["wavefuse"].rounds:
            assert rec.weights.sum() == pytest.approx(1.0, abs=1e-9)
            assert rec.strategies == ("bald", "badge", "entropy", "coreset")
            assert rec.psi is not None and rec.omega_observed is not None
            assert "coreset_radius" in rec.extras

    def test_alternating_cycles(self, runs):
        for rec in runs["alternating"].rounds:
            hot = (rec.round - 1) % 4
            assert rec.quotas[hot] == 10 and sum(rec.quotas) == 10

    def test_pure_cycling(self, five_class, split):
        cc = ControllerConfig(alpha0=1.0, alpha_min=1.0, eps0=0.0, eps_min=0.0, weight_floor=0.0)
        loop = LoopConfig(rounds=4, budget=8, init_size=15, mc_passes=3)
        res = run_active_learning(five_class, split, "wavefuse", loop, 1, FAST, cc)
        for rec in res.rounds:
            psi = sinusoidal_prior(rec.round, 4, 4)
            np.testing.assert_allclose(rec.weights, psi / psi.sum(), atol=1e-12)
            assert rec.exploration == 0

    def test_early_stop(self, five_class, split):
        loop = LoopConfig(rounds=50, budget=100, init_size=15, mc_passes=3)
        res = run_active_learning(five_class, split, "margin", loop, 0, FAST)
        assert res.stopped_early
        assert len(res.rounds) == (len(split[0]) - 15) // 100
        assert [r.round for r in res.rounds] == list(range(1, len(res.rounds) + 1))

    def test_unknown_method(self, five_class, split):
        with pytest.raises(ConfigError):
            run_active_learning(five_class, split, "bogus", LOOP, 0, FAST)

    def test_overlapping_split(self, five_class):
        with pytest.raises(ValueError):
            run_active_learning(five_class, (np.arange(100), np.arange(90, 120)), "random", LOOP, 0, FAST)


class TestExperiment:
    def test_order_and_workers(self, five_class):
        loop = LoopConfig(rounds=2, budget=5, init_size=10, seeds=(1, 0), mc_passes=3)
        methods = ("wavefuse", "random")
        serial = run_experiment(five_class, methods, loop, FAST)
        assert [(r.method, r.seed) for r in serial] == [
            ("wavefuse", 0), ("wavefuse", 1), ("random", 0), ("random", 1)]
        parallel = run_experiment(five_class, methods, loop, FAST, workers=2)
        assert canonical(parallel) == canonical(serial)

    def test_folds(self, five_class):
        loop = LoopConfig(rounds=1, budget=5, init_size=10, folds=3, mc_passes=3)
        splits = make_splits(five_class, loop, 0)
        assert len(splits) == 3
        tests = np.concatenate([s[1] for s in splits])
        assert sorted(tests.tolist()) == list(range(five_class.n_samples))
        res = run_experiment(five_class, ["random"], loop, FAST)
        assert [r.fold for r in res] == [0, 1, 2]

    def test_unknown_method(self, five_class):
        with pytest.raises(ConfigError):
            run_experiment(five_class, ["nope"], LOOP, FAST)


def test_derive_seed():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert 0 <= derive_seed(5) < 2**32
