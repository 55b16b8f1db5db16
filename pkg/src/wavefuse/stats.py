"""Evaluation metrics, paired t-test and multi-run aggregation."""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from wavefuse.errors import (
    AggregationError,
    DegenerateTestError,
    SampleSizeError,
    ShapeError,
)

CF_TOL = 1e-10
CF_MAX_ITER = 500
_TINY = 1e-300


def _paired(preds, labels):
    p = np.asarray(preds).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if p.shape != y.shape:
        raise ShapeError(f"length mismatch: {p.size} predictions vs {y.size} labels")
    if p.size < 1:
        raise ShapeError("need at least one prediction")
    return p, y


def accuracy(preds, labels) -> float:
    p, y = _paired(preds, labels)
    return float(np.mean(p == y))


def per_class_f1(preds, labels, n_classes) -> np.ndarray:
    """F1 for each class; a class absent from both predictions and labels scores 0."""
    p, y = _paired(preds, labels)
    out = np.zeros(n_classes)
    for c in range(n_classes):
        tp = np.sum((p == c) & (y == c))
        denom = np.sum(p == c) + np.sum(y == c)
        out[c] = 2.0 * tp / denom if denom else 0.0
    return out


def macro_f1(preds, labels, n_classes) -> float:
    """Unweighted mean of per-class F1."""
    return float(per_class_f1(preds, labels, n_classes).mean())


def f1_score(preds, labels, n_classes) -> float:
    """Positive-class (label 1) F1 for binary tasks, macro F1 otherwise."""
    if n_classes == 2:
        return float(per_class_f1(preds, labels, 2)[1])
    return macro_f1(preds, labels, n_classes)


def _masks(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a.astype(bool), b.astype(bool)


def dice(mask_a, mask_b) -> float:
    """``2|A & B| / (|A| + |B|)``; two empty masks score 1."""
    a, b = _masks(mask_a, mask_b)
    denom = a.sum() + b.sum()
    return 1.0 if denom == 0 else float(2.0 * np.sum(a & b) / denom)


def iou(mask_a, mask_b) -> float:
    """``|A & B| / |A | B|``; two empty masks score 1."""
    a, b = _masks(mask_a, mask_b)
    union = np.sum(a | b)
    return 1.0 if union == 0 else float(np.sum(a & b) / union)


def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _TINY if abs(d) < _TINY else d
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc_regularized(a, b, x) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return float(x)
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t, df) -> float:
    """Two-sided tail probability ``P(|T| >= |t|)`` for Student's t."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0:
        return 1.0
    if math.isinf(t):
        return 0.0
    return betainc_regularized(0.5 * df, 0.5, df / (df + t * t))


def paired_t_test(a, b):
    """Paired t-test on ``a - b``; returns ``(t, two-sided p)`` with ``n - 1`` df."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError("paired samples must have equal length")
    n = a.size
    if n < 2:
        raise SampleSizeError(f"paired t-test needs at least 2 pairs, got {n}")
    d = a - b
    mean = d.mean()
    if mean == 0.0:
        return 0.0, 1.0
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise DegenerateTestError("differences are constant and nonzero; t is undefined")
    t = mean / (sd / math.sqrt(n))
    return float(t), t_sf_two_sided(t, n - 1)


def aggregate_runs(results):
    """Mean and sample std per (method, round, metric) over runs.

    Returns a list of dicts with keys ``method, round, metric, mean, std,
    n_runs, single_run``, sorted by method, round and metric. Every run of a
    method must cover the same rounds.
    """
    by_method = defaultdict(list)
    for res in results:
        by_method[res.method].append(res)
    rows = []
    for method in sorted(by_method):
        runs = by_method[method]
        rounds = [tuple(r.round for r in res.rounds) for res in runs]
        if len(set(rounds)) != 1:
            raise AggregationError(f"runs of {method} cover different rounds")
        for i, t in enumerate(rounds[0]):
            metric_names = sorted(runs[0].rounds[i].metrics)
            for name in metric_names:
                try:
                    values = [float(res.rounds[i].metrics[name]) for res in runs]
                except KeyError:
                    raise AggregationError(
                        f"metric {name} missing from some {method} runs"
                    ) from None
                n = len(values)
                # fsum keeps the result independent of run order
                if min(values) == max(values):
                    mean, var = values[0], 0.0  # avoid fsum(v)/n rounding noise
                else:
                    mean = math.fsum(values) / n
                    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
                rows.append({
                    "method": method,
                    "round": t,
                    "metric": name,
                    "mean": mean,
                    "std": math.sqrt(var),
                    "n_runs": n,
                    "single_run": n == 1,
                })
    return rows
