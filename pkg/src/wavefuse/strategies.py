"""Acquisition scores and batch selectors.

Score functions return one value per row (higher means more worth labeling).
Selectors return a :class:`SelectionResult`; the geometric selectors
(:func:`kcenter_select`, :func:`kmeanspp_select`, :func:`badge_select`) report
positions into the embedding matrix they were given, while
:func:`random_select` and :func:`top_k` report values drawn from the candidate
index list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from wavefuse import kernels
from wavefuse.errors import BudgetError

BALD_CLAMP = 1e-9

# canonical fusion order; fixes phase assignment and tie-breaking
CANONICAL_ORDER = ("bald", "badge", "entropy", "coreset")


@dataclass(frozen=True)
class SelectionResult:
    indices: np.ndarray
    strategy: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if len(np.unique(idx)) != len(idx):
            raise ValueError(f"{self.strategy} selection contains duplicates")
        object.__setattr__(self, "indices", idx)


def _check_budget(b, n):
    if b < 0 or b > n:
        raise BudgetError(f"cannot select {b} items from {n} candidates")


def _entropy(probs: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    logs = np.log(p, out=np.zeros_like(p), where=p > 0)
    return -(p * logs).sum(axis=-1)


def entropy_scores(probs) -> np.ndarray:
    """Predictive entropy per row in nats (``0 log 0 = 0``)."""
    return _entropy(probs)


def margin_scores(probs) -> np.ndarray:
    """Negative gap between the two largest probabilities."""
    p = np.asarray(probs, dtype=np.float64)
    if p.shape[-1] < 2:
        raise ValueError("margin needs at least two classes")
    top2 = np.partition(p, -2, axis=-1)[..., -2:]
    return -(top2[..., 1] - top2[..., 0])


def bald_scores(stack) -> np.ndarray:
    """Mutual information between prediction and dropout mask.

    ``stack`` has shape ``(M, n, K)``. Floating-point negatives down to
    ``-1e-9`` are clamped to zero, and samples whose passes agree exactly
    score exactly zero.
    """
    s = np.asarray(stack, dtype=np.float64)
    mi = _entropy(s.mean(axis=0)) - _entropy(s).mean(axis=0)
    mi[(mi < 0) & (mi >= -BALD_CLAMP)] = 0.0
    mi[np.all(s == s[:1], axis=(0, 2))] = 0.0
    return mi


def bald_pixelwise(stack) -> float:
    """Spatial mean of per-pixel BALD for one image, ``stack`` shaped ``(M, U, K)``.

    Trailing spatial axes are accepted and flattened, e.g. ``(M, H, W, K)``.
    """
    s = np.asarray(stack, dtype=np.float64)
    s = s.reshape(s.shape[0], -1, s.shape[-1])
    if s.shape[1] < 1:
        raise ValueError("image has no pixels")
    return float(bald_scores(s).mean())


def covering_radius(unlabeled_emb, centers_emb) -> float:
    """Largest distance from an unlabeled point to its nearest center."""
    u = np.ascontiguousarray(unlabeled_emb, dtype=np.float64)
    if len(u) == 0:
        return 0.0
    c = np.ascontiguousarray(centers_emb, dtype=np.float64).reshape(-1, u.shape[1])
    return float(np.sqrt(kernels.min_sq_dists(u, c).max()))


def kcenter_select(labeled_emb, unlabeled_emb, b: int) -> SelectionResult:
    """Greedy farthest-first k-center selection.

    Repeatedly picks the unlabeled point farthest from its nearest center in
    the labeled set plus the points already picked. With no labeled points the
    first pick is position 0. ``diagnostics["radius"]`` is the covering radius
    of the unlabeled set after selection.
    """
    u = np.ascontiguousarray(unlabeled_emb, dtype=np.float64)
    n = len(u)
    _check_budget(b, n)
    labeled = np.ascontiguousarray(labeled_emb, dtype=np.float64).reshape(-1, u.shape[1])
    mind = kernels.min_sq_dists(u, labeled)
    picks = kernels.farthest_first(u, mind, b)
    radius = float(np.sqrt(mind.max())) if n else 0.0
    return SelectionResult(picks, "coreset", {"radius": radius})


def kmeanspp_select(embeddings, b: int, seed, strategy: str = "kmeans++") -> SelectionResult:
    """k-means++ D^2 seeding used as a batch selector.

    The first center is uniform; each further center is drawn with probability
    proportional to its squared distance to the nearest chosen center. Once all
    remaining mass is zero (duplicates), the rest is filled uniformly at random
    from the unchosen points.
    """
    x = np.ascontiguousarray(embeddings, dtype=np.float64)
    n = len(x)
    _check_budget(b, n)
    rng = np.random.default_rng(seed)
    picks = []
    chosen = np.zeros(n, dtype=bool)
    if b == 0:
        return SelectionResult(np.empty(0, dtype=np.int64), strategy, {"fallback": 0})
    first = int(rng.integers(n))
    picks.append(first)
    chosen[first] = True
    mind = np.full(n, np.inf)
    kernels.update_min_sq_dists(x, first, mind)
    fallback = 0
    while len(picks) < b:
        weights = np.where(chosen, 0.0, mind)
        cum = np.cumsum(weights)
        total = cum[-1]
        if not total > 0:
            rest = rng.permutation(np.flatnonzero(~chosen))[: b - len(picks)]
            fallback = len(rest)
            picks.extend(int(i) for i in rest)
            break
        u = rng.random() * total
        nxt = int(np.searchsorted(cum, u, side="right"))
        if nxt >= n or weights[nxt] == 0.0:
            nxt = int(np.flatnonzero(weights > 0)[-1])
        picks.append(nxt)
        chosen[nxt] = True
        kernels.update_min_sq_dists(x, nxt, mind)
    return SelectionResult(np.array(picks), strategy, {"fallback": fallback})


def badge_select(grad_embs, b: int, seed) -> SelectionResult:
    """BADGE: k-means++ seeding over gradient (or pooled) embeddings."""
    return kmeanspp_select(grad_embs, b, seed, strategy="badge")


def random_select(pool, b: int, seed) -> SelectionResult:
    """Uniform sample without replacement from ``pool`` (a PoolState or index array)."""
    candidates = np.asarray(getattr(pool, "unlabeled", pool), dtype=np.int64)
    _check_budget(b, len(candidates))
    rng = np.random.default_rng(seed)
    return SelectionResult(rng.choice(candidates, size=b, replace=False), "random")


def top_k(scores, candidates, k: int, strategy: str = "top_k") -> SelectionResult:
    """The ``k`` highest-scoring candidates; ties go to the lower candidate index."""
    scores = np.asarray(scores, dtype=np.float64)
    candidates = np.asarray(candidates, dtype=np.int64)
    if scores.shape != candidates.shape:
        raise ValueError("scores and candidates must align")
    _check_budget(k, len(candidates))
    order = np.lexsort((candidates, -scores))
    return SelectionResult(candidates[order[:k]], strategy)
