"""Independent reference implementations used only by the tests.

Each oracle is written for clarity rather than speed and shares no code
with the package beyond the parameter container.
"""

import itertools
import math

import numpy as np
from scipy import integrate

from wavefuse.learner import MlpParams, loss_and_grads

PARAM_NAMES = ("W1", "b1", "W2", "b2")


def brute_entropy(row):
    return -sum(p * math.log(p) for p in row if p > 0)


def brute_bald(stack):
    """Mutual information with plain loops, one sample at a time."""
    m_passes, n, k = np.shape(stack)
    out = []
    for i in range(n):
        mean = [sum(stack[m][i][c] for m in range(m_passes)) / m_passes for c in range(k)]
        member = sum(brute_entropy(stack[m][i]) for m in range(m_passes)) / m_passes
        out.append(brute_entropy(mean) - member)
    return np.array(out)


def brute_kcenter_radius(labeled, unlabeled, b):
    """Optimal covering radius over all size-b subsets of the unlabeled set."""
    best = math.inf
    for subset in itertools.combinations(range(len(unlabeled)), b):
        centers = list(labeled) + [unlabeled[j] for j in subset]
        radius = max(min(math.dist(u, c) for c in centers) for u in unlabeled)
        best = min(best, radius)
    return best


def numeric_grads(params, x, y, l2, mask, h=1e-4):
    """Central finite differences of the training loss, one coordinate at a time."""
    out = {}
    for name in PARAM_NAMES:
        base = getattr(params, name)
        g = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            vals = []
            for step in (h, -h):
                arr = base.copy()
                arr[idx] += step
                fields = {k: getattr(params, k) for k in PARAM_NAMES}
                fields[name] = arr
                p = MlpParams(**fields, dropout_p=params.dropout_p)
                vals.append(loss_and_grads(p, x, y, l2, mask)[0])
            g[idx] = (vals[0] - vals[1]) / (2 * h)
        out[name] = g
    return out


def flat(grads):
    return np.concatenate([grads[k].ravel() for k in PARAM_NAMES])


def gradient_instance(seed):
    """Random small network, batch, l2 and (for odd seeds) dropout mask."""
    rng = np.random.default_rng(seed)
    d, hidden, k, n = 3, 4, 3, 6
    p = MlpParams(rng.normal(size=(d, hidden)), rng.normal(size=hidden) * 0.1,
                  rng.normal(size=(hidden, k)), rng.normal(size=k) * 0.1)
    x = rng.normal(size=(n, d))
    y = rng.integers(0, k, size=n)
    l2 = float(rng.uniform(0, 0.1))
    mask = (rng.random((n, hidden)) < 0.7) / 0.7 if seed % 2 else None
    return p, x, y, l2, mask


def gradient_rel_error(seed):
    p, x, y, l2, mask = gradient_instance(seed)
    a = flat(loss_and_grads(p, x, y, l2, mask)[1])
    nu = flat(numeric_grads(p, x, y, l2, mask))
    return np.linalg.norm(a - nu) / max(np.linalg.norm(a), np.linalg.norm(nu))


def t_tail_by_quadrature(t, df):
    """Two-sided tail of Student's t by direct integration of the density."""
    log_c = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)

    def density(x):
        return math.exp(log_c - (df + 1) / 2 * math.log1p(x * x / df))

    tail, _ = integrate.quad(density, abs(t), math.inf, epsabs=1e-13, epsrel=1e-12)
    return 2 * tail


def random_stack(rng, m, n, k):
    logits = rng.normal(size=(m, n, k)) * 2
    e = np.exp(logits)
    return e / e.sum(-1, keepdims=True)
