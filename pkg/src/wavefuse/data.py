"""Datasets, splits, pool bookkeeping and synthetic/CSV data sources."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wavefuse.errors import (
    CSVParseError,
    DatasetError,
    DuplicateSelectionError,
    MissingClassError,
    StaleSelectionError,
    StratificationError,
)


def _frozen(arr, dtype):
    arr = np.array(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with integer labels in ``0..n_classes-1``.

    ``label_mapping`` records original CSV labels (as strings) against their
    contiguous codes; it is empty for generated data.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    masks: np.ndarray | None = None
    label_mapping: dict = field(default_factory=dict)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {features.shape}")
        n, d = features.shape
        if n < 1:
            raise DatasetError("dataset must contain at least one sample")
        if d < 1:
            raise DatasetError("dataset must have at least one feature")
        if labels.shape != (n,):
            raise DatasetError(f"expected {n} labels, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise DatasetError("labels must be integers")
        if self.n_classes < 2:
            raise DatasetError(f"need at least 2 classes, got {self.n_classes}")
        if labels.min() < 0 or labels.max() >= self.n_classes:
            raise DatasetError(f"labels must lie in 0..{self.n_classes - 1}")
        if not np.all(np.isfinite(features)):
            raise DatasetError("features contain non-finite values")
        object.__setattr__(self, "features", _frozen(features, np.float64))
        object.__setattr__(self, "labels", _frozen(labels, np.int64))
        if self.masks is not None:
            masks = np.asarray(self.masks)
            if masks.ndim != 3 or masks.shape[0] != n:
                raise DatasetError("masks must have shape (N, H, W)")
            object.__setattr__(self, "masks", _frozen(masks != 0, bool))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PoolState:
    """Disjoint labeled/unlabeled index sets over the training split."""

    labeled: np.ndarray
    unlabeled: np.ndarray
    round: int = 0

    def __post_init__(self):
        labeled = np.unique(np.asarray(self.labeled, dtype=np.int64))
        unlabeled = np.unique(np.asarray(self.unlabeled, dtype=np.int64))
        if len(labeled) != len(self.labeled) or len(unlabeled) != len(self.unlabeled):
            raise DuplicateSelectionError("pool index sets contain duplicates")
        if np.intersect1d(labeled, unlabeled).size:
            raise StaleSelectionError("labeled and unlabeled sets overlap")
        if self.round < 0:
            raise ValueError("round must be non-negative")
        object.__setattr__(self, "labeled", _frozen(labeled, np.int64))
        object.__setattr__(self, "unlabeled", _frozen(unlabeled, np.int64))

    @property
    def train_indices(self) -> np.ndarray:
        return np.union1d(self.labeled, self.unlabeled)


@dataclass(frozen=True)
class BlobSpec:
    """Per-class isotropic Gaussian blobs."""

    centers: np.ndarray
    stds: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        stds = np.asarray(self.stds, dtype=np.float64).reshape(-1)
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        k = centers.shape[0]
        if k < 2:
            raise DatasetError("a blob spec needs at least 2 classes")
        if stds.shape != (k,) or counts.shape != (k,):
            raise DatasetError("centers, stds and counts must describe the same classes")
        if np.any(stds < 0) or not np.all(np.isfinite(stds)):
            raise DatasetError("blob stdevs must be finite and non-negative")
        if np.any(counts < 1):
            raise DatasetError("every class needs at least one sample")
        if not np.all(np.isfinite(centers)):
            raise DatasetError("blob centers must be finite")
        object.__setattr__(self, "centers", _frozen(centers, np.float64))
        object.__setattr__(self, "stds", _frozen(stds, np.float64))
        object.__setattr__(self, "counts", _frozen(counts, np.int64))

    @classmethod
    def from_fractions(cls, fractions, n_samples, n_features, separation=3.0,
                       std=1.0, seed=0):
        """Random class centers with class sizes apportioned from ``fractions``.

        Centers are drawn from ``N(0, separation^2 I)`` using ``seed``.
        """
        fractions = np.asarray(fractions, dtype=np.float64)
        if np.any(fractions <= 0):
            raise DatasetError("class fractions must be positive")
        counts = largest_remainder(fractions / fractions.sum(), n_samples, minimum=1)
        rng = np.random.default_rng(seed)
        centers = rng.normal(0.0, separation, size=(len(fractions), n_features))
        return cls(centers, np.full(len(fractions), float(std)), counts)

    @classmethod
    def from_dict(cls, block: dict) -> tuple[BlobSpec, int]:
        """Parse a generator block; returns the spec and its sampling seed."""
        block = dict(block)
        seed = int(block.pop("seed", 0))
        if "classes" in block:
            classes = block.pop("classes")
            if block:
                raise DatasetError(f"unknown generator key: {sorted(block)[0]}")
            try:
                spec = cls(
                    [c["center"] for c in classes],
                    [c["std"] for c in classes],
                    [c["count"] for c in classes],
                )
            except KeyError as exc:
                raise DatasetError(f"class entry missing key {exc}") from None
            return spec, seed
        allowed = {"fractions", "n_samples", "n_features", "separation", "std", "center_seed"}
        unknown = set(block) - allowed
        if unknown:
            raise DatasetError(f"unknown generator key: {sorted(unknown)[0]}")
        try:
            spec = cls.from_fractions(
                block["fractions"],
                int(block["n_samples"]),
                int(block["n_features"]),
                separation=float(block.get("separation", 3.0)),
                std=float(block.get("std", 1.0)),
                seed=int(block.get("center_seed", seed)),
            )
        except KeyError as exc:
            raise DatasetError(f"generator block missing key {exc}") from None
        return spec, seed

    def to_dict(self, seed: int) -> dict:
        return {
            "seed": seed,
            "classes": [
                {"center": c.tolist(), "std": float(s), "count": int(n)}
                for c, s, n in zip(self.centers, self.stds, self.counts)
            ],
        }


def largest_remainder(weights, total, minimum=0):
    """Apportion ``total`` units proportionally to ``weights``.

    Floors first, then leftover units to the largest fractional parts with
    ties going to the lower index. With ``minimum`` > 0, entries whose share
    falls below it are pinned there and the rest is re-apportioned.
    """
    weights = np.asarray(weights, dtype=np.float64)
    k = len(weights)
    if minimum * k > total:
        raise StratificationError(
            f"cannot give {k} groups at least {minimum} of {total} units"
        )
    pinned = np.zeros(k, dtype=bool)
    while True:
        free = ~pinned
        remaining = total - minimum * int(pinned.sum())
        counts = np.full(k, minimum, dtype=np.int64)
        share = np.zeros(k)
        wsum = weights[free].sum()
        if wsum > 0:
            share[free] = remaining * weights[free] / wsum
        else:
            share[free] = remaining / free.sum()
        floors = np.floor(share + 1e-9).astype(np.int64)
        counts[free] = floors[free]
        left = remaining - int(counts[free].sum())
        frac = np.where(free, share - floors, -np.inf)
        # stable sort on -frac keeps lower indices first among ties
        order = np.argsort(-frac, kind="stable")
        for i in order[:left]:
            counts[i] += 1
        short = free & (counts < minimum)
        if not short.any():
            return counts
        pinned |= short


def stratified_init(dataset: Dataset, train_indices, n0: int, seed) -> PoolState:
    """Draw an initial labeled set whose class mix follows the training split."""
    train_indices = np.unique(np.asarray(train_indices, dtype=np.int64))
    k = dataset.n_classes
    if n0 > len(train_indices):
        raise StratificationError(
            f"initial size {n0} exceeds training split of {len(train_indices)}"
        )
    if n0 < k:
        raise StratificationError(f"initial size {n0} is smaller than class count {k}")
    train_labels = dataset.labels[train_indices]
    freqs = np.bincount(train_labels, minlength=k)
    missing = np.flatnonzero(freqs == 0)
    if missing.size:
        raise MissingClassError(f"class {int(missing[0])} absent from training split")
    quotas = largest_remainder(freqs, n0, minimum=1)
    rng = np.random.default_rng(seed)
    picked = []
    for c in range(k):
        members = train_indices[train_labels == c]
        picked.append(rng.choice(members, size=int(quotas[c]), replace=False))
    labeled = np.sort(np.concatenate(picked))
    return PoolState(labeled, np.setdiff1d(train_indices, labeled), 0)


def update_pools(pool: PoolState, batch_indices) -> PoolState:
    """Move ``batch_indices`` from the unlabeled to the labeled set."""
    batch = np.asarray(batch_indices, dtype=np.int64).reshape(-1)
    uniq, counts = np.unique(batch, return_counts=True)
    if np.any(counts > 1):
        raise DuplicateSelectionError(f"index {int(uniq[counts > 1][0])} selected twice")
    stale = np.setdiff1d(uniq, pool.unlabeled)
    if stale.size:
        raise StaleSelectionError(f"index {int(stale[0])} is not in the unlabeled pool")
    return PoolState(
        np.union1d(pool.labeled, uniq),
        np.setdiff1d(pool.unlabeled, uniq),
        pool.round + 1,
    )


def generate_blobs(spec: BlobSpec, seed) -> Dataset:
    """Sample a dataset from ``spec``; rows are grouped by class."""
    rng = np.random.default_rng(seed)
    d = spec.centers.shape[1]
    blocks = []
    for center, std, count in zip(spec.centers, spec.stds, spec.counts):
        noise = rng.standard_normal((int(count), d))
        blocks.append(center + std * noise)
    labels = np.repeat(np.arange(len(spec.counts)), spec.counts)
    return Dataset(np.vstack(blocks), labels, len(spec.counts))


def _label_key(value: str):
    try:
        return (0, float(value), value)
    except ValueError:
        return (1, 0.0, value)


def load_csv(path) -> Dataset:
    """Read a ``f0,...,f{d-1},label`` file.

    Labels are remapped to contiguous codes in sorted order (numerically when
    they parse as numbers); the mapping is kept on ``Dataset.label_mapping``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CSVParseError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if not header or header[-1] != "label":
            raise CSVParseError(f"{path}: missing label column in header")
        d = len(header) - 1
        if d < 1:
            raise CSVParseError(f"{path}: no feature columns")
        rows, raw_labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != d + 1:
                raise CSVParseError(
                    f"{path}: row {line_no} has {len(row)} fields, expected {d + 1}"
                )
            try:
                rows.append([float(cell) for cell in row[:d]])
            except ValueError:
                raise CSVParseError(f"{path}: non-numeric feature in row {line_no}") from None
            label = row[d].strip()
            if not label:
                raise CSVParseError(f"{path}: empty label in row {line_no}")
            raw_labels.append(label)
    if not rows:
        raise DatasetError(f"{path}: no samples (N must be at least 1)")
    features = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(features)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(features), axis=1))[0]) + 2
        raise CSVParseError(f"{path}: non-finite feature in row {bad}")
    originals = sorted(set(raw_labels), key=_label_key)
    mapping = {orig: code for code, orig in enumerate(originals)}
    labels = np.array([mapping[lab] for lab in raw_labels], dtype=np.int64)
    return Dataset(features, labels, len(originals), label_mapping=mapping)


def write_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` in the loader's schema with round-trip float repr."""
    path = Path(path)
    d = dataset.n_features
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{j}" for j in range(d)] + ["label"])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def stratified_folds(dataset: Dataset, k_folds: int, seed):
    """Split all indices into ``k_folds`` class-balanced folds.

    Returns a list of ``(train_indices, test_indices)`` pairs.
    """
    if k_folds < 2:
        raise StratificationError("need at least 2 folds")
    counts = np.bincount(dataset.labels, minlength=dataset.n_classes)
    if np.any(counts < k_folds):
        c = int(np.flatnonzero(counts < k_folds)[0])
        raise StratificationError(
            f"class {c} has {int(counts[c])} samples, fewer than {k_folds} folds"
        )
    rng = np.random.default_rng(seed)
    fold_of = np.empty(dataset.n_samples, dtype=np.int64)
    offset = 0
    for c in range(dataset.n_classes):
        members = rng.permutation(np.flatnonzero(dataset.labels == c))
        # rotating the start fold keeps fold sizes within one of each other
        fold_of[members] = (offset + np.arange(len(members))) % k_folds
        offset = (offset + len(members)) % k_folds
    all_idx = np.arange(dataset.n_samples)
    return [
        (all_idx[fold_of != f], all_idx[fold_of == f]) for f in range(k_folds)
    ]


def stratified_split(dataset: Dataset, test_fraction: float, seed):
    """Single stratified train/test split; every class keeps a training sample."""
    if not 0.0 < test_fraction < 1.0:
        raise StratificationError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in range(dataset.n_classes):
        members = rng.permutation(np.flatnonzero(dataset.labels == c))
        if members.size == 0:
            continue
        n_test = min(int(math.floor(test_fraction * len(members) + 0.5)), len(members) - 1)
        test.append(members[:n_test])
        train.append(members[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))
