"""Run configuration files (YAML or JSON)."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from wavefuse.controller import ControllerConfig
from wavefuse.data import BlobSpec, Dataset, generate_blobs, load_csv
from wavefuse.errors import ConfigError, DatasetError
from wavefuse.harness import METHODS, LoopConfig
from wavefuse.learner import TrainConfig

TOP_KEYS = {"dataset", "model", "controller", "loop", "methods", "metric", "output_dir"}
DATASET_KEYS = {"generator", "csv", "test_fraction"}
MODEL_KEYS = {f.name for f in fields(TrainConfig)} - {"seed"}


def _check_keys(block, allowed, prefix):
    if not isinstance(block, dict):
        raise ConfigError(f"{prefix or 'config'} must be a mapping")
    for key in block:
        if key not in allowed:
            name = f"{prefix}.{key}" if prefix else key
            raise ConfigError(f"unknown config key: {name}")


def read_mapping(path) -> dict:
    """Load a YAML or JSON mapping from ``path``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")
    return data


@dataclass(frozen=True)
class RunConfig:
    dataset: dict
    train: TrainConfig
    controller: ControllerConfig
    loop: LoopConfig
    methods: tuple
    output_dir: str | None
    base_dir: Path

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> RunConfig:
        _check_keys(raw, TOP_KEYS, "")
        ds = dict(raw.get("dataset") or {})
        _check_keys(ds, DATASET_KEYS, "dataset")
        if ("generator" in ds) == ("csv" in ds):
            raise ConfigError("dataset needs exactly one of 'generator' or 'csv'")
        if "generator" in ds:
            try:
                BlobSpec.from_dict(ds["generator"])
            except DatasetError as exc:
                raise ConfigError(f"dataset.generator: {exc}") from None
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"dataset.generator: {exc}") from None

        model = dict(raw.get("model") or {})
        _check_keys(model, MODEL_KEYS, "model")
        ctrl = dict(raw.get("controller") or {})
        _check_keys(ctrl, {f.name for f in fields(ControllerConfig)}, "controller")
        loop = dict(raw.get("loop") or {})
        _check_keys(loop, {f.name for f in fields(LoopConfig)} - {"metric", "test_fraction"}, "loop")
        if "test_fraction" in ds:
            loop["test_fraction"] = ds["test_fraction"]
        if "metric" in raw:
            loop["metric"] = raw["metric"]

        methods = raw.get("methods")
        if not methods or not isinstance(methods, list):
            raise ConfigError("methods must be a non-empty list")
        for m in methods:
            if m not in METHODS:
                raise ConfigError(f"methods: unknown method {m!r}")
        if len(set(methods)) != len(methods):
            raise ConfigError("methods contains duplicates")
        try:
            train = TrainConfig(**model)
            controller = ControllerConfig(**ctrl)
            loop_cfg = LoopConfig(**loop)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return cls(ds, train, controller, loop_cfg, tuple(methods),
                   raw.get("output_dir"), Path(base_dir))

    @classmethod
    def from_file(cls, path) -> RunConfig:
        path = Path(path)
        return cls.from_dict(read_mapping(path), base_dir=path.parent)

    def load_dataset(self) -> tuple[Dataset, dict]:
        """Materialise the dataset; returns it with a manifest description."""
        if "generator" in self.dataset:
            spec, seed = BlobSpec.from_dict(self.dataset["generator"])
            return generate_blobs(spec, seed), {"source": "generator", "spec": spec.to_dict(seed)}
        path = Path(self.dataset["csv"])
        if not path.is_absolute():
            path = self.base_dir / path
        ds = load_csv(path)
        return ds, {"source": "csv", "path": str(path), "label_mapping": ds.label_mapping}

    def to_dict(self) -> dict:
        """Fully resolved config (defaults filled in), suitable for a manifest."""
        train = {f.name: getattr(self.train, f.name) for f in fields(self.train)}
        train.pop("seed")
        loop = {f.name: getattr(self.loop, f.name) for f in fields(self.loop)}
        metric = loop.pop("metric")
        test_fraction = loop.pop("test_fraction")
        loop["seeds"] = list(loop["seeds"])
        dataset = {k: v for k, v in self.dataset.items() if k != "test_fraction"}
        dataset["test_fraction"] = test_fraction
        return {
            "dataset": dataset,
            "model": train,
            "controller": self.controller.to_dict(),
            "loop": loop,
            "methods": list(self.methods),
            "metric": metric,
        }
