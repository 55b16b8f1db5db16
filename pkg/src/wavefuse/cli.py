"""Command-line entry point: ``run``, ``compare`` and ``gen-dataset``.

Exit codes: 0 success, 1 run failure, 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from collections import defaultdict
from dataclasses import replace
from pathlib import Path

import numpy as np

from wavefuse import __version__, kernels
from wavefuse.config import RunConfig, read_mapping
from wavefuse.data import BlobSpec, generate_blobs, write_csv
from wavefuse.errors import (
    ComparisonError,
    ConfigError,
    DatasetError,
    DegenerateTestError,
    WaveFuseError,
)
from wavefuse.harness import run_experiment
from wavefuse.stats import aggregate_runs, paired_t_test

log = logging.getLogger("wavefuse")

OUTPUT_ENV = "WAVEFUSE_OUTPUT_DIR"
CURVES_HEADER = ["method", "seed", "fold", "round", "n_labeled", "metric", "value"]
WEIGHTS_HEADER = ["method", "seed", "fold", "round", "strategy", "psi", "omega", "weight", "quota"]
SUMMARY_HEADER = ["method", "round", "metric", "mean", "std", "n_runs"]
SIGNIFICANCE = 0.05

EXIT_OK, EXIT_RUN, EXIT_CONFIG = 0, 1, 2


def fmt(x) -> str:
    """Floats with 9 significant digits; ``None``/NaN become empty cells."""
    if x is None:
        return ""
    x = float(x)
    return "" if np.isnan(x) else format(x, ".9g")


def curve_rows(results):
    for res in sorted(results, key=lambda r: (r.method, r.seed, r.fold)):
        for rec in res.rounds:
            for metric in sorted(rec.metrics):
                yield [res.method, res.seed, res.fold, rec.round, rec.n_labeled,
                       metric, fmt(rec.metrics[metric])]


def weight_rows(results):
    for res in sorted(results, key=lambda r: (r.method, r.seed, r.fold)):
        for rec in res.rounds:
            for i, name in enumerate(rec.strategies):
                psi = rec.psi[i] if rec.psi is not None else None
                omega = rec.omega[i] if rec.omega is not None else None
                yield [res.method, res.seed, res.fold, rec.round, name,
                       fmt(psi), fmt(omega), fmt(rec.weights[i]), rec.quotas[i]]
            if rec.exploration:
                yield [res.method, res.seed, res.fold, rec.round, "exploration",
                       "", "", "", rec.exploration]


def summary_rows(results):
    for row in aggregate_runs(results):
        yield [row["method"], row["round"], row["metric"], fmt(row["mean"]),
               fmt(row["std"]), row["n_runs"]]


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _dataset_digest(dataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(dataset.features).tobytes())
    h.update(np.ascontiguousarray(dataset.labels).tobytes())
    return h.hexdigest()


def write_outputs(out_dir: Path, results, manifest: dict) -> list[Path]:
    """Write all files via temporaries; nothing is left behind on failure."""
    out_dir.mkdir(parents=True, exist_ok=True)
    targets = {
        "curves.csv": (CURVES_HEADER, curve_rows(results)),
        "weights.csv": (WEIGHTS_HEADER, weight_rows(results)),
        "summary.csv": (SUMMARY_HEADER, summary_rows(results)),
    }
    tmp_paths = []
    try:
        for name, (header, rows) in targets.items():
            tmp = out_dir / (name + ".tmp")
            tmp_paths.append(tmp)
            _write_csv(tmp, header, rows)
        tmp = out_dir / "manifest.json.tmp"
        tmp_paths.append(tmp)
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except BaseException:
        for tmp in tmp_paths:
            tmp.unlink(missing_ok=True)
        raise
    final = []
    for tmp in tmp_paths:
        dest = tmp.with_suffix("")
        os.replace(tmp, dest)
        final.append(dest)
    return final


def resolve_output_dir(cli_out, config: RunConfig) -> Path:
    if cli_out:
        return Path(cli_out)
    if config.output_dir:
        path = Path(config.output_dir)
        return path if path.is_absolute() else config.base_dir / path
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def cmd_run(args) -> int:
    try:
        config = RunConfig.from_file(args.config)
        if args.seed_override is not None:
            config = replace(config, loop=replace(config.loop, seeds=(args.seed_override,)))
        dataset, dataset_info = config.load_dataset()
    except (ConfigError, DatasetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = resolve_output_dir(args.out, config)
    try:
        results = run_experiment(
            dataset, config.methods, config.loop, config.train, config.controller,
            workers=args.workers,
        )
    except Exception as exc:  # any failed run aborts the whole matrix
        log.exception("run failed")
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    dataset_info.update(
        sha256=_dataset_digest(dataset),
        n_samples=dataset.n_samples,
        n_features=dataset.n_features,
        n_classes=dataset.n_classes,
    )
    manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "seeds": list(config.loop.seeds),
        "dataset": dataset_info,
        "kernel_backend": kernels.BACKEND,
        "runs": [
            {"method": r.method, "seed": r.seed, "fold": r.fold,
             "rounds_completed": len(r.rounds), "stopped_early": r.stopped_early}
            for r in sorted(results, key=lambda r: (r.method, r.seed, r.fold))
        ],
    }
    try:
        files = write_outputs(out_dir, results, manifest)
    except OSError as exc:
        print(f"could not write outputs: {exc}", file=sys.stderr)
        return EXIT_RUN
    for path in files:
        print(path)
    return EXIT_OK


def read_curves(path, metric, method=None):
    """``{(seed, fold): {round: value}}`` for one method and metric."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ComparisonError(f"cannot read {path}: {exc.strerror}") from None
    if rows and set(CURVES_HEADER) - set(rows[0]):
        raise ComparisonError(f"{path} is not a curves file")
    rows = [r for r in rows if r["metric"] == metric]
    methods = sorted({r["method"] for r in rows})
    if method is None:
        if len(methods) != 1:
            raise ComparisonError(
                f"{path} holds methods {methods}; pick one with --method-a/--method-b"
            )
        method = methods[0]
    out = defaultdict(dict)
    for r in rows:
        if r["method"] == method:
            out[(int(r["seed"]), int(r["fold"]))][int(r["round"])] = float(r["value"])
    if not out:
        raise ComparisonError(f"{path} has no {metric!r} rows for method {method!r}")
    return method, dict(out)


def compare_curves(a, b):
    """Per-round paired t-tests between two ``read_curves`` tables.

    Returns a list of dicts (``round, n, mean_a, mean_b, t, p``); the last
    entry is the final round.
    """
    if set(a) != set(b):
        raise ComparisonError(
            f"seed/fold sets differ: {sorted(set(a) ^ set(b))[:5]}"
        )
    keys = sorted(a)
    rounds = sorted(a[keys[0]])
    for k in keys:
        if sorted(a[k]) != rounds or sorted(b[k]) != rounds:
            raise ComparisonError(f"rounds differ for seed {k[0]} fold {k[1]}")
    report = []
    for t in rounds:
        va = np.array([a[k][t] for k in keys])
        vb = np.array([b[k][t] for k in keys])
        try:
            stat, p = paired_t_test(va, vb)
        except DegenerateTestError:
            stat, p = float("nan"), float("nan")
        report.append({"round": t, "n": len(keys), "mean_a": float(va.mean()),
                       "mean_b": float(vb.mean()), "t": stat, "p": p})
    return report


def cmd_compare(args) -> int:
    try:
        name_a, a = read_curves(args.a, args.metric, args.method_a)
        name_b, b = read_curves(args.b, args.metric, args.method_b)
        report = compare_curves(a, b)
    except ComparisonError as exc:
        print(f"comparison error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"metric: {args.metric}   A = {name_a} ({args.a})   B = {name_b} ({args.b})")
    print(f"{'round':>5} {'n':>3} {'mean_A':>10} {'mean_B':>10} {'t':>10} {'p':>10}  sig")
    for row in report:
        sig = "*" if row["p"] < SIGNIFICANCE else ""
        p = "undefined" if np.isnan(row["p"]) else f"{row['p']:.4g}"
        print(f"{row['round']:>5} {row['n']:>3} {row['mean_a']:>10.4f} "
              f"{row['mean_b']:>10.4f} {row['t']:>10.4f} {p:>10}  {sig}")
    final = report[-1]
    verdict = "significant" if final["p"] < SIGNIFICANCE else "not significant"
    print(f"final round {final['round']}: t = {final['t']:.4f}, p = {final['p']:.4g} ({verdict})")
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    try:
        spec, seed = BlobSpec.from_dict(read_mapping(args.spec))
        dataset = generate_blobs(spec, seed)
    except (ConfigError, DatasetError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(dataset, out)
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavefuse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment matrix from a config file")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", help=f"output directory (default: config, ${OUTPUT_ENV}, ./runs)")
    run.add_argument("--seed-override", type=int, help="replace the config's seed list")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="paired t-tests between two curves files")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.add_argument("--metric", default="accuracy")
    cmp_.add_argument("--method-a")
    cmp_.add_argument("--method-b")
    cmp_.set_defaults(func=cmd_compare)

    gen = sub.add_parser("gen-dataset", help="sample a blob dataset to CSV")
    gen.add_argument("spec")
    gen.add_argument("out")
    gen.set_defaults(func=cmd_gen_dataset)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.func(args)
    except WaveFuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
