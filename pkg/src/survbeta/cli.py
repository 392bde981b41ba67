"""Command-line harness: fit/predict plus sweep, benchmark and compare tables.

Every command reads an optional JSON config plus flag overrides (flags
win), writes comma-separated tables with a header row, echoes the
resolved config into a ``.meta.json`` sidecar per artifact, and renders a
matplotlib figure next to each table unless ``--no-figures`` is given.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import plotting
from .core import Dataset, concordance_index, paired_t_test
from .data import (
    CsvSchema,
    FeatureSpec,
    SplitSpec,
    generate_synthetic,
    load_csv,
    preset_config,
    split,
)
from .ensemble import load_model, save_model
from .errors import (
    ConfigError,
    DegenerateDataError,
    DegenerateSplitError,
    InvalidInputError,
    RowParseError,
    SchemaError,
    SolverFailure,
)
from .training import FitConfig, fit_survbeta

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

SWEEP_AXES = ("estimators", "cluster_points", "cluster_distance", "k_shape", "subsample_size")
_INT_AXES = {"estimators", "cluster_points"}

DEFAULT_VARIANTS = ("beran-single", "survbeta-noopt", "survbeta-opt")

#: Harness-level fit defaults chosen for desk-scale runtimes; any field can
#: be overridden through the config's "fit" block.
CLI_FIT_DEFAULTS = {"pair_budget": 2000, "subgradient_iterations": 600}


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config document must be a JSON object")
    return cfg


def _fit_config(cfg: dict, variant: str, seed: int) -> FitConfig:
    overrides = dict(CLI_FIT_DEFAULTS)
    overrides.update(cfg.get("fit", {}))
    known = {f.name for f in dataclasses.fields(FitConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown fit config keys: {sorted(unknown)}")
    overrides.pop("variant", None)
    overrides.pop("seed", None)
    for key in ("tau_grid", "w_grid", "eps_grid"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    fit_cfg = FitConfig(variant=variant, seed=seed, **overrides)
    fit_cfg.validate()
    return fit_cfg


def _dataset_block(cfg: dict, args) -> dict:
    block = dict(cfg.get("dataset", {}))
    if getattr(args, "csv", None):
        block = {"csv": args.csv}
        if getattr(args, "time_col", None):
            block["time_col"] = args.time_col
        if getattr(args, "event_col", None):
            block["event_col"] = args.event_col
        if getattr(args, "categorical", None):
            block["categorical"] = [c for c in args.categorical.split(",") if c]
    if not block:
        block = {"preset": "two-cluster"}
    return block


def _schema_from_block(block: dict) -> CsvSchema:
    time_col = block.get("time_col", "time")
    event_col = block.get("event_col", "event")
    feature_cols = block.get("feature_cols")
    return CsvSchema(
        time_col=time_col,
        event_col=event_col,
        feature_cols=tuple(feature_cols) if feature_cols else None,
        categorical=frozenset(block.get("categorical", ())),
    )


def _resolve_dataset(block: dict, seed: int):
    """Materialize a dataset block; returns (dataset, feature_encoding, name)."""
    if "csv" in block:
        result = load_csv(block["csv"], _schema_from_block(block))
        name = block.get("name") or Path(block["csv"]).stem
        return result.dataset, result.encoding, name
    preset = block.get("preset", "two-cluster")
    overrides = {
        k: block[k]
        for k in ("dim", "n_per_cluster", "c", "k_shape", "censor_prob", "shift")
        if k in block
    }
    ds = generate_synthetic(preset_config(preset, seed=seed, **overrides))
    encoding = tuple(FeatureSpec(f"x{i}", None) for i in range(ds.dim))
    return ds, encoding, block.get("name", preset)


def _variant_list(cfg: dict, args, default=DEFAULT_VARIANTS) -> list[str]:
    raw = getattr(args, "variant", None)
    if raw:
        variants = [v for v in raw.split(",") if v]
    else:
        variants = list(cfg.get("variants", []) or ([cfg["variant"]] if "variant" in cfg else []))
    if not variants:
        variants = list(default)
    for v in variants:
        if v not in FitConfig.VARIANTS:
            raise ConfigError(f"unknown variant {v!r}; expected one of {FitConfig.VARIANTS}")
    return variants


def _task_seeds(master: int, task_index: int, count: int = 3) -> list[int]:
    state = np.random.SeedSequence([int(master), int(task_index)]).generate_state(count)
    return [int(s) for s in state]


def _run_tasks(tasks, worker, jobs: int):
    """Evaluate tasks, possibly in a thread pool; results keep task order."""
    if jobs <= 1:
        return [worker(i, t) for i, t in enumerate(tasks)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(worker, i, t) for i, t in enumerate(tasks)]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# artifact writing


def _ensure_outdir(args) -> Path:
    out = Path(getattr(args, "out", None) or "survbeta-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_table(path: Path, header, rows, meta: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    out = _ensure_outdir(args)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    variants = _variant_list(cfg, args, default=("survbeta-opt",))
    if len(variants) != 1:
        raise ConfigError("fit takes exactly one variant")
    block = _dataset_block(cfg, args)
    ds, encoding, ds_name = _resolve_dataset(block, seed)
    fit_cfg = _fit_config(cfg, variants[0], seed)
    model = fit_survbeta(ds, fit_cfg)
    model.feature_encoding = encoding
    model_path = out / "model.json"
    save_model(model, model_path)
    report = dict(model.report)
    report["dataset"] = ds_name
    with open(out / "fit_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    grid = report.get("grid", [])
    if grid:
        header = sorted({k for entry in grid for k in entry})
        rows = [[entry.get(k, "") for k in header] for entry in grid]
        _write_table(out / "fit_grid.csv", header, rows,
                     {"command": "fit", "config": report["config"], "dataset": block})
        if not args.no_figures:
            plotting.plot_fit_grid(report, out / "fit_grid.png")
    print(f"model written to {model_path}")
    chosen = report.get("chosen", {})
    if chosen:
        print(f"chosen hyperparameters: {chosen}")
    return EXIT_OK


def _load_feature_matrix(path, encoding) -> np.ndarray:
    """Feature matrix for prediction, re-encoded against a trained model."""
    if not encoding:
        raise ConfigError("model document carries no feature encoding")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, a header row is required") from None
        positions = {}
        for spec in encoding:
            if spec.name not in header:
                raise SchemaError(f"{path}: missing feature column {spec.name!r}")
            positions[spec.name] = header.index(spec.name)
        columns: list[list[float]] = []
        for line, row in enumerate(reader, start=2):
            cells = [c.strip() for c in row]
            values: list[float] = []
            for spec in encoding:
                raw = cells[positions[spec.name]]
                if spec.categories is None:
                    try:
                        values.append(float(raw))
                    except ValueError:
                        raise RowParseError(
                            f"line {line}: cannot parse feature value {raw!r}", line
                        ) from None
                else:
                    if raw not in spec.categories:
                        raise RowParseError(
                            f"line {line}: category {raw!r} not seen at fit time", line
                        )
                    values.extend(1.0 if raw == cat else 0.0 for cat in spec.categories)
            columns.append(values)
    if not columns:
        raise DegenerateDataError(f"{path}: no rows to predict on")
    return np.asarray(columns, dtype=float)


def cmd_predict(args) -> int:
    out = _ensure_outdir(args)
    model = load_model(args.model)
    features = _load_feature_matrix(args.csv, model.feature_encoding)
    predicted = model.predict_expected_time_batch(features)
    rows = [[i, float(p)] for i, p in enumerate(predicted)]
    _write_table(out / "predictions.csv", ["row", "expected_time"], rows,
                 {"command": "predict", "model": str(args.model), "csv": str(args.csv)})
    print(f"wrote {len(rows)} predictions to {out / 'predictions.csv'}")
    return EXIT_OK


def _axis_overrides(axis: str, value, block: dict, fit_kwargs: dict) -> tuple[dict, dict]:
    block = dict(block)
    fit_kwargs = dict(fit_kwargs)
    if axis == "estimators":
        fit_kwargs["m_estimators"] = int(value)
    elif axis == "subsample_size":
        fit_kwargs["k_fraction"] = float(value)
    elif axis == "cluster_points":
        if "csv" in block:
            raise ConfigError("axis cluster_points needs a synthetic dataset")
        block["n_per_cluster"] = int(value)
    elif axis == "cluster_distance":
        if "csv" in block:
            raise ConfigError("axis cluster_distance needs a synthetic dataset")
        block["preset"] = "shifted-clusters"
        block["shift"] = float(value)
    elif axis == "k_shape":
        if "csv" in block:
            raise ConfigError("axis k_shape needs a synthetic dataset")
        block["k_shape"] = float(value)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return block, fit_kwargs


def _parse_values(axis: str, raw) -> list:
    if raw is None:
        raise ConfigError("sweep needs --values or config 'values'")
    if isinstance(raw, str):
        raw = [v for v in raw.split(",") if v]
    try:
        return [int(v) if axis in _INT_AXES else float(v) for v in raw]
    except ValueError as exc:
        raise ConfigError(f"cannot parse axis values: {exc}") from None


def _fit_and_score(ds: Dataset, variant: str, cfg: dict, fit_seed: int, split_seed: int):
    """Split off a test part, fit on the rest, return the test C-index."""
    fit_part, _, test_part = split(ds, SplitSpec(0.8, 0.0, 0.2, split_seed))
    model = fit_survbeta(fit_part, _fit_config(cfg, variant, fit_seed))
    predicted = model.predict_expected_time_batch(test_part.features)
    return concordance_index(predicted, test_part)


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    out = _ensure_outdir(args)
    master = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    axis = args.axis or cfg.get("axis")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    values = _parse_values(axis, args.values or cfg.get("values"))
    reps = args.reps if args.reps is not None else int(cfg.get("reps", 1))
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    variants = _variant_list(cfg, args)
    base_block = _dataset_block(cfg, args)

    tasks = [(value, rep) for value in values for rep in range(reps)]

    def worker(task_index, task):
        value, rep = task
        # seeds keyed by the repetition only: every axis value and variant of
        # one rep sees the same data and splits (paired contrasts)
        gen_seed, split_seed, fit_seed = _task_seeds(master, rep)
        rows = []
        for variant in variants:
            block, fit_over = _axis_overrides(axis, value, base_block, {})
            local_cfg = dict(cfg)
            local_cfg["fit"] = {**cfg.get("fit", {}), **fit_over}
            ds, _, _ = _resolve_dataset(block, gen_seed)
            score = _fit_and_score(ds, variant, local_cfg, fit_seed, split_seed)
            rows.append((value, variant, rep, gen_seed, score))
        return rows

    results = _run_tasks(tasks, worker, args.jobs)
    rows = [row for group in results for row in group]
    meta = {
        "command": "sweep", "axis": axis, "values": values, "reps": reps,
        "variants": variants, "seed": master, "dataset": base_block,
        "fit": {**CLI_FIT_DEFAULTS, **cfg.get("fit", {})},
    }
    table = out / f"sweep_{axis}.csv"
    _write_table(table, ["value", "variant", "rep", "seed", "cindex"], rows, meta)
    if not args.no_figures:
        plotting.plot_sweep(
            [(r[0], r[1], r[2], r[4]) for r in rows], axis, out / f"sweep_{axis}.png"
        )
    print(f"wrote {len(rows)} rows to {table}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _load_config(args.config)
    out = _ensure_outdir(args)
    master = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    reps = args.reps if args.reps is not None else int(cfg.get("reps", 1))
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    variants = _variant_list(cfg, args)
    blocks = cfg.get("datasets")
    if not blocks:
        blocks = [_dataset_block(cfg, args)]
    tasks = [(b_idx, rep) for b_idx in range(len(blocks)) for rep in range(reps)]

    def worker(task_index, task):
        b_idx, rep = task
        gen_seed, split_seed, fit_seed = _task_seeds(master, task_index)
        block = blocks[b_idx]
        ds, _, name = _resolve_dataset(block, gen_seed)
        rows = []
        for variant in variants:
            score = _fit_and_score(ds, variant, cfg, fit_seed, split_seed)
            rows.append((name, variant, rep, score))
        return rows

    results = _run_tasks(tasks, worker, args.jobs)
    raw_rows = [row for group in results for row in group]
    meta = {
        "command": "benchmark", "reps": reps, "variants": variants, "seed": master,
        "datasets": blocks, "fit": {**CLI_FIT_DEFAULTS, **cfg.get("fit", {})},
    }
    _write_table(out / "benchmark_raw.csv", ["dataset", "variant", "rep", "cindex"],
                 raw_rows, meta)

    summary = []
    for name in sorted({r[0] for r in raw_rows}):
        for variant in variants:
            scores = np.array([r[3] for r in raw_rows if r[0] == name and r[1] == variant])
            summary.append((name, variant, float(scores.mean()), float(scores.std()), len(scores)))
    _write_table(out / "benchmark_summary.csv",
                 ["dataset", "variant", "mean_cindex", "std_cindex", "reps"], summary, meta)
    if not args.no_figures:
        plotting.plot_benchmark([(s[0], s[1], s[2], s[3]) for s in summary],
                                out / "benchmark_summary.png")
    print(f"wrote benchmark tables to {out}")
    return EXIT_OK


def _read_score_table(path) -> dict:
    """Per-dataset mean C-index per variant from a raw or summary table."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise DegenerateDataError(f"{path}: empty table")
    fields = set(rows[0])
    scores: dict[str, dict[str, float]] = {}
    if {"dataset", "variant", "mean_cindex"} <= fields:
        for row in rows:
            scores.setdefault(row["dataset"], {})[row["variant"]] = float(row["mean_cindex"])
    elif {"dataset", "variant", "cindex"} <= fields:
        acc: dict[tuple, list[float]] = {}
        for row in rows:
            acc.setdefault((row["dataset"], row["variant"]), []).append(float(row["cindex"]))
        for (ds_name, variant), vals in acc.items():
            scores.setdefault(ds_name, {})[variant] = float(np.mean(vals))
    else:
        raise SchemaError(
            f"{path}: expected columns dataset/variant plus cindex or mean_cindex"
        )
    return scores


def cmd_compare(args) -> int:
    out = _ensure_outdir(args)
    if not args.csv:
        raise ConfigError("compare needs --csv pointing at a benchmark table")
    scores = _read_score_table(args.csv)
    variants = sorted({v for per_ds in scores.values() for v in per_ds})
    datasets = sorted(scores)
    complete = [d for d in datasets if all(v in scores[d] for v in variants)]
    if len(complete) < 2:
        raise DegenerateDataError("compare needs at least two datasets with all variants")
    matrix = np.ones((len(variants), len(variants)))
    for i, va in enumerate(variants):
        for j, vb in enumerate(variants):
            if i == j:
                continue
            a = np.array([scores[d][va] for d in complete])
            b = np.array([scores[d][vb] for d in complete])
            matrix[i, j] = paired_t_test(a, b)
    rows = [[va] + [float(matrix[i, j]) for j in range(len(variants))]
            for i, va in enumerate(variants)]
    meta = {"command": "compare", "source": str(args.csv), "datasets": complete}
    _write_table(out / "compare_pvalues.csv", ["variant", *variants], rows, meta)
    if not args.no_figures:
        plotting.plot_pvalue_matrix(variants, variants, matrix, out / "compare_pvalues.png")
    print(f"wrote p-value matrix to {out / 'compare_pvalues.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="survbeta",
        description="Beran-estimator ensembles for censored data: fit, predict and benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its entries")
        p.add_argument("--out", help="output directory (default survbeta-out)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for task pools")

    p_fit = sub.add_parser("fit", help="fit one model variant and save it")
    common(p_fit)
    p_fit.add_argument("--variant", help="model variant name")
    p_fit.add_argument("--csv", help="CSV dataset path")
    p_fit.add_argument("--time-col", help="time column of the CSV")
    p_fit.add_argument("--event-col", help="event column of the CSV")
    p_fit.add_argument("--categorical", help="comma-separated categorical columns")
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="predict expected times for a feature CSV")
    common(p_pred)
    p_pred.add_argument("--model", required=True, help="model document from fit")
    p_pred.add_argument("--csv", required=True, help="feature CSV path")
    p_pred.set_defaults(func=cmd_predict)

    p_sweep = sub.add_parser("sweep", help="sweep one experiment axis")
    common(p_sweep)
    p_sweep.add_argument("--axis", choices=SWEEP_AXES, help="sweep axis")
    p_sweep.add_argument("--values", help="comma-separated axis values")
    p_sweep.add_argument("--reps", type=int, help="repetitions per axis value")
    p_sweep.add_argument("--variant", help="comma-separated variants")
    p_sweep.add_argument("--csv", help="CSV dataset path")
    p_sweep.add_argument("--time-col")
    p_sweep.add_argument("--event-col")
    p_sweep.add_argument("--categorical")
    p_sweep.set_defaults(func=cmd_sweep)

    p_bench = sub.add_parser("benchmark", help="mean test C-index per dataset and variant")
    common(p_bench)
    p_bench.add_argument("--reps", type=int, help="repetitions per dataset")
    p_bench.add_argument("--variant", help="comma-separated variants")
    p_bench.add_argument("--csv", help="CSV dataset path")
    p_bench.add_argument("--time-col")
    p_bench.add_argument("--event-col")
    p_bench.add_argument("--categorical")
    p_bench.set_defaults(func=cmd_benchmark)

    p_cmp = sub.add_parser("compare", help="paired t-test matrix over benchmark scores")
    common(p_cmp)
    p_cmp.add_argument("--csv", help="benchmark raw or summary table")
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, RowParseError, DegenerateDataError, DegenerateSplitError,
            InvalidInputError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
