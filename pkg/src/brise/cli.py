"""Command-line interface.

Subcommands: ``test`` (one two-sample test on a CSV), ``simulate``
(size/power studies to tidy CSV), ``oracle-check`` (closed-form moments vs
an independent reference), ``validate`` (ingest and partition report), and
``diagnostics`` (asymptotic-condition ratios).

Option values resolve as: command line > config file > built-in defaults.
Config files are JSON objects; top-level keys apply everywhere, nested
per-subcommand objects override them.  TOML works too on interpreters that
ship ``tomllib``.  Failures print one JSON object on stderr with a stable
``code`` field and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datamodel import filter_patterns, ingest, partition, validation_report
from .errors import BriseError, InvalidConfigError
from .oracle import ENUMERATION_CAP, oracle_report
from .pipeline import (
    INFERENCE_ASYMPTOTIC,
    INFERENCE_PATTERN_PERM,
    INFERENCE_STANDARD_PERM,
    prepare,
    run_diagnostics,
    run_test_prepared,
)
from .simulate import SimulationConfig, power_curve, simulate, summarize, write_rows_csv
from .statistics import METHOD_CONGREGATED, METHOD_VECTORIZED

_INFERENCE_FLAGS = {
    "asymptotic": INFERENCE_ASYMPTOTIC,
    "pattern-perm": INFERENCE_PATTERN_PERM,
    "standard-perm": INFERENCE_STANDARD_PERM,
}

_DEFAULTS = {
    "test": {
        "method": METHOD_CONGREGATED,
        "k": 10,
        "inference": "asymptotic",
        "replicates": 1000,
        "seed": None,
        "n_thres": 2,
        "p_thres": 0.1,
        "out": None,
        "plot": False,
        "dump_distances": None,
        "dump_ranks": None,
    },
    "simulate": {
        "variant": "null",
        "m": 100,
        "n": 100,
        "pX": 0.5,
        "pY": 0.5,
        "reps": 100,
        "seed": None,
        "out": "results.csv",
        "method": METHOD_CONGREGATED,
        "inference": "asymptotic",
        "replicates": 1000,
        "k": 10,
        "alpha": 0.05,
        "sources": 2,
        "p_grid": None,
        "plot": False,
    },
    "oracle-check": {
        "k": 10,
        "cap": ENUMERATION_CAP,
        "samples": 20000,
        "seed": 0,
        "tolerance": 1e-9,
        "n_thres": 2,
        "p_thres": 0.1,
    },
    "validate": {"n_thres": 2, "p_thres": 0.1},
    "diagnostics": {"k": 10, "n_thres": 2, "p_thres": 0.1},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brise",
        description="Two-sample testing for multi-source data with block-wise missingness.",
    )
    parser.add_argument("--version", action="version", version=f"brise {__version__}")
    parser.add_argument("--config", help="JSON (or TOML) file with option defaults")
    parser.add_argument(
        "--threads",
        type=int,
        default=argparse.SUPPRESS,
        help="parallel worker cap (default: all cores); results do not depend on it",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = argparse.SUPPRESS

    def add_data_args(p):
        p.add_argument("--data", required=True, help="input CSV with a 'group' column")
        p.add_argument("--schema", required=True, help="JSON sidecar naming sources and columns")

    t = sub.add_parser("test", help="run one two-sample test")
    add_data_args(t)
    t.add_argument("--method", choices=[METHOD_CONGREGATED, METHOD_VECTORIZED], default=sp)
    t.add_argument("--k", type=int, default=sp, help="neighbor count for the rank graph")
    t.add_argument("--inference", choices=sorted(_INFERENCE_FLAGS), default=sp)
    t.add_argument(
        "--B",
        "--replicates",
        dest="replicates",
        type=int,
        default=sp,
        help="permutation replicates",
    )
    t.add_argument("--seed", type=int, default=sp)
    t.add_argument("--n-thres", dest="n_thres", type=int, default=sp)
    t.add_argument("--p-thres", dest="p_thres", type=float, default=sp)
    t.add_argument("--out", default=sp, help="write the result JSON here instead of stdout")
    t.add_argument("--plot", action="store_true", default=sp, help="render the rank heatmap")
    t.add_argument(
        "--dump-distances",
        dest="dump_distances",
        default=sp,
        metavar="PATH",
        help="write the pattern-aware distance matrix as CSV",
    )
    t.add_argument(
        "--dump-ranks",
        dest="dump_ranks",
        default=sp,
        metavar="PATH",
        help="write the symmetrized rank matrix as CSV",
    )

    s = sub.add_parser("simulate", help="size/power study, tidy CSV + JSON summary")
    s.add_argument("--setting", required=True, choices=["I", "II", "III"])
    s.add_argument("--variant", choices=["null", "a", "b", "c"], default=sp)
    s.add_argument("--d", type=int, required=True, help="total dimension across sources")
    s.add_argument("--m", type=int, default=sp)
    s.add_argument("--n", type=int, default=sp)
    s.add_argument("--pX", dest="pX", type=float, default=sp)
    s.add_argument("--pY", dest="pY", type=float, default=sp)
    s.add_argument("--reps", type=int, default=sp)
    s.add_argument("--seed", type=int, default=sp)
    s.add_argument("--out", default=sp)
    s.add_argument("--method", choices=[METHOD_CONGREGATED, METHOD_VECTORIZED], default=sp)
    s.add_argument("--inference", choices=sorted(_INFERENCE_FLAGS), default=sp)
    s.add_argument("--replicates", type=int, default=sp, help="permutation replicates per test")
    s.add_argument("--k", type=int, default=sp)
    s.add_argument("--alpha", type=float, default=sp)
    s.add_argument("--sources", type=int, default=sp)
    s.add_argument("--p-grid", dest="p_grid", default=sp, help="comma list of shared sampling rates")
    s.add_argument("--plot", action="store_true", default=sp)

    o = sub.add_parser("oracle-check", help="cross-check null moments on a dataset")
    add_data_args(o)
    o.add_argument("--k", type=int, default=sp)
    o.add_argument("--cap", type=int, default=sp, help="enumeration cap on assignments")
    o.add_argument("--samples", type=int, default=sp, help="sampling fallback size")
    o.add_argument("--seed", type=int, default=sp)
    o.add_argument("--tolerance", type=float, default=sp)
    o.add_argument("--n-thres", dest="n_thres", type=int, default=sp)
    o.add_argument("--p-thres", dest="p_thres", type=float, default=sp)

    v = sub.add_parser("validate", help="ingest the data and report the pattern partition")
    add_data_args(v)
    v.add_argument("--n-thres", dest="n_thres", type=int, default=sp)
    v.add_argument("--p-thres", dest="p_thres", type=float, default=sp)

    g = sub.add_parser("diagnostics", help="asymptotic-condition report")
    add_data_args(g)
    g.add_argument("--k", type=int, default=sp)
    g.add_argument("--n-thres", dest="n_thres", type=int, default=sp)
    g.add_argument("--p-thres", dest="p_thres", type=float, default=sp)

    return parser


def _load_config(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            raise InvalidConfigError(
                "TOML config files need an interpreter with tomllib (3.11+); "
                "use JSON here"
            ) from None
        return tomllib.loads(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"config file {path}: {exc}") from None


def _resolve_options(args: argparse.Namespace) -> dict:
    """Layer built-in defaults, config file values, then explicit flags."""
    command = args.command
    merged = dict(_DEFAULTS[command])
    merged["threads"] = os.cpu_count() or 1
    if args.config:
        config = _load_config(args.config)
        if not isinstance(config, dict):
            raise InvalidConfigError("config file must hold one object")
        sections = {k: v for k, v in config.items() if isinstance(v, dict)}
        flat = {k: v for k, v in config.items() if not isinstance(v, dict)}
        for key in sections:
            if key not in _DEFAULTS:
                raise InvalidConfigError(f"config section {key!r} is not a subcommand")
        update = dict(flat)
        update.update(sections.get(command, {}))
        for key, value in update.items():
            if key != "threads" and key not in merged:
                raise InvalidConfigError(
                    f"config key {key!r} is not an option of {command!r}"
                )
            merged[key] = value
    for key, value in vars(args).items():
        if key not in ("command", "config"):
            merged[key] = value
    return merged


def _jsonable(obj):
    """Replace non-finite floats so the output stays valid JSON."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(payload: dict, out: str | None = None) -> None:
    text = json.dumps(_jsonable(payload), indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _dump_matrix(matrix: np.ndarray, row_labels, path: str) -> None:
    """Write a square matrix as CSV, labeling rows and columns with the
    input-file row indices so entries can be traced back to the data."""
    labels = [str(int(r)) for r in row_labels]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row"] + labels)
        for label, row in zip(labels, matrix):
            writer.writerow([label] + [repr(float(v)) for v in row])


def _cmd_test(opts: dict) -> None:
    data = ingest(opts["data"], opts["schema"])
    result, prep = run_test_prepared(
        data,
        method=opts["method"],
        k=opts["k"],
        inference=_INFERENCE_FLAGS[opts["inference"]],
        n_replicates=opts["replicates"],
        seed=opts["seed"],
        n_thres=opts["n_thres"],
        p_thres=opts["p_thres"],
        threads=opts["threads"],
    )
    _emit(result.to_json_dict(), opts["out"])
    rows = prep.arrangement.original_rows
    if opts["dump_distances"]:
        _dump_matrix(prep.dist.values, rows, opts["dump_distances"])
    if opts["dump_ranks"]:
        _dump_matrix(prep.R.values, rows, opts["dump_ranks"])
    if opts["plot"]:
        from .report import render_rank_heatmap

        base = Path(opts["out"]).with_suffix("") if opts["out"] else Path("brise")
        fig_path = base.parent / (base.name + ".ranks.png")
        render_rank_heatmap(prep.R, fig_path, prep.arrangement.report_ids)
        print(f"wrote {fig_path}", file=sys.stderr)


def _cmd_simulate(opts: dict) -> None:
    cfg = SimulationConfig(
        setting=opts["setting"],
        variant=opts["variant"],
        d=opts["d"],
        m=opts["m"],
        n=opts["n"],
        p_x=opts["pX"],
        p_y=opts["pY"],
        n_sources=opts["sources"],
        k=opts["k"],
        method=opts["method"],
        inference=_INFERENCE_FLAGS[opts["inference"]],
        n_replicates=opts["replicates"],
        alpha=opts["alpha"],
    )
    seed = opts["seed"]
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
        print(f"seed not provided; generated seed {seed}", file=sys.stderr)
    grid = opts["p_grid"]
    if grid is not None and not isinstance(grid, (list, tuple)):
        grid = [float(tok) for tok in str(grid).split(",") if tok.strip()]
    if grid:
        rows = power_curve(cfg, grid, opts["reps"], seed, opts["threads"])
    else:
        rows = simulate(cfg, opts["reps"], seed, opts["threads"])

    out = Path(opts["out"])
    write_rows_csv(rows, out)
    summary = summarize(rows, cfg.alpha)
    summary.update(
        {
            "setting": cfg.setting,
            "variant": cfg.variant,
            "d": cfg.d,
            "m": cfg.m,
            "n": cfg.n,
            "p_x": cfg.p_x if not grid else None,
            "p_y": cfg.p_y if not grid else None,
            "method": cfg.method,
            "inference": cfg.inference,
            "k": cfg.k,
            "seed": seed,
            "rows": str(out),
        }
    )
    summary_path = out.with_suffix(".summary.json")
    _emit(summary, str(summary_path))
    _emit(summary)
    if opts["plot"]:
        from .report import render_power_curve, render_pvalue_histogram

        fig_path = out.with_suffix(".png")
        if grid:
            render_power_curve(rows, fig_path, cfg.alpha)
        else:
            render_pvalue_histogram(rows, fig_path, cfg.alpha)
        print(f"wrote {fig_path}", file=sys.stderr)


def _cmd_oracle_check(opts: dict) -> None:
    data = ingest(opts["data"], opts["schema"])
    part = filter_patterns(
        partition(data), n_thres=opts["n_thres"], p_thres=opts["p_thres"]
    )
    prep = prepare(data, part, opts["k"])
    report = oracle_report(
        prep.engine,
        cap=opts["cap"],
        n_samples=opts["samples"],
        seed=opts["seed"],
        threads=opts["threads"],
        tolerance=opts["tolerance"],
    )
    _emit(report)
    if not report["passed"]:
        return 3
    return 0


def _cmd_validate(opts: dict) -> None:
    data = ingest(opts["data"], opts["schema"])
    raw = partition(data)
    filtered = filter_patterns(raw, n_thres=opts["n_thres"], p_thres=opts["p_thres"])
    _emit(validation_report(raw, filtered))


def _cmd_diagnostics(opts: dict) -> None:
    data = ingest(opts["data"], opts["schema"])
    report = run_diagnostics(
        data, k=opts["k"], n_thres=opts["n_thres"], p_thres=opts["p_thres"]
    )
    _emit(report)


_COMMANDS = {
    "test": _cmd_test,
    "simulate": _cmd_simulate,
    "oracle-check": _cmd_oracle_check,
    "validate": _cmd_validate,
    "diagnostics": _cmd_diagnostics,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _resolve_options(args)
        code = _COMMANDS[args.command](opts)
    except BriseError as exc:
        print(json.dumps({"error": exc.to_json_dict()}), file=sys.stderr)
        return 1
    except OSError as exc:
        payload = {"error": {"code": "io-error", "message": str(exc)}}
        print(json.dumps(payload), file=sys.stderr)
        return 1
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
