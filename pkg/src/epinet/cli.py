"""Command line: ``epinet run|sweep|analytic --config PATH``.

CSV goes to ``--out`` (or stdout); diagnostics go to stderr only.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import sys
from dataclasses import replace
from typing import Any

import yaml

from . import analytic as an
from .config import (
    FLAT_KEYS,
    ConfigError,
    SweepSpec,
    combination_seed,
    config_to_flat,
    flat_to_config,
    load_config,
)
from .engine import BatchSummary, SimConfig, run_batch

RUN_COLUMNS = (
    "row_type",
    "run_index",
    "seed",
    "consensus",
    "rounds",
    "mean_policy_credence",
    "mean_scientist_credence",
    "policy_credence_stderr",
    "runs_kept",
    "runs_discarded",
)
SWEEP_COLUMNS = ("combination",) + FLAT_KEYS + (
    "runs_kept",
    "runs_discarded",
    "discard_fraction",
    "guard_tripped",
    "mean_policy_credence",
    "stderr",
    "mean_rounds",
)
ANALYTIC_COLUMNS = (
    "n", "epsilon", "K", "k", "r", "B_t",
    "X", "Y_S", "p_spurious", "z", "E_tilde", "X_tilde", "Y_P", "Y_S_Y_P",
    "drift", "degenerate",
)
FIT_COLUMNS = ("epsilon", "n_min", "n_max", "intercept", "slope")


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def run_rows(summary: BatchSummary) -> list[dict[str, Any]]:
    rows = [
        {
            "row_type": "run",
            "run_index": rec.index,
            "seed": rec.seed,
            "consensus": rec.outcome.consensus.value,
            "rounds": rec.outcome.rounds_elapsed,
            "mean_policy_credence": rec.outcome.mean_policy_credence,
            "mean_scientist_credence": rec.outcome.mean_scientist_credence,
        }
        for rec in summary.records
    ]
    rows.append(
        {
            "row_type": "summary",
            "seed": summary.config.seed,
            "consensus": "guard_tripped" if summary.guard_tripped else "",
            "rounds": summary.mean_rounds,
            "mean_policy_credence": summary.mean_policy_credence,
            "policy_credence_stderr": summary.stderr,
            "runs_kept": summary.runs_kept,
            "runs_discarded": summary.runs_discarded,
        }
    )
    return rows


def cmd_run(config: SimConfig, threads: int = 1) -> str:
    return to_csv(RUN_COLUMNS, run_rows(run_batch(config, threads)))


def sweep_rows(spec: SweepSpec | SimConfig, threads: int = 1) -> list[dict[str, Any]]:
    if isinstance(spec, SimConfig):
        combos = [config_to_flat(spec)]
        master = spec.seed
    else:
        combos = spec.combinations()
        master = int(spec.base.get("seed", 0))
    # validate every combination before running anything
    configs = []
    for flat in combos:
        seeded = {**flat, "seed": combination_seed(master, flat)}
        configs.append((seeded, flat_to_config(seeded)))
    return [summary_row(i, flat, run_batch(cfg, threads)) for i, (flat, cfg) in enumerate(configs)]


def summary_row(index: int, flat: dict[str, Any], s: BatchSummary) -> dict[str, Any]:
    """One sweep-style row: the combination's parameters plus its aggregates."""
    return {
        "combination": index,
        **flat,
        "runs_kept": s.runs_kept,
        "runs_discarded": s.runs_discarded,
        "discard_fraction": s.discard_fraction,
        "guard_tripped": s.guard_tripped,
        "mean_policy_credence": s.mean_policy_credence,
        "stderr": s.stderr,
        "mean_rounds": s.mean_rounds,
    }


def cmd_sweep(spec: SweepSpec | SimConfig, threads: int = 1) -> str:
    return to_csv(SWEEP_COLUMNS, sweep_rows(spec, threads))


def row_to_config(row: dict[str, str]) -> SimConfig:
    """Rebuild the config behind one sweep row (inverse of the CSV encoding)."""
    flat = {}
    for key in FLAT_KEYS:
        v = row.get(key, "")
        if v == "":
            continue
        if key in ("network", "listener_pattern", "curation", "journalist_mode"):
            flat[key] = v
        elif key == "dedup":
            flat[key] = v == "true"
        elif key in ("epsilon", "certainty_threshold"):
            flat[key] = float(v)
        else:
            flat[key] = int(v)
    return flat_to_config(flat)


def analytic_row(p: an.AnalyticParams) -> dict[str, Any]:
    row: dict[str, Any] = {
        "n": p.n, "epsilon": p.epsilon, "K": p.K, "k": p.k, "r": p.r, "B_t": p.B_t,
        "X": an.factor_X(p.n, p.epsilon),
        "Y_S": an.y_s(p),
        "p_spurious": an.p_spurious(p.n, p.epsilon),
        "z": an.spurious_rate_z(p.n, p.epsilon, p.K),
        "degenerate": False,
    }
    try:
        row["E_tilde"] = an.spurious_expectation(p.n, p.epsilon)
        row["X_tilde"] = an.factor_X_tilde(p.n, p.epsilon)
    except an.DegenerateSpuriousRate:
        row["degenerate"] = True
    try:
        row["Y_P"] = an.y_p(p)
        row["Y_S_Y_P"] = row["Y_S"] * row["Y_P"]
        row["drift"] = an.predict_drift(p).value
    except an.DegenerateSpuriousRate:
        row["degenerate"] = True
    return row


ANALYTIC_KEYS = ("n", "epsilon", "K", "k", "r", "B_t")


def cmd_analytic(doc: dict[str, Any]) -> str:
    """Analytic table for a grid of points, or the linear fit of E_tilde over n.

    ``doc`` holds ``n, epsilon, K, k, r, B_t`` (scalars or lists, product
    semantics) or a ``fit`` mapping with ``n_min, n_max, epsilon``.
    """
    if "fit" in doc:
        fit = doc["fit"]
        extra = sorted(set(doc) - {"fit"}) + sorted(set(fit) - {"n_min", "n_max", "epsilon"})
        if extra:
            raise ConfigError(f"unknown key(s): {', '.join(extra)}")
        n_min, n_max, eps = int(fit["n_min"]), int(fit["n_max"]), float(fit["epsilon"])
        intercept, slope = an.fit_spurious_expectation(range(n_min, n_max + 1), eps)
        row = {"epsilon": eps, "n_min": n_min, "n_max": n_max, "intercept": intercept, "slope": slope}
        return to_csv(FIT_COLUMNS, [row])
    unknown = sorted(set(doc) - set(ANALYTIC_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    missing = [k for k in ANALYTIC_KEYS if k not in doc]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    grids = [doc[k] if isinstance(doc[k], list) else [doc[k]] for k in ANALYTIC_KEYS]
    rows = []
    for values in itertools.product(*grids):
        try:
            p = an.AnalyticParams(**dict(zip(ANALYTIC_KEYS, values)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        rows.append(analytic_row(p))
    return to_csv(ANALYTIC_COLUMNS, rows)


def _override(cfg: SimConfig, args) -> SimConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.reps is not None:
        changes["reps"] = args.reps
    if args.dedup is not None:
        changes["dedup"] = args.dedup == "on"
    return replace(cfg, **changes) if changes else cfg


def _override_sweep(spec: SweepSpec, args) -> SweepSpec:
    base, axes = dict(spec.base), dict(spec.axes)
    for key, val in (("seed", args.seed), ("reps", args.reps)):
        if val is not None:
            base[key] = val
            axes.pop(key, None)
    if args.dedup is not None:
        base["dedup"] = args.dedup == "on"
        axes.pop("dedup", None)
    out = SweepSpec(base, axes)
    out.configs()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epinet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "seeded runs of one configuration, one CSV row per run"),
        ("sweep", "one aggregate CSV row per parameter combination"),
        ("analytic", "semi-analytic drift quantities"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
        if name != "analytic":
            p.add_argument("--seed", type=int)
            p.add_argument("--threads", type=int, default=1)
            p.add_argument("--reps", type=int)
            p.add_argument("--dedup", choices=("on", "off"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analytic":
            with open(args.config) as fh:
                doc = yaml.safe_load(fh)
            if not isinstance(doc, dict):
                raise ConfigError("config must be a mapping")
            text = cmd_analytic(doc)
        else:
            if args.seed is not None and args.seed < 0:
                raise ConfigError("seed must be a non-negative integer")
            if args.threads < 1:
                raise ConfigError("threads must be >= 1")
            cfg = load_config(args.config)
            if args.command == "run":
                if isinstance(cfg, SweepSpec):
                    raise ConfigError("run takes a single configuration; use sweep for lists")
                text = cmd_run(_override(cfg, args), args.threads)
            else:
                if isinstance(cfg, SweepSpec):
                    cfg = _override_sweep(cfg, args)
                else:
                    cfg = _override(cfg, args)
                text = cmd_sweep(cfg, args.threads)
    except (ConfigError, yaml.YAMLError) as exc:
        print(f"epinet: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"epinet: {exc}", file=sys.stderr)
        return 1

    if args.out is None:
        sys.stdout.write(text)
        return 0
    try:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"epinet: cannot write {args.out}: {exc}", file=sys.stderr)
        return 1
    return 0
