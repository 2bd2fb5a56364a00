"""Command-line entry point: ``tierbo run|score|correlate|surfaces list``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__, surfaces
from .campaign import STRATEGIES, aggregate, rank_correlation_study, run_campaign
from .config import (
    ConfigError,
    RunConfigModel,
    campaign_to_dict,
    config_hash,
    expand,
    load_hierarchy,
    load_run_config,
)
from .report import dumps_json, run_dir, sha256_file, write_run, write_text
from .scalar import ScoreParams, botier_score, chimera_score, penalty_score

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
SEED_ENV = "TIERBO_SEED"

log = logging.getLogger("tierbo")


class UsageError(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def resolve_seed(flag: int | None, config_seed: int | None, env=None) -> int:
    """``--seed`` beats the config file, which beats ``TIERBO_SEED``; default 0."""
    env = os.environ if env is None else env
    if flag is not None:
        return flag
    if config_seed is not None:
        return config_seed
    raw = env.get(SEED_ENV)
    if raw not in (None, ""):
        try:
            return int(raw)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None
    return 0


def _apply_overrides(model: RunConfigModel, args) -> tuple[RunConfigModel, dict]:
    overrides = {
        "strategies": args.strategy,
        "budget": args.budget,
        "repeats": args.repeats,
        "k": args.k,
        "mc_samples": args.mc_samples,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if not overrides:
        return model, {}
    try:
        updated = RunConfigModel.model_validate({**model.model_dump(), **overrides})
    except ValidationError as exc:
        err = exc.errors()[0]
        where = ".".join(str(p) for p in err["loc"])
        raise UsageError(f"override {where}: {err['msg']}") from None
    return updated, overrides


def cmd_run(args) -> int:
    model = load_run_config(args.config)
    model, overrides = _apply_overrides(model, args)
    seed = resolve_seed(args.seed, model.seed, os.environ)
    try:
        campaigns = expand(model, seed)
    except ValueError as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    out = Path(args.out)
    top = {
        "tool": "tierbo",
        "version": __version__,
        "config_path": str(args.config),
        "config_hash": config_hash(model, seed),
        "master_seed": seed,
        "overrides": overrides,
        "started": _now(),
        "status": "running",
        "runs": [],
    }
    code = EXIT_OK
    for cfg in campaigns:
        directory = run_dir(out, cfg.label, cfg.strategy)
        entry = {"surface": cfg.label, "strategy": cfg.strategy, "directory": str(directory.relative_to(out))}
        started = _now()
        try:
            result = run_campaign(cfg, jobs=args.jobs)
            summary = aggregate(result) if cfg.repeats >= 2 else None
            files = write_run(result, directory, summary, svg=model.svg)
            failures = sum(tr.n_failures for tr in result.traces)
            status = "complete"
        except Exception as exc:  # noqa: BLE001 - reported in the manifest and exit code
            log.error("%s/%s failed: %s", cfg.label, cfg.strategy, exc)
            files = {p.name: sha256_file(p) for p in sorted(directory.glob("*")) if p.is_file()} if directory.exists() else {}
            failures, status, code = None, "partial", EXIT_RUNTIME
            entry["error"] = f"{type(exc).__name__}: {exc}"
        manifest = {
            "tool": "tierbo",
            "version": __version__,
            "config_hash": top["config_hash"],
            "master_seed": seed,
            "campaign": campaign_to_dict(cfg),
            "overrides": overrides,
            "started": started,
            "finished": _now(),
            "status": status,
            "surrogate_failures": failures,
            "files": files,
        }
        write_text(directory / "manifest.json", dumps_json(manifest))
        entry.update(status=status, files=files)
        top["runs"].append(entry)
        print(f"{cfg.label:8s} {cfg.strategy:18s} {status} -> {directory}")
        if code != EXIT_OK:
            break
    top["finished"] = _now()
    top["status"] = "complete" if code == EXIT_OK else "partial"
    write_text(out / "manifest.json", dumps_json(top))
    return code


def _read_csv(path: Path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise UsageError(f"{path}: empty file")
    return rows[0], rows[1:]


def cmd_score(args) -> int:
    hierarchy = load_hierarchy(args.hierarchy)
    header, body = _read_csv(args.csv)
    cols = [j for j, name in enumerate(header) if name.startswith("psi_")]
    if len(cols) != len(hierarchy):
        raise UsageError(f"{args.csv}: found {len(cols)} psi_ columns, hierarchy has {len(hierarchy)} objectives")
    try:
        psi = np.array([[float(r[j]) for j in cols] for r in body], dtype=float).reshape(-1, len(cols))
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{args.csv}: bad psi value ({exc})") from None
    t = hierarchy.thresholds
    params = ScoreParams(exact=True) if args.exact else ScoreParams(k=args.k)
    botier = np.atleast_1d(botier_score(psi, t, params)) if len(body) else np.zeros(0)
    chimera = chimera_score(psi, t) if len(body) else np.zeros(0)
    penalty = np.atleast_1d(penalty_score(psi, t)) if len(body) else np.zeros(0)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header + ["botier", "chimera", "penalty"])
    for r, b, c, p in zip(body, botier, chimera, penalty):
        writer.writerow(r + [repr(float(b)), repr(float(c)), repr(float(p))])
    if args.out:
        write_text(Path(args.out), buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_correlate(args) -> int:
    try:
        surf, starred = surfaces.parse_name(args.surface)
    except surfaces.UnknownSurfaceError as exc:
        raise UsageError(exc.args[0]) from None
    starred = starred or args.starred
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        study = rank_correlation_study(surf.name, starred, args.n)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"{study.surface} spearman_r={study.spearman_r!r} n={args.n}")
    out = Path(args.out or f"grid_{study.surface.replace('*', '-star')}.csv")
    d, m, n = study.X.shape[1], study.Y.shape[1], study.psi.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [f"x_{i}" for i in range(d)] + [f"y_{i}" for i in range(m)] + [f"psi_{i}" for i in range(n)] + ["botier", "chimera"]
    )
    for row in np.column_stack([study.X, study.Y, study.psi, study.botier, study.chimera]):
        writer.writerow([repr(float(v)) for v in row])
    write_text(out, buf.getvalue())
    return EXIT_OK


def surfaces_table() -> list[dict]:
    rows = []
    for name in surfaces.names():
        surf = surfaces.get(name)
        for starred in (False, True):
            h = surf.default_hierarchy(starred)
            rows.append(
                {
                    "name": name + ("*" if starred else ""),
                    "input_dim": surf.input_dim,
                    "output_dim": surf.output_dim,
                    "objectives": [o.name for o in h.objectives],
                    "directions": [o.direction for o in h.objectives],
                    "thresholds": [o.threshold for o in h.objectives],
                    "bounds": [list(b) for b in surf.bounds],
                }
            )
    return rows


def cmd_surfaces(args) -> int:
    print(f"{'name':8s} {'d':>3s} {'m':>3s}  objectives (satisfied when)  bounds")
    for row in surfaces_table():
        objs = ", ".join(
            f"{o} ({'>' if d == 'maximize' else '<'} {t:g})"
            for o, d, t in zip(row["objectives"], row["directions"], row["thresholds"])
        )
        bounds = " ".join(f"[{lo:g},{hi:g}]" for lo, hi in row["bounds"])
        print(f"{row['name']:8s} {row['input_dim']:3d} {row['output_dim']:3d}  {objs}  {bounds}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tierbo", description="Tiered multi-objective Bayesian optimization benchmarks.")
    parser.add_argument("--version", action="version", version=f"tierbo {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run benchmark campaigns from a YAML config")
    run.add_argument("--config", required=True, help="YAML run configuration")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help=f"master seed (beats the config and ${SEED_ENV})")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for repeats")
    run.add_argument("--strategy", action="append", choices=STRATEGIES, help="replace the configured strategies (repeatable)")
    run.add_argument("--budget", type=int)
    run.add_argument("--repeats", type=int)
    run.add_argument("--k", type=float, help="smoothness of the composite score")
    run.add_argument("--mc-samples", type=int, dest="mc_samples")
    run.set_defaults(func=cmd_run)

    score = sub.add_parser("score", help="append botier, chimera and penalty columns to a CSV")
    score.add_argument("csv", help="CSV with psi_0..psi_{N-1} columns")
    score.add_argument("--hierarchy", required=True, help="YAML objective list")
    mode = score.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="hard step and min (default)")
    mode.add_argument("--k", type=float, help="use the smooth score with this smoothness")
    score.add_argument("--out", help="write here instead of stdout")
    score.set_defaults(func=cmd_score)

    corr = sub.add_parser("correlate", help="rank correlation of tiered and Chimera scores on a Sobol grid")
    corr.add_argument("surface")
    corr.add_argument("--starred", action="store_true")
    corr.add_argument("--n", type=int, default=10_000)
    corr.add_argument("--out", help="grid CSV path (default grid_<surface>.csv)")
    corr.set_defaults(func=cmd_correlate)

    surf = sub.add_parser("surfaces", help="surface registry")
    surf_sub = surf.add_subparsers(dest="surfaces_command", required=True)
    surf_sub.add_parser("list", help="print registered surfaces").set_defaults(func=cmd_surfaces)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "command", None) == "score" and args.k is None:
        args.exact = True
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.exception("runtime failure: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
