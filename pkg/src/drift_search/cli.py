"""Command line front end.

Four commands share one flag vocabulary:

  simulate   run a scenario and write its log directory
  fit        run only the flow-fitting stage and write the window table
  export     convert pieces of a log directory to plain CSV
  replay     re-run a log directory's scenario and byte-compare the result

Exit codes: 0 success (for replay: logs identical), 1 runtime failure or
replay mismatch, 2 configuration or usage problems. ``simulate`` flushes
the partial log before exiting 1 so aborted runs stay inspectable. The
environment variable DRIFT_SEARCH_LOG_LEVEL sets the logging level.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import MissionConfig, load_config, parse_config
from .drifters import synthesize_drifters
from .errors import ConfigurationError
from .fitting import pso_fit, schedule_fit_windows
from .flow import SurrogateModel
from .io import OutputLock, fmt, read_drifter_csv, snapshot_to_csv
from .mission import run_mission

log = logging.getLogger(__name__)


def _apply_overrides(config: MissionConfig, args) -> MissionConfig:
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.deterministic_iters is not None:
        config = replace(config, fit_iterations=args.deterministic_iters, fit_budget_s=None)
    if args.budget_seconds is not None:
        config = replace(config, fit_budget_s=args.budget_seconds)
    return config


def _observations(config: MissionConfig):
    if config.drifter_source == "synthetic":
        syn = config.synthetic
        fleet = synthesize_drifters(
            config.boundary,
            config.grid,
            syn.truth_vector,
            deploy_center=syn.deploy_center,
            deploy_radius=syn.deploy_radius,
            duration=config.duration,
            n_fitting=syn.n_fitting,
            n_local=syn.n_local,
            n_validation=syn.n_validation,
            cadence=syn.cadence,
            noise_sigma=syn.noise_sigma,
            seed=config.seed,
        )
        return fleet.observations
    observations, _ = read_drifter_csv(config.drifter_csv, config.projection, start=config.start)
    return observations


def cmd_simulate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = Path(args.out) if args.out else Path.cwd() / f"{config.name}_run"
    out.mkdir(parents=True, exist_ok=True)
    with OutputLock(out):
        run_mission(config, out_dir=out)
    print(f"wrote {out}")
    return 0


def cmd_fit(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    if args.out is None:
        raise ConfigurationError("fit requires --out")
    observations = _observations(config)
    bound = abs(config.control_limit)
    size = config.boundary.layout.size
    problems = schedule_fit_windows(
        observations,
        config.window,
        spec=config.boundary,
        grid=config.grid,
        lower=np.full(size, -bound),
        upper=np.full(size, bound),
        time_budget=config.fit_budget_s,
        max_iters=config.fit_iterations,
        base_seed=config.seed,
        window_start=0.0,
    )
    model = SurrogateModel(config.boundary, config.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with OutputLock(out):
        warm = None
        window_rows = []
        vector_rows = []
        for problem in problems:
            if warm is not None:
                problem = replace(problem, warm_start=warm)
            result = pso_fit(problem, model=model)
            warm = result.best_vector
            index = int(round(problem.window[0] / config.window))
            window_rows.append(
                (
                    str(index),
                    fmt(problem.window[0]),
                    fmt(problem.window[1]),
                    fmt(result.best_error),
                    str(result.evaluations),
                    str(result.iterations),
                )
            )
            for c, value in enumerate(result.best_vector):
                vector_rows.append((str(index), str(c), fmt(value)))
        with (out / "windows.csv").open("w") as fh:
            fh.write("window_index,t_start,t_end,e_d,evaluations,iterations\n")
            for row in window_rows:
                fh.write(",".join(row) + "\n")
        with (out / "vectors.csv").open("w") as fh:
            fh.write("window_index,component,value\n")
            for row in vector_rows:
                fh.write(",".join(row) + "\n")
    print(f"wrote {out} ({len(window_rows)} windows)")
    return 0


def cmd_export(args) -> int:
    ref = Path(args.config)
    if not ref.is_dir():
        raise ConfigurationError(f"export expects --config to name a log directory: {ref}")
    if args.format != "csv":
        raise ConfigurationError(f"unsupported export format: {args.format}")
    out = Path(args.out) if args.out else ref / "export"
    out.mkdir(parents=True, exist_ok=True)
    if args.what == "field":
        bases = sorted(p.with_suffix("") for p in (ref / "snapshots").glob("*.f64"))
        if not bases:
            raise ConfigurationError(f"no field snapshots under {ref / 'snapshots'}")
        for base in bases:
            snapshot_to_csv(base, out / f"{base.name}.csv")
        print(f"wrote {len(bases)} field tables to {out}")
        return 0
    names = {
        "tracks": ("uav_tracks.csv", "drifter_tracks.csv", "detections.csv"),
        "metrics": ("metrics.csv",),
    }[args.what]
    for name in names:
        source = ref / name
        if not source.exists():
            raise ConfigurationError(f"log directory has no {name}: {ref}")
        shutil.copyfile(source, out / name)
    print(f"wrote {len(names)} tables to {out}")
    return 0


def _compare_dirs(ref: Path, new: Path) -> list[str]:
    """Relative paths whose bytes differ between the two log directories."""
    skip = {".lock", "ABORTED.txt", "export"}
    mismatches = []
    ref_files = {
        p.relative_to(ref) for p in ref.rglob("*")
        if p.is_file() and not any(part in skip for part in p.relative_to(ref).parts)
    }
    new_files = {
        p.relative_to(new) for p in new.rglob("*")
        if p.is_file() and not any(part in skip for part in p.relative_to(new).parts)
    }
    for rel in sorted(ref_files | new_files):
        if rel not in ref_files or rel not in new_files:
            mismatches.append(f"{rel} (missing on one side)")
        elif (ref / rel).read_bytes() != (new / rel).read_bytes():
            mismatches.append(str(rel))
    return mismatches


def cmd_replay(args) -> int:
    ref = Path(args.config)
    if not ref.is_dir():
        raise ConfigurationError(f"replay expects --config to name a log directory: {ref}")
    config_path = ref / "config.yaml"
    seed_path = ref / "seed.txt"
    if not config_path.exists() or not seed_path.exists():
        raise ConfigurationError(f"{ref} is not a complete log directory")
    config = parse_config(config_path.read_text(), base_dir=ref)
    seed_words = seed_path.read_text().split()
    if len(seed_words) != 2 or seed_words[0] != "seed":
        raise ConfigurationError(f"malformed seed record: {seed_path}")
    config = replace(config, seed=int(seed_words[1]))

    cleanup = args.out is None
    new = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="drift_replay_"))
    new.mkdir(parents=True, exist_ok=True)
    try:
        with OutputLock(new):
            run_mission(config, out_dir=new)
        mismatches = _compare_dirs(ref, new)
    finally:
        if cleanup:
            shutil.rmtree(new, ignore_errors=True)
    if mismatches:
        for rel in mismatches:
            print(f"mismatch: {rel}", file=sys.stderr)
        return 1
    print(f"replay of {ref} is byte-identical")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drift-search",
        description="current-aware probabilistic search simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--config", required=True, help="scenario file or log directory")
        p.add_argument("--out", default=None, help=out_help)
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument(
            "--budget-seconds",
            type=float,
            default=None,
            help="wall-clock budget per fitting window",
        )
        p.add_argument(
            "--deterministic-iters",
            type=int,
            default=None,
            help="fixed PSO iteration count per window (removes the wall-clock budget)",
        )

    p = sub.add_parser("simulate", help="run a scenario and write its log")
    common(p, "log directory to create")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the flow windows only")
    common(p, "directory for the window tables")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("export", help="convert log pieces to plain CSV")
    common(p, "directory for the exported tables")
    p.add_argument(
        "--what",
        choices=("field", "tracks", "metrics"),
        default="metrics",
        help="which part of the log to export",
    )
    p.add_argument("--format", default="csv", help="output format (csv)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("replay", help="re-run a log and byte-compare")
    common(p, "keep the replay log here instead of a temp directory")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    level_name = os.environ.get("DRIFT_SEARCH_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except Exception as err:
        log.debug("command failed", exc_info=True)
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
