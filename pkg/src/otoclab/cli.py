"""
otoclab command line.

    otoclab map-otoc --map cat --K 0 --N 1024 --tmax 50
    otoclab chain-otoc --L 9 --nup 5 --h 1 --l 1,2,3 --tmax 100 --realizations 20 --seed 7
    otoclab sweep --inner indicators --axis h --values 0.5,1,2,4,8 --realizations 100

``--config run.json`` loads a JSON object whose keys mirror the flags (dashes or
underscores); flags given on the command line win.  Exit status is 0 on
success, 1 for configuration errors and 2 when some cells failed numerically
(their siblings are still written, and ``failures.json`` lists the failures).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

from . import __version__
from .io import config_hash, write_json
from .tasks import DEFAULTS, TASKS, ConfigError, plan, primary_axis, resolve, run_cell, write_outputs

OUTPUT_ENV = "OTOCLAB_OUTPUT_DIR"
DEFAULT_OUTPUT = "otoclab-out"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

RUN_KEYS = ("seed", "output_dir", "workers", "plot")
SWEEP_KEYS = ("inner", "axis", "values")


@dataclass
class RunConfig:
    task: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = DEFAULT_OUTPUT
    workers: int = 1
    plot: bool = False

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "RunConfig":
        return cls(**d)


@dataclass
class SweepSpec:
    axis: str
    values: List[float]
    inner: RunConfig
    realizations: Optional[int] = None

    def __post_init__(self):
        if not self.values:
            raise ConfigError("sweep values must be non-empty")
        for v in self.values:
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"sweep values must be finite numbers, got {v!r}")


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="otoclab", description=__doc__.split("\n\n")[0].strip(),
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 argument_default=argparse.SUPPRESS)
    ap.add_argument("task", nargs="?", default=argparse.SUPPRESS, metavar="{" + ",".join(TASKS) + "}",
                    help="task to run (may instead come from --config)")
    ap.add_argument("--version", action="version", version=f"otoclab {__version__}")
    ap.add_argument("--config", help="JSON file with flag values")
    g = ap.add_argument_group("run")
    g.add_argument("--seed", type=int)
    g.add_argument("--output-dir", dest="output_dir",
                   help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    g.add_argument("--workers", type=int)
    g.add_argument("--plot", action="store_true")
    g = ap.add_argument_group("maps")
    g.add_argument("--map", choices=("cat", "standard", "harper"))
    g.add_argument("--K", type=float)
    g.add_argument("--extra", type=float, help="second Harper kick strength")
    g.add_argument("--N", type=int)
    g.add_argument("--tmax", type=float)
    g.add_argument("--W", choices=("Q", "P"))
    g.add_argument("--V", choices=("Q", "P"))
    g.add_argument("--lyap-iter", dest="lyap_iter", type=int)
    g.add_argument("--lyap-samples", dest="lyap_samples", type=int)
    g.add_argument("--eps", type=float)
    g.add_argument("--xi-max", dest="xi_max", type=int)
    g.add_argument("--num", type=int)
    g = ap.add_argument_group("chains")
    g.add_argument("--L", type=int)
    g.add_argument("--nup", type=int)
    g.add_argument("--h", type=float)
    g.add_argument("--l", type=_ints, help="site separation(s), comma-separated")
    g.add_argument("--dt", type=float)
    g.add_argument("--realizations", type=int)
    g.add_argument("--theta", type=float)
    g.add_argument("--window", type=_floats, help="t_a,t_b")
    g.add_argument("--system", choices=("chain", "map"))
    g.add_argument("--spectrum-L", dest="spectrum_L", type=int)
    g = ap.add_argument_group("sweep")
    g.add_argument("--inner", choices=TASKS[:-1])
    g.add_argument("--axis")
    g.add_argument("--values", type=_floats)
    return ap


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    # accept the flat flag form, a RunConfig, or a run.json record holding one
    if isinstance(data.get("config"), dict) and "task" in data["config"]:
        data = data["config"]
    if "parameters" in data:
        flat = dict(data["parameters"])
        flat.update({k: v for k, v in data.items() if k != "parameters"})
        data = flat
    return {k.replace("-", "_"): v for k, v in data.items()}


def merge(argv=None) -> dict:
    """Flat settings: config file values overlaid by explicit flags."""
    ns = vars(build_parser().parse_args(argv))
    settings = _load_config(ns.pop("config")) if "config" in ns else {}
    settings.update(ns)
    return settings


def split(settings: dict):
    """(task, params, run-level options, sweep options)."""
    settings = dict(settings)
    task = settings.pop("task", None)
    if task is None:
        raise ConfigError("no task given (positional argument or 'task' in --config)")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    run = {k: settings.pop(k) for k in RUN_KEYS if k in settings}
    sweep = {k: settings.pop(k) for k in SWEEP_KEYS if k in settings}
    if task != "sweep" and sweep:
        raise ConfigError(f"{', '.join(sorted(sweep))} only apply to the sweep task")
    return task, settings, run, sweep


def execute(settings: dict) -> int:
    task, given, run, sweep = split(settings)
    seed = int(run.get("seed", 0))
    workers = int(run.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    out = Path(run.get("output_dir") or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)

    if task == "sweep":
        inner = sweep.get("inner")
        if inner is None:
            raise ConfigError("sweep needs --inner TASK")
        if "axis" not in sweep or "values" not in sweep:
            raise ConfigError("sweep needs --axis and --values")
        axis = sweep["axis"]
        values = sweep["values"]
        if not isinstance(values, list):
            values = [values]
        SweepSpec(axis, values, RunConfig(inner, given, seed, str(out), workers))
        if not _sweepable(inner, axis):
            raise ConfigError(f"{axis!r} is not a numeric parameter of {inner}")
        given = dict(given)
        given.setdefault(axis, values[0])
    else:
        inner = task
    params = resolve(inner, given)
    if task != "sweep":
        axis = primary_axis(inner, params)
        values = [params[axis]]

    values, jobs = plan(inner, params, axis, values, seed)
    results = _dispatch([job for _, _, job in jobs], workers)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    failures = write_outputs(inner, params, axis, values, seed, jobs, results, out,
                             plot=bool(run.get("plot", False)))

    parameters = {k: v for k, v in params.items() if not (task == "sweep" and k == axis)}
    if task == "sweep":
        parameters.update(inner=inner, axis=axis, values=values)
    config = RunConfig(task, parameters, seed, str(out), workers, bool(run.get("plot", False)))
    hashed = {k: v for k, v in config.to_json().items() if k not in ("output_dir", "workers", "plot")}
    record = {"config": config.to_json(), "config_hash": config_hash(hashed),
              "code_version": __version__, "axis": axis, "values": values,
              "cells": len(jobs), "failed": len(failures)}
    write_json(out / "run.json", record)
    if failures:
        write_json(out / "failures.json", {"failures": failures})
        print(f"otoclab: {len(failures)} of {len(jobs)} cells failed; see {out / 'failures.json'}",
              file=sys.stderr)
        return EXIT_NUMERIC
    failed_manifest = out / "failures.json"
    if failed_manifest.exists():
        failed_manifest.unlink()
    return EXIT_OK


def _sweepable(task, axis) -> bool:
    if axis not in DEFAULTS[task] or axis == "realizations":
        return False
    default = DEFAULTS[task][axis]
    return default is None or isinstance(default, (int, float)) and not isinstance(default, bool)


def _dispatch(jobs, workers):
    if workers == 1 or len(jobs) <= 1:
        return [run_cell(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so the reduction below is deterministic
        return list(pool.map(run_cell, jobs, chunksize=1))


def main(argv=None) -> int:
    try:
        settings = merge(argv)
        return execute(settings)
    except ConfigError as exc:
        print(f"otoclab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
