"""Batch experiment runner: sweeps, seed fan-out, CSV and manifest output.

Examples::

    swarmsplit --suite basic --runs 50 --out results/basic
    swarmsplit --suite input --runs 10 --max-time-s 30 --jobs 4
    swarmsplit --config my.yaml --strategy distributed,local_only --workers 10,30
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import yaml

from . import __version__
from .core import ConfigError, SimConfig, Strategy, validate_config
from .engine import RunResult, run_simulation
from .metrics import mean_ci

log = logging.getLogger("swarmsplit")

AXES = ("workers", "arrival_ms", "area_km", "strategy", "early_exit")
ALL_STRATEGIES = tuple(s.value for s in Strategy)

KEY_COLUMNS = ["suite", "strategy", "workers", "arrival_ms", "area_km", "early_exit"]
METRIC_COLUMNS = [
    "completed",
    "mean_latency_s",
    "mean_remaining_gflops",
    "mean_transfer_s",
    "jain",
    "energy_per_task_j",
    "mean_acc",
    "fom",
]
RUN_COLUMNS = KEY_COLUMNS[:6] + ["seed"] + METRIC_COLUMNS
AGG_COLUMNS = KEY_COLUMNS + ["runs"] + [c for m in METRIC_COLUMNS for c in (m, f"{m}_ci95")]

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError("sweep", f"unknown axis {self.axis!r}")
        if not self.values:
            raise ConfigError(self.axis, "sweep values must be non-empty")
        for v in self.values:
            _check_axis_value(self.axis, v)


def _check_axis_value(axis: str, value) -> None:
    if axis == "strategy":
        Strategy.parse(value)
    elif axis == "early_exit":
        if not isinstance(value, bool):
            raise ConfigError(axis, f"expected on/off, got {value!r}")
    elif axis == "workers":
        if int(value) != value or value <= 0:
            raise ConfigError(axis, f"worker count must be a positive integer, got {value!r}")
    elif not value > 0:
        raise ConfigError(axis, f"must be positive, got {value!r}")


def default_paper_suite() -> dict[str, list[SweepSpec]]:
    """The four evaluation suites: basic, input rate, area and early exit."""
    workers = SweepSpec("workers", (10, 20, 30, 40, 50))
    strategies = SweepSpec("strategy", ALL_STRATEGIES)
    return {
        "basic": [workers, SweepSpec("arrival_ms", (60,)), SweepSpec("early_exit", (False,)), strategies],
        "input": [SweepSpec("workers", (30,)), SweepSpec("arrival_ms", (60, 70, 80, 90, 100)),
                  SweepSpec("early_exit", (False,)), strategies],
        "area": [SweepSpec("workers", (30,)), SweepSpec("area_km", (10, 20, 30, 40)),
                 SweepSpec("early_exit", (False,)), strategies],
        "exit": [workers, SweepSpec("early_exit", (False, True)), strategies],
    }


@dataclass(frozen=True)
class Point:
    strategy: str
    workers: int
    arrival_ms: float
    area_km: float
    early_exit: bool

    def config(self, base: SimConfig) -> SimConfig:
        return base.with_overrides(
            worker_count=int(self.workers),
            task_arrival_mean_s=self.arrival_ms / 1000.0,
            area_side_m=self.area_km * 1000.0,
        )


def sweep_points(base: SimConfig, sweeps: Sequence[SweepSpec], base_strategy: str = "distributed",
                 base_early_exit: bool = False) -> list[Point]:
    """Cross product of the sweep axes; axes not swept take the base value."""
    axes = {
        "workers": (base.worker_count,),
        "arrival_ms": (base.task_arrival_mean_s * 1000.0,),
        "area_km": (base.area_side_m / 1000.0,),
        "early_exit": (base_early_exit,),
        "strategy": (base_strategy,),
    }
    for spec in sweeps:
        axes[spec.axis] = tuple(spec.values)
    points = []
    for w, a, km, ee, s in itertools.product(axes["workers"], axes["arrival_ms"], axes["area_km"],
                                             axes["early_exit"], axes["strategy"]):
        points.append(Point(Strategy.parse(s).value, int(w), float(a), float(km), bool(ee)))
    return points


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_row(suite: str, point: Point, seed: int, result: RunResult) -> dict:
    return {
        "suite": suite,
        "strategy": point.strategy,
        "workers": point.workers,
        "arrival_ms": point.arrival_ms,
        "area_km": point.area_km,
        "early_exit": point.early_exit,
        "seed": seed,
        "completed": result.completed_tasks,
        "mean_latency_s": result.mean_latency_s,
        "mean_remaining_gflops": result.mean_remaining_gflops,
        "mean_transfer_s": result.mean_transfer_time_s,
        "jain": result.jain_fairness,
        "energy_per_task_j": result.energy_per_task_j,
        "mean_acc": result.mean_accuracy,
        "fom": result.fom,
    }


def aggregate_row(suite: str, point: Point, rows: Sequence[dict]) -> dict:
    out = {
        "suite": suite,
        "strategy": point.strategy,
        "workers": point.workers,
        "arrival_ms": point.arrival_ms,
        "area_km": point.area_km,
        "early_exit": point.early_exit,
        "runs": len(rows),
    }
    for m in METRIC_COLUMNS:
        summary = mean_ci(float(r[m]) for r in rows)
        out[m] = summary.mean
        out[f"{m}_ci95"] = summary.ci95
    return out


def _simulate(job: tuple) -> RunResult:
    config, point, seed = job
    result = run_simulation(point.config(config), point.strategy, point.early_exit, seed=seed)
    # per-task detail is large and not needed for the CSVs
    result.completions, result.transfers = [], []
    return result


def _version() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, cwd=Path(__file__).resolve().parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def run_experiment(config: SimConfig, sweeps: Sequence[SweepSpec], out_dir: "str | Path", suite: str = "custom",
                   jobs: int = 1, base_strategy: str = "distributed", base_early_exit: bool = False) -> int:
    """Run every sweep point ``config.runs`` times and write the result files.

    Writes ``runs.csv``, ``aggregate.csv`` and ``manifest.json`` into
    ``out_dir``. Returns a process exit status.
    """
    try:
        # the base alone may be invalid (e.g. worker count) when the sweep overrides it
        points = sweep_points(config, sweeps, base_strategy, base_early_exit)
        for p in points:
            validate_config(p.config(config))
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    out = Path(out_dir)
    started = time.time()
    seeds = [config.seed + k for k in range(config.runs)]
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "runs.csv", "w", newline="") as runs_f, open(out / "aggregate.csv", "w", newline="") as agg_f:
            runs_w = csv.DictWriter(runs_f, RUN_COLUMNS, lineterminator="\n")
            agg_w = csv.DictWriter(agg_f, AGG_COLUMNS, lineterminator="\n")
            runs_w.writeheader()
            agg_w.writeheader()
            pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
            try:
                for point in points:
                    job_list = [(config, point, s) for s in seeds]
                    results = list(pool.map(_simulate, job_list)) if pool else [_simulate(j) for j in job_list]
                    rows = [run_row(suite, point, s, r) for s, r in zip(seeds, results)]
                    for row in rows:
                        runs_w.writerow({k: _fmt(v) for k, v in row.items()})
                    agg_w.writerow({k: _fmt(v) for k, v in aggregate_row(suite, point, rows).items()})
                    runs_f.flush()
                    agg_f.flush()
                    log.info("%s %s: fom=%.3f", suite, point, aggregate_row(suite, point, rows)["fom"])
            finally:
                if pool:
                    pool.shutdown()
        manifest = {
            "suite": suite,
            "version": _version(),
            "config": asdict(config),
            "sweeps": [{"axis": s.axis, "values": list(s.values)} for s in sweeps],
            "points": len(points),
            "seeds": seeds,
            "wall_time_s": time.time() - started,
            "columns": {"runs": RUN_COLUMNS, "aggregate": AGG_COLUMNS},
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    return EXIT_OK


# --------------------------------------------------------------------------
# argument handling


def _list(cast):
    def parse(text: str):
        try:
            return tuple(cast(v) for v in text.split(",") if v.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc))
    return parse


def _on_off(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("on", "true", "1", "yes"):
        return True
    if text in ("off", "false", "0", "no"):
        return False
    raise ConfigError("early_exit", f"expected on/off, got {value!r}")


def load_config_file(path: "str | Path") -> tuple[dict, dict]:
    """Read a flat key/value YAML or JSON file.

    Returns ``(SimConfig overrides, extra keys)``; extra keys are
    ``strategy`` and ``early_exit``.
    """
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError("config", "config file must be a flat mapping")
    names = set(SimConfig.field_names())
    overrides, extras = {}, {}
    for key, value in data.items():
        if key in names:
            overrides[key] = value
        elif key in ("strategy", "early_exit"):
            extras[key] = value
        else:
            raise ConfigError(key, "unknown configuration key")
    for key, default in asdict(SimConfig()).items():
        if key in overrides and isinstance(default, float) and isinstance(overrides[key], (int, float)):
            overrides[key] = float(overrides[key])
    return overrides, extras


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swarmsplit", description=__doc__.splitlines()[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", type=Path, help="flat YAML/JSON file keyed by SimConfig field names")
    p.add_argument("--suite", choices=("basic", "input", "area", "exit", "custom"), default="custom")
    p.add_argument("--strategy", type=_list(str), help=f"comma list from {','.join(ALL_STRATEGIES)}")
    p.add_argument("--workers", type=_list(int))
    p.add_argument("--arrival-ms", type=_list(float))
    p.add_argument("--area-km", type=_list(float))
    p.add_argument("--early-exit", choices=("on", "off", "both"))
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-time-s", type=float)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        overrides, extras = load_config_file(args.config) if args.config else ({}, {})
        if args.runs is not None:
            overrides["runs"] = args.runs
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.max_time_s is not None:
            overrides["max_sim_time_s"] = args.max_time_s
        config = SimConfig(**overrides)

        sweeps = {s.axis: s for s in (default_paper_suite().get(args.suite, []))}
        base_strategy = Strategy.parse(extras.get("strategy", "distributed")).value
        base_early_exit = _on_off(extras.get("early_exit", False))
        flag_axes = {
            "strategy": args.strategy,
            "workers": args.workers,
            "arrival_ms": args.arrival_ms,
            "area_km": args.area_km,
        }
        for axis, values in flag_axes.items():
            if values is not None:
                sweeps[axis] = SweepSpec(axis, values)
        if args.early_exit is not None:
            sweeps["early_exit"] = SweepSpec(
                "early_exit", {"on": (True,), "off": (False,), "both": (False, True)}[args.early_exit])
        specs = list(sweeps.values())
    except (ConfigError, TypeError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return run_experiment(config, specs, args.out, suite=args.suite, jobs=args.jobs,
                          base_strategy=base_strategy, base_early_exit=base_early_exit)


if __name__ == "__main__":
    sys.exit(main())
