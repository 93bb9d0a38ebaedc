"""Benchmark suites: expand a suite file into runs, execute them, write CSV rows."""
from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Optional

from .generators import generate_scenario
from .scenario import ScenarioError, load_scenario

COLUMNS = ["scenario", "mode", "seed", "outcome", "build_time", "query_time", "resolve_time", "total_time",
           "V_T", "E_T", "V_M", "E_M", "validated_edges", "makespan"]


@dataclass(frozen=True)
class Run:
    family: Optional[str]
    params: tuple      # sorted (key, value) pairs, hashable
    path: Optional[str]
    mode: str
    seed: int

    def scenario(self):
        if self.path is not None:
            return load_scenario(self.path)
        return generate_scenario(self.family, dict(self.params), self.seed)


def _seeds(v) -> list[int]:
    if isinstance(v, int):
        return list(range(v))
    if isinstance(v, list) and all(isinstance(x, int) for x in v):
        return v
    raise ScenarioError("seeds must be an int count or a list of ints")


def expand_suite(suite: dict, base_dir=".") -> list[Run]:
    """Runs in suite order: entry, then parameter grid, then mode, then seed."""
    if not isinstance(suite, dict) or not isinstance(suite.get("runs"), list):
        raise ScenarioError("suite needs a 'runs' list")
    runs = []
    for k, ent in enumerate(suite["runs"]):
        if not isinstance(ent, dict):
            raise ScenarioError(f"suite entry {k} must be an object")
        modes = ent.get("modes", ["lazy", "eager"])
        if not modes or any(m not in ("lazy", "eager") for m in modes):
            raise ScenarioError(f"suite entry {k}: modes must be lazy and/or eager")
        seeds = _seeds(ent.get("seeds", 5))
        if "scenario" in ent:
            path = str(FsPath(base_dir) / ent["scenario"])
            runs += [Run(None, (), path, m, s) for m in modes for s in seeds]
            continue
        fam = ent.get("family")
        if fam is None:
            raise ScenarioError(f"suite entry {k}: give a family or a scenario path")
        grid = dict(ent.get("grid", {}))
        fixed = dict(ent.get("params", {}))
        keys = sorted(grid)
        for combo in itertools.product(*(grid[x] if isinstance(grid[x], list) else [grid[x]] for x in keys)):
            params = dict(fixed, **dict(zip(keys, combo)))
            runs += [Run(fam, tuple(sorted(params.items())), None, m, s) for m in modes for s in seeds]
    return runs


def run_one(run: Run) -> dict:
    from ..planner import plan   # imported here so worker processes pay for it lazily
    sc = run.scenario()
    r = plan(sc, run.mode, run.seed, log_level="error").report
    m, t = r.metrics, r.timings
    return {"scenario": sc.name, "mode": run.mode, "seed": run.seed, "outcome": r.outcome,
            "build_time": t.get("build", 0.0), "query_time": t.get("query", 0.0),
            "resolve_time": t.get("resolve", 0.0), "total_time": t.get("total", 0.0),
            "V_T": m.get("V_T", 0), "E_T": m.get("E_T", 0), "V_M": m.get("V_M", 0), "E_M": m.get("E_M", 0),
            "validated_edges": m.get("validated_edges", 0),
            "makespan": m.get("makespan") if m.get("makespan") is not None else ""}


def run_suite(runs: list[Run], workers: int = 1) -> list[dict]:
    if workers <= 1:
        return [run_one(r) for r in runs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(run_one, runs))   # map keeps suite order


def write_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=COLUMNS)
        w.writeheader()
        w.writerows(rows)


def load_suite(path) -> dict:
    try:
        return json.loads(FsPath(path).read_text())
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON ({e})") from e
