"""Outer planning loop: task layer, motion layer and coordination with feedback between them."""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .motion.eager import build_eager_motion_hypergraph, combined_query_baseline
from .motion.query import MotionParams, MotionStore, TaskConstraintFeedback, query_motion_plan
from .resolve import resolve_all, serialize_schedule
from .task_conflict import (ExpandTaskSpace, NewConstraint, NoIntersectionError, ResampledHandover, ResampledPose,
                            UnresolvableTaskConflict, _vertex_entity, assign_transition_configs,
                            detect_task_conflicts, resolve_task_conflict, sample_moveout)
from .task_query import ConstraintSet, query_task_plan
from .task_space import InvalidPoseError, TaskSpace, UnsolvableInputError, build_task_hypergraph

log = logging.getLogger("lazydash")

SOLVED, INFEASIBLE, BUDGET = "Solved", "Infeasible", "BudgetExhausted"
LAZY, EAGER = "lazy", "eager"
LEVELS = {"error": 40, "info": 20, "debug": 10}

# rng stream ids, one per module
_TASK, _MOTION, _RESOLVE, _EXPAND, _EAGER = 1, 2, 3, 4, 5


@dataclass
class Budgets:
    outer_iters: int = 50
    task_rounds: int = 20
    task_expansions: int = 100_000
    resolve_iters: int = 500
    max_moveouts: int = 3          # per object
    wall_clock: float = 300.0      # seconds; a safety net, not part of the deterministic contract
    baseline_expansions: int = 20_000


@dataclass
class RunReport:
    scenario: str
    mode: str
    seed: int
    outcome: str
    reason: str = ""
    schedule: Optional[dict] = None
    metrics: dict = field(default_factory=dict)
    iterations: list = field(default_factory=list)
    validation: Optional[dict] = None
    timings: dict = field(default_factory=dict)   # wall times, kept out of the serialized report

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "mode": self.mode, "seed": self.seed, "outcome": self.outcome,
                "reason": self.reason, "metrics": self.metrics, "iterations": self.iterations,
                "validation": self.validation, "schedule": self.schedule}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


class Trace:
    def __init__(self, level: Optional[str] = None):
        name = (level or os.environ.get("LAZYDASH_LOG", "info")).lower()
        self.level = LEVELS.get(name, 20)
        self.events: list[dict] = []
        self.tally: dict[str, int] = {}   # counters kept whatever the level

    def bump(self, name: str, n: int = 1) -> None:
        self.tally[name] = self.tally.get(name, 0) + n

    def add(self, it: int, event: str, level: str = "info", **data) -> None:
        self.bump("event:" + event)
        if LEVELS[level] < self.level:
            return
        d = {"iter": it, "event": event}
        d.update(data)
        self.events.append(d)
        log.log(LEVELS[level], "%s %s", event, data if LEVELS[level] <= 10 else "")

    def count(self, event: str) -> int:
        """Occurrences of ``event``, including ones filtered out by the level."""
        return self.tally.get("event:" + event, 0)

    def dumps(self) -> str:
        return json.dumps(self.events, sort_keys=True, indent=1)


@dataclass
class PlanResult:
    report: RunReport
    trace: Trace
    ts: Optional[TaskSpace] = None
    store: Optional[MotionStore] = None


def _rng(seed: int, stream: int, it: int, *more) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream, it] + list(more))


def _counts(ts: TaskSpace, store: MotionStore) -> dict:
    vt, et = ts.counts()
    vm, em = store.counts()
    return {"V_T": vt, "E_T": et, "V_M": vm, "E_M": em}


def register_staging(ts: TaskSpace, staging: dict) -> None:
    for j in sorted(staging):
        ts.poses.register(j, staging[j], "moveout")
    ts.sync()


def _expand(ts: TaskSpace, obj: int, rng, trace: Trace, it: int, budgets: Budgets, why: str) -> bool:
    if len(ts.poses.moveouts(obj)) >= budgets.max_moveouts + (1 if ts.world.objects[obj].via else 0):
        return False
    before = ts.counts()
    p = sample_moveout(ts, obj, rng)
    if p is None:
        return False
    try:
        pid = ts.expand_with_pose(obj, p)
    except InvalidPoseError:
        return False
    trace.add(it, "ExpandTaskSpace", obj=obj, pose=pid, point=list(p), reason=why,
              counts_before=list(before), counts_after=list(ts.counts()))
    return True


def _objects_in(ts: TaskSpace, constraints: ConstraintSet) -> list[int]:
    out = set()
    for c in constraints:
        for v in (c.v_pre, c.v_post):
            ent = _vertex_entity(ts.vertex(v))
            if ent is not None and ent[0] == "object":
                out.add(ent[1])
    return sorted(out)


def _validate(scenario, schedule: dict, dt: float) -> dict:
    from .harness.validate import validate_schedule
    res = validate_schedule(scenario, schedule, dt)
    return res.to_dict()


def _finish(report: RunReport, trace: Trace, ts, store, timers, t0, it, extra=None) -> None:
    m = dict(_counts(ts, store)) if ts is not None and store is not None else {}
    if store is not None:
        m.update(store.counters.to_dict())
    m["outer_iterations"] = it
    m["constraints"] = trace.count("NewConstraint") + trace.count("TaskConstraintFeedback")
    m["expansions"] = trace.count("ExpandTaskSpace")
    m["query_expansions"] = trace.tally.get("query_expansions", 0)
    if extra:
        m.update(extra)
    report.metrics = m
    timers["total"] = time.perf_counter() - t0
    report.timings = {k: round(v, 6) for k, v in timers.items()}


def plan(scenario, mode: str = LAZY, seed: int = 0, budgets: Optional[Budgets] = None,
         params: Optional[MotionParams] = None, log_level: Optional[str] = None) -> PlanResult:
    """Plan a scenario end to end. Deterministic per (scenario, mode, seed)."""
    budgets = budgets or Budgets()
    params = params or MotionParams()
    trace = Trace(log_level)
    report = RunReport(scenario.name, mode, int(seed), BUDGET)
    timers = {"build": 0.0, "query": 0.0, "resolve": 0.0, "validate": 0.0}
    t0 = time.perf_counter()
    world = scenario.world
    if mode not in (LAZY, EAGER):
        raise ValueError(f"unknown mode {mode!r}")
    tb = time.perf_counter()
    try:
        ts = build_task_hypergraph(world)
    except UnsolvableInputError as e:
        report.outcome, report.reason = INFEASIBLE, str(e)
        trace.add(0, "Infeasible", "error", reason=str(e))
        _finish(report, trace, None, None, timers, t0, 0)
        return PlanResult(report, trace)
    register_staging(ts, scenario.staging)
    store = MotionStore(world, seed, params, eager=(mode == EAGER))
    timers["build"] += time.perf_counter() - tb
    dt = store.ds / max(r.v for r in world.robots)
    trace.add(0, "Build", counts=_counts(ts, store), mode=mode)
    if mode == LAZY:
        _plan_lazy(scenario, ts, store, seed, budgets, trace, report, timers, t0, dt)
    else:
        _plan_eager(scenario, ts, store, seed, budgets, trace, report, timers, t0, dt)
    return PlanResult(report, trace, ts, store)


def _record_iteration(report: RunReport, ts, store, it: int) -> None:
    c = _counts(ts, store)
    c["iter"] = it
    report.iterations.append(c)


def _accept(scenario, report, trace, rr, timers, it, dt, ts, store, t0) -> None:
    sched = serialize_schedule(rr.timed, dt)
    tv = time.perf_counter()
    val = _validate(scenario, sched, dt)
    timers["validate"] += time.perf_counter() - tv
    report.schedule = sched
    report.validation = val
    if val["ok"]:
        report.outcome = SOLVED
        trace.add(it, "Solved", makespan=sched["makespan"])
    else:
        report.outcome, report.reason = INFEASIBLE, "replay validation failed"
        trace.add(it, "ValidationFailed", "error", violations=val["violations"][:10])
    _finish(report, trace, ts, store, timers, t0, it + 1,
            {"makespan": sched["makespan"], **{f"resolve_{k}": v for k, v in rr.stats.items()}})


def _task_fixed_point(ts, C, seed, it, budgets, trace, prev, params):
    """Query, anchor, detect and resolve task conflicts until none remain.

    Returns (anchored schedule | None, status).
    """
    rng = _rng(seed, _TASK, it)
    rng_x = _rng(seed, _EXPAND, it)
    for rnd in range(budgets.task_rounds):
        q = query_task_plan(ts, C, budgets.task_expansions)
        trace.bump("query_expansions", q.expansions)
        trace.add(it, "TaskQuery", "debug", round=rnd, status=q.status, expansions=q.expansions,
                  arcs=[ts.arc(a).signature for a in q.schedule.arcs] if q.ok else None)
        if not q.ok:
            grown = False
            for j in (_objects_in(ts, C) or [o.id for o in ts.world.objects]):
                grown |= _expand(ts, j, rng_x, trace, it, budgets, f"task query {q.status}")
            if not grown:
                return None, "task-exhausted"
            continue
        try:
            anchored = assign_transition_configs(ts, q.schedule, rng, params.n_h, previous=prev)
        except NoIntersectionError as e:
            return None, f"no-handover:{e}"
        prev = anchored
        conflicts = detect_task_conflicts(ts, anchored)
        if not conflicts:
            return anchored, "ok"
        progressed = False
        for c in conflicts:
            trace.add(it, "TaskConflict", "debug", conflict=c.to_dict(ts))
            res = resolve_task_conflict(ts, c, anchored, C, rng, params.n_h)
            if isinstance(res, ResampledPose):
                ts.poses.move(res.obj, res.pose, res.point)
                trace.add(it, "ResampledPose", obj=res.obj, pose=res.pose, point=list(res.point))
                progressed = True
                break   # other conflicts were computed against the old pose
            if isinstance(res, ResampledHandover):
                anchored.anchors[res.index].point = tuple(res.point)
                trace.add(it, "ResampledHandover", index=res.index, point=list(res.point))
                progressed = True
                continue
            if isinstance(res, NewConstraint):
                if C.add(res.constraint):
                    trace.add(it, "NewConstraint", constraint=res.constraint.to_dict(ts), source="task-conflict",
                              conflict=c.kind)
                    progressed = True
                continue
            if isinstance(res, ExpandTaskSpace):
                if res.constraint is not None and C.add(res.constraint):
                    trace.add(it, "NewConstraint", constraint=res.constraint.to_dict(ts), source="task-conflict",
                              conflict=c.kind)
                    progressed = True
                progressed |= _expand(ts, res.obj, rng_x, trace, it, budgets, "constraint cycle")
        if not progressed:
            return None, "task-stuck"
    return None, "fixed-point-limit"


def _plan_lazy(scenario, ts, store, seed, budgets, trace, report, timers, t0, dt):
    C = ConstraintSet()
    cm: list = []
    prev = None
    params = store.params
    for it in range(budgets.outer_iters):
        if time.perf_counter() - t0 > budgets.wall_clock:
            report.reason = "wall-clock budget"
            break
        tq = time.perf_counter()
        try:
            anchored, status = _task_fixed_point(ts, C, seed, it, budgets, trace, prev, params)
        except UnresolvableTaskConflict as e:
            timers["query"] += time.perf_counter() - tq
            report.outcome, report.reason = INFEASIBLE, str(e)
            trace.add(it, "Infeasible", "error", reason=str(e))
            _record_iteration(report, ts, store, it)
            _finish(report, trace, ts, store, timers, t0, it + 1)
            return
        if anchored is None:
            timers["query"] += time.perf_counter() - tq
            _record_iteration(report, ts, store, it)
            if status in ("task-exhausted", "task-stuck") or status.startswith("no-handover"):
                # running out of move-out poses is a budget, not a proof of infeasibility
                outcome = INFEASIBLE if status.startswith("no-handover") else BUDGET
                report.outcome, report.reason = outcome, status
                trace.add(it, outcome, "error", reason=status)
                _finish(report, trace, ts, store, timers, t0, it + 1)
                return
            trace.add(it, "TaskFixedPointLimit", reason=status)
            continue
        prev = anchored
        trace.add(it, "TaskPlan", arcs=[ts.arc(a).signature for a in anchored.schedule.arcs])
        out = query_motion_plan(ts, anchored, store, cm, _rng(seed, _MOTION, it))
        timers["query"] += time.perf_counter() - tq
        if isinstance(out, TaskConstraintFeedback):
            added = C.add(out.constraint)
            trace.add(it, "TaskConstraintFeedback", feedback=out.to_dict(ts), source="motion", new=added)
            if not added:
                grown = False
                for j in _objects_in(ts, ConstraintSet([out.constraint])):
                    grown |= _expand(ts, j, _rng(seed, _EXPAND, it, 1), trace, it, budgets, "repeated feedback")
                if not grown:
                    report.outcome, report.reason = BUDGET, "motion feedback made no progress"
                    _record_iteration(report, ts, store, it)
                    _finish(report, trace, ts, store, timers, t0, it + 1)
                    return
            _record_iteration(report, ts, store, it)
            continue
        trace.add(it, "MotionPlan", "debug", moves=len(out.moves))
        tr = time.perf_counter()
        rr = resolve_all(out, ts, store, _rng(seed, _RESOLVE, it), dt, budgets.resolve_iters)
        timers["resolve"] += time.perf_counter() - tr
        for ev in rr.events:
            trace.add(it, ev["event"], "debug", **{k: v for k, v in ev.items() if k != "event"})
        trace.add(it, "Resolve", status=rr.status, stats=rr.stats)
        _record_iteration(report, ts, store, it)
        if rr.status == "valid":
            _accept(scenario, report, trace, rr, timers, it, dt, ts, store, t0)
            return
        if rr.status == "motion_constraint":
            for m in rr.motion_constraints:
                cm.append(m)
                trace.add(it, "MotionConstraint", constraint=m.to_dict())
            continue
        if rr.status == "task_constraint":
            for fb in rr.task_feedback:
                added = C.add(fb.constraint)
                trace.add(it, "TaskConstraintFeedback", feedback=fb.to_dict(ts), source="resolve", new=added)
            continue
        report.reason = "resolve iteration limit"
        trace.add(it, "ResolveLimit", "error")
        break
    report.outcome = BUDGET
    if not report.reason:
        report.reason = "outer iteration limit"
    _finish(report, trace, ts, store, timers, t0, len(report.iterations))


def _plan_eager(scenario, ts, store, seed, budgets, trace, report, timers, t0, dt):
    tb = time.perf_counter()
    rng_x = _rng(seed, _EXPAND, 0)
    # the baseline gets its whole task space upfront, including one move-out pose per object
    for o in ts.world.objects:
        _expand(ts, o.id, rng_x, trace, 0, budgets, "baseline upfront")
    model = build_eager_motion_hypergraph(ts, store, _rng(seed, _EAGER, 0))
    timers["build"] += time.perf_counter() - tb
    trace.add(0, "EagerBuild", counts=_counts(ts, store), transitions=model.n_transitions())
    C = ConstraintSet()
    cm: list = []
    for it in range(budgets.outer_iters):
        if time.perf_counter() - t0 > budgets.wall_clock:
            report.reason = "wall-clock budget"
            break
        tq = time.perf_counter()
        res = combined_query_baseline(ts, store, model, C, cm, _rng(seed, _MOTION, it), budgets.baseline_expansions)
        timers["query"] += time.perf_counter() - tq
        trace.bump("query_expansions", res.expansions)
        trace.add(it, "BaselineQuery", status=res.status, expansions=res.expansions, path_queries=res.path_queries)
        if res.schedule is None and res.status == "exhausted":
            # the precomputed poses admit no plan: add move-outs, rebuild, retry
            rng_x = _rng(seed, _EXPAND, it + 1)
            grew = [_expand(ts, o.id, rng_x, trace, it, budgets, "baseline exhausted") for o in ts.world.objects]
            if any(grew):
                _record_iteration(report, ts, store, it)
                tb = time.perf_counter()
                model = build_eager_motion_hypergraph(ts, store, _rng(seed, _EAGER, it + 1))
                timers["build"] += time.perf_counter() - tb
                trace.add(it, "EagerBuild", counts=_counts(ts, store), transitions=model.n_transitions())
                continue
        if res.schedule is None:
            _record_iteration(report, ts, store, it)
            report.outcome = BUDGET
            report.reason = f"baseline query {res.status}"
            _finish(report, trace, ts, store, timers, t0, it + 1)
            return
        tr = time.perf_counter()
        rr = resolve_all(res.schedule, ts, store, _rng(seed, _RESOLVE, it), dt, budgets.resolve_iters)
        timers["resolve"] += time.perf_counter() - tr
        for ev in rr.events:
            trace.add(it, ev["event"], "debug", **{k: v for k, v in ev.items() if k != "event"})
        trace.add(it, "Resolve", status=rr.status, stats=rr.stats)
        _record_iteration(report, ts, store, it)
        if rr.status == "valid":
            _accept(scenario, report, trace, rr, timers, it, dt, ts, store, t0)
            return
        if rr.status == "motion_constraint":
            for m in rr.motion_constraints:
                cm.append(m)
                trace.add(it, "MotionConstraint", constraint=m.to_dict())
            continue
        if rr.status == "task_constraint":
            for fb in rr.task_feedback:
                added = C.add(fb.constraint)
                trace.add(it, "TaskConstraintFeedback", feedback=fb.to_dict(ts), source="resolve", new=added)
            continue
        report.reason = "resolve iteration limit"
        break
    report.outcome = BUDGET
    if not report.reason:
        report.reason = "outer iteration limit"
    _finish(report, trace, ts, store, timers, t0, len(report.iterations))
