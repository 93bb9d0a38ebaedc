"""Acceptance criteria, one test per criterion.

Every test records a single PASS/FAIL line; the lines are printed together in
the terminal summary (see conftest.py). Run only this file with

    pytest tests/test_acceptance.py -m acceptance
"""
import json
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from lazydash.geometry import collides
from lazydash.harness import generate_scenario, validate_schedule
from lazydash.harness.bench import expand_suite
from lazydash.motion.query import MotionStore, element_key, sample_disc
from lazydash.motion.roadmap import eager_path, lazy_path
from lazydash.planner import plan
from lazydash.resolve import dependency_graph
from lazydash.task_query import frontier_partition_ok, query_task_plan, schedule_is_sound
from lazydash.task_space import build_task_hypergraph
from conftest import make_world

from test_geometry import _random_shape, _sampled_distance
from test_hypergraph import _brute_forward_star, _random_graph
from test_resolve import _acyclic_oracle, _solved_schedules

pytestmark = pytest.mark.acceptance

SUITES = Path(__file__).resolve().parent.parent / "suites"
LINES: list[str] = []
KEYS = ("V_T", "E_T", "V_M", "E_M")


def record(n: int, ok: bool, detail: str) -> bool:
    LINES.append(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def _run(run):
    sc = run.scenario()
    t = time.perf_counter()
    pr = plan(sc, run.mode, run.seed, log_level="info")
    wall = time.perf_counter() - t
    r = pr.report
    valid = None
    if r.outcome == "Solved":
        valid = validate_schedule(sc, r.schedule, r.schedule["dt"]).ok
    return {"family": run.family, "params": dict(run.params), "mode": run.mode, "seed": run.seed,
            "name": sc.name, "outcome": r.outcome, "valid": valid, "metrics": r.metrics,
            "plan_time": sum(r.timings.get(k, 0.0) for k in ("build", "query", "resolve")),
            "wall": wall, "iterations": r.iterations}


@pytest.fixture(scope="module")
def full_suite():
    runs = expand_suite(json.loads((SUITES / "full.json").read_text()))
    t = time.perf_counter()
    rows = [_run(r) for r in runs]
    return rows, time.perf_counter() - t


def test_c1_every_solved_run_validates(full_suite):
    rows, elapsed = full_suite
    families = {r["family"] for r in rows}
    solved = [r for r in rows if r["outcome"] == "Solved"]
    bad = [r["name"] + "/" + r["mode"] for r in solved if not r["valid"]]
    outcomes = Counter(r["outcome"] for r in rows)
    ok = len(rows) >= 200 and len(families) >= 5 and not bad and elapsed <= 1800
    unsolved = [r["name"] + "/" + r["mode"] for r in rows if r["outcome"] != "Solved"]
    record(1, ok, f"{len(rows)} runs over {len(families)} families, {len(solved) - len(bad)}/{len(solved)} "
                  f"solved runs pass replay; outcomes {dict(outcomes)}; suite {elapsed:.0f}s (limit 1800s)"
                  + (f"; unsolved {', '.join(unsolved)}" if unsolved else ""))
    assert ok, bad


def _sorting_medians(rows):
    out = {}
    for r in rows:
        if r["family"] != "sorting" or r["params"].get("robots") != 4:
            continue
        out.setdefault(r["params"]["objects"], {"lazy": [], "eager": []})[r["mode"]].append(r)
    return dict(sorted(out.items()))


def test_c2_lazy_representation_smaller(full_suite):
    rows, _ = full_suite
    med = _sorting_medians(rows)
    assert sorted(med) == [2, 4, 6, 8]
    ok, parts = True, []
    for key in ("validated_edges", "E_M"):
        ratios = []
        for n, by in med.items():
            lz = float(np.median([r["metrics"][key] for r in by["lazy"]]))
            eg = float(np.median([r["metrics"][key] for r in by["eager"]]))
            ratios.append(lz / eg)
            ok &= lz <= eg
        ok &= ratios[-1] <= 0.5
        ok &= all(b <= a for a, b in zip(ratios[:-1], ratios[1:]))
        parts.append(f"{key} lazy/eager " + " ".join(f"{x:.3f}" for x in ratios))
    ok &= all(r["outcome"] == "Solved" for by in med.values() for m in by.values() for r in m)
    record(2, ok, "objects 2,4,6,8: " + "; ".join(parts))
    assert ok


def test_c3_lazy_faster(full_suite):
    rows, _ = full_suite
    med = _sorting_medians(rows)
    ratios, ok = [], True
    for n, by in med.items():
        lz = float(np.median([r["plan_time"] for r in by["lazy"]]))
        eg = float(np.median([r["plan_time"] for r in by["eager"]]))
        ratios.append(lz / eg)
        ok &= lz <= eg
    ok &= ratios[-1] <= 0.5
    slowest = max(r["wall"] for by in med.values() for m in by.values() for r in m)
    ok &= slowest <= 60
    record(3, ok, "median time lazy/eager " + " ".join(f"{x:.3f}" for x in ratios)
           + f"; slowest run {slowest:.1f}s (limit 60s)")
    assert ok


def _random_walled_world(rng):
    walls = []
    for _ in range(int(rng.integers(1, 5))):
        a = rng.uniform(-0.9, 0.9, 2)
        walls.append((tuple(a), tuple(a + rng.uniform(-0.5, 0.5, 2))))
    return make_world([((0.0, 0.0), 1.0, 0.04, 1.0)], [], [], walls=walls, bounds=(-1.2, -1.2, 1.2, 1.2))


def test_c4_lazy_eager_path_equivalence():
    agree = total = 0
    for k in range(100):
        rng = np.random.default_rng([4, k])
        w = _random_walled_world(rng)
        seed = int(rng.integers(1 << 30))
        rl = MotionStore(w, seed).roadmap(element_key(0))
        re = MotionStore(w, seed, eager=True).roadmap(element_key(0))
        s, g = sample_disc((0.0, 0.0), 1.0, rng, 2)
        a = lazy_path(rl, s, g, repair_rounds=0)
        b = eager_path(re, s, g)
        same = a.ok == b.ok and rl.counts() == re.counts()
        if same and a.ok:
            same = a.vertices == b.vertices and np.array_equal(a.path, b.path)
        off_path = re.n_edges - (len(b.vertices) - 1 if b.ok else 0)
        if off_path > 1:
            same &= a.validated < b.validated
        agree += same
        total += 1
    ok = agree == total == 100
    record(4, ok, f"{agree}/{total} queries agree (success, path, fewer validations)")
    assert ok


def _handover_objects(events):
    return {e["obj"] for e in events if e["action"] == "Handover"}


def test_c5_wall_handover_and_feedback():
    solved = good = 0
    slowest = 0.0
    notes = []
    for seed in range(10):
        sc = generate_scenario("wall", {}, seed)
        t = time.perf_counter()
        pr = plan(sc, "lazy", seed, log_level="info")
        slowest = max(slowest, time.perf_counter() - t)
        r = pr.report
        if r.outcome != "Solved":
            notes.append(f"seed {seed} {r.outcome}")
            continue
        solved += 1
        wx = sc.meta["wall_x"]
        crossing = {o.id for o in sc.world.objects
                    if any((o.start[0] - x) * (o.goal[0] - x) < 0 for x in wx)}
        handed = crossing <= _handover_objects(r.schedule["events"])
        feedback = True
        if sc.meta["planted"]:
            feedback = pr.trace.count("TaskConstraintFeedback") + pr.trace.count("NewConstraint") > 0
        good += handed and feedback and validate_schedule(sc, r.schedule, r.schedule["dt"]).ok
    ok = solved == good == 10 and slowest <= 120
    record(5, ok, f"{solved}/10 solved, {good}/10 with handovers and feedback; slowest {slowest:.1f}s (limit 120s)"
           + (f"; {', '.join(notes)}" if notes else ""))
    assert ok


def test_c6_shelfwall_ordering():
    good = 0
    for seed in range(10):
        sc = generate_scenario("shelfwall", {}, seed)
        pr = plan(sc, "lazy", seed, log_level="info")
        r = pr.report
        if r.outcome != "Solved":
            continue
        place = {e["obj"]: e["t"] for e in r.schedule["events"] if e["action"] == "Place"}
        ordered = all(place[int(rear)] < place[front] for rear, front in sc.meta["blocks"].items())
        frontier = any(e["event"] == "NewConstraint" and e["constraint"]["kind"] == "Frontier"
                       for e in pr.trace.events)
        good += ordered and frontier
    ok = good == 10
    record(6, ok, f"{good}/10 seeds place rear before front with a Frontier constraint in the trace")
    assert ok


def test_c7_swap_non_monotone():
    good = 0
    slowest = 0.0
    for seed in range(10):
        t = time.perf_counter()
        pr = plan(generate_scenario("swap", {}, seed), "lazy", seed, log_level="info")
        slowest = max(slowest, time.perf_counter() - t)
        r = pr.report
        if r.outcome != "Solved":
            continue
        expansions = [e for e in pr.trace.events if e["event"] == "ExpandTaskSpace"]
        grows = all(e["counts_after"][0] > e["counts_before"][0] and e["counts_after"][1] > e["counts_before"][1]
                    for e in expansions)
        acts = Counter(e["obj"] for e in r.schedule["events"] if e["action"] in ("Pick", "Place"))
        good += bool(expansions) and grows and max(acts.values()) >= 3
    ok = good == 10 and slowest <= 60
    record(7, ok, f"{good}/10 seeds solved with a move-out; slowest {slowest:.1f}s (limit 60s)")
    assert ok


def test_c8_monotone_expansion(full_suite):
    rows, _ = full_suite
    checked = bad = 0
    for r in rows:
        its = r["iterations"]
        for a, b in zip(its[:-1], its[1:]):
            checked += 1
            bad += any(b[k] < a[k] for k in KEYS)
    ok = bad == 0
    record(8, ok, f"{bad} violations over {checked} iteration steps in {len(rows)} runs")
    assert ok


def test_c9_determinism():
    runs = expand_suite(json.loads((SUITES / "full.json").read_text()))
    rng = np.random.default_rng(9)
    picks = [runs[i] for i in rng.choice(len(runs), 20, replace=False)]
    mismatches = []
    for run in picks:
        sc = run.scenario()
        a = plan(sc, run.mode, run.seed, log_level="debug")
        b = plan(run.scenario(), run.mode, run.seed, log_level="debug")
        if a.report.dumps() != b.report.dumps() or a.trace.dumps() != b.trace.dumps():
            mismatches.append(f"{sc.name}/{run.mode}")
    ok = not mismatches
    record(9, ok, f"{20 - len(mismatches)}/20 triples byte-identical" + (f"; {mismatches}" if mismatches else ""))
    assert ok


def test_c10_unit_oracles():
    rng = np.random.default_rng(10)
    trials, agree = 10_000, 0
    for k in range(trials):
        a = _random_shape(rng, "capsule")
        b = _random_shape(rng, ["disc", "capsule"][k % 2])
        d = _sampled_distance(a, b, 2000)
        step = np.hypot(*np.subtract(a.b, a.a)) / 1999
        agree += ((d < a.radius + b.radius) == collides(a, b)) or abs(d - (a.radius + b.radius)) <= step
    geom = agree / trials

    star = 0
    for k in range(100):
        g_rng = np.random.default_rng([10, k])
        g = _random_graph(g_rng, int(g_rng.integers(1, 40)), int(g_rng.integers(0, 200)))
        star += all(g.forward_star(v) == _brute_forward_star(g, v) for v in g.vertices())

    acyclic = 0
    schedules = list(_solved_schedules(100))
    for sc, ts, store, opt in schedules:
        dep = dependency_graph(opt)
        acyclic += _acyclic_oracle(len(dep.nodes), dep.edges())

    replay = total = 0
    for seed in range(10):
        for fam, params in (("sorting", {"robots": 3, "objects": 3}), ("wall", {}), ("stocking", {}),
                            ("shelfwall", {}), ("lab", {})):
            ts = build_task_hypergraph(generate_scenario(fam, params, seed).world)
            res = query_task_plan(ts, budget=20_000)
            if not res.ok:
                continue
            total += 1
            replay += schedule_is_sound(ts, res.schedule) and all(
                frontier_partition_ok(ts, f) for f in res.schedule.frontiers[1:])

    ok = geom >= 0.999 and star == 100 and acyclic == len(schedules) == 100 and total > 0 and replay == total
    record(10, ok, f"collides {geom:.4f} agreement; forward_star {star}/100; acyclic {acyclic}/{len(schedules)}; "
                   f"frontier partition {replay}/{total}")
    assert ok
