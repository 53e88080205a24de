"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``);
the summary lines appear at the end of the pytest report.
"""

from __future__ import annotations

import filecmp
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import properties
from agentplace.aco import AcoParams, MigrationPlan, alm_solve, alp_solve, migration_candidates
from agentplace.costs import NetGain, check_placement, ead_objective, net_gain
from agentplace.errors import Infeasible
from agentplace.experiment import run_policy
from agentplace.model import Placement
from agentplace.oracle import best_migration, brute_force_optimal
from agentplace.policies import POLICY_NAMES, make_policy
from agentplace.refine import RefinementRequest, evaluate, refine
from agentplace.scenario import generate_scenario, save_scenario
from agentplace.sim import simulate

from helpers import random_instance, random_migration_instance
from test_sim import golden_world

RESULTS: dict[int, str] = {}


def report(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} -- {detail}"
    RESULTS[n] = line
    print(line)


# ---------------------------------------------------------------- 1


def test_c1_oracle_optimality():
    start = time.perf_counter()
    hits = within = total = 0
    worst = 0.0
    seed = 0
    while total < 100:
        rng = np.random.default_rng(seed)
        seed += 1
        task, system = random_instance(rng, max_servers=4, max_agents=4)
        try:
            best = brute_force_optimal(task, system)
        except Infeasible:
            continue
        got = alp_solve(task, system, AcoParams(num_ants=50, iterations=100, seed=seed))
        assert not check_placement(task, got, system)
        gap = (got.score - best.score) / abs(best.score) if best.score else got.score - best.score
        worst = max(worst, gap)
        hits += gap <= 1e-9
        within += gap <= 0.02
        total += 1
    elapsed = time.perf_counter() - start
    ok = hits >= 95 and within == 100 and elapsed < 10
    report(1, "ALP vs oracle", ok, f"optimal {hits}/100, within 2% {within}/100, worst gap {worst:.2%}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 2 and 3 share one sweep

SWEEP_SEEDS = range(50)


@pytest.fixture(scope="module")
def sweep():
    start = time.perf_counter()
    records = {p: [] for p in POLICY_NAMES}
    for seed in SWEEP_SEEDS:
        scn = generate_scenario(8, 20, seed)
        for p in POLICY_NAMES:
            records[p].append(run_policy(scn, p))
    return records, time.perf_counter() - start


def test_c2_baseline_dominance(sweep):
    records, elapsed = sweep
    time_mean = {p: float(np.mean([r.mean("total_time_s") for r in recs])) for p, recs in records.items()}
    cost_mean = {p: float(np.mean([r.mean_resource_cost for r in recs])) for p, recs in records.items()}
    baselines = [p for p in POLICY_NAMES if p != "antllm"]
    best = min(time_mean[p] for p in baselines)
    improvement = (best - time_mean["antllm"]) / best
    order = ["antllm", "greedy", "polling", "random"]
    time_order = all(time_mean[a] <= time_mean[b] for a, b in zip(order, order[1:]))
    cost_order = all(cost_mean[a] <= cost_mean[b] for a, b in zip(order, order[1:]))
    dominates = all(time_mean["antllm"] <= time_mean[p] for p in baselines)
    ok = dominates and improvement >= 0.05 and time_order and cost_order and elapsed < 300
    detail = (
        "time " + " ".join(f"{p}={time_mean[p]:.3f}" for p in order)
        + " | cost " + " ".join(f"{p}={cost_mean[p]:.3f}" for p in order)
        + f" | improvement {improvement:.1%} | {elapsed:.0f}s"
    )
    report(2, "baseline dominance", ok, detail)
    assert ok


def test_c3_migration_rationality(sweep):
    records, _ = sweep
    executed = [m for recs in records.values() for r in recs for m in r.migrations]
    all_positive = all(m.net_s > 0 for m in executed)
    matched = cases = plans = 0
    seed = 0
    while cases < 100:
        inst = random_migration_instance(np.random.default_rng(5000 + seed), max_servers=7)
        seed += 1
        if inst is None:
            continue
        system, client, msg = inst
        ring, _ = migration_candidates(system, "x")
        assert len(ring) <= 6
        got = alm_solve("x", system, AcoParams(seed=seed), client, client_message_mb=msg)
        want = best_migration("x", system, client, client_message_mb=msg)
        cases += 1
        plans += want is not None
        matched += (got is None and want is None) or (
            got is not None and want is not None and got.target == want.target
        )
    ok = all_positive and matched == 100
    report(
        3,
        "migration rationality",
        ok,
        f"{len(executed)} executed migrations all net>0: {all_positive}; ALM = exhaustive in {matched}/100 ({plans} profitable)",
    )
    assert ok


# ---------------------------------------------------------------- 4


def test_c4_invariant_suite():
    checks = {
        "conservation": properties.test_capacity_conservation,
        "normalisation": properties.test_probability_normalisation,
        "pheromone floor": properties.test_pheromone_floor,
        "additivity": properties.test_latency_additivity,
        "self net_gain <= 0": properties.test_self_migration_never_profitable,
    }
    failed = []
    for name, check in checks.items():
        try:
            check()
        except Exception as exc:  # noqa: BLE001 - reported below
            failed.append(f"{name}: {type(exc).__name__}")
    ok = not failed
    report(4, "invariant suite", ok, f"{len(checks)} properties x {properties.CASES} cases; failures: {failed or 'none'}")
    assert ok


# ---------------------------------------------------------------- 5


class Adversary:
    """Emits infeasible, worse, malformed or crashing proposals."""

    def __init__(self, rng):
        self.rng = rng

    def propose(self, request):
        kind = int(self.rng.integers(8))
        plan = request.plan
        system = request.system
        servers = system.server_ids
        if kind == 0:
            raise RuntimeError("adversary crashed")
        if kind == 1:
            return None
        if isinstance(plan, MigrationPlan):
            targets = servers + ["ghost"]
            target = targets[int(self.rng.integers(len(targets)))]
            # claims an enormous gain whatever the target
            return MigrationPlan(plan.agent_id, plan.source, target, NetGain(1e9, 0.0, 0.0))
        agents = list(plan.assignments)
        if kind == 2:
            return Placement({a: servers[0] for a in agents}, True, -1e9)
        if kind == 3:
            return Placement({a: "ghost" for a in agents}, True, 0.0)
        if kind == 4:
            return Placement(dict(list(plan.assignments.items())[:-1]), True, 0.0)
        if kind == 5:
            return Placement({**plan.assignments, "intruder": servers[0]}, True, 0.0)
        if kind == 6:
            return "a0 -> s0"
        return Placement({a: servers[int(self.rng.integers(len(servers)))] for a in agents}, True, -1.0)


def test_c5_refiner_safety():
    rng = np.random.default_rng(77)
    adversary = Adversary(rng)
    trials = bad = 0
    seed = 0
    while trials < 1000:
        seed += 1
        if seed % 2:
            task, system = random_instance(np.random.default_rng(seed))
            try:
                res = alp_solve(task, system, AcoParams(num_ants=3, iterations=2, seed=seed))
            except Infeasible:
                continue
            cands = system.candidates(task.origin_server)
            if check_placement(task, res, system, cands):
                cands = system.server_ids
            req = RefinementRequest(res, system, task, candidates=cands, incumbent_score=res.score)
            before = evaluate(req, res)
            out = refine(req, adversary)
            after = evaluate(req, out) if isinstance(out, Placement) else None
            if after is None or after > before or check_placement(task, out, system, cands):
                bad += 1
            assert out.score == pytest.approx(ead_objective(task, out, system, client=task.origin_server))
        else:
            inst = random_migration_instance(np.random.default_rng(seed))
            if inst is None:
                continue
            system, client, msg = inst
            plan = alm_solve("x", system, AcoParams(iterations=5, seed=seed), client, client_message_mb=msg)
            if plan is None:
                continue
            req = RefinementRequest(plan, system, client=client, client_message_mb=msg, incumbent_score=-plan.gain.net_s)
            out = refine(req, adversary)
            cands, ok = migration_candidates(system, "x")
            feasible = isinstance(out, MigrationPlan) and out.target in cands and ok[cands.index(out.target)]
            true_net = net_gain("x", out.target, system, client, client_message_mb=msg).net_s if feasible else None
            if not feasible or true_net < plan.gain.net_s or true_net != out.gain.net_s:
                bad += 1
        trials += 1
    ok = bad == 0
    report(5, "refiner safety", ok, f"{trials} adversarial trials, {bad} infeasible or worse outputs")
    assert ok


# ---------------------------------------------------------------- 6


def _run_cli(args, hash_seed):
    env = {**os.environ, "PYTHONHASHSEED": str(hash_seed)}
    proc = subprocess.run([sys.executable, "-m", "agentplace.cli", *args], env=env, capture_output=True, text=True)
    return proc.returncode


def test_c6_cli_determinism(tmp_path):
    scn_path = tmp_path / "scenario.json"
    save_scenario(generate_scenario(6, 8, 21), scn_path)
    commands = ["place", "migrate", "simulate", "compare", "oracle-check", "generate"]
    mismatched = []
    for cmd in commands:
        for fmt in ("csv", "json"):
            if cmd == "generate" and fmt == "json":
                continue
            outs = []
            for run, hash_seed in enumerate((1, 2)):
                out = tmp_path / f"{cmd}-{fmt}-{run}.out"
                if cmd == "generate":
                    args = ["generate", "--servers", "6", "--tasks", "8", "--seed", "21", "--out", str(out)]
                else:
                    args = [cmd, "--scenario", str(scn_path), "--seed", "5", "--format", fmt, "--out", str(out)]
                code = _run_cli(args, hash_seed)
                assert code == 0, f"{cmd} exited {code}"
                outs.append(out)
            if not filecmp.cmp(outs[0], outs[1], shallow=False):
                mismatched.append(f"{cmd}/{fmt}")
    ok = not mismatched
    report(6, "CLI determinism", ok, f"{len(commands)} commands, byte-identical reruns; mismatches: {mismatched or 'none'}")
    assert ok


# ---------------------------------------------------------------- 7


def test_c7_golden_trace():
    system, tasks, config = golden_world()
    record = simulate(system, tasks, make_policy("antllm"), config)
    got = [(m.epoch, m.agent_id, m.source, m.target, round(m.net_s, 9)) for m in record.migrations]
    want = [(2, "A", "s0", "s1", 3.6095), (2, "B", "s3", "s2", 3.6095)]
    ok = got == want and record.deferred_migrations == 2
    report(7, "golden trace", ok, f"migrations {got}, deferred {record.deferred_migrations}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-q"]))
