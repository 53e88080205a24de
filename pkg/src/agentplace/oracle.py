"""Exhaustive reference solvers for small instances."""

from __future__ import annotations

import itertools
import math

from .aco import MigrationPlan, migration_candidates
from .costs import check_placement, ead_objective, net_gain
from .errors import BudgetExceeded, Infeasible
from .model import EdgeSystem, ObjectiveWeights, Placement, Task

MAX_STATES = 10**6


def brute_force_optimal(
    task: Task,
    system: EdgeSystem,
    weights: ObjectiveWeights | None = None,
    client: str | None = None,
    candidates: list[str] | None = None,
    max_states: int = MAX_STATES,
) -> Placement:
    """Exact minimiser of the placement objective by full enumeration.

    Mirrors the solvers' candidate rule: the client's neighbourhood first,
    every server if the neighbourhood admits no legal placement.
    """
    origin = client or task.origin_server
    servers = candidates if candidates is not None else system.candidates(origin)
    best = _enumerate(task, system, weights, origin, servers, max_states)
    if best is None and candidates is None and len(servers) < len(system.servers):
        best = _enumerate(task, system, weights, origin, system.server_ids, max_states)
    if best is None:
        raise Infeasible(f"task {task.id} has no legal placement")
    return best


def _enumerate(task, system, weights, origin, servers, max_states) -> Placement | None:
    agents = sorted(a for a in dict.fromkeys(task.required_agents) if system.host_of(a) is None)
    states = len(servers) ** len(agents)
    if states > max_states:
        raise BudgetExceeded(f"{states} assignments exceed the budget of {max_states}")
    best: Placement | None = None
    for combo in itertools.product(servers, repeat=len(agents)):
        candidate = Placement(dict(zip(agents, combo)))
        if check_placement(task, candidate, system, servers):
            continue
        score = ead_objective(task, candidate, system, weights, client=origin, candidates=servers)
        if best is None or score < best.score:
            candidate.score = score
            best = candidate
    return best


def best_migration(
    agent_id: str,
    system: EdgeSystem,
    client,
    weights: ObjectiveWeights | None = None,
    client_message_mb: float | None = None,
) -> MigrationPlan | None:
    """Highest net-gain target in the migration neighbourhood, or None if nothing pays off."""
    cands, ok = migration_candidates(system, agent_id)
    best, best_gain = None, None
    for target, feasible in zip(cands, ok):
        if not feasible:
            continue
        gain = net_gain(agent_id, target, system, client, weights, client_message_mb)
        if best_gain is None or gain.net_s > best_gain.net_s:
            best, best_gain = target, gain
    if best is None or not best_gain.net_s > 0:
        return None
    return MigrationPlan(agent_id, system.host_of(agent_id), best, best_gain)


def optimal_score(task: Task, system: EdgeSystem, **kwargs) -> float:
    try:
        return brute_force_optimal(task, system, **kwargs).score
    except Infeasible:
        return math.inf
