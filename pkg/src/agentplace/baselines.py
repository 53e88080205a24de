"""Greedy, random and polling placement/migration policies used for comparison."""

from __future__ import annotations

import numpy as np

from .aco import MigrationPlan, migration_candidates, placement_heuristic, placement_order
from .costs import ead_objective, net_gain
from .errors import Infeasible
from .model import EdgeSystem, Placement, Task


def _colocation_ok(agent_id: str, server_id: str, system: EdgeSystem) -> bool:
    agent = system.agents[agent_id]
    peers = set(agent.colocate_with) | {b.id for b in system.agents.values() if agent_id in b.colocate_with}
    return all(system.host_of(p) in (None, server_id) for p in peers)


def _feasible(agent_id: str, servers: list[str], sandbox: EdgeSystem) -> list[str]:
    req = sandbox.agents[agent_id].requirements
    return [
        s for s in servers if sandbox.servers[s].can_host(req) and _colocation_ok(agent_id, s, sandbox)
    ]


def _sequential(task: Task, system: EdgeSystem, servers: list[str], choose) -> Placement:
    """Place agents one by one on a scratch copy; ``choose(agent, feasible, partial, sandbox)``."""
    sandbox = system.copy()
    partial: dict[str, str] = {}
    for agent_id in placement_order([a for a in task.required_agents if system.host_of(a) is None], system):
        options = _feasible(agent_id, servers, sandbox)
        if not options:
            return Placement(partial, feasible=False)
        server_id = choose(agent_id, options, partial, sandbox)
        sandbox.deploy(agent_id, server_id)
        partial[agent_id] = server_id
    return Placement(partial, feasible=True)


def _with_fallback(task, system, client, candidates, choose) -> Placement:
    origin = client or task.origin_server
    servers = candidates if candidates is not None else system.candidates(origin)
    placement = _sequential(task, system, servers, choose)
    if not placement.feasible and candidates is None and len(servers) < len(system.servers):
        servers = system.server_ids
        placement = _sequential(task, system, servers, choose)
    if not placement.feasible:
        raise Infeasible(f"no legal placement for task {task.id}")
    placement.score = ead_objective(task, placement, system, client=origin)
    return placement


def greedy_place(
    task: Task, system: EdgeSystem, client: str | None = None, candidates: list[str] | None = None
) -> Placement:
    def choose(agent_id, options, partial, sandbox):
        # the sandbox already carries the partial placement, so score against it directly
        scores = [placement_heuristic(agent_id, s, {}, sandbox) for s in options]
        return options[int(np.argmax(scores))]

    return _with_fallback(task, system, client, candidates, choose)


def random_place(
    task: Task,
    system: EdgeSystem,
    seed: int | np.random.Generator = 0,
    client: str | None = None,
    candidates: list[str] | None = None,
) -> Placement:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def choose(agent_id, options, partial, sandbox):
        return options[int(rng.integers(len(options)))]

    return _with_fallback(task, system, client, candidates, choose)


class Poller:
    """Round-robin placement whose cursor survives across agents and calls."""

    def __init__(self, cursor: int = 0):
        self.cursor = cursor

    def place(
        self, task: Task, system: EdgeSystem, client: str | None = None, candidates: list[str] | None = None
    ) -> Placement:
        order = system.server_ids
        start = self.cursor

        def choose(agent_id, options, partial, sandbox):
            allowed = set(options)
            n = len(order)
            for step in range(n):
                s = order[(self.cursor + step) % n]
                if s in allowed:
                    self.cursor = (order.index(s) + 1) % n
                    return s
            raise AssertionError("options must be non-empty")

        try:
            return _with_fallback(task, system, client, candidates, choose)
        except Infeasible:
            self.cursor = start
            raise


def polling_place(
    task: Task,
    system: EdgeSystem,
    client: str | None = None,
    candidates: list[str] | None = None,
    cursor: int = 0,
) -> Placement:
    return Poller(cursor).place(task, system, client, candidates)


# ---------------------------------------------------------------- migration counterparts


def _migrate_if_profitable(agent_id, target, system, client, client_message_mb) -> MigrationPlan | None:
    gain = net_gain(agent_id, target, system, client, client_message_mb=client_message_mb)
    if gain.net_s > 0:
        return MigrationPlan(agent_id, system.host_of(agent_id), target, gain)
    return None


def greedy_migrate(agent_id: str, system: EdgeSystem, client, client_message_mb=None) -> MigrationPlan | None:
    """Move to the neighbour with the best capacity score, if that pays off."""
    cands, ok = migration_candidates(system, agent_id)
    options = [s for s, f in zip(cands, ok) if f]
    if not options:
        return None
    scores = [placement_heuristic(agent_id, s, {}, system) for s in options]
    return _migrate_if_profitable(agent_id, options[int(np.argmax(scores))], system, client, client_message_mb)


def random_migrate(
    agent_id: str, system: EdgeSystem, client, rng: np.random.Generator, client_message_mb=None
) -> MigrationPlan | None:
    cands, ok = migration_candidates(system, agent_id)
    options = [s for s, f in zip(cands, ok) if f]
    if not options:
        return None
    target = options[int(rng.integers(len(options)))]
    return _migrate_if_profitable(agent_id, target, system, client, client_message_mb)


def polling_migrate(agent_id: str, system: EdgeSystem, client, client_message_mb=None) -> MigrationPlan | None:
    """First neighbour (server order) with room, if that pays off."""
    cands, ok = migration_candidates(system, agent_id)
    for s in system.server_ids:
        if s in cands and ok[cands.index(s)]:
            return _migrate_if_profitable(agent_id, s, system, client, client_message_mb)
    return None
